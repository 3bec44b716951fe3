//! POS tags: a per-sentence sidecar file or a small rule cascade.

use crate::domain::Upos;

#[derive(Debug, Clone, PartialEq)]
pub enum PosProvider {
    /// Tags for the k-th sentence of the corpus.
    Sidecar(Vec<Vec<Upos>>),
    Heuristic,
}

impl PosProvider {
    pub fn tags_for(&self, index: usize, tokens: &[String]) -> Result<Vec<Upos>, String> {
        match self {
            PosProvider::Heuristic => Ok(heuristic_pos(tokens)),
            PosProvider::Sidecar(all) => {
                let tags = all.get(index).ok_or_else(|| format!("POS sidecar has no line for sentence {}", index + 1))?;
                if tags.len() != tokens.len() {
                    return Err(format!(
                        "POS sidecar line {} has {} tags for {} tokens",
                        index + 1,
                        tags.len(),
                        tokens.len()
                    ));
                }
                Ok(tags.clone())
            }
        }
    }
}

/// One line per sentence, space-separated tag names; unknown names become `X`.
pub fn parse_pos_sidecar(text: &str) -> Vec<Vec<Upos>> {
    text.lines()
        .map(|l| l.split_whitespace().map(Upos::from_name).collect())
        .collect()
}

pub fn write_pos_sidecar(tags: &[Vec<Upos>]) -> String {
    tags.iter()
        .map(|t| t.iter().map(|u| u.name()).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

const LEXICON: &[(Upos, &[&str])] = &[
    (
        Upos::DET,
        &["the", "a", "an", "this", "that", "these", "those", "some", "any", "every", "each", "no", "all", "both", "another"],
    ),
    (
        Upos::PRON,
        &[
            "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your", "his", "its",
            "our", "their", "mine", "yours", "myself", "itself", "what", "who", "whom", "which", "whose", "everything",
            "something", "nothing", "anything", "everyone", "someone",
        ],
    ),
    (
        Upos::AUX,
        &[
            "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does", "did", "can",
            "could", "will", "would", "shall", "should", "may", "might", "must", "'s", "'re", "'m", "'ve", "'ll", "'d",
            "ca", "wo",
        ],
    ),
    (
        Upos::ADP,
        &[
            "in", "on", "at", "by", "for", "with", "from", "to", "of", "about", "into", "over", "under", "after",
            "before", "between", "through", "during", "without", "within", "out", "up", "down", "off", "than",
            "around", "like", "across", "behind", "near",
        ],
    ),
    (Upos::CCONJ, &["and", "but", "or", "nor", "yet", "&"]),
    (Upos::SCONJ, &["because", "although", "though", "while", "if", "when", "whereas", "unless", "since", "whether"]),
    (Upos::PART, &["not", "n't", "never"]),
    (
        Upos::ADV,
        &[
            "very", "too", "also", "just", "quite", "so", "there", "here", "then", "now", "even", "still", "again",
            "always", "often", "rather", "pretty", "well", "almost", "ever", "once", "soon", "already",
        ],
    ),
    (
        Upos::ADJ,
        &[
            "good", "great", "excellent", "bad", "terrible", "awful", "nice", "fast", "slow", "expensive", "cheap",
            "delicious", "friendly", "rude", "amazing", "horrible", "tasty", "fresh", "best", "worst", "poor",
            "decent", "fantastic", "wonderful", "perfect", "happy", "big", "small", "large", "new", "old", "hot",
            "cold", "clean", "dirty", "average", "ok", "okay", "fine", "bland", "superb", "awesome", "lovely", "noisy",
            "quiet", "loud", "light", "heavy", "sharp", "bright", "dull", "helpful", "attentive", "reasonable",
            "overall", "standard", "ordinary", "mediocre", "stale", "greasy", "slick", "sturdy", "flimsy", "cozy",
            "crowded", "spacious", "pricey", "generous", "long", "short", "high", "low",
        ],
    ),
    (Upos::INTJ, &["oh", "wow", "yes", "please", "hey", "ugh", "yum"]),
    (Upos::NUM, &["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "hundred"]),
    (Upos::SYM, &["$", "%", "+", "=", "@", "#", "~", "*"]),
];

fn lexicon(word: &str) -> Option<Upos> {
    LEXICON.iter().find(|(_, words)| words.contains(&word)).map(|(tag, _)| *tag)
}

fn is_punct(token: &str) -> bool {
    token.chars().all(|c| c.is_ascii_punctuation() || matches!(c, '…' | '–' | '—' | '“' | '”' | '‘' | '’'))
}

fn is_number(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit()) && token.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '/' | ':'))
}

/// Deterministic rule cascade: closed-class lexicon, mid-sentence capitalisation,
/// suffix rules, digits, punctuation, then `NOUN`.
pub fn heuristic_pos(tokens: &[String]) -> Vec<Upos> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            let lower = tok.to_lowercase();
            if let Some(tag) = lexicon(&lower) {
                return tag;
            }
            if i > 0 && tok.chars().next().is_some_and(char::is_uppercase) {
                return Upos::PROPN;
            }
            let alpha = lower.chars().any(|c| c.is_alphabetic());
            if alpha && lower.len() > 3 && lower.ends_with("ly") {
                return Upos::ADV;
            }
            if alpha && lower.len() > 4 && (lower.ends_with("ing") || lower.ends_with("ed")) {
                return Upos::VERB;
            }
            if alpha && lower.len() > 2 && lower.ends_with('s') && !lower.ends_with("ss") {
                return Upos::NOUN;
            }
            if is_number(tok) {
                return Upos::NUM;
            }
            if is_punct(tok) {
                return Upos::PUNCT;
            }
            Upos::NOUN
        })
        .collect()
}
