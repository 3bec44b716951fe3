//! Template corpus with known gold triplets, for learnability checks.
//!
//! Sentences are one to three clauses such as `the <aspect> is [modifier] <opinion>`
//! or `we had [modifier] <opinion> <aspect>`, joined by `and`, `but` or a comma.
//! An overlapping sentence contains a clause that attaches two opinions to one
//! aspect (`the food is great but slightly expensive`). The sentiment of a triplet
//! is the class of its opinion word.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{Sentence, SentimentLabel, Span, Triplet};
use crate::{derived_rng, SeededRng};

use super::pos::heuristic_pos;

const ASPECTS: &[&str] = &[
    "food", "service", "staff", "pizza", "pasta", "sushi", "wine", "coffee", "dessert", "menu", "decor",
    "atmosphere", "music", "waiter", "location", "view", "bread", "salad", "soup", "steak", "burger", "patio",
    "screen", "keyboard", "battery", "touchpad", "speaker", "camera", "processor", "design", "software", "display",
    "charger", "battery life", "hard drive", "wine list", "dining room", "customer support",
];

const POSITIVE: &[&str] = &[
    "great", "excellent", "delicious", "amazing", "friendly", "fantastic", "wonderful", "perfect", "tasty", "fresh",
    "superb", "awesome", "lovely", "cozy", "helpful", "attentive", "generous", "sturdy", "bright", "impressive",
];

const NEGATIVE: &[&str] = &[
    "terrible", "awful", "rude", "horrible", "bland", "slow", "expensive", "noisy", "dirty", "stale", "greasy",
    "mediocre", "flimsy", "crowded", "overpriced", "dull", "poor", "cold", "loud", "pricey",
];

const NEUTRAL: &[&str] = &["average", "okay", "standard", "ordinary", "acceptable", "typical", "plain", "simple"];

const MODIFIERS: &[&str] = &["very", "really", "quite", "slightly", "rather", "pretty", "extremely", "too"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub n_sentences: usize,
    /// 1 to 3.
    pub max_triplets: usize,
    /// Probability that a sentence with two or more triplets contains an
    /// overlapping pair.
    pub overlap_rate: f64,
    /// Probability of replacing a triplet's sentiment with a different polarity.
    pub label_noise: f64,
    /// Probability that an opinion carries a modifier word.
    pub modifier_rate: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions { n_sentences: 100, max_triplets: 3, overlap_rate: 0.3, label_noise: 0.0, modifier_rate: 0.3 }
    }
}

struct Builder {
    tokens: Vec<String>,
    triplets: Vec<Triplet>,
}

impl Builder {
    /// Append words and return their span.
    fn push(&mut self, text: &str) -> Span {
        let start = self.tokens.len();
        self.tokens.extend(text.split(' ').map(String::from));
        Span::new(start, self.tokens.len() - 1).expect("non-empty text")
    }
}

struct Opinion {
    text: String,
    sentiment: SentimentLabel,
}

fn opinion(rng: &mut SeededRng, used: &mut Vec<&'static str>, modifier_rate: f64) -> Opinion {
    let (words, sentiment) = match rng.gen_range(0..10) {
        0..=3 => (POSITIVE, SentimentLabel::Positive),
        4..=7 => (NEGATIVE, SentimentLabel::Negative),
        _ => (NEUTRAL, SentimentLabel::Neutral),
    };
    let word = loop {
        let w = *words.choose(rng).expect("non-empty lexicon");
        if !used.contains(&w) {
            used.push(w);
            break w;
        }
    };
    let text = if rng.gen_bool(modifier_rate) {
        format!("{} {word}", MODIFIERS.choose(rng).expect("non-empty"))
    } else {
        word.to_string()
    };
    Opinion { text, sentiment }
}

fn aspect(rng: &mut SeededRng, used: &mut Vec<&'static str>) -> &'static str {
    loop {
        let a = *ASPECTS.choose(rng).expect("non-empty");
        if !used.contains(&a) {
            used.push(a);
            return a;
        }
    }
}

fn noisy(rng: &mut SeededRng, s: SentimentLabel, rate: f64) -> SentimentLabel {
    if rate > 0.0 && rng.gen_bool(rate) {
        let others: Vec<SentimentLabel> = SentimentLabel::POLARITIES.iter().copied().filter(|&p| p != s).collect();
        *others.choose(rng).expect("two other polarities")
    } else {
        s
    }
}

/// Write one clause with one aspect and one or two opinions into `b`.
fn clause(b: &mut Builder, rng: &mut SeededRng, aspect: &str, opinions: &[Opinion]) -> Vec<(Span, Span, SentimentLabel)> {
    let mut out = Vec::new();
    if opinions.len() == 2 {
        let verb = ["is", "was", "seems"].choose(rng).expect("non-empty");
        b.push("the");
        let a = b.push(aspect);
        b.push(verb);
        let o1 = b.push(&opinions[0].text);
        b.push(["but", "and"].choose(rng).expect("non-empty"));
        let o2 = b.push(&opinions[1].text);
        out.push((a, o1, opinions[0].sentiment));
        out.push((a, o2, opinions[1].sentiment));
        return out;
    }
    let op = &opinions[0];
    match rng.gen_range(0..6) {
        0..=2 => {
            b.push("the");
            let a = b.push(aspect);
            b.push(["is", "was", "seems"][rng.gen_range(0..3)]);
            let o = b.push(&op.text);
            out.push((a, o, op.sentiment));
        }
        3 => {
            b.push("i found the");
            let a = b.push(aspect);
            let o = b.push(&op.text);
            out.push((a, o, op.sentiment));
        }
        _ => {
            b.push(["they have", "we had"][rng.gen_range(0..2)]);
            let o = b.push(&op.text);
            let a = b.push(aspect);
            out.push((a, o, op.sentiment));
        }
    }
    out
}

fn sentence(rng: &mut SeededRng, id: String, opts: &SyntheticOptions) -> Sentence {
    let max = opts.max_triplets.clamp(1, 3);
    let n = match rng.gen_range(0..20) {
        0..=7 => 1,
        8..=14 => 2,
        _ => 3,
    }
    .min(max);
    let overlap = n >= 2 && rng.gen_bool(opts.overlap_rate.clamp(0.0, 1.0));
    let mut used_aspects = Vec::new();
    let mut used_opinions = Vec::new();

    // each clause: number of opinions attached to its aspect
    let mut clauses: Vec<usize> = if overlap {
        std::iter::once(2).chain(std::iter::repeat_n(1, n - 2)).collect()
    } else {
        vec![1; n]
    };
    clauses.shuffle(rng);

    let mut b = Builder { tokens: Vec::new(), triplets: Vec::new() };
    for (i, &k) in clauses.iter().enumerate() {
        if i > 0 {
            b.push([",", "and", "but"][rng.gen_range(0..3)]);
        }
        let a = aspect(rng, &mut used_aspects);
        let ops: Vec<Opinion> = (0..k).map(|_| opinion(rng, &mut used_opinions, opts.modifier_rate)).collect();
        for (asp, op, s) in clause(&mut b, rng, a, &ops) {
            let s = noisy(rng, s, opts.label_noise);
            b.triplets.push(Triplet { aspect: asp, opinion: op, sentiment: s });
        }
    }
    b.push(if rng.gen_bool(0.8) { "." } else { "!" });
    if let Some(first) = b.tokens.first_mut() {
        let mut c = first.chars();
        *first = c.next().map(|h| h.to_uppercase().chain(c).collect()).unwrap_or_default();
    }
    let pos = heuristic_pos(&b.tokens);
    Sentence::new(id, b.tokens, pos, b.triplets).expect("template spans fit their sentence")
}

/// `opts.n_sentences` sentences, identical for identical `(seed, opts)`.
pub fn generate_synthetic_corpus(seed: u64, opts: &SyntheticOptions) -> Vec<Sentence> {
    let mut rng = derived_rng(seed, 0x5_7e7);
    (0..opts.n_sentences).map(|i| sentence(&mut rng, format!("syn{seed}-{i}"), opts)).collect()
}

/// Every word the generator can emit, lowercased.
pub fn synthetic_vocabulary() -> Vec<String> {
    let fixed = [
        "the", "is", "was", "seems", "but", "and", ",", ".", "!", "i", "found", "they", "have", "we", "had",
    ];
    let mut words: Vec<String> = ASPECTS
        .iter()
        .chain(POSITIVE)
        .chain(NEGATIVE)
        .chain(NEUTRAL)
        .chain(MODIFIERS)
        .chain(fixed.iter())
        .flat_map(|w| w.split(' '))
        .map(String::from)
        .collect();
    words.sort();
    words.dedup();
    words
}
