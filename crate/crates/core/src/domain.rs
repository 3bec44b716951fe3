//! Shared vocabulary: labels, spans, triplets, sentences and episode traces.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("span [{start}, {end}] is invalid for a sentence of length {len}")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("sentence has {tokens} tokens but {tags} POS tags")]
    PosLengthMismatch { tokens: usize, tags: usize },
    #[error("triplet sentiment must be positive, negative or neutral")]
    NoneSentiment,
    #[error("unknown sentiment label `{0}`")]
    UnknownSentiment(String),
}

/// High-level option label. `None` is never a triplet polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    None,
    Positive,
    Negative,
    Neutral,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 4] = [
        SentimentLabel::None,
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];
    pub const POLARITIES: [SentimentLabel; 3] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_polarity(self) -> bool {
        self != SentimentLabel::None
    }

    /// Index among the three polarities, or `None` for the none option.
    pub fn polarity_index(self) -> Option<usize> {
        match self {
            SentimentLabel::None => None,
            s => Some(s.index() - 1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::None => "none",
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(SentimentLabel::None),
            "positive" | "pos" => Ok(SentimentLabel::Positive),
            "negative" | "neg" => Ok(SentimentLabel::Negative),
            "neutral" | "neu" => Ok(SentimentLabel::Neutral),
            _ => Err(DomainError::UnknownSentiment(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::B, BioTag::I, BioTag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Inclusive token range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    start: usize,
    end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, DomainError> {
        if start > end {
            return Err(DomainError::SpanOutOfRange { start, end, len: 0 });
        }
        Ok(Span { start, end })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fits(&self, len: usize) -> bool {
        self.end < len
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl TryFrom<(usize, usize)> for Span {
    type Error = DomainError;

    fn try_from((s, e): (usize, usize)) -> Result<Self, Self::Error> {
        Span::new(s, e)
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub aspect: Span,
    pub opinion: Span,
    pub sentiment: SentimentLabel,
}

impl Triplet {
    pub fn new(aspect: Span, opinion: Span, sentiment: SentimentLabel) -> Result<Self, DomainError> {
        if !sentiment.is_polarity() {
            return Err(DomainError::NoneSentiment);
        }
        Ok(Triplet { aspect, opinion, sentiment })
    }
}

/// The 17-tag universal POS set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl Upos {
    pub const COUNT: usize = 17;
    pub const ALL: [Upos; 17] = [
        Upos::ADJ,
        Upos::ADP,
        Upos::ADV,
        Upos::AUX,
        Upos::CCONJ,
        Upos::DET,
        Upos::INTJ,
        Upos::NOUN,
        Upos::NUM,
        Upos::PART,
        Upos::PRON,
        Upos::PROPN,
        Upos::PUNCT,
        Upos::SCONJ,
        Upos::SYM,
        Upos::VERB,
        Upos::X,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; 17] = [
            "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON",
            "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
        ];
        NAMES[self.index()]
    }

    /// Unknown names map to `X`.
    pub fn from_name(name: &str) -> Upos {
        let upper = name.trim().to_ascii_uppercase();
        Upos::ALL
            .iter()
            .copied()
            .find(|t| t.name() == upper)
            .unwrap_or(Upos::X)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    id: String,
    tokens: Vec<String>,
    pos_tags: Vec<Upos>,
    gold: Vec<Triplet>,
}

impl Sentence {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        pos_tags: Vec<Upos>,
        gold: Vec<Triplet>,
    ) -> Result<Self, DomainError> {
        if tokens.is_empty() {
            return Err(DomainError::EmptySentence);
        }
        if tokens.len() != pos_tags.len() {
            return Err(DomainError::PosLengthMismatch {
                tokens: tokens.len(),
                tags: pos_tags.len(),
            });
        }
        let len = tokens.len();
        for t in &gold {
            for s in [t.aspect, t.opinion] {
                if !s.fits(len) {
                    return Err(DomainError::SpanOutOfRange { start: s.start, end: s.end, len });
                }
            }
            if !t.sentiment.is_polarity() {
                return Err(DomainError::NoneSentiment);
            }
        }
        Ok(Sentence { id: id.into(), tokens, pos_tags, gold })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pos_tags(&self) -> &[Upos] {
        &self.pos_tags
    }

    pub fn gold(&self) -> &[Triplet] {
        &self.gold
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn with_gold(&self, gold: Vec<Triplet>) -> Result<Self, DomainError> {
        Sentence::new(self.id.clone(), self.tokens.clone(), self.pos_tags.clone(), gold)
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }
}

/// Decode a tag sequence into its single span.
///
/// Valid sequences have the shape `O* B I* O*`; anything else (no B, several
/// B, or an I that does not continue a run) decodes to `None`.
pub fn decode_span(tags: &[BioTag]) -> Option<Span> {
    let mut begin = None;
    let mut end = 0;
    let mut prev = BioTag::O;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            BioTag::B => {
                if begin.is_some() {
                    return None;
                }
                begin = Some(i);
                end = i;
            }
            BioTag::I => {
                if prev == BioTag::O {
                    return None;
                }
                end = i;
            }
            BioTag::O => {}
        }
        prev = tag;
    }
    begin.map(|start| Span { start, end })
}

pub fn bio_labels_for(span: Span, len: usize) -> Result<Vec<BioTag>, DomainError> {
    if !span.fits(len) {
        return Err(DomainError::SpanOutOfRange { start: span.start, end: span.end, len });
    }
    let mut tags = vec![BioTag::O; len];
    tags[span.start] = BioTag::B;
    for t in &mut tags[span.start + 1..=span.end] {
        *t = BioTag::I;
    }
    Ok(tags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverlapClass {
    NoOverlap,
    Overlap,
}

/// Which span relations make two triplets "overlapping".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapRule {
    /// Any span of one triplet intersects any span of the other.
    #[default]
    AnyIntersection,
    /// Only identical aspect spans or identical opinion spans count.
    SharedSpanOnly,
}

impl OverlapRule {
    fn related(self, a: &Triplet, b: &Triplet) -> bool {
        match self {
            OverlapRule::AnyIntersection => {
                a.aspect.intersects(&b.aspect)
                    || a.opinion.intersects(&b.opinion)
                    || a.aspect.intersects(&b.opinion)
                    || a.opinion.intersects(&b.aspect)
            }
            OverlapRule::SharedSpanOnly => a.aspect == b.aspect || a.opinion == b.opinion,
        }
    }
}

pub fn triplet_overlap_class(gold: &[Triplet]) -> OverlapClass {
    triplet_overlap_class_with(gold, OverlapRule::default())
}

/// Duplicated triplets are collapsed before pairs are compared.
pub fn triplet_overlap_class_with(gold: &[Triplet], rule: OverlapRule) -> OverlapClass {
    let unique: Vec<&Triplet> = gold.iter().collect::<BTreeSet<_>>().into_iter().collect();
    for (i, a) in unique.iter().enumerate() {
        for b in &unique[i + 1..] {
            if rule.related(a, b) {
                return OverlapClass::Overlap;
            }
        }
    }
    OverlapClass::NoOverlap
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtaskKind {
    Opinion,
    Aspect,
}

impl SubtaskKind {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionStep {
    pub position: usize,
    pub option: SentimentLabel,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagStep {
    pub tag: BioTag,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskTrace {
    pub kind: SubtaskKind,
    pub anchor: usize,
    pub sentiment: SentimentLabel,
    pub actions: Vec<TagStep>,
    /// Per-step rewards after gating.
    pub rewards: Vec<f64>,
    pub final_reward: f64,
    /// Whether the launching option matched a gold triplet.
    pub option_correct: bool,
    pub decoded: Option<Span>,
}

impl SubtaskTrace {
    pub fn tags(&self) -> Vec<BioTag> {
        self.actions.iter().map(|a| a.tag).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() + self.final_reward
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub sentence_id: String,
    pub options: Vec<OptionStep>,
    /// Subtasks in launch order: opinion then aspect for every non-none option.
    pub subtasks: Vec<SubtaskTrace>,
    pub high_rewards: Vec<f64>,
    pub high_final_reward: f64,
    pub predicted: Vec<Triplet>,
}

impl EpisodeTrace {
    /// Index of the option step that launched each subtask pair.
    pub fn launch_positions(&self) -> Vec<usize> {
        self.options
            .iter()
            .filter(|o| o.option.is_polarity())
            .map(|o| o.position)
            .collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.high_rewards.iter().sum::<f64>()
            + self.high_final_reward
            + self.subtasks.iter().map(SubtaskTrace::total_reward).sum::<f64>()
    }
}
