use crate::domain::{BioTag, SentimentLabel, Span};

use super::GoldAlignment;

/// Tag-dependent weight of a correct low-level action, indexed by [`BioTag::index`].
pub type TagWeights = [f64; 3];

/// +1 when the option's class is still available among the gold triplets,
/// 0 for `none`, −1 otherwise.
pub fn high_reward(option: SentimentLabel, alignment: &GoldAlignment) -> f64 {
    if !option.is_polarity() {
        0.0
    } else if alignment.has_unconsumed(option) {
        1.0
    } else {
        -1.0
    }
}

/// F-beta between the multisets of emitted option classes and gold triplet
/// classes. `none` entries are ignored; two empty multisets score 1.
pub fn high_final_reward(predicted: &[SentimentLabel], gold: &[SentimentLabel], beta: f64) -> f64 {
    let counts = |xs: &[SentimentLabel]| {
        let mut c = [0usize; 4];
        xs.iter().filter(|s| s.is_polarity()).for_each(|s| c[s.index()] += 1);
        c
    };
    let (p, g) = (counts(predicted), counts(gold));
    let (np, ng): (usize, usize) = (p.iter().sum(), g.iter().sum());
    if np == 0 && ng == 0 {
        return 1.0;
    }
    if np == 0 || ng == 0 {
        return 0.0;
    }
    let tp: usize = p.iter().zip(&g).map(|(a, b)| *a.min(b)).sum();
    let precision = tp as f64 / np as f64;
    let recall = tp as f64 / ng as f64;
    let b2 = beta * beta;
    if precision + recall == 0.0 {
        return 0.0;
    }
    (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

pub fn low_reward(action: BioTag, gold: BioTag, weights: &TagWeights) -> f64 {
    if action == gold {
        weights[gold.index()]
    } else {
        -0.5
    }
}

/// +1 for an exact tag sequence, −1 otherwise, plus `malformed_penalty`
/// when the tags do not decode to a span.
pub fn low_final_reward(actions: &[BioTag], gold: &[BioTag], decoded: Option<Span>, malformed_penalty: f64) -> f64 {
    let base = if actions == gold { 1.0 } else { -1.0 };
    if decoded.is_none() {
        base + malformed_penalty
    } else {
        base
    }
}

pub fn gate_low_rewards(option_correct: bool, rewards: &[f64]) -> Vec<f64> {
    if option_correct {
        rewards.to_vec()
    } else {
        vec![0.0; rewards.len()]
    }
}
