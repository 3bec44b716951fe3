use std::collections::BTreeSet;

use crate::config::AnchorRule;
use crate::domain::{SentimentLabel, Triplet};
use crate::Error;

/// Gold triplets of one sentence with per-episode consumption flags.
#[derive(Debug, Clone)]
pub struct GoldAlignment {
    gold: Vec<Triplet>,
    consumed: Vec<bool>,
}

impl GoldAlignment {
    /// Duplicate gold triplets are collapsed.
    pub fn new(gold: &[Triplet]) -> Self {
        let gold: Vec<Triplet> = gold.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let consumed = vec![false; gold.len()];
        GoldAlignment { gold, consumed }
    }

    pub fn gold(&self) -> &[Triplet] {
        &self.gold
    }

    pub fn has_unconsumed(&self, sentiment: SentimentLabel) -> bool {
        self.gold.iter().zip(&self.consumed).any(|(t, &c)| !c && t.sentiment == sentiment)
    }

    pub fn remaining(&self) -> usize {
        self.consumed.iter().filter(|c| !**c).count()
    }

    pub fn is_consumed(&self, index: usize) -> bool {
        self.consumed[index]
    }
}

/// Consume and return the unconsumed gold triplet of the given sentiment
/// whose opinion span ends nearest to `anchor` (ties go to the leftmost).
pub fn align_gold(alignment: &mut GoldAlignment, anchor: usize, sentiment: SentimentLabel) -> Option<Triplet> {
    if !sentiment.is_polarity() {
        return None;
    }
    let best = alignment
        .gold
        .iter()
        .enumerate()
        .filter(|(i, t)| !alignment.consumed[*i] && t.sentiment == sentiment)
        .min_by_key(|(_, t)| (t.opinion.end().abs_diff(anchor), t.opinion.end(), t.opinion.start(), t.aspect))
        .map(|(i, _)| i)?;
    alignment.consumed[best] = true;
    Some(alignment.gold[best])
}

pub fn anchor_of(triplet: &Triplet, rule: AnchorRule) -> usize {
    match rule {
        AnchorRule::LastToken => triplet.opinion.end(),
        AnchorRule::FirstToken => triplet.opinion.start(),
    }
}

/// Forced option at every position for a teacher-forced episode.
///
/// Each distinct gold triplet gets its own anchor; when two want the same
/// position the later one moves to the nearest free position, trying the
/// right side first.
pub fn anchor_plan(gold: &[Triplet], len: usize, rule: AnchorRule) -> Result<Vec<SentimentLabel>, Error> {
    let unique: Vec<Triplet> = gold.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.len() > len {
        return Err(Error::Usage(format!(
            "{} distinct gold triplets cannot be anchored in a {len}-token sentence",
            unique.len()
        )));
    }
    let mut order: Vec<(usize, Triplet)> = unique.iter().map(|t| (anchor_of(t, rule), *t)).collect();
    order.sort();
    let mut plan = vec![SentimentLabel::None; len];
    for (want, t) in order {
        let pos = (0..len)
            .flat_map(|d| [want.checked_add(d), want.checked_sub(d)])
            .flatten()
            .find(|&p| p < len && plan[p] == SentimentLabel::None)
            .expect("fewer triplets than positions");
        plan[pos] = t.sentiment;
    }
    Ok(plan)
}
