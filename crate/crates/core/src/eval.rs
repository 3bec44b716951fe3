//! Exact-match triplet scoring and the single/multiple, overlap/no-overlap breakdown.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{triplet_overlap_class, EpisodeTrace, OverlapClass, Sentence, Triplet};
use crate::env::{predict, EpisodeSettings};
use crate::model::Model;
use crate::{Error, Result};

/// True positive, false positive and false negative counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn prf(self) -> Prf {
        let Counts { tp, fp, fn_ } = self;
        if tp + fp + fn_ == 0 {
            return Prf { precision: 1.0, recall: 1.0, f1: 1.0, counts: self };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Prf { precision, recall, f1, counts: self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

/// Set-based exact-match counts; duplicates collapse on both sides.
pub fn triplet_counts(predicted: &[Triplet], gold: &[Triplet]) -> Counts {
    let p: BTreeSet<&Triplet> = predicted.iter().collect();
    let g: BTreeSet<&Triplet> = gold.iter().collect();
    let tp = p.intersection(&g).count();
    Counts { tp, fp: p.len() - tp, fn_: g.len() - tp }
}

/// Two empty sets score P = R = F1 = 1.
pub fn score_triplets(predicted: &[Triplet], gold: &[Triplet]) -> Prf {
    triplet_counts(predicted, gold).prf()
}

/// Predicted and gold triplets of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceResult {
    pub predicted: Vec<Triplet>,
    pub gold: Vec<Triplet>,
}

/// Micro-averaged score over a corpus.
pub fn score_corpus(results: &[SentenceResult]) -> Prf {
    let mut c = Counts::default();
    results.iter().for_each(|r| c.add(triplet_counts(&r.predicted, &r.gold)));
    c.prf()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Partition {
    /// At most one gold triplet.
    Single,
    Multiple,
    NoOverlap,
    Overlap,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::Single, Partition::Multiple, Partition::NoOverlap, Partition::Overlap];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Single => "Single",
            Partition::Multiple => "Multiple",
            Partition::NoOverlap => "No Overlap",
            Partition::Overlap => "Overlap",
        }
    }

    pub fn contains(self, gold: &[Triplet]) -> bool {
        let distinct = gold.iter().collect::<BTreeSet<_>>().len();
        match self {
            Partition::Single => distinct <= 1,
            Partition::Multiple => distinct > 1,
            Partition::NoOverlap => triplet_overlap_class(gold) == OverlapClass::NoOverlap,
            Partition::Overlap => triplet_overlap_class(gold) == OverlapClass::Overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub partition: Partition,
    pub sentences: usize,
    /// Absent for an empty partition.
    pub score: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub overall: Prf,
    pub sentences: usize,
    pub rows: Vec<PartitionRow>,
}

pub fn partitioned_report(results: &[SentenceResult]) -> PartitionReport {
    let rows = Partition::ALL
        .iter()
        .map(|&p| {
            let members: Vec<SentenceResult> = results.iter().filter(|r| p.contains(&r.gold)).cloned().collect();
            PartitionRow {
                partition: p,
                sentences: members.len(),
                score: (!members.is_empty()).then(|| score_corpus(&members)),
            }
        })
        .collect();
    PartitionReport { overall: score_corpus(results), sentences: results.len(), rows }
}

fn cells(name: &str, n: usize, score: Option<&Prf>) -> [String; 8] {
    match score {
        Some(s) => [
            name.to_string(),
            n.to_string(),
            format!("{:.4}", s.precision),
            format!("{:.4}", s.recall),
            format!("{:.4}", s.f1),
            s.counts.tp.to_string(),
            s.counts.fp.to_string(),
            s.counts.fn_.to_string(),
        ],
        None => {
            let na = || "n/a".to_string();
            [name.to_string(), n.to_string(), na(), na(), na(), na(), na(), na()]
        }
    }
}

const HEADER: [&str; 8] = ["partition", "sentences", "precision", "recall", "f1", "tp", "fp", "fn"];

impl PartitionReport {
    fn table(&self) -> Vec<[String; 8]> {
        std::iter::once(cells("All", self.sentences, Some(&self.overall)))
            .chain(self.rows.iter().map(|r| cells(r.partition.name(), r.sentences, r.score.as_ref())))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",") + "\n";
        for row in self.table() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let rows = self.table();
        let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cols: Vec<&str>| {
            let parts: Vec<String> = cols
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, HEADER.to_vec());
        for r in &rows {
            line(&mut out, r.iter().map(String::as_str).collect());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Greedy-decode every sentence with `jobs` worker threads (0 = all cores).
pub fn decode_corpus(model: &Model, sentences: &[Sentence], settings: EpisodeSettings, jobs: usize) -> Result<Vec<EpisodeTrace>> {
    let run = || sentences.par_iter().map(|s| predict(model, s, settings)).collect::<Result<Vec<_>>>();
    if jobs == 1 {
        return sentences.iter().map(|s| predict(model, s, settings)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} evaluation threads: {e}")))?;
    pool.install(run)
}

pub fn results_from(sentences: &[Sentence], traces: &[EpisodeTrace]) -> Vec<SentenceResult> {
    sentences
        .iter()
        .zip(traces)
        .map(|(s, t)| SentenceResult { predicted: t.predicted.clone(), gold: s.gold().to_vec() })
        .collect()
}

pub fn evaluate(model: &Model, sentences: &[Sentence], settings: EpisodeSettings, jobs: usize) -> Result<Prf> {
    let traces = decode_corpus(model, sentences, settings, jobs)?;
    Ok(score_corpus(&results_from(sentences, &traces)))
}
