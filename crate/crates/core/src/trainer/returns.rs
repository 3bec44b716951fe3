use std::collections::HashMap;

use crate::config::Baseline;
use crate::domain::{EpisodeTrace, SentimentLabel, SubtaskKind};

/// Discounted return of every decision in a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    /// One per high-level option.
    pub high: Vec<f64>,
    /// One vector per subtask (aligned with `trace.subtasks`), one entry per tag.
    pub low: Vec<Vec<f64>>,
}

fn suffix_returns(rewards: &[f64], tail: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = tail;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        g = r + gamma * g;
        *o = g;
    }
    out
}

/// Returns under the option accounting used for training:
///
/// * an option's return adds, at its own step, the total (gated) reward of
///   the subtasks it launched, then the later options' rewards and the final
///   sentiment-F reward;
/// * an aspect tag's return runs to the end of its subtask and its final reward;
/// * an opinion tag's return additionally continues into the aspect subtask
///   that the opinion pass seeds.
pub fn compute_returns(trace: &EpisodeTrace, gamma: f64) -> ReturnTable {
    let mut folded = trace.high_rewards.clone();
    for st in &trace.subtasks {
        folded[st.anchor] += st.total_reward();
    }
    let high = suffix_returns(&folded, trace.high_final_reward, gamma);

    let mut low = vec![Vec::new(); trace.subtasks.len()];
    for pair in (0..trace.subtasks.len()).step_by(2) {
        let (op, asp) = (&trace.subtasks[pair], &trace.subtasks[pair + 1]);
        let asp_ret = suffix_returns(&asp.rewards, asp.final_reward, gamma);
        let continuation = asp_ret.first().copied().unwrap_or(asp.final_reward);
        low[pair] = suffix_returns(&op.rewards, op.final_reward + gamma * continuation, gamma);
        low[pair + 1] = asp_ret;
    }
    ReturnTable { high, low }
}

/// Identifies the same decision across trajectories of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Option(usize),
    Tag { kind: SubtaskKind, anchor: usize, sentiment: SentimentLabel, step: usize },
}

fn slots(trace: &EpisodeTrace, table: &ReturnTable) -> Vec<(Slot, f64)> {
    let mut out: Vec<(Slot, f64)> = table.high.iter().enumerate().map(|(t, &g)| (Slot::Option(t), g)).collect();
    for (st, g) in trace.subtasks.iter().zip(&table.low) {
        for (step, &g) in g.iter().enumerate() {
            out.push((Slot::Tag { kind: st.kind, anchor: st.anchor, sentiment: st.sentiment, step }, g));
        }
    }
    out
}

/// Return minus baseline for every decision of every trajectory.
///
/// The mean baseline of a decision is the average return of that decision
/// (same position, or same subtask and step) over the trajectories of the
/// sentence that made it, so identical trajectories get zero advantage.
pub fn advantages(traces: &[&EpisodeTrace], gamma: f64, baseline: Baseline) -> Vec<ReturnTable> {
    let tables: Vec<ReturnTable> = traces.iter().map(|t| compute_returns(t, gamma)).collect();
    if baseline == Baseline::None {
        return tables;
    }
    // (first value, sum of offsets from it, count): equal values average exactly
    let mut sums: HashMap<Slot, (f64, f64, usize)> = HashMap::new();
    for (trace, table) in traces.iter().zip(&tables) {
        for (slot, g) in slots(trace, table) {
            let e = sums.entry(slot).or_insert((g, 0.0, 0));
            e.1 += g - e.0;
            e.2 += 1;
        }
    }
    let mean = |slot: Slot| {
        let (first, offsets, n) = sums[&slot];
        first + offsets / n as f64
    };
    traces
        .iter()
        .zip(tables)
        .map(|(trace, table)| {
            let high = table.high.iter().enumerate().map(|(t, g)| g - mean(Slot::Option(t))).collect();
            let low = trace
                .subtasks
                .iter()
                .zip(&table.low)
                .map(|(st, gs)| {
                    gs.iter()
                        .enumerate()
                        .map(|(step, g)| {
                            g - mean(Slot::Tag { kind: st.kind, anchor: st.anchor, sentiment: st.sentiment, step })
                        })
                        .collect()
                })
                .collect();
            ReturnTable { high, low }
        })
        .collect()
}
