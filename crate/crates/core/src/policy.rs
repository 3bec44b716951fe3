//! Policy parameters, the option head and the option-conditioned tag heads.

use rand::Rng;

use crate::config::ModelConfig;
use crate::domain::{SentimentLabel, SubtaskKind, Upos};
use crate::numerics::{uniform, xavier_uniform, Layer, NumericError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::SeededRng;

/// Rows of the tag embedding table: B, I, O and the start-of-subtask row.
pub const TAG_ROWS: usize = 4;
pub const START_TAG_ROW: usize = 3;

/// Every trainable tensor outside the encoder.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    /// UPOS embedding, shared by both levels.
    pub pos: ParamId,
    /// Sentiment embedding; row 0 stands for "no sentiment emitted yet".
    pub sentiment: ParamId,
    pub tag: ParamId,
    pub high_state: Layer,
    pub high_head: ParamId,
    pub low_state: Layer,
    /// Maps the anchor's high-level state to the opinion subtask's initial state.
    pub low_init: Layer,
    /// Linear context map from the anchor's high-level state.
    pub context: Layer,
    /// `[kind][polarity]` heads, or one head per kind when shared.
    pub low_heads: Vec<ParamId>,
    pub shared_low: bool,
}

fn layer(store: &mut ParamStore, name: &str, out: usize, inp: usize, rng: &mut SeededRng) -> Result<Layer, NumericError> {
    Ok(Layer {
        weight: store.add(&format!("{name}.w"), xavier_uniform(out, inp, rng))?,
        bias: store.add(&format!("{name}.b"), Tensor::zeros(&[out]))?,
    })
}

fn attach_layer(store: &ParamStore, name: &str) -> Result<Layer, NumericError> {
    Ok(Layer { weight: attach(store, &format!("{name}.w"))?, bias: attach(store, &format!("{name}.b"))? })
}

fn attach(store: &ParamStore, name: &str) -> Result<ParamId, NumericError> {
    store.id(name).ok_or_else(|| NumericError::Usage(format!("checkpoint lacks parameter `{name}`")))
}

fn head_names(shared: bool) -> Vec<String> {
    let kinds = ["opinion", "aspect"];
    if shared {
        kinds.iter().map(|k| format!("policy.low_head.{k}")).collect()
    } else {
        kinds
            .iter()
            .flat_map(|k| SentimentLabel::POLARITIES.iter().map(move |s| format!("policy.low_head.{k}.{s}")))
            .collect()
    }
}

impl PolicyParams {
    pub fn high_state_inputs(cfg: &ModelConfig) -> usize {
        cfg.d_h + cfg.d_pos + cfg.d_emb + cfg.d_s
    }

    pub fn low_state_inputs(cfg: &ModelConfig) -> usize {
        let base = cfg.d_h + cfg.d_pos + cfg.d_emb + cfg.d_s + cfg.d_s + cfg.d_h;
        if cfg.shared_low_policy {
            base + cfg.d_emb
        } else {
            base
        }
    }

    pub fn build(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut SeededRng) -> Result<Self, NumericError> {
        let pos = store.add("policy.pos", uniform(&[Upos::ALL.len(), cfg.d_pos], 0.1, rng))?;
        let sentiment = store.add("policy.sentiment", uniform(&[4, cfg.d_emb], 0.1, rng))?;
        let tag = store.add("policy.tag", uniform(&[TAG_ROWS, cfg.d_emb], 0.1, rng))?;
        let high_state = layer(store, "policy.high_state", cfg.d_s, Self::high_state_inputs(cfg), rng)?;
        let high_head = store.add("policy.high_head", xavier_uniform(4, cfg.d_s, rng))?;
        let low_state = layer(store, "policy.low_state", cfg.d_s, Self::low_state_inputs(cfg), rng)?;
        let low_init = layer(store, "policy.low_init", cfg.d_s, cfg.d_s, rng)?;
        let context = layer(store, "policy.context", cfg.d_s, cfg.d_s, rng)?;
        let low_heads = head_names(cfg.shared_low_policy)
            .iter()
            .map(|n| store.add(n, xavier_uniform(3, cfg.d_s, rng)))
            .collect::<Result<_, _>>()?;
        Ok(PolicyParams {
            pos,
            sentiment,
            tag,
            high_state,
            high_head,
            low_state,
            low_init,
            context,
            low_heads,
            shared_low: cfg.shared_low_policy,
        })
    }

    pub fn attach(store: &ParamStore, cfg: &ModelConfig) -> Result<Self, NumericError> {
        Ok(PolicyParams {
            pos: attach(store, "policy.pos")?,
            sentiment: attach(store, "policy.sentiment")?,
            tag: attach(store, "policy.tag")?,
            high_state: attach_layer(store, "policy.high_state")?,
            high_head: attach(store, "policy.high_head")?,
            low_state: attach_layer(store, "policy.low_state")?,
            low_init: attach_layer(store, "policy.low_init")?,
            context: attach_layer(store, "policy.context")?,
            low_heads: head_names(cfg.shared_low_policy)
                .iter()
                .map(|n| attach(store, n))
                .collect::<Result<_, _>>()?,
            shared_low: cfg.shared_low_policy,
        })
    }

    pub fn low_head(&self, kind: SubtaskKind, sentiment: SentimentLabel) -> Result<ParamId, NumericError> {
        let p = sentiment
            .polarity_index()
            .ok_or_else(|| NumericError::Usage("low-level policy needs a polarity, got none".into()))?;
        Ok(if self.shared_low { self.low_heads[kind.index()] } else { self.low_heads[kind.index() * 3 + p] })
    }
}

/// A categorical distribution recorded on a tape.
#[derive(Debug, Clone)]
pub struct Distribution {
    log_probs: Var,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn from_logits(tape: &mut Tape, logits: Var) -> Self {
        let log_probs = tape.log_softmax(logits);
        let probs = tape.value(log_probs).iter().map(|l| l.exp()).collect();
        Distribution { log_probs, probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> Var {
        self.log_probs
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample(&self, rng: &mut SeededRng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left `acc` just below 1; take the last index with mass
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(self.probs.len() - 1)
    }

    pub fn argmax(&self) -> usize {
        crate::numerics::argmax(&self.probs)
    }

    pub fn log_prob(&self, tape: &mut Tape, action: usize) -> Result<Var, NumericError> {
        tape.pick(self.log_probs, action)
    }
}

/// Distribution over the four options given a high-level state.
pub fn high_policy(
    tape: &mut Tape,
    store: &ParamStore,
    params: &PolicyParams,
    state: Var,
) -> Result<Distribution, NumericError> {
    let logits = tape.linear(store, params.high_head, state, None)?;
    Ok(Distribution::from_logits(tape, logits))
}

/// Distribution over B, I, O given a low-level state, conditioned on the launching option.
pub fn low_policy(
    tape: &mut Tape,
    store: &ParamStore,
    params: &PolicyParams,
    state: Var,
    kind: SubtaskKind,
    sentiment: SentimentLabel,
) -> Result<Distribution, NumericError> {
    let head = params.low_head(kind, sentiment)?;
    let logits = tape.linear(store, head, state, None)?;
    Ok(Distribution::from_logits(tape, logits))
}
