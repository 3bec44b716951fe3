use crate::domain::{SentimentLabel, Upos};
use crate::numerics::{Activation, NumericError, ParamStore, Tape, Var};
use crate::policy::PolicyParams;
use crate::SeededRng;

/// Nonlinearity and dropout rate applied after every state update.
#[derive(Debug, Clone, Copy)]
pub struct StepSettings {
    pub activation: Activation,
    /// 0 disables dropout (inference).
    pub dropout: f64,
}

/// `act(W [h_t; pos_t; sentiment; prev] + b)` followed by dropout.
///
/// `latest` is the most recent non-`none` option, or `none` before the first.
#[allow(clippy::too_many_arguments)]
pub fn high_state_step(
    tape: &mut Tape,
    store: &ParamStore,
    params: &PolicyParams,
    token: Var,
    pos: Upos,
    latest: SentimentLabel,
    prev: Var,
    step: StepSettings,
    rng: &mut SeededRng,
) -> Result<Var, NumericError> {
    let p = tape.embedding(store, params.pos, pos.index())?;
    let v = tape.embedding(store, params.sentiment, latest.index())?;
    let x = tape.concat(&[token, p, v, prev])?;
    let z = tape.linear(store, params.high_state.weight, x, Some(params.high_state.bias))?;
    let s = tape.activation(step.activation, z);
    tape.dropout(s, step.dropout, rng)
}

/// Linear map of the anchor's high-level state shared by both subtasks.
pub fn context_vector(tape: &mut Tape, store: &ParamStore, params: &PolicyParams, anchor_state: Var) -> Result<Var, NumericError> {
    tape.linear(store, params.context.weight, anchor_state, Some(params.context.bias))
}

/// Linear map of the anchor's high-level state that seeds the opinion subtask.
pub fn low_initial_state(tape: &mut Tape, store: &ParamStore, params: &PolicyParams, anchor_state: Var) -> Result<Var, NumericError> {
    tape.linear(store, params.low_init.weight, anchor_state, Some(params.low_init.bias))
}

#[derive(Debug, Clone, Copy)]
pub struct LowInputs {
    pub token: Var,
    pub pos: Upos,
    /// Row of the previous action in the tag table (the start row at step 0).
    pub tag_row: usize,
    pub prev: Var,
    pub context: Var,
    pub summary: Var,
    /// Only read by the shared-head variant.
    pub sentiment: SentimentLabel,
}

pub fn low_state_step(
    tape: &mut Tape,
    store: &ParamStore,
    params: &PolicyParams,
    inputs: LowInputs,
    step: StepSettings,
    rng: &mut SeededRng,
) -> Result<Var, NumericError> {
    let p = tape.embedding(store, params.pos, inputs.pos.index())?;
    let tag = tape.embedding(store, params.tag, inputs.tag_row)?;
    let mut parts = vec![inputs.token, p, tag, inputs.prev, inputs.context, inputs.summary];
    if params.shared_low {
        parts.push(tape.embedding(store, params.sentiment, inputs.sentiment.index())?);
    }
    let x = tape.concat(&parts)?;
    let z = tape.linear(store, params.low_state.weight, x, Some(params.low_state.bias))?;
    let s = tape.activation(step.activation, z);
    tape.dropout(s, step.dropout, rng)
}
