//! The extraction episode.
//!
//! The high-level process visits every token once and picks an option. A
//! non-`none` option at position `t` runs an opinion tagging pass over the
//! whole sentence and then an aspect tagging pass seeded by the opinion pass's
//! final state; the two decoded spans plus the option form a triplet. Rewards
//! are computed against the sentence's gold triplets as the episode unfolds.

mod align;
mod rewards;
mod state;

use std::io::Write;

pub use align::{align_gold, anchor_of, anchor_plan, GoldAlignment};
pub use rewards::{gate_low_rewards, high_final_reward, high_reward, low_final_reward, low_reward, TagWeights};
pub use state::{context_vector, high_state_step, low_initial_state, low_state_step, LowInputs, StepSettings};

use crate::config::TrainConfig;
use crate::domain::{
    bio_labels_for, decode_span, BioTag, EpisodeTrace, OptionStep, Sentence, SentimentLabel, SubtaskKind,
    SubtaskTrace, TagStep, Triplet,
};
use crate::encoder::QueryKind;
use crate::model::Model;
use crate::numerics::{Tape, Var};
use crate::policy::{high_policy, low_policy, Distribution, START_TAG_ROW};
use crate::{Error, Result, SeededRng};

/// A fixed choice for every decision of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedActions {
    pub options: Vec<SentimentLabel>,
    /// One tag sequence per subtask, in launch order.
    pub tags: Vec<Vec<BioTag>>,
}

#[derive(Debug, Clone, Copy)]
pub enum EpisodeMode<'a> {
    Sample,
    Greedy,
    TeacherForced,
    Scripted(&'a ScriptedActions),
}

/// Reward and control settings of an episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSettings {
    pub weights: TagWeights,
    pub beta: f64,
    pub malformed_penalty: f64,
    pub anchor_rule: crate::config::AnchorRule,
    pub dropout: f64,
}

impl EpisodeSettings {
    pub fn from_config(cfg: &TrainConfig, training: bool) -> Self {
        EpisodeSettings {
            weights: [cfg.lambda_b, cfg.lambda_i, cfg.lambda_o],
            beta: cfg.beta,
            malformed_penalty: cfg.malformed_penalty,
            anchor_rule: cfg.anchor_rule,
            dropout: if training { cfg.dropout } else { 0.0 },
        }
    }
}

/// An episode trace plus the log-probability variables of its decisions.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trace: EpisodeTrace,
    pub option_log_probs: Vec<Var>,
    /// One vector per subtask, aligned with `trace.subtasks`.
    pub tag_log_probs: Vec<Vec<Var>>,
}

impl Rollout {
    pub fn all_log_probs(&self) -> impl Iterator<Item = Var> + '_ {
        self.option_log_probs.iter().chain(self.tag_log_probs.iter().flatten()).copied()
    }
}

struct Episode<'a, 'm> {
    tape: &'a mut Tape,
    model: &'m Model,
    sentence: &'a Sentence,
    mode: EpisodeMode<'a>,
    settings: EpisodeSettings,
    rng: &'a mut SeededRng,
}

impl Episode<'_, '_> {
    fn choose(&mut self, dist: &Distribution, forced: impl FnOnce() -> Result<usize>) -> Result<usize> {
        Ok(match self.mode {
            EpisodeMode::Sample => dist.sample(self.rng),
            EpisodeMode::Greedy => dist.argmax(),
            EpisodeMode::TeacherForced | EpisodeMode::Scripted(_) => forced()?,
        })
    }

    fn step_settings(&self) -> StepSettings {
        StepSettings { activation: self.model.config.activation, dropout: self.settings.dropout }
    }

    #[allow(clippy::too_many_arguments)]
    fn subtask(
        &mut self,
        kind: SubtaskKind,
        anchor: usize,
        sentiment: SentimentLabel,
        init: Var,
        context: Var,
        gold: &[BioTag],
        option_correct: bool,
        script: Option<&[BioTag]>,
    ) -> Result<(SubtaskTrace, Vec<Var>, Var)> {
        let model = self.model;
        let (store, params) = (&model.store, &model.policy);
        let query = match kind {
            SubtaskKind::Opinion => QueryKind::OpinionFor { sentiment, anchor },
            SubtaskKind::Aspect => QueryKind::AspectFor { sentiment, anchor },
        };
        let enc = model.encoder.encode_vars(self.tape, store, self.sentence, &query)?;
        let step = self.step_settings();
        let mut prev = init;
        let mut tag_row = START_TAG_ROW;
        let mut actions = Vec::with_capacity(gold.len());
        let mut log_probs = Vec::with_capacity(gold.len());
        let mut rewards = Vec::with_capacity(gold.len());
        for (k, &gold_tag) in gold.iter().enumerate() {
            let inputs = LowInputs {
                token: enc.tokens[k],
                pos: self.sentence.pos_tags()[k],
                tag_row,
                prev,
                context,
                summary: enc.summary,
                sentiment,
            };
            let s = low_state_step(self.tape, store, params, inputs, step, self.rng)?;
            let dist = low_policy(self.tape, store, params, s, kind, sentiment)?;
            let choice = self.choose(&dist, || match script {
                Some(tags) => Ok(tags[k].index()),
                None => Ok(gold_tag.index()),
            })?;
            let tag = BioTag::from_index(choice).expect("three tag classes");
            let lp = dist.log_prob(self.tape, choice)?;
            actions.push(TagStep { tag, log_prob: self.tape.scalar(lp) });
            log_probs.push(lp);
            rewards.push(low_reward(tag, gold_tag, &self.settings.weights));
            tag_row = tag.index();
            prev = s;
        }
        let tags: Vec<BioTag> = actions.iter().map(|a| a.tag).collect();
        let decoded = decode_span(&tags);
        let final_reward = low_final_reward(&tags, gold, decoded, self.settings.malformed_penalty);
        let trace = SubtaskTrace {
            kind,
            anchor,
            sentiment,
            actions,
            rewards: gate_low_rewards(option_correct, &rewards),
            final_reward: gate_low_rewards(option_correct, &[final_reward])[0],
            option_correct,
            decoded,
        };
        Ok((trace, log_probs, prev))
    }

    fn run(mut self) -> Result<Rollout> {
        let sentence = self.sentence;
        let len = sentence.len();
        let mut alignment = GoldAlignment::new(sentence.gold());
        let plan = match self.mode {
            EpisodeMode::TeacherForced => Some(anchor_plan(alignment.gold(), len, self.settings.anchor_rule)?),
            _ => None,
        };
        let script = match self.mode {
            EpisodeMode::Scripted(s) => {
                if s.options.len() != len
                    || s.tags.len() != 2 * s.options.iter().filter(|o| o.is_polarity()).count()
                    || s.tags.iter().any(|t| t.len() != len)
                {
                    return Err(Error::Usage("scripted actions do not fit the sentence".into()));
                }
                Some(s)
            }
            _ => None,
        };

        let model = self.model;
        let (store, params) = (&model.store, &model.policy);
        let high = model.encoder.encode_vars(self.tape, store, sentence, &QueryKind::HighLevel)?;
        let step = self.step_settings();
        let mut prev = self.tape.constant(vec![0.0; model.config.d_s]);
        let mut latest = SentimentLabel::None;

        let mut options = Vec::with_capacity(len);
        let mut option_log_probs = Vec::with_capacity(len);
        let mut high_rewards = Vec::with_capacity(len);
        let mut subtasks = Vec::new();
        let mut tag_log_probs = Vec::new();
        let mut predicted: Vec<Triplet> = Vec::new();

        for t in 0..len {
            let s = high_state_step(self.tape, store, params, high.tokens[t], sentence.pos_tags()[t], latest, prev, step, self.rng)?;
            let dist = high_policy(self.tape, store, params, s)?;
            let choice = self.choose(&dist, || match (&plan, script) {
                (Some(plan), _) => Ok(plan[t].index()),
                (_, Some(script)) => Ok(script.options[t].index()),
                _ => unreachable!("forced choice without a plan"),
            })?;
            let option = SentimentLabel::from_index(choice).expect("four option classes");
            let lp = dist.log_prob(self.tape, choice)?;
            options.push(OptionStep { position: t, option, log_prob: self.tape.scalar(lp) });
            option_log_probs.push(lp);
            high_rewards.push(high_reward(option, &alignment));

            if option.is_polarity() {
                let aligned = align_gold(&mut alignment, t, option);
                if plan.is_some() && aligned.is_none() {
                    return Err(Error::Usage(format!("forced option at {t} found no gold triplet")));
                }
                let gold_tags = |span: Option<crate::Span>| match span {
                    Some(span) => bio_labels_for(span, len),
                    None => Ok(vec![BioTag::O; len]),
                };
                let opinion_gold = gold_tags(aligned.map(|a| a.opinion))?;
                let aspect_gold = gold_tags(aligned.map(|a| a.aspect))?;
                let ctx = context_vector(self.tape, store, params, s)?;
                let init = low_initial_state(self.tape, store, params, s)?;
                let scripted = |i: usize| script.map(|sc| sc.tags[i].as_slice());
                let correct = aligned.is_some();
                let (op, op_lps, op_last) = self.subtask(
                    SubtaskKind::Opinion,
                    t,
                    option,
                    init,
                    ctx,
                    &opinion_gold,
                    correct,
                    scripted(subtasks.len()),
                )?;
                let (asp, asp_lps, _) = self.subtask(
                    SubtaskKind::Aspect,
                    t,
                    option,
                    op_last,
                    ctx,
                    &aspect_gold,
                    correct,
                    scripted(subtasks.len() + 1),
                )?;
                if let (Some(o), Some(a)) = (op.decoded, asp.decoded) {
                    let triplet = Triplet { aspect: a, opinion: o, sentiment: option };
                    if !predicted.contains(&triplet) {
                        predicted.push(triplet);
                    }
                }
                subtasks.extend([op, asp]);
                tag_log_probs.extend([op_lps, asp_lps]);
                latest = option;
            }
            prev = s;
        }

        let emitted: Vec<SentimentLabel> = options.iter().map(|o| o.option).collect();
        let gold_classes: Vec<SentimentLabel> = alignment.gold().iter().map(|g| g.sentiment).collect();
        let high_final_reward = high_final_reward(&emitted, &gold_classes, self.settings.beta);
        self.tape.ensure_finite()?;
        Ok(Rollout {
            trace: EpisodeTrace {
                sentence_id: sentence.id().to_string(),
                options,
                subtasks,
                high_rewards,
                high_final_reward,
                predicted,
            },
            option_log_probs,
            tag_log_probs,
        })
    }
}

/// Run one episode, recording every decision on `tape`.
pub fn run_episode(
    tape: &mut Tape,
    model: &Model,
    sentence: &Sentence,
    mode: EpisodeMode<'_>,
    settings: EpisodeSettings,
    rng: &mut SeededRng,
) -> Result<Rollout> {
    Episode { tape, model, sentence, mode, settings, rng }.run()
}

/// Greedy decoding without dropout; the tape is discarded.
pub fn predict(model: &Model, sentence: &Sentence, settings: EpisodeSettings) -> Result<EpisodeTrace> {
    let mut tape = Tape::new();
    // greedy decoding never draws from the generator
    let mut rng = crate::seeded_rng(0);
    let settings = EpisodeSettings { dropout: 0.0, ..settings };
    Ok(run_episode(&mut tape, model, sentence, EpisodeMode::Greedy, settings, &mut rng)?.trace)
}

/// Append one trace as a JSON line.
pub fn write_trace(out: &mut impl Write, trace: &EpisodeTrace) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, trace)?;
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::domain::tests::appetizers_gold;
    use crate::domain::Upos;
    use crate::model::build_vocab;
    use crate::seeded_rng;

    fn appetizers() -> Sentence {
        let words = "Appetizers are excellent ; you can make a great ( but slightly expensive ) meal out of them .";
        let tokens: Vec<String> = words.split(' ').map(String::from).collect();
        let n = tokens.len();
        Sentence::new("t1", tokens, vec![Upos::NOUN; n], appetizers_gold()).unwrap()
    }

    fn model(s: &Sentence) -> Model {
        let cfg = ModelConfig { d_h: 8, d_s: 6, d_emb: 4, d_pos: 3, d_word: 4, ..ModelConfig::default() };
        Model::new(&cfg, build_vocab([s], true), 2).unwrap()
    }

    fn settings() -> EpisodeSettings {
        EpisodeSettings::from_config(&TrainConfig::default(), false)
    }

    #[test]
    fn teacher_forcing_reproduces_the_appetizers_gold() {
        let s = appetizers();
        let m = model(&s);
        let mut tape = Tape::new();
        let r = run_episode(&mut tape, &m, &s, EpisodeMode::TeacherForced, settings(), &mut seeded_rng(0)).unwrap();
        let tr = &r.trace;
        assert_eq!(tr.launch_positions().len(), 3);
        assert_eq!(tr.high_final_reward, 1.0);
        assert!(tr.subtasks.iter().all(|st| st.final_reward == 1.0 && st.option_correct));
        let mut pred = tr.predicted.clone();
        let mut gold = appetizers_gold();
        pred.sort();
        gold.sort();
        assert_eq!(pred, gold);
        assert_eq!(r.option_log_probs.len(), s.len());
        assert_eq!(r.tag_log_probs.len(), 6);
    }

    #[test]
    fn greedy_is_deterministic_with_j_options() {
        let s = appetizers();
        let m = model(&s);
        let a = predict(&m, &s, settings()).unwrap();
        let b = predict(&m, &s, settings()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.options.len(), s.len());
    }

    #[test]
    fn sampling_replays_under_a_seed() {
        let s = appetizers();
        let m = model(&s);
        let run = |seed| {
            let mut tape = Tape::new();
            let st = EpisodeSettings::from_config(&TrainConfig::default(), true);
            run_episode(&mut tape, &m, &s, EpisodeMode::Sample, st, &mut seeded_rng(seed)).unwrap().trace
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn trace_dump_is_one_json_line() {
        let s = appetizers();
        let m = model(&s);
        let tr = predict(&m, &s, settings()).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        let back: EpisodeTrace = serde_json::from_str(text.trim_end()).unwrap();
        assert_eq!(back.options.len(), tr.options.len());
    }
}
