//! Teacher-forced pre-training, REINFORCE fine-tuning and dev-set model selection.

mod returns;

use std::time::Instant;

use rand::seq::SliceRandom;

pub use returns::{advantages, compute_returns, ReturnTable};

use crate::config::TrainConfig;
use crate::domain::Sentence;
use crate::env::{run_episode, EpisodeMode, EpisodeSettings, Rollout};
use crate::eval::{evaluate, Prf};
use crate::model::Model;
use crate::numerics::{Adam, NumericError, Tape, Var};
use crate::{derived_rng, Error, Result, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Pretrain,
    Finetune,
    /// Supervised continuation in place of fine-tuning.
    Supervised,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
            Phase::Supervised => "supervised",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        [Phase::Init, Phase::Pretrain, Phase::Finetune, Phase::Supervised].into_iter().find(|p| p.name() == s)
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinetuneMode {
    #[default]
    Reinforce,
    /// Keep minimising the teacher-forced NLL at the fine-tuning rate.
    Supervised,
}

/// Independent generator for one phase, epoch and purpose.
pub fn epoch_rng(seed: u64, phase: Phase, epoch: usize, purpose: u64) -> SeededRng {
    derived_rng(seed, (phase.stream() << 40) ^ ((epoch as u64) << 8) ^ purpose)
}

fn non_finite(sentence: &Sentence, what: &str, e: NumericError) -> Error {
    Error::Numeric(NumericError::NonFinite(format!("{what} on sentence `{}`: {e}", sentence.id())))
}

/// `−Σ log π` over every decision of a forced episode, with `loss_grad`
/// accumulated into the parameter gradients. Returns the NLL.
pub fn nll_backward(
    model: &mut Model,
    sentence: &Sentence,
    settings: EpisodeSettings,
    loss_grad: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut tape = Tape::new();
    let rollout = run_episode(&mut tape, model, sentence, EpisodeMode::TeacherForced, settings, rng)?;
    let terms: Vec<(Var, f64)> = rollout.all_log_probs().map(|v| (v, -1.0)).collect();
    let loss = tape.weighted_sum(&terms)?;
    let nll = tape.scalar(loss);
    if !nll.is_finite() {
        return Err(non_finite(sentence, "teacher-forced loss", NumericError::NonFinite(nll.to_string())));
    }
    tape.backward(loss, loss_grad, &mut model.store).map_err(|e| non_finite(sentence, "backward", e))?;
    Ok(nll)
}

/// Surrogate `−Σ log π · advantage / n` over `n` rollouts of one sentence.
pub fn policy_gradient_terms(rollouts: &[Rollout], advantages: &[ReturnTable]) -> Vec<(Var, f64)> {
    let n = rollouts.len() as f64;
    let mut terms = Vec::new();
    for (r, a) in rollouts.iter().zip(advantages) {
        terms.extend(r.option_log_probs.iter().zip(&a.high).map(|(&v, &g)| (v, -g / n)));
        for (lps, gs) in r.tag_log_probs.iter().zip(&a.low) {
            terms.extend(lps.iter().zip(gs).map(|(&v, &g)| (v, -g / n)));
        }
    }
    terms
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    /// Mean total reward of the sampled trajectories.
    pub mean_reward: f64,
}

/// Sample trajectories for one sentence and accumulate the policy gradient.
pub fn reinforce_backward(
    model: &mut Model,
    sentence: &Sentence,
    cfg: &TrainConfig,
    loss_grad: f64,
    rng: &mut SeededRng,
) -> Result<StepStats> {
    let settings = EpisodeSettings::from_config(cfg, true);
    let mut tape = Tape::new();
    let rollouts = (0..cfg.trajectories_per_example.max(1))
        .map(|_| run_episode(&mut tape, model, sentence, EpisodeMode::Sample, settings, rng))
        .collect::<Result<Vec<_>>>()?;
    let traces: Vec<_> = rollouts.iter().map(|r| &r.trace).collect();
    let adv = advantages(&traces, cfg.gamma, cfg.baseline);
    let mean_reward = traces.iter().map(|t| t.total_reward()).sum::<f64>() / traces.len() as f64;
    let loss = tape.weighted_sum(&policy_gradient_terms(&rollouts, &adv))?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(non_finite(sentence, "policy-gradient loss", NumericError::NonFinite(value.to_string())));
    }
    tape.backward(loss, loss_grad, &mut model.store).map_err(|e| non_finite(sentence, "backward", e))?;
    Ok(StepStats { loss: value, mean_reward })
}

fn optimizer_step(model: &mut Model, lr: f64, clip: f64) -> Result<()> {
    model.store.clip_grad_norm(clip);
    Adam::new(lr).step(&mut model.store)?;
    Ok(())
}

/// One minibatch of teacher-forced NLL and one Adam step. Returns the mean NLL.
pub fn pretrain_step(model: &mut Model, batch: &[&Sentence], cfg: &TrainConfig, lr: f64, rng: &mut SeededRng) -> Result<f64> {
    let settings = EpisodeSettings::from_config(cfg, true);
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut total = 0.0;
    for s in batch {
        total += nll_backward(model, s, settings, scale, rng)?;
    }
    optimizer_step(model, lr, cfg.clip_norm)?;
    Ok(total * scale)
}

/// One minibatch of REINFORCE and one clipped Adam step.
pub fn reinforce_step(model: &mut Model, batch: &[&Sentence], cfg: &TrainConfig, lr: f64, rng: &mut SeededRng) -> Result<StepStats> {
    let scale = 1.0 / batch.len().max(1) as f64;
    let (mut loss, mut reward) = (0.0, 0.0);
    for s in batch {
        let st = reinforce_backward(model, s, cfg, scale, rng)?;
        loss += st.loss;
        reward += st.mean_reward;
    }
    optimizer_step(model, lr, cfg.clip_norm)?;
    Ok(StepStats { loss: loss * scale, mean_reward: reward * scale })
}

/// One pass over `data` in a seeded shuffled order. Returns the mean loss
/// and, for REINFORCE, the mean trajectory reward.
pub fn run_epoch(model: &mut Model, data: &[Sentence], cfg: &TrainConfig, phase: Phase, epoch: usize) -> Result<(f64, Option<f64>)> {
    let mut order: Vec<&Sentence> = data.iter().collect();
    order.shuffle(&mut epoch_rng(cfg.seed, phase, epoch, 1));
    let mut rng = epoch_rng(cfg.seed, phase, epoch, 2);
    let (mut loss, mut reward, mut n) = (0.0, 0.0, 0usize);
    for batch in order.chunks(cfg.batch_size.max(1)) {
        match phase {
            Phase::Pretrain => loss += pretrain_step(model, batch, cfg, cfg.pretrain_lr, &mut rng)? * batch.len() as f64,
            Phase::Supervised => loss += pretrain_step(model, batch, cfg, cfg.finetune_lr, &mut rng)? * batch.len() as f64,
            Phase::Finetune => {
                let st = reinforce_step(model, batch, cfg, cfg.finetune_lr, &mut rng)?;
                loss += st.loss * batch.len() as f64;
                reward += st.mean_reward * batch.len() as f64;
            }
            Phase::Init => return Err(Error::Usage("the init phase does not train".into())),
        }
        n += batch.len();
    }
    let n = n.max(1) as f64;
    Ok((loss / n, (phase == Phase::Finetune).then_some(reward / n)))
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub phase: Phase,
    pub epoch: usize,
    pub loss: Option<f64>,
    pub mean_reward: Option<f64>,
    pub dev: Prf,
    /// Seconds since training started; omitted for byte-stable logs.
    pub wallclock: Option<f64>,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "phase,epoch,loss,mean_reward,dev_P,dev_R,dev_F1,wallclock";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.phase.name(),
            self.epoch,
            opt(self.loss, 6),
            opt(self.mean_reward, 6),
            self.dev.precision,
            self.dev.recall,
            self.dev.f1,
            opt(self.wallclock, 3)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub jobs: usize,
    pub log_wallclock: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { jobs: 1, log_wallclock: false }
    }
}

/// What an observer sees after every evaluated epoch.
pub struct EpochEvent<'a> {
    pub row: &'a MetricRow,
    pub model: &'a Model,
    /// The dev F1 beat every earlier epoch.
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub best: Model,
    pub best_f1: f64,
    pub best_phase: Phase,
    pub best_epoch: usize,
    pub last: Model,
    pub rows: Vec<MetricRow>,
}

/// Epoch range of one phase; `start` > 1 resumes after a saved epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePlan {
    pub phase: Phase,
    pub start: usize,
    pub end: usize,
}

struct Run<'a, F> {
    train: &'a [Sentence],
    dev: &'a [Sentence],
    cfg: &'a TrainConfig,
    opts: TrainOptions,
    started: Instant,
    observer: F,
    rows: Vec<MetricRow>,
    best: Option<(Model, f64, Phase, usize)>,
}

impl<F: FnMut(&EpochEvent<'_>) -> Result<()>> Run<'_, F> {
    fn record(&mut self, model: &Model, phase: Phase, epoch: usize, loss: Option<f64>, reward: Option<f64>) -> Result<()> {
        let dev = evaluate(model, self.dev, EpisodeSettings::from_config(self.cfg, false), self.opts.jobs)?;
        let row = MetricRow {
            phase,
            epoch,
            loss,
            mean_reward: reward,
            dev,
            wallclock: self.opts.log_wallclock.then(|| self.started.elapsed().as_secs_f64()),
        };
        let improved = self.best.as_ref().is_none_or(|b| dev.f1 > b.1);
        if improved {
            self.best = Some((model.clone(), dev.f1, phase, epoch));
        }
        log::info!(
            "{} epoch {epoch}: loss {} dev P {:.4} R {:.4} F1 {:.4}{}",
            phase.name(),
            loss.map(|l| format!("{l:.4}")).unwrap_or_else(|| "-".into()),
            dev.precision,
            dev.recall,
            dev.f1,
            if improved { " *" } else { "" }
        );
        (self.observer)(&EpochEvent { row: &row, model, improved })?;
        self.rows.push(row);
        Ok(())
    }

    fn phase(&mut self, model: &mut Model, plan: PhasePlan) -> Result<()> {
        for epoch in plan.start..=plan.end {
            let (loss, reward) = run_epoch(model, self.train, self.cfg, plan.phase, epoch)?;
            self.record(model, plan.phase, epoch, Some(loss), reward)?;
        }
        Ok(())
    }
}

/// Run the given phases in order, evaluating on `dev` after each epoch.
///
/// With `record_init` the untrained model is evaluated first (epoch 0). A
/// phase following pre-training starts from the best pre-training epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_phases(
    mut model: Model,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &TrainConfig,
    plans: &[PhasePlan],
    record_init: bool,
    opts: TrainOptions,
    observer: impl FnMut(&EpochEvent<'_>) -> Result<()>,
) -> Result<TrainReport> {
    if train.is_empty() && plans.iter().any(|p| p.start <= p.end) {
        return Err(Error::Usage("the training corpus is empty".into()));
    }
    let mut run = Run { train, dev, cfg, opts, started: Instant::now(), observer, rows: Vec::new(), best: None };
    if record_init {
        run.record(&model, Phase::Init, 0, None, None)?;
    }
    for (i, plan) in plans.iter().enumerate() {
        if i > 0 && plans[i - 1].phase == Phase::Pretrain {
            if let Some((best, ..)) = &run.best {
                model = best.clone();
            }
        }
        run.phase(&mut model, *plan)?;
    }
    let (best, best_f1, best_phase, best_epoch) = match run.best.take() {
        Some(b) => b,
        None => {
            let dev_f1 = evaluate(&model, dev, EpisodeSettings::from_config(cfg, false), opts.jobs)?.f1;
            (model.clone(), dev_f1, Phase::Init, 0)
        }
    };
    Ok(TrainReport { best, best_f1, best_phase, best_epoch, last: model, rows: run.rows })
}

/// The full schedule: initial evaluation, pre-training, then fine-tuning
/// (REINFORCE or supervised) from the best pre-trained epoch.
pub fn train(
    model: Model,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &TrainConfig,
    mode: FinetuneMode,
    opts: TrainOptions,
    observer: impl FnMut(&EpochEvent<'_>) -> Result<()>,
) -> Result<TrainReport> {
    let finetune = match mode {
        FinetuneMode::Reinforce => Phase::Finetune,
        FinetuneMode::Supervised => Phase::Supervised,
    };
    let plans = [
        PhasePlan { phase: Phase::Pretrain, start: 1, end: cfg.pretrain_epochs },
        PhasePlan { phase: finetune, start: 1, end: cfg.finetune_epochs },
    ];
    train_phases(model, train, dev, cfg, &plans, true, opts, observer)
}
