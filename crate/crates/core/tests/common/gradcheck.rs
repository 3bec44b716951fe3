//! Central finite-difference checks for tape ops and the whole policy graph.

use hrlt_core::env::{run_episode, EpisodeMode, EpisodeSettings};
use hrlt_core::numerics::{mlp_forward, Activation, Layer, NumericError, ParamId, ParamStore, Tape, Tensor, Var};
use hrlt_core::{ModelConfig, TrainConfig};
use rand::Rng;

use super::*;

const H: f64 = 1e-6;

type Build = fn(&mut Tape, &ParamStore, &[ParamId]) -> Result<Var, NumericError>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: &'static [&'static [usize]],
    pub build: Build,
}

fn lift(tape: &mut Tape, store: &ParamStore, id: ParamId) -> Result<Var, NumericError> {
    tape.embedding(store, id, 0)
}

fn lift_all(tape: &mut Tape, store: &ParamStore, ids: &[ParamId]) -> Result<Vec<Var>, NumericError> {
    ids.iter().map(|&id| lift(tape, store, id)).collect()
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "linear",
            shapes: &[&[3, 4], &[1, 4], &[3]],
            build: |t, s, p| {
                let x = lift(t, s, p[1])?;
                t.linear(s, p[0], x, Some(p[2]))
            },
        },
        OpCase {
            name: "linear_no_bias",
            shapes: &[&[2, 5], &[1, 5]],
            build: |t, s, p| {
                let x = lift(t, s, p[1])?;
                t.linear(s, p[0], x, None)
            },
        },
        OpCase { name: "embedding", shapes: &[&[4, 3]], build: |t, s, p| t.embedding(s, p[0], 2) },
        OpCase {
            name: "concat",
            shapes: &[&[1, 2], &[1, 3], &[1, 1]],
            build: |t, s, p| {
                let v = lift_all(t, s, p)?;
                t.concat(&v)
            },
        },
        OpCase {
            name: "add",
            shapes: &[&[1, 3], &[1, 3], &[1, 3]],
            build: |t, s, p| {
                let v = lift_all(t, s, p)?;
                t.add(&v)
            },
        },
        OpCase {
            name: "mean",
            shapes: &[&[1, 3], &[1, 3], &[1, 3]],
            build: |t, s, p| {
                let v = lift_all(t, s, p)?;
                t.mean(&v)
            },
        },
        OpCase {
            name: "tanh",
            shapes: &[&[1, 4]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                Ok(t.tanh(x))
            },
        },
        OpCase {
            name: "relu",
            shapes: &[&[1, 4]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                Ok(t.relu(x))
            },
        },
        OpCase {
            name: "dropout",
            shapes: &[&[1, 6]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                t.dropout(x, 0.4, &mut seeded_rng(11))
            },
        },
        OpCase {
            name: "log_softmax",
            shapes: &[&[1, 5]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                Ok(t.log_softmax(x))
            },
        },
        OpCase {
            name: "pick",
            shapes: &[&[1, 4]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                let l = t.log_softmax(x);
                t.pick(l, 2)
            },
        },
        OpCase {
            name: "scale",
            shapes: &[&[1, 3]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                Ok(t.scale(x, -1.7))
            },
        },
        OpCase {
            name: "dot",
            shapes: &[&[1, 3]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                t.dot(x, &[0.5, -2.0, 1.25])
            },
        },
        OpCase {
            name: "sum",
            shapes: &[&[1, 4]],
            build: |t, s, p| {
                let x = lift(t, s, p[0])?;
                t.sum(x)
            },
        },
        OpCase {
            name: "weighted_sum",
            shapes: &[&[1, 3], &[1, 3]],
            build: |t, s, p| {
                let (a, b) = (lift(t, s, p[0])?, lift(t, s, p[1])?);
                let (la, lb) = (t.log_softmax(a), t.log_softmax(b));
                let (x, y) = (t.pick(la, 0)?, t.pick(lb, 1)?);
                t.weighted_sum(&[(x, 0.3), (y, -1.1), (x, 2.0)])
            },
        },
        OpCase {
            name: "mlp",
            shapes: &[&[4, 3], &[4], &[2, 4], &[2], &[1, 3]],
            build: |t, s, p| {
                let layers = [Layer { weight: p[0], bias: p[1] }, Layer { weight: p[2], bias: p[3] }];
                let x = lift(t, s, p[4])?;
                mlp_forward(t, s, &layers, x, Activation::Tanh, 0.3, true, &mut seeded_rng(5))
            },
        },
    ]
}

fn op_loss(case: &OpCase, store: &ParamStore, ids: &[ParamId], weights: &[f64]) -> (Tape, Var) {
    let mut tape = Tape::new();
    let out = (case.build)(&mut tape, store, ids).expect("op builds");
    let loss = tape.dot(out, weights).expect("weights fit the output");
    (tape, loss)
}

/// Largest relative error over every parameter coordinate of one random instance.
pub fn check_op(case: &OpCase, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = case
        .shapes
        .iter()
        .enumerate()
        .map(|(i, shape)| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            store.add(&format!("p{i}"), Tensor::new(shape.to_vec(), data).unwrap()).unwrap()
        })
        .collect();
    let out_len = {
        let mut tape = Tape::new();
        let v = (case.build)(&mut tape, &store, &ids).unwrap();
        tape.value(v).len()
    };
    let weights: Vec<f64> = (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (mut tape, loss) = op_loss(case, &store, &ids, &weights);
    store.zero_grads();
    tape.backward(loss, 1.0, &mut store).unwrap();

    let mut worst: f64 = 0.0;
    for &id in &ids {
        for k in 0..store.get(id).value.len() {
            let eval = |delta: f64| {
                let mut s = store.clone();
                s.get_mut(id).value.data_mut()[k] += delta;
                let (tape, loss) = op_loss(case, &s, &ids, &weights);
                tape.scalar(loss)
            };
            let numeric = (eval(H) - eval(-H)) / (2.0 * H);
            worst = worst.max(rel_error(store.get(id).grad.data()[k], numeric));
        }
    }
    worst
}

fn policy_loss(model: &Model, sentence: &Sentence, script: &ScriptedActions, coeffs: &[f64], dropout: f64) -> (Tape, Var) {
    let settings = EpisodeSettings { dropout, ..EpisodeSettings::from_config(&TrainConfig::default(), false) };
    let mut tape = Tape::new();
    let rollout = run_episode(&mut tape, model, sentence, EpisodeMode::Scripted(script), settings, &mut seeded_rng(77))
        .expect("scripted episode runs");
    let terms: Vec<(Var, f64)> = rollout.all_log_probs().zip(coeffs).map(|(v, &c)| (v, c)).collect();
    let loss = tape.weighted_sum(&terms).unwrap();
    (tape, loss)
}

/// Result of one random check of the full policy graph.
pub struct PolicyCheck {
    pub worst: f64,
    pub checks: usize,
}

/// Random model, sentence and scripted trajectory; the loss is a random
/// combination of every decision's log-probability. Checks one random
/// direction through all parameters plus a few single coordinates.
pub fn check_policy(seed: u64) -> PolicyCheck {
    let mut rng = seeded_rng(seed);
    let sentence = random_sentence(&mut rng, "g", 5, 2);
    let cfg = ModelConfig { shared_low_policy: rng.gen_bool(0.3), ..tiny_config() };
    let mut model = model_for(&cfg, &[&sentence], seed);
    // larger weights than the default init so every path carries signal
    for p in model.store.iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.8..0.8));
    }
    let script = random_script(&mut rng, sentence.len(), 0.5);
    let dropout = if rng.gen_bool(0.5) { 0.3 } else { 0.0 };
    let coeffs: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (mut tape, loss) = policy_loss(&model, &sentence, &script, &coeffs, dropout);
    model.store.zero_grads();
    tape.backward(loss, 1.0, &mut model.store).unwrap();

    let eval_shifted = |direction: &[Vec<f64>], h: f64| {
        let mut m = model.clone();
        shift(&mut m.store, direction, h);
        let (tape, loss) = policy_loss(&m, &sentence, &script, &coeffs, dropout);
        tape.scalar(loss)
    };

    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let direction = random_direction(&model.store, &mut rng);
    let numeric = (eval_shifted(&direction, H) - eval_shifted(&direction, -H)) / (2.0 * H);
    worst = worst.max(rel_error(grad_dot(&model.store, &direction), numeric));
    checks += 1;

    for _ in 0..3 {
        let pi = rng.gen_range(0..model.store.len());
        let k = rng.gen_range(0..model.store.iter().nth(pi).unwrap().value.len());
        let unit: Vec<Vec<f64>> = model
            .store
            .iter()
            .enumerate()
            .map(|(i, p)| (0..p.value.len()).map(|j| if i == pi && j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let numeric = (eval_shifted(&unit, H) - eval_shifted(&unit, -H)) / (2.0 * H);
        worst = worst.max(rel_error(grad_dot(&model.store, &unit), numeric));
        checks += 1;
    }
    PolicyCheck { worst, checks }
}
