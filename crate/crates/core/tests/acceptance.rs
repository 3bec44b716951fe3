//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs without the libtest harness. Pass criterion numbers as arguments to
//! run a subset (`cargo test -p hrlt-core --test acceptance -- 1 4`).

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::gradcheck::{check_op, check_policy, op_cases};
use common::*;
use hrlt_core::data::{
    generate_synthetic_corpus, parse_aste, parse_aste_records, parse_jsonl, write_aste, write_jsonl, PosProvider,
    SyntheticOptions,
};
use hrlt_core::env::{
    gate_low_rewards, high_final_reward, high_reward, low_final_reward, low_reward, run_episode, EpisodeMode,
    EpisodeSettings, GoldAlignment,
};
use hrlt_core::eval::{decode_corpus, partitioned_report, results_from, triplet_counts, Counts, Partition};
use hrlt_core::numerics::{Checkpoint, Tape};
use hrlt_core::trainer::{train, train_phases, FinetuneMode, Phase, PhasePlan, TrainOptions};
use hrlt_core::{
    bio_labels_for, decode_span, BioTag, Model, ModelConfig, Sentence, SentimentLabel, Span, TrainConfig, Triplet,
};
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(detail.into())
    }
}

fn outcome(r: Result<String, String>) -> Outcome {
    match r {
        Ok(d) => Outcome::Pass(d),
        Err(d) => Outcome::Fail(d),
    }
}

fn gradients() -> Outcome {
    outcome((|| {
        let start = Instant::now();
        let (mut trials, mut worst) = (0usize, 0.0f64);
        for case in op_cases() {
            for seed in 0..100 {
                let err = check_op(&case, seed);
                ensure(err <= 1e-4, format!("{} seed {seed}: relative error {err:e}", case.name))?;
                worst = worst.max(err);
                trials += 1;
            }
        }
        for seed in 0..200 {
            let r = check_policy(seed);
            ensure(r.worst <= 1e-4, format!("policy graph seed {seed}: relative error {:e}", r.worst))?;
            worst = worst.max(r.worst);
            trials += 1;
        }
        let elapsed = start.elapsed();
        ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
        Ok(format!("{trials} trials, worst relative error {worst:.1e}, {:.1}s", elapsed.as_secs_f64()))
    })())
}

fn sp(a: usize, b: usize) -> Span {
    Span::new(a, b).unwrap()
}

fn rewards() -> Outcome {
    use BioTag::{B, I, O};
    use SentimentLabel::{Negative, Neutral, Positive};
    let appetizers = vec![
        Triplet::new(sp(0, 0), sp(2, 2), Positive).unwrap(),
        Triplet::new(sp(14, 14), sp(8, 8), Positive).unwrap(),
        Triplet::new(sp(14, 14), sp(11, 12), Negative).unwrap(),
    ];
    let only_pos = GoldAlignment::new(&[Triplet::new(sp(0, 0), sp(1, 1), Positive).unwrap()]);
    let lambdas = [1.0, 0.7, 0.1];
    let cases: Vec<(&str, f64, f64)> = vec![
        ("option positive vs appetizers gold", high_reward(Positive, &GoldAlignment::new(&appetizers)), 1.0),
        ("option none", high_reward(SentimentLabel::None, &GoldAlignment::new(&appetizers)), 0.0),
        ("option neutral vs {pos}", high_reward(Neutral, &only_pos), -1.0),
        ("F1 exact multiset", high_final_reward(&[Positive, Positive, Negative], &[Positive, Positive, Negative], 1.0), 1.0),
        ("F1 empty prediction", high_final_reward(&[], &[Positive], 1.0), 0.0),
        ("F1 both empty", high_final_reward(&[], &[], 1.0), 1.0),
        ("F1 {pos,neg} vs {pos,pos,neg}", high_final_reward(&[Positive, Negative], &[Positive, Positive, Negative], 1.0), 0.8),
        ("F2 {pos,neg} vs {pos,pos,neg}", high_final_reward(&[Positive, Negative], &[Positive, Positive, Negative], 2.0), 5.0 / 7.0),
        ("low B=B", low_reward(B, B, &lambdas), 1.0),
        ("low O vs B", low_reward(O, B, &lambdas), -0.5),
        ("low O=O", low_reward(O, O, &lambdas), 0.1),
        ("low I=I", low_reward(I, I, &lambdas), 0.7),
        ("final exact", low_final_reward(&[O, B, I], &[O, B, I], Some(sp(1, 2)), -1.0), 1.0),
        ("final one wrong", low_final_reward(&[O, B, O], &[O, B, I], Some(sp(1, 1)), -1.0), -1.0),
        ("final all O", low_final_reward(&[O, O, O], &[O, B, I], None, -1.0), -2.0),
    ];
    let gating = [
        (gate_low_rewards(true, &[1.0, -0.5]), vec![1.0, -0.5]),
        (gate_low_rewards(false, &[1.0, -0.5]), vec![0.0, 0.0]),
        (gate_low_rewards(false, &[]), vec![]),
    ];
    for (name, got, want) in &cases {
        if (got - want).abs() > f64::EPSILON {
            return Outcome::Fail(format!("{name}: got {got}, expected {want}"));
        }
    }
    if let Some((got, want)) = gating.iter().find(|(g, w)| g != w) {
        return Outcome::Fail(format!("gating: got {got:?}, expected {want:?}"));
    }
    Outcome::Pass(format!("{} reward cases and {} gating cases", cases.len(), gating.len()))
}

fn episodes() -> Outcome {
    outcome((|| {
        let start = Instant::now();
        let settings = EpisodeSettings::from_config(&TrainConfig { dropout: 0.0, ..TrainConfig::default() }, false);
        let mut rng = seeded_rng(2024);
        let mut actions = 0usize;
        for i in 0..1000 {
            let sentence = random_sentence(&mut rng, &format!("f{i}"), 12, 4);
            let model = model_for(&tiny_config(), &[&sentence], i);
            let j = sentence.len();
            let mut tape = Tape::new();
            let t = run_episode(&mut tape, &model, &sentence, EpisodeMode::Sample, settings, &mut rng).map_err(|e| e.to_string())?.trace;
            let launches = t.options.iter().filter(|o| o.option.is_polarity()).count();
            ensure(t.options.len() == j, format!("sentence {i}: {} options for {j} tokens", t.options.len()))?;
            ensure(t.subtasks.len() == 2 * launches, format!("sentence {i}: subtask count"))?;
            ensure(t.subtasks.iter().all(|s| s.actions.len() == j), format!("sentence {i}: action count"))?;
            ensure(t.high_rewards.iter().all(|r| [-1.0, 0.0, 1.0].contains(r)), format!("sentence {i}: option reward"))?;
            ensure((0.0..=1.0).contains(&t.high_final_reward), format!("sentence {i}: final reward"))?;
            for s in &t.subtasks {
                let gated = !s.option_correct;
                ensure(
                    s.rewards.iter().all(|r| [-0.5, 0.1, 0.7, 1.0].contains(r) || (gated && *r == 0.0)),
                    format!("sentence {i}: tag reward out of range"),
                )?;
                ensure(
                    [1.0, -1.0, -2.0].contains(&s.final_reward) || (gated && s.final_reward == 0.0),
                    format!("sentence {i}: subtask final reward {}", s.final_reward),
                )?;
                actions += s.actions.len();
            }

            let mut tape = Tape::new();
            let forced = run_episode(&mut tape, &model, &sentence, EpisodeMode::TeacherForced, settings, &mut rng)
                .map_err(|e| e.to_string())?
                .trace;
            ensure(forced.high_final_reward == 1.0, format!("sentence {i}: forced final reward {}", forced.high_final_reward))?;
            ensure(forced.subtasks.iter().all(|s| s.final_reward == 1.0), format!("sentence {i}: forced subtask final"))?;
            let gold: BTreeSet<Triplet> = sentence.gold().iter().copied().collect();
            ensure(forced.predicted.iter().copied().collect::<BTreeSet<_>>() == gold, format!("sentence {i}: forced triplets"))?;
        }
        let elapsed = start.elapsed();
        ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
        Ok(format!("1000 sentences, {actions} sampled tag actions, {:.1}s", elapsed.as_secs_f64()))
    })())
}

fn brute_counts(predicted: &[Triplet], gold: &[Triplet]) -> Counts {
    let mut p: Vec<Triplet> = Vec::new();
    predicted.iter().for_each(|t| if !p.contains(t) { p.push(*t) });
    let mut g: Vec<Triplet> = Vec::new();
    gold.iter().for_each(|t| if !g.contains(t) { g.push(*t) });
    let tp = p.iter().filter(|t| g.contains(t)).count();
    Counts { tp, fp: p.len() - tp, fn_: g.len() - tp }
}

fn scorer_and_decoder() -> Outcome {
    outcome((|| {
        let mut rng = seeded_rng(7);
        for i in 0..10_000 {
            let len = rng.gen_range(1..8);
            let mut draw = |n: usize| -> Vec<Triplet> {
                (0..n).map(|_| Triplet::new(random_span(&mut rng, len), random_span(&mut rng, len), random_polarity(&mut rng)).unwrap()).collect()
            };
            let (np, ng) = (i % 5, (i / 5) % 5);
            let gold = draw(ng);
            let mut predicted = draw(np);
            // copy some gold so matches are common
            predicted.extend(gold.iter().take(i % 3).copied());
            ensure(triplet_counts(&predicted, &gold) == brute_counts(&predicted, &gold), format!("instance {i}"))?;
        }
        let mut sequences = 0usize;
        for len in 0..=8usize {
            for code in 0..3usize.pow(len as u32) {
                let tags: Vec<BioTag> = (0..len).map(|k| BioTag::from_index(code / 3usize.pow(k as u32) % 3).unwrap()).collect();
                let expect = (0..len)
                    .flat_map(|s| (s..len).map(move |e| sp(s, e)))
                    .find(|&span| bio_labels_for(span, len).unwrap() == tags);
                ensure(decode_span(&tags) == expect, format!("tags {tags:?}"))?;
                sequences += 1;
            }
        }
        Ok(format!("10000 scorer instances, {sequences} tag sequences"))
    })())
}

fn desk_model() -> ModelConfig {
    ModelConfig { d_h: 64, d_s: 64, d_emb: 32, d_word: 32, d_pos: 25, ..ModelConfig::default() }
}

fn desk_train(seed: u64) -> TrainConfig {
    TrainConfig { seed, pretrain_lr: 1e-3, finetune_lr: 1e-4, dropout: 0.1, ..TrainConfig::default() }
}

fn learnability() -> Outcome {
    outcome((|| {
        let start = Instant::now();
        let opts = SyntheticOptions { n_sentences: 600, max_triplets: 3, overlap_rate: 0.3, ..SyntheticOptions::default() };
        let corpus = generate_synthetic_corpus(1, &opts);
        let (tr, dev) = corpus.split_at(500);
        let cfg = desk_train(1);
        let model = Model::new(&desk_model(), hrlt_core::model::build_vocab(tr, true), cfg.seed).map_err(|e| e.to_string())?;
        ensure(model.vocab().len() <= 201, format!("vocabulary of {}", model.vocab().len()))?;
        let report = train(model, tr, dev, &cfg, FinetuneMode::Reinforce, TrainOptions::default(), |_| Ok(())).map_err(|e| e.to_string())?;
        let traces = decode_corpus(&report.best, dev, EpisodeSettings::from_config(&cfg, false), 1).map_err(|e| e.to_string())?;
        let rep = partitioned_report(&results_from(dev, &traces));
        let overlap = rep.rows.iter().find(|r| r.partition == Partition::Overlap).and_then(|r| r.score).map(|s| s.f1);
        let elapsed = start.elapsed();
        let detail = format!(
            "dev F1 {:.4}, Overlap F1 {}, best {} epoch {}, {:.0}s",
            rep.overall.f1,
            overlap.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into()),
            report.best_phase.name(),
            report.best_epoch,
            elapsed.as_secs_f64()
        );
        ensure(rep.overall.f1 >= 0.95, detail.clone())?;
        ensure(overlap.is_some_and(|f| f >= 0.85), detail.clone())?;
        ensure(elapsed <= Duration::from_secs(600), detail.clone())?;
        Ok(detail)
    })())
}

/// Shared pre-training, then the last-epoch dev precision of REINFORCE and of
/// supervised continuation.
fn noisy_precisions(seed: u64) -> Result<(f64, f64), String> {
    let opts = SyntheticOptions { n_sentences: 400, label_noise: 0.1, ..SyntheticOptions::default() };
    let corpus = generate_synthetic_corpus(seed, &opts);
    let (tr, dev) = corpus.split_at(300);
    let cfg = TrainConfig { finetune_epochs: 5, ..desk_train(seed) };
    let model = Model::new(&desk_model(), hrlt_core::model::build_vocab(tr, true), seed).map_err(|e| e.to_string())?;
    let opts = TrainOptions::default();
    let err = |e: hrlt_core::Error| e.to_string();
    let pre = train_phases(model, tr, dev, &cfg, &[PhasePlan { phase: Phase::Pretrain, start: 1, end: 10 }], false, opts, |_| Ok(()))
        .map_err(err)?;
    let finetune = |phase| {
        train_phases(pre.best.clone(), tr, dev, &cfg, &[PhasePlan { phase, start: 1, end: cfg.finetune_epochs }], false, opts, |_| Ok(()))
            .map(|r| r.rows.last().expect("at least one epoch").dev.precision)
    };
    Ok((finetune(Phase::Finetune).map_err(err)?, finetune(Phase::Supervised).map_err(err)?))
}

fn rl_direction() -> Outcome {
    outcome((|| {
        let mut wins = 0;
        let mut cells = Vec::new();
        for seed in 1..=5 {
            let (rl, sup) = noisy_precisions(seed)?;
            if rl >= sup {
                wins += 1;
            }
            cells.push(format!("{rl:.4}/{sup:.4}"));
        }
        let detail = format!("RL >= no-RL precision in {wins}/5 seeds (RL/no-RL: {})", cells.join(", "));
        ensure(wins >= 3, detail.clone())?;
        Ok(detail)
    })())
}

/// Sentence count and (positive, negative, neutral) triplet counts of one split.
type SplitCounts = (usize, [usize; 3]);

const TABLE: [(&str, [SplitCounts; 3]); 4] = [
    ("14lap", [(906, [817, 517, 126]), (219, [169, 141, 36]), (328, [364, 116, 63])]),
    ("14res", [(1266, [1692, 480, 166]), (310, [404, 119, 54]), (492, [773, 155, 66])]),
    ("15res", [(605, [783, 205, 25]), (148, [185, 53, 11]), (322, [317, 143, 25])]),
    ("16res", [(857, [1015, 329, 50]), (210, [252, 76, 11]), (326, [407, 78, 29])]),
];
const SPLITS: [&str; 3] = ["train", "dev", "test"];

fn split_file(root: &Path, dataset: &str, split: &str) -> Option<PathBuf> {
    [format!("{dataset}/{split}_triplets.txt"), format!("{dataset}/{split}.txt")]
        .iter()
        .map(|rel| root.join(rel))
        .find(|p| p.is_file())
}

fn dataset_counts() -> Outcome {
    let Some(root) = std::env::var_os("HRLT_ASTE_DATA").map(PathBuf::from) else {
        return Outcome::Skip("HRLT_ASTE_DATA is not set; point it at the ASTE-Data-V2 directory to run".into());
    };
    let mut missing = Vec::new();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (dataset, expected) in TABLE {
        for (split, (sentences, polarities)) in SPLITS.iter().zip(expected) {
            let Some(path) = split_file(&root, dataset, split) else {
                missing.push(format!("{dataset}/{split}"));
                continue;
            };
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => return Outcome::Fail(format!("{}: {e}", path.display())),
            };
            let records = match parse_aste_records(&text, &path.display().to_string()) {
                Ok(r) => r,
                Err(e) => return Outcome::Fail(e.to_string()),
            };
            let mut counts = [0usize; 3];
            for t in records.iter().flat_map(|r| &r.triplets) {
                counts[t.sentiment.polarity_index().expect("gold polarity")] += 1;
            }
            if records.len() != sentences || counts != polarities {
                mismatches.push(format!("{dataset}/{split}: {} sentences {counts:?}, expected {sentences} {polarities:?}", records.len()));
            }
            checked += 1;
        }
    }
    if checked == 0 {
        return Outcome::Skip(format!("no split files under {}", root.display()));
    }
    if !mismatches.is_empty() {
        return Outcome::Fail(mismatches.join("; "));
    }
    if !missing.is_empty() {
        return Outcome::Fail(format!("missing {}", missing.join(", ")));
    }
    Outcome::Pass(format!("{checked} splits match"))
}

fn short_log(seed: u64) -> Result<(String, Model), String> {
    let corpus = generate_synthetic_corpus(seed, &SyntheticOptions { n_sentences: 30, ..SyntheticOptions::default() });
    let (tr, dev) = corpus.split_at(20);
    let cfg = TrainConfig { seed, pretrain_epochs: 2, finetune_epochs: 2, batch_size: 4, ..desk_train(seed) };
    let model = Model::new(&tiny_config(), hrlt_core::model::build_vocab(tr, true), seed).map_err(|e| e.to_string())?;
    let r = train(model, tr, dev, &cfg, FinetuneMode::Reinforce, TrainOptions::default(), |_| Ok(())).map_err(|e| e.to_string())?;
    let mut log = String::from(hrlt_core::trainer::MetricRow::CSV_HEADER);
    for row in &r.rows {
        log.push('\n');
        log.push_str(&row.to_csv());
    }
    Ok((log, r.best))
}

fn determinism() -> Outcome {
    outcome((|| {
        let (a, model) = short_log(3)?;
        let (b, _) = short_log(3)?;
        ensure(a == b, "metric logs differ between identical runs")?;
        let (c, _) = short_log(4)?;
        ensure(a != c, "different seeds gave the same log")?;

        let ckpt = model.to_checkpoint(3, [1; 32], &Default::default());
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(back.to_bytes() == bytes, "checkpoint bytes change on re-encode")?;
        let restored = Model::from_checkpoint(&back, &tiny_config()).map_err(|e| e.to_string())?;
        ensure(restored.store == model.store, "restored parameters differ")?;

        let corpus: Vec<Sentence> = generate_synthetic_corpus(5, &SyntheticOptions { n_sentences: 50, ..SyntheticOptions::default() });
        let jsonl = parse_jsonl(&write_jsonl(&corpus), "mem", &PosProvider::Heuristic).map_err(|e| e.to_string())?;
        ensure(jsonl == corpus, "JSON-lines round trip changed the corpus")?;
        let aste_text = write_aste(&corpus);
        let aste = parse_aste(&aste_text, "mem", &PosProvider::Heuristic).map_err(|e| e.to_string())?;
        ensure(write_aste(&aste) == aste_text, "hash-separated round trip changed the text")?;
        ensure(
            aste.iter().zip(&corpus).all(|(x, y)| x.tokens() == y.tokens() && x.gold() == y.gold()),
            "hash-separated round trip changed tokens or triplets",
        )?;
        Ok(format!("{} log lines identical, checkpoint of {} bytes and 50-sentence corpus round-trip", a.lines().count(), bytes.len()))
    })())
}

fn main() {
    let criteria: [(u32, &str, Check); 8] = [
        (1, "gradient checks", gradients),
        (2, "reward suite", rewards),
        (3, "episode invariants", episodes),
        (4, "scorer and decoder oracles", scorer_and_decoder),
        (5, "synthetic learnability", learnability),
        (6, "RL precision under label noise", rl_direction),
        (7, "dataset statistics", dataset_counts),
        (8, "determinism and round trips", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match result {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {n} ({name}): {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
