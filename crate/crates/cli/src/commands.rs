use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hrlt_core::config::EncoderSpec;
use hrlt_core::data::{load_corpus, OptionRecord, SentenceRecord};
use hrlt_core::encoder::EncodingCache;
use hrlt_core::env::{write_trace, EpisodeSettings};
use hrlt_core::eval::{decode_corpus, partitioned_report, results_from, score_corpus};
use hrlt_core::model::{build_vocab, hex, stored_model_config};
use hrlt_core::numerics::Checkpoint;
use hrlt_core::trainer::{train_phases, EpochEvent, FinetuneMode, MetricRow, Phase, PhasePlan, TrainOptions, TrainReport};
use hrlt_core::{Config, EpisodeTrace, Error, Model, Result, Sentence};

use crate::args::{ConfigArgs, EvalArgs, FinetuneArgs, PredictArgs, TrainArgs};
use crate::manifest::{self, io_error, RunManifest};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn required(value: &Option<PathBuf>, what: &str, flag: &str, key: &str) -> Result<PathBuf> {
    value.clone().ok_or_else(|| Error::Usage(format!("no {what}: pass {flag} or set `{key}`")))
}

/// A config file or a `model.*` override pins the architecture; otherwise the
/// checkpoint's own is used.
fn pins_model(args: &ConfigArgs) -> bool {
    args.config.is_some() || args.set.iter().any(|s| s.trim_start().starts_with("model."))
}

fn load_model(path: &Path, cfg: &mut Config, pinned: bool) -> Result<Model> {
    let ckpt = Checkpoint::load(path)?;
    if !pinned {
        cfg.model = stored_model_config(&ckpt)?;
    }
    Model::from_checkpoint(&ckpt, &cfg.model)
}

/// Switch to precomputed encodings when configured; returns the cache fingerprint.
fn attach_encoder(model: &mut Model, cfg: &Config) -> Result<Option<String>> {
    match &cfg.run.encoder {
        EncoderSpec::Trainable => Ok(None),
        EncoderSpec::Cache(path) => {
            let cache = EncodingCache::load(path)?;
            let fingerprint = hex(cache.fingerprint());
            model.use_cache(Arc::new(cache), cfg.run.encoder_fallback)?;
            Ok(Some(fingerprint))
        }
    }
}

fn dump_traces(path: &Path, traces: &[EpisodeTrace]) -> Result<()> {
    let mut out = create(path)?;
    for t in traces {
        write_trace(&mut out, t).map_err(|e| io_error(path, e))?;
    }
    out.flush().map_err(|e| io_error(path, e))
}

/// Appends metric rows and keeps `last.ckpt` and `best.ckpt` current.
struct RunWriter {
    dir: PathBuf,
    metrics: BufWriter<File>,
    seed: u64,
    config_hash: [u8; 32],
}

impl RunWriter {
    fn new(dir: &Path, cfg: &Config) -> Result<Self> {
        let path = dir.join(manifest::METRICS);
        let mut metrics = create(&path)?;
        writeln!(metrics, "{}", MetricRow::CSV_HEADER).map_err(|e| io_error(&path, e))?;
        Ok(RunWriter { dir: dir.to_path_buf(), metrics, seed: cfg.train.seed, config_hash: cfg.hash() })
    }

    fn observe(&mut self, e: &EpochEvent<'_>) -> Result<()> {
        let path = self.dir.join(manifest::METRICS);
        writeln!(self.metrics, "{}", e.row.to_csv())
            .and_then(|_| self.metrics.flush())
            .map_err(|err| io_error(&path, err))?;
        let extra = BTreeMap::from([
            ("phase".to_string(), e.row.phase.name().to_string()),
            ("epoch".to_string(), e.row.epoch.to_string()),
            ("dev_f1".to_string(), e.row.dev.f1.to_string()),
        ]);
        let ckpt = e.model.to_checkpoint(self.seed, self.config_hash, &extra);
        ckpt.save(&self.dir.join(manifest::LAST))?;
        if e.improved {
            ckpt.save(&self.dir.join(manifest::BEST))?;
        }
        Ok(())
    }
}

struct Schedule<'a> {
    command: &'static str,
    plans: Vec<PhasePlan>,
    from: Option<&'a Path>,
}

fn run_training(args: &TrainArgs, schedule: Schedule<'_>) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    let run = &mut cfg.run;
    run.train_path = args.train.clone().or(run.train_path.take());
    run.dev_path = args.dev.clone().or(run.dev_path.take());
    run.out_dir = args.out.clone().or(run.out_dir.take());
    let train_path = required(&cfg.run.train_path, "training corpus", "--train", "data.train")?;
    let dev_path = required(&cfg.run.dev_path, "dev corpus", "--dev", "data.dev")?;
    let out_dir = required(&cfg.run.out_dir, "run directory", "--out", "run.out_dir")?;

    let train: Vec<Sentence> = load_corpus(&train_path)?;
    let dev: Vec<Sentence> = load_corpus(&dev_path)?;
    if train.is_empty() {
        return Err(Error::Usage(format!("training corpus {} is empty", train_path.display())));
    }

    let mut model = match schedule.from {
        Some(path) => load_model(path, &mut cfg, pins_model(&args.config))?,
        None => Model::new(&cfg.model, build_vocab(&train, cfg.model.lowercase), cfg.train.seed)?,
    };
    let encoder_fingerprint = attach_encoder(&mut model, &cfg)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
    let config_path = out_dir.join(manifest::CONFIG);
    std::fs::write(&config_path, cfg.to_text()).map_err(|e| io_error(&config_path, e))?;
    let mut record = RunManifest {
        command: schedule.command,
        config: cfg.clone(),
        corpora: vec![
            ("train", train_path.clone(), manifest::file_sha256(&train_path)?, train.len()),
            ("dev", dev_path.clone(), manifest::file_sha256(&dev_path)?, dev.len()),
        ],
        encoder_fingerprint,
        start_checkpoint: schedule.from.map(Path::to_path_buf),
        trace_dump: args.trace_dump.clone(),
        status: "running".into(),
        best: None,
    };
    record.write(&out_dir)?;

    let opts = TrainOptions { jobs: cfg.run.jobs, log_wallclock: cfg.run.log_wallclock };
    let mut writer = RunWriter::new(&out_dir, &cfg)?;
    let outcome = train_phases(model, &train, &dev, &cfg.train, &schedule.plans, true, opts, |e| writer.observe(e));
    let report: TrainReport = match outcome {
        Ok(r) => r,
        Err(e) => {
            record.status = format!("failed: {e}");
            record.write(&out_dir)?;
            return Err(e);
        }
    };

    if let Some(path) = &args.trace_dump {
        let traces = decode_corpus(&report.best, &dev, EpisodeSettings::from_config(&cfg.train, false), cfg.run.jobs)?;
        dump_traces(path, &traces)?;
    }
    record.status = "complete".into();
    record.best = Some((report.best_phase.name().to_string(), report.best_epoch, report.best_f1));
    record.write(&out_dir)?;
    println!(
        "best dev F1 {:.4} ({} epoch {}); run directory {}",
        report.best_f1,
        report.best_phase.name(),
        report.best_epoch,
        out_dir.display()
    );
    Ok(())
}

pub fn pretrain(args: &TrainArgs) -> Result<()> {
    let epochs = args.config.resolve()?.train.pretrain_epochs;
    let plans = vec![PhasePlan { phase: Phase::Pretrain, start: 1, end: epochs }];
    run_training(args, Schedule { command: "pretrain", plans, from: None })
}

pub fn finetune(args: &FinetuneArgs) -> Result<()> {
    let t = args.train.config.resolve()?.train;
    let mode = if args.no_rl { FinetuneMode::Supervised } else { FinetuneMode::Reinforce };
    let phase = match mode {
        FinetuneMode::Reinforce => Phase::Finetune,
        FinetuneMode::Supervised => Phase::Supervised,
    };
    let mut plans = Vec::new();
    if args.from.is_none() {
        plans.push(PhasePlan { phase: Phase::Pretrain, start: 1, end: t.pretrain_epochs });
    }
    plans.push(PhasePlan { phase, start: 1, end: t.finetune_epochs });
    run_training(&args.train, Schedule { command: "finetune", plans, from: args.from.as_deref() })
}

fn model_for_inference(config: &ConfigArgs, checkpoint: &Path) -> Result<(Config, Model)> {
    let mut cfg = config.resolve()?;
    let mut model = load_model(checkpoint, &mut cfg, pins_model(config))?;
    attach_encoder(&mut model, &cfg)?;
    Ok((cfg, model))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (cfg, model) = model_for_inference(&args.config, &args.checkpoint)?;
    let corpus = args.corpus.clone().or(cfg.run.test_path.clone());
    let corpus = required(&corpus, "evaluation corpus", "--corpus", "data.test")?;
    let sentences = load_corpus(&corpus)?;
    let traces = decode_corpus(&model, &sentences, EpisodeSettings::from_config(&cfg.train, false), cfg.run.jobs)?;
    if let Some(path) = &args.trace_dump {
        dump_traces(path, &traces)?;
    }
    let results = results_from(&sentences, &traces);
    if args.partition {
        print!("{}", partitioned_report(&results).to_text());
    } else {
        let s = score_corpus(&results);
        println!(
            "sentences {}  precision {:.4}  recall {:.4}  f1 {:.4}  tp {}  fp {}  fn {}",
            sentences.len(),
            s.precision,
            s.recall,
            s.f1,
            s.counts.tp,
            s.counts.fp,
            s.counts.fn_
        );
    }
    Ok(())
}

/// Prediction record: the sentence with predicted triplets and launched options.
pub fn prediction_record(sentence: &Sentence, trace: &EpisodeTrace) -> SentenceRecord {
    let mut rec = SentenceRecord::with_triplets(sentence, &trace.predicted);
    rec.options = Some(
        trace
            .options
            .iter()
            .filter(|o| o.option.is_polarity())
            .map(|o| OptionRecord { position: o.position, sentiment: o.option })
            .collect(),
    );
    rec
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (cfg, model) = model_for_inference(&args.config, &args.checkpoint)?;
    let sentences = load_corpus(&args.input)?;
    let traces = decode_corpus(&model, &sentences, EpisodeSettings::from_config(&cfg.train, false), cfg.run.jobs)?;
    if let Some(path) = &args.trace_dump {
        dump_traces(path, &traces)?;
    }
    let mut text = String::new();
    for (s, t) in sentences.iter().zip(&traces) {
        text.push_str(&prediction_record(s, t).to_line());
        text.push('\n');
    }
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}
