//! Flat `key = value` configuration with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! version = 1
//! model.d_s = 300
//! train.pretrain_lr = 0.00002
//! ```
//!
//! Every key has a default, unknown keys are rejected, and [`Config::to_text`]
//! enumerates the full configuration so a run can be reproduced from it.

use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::Activation;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), value: value.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Contextual token vector width.
    pub d_h: usize,
    /// High- and low-level state width.
    pub d_s: usize,
    /// Sentiment and tag embedding width.
    pub d_emb: usize,
    pub d_pos: usize,
    /// Built-in encoder word embedding width.
    pub d_word: usize,
    pub activation: Activation,
    /// One low-level head per subtask kind fed with a sentiment feature,
    /// instead of one head per (kind, sentiment).
    pub shared_low_policy: bool,
    pub lowercase: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_h: 128,
            d_s: 300,
            d_emb: 300,
            d_pos: 25,
            d_word: 64,
            activation: Activation::Tanh,
            shared_low_policy: false,
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    #[default]
    Mean,
    None,
}

/// Which token of a gold opinion span is the teacher-forced option position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorRule {
    #[default]
    LastToken,
    FirstToken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub trajectories_per_example: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub lambda_b: f64,
    pub lambda_i: f64,
    pub lambda_o: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub baseline: Baseline,
    pub anchor_rule: AnchorRule,
    /// Added to the low-level final reward when the tags do not decode to a span.
    pub malformed_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            pretrain_epochs: 40,
            pretrain_lr: 2e-5,
            finetune_epochs: 15,
            finetune_lr: 5e-6,
            trajectories_per_example: 5,
            batch_size: 16,
            dropout: 0.5,
            lambda_b: 1.0,
            lambda_i: 0.7,
            lambda_o: 0.1,
            beta: 1.0,
            gamma: 1.0,
            clip_norm: 5.0,
            baseline: Baseline::Mean,
            anchor_rule: AnchorRule::LastToken,
            malformed_penalty: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum EncoderSpec {
    #[default]
    Trainable,
    Cache(PathBuf),
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Trainable => f.write_str("trainable"),
            EncoderSpec::Cache(p) => write!(f, "cache:{}", p.display()),
        }
    }
}

impl std::str::FromStr for EncoderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "trainable" {
            Ok(EncoderSpec::Trainable)
        } else if let Some(p) = s.strip_prefix("cache:") {
            if p.is_empty() {
                Err("cache path is empty".into())
            } else {
                Ok(EncoderSpec::Cache(PathBuf::from(p)))
            }
        } else {
            Err("expected `trainable` or `cache:<path>`".into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub encoder: EncoderSpec,
    /// Fall back to the built-in encoder when a cache lookup misses.
    pub encoder_fallback: bool,
    /// Add elapsed seconds to the metric log. Off by default so reruns are byte-identical.
    pub log_wallclock: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            run: RunConfig { jobs: 1, ..RunConfig::default() },
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    // also catches literals such as `1e400` that overflow to infinity
    if value.parse::<f64>().is_ok_and(|v| !v.is_finite()) {
        return Err(invalid(key, value, "must be finite"));
    }
    value.parse().map_err(|_| invalid(key, value, "not a number"))
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(key: &str, value: &str) -> Result<T, ConfigError> {
    let v: T = num(key, value)?;
    if v <= T::default() {
        return Err(invalid(key, value, "must be positive"));
    }
    Ok(v)
}

fn non_negative(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(key, value, "must be a finite value ≥ 0"));
    }
    Ok(v)
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl Config {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let (m, t, r) = (&mut self.model, &mut self.train, &mut self.run);
        match key {
            "version" => {
                if value != CONFIG_VERSION.to_string() {
                    return Err(invalid(key, value, format!("only version {CONFIG_VERSION} is supported")));
                }
            }
            "model.d_h" => {
                m.d_h = positive(key, value)?;
                if m.d_h % 2 != 0 {
                    return Err(invalid(key, value, "must be even (two recurrent directions)"));
                }
            }
            "model.d_s" => m.d_s = positive(key, value)?,
            "model.d_emb" => m.d_emb = positive(key, value)?,
            "model.d_pos" => m.d_pos = positive(key, value)?,
            "model.d_word" => m.d_word = positive(key, value)?,
            "model.activation" => {
                m.activation = Activation::parse(value).ok_or_else(|| invalid(key, value, "expected tanh or relu"))?
            }
            "model.shared_low_policy" => m.shared_low_policy = boolean(key, value)?,
            "model.lowercase" => m.lowercase = boolean(key, value)?,
            "train.seed" => t.seed = num(key, value)?,
            "train.pretrain_epochs" => t.pretrain_epochs = num(key, value)?,
            "train.pretrain_lr" => t.pretrain_lr = positive(key, value)?,
            "train.finetune_epochs" => t.finetune_epochs = num(key, value)?,
            "train.finetune_lr" => t.finetune_lr = positive(key, value)?,
            "train.trajectories" => t.trajectories_per_example = positive(key, value)?,
            "train.batch_size" => t.batch_size = positive(key, value)?,
            "train.dropout" => {
                let v: f64 = num(key, value)?;
                if !(0.0..1.0).contains(&v) {
                    return Err(invalid(key, value, "must lie in [0, 1)"));
                }
                t.dropout = v;
            }
            "train.lambda_b" => t.lambda_b = non_negative(key, value)?,
            "train.lambda_i" => t.lambda_i = non_negative(key, value)?,
            "train.lambda_o" => t.lambda_o = non_negative(key, value)?,
            "train.beta" => t.beta = positive(key, value)?,
            "train.gamma" => {
                let v = non_negative(key, value)?;
                if v > 1.0 {
                    return Err(invalid(key, value, "must lie in [0, 1]"));
                }
                t.gamma = v;
            }
            "train.clip_norm" => t.clip_norm = non_negative(key, value)?,
            "train.baseline" => {
                t.baseline = match value {
                    "mean" => Baseline::Mean,
                    "none" => Baseline::None,
                    _ => return Err(invalid(key, value, "expected mean or none")),
                }
            }
            "train.anchor" => {
                t.anchor_rule = match value {
                    "last" => AnchorRule::LastToken,
                    "first" => AnchorRule::FirstToken,
                    _ => return Err(invalid(key, value, "expected last or first")),
                }
            }
            "train.malformed_penalty" => {
                let v: f64 = num(key, value)?;
                if !(v <= 0.0 && v.is_finite()) {
                    return Err(invalid(key, value, "must be a finite value ≤ 0"));
                }
                t.malformed_penalty = v;
            }
            "data.train" => r.train_path = path(value),
            "data.dev" => r.dev_path = path(value),
            "data.test" => r.test_path = path(value),
            "run.out_dir" => r.out_dir = path(value),
            "encoder.mode" => r.encoder = value.parse().map_err(|e: String| invalid(key, value, e))?,
            "encoder.fallback" => {
                r.encoder_fallback = match value {
                    "trainable" => true,
                    "error" => false,
                    _ => return Err(invalid(key, value, "expected trainable or error")),
                }
            }
            "log.wallclock" => r.log_wallclock = boolean(key, value)?,
            "eval.jobs" => r.jobs = positive(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() });
            };
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(ConfigError::Syntax { line: i + 1, message: format!("duplicate key `{k}`") });
            }
            cfg.set(k, v).map_err(|e| match e {
                ConfigError::Syntax { .. } => e,
                other => ConfigError::Syntax { line: i + 1, message: other.to_string() },
            })?;
        }
        Ok(cfg)
    }

    pub fn model_entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        vec![
            ("model.d_h", m.d_h.to_string()),
            ("model.d_s", m.d_s.to_string()),
            ("model.d_emb", m.d_emb.to_string()),
            ("model.d_pos", m.d_pos.to_string()),
            ("model.d_word", m.d_word.to_string()),
            ("model.activation", m.activation.name().to_string()),
            ("model.shared_low_policy", m.shared_low_policy.to_string()),
            ("model.lowercase", m.lowercase.to_string()),
        ]
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (t, r) = (&self.train, &self.run);
        let mut out = vec![("version", CONFIG_VERSION.to_string())];
        out.extend(self.model_entries());
        out.extend([
            ("train.seed", t.seed.to_string()),
            ("train.pretrain_epochs", t.pretrain_epochs.to_string()),
            ("train.pretrain_lr", t.pretrain_lr.to_string()),
            ("train.finetune_epochs", t.finetune_epochs.to_string()),
            ("train.finetune_lr", t.finetune_lr.to_string()),
            ("train.trajectories", t.trajectories_per_example.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.dropout", t.dropout.to_string()),
            ("train.lambda_b", t.lambda_b.to_string()),
            ("train.lambda_i", t.lambda_i.to_string()),
            ("train.lambda_o", t.lambda_o.to_string()),
            ("train.beta", t.beta.to_string()),
            ("train.gamma", t.gamma.to_string()),
            ("train.clip_norm", t.clip_norm.to_string()),
            ("train.baseline", match t.baseline { Baseline::Mean => "mean", Baseline::None => "none" }.to_string()),
            ("train.anchor", match t.anchor_rule { AnchorRule::LastToken => "last", AnchorRule::FirstToken => "first" }.to_string()),
            ("train.malformed_penalty", t.malformed_penalty.to_string()),
            ("data.train", show_path(&r.train_path)),
            ("data.dev", show_path(&r.dev_path)),
            ("data.test", show_path(&r.test_path)),
            ("run.out_dir", show_path(&r.out_dir)),
            ("encoder.mode", r.encoder.to_string()),
            ("encoder.fallback", if r.encoder_fallback { "trainable" } else { "error" }.to_string()),
            ("log.wallclock", r.log_wallclock.to_string()),
            ("eval.jobs", r.jobs.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# hrlt configuration\n");
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn model_text(&self) -> String {
        self.model_entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 over the model and training sections (paths excluded).
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k.starts_with("model.") || k.starts_with("train.") {
                h.update(k.as_bytes());
                h.update(b"=");
                h.update(v.as_bytes());
                h.update(b"\n");
            }
        }
        h.finalize().into()
    }
}

impl TrainConfig {
    pub fn lambda(&self, tag: crate::BioTag) -> f64 {
        match tag {
            crate::BioTag::B => self.lambda_b,
            crate::BioTag::I => self.lambda_i,
            crate::BioTag::O => self.lambda_o,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_schedule() {
        let t = TrainConfig::default();
        assert_eq!(t.pretrain_epochs, 40);
        assert_eq!(t.pretrain_lr, 2e-5);
        assert_eq!(t.finetune_epochs, 15);
        assert_eq!(t.finetune_lr, 5e-6);
        assert_eq!(t.trajectories_per_example, 5);
        assert_eq!(t.batch_size, 16);
        assert_eq!(t.dropout, 0.5);
        let m = ModelConfig::default();
        assert_eq!((m.d_s, m.d_emb, m.d_pos), (300, 300, 25));
    }

    #[test]
    fn overflowing_and_non_finite_numbers_are_rejected() {
        for v in ["inf", "-Infinity", "NaN", "1e400", "0.00000000158127E950"] {
            assert!(Config::default().set("train.finetune_lr", v).is_err(), "{v}");
            assert!(Config::default().set("train.gamma", v).is_err(), "{v}");
        }
        assert!(Config::default().set("train.finetune_lr", "1e-300").is_ok());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = Config::default();
        cfg.set("train.pretrain_lr", "1e-3").unwrap();
        cfg.set("encoder.mode", "cache:/tmp/x.cache").unwrap();
        cfg.set("data.train", "a/b.jsonl").unwrap();
        let back = Config::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(Config::parse("model.nope = 1").is_err());
        assert!(Config::parse("train.lambda_b = -1").is_err());
        assert!(Config::parse("train.dropout = 1.0").is_err());
        assert!(Config::parse("version = 2").is_err());
        assert!(Config::parse("model.d_h = 7").is_err());
        assert!(Config::parse("train.seed = 1\ntrain.seed = 2").is_err());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = Config::default();
        let mut b = Config::default();
        b.set("data.train", "x").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("train.beta", "2").unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
