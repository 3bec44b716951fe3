//! A complete set of trainable parameters plus the handles that address them.

use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::config::{Config, ModelConfig};
use crate::domain::Sentence;
use crate::encoder::{Encoder, EncoderMode, EncodingCache, TrainableEncoder, Vocab};
use crate::numerics::{Checkpoint, CheckpointError, ParamStore};
use crate::policy::PolicyParams;
use crate::{derived_rng, Error, Result};

const META_VOCAB: &str = "vocab";
const META_MODEL: &str = "model_config";
const META_FINGERPRINT: &str = "encoder_fingerprint";

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub policy: PolicyParams,
    pub encoder: Encoder,
}

pub fn model_config_text(cfg: &ModelConfig) -> String {
    Config { model: cfg.clone(), ..Config::default() }.model_text()
}

/// Vocabulary over every token of the given sentences.
pub fn build_vocab<'a>(sentences: impl IntoIterator<Item = &'a Sentence>, lowercase: bool) -> Vocab {
    Vocab::from_tokens(sentences.into_iter().flat_map(|s| s.tokens().iter().map(String::as_str)), lowercase)
}

impl Model {
    pub fn new(cfg: &ModelConfig, vocab: Vocab, seed: u64) -> Result<Model> {
        let mut rng = derived_rng(seed, 0x1417);
        let mut store = ParamStore::new();
        let trainable = TrainableEncoder::build(&mut store, cfg, vocab, &mut rng)?;
        let policy = PolicyParams::build(&mut store, cfg, &mut rng)?;
        Ok(Model {
            config: cfg.clone(),
            store,
            policy,
            encoder: Encoder { trainable, mode: EncoderMode::Trainable },
        })
    }

    pub fn vocab(&self) -> &Vocab {
        self.encoder.trainable.vocab()
    }

    pub fn use_cache(&mut self, cache: Arc<EncodingCache>, fallback: bool) -> Result<()> {
        if cache.dim() != self.config.d_h {
            return Err(Error::Usage(format!(
                "encoding cache has width {} but the model expects d_h = {}",
                cache.dim(),
                self.config.d_h
            )));
        }
        self.encoder.mode = EncoderMode::Precomputed { cache, fallback };
        Ok(())
    }

    /// Hash of the architecture and vocabulary; changes whenever encodings
    /// from one model would be meaningless to another.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(model_config_text(&self.config).as_bytes());
        h.update(self.vocab().to_text().as_bytes());
        h.finalize().into()
    }

    pub fn to_checkpoint(&self, seed: u64, config_hash: [u8; 32], extra: &BTreeMap<String, String>) -> Checkpoint {
        let mut metadata = extra.clone();
        metadata.insert(META_VOCAB.into(), self.vocab().to_text());
        metadata.insert(META_MODEL.into(), model_config_text(&self.config));
        metadata.insert(META_FINGERPRINT.into(), hex(&self.fingerprint()));
        Checkpoint { seed, config_hash, metadata, params: self.store.clone() }
    }

    /// Rebuild a model, refusing checkpoints whose architecture differs from `cfg`.
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &ModelConfig) -> Result<Model> {
        let refuse = |msg: String| Error::Checkpoint(CheckpointError::Mismatch(msg));
        let stored = ckpt.metadata.get(META_MODEL).ok_or_else(|| refuse("missing model configuration".into()))?;
        let expected = model_config_text(cfg);
        if *stored != expected {
            return Err(refuse(format!(
                "checkpoint was trained with\n{stored}but the configuration requests\n{expected}"
            )));
        }
        let vocab = ckpt
            .metadata
            .get(META_VOCAB)
            .and_then(|t| Vocab::from_text(t))
            .ok_or_else(|| refuse("missing or malformed vocabulary".into()))?;
        let store = ckpt.params.clone();
        let shapes_ok = || -> Result<(TrainableEncoder, PolicyParams)> {
            let trainable = TrainableEncoder::attach(&store, cfg, vocab.clone())?;
            let policy = PolicyParams::attach(&store, cfg)?;
            Ok((trainable, policy))
        };
        let (trainable, policy) = shapes_ok().map_err(|e| refuse(e.to_string()))?;
        // a fresh model with the same configuration defines the expected shapes
        let reference = Model::new(cfg, vocab, 0)?;
        if reference.store.len() != store.len() {
            return Err(refuse(format!(
                "checkpoint holds {} tensors, the configuration defines {}",
                store.len(),
                reference.store.len()
            )));
        }
        for p in reference.store.iter() {
            let got = store.by_name(&p.name).map(|q| q.value.shape().to_vec());
            if got.as_deref() != Some(p.value.shape()) {
                return Err(refuse(format!("parameter `{}` has shape {:?}, expected {:?}", p.name, got, p.value.shape())));
            }
        }
        let model = Model {
            config: cfg.clone(),
            store,
            policy,
            encoder: Encoder { trainable, mode: EncoderMode::Trainable },
        };
        if let Some(fp) = ckpt.metadata.get(META_FINGERPRINT) {
            if *fp != hex(&model.fingerprint()) {
                return Err(refuse("encoder fingerprint does not match the stored vocabulary".into()));
            }
        }
        Ok(model)
    }
}

/// The architecture a checkpoint was trained with.
pub fn stored_model_config(ckpt: &Checkpoint) -> Result<ModelConfig> {
    let text = ckpt
        .metadata
        .get(META_MODEL)
        .ok_or_else(|| Error::Checkpoint(CheckpointError::Mismatch("missing model configuration".into())))?;
    let cfg = Config::parse(text).map_err(|e| Error::Checkpoint(CheckpointError::Mismatch(e.to_string())))?;
    Ok(cfg.model)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
