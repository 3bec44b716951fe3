//! Contextual token vectors for the three query kinds.
//!
//! The built-in encoder adds a word embedding, a query-kind embedding, a
//! sentiment embedding (low-level kinds) and an is-anchor flag embedding per
//! token, runs a left-to-right and a right-to-left tanh recurrence over the
//! sums and concatenates both directions. The summary vector is an affine map
//! of the mean token vector. Alternatively encodings come from a precomputed
//! [`EncodingCache`] and enter the tape as constants.

mod cache;
mod vocab;

use std::sync::Arc;

pub use cache::{cache_key, load_cache, EncodingCache, CACHE_MAGIC, CACHE_VERSION};
pub use vocab::Vocab;

use thiserror::Error;

use crate::config::ModelConfig;
use crate::domain::{Sentence, SentimentLabel};
use crate::numerics::{uniform, xavier_uniform, NumericError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::{DecodeError, SeededRng};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("no cached encoding for key `{0}`")]
    MissingEncoding(String),
    #[error("invalid encoding cache: {0}")]
    Decode(#[from] DecodeError),
    #[error("encoding dimension error: {0}")]
    Dim(String),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("cache I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    HighLevel,
    OpinionFor { sentiment: SentimentLabel, anchor: usize },
    AspectFor { sentiment: SentimentLabel, anchor: usize },
}

impl QueryKind {
    pub fn index(&self) -> usize {
        match self {
            QueryKind::HighLevel => 0,
            QueryKind::OpinionFor { .. } => 1,
            QueryKind::AspectFor { .. } => 2,
        }
    }

    /// `kind|sentiment|anchor`, e.g. `high|none|-` or `opinion|positive|3`.
    pub fn canonical(&self) -> String {
        match *self {
            QueryKind::HighLevel => "high|none|-".to_string(),
            QueryKind::OpinionFor { sentiment, anchor } => format!("opinion|{sentiment}|{anchor}"),
            QueryKind::AspectFor { sentiment, anchor } => format!("aspect|{sentiment}|{anchor}"),
        }
    }

    fn low_level(&self) -> Option<(SentimentLabel, usize)> {
        match *self {
            QueryKind::HighLevel => None,
            QueryKind::OpinionFor { sentiment, anchor } | QueryKind::AspectFor { sentiment, anchor } => {
                Some((sentiment, anchor))
            }
        }
    }

    pub fn validate(&self, len: usize) -> Result<(), EncoderError> {
        if let Some((sentiment, anchor)) = self.low_level() {
            if !sentiment.is_polarity() {
                return Err(EncoderError::Query("low-level query needs a polarity".into()));
            }
            if anchor >= len {
                return Err(EncoderError::Query(format!("anchor {anchor} outside a {len}-token sentence")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEncoding {
    pub token_vectors: Vec<Vec<f64>>,
    pub summary_vector: Vec<f64>,
}

impl SentenceEncoding {
    pub fn dim(&self) -> usize {
        self.summary_vector.len()
    }

    pub fn is_consistent(&self) -> bool {
        let d = self.dim();
        self.token_vectors.iter().all(|v| v.len() == d)
            && self.token_vectors.iter().chain([&self.summary_vector]).flatten().all(|x| x.is_finite())
    }
}

/// Encoding recorded on a tape.
#[derive(Debug, Clone)]
pub struct EncodedVars {
    pub tokens: Vec<Var>,
    pub summary: Var,
}

#[derive(Debug, Clone, Copy)]
struct Recurrence {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
pub struct TrainableEncoder {
    vocab: Vocab,
    lowercase: bool,
    d_h: usize,
    word: ParamId,
    query_kind: ParamId,
    sentiment: ParamId,
    anchor: ParamId,
    fwd: Recurrence,
    bwd: Recurrence,
    summary_w: ParamId,
    summary_b: ParamId,
}

impl TrainableEncoder {
    pub fn build(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        vocab: Vocab,
        rng: &mut SeededRng,
    ) -> Result<Self, NumericError> {
        let (dw, half) = (cfg.d_word, cfg.d_h / 2);
        let rec = |store: &mut ParamStore, dir: &str, rng: &mut SeededRng| -> Result<Recurrence, NumericError> {
            Ok(Recurrence {
                wx: store.add(&format!("encoder.{dir}.wx"), xavier_uniform(half, dw, rng))?,
                wh: store.add(&format!("encoder.{dir}.wh"), xavier_uniform(half, half, rng))?,
                b: store.add(&format!("encoder.{dir}.b"), Tensor::zeros(&[half]))?,
            })
        };
        let word = store.add("encoder.word", uniform(&[vocab.len(), dw], 0.1, rng))?;
        let query_kind = store.add("encoder.query_kind", uniform(&[3, dw], 0.1, rng))?;
        let sentiment = store.add("encoder.sentiment", uniform(&[4, dw], 0.1, rng))?;
        let anchor = store.add("encoder.anchor", uniform(&[2, dw], 0.1, rng))?;
        let fwd = rec(store, "fwd", rng)?;
        let bwd = rec(store, "bwd", rng)?;
        let summary_w = store.add("encoder.summary.w", xavier_uniform(cfg.d_h, cfg.d_h, rng))?;
        let summary_b = store.add("encoder.summary.b", Tensor::zeros(&[cfg.d_h]))?;
        Ok(TrainableEncoder {
            vocab,
            lowercase: cfg.lowercase,
            d_h: cfg.d_h,
            word,
            query_kind,
            sentiment,
            anchor,
            fwd,
            bwd,
            summary_w,
            summary_b,
        })
    }

    /// Re-attach to parameters already present in `store` (e.g. from a checkpoint).
    pub fn attach(store: &ParamStore, cfg: &ModelConfig, vocab: Vocab) -> Result<Self, NumericError> {
        let get = |name: &str| {
            store.id(name).ok_or_else(|| NumericError::Usage(format!("checkpoint lacks parameter `{name}`")))
        };
        let rec = |dir: &str| -> Result<Recurrence, NumericError> {
            Ok(Recurrence {
                wx: get(&format!("encoder.{dir}.wx"))?,
                wh: get(&format!("encoder.{dir}.wh"))?,
                b: get(&format!("encoder.{dir}.b"))?,
            })
        };
        let enc = TrainableEncoder {
            word: get("encoder.word")?,
            query_kind: get("encoder.query_kind")?,
            sentiment: get("encoder.sentiment")?,
            anchor: get("encoder.anchor")?,
            fwd: rec("fwd")?,
            bwd: rec("bwd")?,
            summary_w: get("encoder.summary.w")?,
            summary_b: get("encoder.summary.b")?,
            lowercase: cfg.lowercase,
            d_h: cfg.d_h,
            vocab,
        };
        let rows = store.get(enc.word).value.rows();
        if rows != enc.vocab.len() {
            return Err(NumericError::Shape(format!(
                "word table has {rows} rows but the vocabulary has {} entries",
                enc.vocab.len()
            )));
        }
        Ok(enc)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.d_h
    }

    pub fn encode_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        sentence: &Sentence,
        query: &QueryKind,
    ) -> Result<EncodedVars, EncoderError> {
        query.validate(sentence.len())?;
        let low = query.low_level();
        let mut inputs = Vec::with_capacity(sentence.len());
        let kind = tape.embedding(store, self.query_kind, query.index())?;
        let sent = match low {
            Some((s, _)) => Some(tape.embedding(store, self.sentiment, s.index())?),
            None => None,
        };
        for (t, tok) in sentence.tokens().iter().enumerate() {
            let w = tape.embedding(store, self.word, self.vocab.lookup(tok, self.lowercase))?;
            let mut parts = vec![w, kind];
            if let Some((_, anchor)) = low {
                parts.push(sent.expect("low-level query has a sentiment"));
                parts.push(tape.embedding(store, self.anchor, usize::from(t == anchor))?);
            }
            inputs.push(tape.add(&parts)?);
        }
        let fwd = self.run(tape, store, self.fwd, inputs.iter().copied())?;
        let mut bwd = self.run(tape, store, self.bwd, inputs.iter().rev().copied())?;
        bwd.reverse();
        let tokens = fwd
            .into_iter()
            .zip(bwd)
            .map(|(f, b)| tape.concat(&[f, b]))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = tape.mean(&tokens)?;
        let summary = tape.linear(store, self.summary_w, mean, Some(self.summary_b))?;
        Ok(EncodedVars { tokens, summary })
    }

    fn run(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        rec: Recurrence,
        inputs: impl Iterator<Item = Var>,
    ) -> Result<Vec<Var>, NumericError> {
        let mut out = Vec::new();
        let mut prev: Option<Var> = None;
        for x in inputs {
            let zx = tape.linear(store, rec.wx, x, Some(rec.b))?;
            let z = match prev {
                Some(h) => {
                    let zh = tape.linear(store, rec.wh, h, None)?;
                    tape.add(&[zx, zh])?
                }
                None => zx,
            };
            let h = tape.tanh(z);
            out.push(h);
            prev = Some(h);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub enum EncoderMode {
    Trainable,
    Precomputed { cache: Arc<EncodingCache>, fallback: bool },
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub trainable: TrainableEncoder,
    pub mode: EncoderMode,
}

impl Encoder {
    pub fn dim(&self) -> usize {
        self.trainable.dim()
    }

    pub fn encode_vars(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        sentence: &Sentence,
        query: &QueryKind,
    ) -> Result<EncodedVars, EncoderError> {
        match &self.mode {
            EncoderMode::Trainable => self.trainable.encode_vars(tape, store, sentence, query),
            EncoderMode::Precomputed { cache, fallback } => {
                query.validate(sentence.len())?;
                match cache.lookup(sentence.id(), query) {
                    Ok(enc) => {
                        if enc.token_vectors.len() != sentence.len() {
                            return Err(EncoderError::Dim(format!(
                                "cached encoding for `{}` has {} tokens, sentence has {}",
                                sentence.id(),
                                enc.token_vectors.len(),
                                sentence.len()
                            )));
                        }
                        let tokens = enc.token_vectors.iter().map(|v| tape.constant(v.clone())).collect();
                        let summary = tape.constant(enc.summary_vector.clone());
                        Ok(EncodedVars { tokens, summary })
                    }
                    Err(_) if *fallback => self.trainable.encode_vars(tape, store, sentence, query),
                    Err(e) => Err(e),
                }
            }
        }
    }

    pub fn encode(
        &self,
        store: &ParamStore,
        sentence: &Sentence,
        query: &QueryKind,
    ) -> Result<SentenceEncoding, EncoderError> {
        let mut tape = Tape::new();
        let vars = self.encode_vars(&mut tape, store, sentence, query)?;
        Ok(SentenceEncoding {
            token_vectors: vars.tokens.iter().map(|&v| tape.value(v).to_vec()).collect(),
            summary_vector: tape.value(vars.summary).to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Upos;
    use crate::seeded_rng;

    fn sentence(words: &[&str]) -> Sentence {
        Sentence::new(
            "s",
            words.iter().map(|w| w.to_string()).collect(),
            vec![Upos::NOUN; words.len()],
            vec![],
        )
        .unwrap()
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig { d_h: 6, d_word: 4, ..ModelConfig::default() }
    }

    fn build(words: &[&str]) -> (ParamStore, Encoder) {
        let mut store = ParamStore::new();
        let vocab = Vocab::from_tokens(words.iter().copied(), true);
        let enc = TrainableEncoder::build(&mut store, &small_cfg(), vocab, &mut seeded_rng(3)).unwrap();
        (store, Encoder { trainable: enc, mode: EncoderMode::Trainable })
    }

    #[test]
    fn zero_params_give_zero_vectors() {
        let (mut store, enc) = build(&["a", "b", "c"]);
        store.iter_mut().for_each(|p| p.value.fill(0.0));
        let out = enc.encode(&store, &sentence(&["a", "b", "c"]), &QueryKind::HighLevel).unwrap();
        assert!(out.token_vectors.iter().flatten().all(|&v| v == 0.0));
        assert!(out.summary_vector.iter().all(|&v| v == 0.0));
        assert_eq!(out.token_vectors.len(), 3);
        assert_eq!(out.dim(), 6);
    }

    #[test]
    fn swapping_tokens_changes_their_vectors() {
        let (store, enc) = build(&["a", "b", "c"]);
        let q = QueryKind::HighLevel;
        let x = enc.encode(&store, &sentence(&["a", "b", "c"]), &q).unwrap();
        let y = enc.encode(&store, &sentence(&["b", "a", "c"]), &q).unwrap();
        assert_ne!(x.token_vectors[0], y.token_vectors[0]);
        assert_ne!(x.token_vectors[1], y.token_vectors[1]);
        // a bag-of-words map would also give position 0 of y the vector of position 1 of x
        assert_ne!(x.token_vectors[1], y.token_vectors[0]);
    }

    #[test]
    fn query_kinds_differ_with_random_init() {
        let (store, enc) = build(&["a", "b"]);
        let s = sentence(&["a", "b"]);
        let hi = enc.encode(&store, &s, &QueryKind::HighLevel).unwrap();
        let op = enc
            .encode(&store, &s, &QueryKind::OpinionFor { sentiment: SentimentLabel::Positive, anchor: 1 })
            .unwrap();
        assert_ne!(hi, op);
    }

    #[test]
    fn invalid_queries_rejected() {
        let (store, enc) = build(&["a"]);
        let s = sentence(&["a"]);
        let bad = QueryKind::OpinionFor { sentiment: SentimentLabel::Positive, anchor: 1 };
        assert!(enc.encode(&store, &s, &bad).is_err());
        let none = QueryKind::AspectFor { sentiment: SentimentLabel::None, anchor: 0 };
        assert!(enc.encode(&store, &s, &none).is_err());
    }

    #[test]
    fn precomputed_mode_is_constant_lookup() {
        let (store, mut enc) = build(&["a", "b"]);
        let s = sentence(&["a", "b"]);
        let mut cache = EncodingCache::new(6, [0; 32]);
        let fixed = SentenceEncoding { token_vectors: vec![vec![0.5; 6], vec![-1.0; 6]], summary_vector: vec![2.0; 6] };
        cache.insert(cache_key("s", &QueryKind::HighLevel), fixed.clone()).unwrap();
        enc.mode = EncoderMode::Precomputed { cache: Arc::new(cache), fallback: false };
        let a = enc.encode(&store, &s, &QueryKind::HighLevel).unwrap();
        let b = enc.encode(&store, &s, &QueryKind::HighLevel).unwrap();
        assert_eq!(a, fixed);
        assert_eq!(a, b);
        let q = QueryKind::OpinionFor { sentiment: SentimentLabel::Negative, anchor: 0 };
        assert!(matches!(enc.encode(&store, &s, &q), Err(EncoderError::MissingEncoding(k)) if k == "s|opinion|negative|0"));
        if let EncoderMode::Precomputed { fallback, .. } = &mut enc.mode {
            *fallback = true;
        }
        assert!(enc.encode(&store, &s, &q).is_ok());
    }
}
