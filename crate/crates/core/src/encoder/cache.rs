//! Precomputed encoding cache.
//!
//! ```text
//! header: magic "HRLE" | version u32 | dim u32 | count u64 | fingerprint [u8; 32]
//! record: key_len u32 | key (UTF-8, "sentence_id|kind|sentiment|anchor")
//!         | J u32 | (J + 1) × dim f32   (token vectors, then the summary)
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::path::Path;

use super::{EncoderError, QueryKind, SentenceEncoding};
use crate::binio::{Reader, Writer};

pub const CACHE_MAGIC: &[u8; 4] = b"HRLE";
pub const CACHE_VERSION: u32 = 1;

pub fn cache_key(sentence_id: &str, query: &QueryKind) -> String {
    format!("{sentence_id}|{}", query.canonical())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingCache {
    dim: usize,
    fingerprint: [u8; 32],
    records: Vec<(String, SentenceEncoding)>,
    index: HashMap<String, usize>,
}

impl EncodingCache {
    pub fn new(dim: usize, fingerprint: [u8; 32]) -> Self {
        EncodingCache { dim, fingerprint, records: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(k, _)| k.as_str())
    }

    pub fn insert(&mut self, key: String, encoding: SentenceEncoding) -> Result<(), EncoderError> {
        if encoding.dim() != self.dim {
            return Err(EncoderError::Dim(format!(
                "record `{key}` has width {}, cache declares {}",
                encoding.dim(),
                self.dim
            )));
        }
        if self.index.contains_key(&key) {
            return Err(EncoderError::Dim(format!("duplicate cache key `{key}`")));
        }
        self.index.insert(key.clone(), self.records.len());
        self.records.push((key, encoding));
        Ok(())
    }

    pub fn get_key(&self, key: &str) -> Option<&SentenceEncoding> {
        self.index.get(key).map(|&i| &self.records[i].1)
    }

    pub fn get(&self, sentence_id: &str, query: &QueryKind) -> Option<&SentenceEncoding> {
        self.get_key(&cache_key(sentence_id, query))
    }

    pub fn lookup(&self, sentence_id: &str, query: &QueryKind) -> Result<&SentenceEncoding, EncoderError> {
        let key = cache_key(sentence_id, query);
        self.get_key(&key).ok_or(EncoderError::MissingEncoding(key))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CACHE_MAGIC);
        w.u32(CACHE_VERSION);
        w.u32(self.dim as u32);
        w.u64(self.records.len() as u64);
        w.bytes(&self.fingerprint);
        for (key, enc) in &self.records {
            w.string(key);
            w.u32(enc.token_vectors.len() as u32);
            for v in enc.token_vectors.iter().chain(std::iter::once(&enc.summary_vector)) {
                let v32: Vec<f32> = v.iter().map(|&x| x as f32).collect();
                w.f32s(&v32);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != CACHE_MAGIC {
            return Err(r.error("bad magic").into());
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(r.error(format!("unsupported cache version {version}")).into());
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(r.error("cache dimension is zero").into());
        }
        // each record takes at least 8 bytes of lengths
        let count = r.count(8)?;
        let fingerprint = r.array::<32>()?;
        let mut cache = EncodingCache::new(dim, fingerprint);
        for _ in 0..count {
            let key = r.string()?;
            let at = r.offset();
            let j = r.u32()? as usize;
            if j == 0 {
                return Err(r.error(format!("record `{key}` has no tokens")).into());
            }
            let n = (j + 1).checked_mul(dim).filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()));
            let Some(n) = n else {
                return Err(crate::DecodeError { offset: at, message: format!("record `{key}` is truncated") }.into());
            };
            let values = r.f32s(n)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(r.error(format!("record `{key}` holds non-finite values")).into());
            }
            let mut vectors: Vec<Vec<f64>> =
                values.chunks_exact(dim).map(|c| c.iter().map(|&x| x as f64).collect()).collect();
            let summary_vector = vectors.pop().expect("j + 1 ≥ 2 vectors");
            if cache.index.contains_key(&key) {
                return Err(r.error(format!("duplicate key `{key}`")).into());
            }
            cache.insert(key, SentenceEncoding { token_vectors: vectors, summary_vector })?;
        }
        if r.remaining() != 0 {
            return Err(r.error("trailing bytes after the last record").into());
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| EncoderError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let bytes = std::fs::read(path).map_err(|e| EncoderError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub fn load_cache(path: &Path) -> Result<EncodingCache, EncoderError> {
    EncodingCache::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SentimentLabel;

    fn enc(j: usize, dim: usize, base: f32) -> SentenceEncoding {
        let v = |k: usize| (0..dim).map(|d| (base + k as f32 * 0.5 + d as f32 * 0.25) as f64).collect();
        SentenceEncoding { token_vectors: (0..j).map(v).collect(), summary_vector: v(99) }
    }

    fn scripted_export() -> EncodingCache {
        // 2 sentences × 3 query kinds
        let mut c = EncodingCache::new(3, [9; 32]);
        for (sid, j) in [("s1", 4), ("s2", 2)] {
            let queries = [
                QueryKind::HighLevel,
                QueryKind::OpinionFor { sentiment: SentimentLabel::Positive, anchor: 1 },
                QueryKind::AspectFor { sentiment: SentimentLabel::Positive, anchor: 1 },
            ];
            for (i, q) in queries.iter().enumerate() {
                c.insert(cache_key(sid, q), enc(j, 3, i as f32)).unwrap();
            }
        }
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = scripted_export();
        let bytes = c.to_bytes();
        let back = EncodingCache::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.len(), 6);
        for key in c.keys() {
            assert!(back.get_key(key).is_some());
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = scripted_export().to_bytes();
        for cut in [2, 20, 52, bytes.len() / 2, bytes.len() - 1] {
            assert!(EncodingCache::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn wrong_width_rejected() {
        let mut c = EncodingCache::new(3, [0; 32]);
        assert!(c.insert("a|high|none|-".into(), enc(2, 4, 0.0)).is_err());
    }

    #[test]
    fn miss_names_the_key() {
        let c = scripted_export();
        let err = c.lookup("s9", &QueryKind::HighLevel).unwrap_err();
        assert_eq!(err.to_string(), "no cached encoding for key `s9|high|none|-`");
    }
}
