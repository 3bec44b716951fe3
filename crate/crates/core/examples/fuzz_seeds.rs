//! Write seed inputs for the fuzz targets.
//!
//! Usage: `cargo run -p hrlt-core --example fuzz_seeds -- [fuzz/corpus]`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hrlt_core::data::{generate_synthetic_corpus, write_aste, write_jsonl, write_pos_sidecar, SyntheticOptions};
use hrlt_core::encoder::{cache_key, EncodingCache, QueryKind, SentenceEncoding};
use hrlt_core::model::build_vocab;
use hrlt_core::{Config, Model, ModelConfig, SentimentLabel};

const APPETIZERS: &str = "Appetizers are excellent ; you can make a great ( but slightly expensive ) meal out of them .####[([0], [2], 'POS'), ([14], [8], 'POS'), ([14], [11, 12], 'NEG')]";

fn write(dir: &Path, target: &str, seeds: &[Vec<u8>]) -> std::io::Result<()> {
    let d = dir.join(target);
    std::fs::create_dir_all(&d)?;
    for (i, s) in seeds.iter().enumerate() {
        std::fs::write(d.join(format!("seed-{i}")), s)?;
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fuzz/corpus"));
    let corpus = generate_synthetic_corpus(3, &SyntheticOptions { n_sentences: 4, ..SyntheticOptions::default() });

    let mut lines: Vec<Vec<u8>> = write_aste(&corpus).lines().map(|l| l.as_bytes().to_vec()).collect();
    lines.push(APPETIZERS.as_bytes().to_vec());
    lines.push(b"nothing here####[]".to_vec());
    write(&dir, "aste_line", &lines)?;

    write(&dir, "jsonl", &[write_jsonl(&corpus).into_bytes(), br#"{"id":"x","tokens":["ok"]}"#.to_vec()])?;

    let tags: Vec<_> = corpus.iter().map(|s| s.pos_tags().to_vec()).collect();
    write(&dir, "pos_sidecar", &[write_pos_sidecar(&tags).into_bytes()])?;

    let mut small = Config::default();
    small.set("model.d_h", "8")?;
    small.set("train.baseline", "none")?;
    write(&dir, "config", &[Config::default().to_text().into_bytes(), small.to_text().into_bytes()])?;

    let mut cache = EncodingCache::new(2, [7; 32]);
    let enc = |n: usize| SentenceEncoding { token_vectors: vec![vec![0.5, -1.0]; n], summary_vector: vec![0.25, 2.0] };
    cache.insert(cache_key("1", &QueryKind::HighLevel), enc(3))?;
    let anchor = QueryKind::OpinionFor { sentiment: SentimentLabel::Positive, anchor: 1 };
    cache.insert(cache_key("1", &anchor), enc(3))?;
    write(&dir, "cache", &[cache.to_bytes(), EncodingCache::new(4, [0; 32]).to_bytes()])?;

    let cfg = ModelConfig { d_h: 4, d_s: 3, d_emb: 2, d_pos: 2, d_word: 2, ..ModelConfig::default() };
    let model = Model::new(&cfg, build_vocab(&corpus[..1], true), 1)?;
    let extra = BTreeMap::from([("phase".to_string(), "init".to_string())]);
    write(&dir, "checkpoint", &[model.to_checkpoint(1, [3; 32], &extra).to_bytes()])?;

    write(&dir, "bio_decode", &[vec![2, 0, 1, 1, 2], vec![0, 1, 0], vec![]])?;
    println!("seeds written under {}", dir.display());
    Ok(())
}
