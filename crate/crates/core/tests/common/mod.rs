#![allow(dead_code)]

pub mod gradcheck;

use hrlt_core::env::ScriptedActions;
use hrlt_core::model::build_vocab;
use hrlt_core::numerics::ParamStore;
use hrlt_core::{BioTag, Model, ModelConfig, Sentence, SentimentLabel, Span, Triplet, Upos};
use rand::Rng;

pub use hrlt_core::{seeded_rng, SeededRng};

pub const WORDS: &[&str] = &["the", "food", "was", "great", "but", "service", "slow", "and", "pizza", "cold", ",", "."];

pub fn tiny_config() -> ModelConfig {
    ModelConfig { d_h: 6, d_s: 5, d_emb: 3, d_pos: 2, d_word: 4, ..ModelConfig::default() }
}

pub fn random_span(rng: &mut SeededRng, len: usize) -> Span {
    let start = rng.gen_range(0..len);
    let end = rng.gen_range(start..len.min(start + 3));
    Span::new(start, end).unwrap()
}

pub fn random_polarity(rng: &mut SeededRng) -> SentimentLabel {
    SentimentLabel::POLARITIES[rng.gen_range(0..3)]
}

/// Random tokens, POS tags and up to `max_gold` gold triplets (possibly repeated).
pub fn random_sentence(rng: &mut SeededRng, id: &str, max_len: usize, max_gold: usize) -> Sentence {
    let len = rng.gen_range(1..=max_len);
    let tokens: Vec<String> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect();
    let pos: Vec<Upos> = (0..len).map(|_| Upos::ALL[rng.gen_range(0..Upos::ALL.len())]).collect();
    let n = rng.gen_range(0..=max_gold.min(len));
    let gold = (0..n)
        .map(|_| Triplet::new(random_span(rng, len), random_span(rng, len), random_polarity(rng)).unwrap())
        .collect();
    Sentence::new(id, tokens, pos, gold).unwrap()
}

pub fn random_tags(rng: &mut SeededRng, len: usize) -> Vec<BioTag> {
    (0..len).map(|_| BioTag::from_index(rng.gen_range(0..3)).unwrap()).collect()
}

pub fn random_script(rng: &mut SeededRng, len: usize, launch_rate: f64) -> ScriptedActions {
    let options: Vec<SentimentLabel> = (0..len)
        .map(|_| if rng.gen_bool(launch_rate) { random_polarity(rng) } else { SentimentLabel::None })
        .collect();
    let launches = options.iter().filter(|o| o.is_polarity()).count();
    let tags = (0..2 * launches).map(|_| random_tags(rng, len)).collect();
    ScriptedActions { options, tags }
}

pub fn model_for(cfg: &ModelConfig, sentences: &[&Sentence], seed: u64) -> Model {
    Model::new(cfg, build_vocab(sentences.iter().copied(), cfg.lowercase), seed).unwrap()
}

/// Add `scale · direction` to every parameter value.
pub fn shift(store: &mut ParamStore, direction: &[Vec<f64>], scale: f64) {
    for (p, d) in store.iter_mut().zip(direction) {
        p.value.data_mut().iter_mut().zip(d).for_each(|(v, d)| *v += scale * d);
    }
}

/// Unit-norm random direction over every parameter scalar.
pub fn random_direction(store: &ParamStore, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let mut d: Vec<Vec<f64>> = store.iter().map(|p| (0..p.value.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let norm = d.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    d.iter_mut().flatten().for_each(|x| *x /= norm);
    d
}

pub fn grad_dot(store: &ParamStore, direction: &[Vec<f64>]) -> f64 {
    store.iter().zip(direction).map(|(p, d)| p.grad.data().iter().zip(d).map(|(g, d)| g * d).sum::<f64>()).sum()
}

/// Symmetric relative error with a small absolute floor.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}
