//! Train on the synthetic corpus and print per-epoch dev scores.
//!
//! `cargo run --release -p hrlt-core --example synthetic -- [pretrain_epochs] [finetune_epochs] [seed]`

use std::time::Instant;

use hrlt_core::data::{generate_synthetic_corpus, SyntheticOptions};
use hrlt_core::env::EpisodeSettings;
use hrlt_core::eval::{decode_corpus, partitioned_report, results_from};
use hrlt_core::model::build_vocab;
use hrlt_core::trainer::{train, FinetuneMode, TrainOptions};
use hrlt_core::{Model, ModelConfig, TrainConfig};

fn main() -> hrlt_core::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let seed = arg(2, 1) as u64;
    let corpus = generate_synthetic_corpus(seed, &SyntheticOptions { n_sentences: 600, ..SyntheticOptions::default() });
    let (train_set, dev) = corpus.split_at(500);
    let mcfg = ModelConfig { d_h: 64, d_s: 64, d_emb: 32, d_word: 32, d_pos: 25, ..ModelConfig::default() };
    let tcfg = TrainConfig {
        seed,
        pretrain_epochs: arg(0, 40),
        finetune_epochs: arg(1, 15),
        pretrain_lr: 1e-3,
        finetune_lr: 1e-4,
        dropout: 0.1,
        ..TrainConfig::default()
    };
    let model = Model::new(&mcfg, build_vocab(train_set, true), seed)?;
    let started = Instant::now();
    let report = train(model, train_set, dev, &tcfg, FinetuneMode::Reinforce, TrainOptions::default(), |e| {
        println!("{}  [{:.0}s]", e.row.to_csv(), started.elapsed().as_secs_f64());
        Ok(())
    })?;
    let traces = decode_corpus(&report.best, dev, EpisodeSettings::from_config(&tcfg, false), 1)?;
    print!("{}", partitioned_report(&results_from(dev, &traces)).to_text());
    Ok(())
}
