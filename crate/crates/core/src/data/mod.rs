//! Corpus ingestion, POS tags and the synthetic corpus.

mod aste;
mod jsonl;
mod pos;
mod synthetic;

use std::path::Path;

pub use aste::{format_line, parse_aste, parse_aste_records, parse_line, polarity_code, polarity_from_code, write_aste, RawRecord};
pub use jsonl::{parse_jsonl, write_jsonl, OptionRecord, SentenceRecord, TripletRecord};
pub use pos::{heuristic_pos, parse_pos_sidecar, write_pos_sidecar, PosProvider};
pub use synthetic::{generate_synthetic_corpus, synthetic_vocabulary, SyntheticOptions};

use crate::domain::Sentence;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"))
}

/// Read a corpus file: `.jsonl`/`.json` in the canonical format, anything
/// else as hash-separated lines.
pub fn parse_corpus(path: &Path, pos: &PosProvider) -> Result<Vec<Sentence>, DataError> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    if is_jsonl(path) {
        parse_jsonl(&text, &name, pos)
    } else {
        parse_aste(&text, &name, pos)
    }
}

/// POS provider for a corpus: its `.pos` sidecar when one sits next to it.
pub fn pos_provider_for(path: &Path) -> Result<PosProvider, DataError> {
    let sidecar = path.with_extension("pos");
    if sidecar.is_file() {
        Ok(PosProvider::Sidecar(parse_pos_sidecar(&read_text(&sidecar)?)))
    } else {
        Ok(PosProvider::Heuristic)
    }
}

/// [`parse_corpus`] with the provider chosen by [`pos_provider_for`].
pub fn load_corpus(path: &Path) -> Result<Vec<Sentence>, DataError> {
    parse_corpus(path, &pos_provider_for(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_names_the_path() {
        let err = load_corpus(Path::new("/definitely/not/here.txt")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.txt"));
    }

    #[test]
    fn sidecar_is_picked_up() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.txt");
        std::fs::write(&corpus, "a b####[([0], [1], 'POS')]\n").unwrap();
        std::fs::write(dir.path().join("c.pos"), "PROPN VERB\n").unwrap();
        let s = load_corpus(&corpus).unwrap();
        assert_eq!(s[0].pos_tags(), &[crate::Upos::PROPN, crate::Upos::VERB]);
    }
}
