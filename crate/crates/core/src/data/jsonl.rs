//! Canonical JSON-lines corpus format.
//!
//! ```text
//! {"id":"7","tokens":["The","food","is","great"],"pos":["DET","NOUN","AUX","ADJ"],
//!  "triplets":[{"aspect":[1,1],"opinion":[3,3],"sentiment":"positive"}]}
//! ```
//!
//! `pos` is optional on input. Unknown keys are ignored so prediction output
//! (which adds `options`) reads back as a corpus.

use serde::{Deserialize, Serialize};

use crate::domain::{Sentence, SentimentLabel, Span, Triplet, Upos};

use super::pos::PosProvider;
use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub aspect: Span,
    pub opinion: Span,
    pub sentiment: SentimentLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionRecord {
    pub position: usize,
    pub sentiment: SentimentLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
    #[serde(default)]
    pub triplets: Vec<TripletRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<OptionRecord>>,
}

impl SentenceRecord {
    pub fn from_sentence(s: &Sentence) -> Self {
        Self::with_triplets(s, s.gold())
    }

    /// A record for `s` carrying `triplets` in place of its gold set.
    pub fn with_triplets(s: &Sentence, triplets: &[Triplet]) -> Self {
        SentenceRecord {
            id: s.id().to_string(),
            tokens: s.tokens().to_vec(),
            pos: Some(s.pos_tags().iter().map(|t| t.name().to_string()).collect()),
            triplets: triplets
                .iter()
                .map(|t| TripletRecord { aspect: t.aspect, opinion: t.opinion, sentiment: t.sentiment })
                .collect(),
            options: None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialise")
    }
}

fn parse_record(line: &str, index: usize, pos: &PosProvider) -> Result<Sentence, String> {
    let rec: SentenceRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let tags = match &rec.pos {
        Some(names) => names.iter().map(|n| Upos::from_name(n)).collect(),
        None => pos.tags_for(index, &rec.tokens)?,
    };
    let gold = rec
        .triplets
        .iter()
        .map(|t| Triplet::new(t.aspect, t.opinion, t.sentiment))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Sentence::new(rec.id, rec.tokens, tags, gold).map_err(|e| e.to_string())
}

pub fn parse_jsonl(text: &str, source: &str, pos: &PosProvider) -> Result<Vec<Sentence>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s = parse_record(line, out.len(), pos).map_err(|message| DataError::Parse {
            source_name: source.to_string(),
            line: i + 1,
            message,
        })?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_jsonl(sentences: &[Sentence]) -> String {
    sentences.iter().map(|s| SentenceRecord::from_sentence(s).to_line() + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_schema() {
        let text = r#"{"id":"7","tokens":["The","food","is","great"],"pos":["DET","NOUN","AUX","ADJ"],"triplets":[{"aspect":[1,1],"opinion":[3,3],"sentiment":"positive"}]}"#;
        let s = parse_jsonl(text, "x", &PosProvider::Heuristic).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(write_jsonl(&s), format!("{text}\n"));
    }

    #[test]
    fn missing_pos_uses_provider_and_extra_keys_are_ignored() {
        let text = r#"{"id":"a","tokens":["great"],"triplets":[],"options":[{"position":0,"sentiment":"none"}]}"#;
        let s = parse_jsonl(text, "x", &PosProvider::Heuristic).unwrap();
        assert_eq!(s[0].pos_tags(), &[Upos::ADJ]);
    }

    #[test]
    fn invalid_records_are_located() {
        for bad in [
            r#"{"id":"a","tokens":[],"triplets":[]}"#,
            r#"{"id":"a","tokens":["x"],"triplets":[{"aspect":[0,3],"opinion":[0,0],"sentiment":"positive"}]}"#,
            r#"{"id":"a","tokens":["x"],"triplets":[{"aspect":[0,0],"opinion":[0,0],"sentiment":"none"}]}"#,
            r#"{"id":"a","tokens":["x"],"triplets":[{"aspect":[1,0],"opinion":[0,0],"sentiment":"positive"}]}"#,
            r#"{"id":"a""#,
        ] {
            let err = parse_jsonl(&format!("\n{bad}"), "c.jsonl", &PosProvider::Heuristic).unwrap_err();
            assert!(err.to_string().starts_with("c.jsonl:2:"), "{err}");
        }
    }
}
