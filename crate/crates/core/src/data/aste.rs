//! Hash-separated triplet files: `tokens####[([a, ...], [o, ...], 'POS'), ...]`.

use crate::domain::{Sentence, SentimentLabel, Span, Triplet};

use super::pos::PosProvider;
use super::DataError;

/// One parsed line before POS tags are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub line: usize,
    pub tokens: Vec<String>,
    pub triplets: Vec<Triplet>,
}

struct Cursor<'a> {
    s: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.at < self.s.len() && self.s[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.at).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        match self.peek() {
            Some(x) if x == c => {
                self.at += 1;
                Ok(())
            }
            Some(x) => Err(format!("expected `{}` at column {}, found `{}`", c as char, self.at + 1, x as char)),
            None => Err(format!("expected `{}`, found end of line", c as char)),
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<usize, String> {
        self.skip_ws();
        let start = self.at;
        while self.at < self.s.len() && self.s[self.at].is_ascii_digit() {
            self.at += 1;
        }
        if start == self.at {
            return Err(format!("expected a token index at column {}", start + 1));
        }
        std::str::from_utf8(&self.s[start..self.at])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| format!("token index at column {} is too large", start + 1))
    }

    fn index_list(&mut self) -> Result<Vec<usize>, String> {
        self.expect(b'[')?;
        let mut out = Vec::new();
        if self.eat(b']') {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if self.eat(b']') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn quoted(&mut self) -> Result<&'a str, String> {
        let q = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(format!("expected a quoted polarity at column {}", self.at + 1)),
        };
        self.at += 1;
        let start = self.at;
        while self.at < self.s.len() && self.s[self.at] != q {
            self.at += 1;
        }
        if self.at == self.s.len() {
            return Err("unterminated polarity string".into());
        }
        let v = std::str::from_utf8(&self.s[start..self.at]).map_err(|_| "polarity is not UTF-8".to_string())?;
        self.at += 1;
        Ok(v)
    }
}

fn span_of(indices: &[usize], len: usize, what: &str) -> Result<Span, String> {
    let (&first, &last) = match (indices.first(), indices.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(format!("{what} index list is empty")),
    };
    for w in indices.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(format!("{what} indices {indices:?} are not a contiguous increasing run"));
        }
    }
    if last >= len {
        return Err(format!("{what} index {last} is outside a {len}-token sentence"));
    }
    Span::new(first, last).map_err(|e| e.to_string())
}

pub fn polarity_from_code(code: &str) -> Option<SentimentLabel> {
    match code {
        "POS" => Some(SentimentLabel::Positive),
        "NEG" => Some(SentimentLabel::Negative),
        "NEU" => Some(SentimentLabel::Neutral),
        _ => None,
    }
}

pub fn polarity_code(s: SentimentLabel) -> &'static str {
    match s {
        SentimentLabel::Positive => "POS",
        SentimentLabel::Negative => "NEG",
        SentimentLabel::Neutral => "NEU",
        SentimentLabel::None => "NONE",
    }
}

/// Parse the body of one line (1-based `line` is used for errors only).
pub fn parse_line(text: &str, line: usize) -> Result<RawRecord, String> {
    let (sentence, labels) = text.rsplit_once("####").ok_or("missing `####` separator")?;
    let tokens: Vec<String> = sentence.split_whitespace().map(String::from).collect();
    if tokens.is_empty() {
        return Err("sentence has no tokens".into());
    }
    let mut c = Cursor { s: labels.as_bytes(), at: 0 };
    let mut triplets = Vec::new();
    c.expect(b'[')?;
    if !c.eat(b']') {
        loop {
            c.expect(b'(')?;
            let aspect = c.index_list()?;
            c.expect(b',')?;
            let opinion = c.index_list()?;
            c.expect(b',')?;
            let code = c.quoted()?;
            c.expect(b')')?;
            let sentiment = polarity_from_code(code).ok_or_else(|| format!("unknown polarity code `{code}`"))?;
            let aspect = span_of(&aspect, tokens.len(), "aspect")?;
            let opinion = span_of(&opinion, tokens.len(), "opinion")?;
            triplets.push(Triplet { aspect, opinion, sentiment });
            if c.eat(b']') {
                break;
            }
            c.expect(b',')?;
        }
    }
    if c.peek().is_some() {
        return Err(format!("unexpected text after the triplet list at column {}", c.at + 1));
    }
    Ok(RawRecord { line, tokens, triplets })
}

/// Parse a whole file. Blank lines are skipped; line numbers stay 1-based.
pub fn parse_aste_records(text: &str, source: &str) -> Result<Vec<RawRecord>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_line(l.trim_end_matches('\r'), i + 1).map_err(|message| DataError::Parse {
                source_name: source.to_string(),
                line: i + 1,
                message,
            })
        })
        .collect()
}

/// Parse a file into sentences whose ids are their line numbers.
pub fn parse_aste(text: &str, source: &str, pos: &PosProvider) -> Result<Vec<Sentence>, DataError> {
    let records = parse_aste_records(text, source)?;
    records
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let tags = pos.tags_for(k, &r.tokens).map_err(|message| DataError::Parse {
                source_name: source.to_string(),
                line: r.line,
                message,
            })?;
            Sentence::new(r.line.to_string(), r.tokens, tags, r.triplets).map_err(|e| DataError::Parse {
                source_name: source.to_string(),
                line: r.line,
                message: e.to_string(),
            })
        })
        .collect()
}

fn index_run(span: Span) -> String {
    let items: Vec<String> = (span.start()..=span.end()).map(|i| i.to_string()).collect();
    format!("[{}]", items.join(", "))
}

/// Serialise one sentence the way the published files print their Python lists.
pub fn format_line(tokens: &[String], triplets: &[Triplet]) -> String {
    let items: Vec<String> = triplets
        .iter()
        .map(|t| format!("({}, {}, '{}')", index_run(t.aspect), index_run(t.opinion), polarity_code(t.sentiment)))
        .collect();
    format!("{}####[{}]", tokens.join(" "), items.join(", "))
}

pub fn write_aste(sentences: &[Sentence]) -> String {
    sentences.iter().map(|s| format_line(s.tokens(), s.gold()) + "\n").collect()
}
