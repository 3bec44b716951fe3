use std::collections::HashMap;

pub const UNK: &str = "<unk>";

/// Word vocabulary; id 0 is the unknown word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Ids follow first occurrence order.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>, lowercase: bool) -> Self {
        let mut v = Vocab { words: vec![UNK.to_string()], index: HashMap::new() };
        v.index.insert(UNK.to_string(), 0);
        for t in tokens {
            let key = normalize(t, lowercase);
            if !v.index.contains_key(&key) {
                v.index.insert(key.clone(), v.words.len());
                v.words.push(key);
            }
        }
        v
    }

    pub fn lookup(&self, token: &str, lowercase: bool) -> usize {
        self.index.get(&normalize(token, lowercase)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// One word per line, `<unk>` first.
    pub fn to_text(&self) -> String {
        self.words.join("\n")
    }

    pub fn from_text(text: &str) -> Option<Self> {
        let words: Vec<String> = text.split('\n').map(str::to_string).collect();
        if words.first().map(String::as_str) != Some(UNK) {
            return None;
        }
        let index: HashMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        if index.len() != words.len() {
            return None;
        }
        Some(Vocab { words, index })
    }
}

fn normalize(t: &str, lowercase: bool) -> String {
    if lowercase {
        t.to_lowercase()
    } else {
        t.to_string()
    }
}
