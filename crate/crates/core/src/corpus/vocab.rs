use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::CorpusError;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const START: usize = 2;
pub const STOP: usize = 3;
pub const RESERVED: [&str; 4] = ["[PAD]", "[UNK]", "[START]", "[STOP]"];

/// Fixed token vocabulary. Ids `0..4` are the reserved markers; the rest are
/// dense and map one-to-one onto tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `max_size - 4` most frequent tokens, ties broken lexicographically.
    pub fn build<I, S, T>(streams: I, max_size: usize) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        if max_size <= RESERVED.len() {
            return Err(CorpusError::InvalidArgument(format!(
                "vocabulary size must exceed {}, got {max_size}",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for stream in streams {
            for tok in stream {
                let tok = tok.as_ref();
                if !RESERVED.contains(&tok) {
                    *counts.entry(tok.to_string()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    /// Vocabulary whose non-reserved ids follow the order of `tokens`.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self, CorpusError> {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::InvalidArgument(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    /// Hex SHA-256 over the tokens in id order; identifies the id mapping.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One non-reserved token per line, in id order.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in self.regular_tokens() {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, CorpusError> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| CorpusError::Io {
                path: "<vocabulary>".into(),
                source: e,
            })?;
            if !line.is_empty() {
                tokens.push(line);
            }
        }
        Self::from_tokens(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_then_lexicographic() {
        let v = Vocabulary::build([["a", "a", "b"]], 6).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.len(), 6);

        let v = Vocabulary::build([["a", "a", "b"]], 5).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), UNK);

        let v = Vocabulary::build([["z", "y", "x", "y"]], 10).unwrap();
        assert_eq!(v.regular_tokens(), ["y", "x", "z"]);
    }

    #[test]
    fn empty_stream_keeps_reserved_only() {
        let empty: [Vec<&str>; 0] = [];
        let v = Vocabulary::build(empty, 10).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(STOP), Some("[STOP]"));
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(Vocabulary::build([["a"]], 4).is_err());
    }

    #[test]
    fn file_round_trip_preserves_ids() {
        let v = Vocabulary::build([["c", "b", "b", "a"]], 10).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "b\na\nc\n");
        let back = Vocabulary::read_from(&buf[..]).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }
}
