//! Token vocabulary with reserved ids and frequency-ranked membership.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const SOS_TOKEN: &str = "<sos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const NUM_TOKEN: &str = "<num>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const SOS_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const NUM_ID: usize = 4;

pub const RESERVED_TOKENS: [&str; 5] = [PAD_TOKEN, UNK_TOKEN, SOS_TOKEN, EOS_TOKEN, NUM_TOKEN];

/// Token ↔ id bijection over the kept tokens, with corpus frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    cap: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    cap: usize,
    tokens: Vec<String>,
    frequencies: Vec<u64>,
}

impl Vocab {
    /// Keep the `cap - reserved` most frequent tokens from the streams.
    /// Frequency ties go to the token seen earlier.
    pub fn build<'a, I>(streams: I, cap: usize) -> Result<Vocab>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if cap <= RESERVED_TOKENS.len() {
            return Err(Error::Config(format!(
                "vocab cap {cap} must exceed the {} reserved tokens",
                RESERVED_TOKENS.len()
            )));
        }
        let mut freq: HashMap<&str, (u64, usize)> = HashMap::new();
        let mut reserved_freq = [0u64; RESERVED_TOKENS.len()];
        let mut position = 0usize;
        for stream in streams {
            for token in stream {
                if let Some(r) = RESERVED_TOKENS.iter().position(|t| t == token) {
                    reserved_freq[r] += 1;
                } else {
                    let entry = freq.entry(token.as_str()).or_insert((0, position));
                    entry.0 += 1;
                }
                position += 1;
            }
        }
        let mut ranked: Vec<(&str, u64, usize)> =
            freq.into_iter().map(|(t, (n, first))| (t, n, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(cap - RESERVED_TOKENS.len());

        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|t| t.to_string()).collect();
        let mut frequencies: Vec<u64> = reserved_freq.to_vec();
        for (t, n, _) in ranked {
            tokens.push(t.to_string());
            frequencies.push(n);
        }
        Ok(Self::assemble(tokens, frequencies, cap))
    }

    fn assemble(tokens: Vec<String>, frequencies: Vec<u64>, cap: usize) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, frequencies, cap, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequencies[id]
    }

    /// Encode without framing (encoder inputs). Unknown tokens become UNK.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id_of(t).unwrap_or(UNK_ID))
            .collect()
    }

    /// Encode with SOS/EOS framing (decoder targets only).
    pub fn encode_target(&self, tokens: &[String]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(SOS_ID);
        ids.extend(self.encode(tokens));
        ids.push(EOS_ID);
        ids
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = VocabFile {
            cap: self.cap,
            tokens: self.tokens.clone(),
            frequencies: self.frequencies.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Vocab> {
        let file: VocabFile = serde_json::from_str(json)?;
        if file.tokens.len() != file.frequencies.len() {
            return Err(Error::Format {
                what: "vocab",
                detail: "token/frequency length mismatch".into(),
            });
        }
        for (i, t) in RESERVED_TOKENS.iter().enumerate() {
            if file.tokens.get(i).map(String::as_str) != Some(*t) {
                return Err(Error::Format {
                    what: "vocab",
                    detail: format!("reserved token {t} missing at id {i}"),
                });
            }
        }
        Ok(Self::assemble(file.tokens, file.frequencies, file.cap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn frequency_order_then_first_occurrence() {
        let data = stream("a a b");
        let vocab = Vocab::build([data.as_slice()], 7).unwrap();
        assert_eq!(vocab.size(), 7);
        let a = vocab.id_of("a").unwrap();
        let b = vocab.id_of("b").unwrap();
        assert!(a < b);
        assert_eq!(a, RESERVED_TOKENS.len());
        assert_eq!(vocab.frequency(a), 2);
    }

    #[test]
    fn overflow_tokens_encode_to_unk() {
        let data = stream("x x y y z");
        let vocab = Vocab::build([data.as_slice()], 7).unwrap(); // room for 2
        assert!(vocab.id_of("z").is_none());
        let ids = vocab.encode(&stream("z x"));
        assert_eq!(ids[0], UNK_ID);
        assert_eq!(ids[1], vocab.id_of("x").unwrap());
    }

    #[test]
    fn empty_target_frames_to_sos_eos() {
        let vocab = Vocab::build(std::iter::empty(), 6).unwrap();
        assert_eq!(vocab.encode_target(&[]), vec![SOS_ID, EOS_ID]);
    }

    #[test]
    fn known_token_round_trips() {
        let data = stream("hello world hello");
        let vocab = Vocab::build([data.as_slice()], 10).unwrap();
        let id = vocab.id_of("hello").unwrap();
        assert_eq!(vocab.token(id), "hello");
    }

    #[test]
    fn same_corpus_same_bytes() {
        let data = stream("c a b a c c");
        let v1 = Vocab::build([data.as_slice()], 8).unwrap();
        let v2 = Vocab::build([data.as_slice()], 8).unwrap();
        assert_eq!(v1.to_json().unwrap(), v2.to_json().unwrap());
        let back = Vocab::from_json(&v1.to_json().unwrap()).unwrap();
        assert_eq!(back, v1);
    }

    #[test]
    fn cap_must_exceed_reserved() {
        assert!(Vocab::build(std::iter::empty(), 5).is_err());
    }
}
