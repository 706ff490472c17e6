//! Deterministic text normalization.
//!
//! One pass turns raw post text into a token stream:
//! - mentions (`@user`) and hashtags (`#tag`) are dropped whole;
//! - punctuation and emojis are split off words into their own tokens;
//! - a letter repeated more than twice in a row inside a word is reduced
//!   to exactly two (`soooo` → `soo`), ASCII letters only;
//! - runs of one identical punctuation mark or identical emoji are reduced
//!   to a single token (`!!!!` → `!`);
//! - any word containing a digit becomes the number placeholder;
//! - configured emoticons and the reserved placeholder tokens pass through
//!   untouched.
//!
//! Emoji occurrences for labeling are counted on the stream *before* the
//! identical-run reduction, so the label signal survives deduplication.

use super::emoji::{is_emoji_char, is_invisible_modifier, is_skin_tone_modifier};
use super::vocab::{NUM_TOKEN, RESERVED_TOKENS};

#[derive(Debug, Clone)]
pub struct NormalizeConfig {
    /// Emoticons kept as atomic word tokens.
    pub emoticons: Vec<String>,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            emoticons: [":)", ":(", ":D", ";)", ":P"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl NormalizeConfig {
    fn is_atomic(&self, token: &str) -> bool {
        self.emoticons.iter().any(|e| e == token) || RESERVED_TOKENS.contains(&token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Word,
    Punct,
    Emoji,
    Atomic,
}

/// Normalization result. `pre_dedup` is the token stream before the
/// identical-run reduction; `tokens` is the final form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedText {
    pub pre_dedup: Vec<String>,
    pub tokens: Vec<String>,
}

impl NormalizedText {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Tokens made solely of letters, the unit of the length filter.
    pub fn alphabetic_word_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| !t.is_empty() && t.chars().all(char::is_alphabetic))
            .count()
    }
}

/// Full normalization; total over any input, empty output is valid.
pub fn normalize(raw: &str, cfg: &NormalizeConfig) -> NormalizedText {
    let atoms = atomize(raw, cfg);
    let tokens = collapse_runs(&atoms);
    NormalizedText {
        pre_dedup: atoms.into_iter().map(|(t, _)| t).collect(),
        tokens,
    }
}

/// Normalized text as a single space-joined string.
pub fn normalize_text(raw: &str, cfg: &NormalizeConfig) -> String {
    normalize(raw, cfg).text()
}

fn atomize(raw: &str, cfg: &NormalizeConfig) -> Vec<(String, Class)> {
    let mut atoms = Vec::new();
    for token in raw.split_whitespace() {
        let mut chars = token.chars();
        let first = chars.next().expect("split_whitespace yields non-empty");
        // A lone '@' or '#' is ordinary punctuation; with anything after it,
        // the whole token is a mention or hashtag and is dropped.
        if (first == '@' || first == '#') && chars.next().is_some() {
            continue;
        }
        if cfg.is_atomic(token) {
            atoms.push((token.to_string(), Class::Atomic));
            continue;
        }
        segment(token, &mut atoms);
    }
    atoms
}

fn segment(token: &str, atoms: &mut Vec<(String, Class)>) {
    let mut word = String::new();
    for c in token.chars() {
        if is_skin_tone_modifier(c) || is_invisible_modifier(c) {
            continue;
        }
        if is_emoji_char(c) {
            flush_word(&mut word, atoms);
            atoms.push((c.to_string(), Class::Emoji));
        } else if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush_word(&mut word, atoms);
            atoms.push((c.to_string(), Class::Punct));
        }
    }
    flush_word(&mut word, atoms);
}

fn flush_word(word: &mut String, atoms: &mut Vec<(String, Class)>) {
    if word.is_empty() {
        return;
    }
    let reduced = reduce_letter_runs(word);
    let token = if reduced.chars().any(char::is_numeric) {
        NUM_TOKEN.to_string()
    } else {
        reduced
    };
    atoms.push((token, Class::Word));
    word.clear();
}

/// `soooo` → `soo`: at most two consecutive copies of an ASCII letter.
fn reduce_letter_runs(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut run_char = '\0';
    let mut run_len = 0usize;
    for c in word.chars() {
        if c == run_char && c.is_ascii_alphabetic() {
            run_len += 1;
        } else {
            run_char = c;
            run_len = 1;
        }
        if run_len <= 2 {
            out.push(c);
        }
    }
    out
}

/// Consecutive identical punctuation or emoji tokens reduce to one.
fn collapse_runs(atoms: &[(String, Class)]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(atoms.len());
    let mut last: Option<&(String, Class)> = None;
    for atom in atoms {
        if matches!(atom.1, Class::Punct | Class::Emoji) {
            if let Some(prev) = last {
                if prev == atom {
                    continue;
                }
            }
        }
        out.push(atom.0.clone());
        last = Some(atom);
    }
    out
}
