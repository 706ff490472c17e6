//! Pair admission rules and emoji labeling.

use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::emoji::EmojiInventory;
use super::normalize::{normalize, NormalizeConfig, NormalizedText};

/// Minimum purely-alphabetical words required on each side of a pair.
pub const MIN_ALPHA_WORDS: usize = 3;

/// One raw conversation pair as ingested, before any processing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RawPair {
    pub source: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<IndexMap<String, String>>,
}

impl RawPair {
    pub fn new(source: &str, response: &str) -> Self {
        RawPair { source: source.to_string(), response: response.to_string(), metadata: None }
    }

    fn media_flagged(&self) -> bool {
        let Some(meta) = &self.metadata else { return false };
        ["media", "has_media"].iter().any(|key| {
            meta.get(*key)
                .map(|v| !matches!(v.as_str(), "" | "0" | "false" | "no"))
                .unwrap_or(false)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    MediaOrUrl,
    TooFewWords,
    NoLabelEmoji,
    Language,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::MediaOrUrl => "media-or-url",
            RejectReason::TooFewWords => "too-few-words",
            RejectReason::NoLabelEmoji => "no-label-emoji",
            RejectReason::Language => "language",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, PartialEq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// Pluggable language predicate. The default accepts everything; the
/// ASCII-ratio heuristic is a crude stand-in for identification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LanguageFilter {
    AcceptAll,
    AsciiRatio { min_ratio: f64 },
}

impl Default for LanguageFilter {
    fn default() -> Self {
        LanguageFilter::AcceptAll
    }
}

impl LanguageFilter {
    pub fn accepts(&self, text: &str) -> bool {
        match self {
            LanguageFilter::AcceptAll => true,
            LanguageFilter::AsciiRatio { min_ratio } => {
                let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
                if letters.is_empty() {
                    return true;
                }
                let ascii = letters.iter().filter(|c| c.is_ascii()).count();
                ascii as f64 / letters.len() as f64 >= *min_ratio
            }
        }
    }
}

pub fn has_url(text: &str) -> bool {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)\bhttps?://|\bwww\.").expect("valid pattern"))
        .is_match(text)
}

/// Label emoji for a response, counted on the pre-reduction token stream.
///
/// Highest occurrence count wins; ties fall to the emoji with the lowest
/// global corpus count, then to the lowest inventory index. `None` when no
/// label emoji occurs.
pub fn select_emoji_label(pre_dedup_tokens: &[String], inventory: &EmojiInventory) -> Option<usize> {
    let mut occurrences = vec![0u64; inventory.len()];
    for token in pre_dedup_tokens {
        if let Some(id) = inventory.id_of(token) {
            occurrences[id] += 1;
        }
    }
    let mut best: Option<usize> = None;
    for id in 0..inventory.len() {
        if occurrences[id] == 0 {
            continue;
        }
        best = match best {
            None => Some(id),
            Some(cur) => {
                let better = occurrences[id] > occurrences[cur]
                    || (occurrences[id] == occurrences[cur]
                        && inventory.count(id) < inventory.count(cur));
                // Equal occurrences and equal global count keep the lower index.
                if better {
                    Some(id)
                } else {
                    Some(cur)
                }
            }
        };
    }
    best
}

/// Normalized view of a pair, shared between filtering and labeling so the
/// text is processed exactly once.
pub struct ProcessedPair {
    pub source: NormalizedText,
    pub response: NormalizedText,
}

pub fn process_pair(raw: &RawPair, cfg: &NormalizeConfig) -> ProcessedPair {
    ProcessedPair {
        source: normalize(&raw.source, cfg),
        response: normalize(&raw.response, cfg),
    }
}

/// Admission decision for one raw pair.
pub fn filter_processed(
    raw: &RawPair,
    processed: &ProcessedPair,
    inventory: &EmojiInventory,
    language: &LanguageFilter,
) -> Verdict {
    if raw.media_flagged() || has_url(&raw.source) || has_url(&raw.response) {
        return Verdict::Reject(RejectReason::MediaOrUrl);
    }
    if processed.source.alphabetic_word_count() < MIN_ALPHA_WORDS
        || processed.response.alphabetic_word_count() < MIN_ALPHA_WORDS
    {
        return Verdict::Reject(RejectReason::TooFewWords);
    }
    if select_emoji_label(&processed.response.pre_dedup, inventory).is_none() {
        return Verdict::Reject(RejectReason::NoLabelEmoji);
    }
    if !language.accepts(&raw.source) || !language.accepts(&raw.response) {
        return Verdict::Reject(RejectReason::Language);
    }
    Verdict::Accept
}

pub fn filter_pair(
    raw: &RawPair,
    inventory: &EmojiInventory,
    cfg: &NormalizeConfig,
    language: &LanguageFilter,
) -> Verdict {
    let processed = process_pair(raw, cfg);
    filter_processed(raw, &processed, inventory, language)
}
