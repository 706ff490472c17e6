//! End-to-end corpus construction: two passes over the raw pairs, then
//! split, vocabulary, and integer encoding.
//!
//! Pass one normalizes every response and accumulates global occurrence
//! counts for the label emojis; those counts drive the rarity tie-break.
//! Pass two filters and labels each pair. The whole pipeline is a pure
//! function of (input order, config, seed).

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::emoji::EmojiInventory;
use super::filter::{
    filter_processed, process_pair, select_emoji_label, LanguageFilter, RawPair, Verdict,
};
use super::normalize::NormalizeConfig;
use super::split::{split_corpus, SplitFractions, Splits};
use super::vocab::Vocab;
use crate::error::Result;

/// One labeled conversation pair, tokenized.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConversationPair {
    pub source_tokens: Vec<String>,
    pub response_tokens: Vec<String>,
    pub emoji_id: usize,
}

/// Same pair in vocabulary ids. Responses are stored unframed; SOS/EOS
/// framing belongs to decoder targets only.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub source: Vec<usize>,
    pub response: Vec<usize>,
    pub emoji: usize,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub vocab_cap: usize,
    pub fractions: SplitFractions,
    pub seed: u64,
    pub normalize: NormalizeConfig,
    pub language: LanguageFilter,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            vocab_cap: 20_000,
            fractions: SplitFractions::default(),
            seed: 0,
            normalize: NormalizeConfig::default(),
            language: LanguageFilter::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub total: u64,
    pub accepted: u64,
    pub rejected: IndexMap<String, u64>,
    /// Accepted pairs per label emoji, indexed by inventory id.
    pub label_counts: Vec<u64>,
    /// Raw occurrence counts per label emoji over all responses.
    pub global_emoji_counts: Vec<u64>,
    pub split_sizes: [usize; 3],
    pub vocab_size: usize,
}

impl PreprocessStats {
    /// Inventory ids ordered by label frequency, most frequent first.
    /// This is the row order for per-emoji reports.
    pub fn frequency_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.label_counts.len()).collect();
        ids.sort_by(|&a, &b| self.label_counts[b].cmp(&self.label_counts[a]).then(a.cmp(&b)));
        ids
    }

    pub fn render_table(&self, inventory: &EmojiInventory) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "pairs: {} read, {} accepted\n",
            self.total, self.accepted
        ));
        for (reason, n) in &self.rejected {
            out.push_str(&format!("rejected {reason}: {n}\n"));
        }
        out.push_str(&format!(
            "splits: train {} / validation {} / test {}\n",
            self.split_sizes[0], self.split_sizes[1], self.split_sizes[2]
        ));
        out.push_str(&format!("vocab size: {}\n", self.vocab_size));
        out.push_str("label counts (most frequent first):\n");
        for id in self.frequency_order() {
            if self.label_counts[id] > 0 {
                let emoji = inventory.emoji(id).unwrap_or("?");
                out.push_str(&format!("{id:>3} {emoji} {}\n", self.label_counts[id]));
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct PreprocessOutput {
    pub splits: Splits<ConversationPair>,
    pub vocab: Vocab,
    pub inventory: EmojiInventory,
    pub stats: PreprocessStats,
}

/// Run the full pipeline over in-memory raw pairs.
pub fn preprocess(
    raw_pairs: &[RawPair],
    mut inventory: EmojiInventory,
    cfg: &PreprocessConfig,
) -> Result<PreprocessOutput> {
    cfg.fractions.validate()?;

    // Pass 1: normalize everything once, count label-emoji occurrences.
    let processed: Vec<_> = raw_pairs.iter().map(|p| process_pair(p, &cfg.normalize)).collect();
    for p in &processed {
        for token in &p.response.pre_dedup {
            if let Some(id) = inventory.id_of(token) {
                inventory.add_occurrence(id, 1);
            }
        }
    }

    // Pass 2: filter and label.
    let mut accepted = Vec::new();
    let mut rejected: IndexMap<String, u64> = IndexMap::new();
    let mut label_counts = vec![0u64; inventory.len()];
    for (raw, p) in raw_pairs.iter().zip(&processed) {
        match filter_processed(raw, p, &inventory, &cfg.language) {
            Verdict::Reject(reason) => {
                *rejected.entry(reason.as_str().to_string()).or_insert(0) += 1;
            }
            Verdict::Accept => {
                let emoji_id = select_emoji_label(&p.response.pre_dedup, &inventory)
                    .expect("accepted pairs carry a label emoji");
                label_counts[emoji_id] += 1;
                accepted.push(ConversationPair {
                    source_tokens: p.source.tokens.clone(),
                    response_tokens: p.response.tokens.clone(),
                    emoji_id,
                });
            }
        }
    }

    let total = raw_pairs.len() as u64;
    let accepted_n = accepted.len() as u64;
    let splits = split_corpus(accepted, &cfg.fractions, cfg.seed)?;

    // Vocabulary from the training split only.
    let streams = splits
        .train
        .iter()
        .flat_map(|p| [p.source_tokens.as_slice(), p.response_tokens.as_slice()]);
    let vocab = Vocab::build(streams, cfg.vocab_cap)?;

    let stats = PreprocessStats {
        total,
        accepted: accepted_n,
        rejected,
        label_counts,
        global_emoji_counts: inventory.counts().to_vec(),
        split_sizes: splits.sizes(),
        vocab_size: vocab.size(),
    };
    Ok(PreprocessOutput { splits, vocab, inventory, stats })
}

pub fn encode_pairs(pairs: &[ConversationPair], vocab: &Vocab) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            source: vocab.encode(&p.source_tokens),
            response: vocab.encode(&p.response_tokens),
            emoji: p.emoji_id,
        })
        .collect()
}

// ── Line-delimited IO ────────────────────────────────────────────────

pub fn read_raw_jsonl<R: BufRead>(reader: R) -> Result<Vec<RawPair>> {
    let mut pairs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line)?);
    }
    Ok(pairs)
}

pub fn write_pairs_jsonl<W: Write>(mut writer: W, pairs: &[ConversationPair]) -> Result<()> {
    for pair in pairs {
        serde_json::to_writer(&mut writer, pair)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_pairs_jsonl<R: BufRead>(reader: R) -> Result<Vec<ConversationPair>> {
    let mut pairs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line)?);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_pair() -> RawPair {
        RawPair::new(
            "hey how have you been lately",
            "@amy 😌 miss you soooo much!!! 😭 😭 😭",
        )
    }

    fn small_corpus() -> Vec<RawPair> {
        let mut pairs = vec![figure_pair()];
        for i in 0..40 {
            let emoji = ["😂", "❤", "😭", "😍"][i % 4];
            pairs.push(RawPair::new(
                &format!("tell me more about thing number {i}"),
                &format!("honestly it was really great fun {emoji}"),
            ));
        }
        pairs.push(RawPair::new("short one", "also short 😂")); // too few words
        pairs.push(RawPair::new(
            "see this http://spam.example link",
            "wow that looks really interesting 😂",
        ));
        pairs
    }

    #[test]
    fn pipeline_labels_figure_pair_with_repeated_emoji() {
        let cfg = PreprocessConfig {
            fractions: SplitFractions { train: 1.0, validation: 0.0, test: 0.0 },
            vocab_cap: 100,
            ..PreprocessConfig::default()
        };
        let out = preprocess(&[figure_pair()], EmojiInventory::default_set(), &cfg).unwrap();
        assert_eq!(out.stats.accepted, 1);
        let pair = &out.splits.train[0];
        assert_eq!(out.inventory.emoji(pair.emoji_id).unwrap(), "😭");
        assert_eq!(
            pair.response_tokens.join(" "),
            "😌 miss you soo much ! 😭"
        );
    }

    #[test]
    fn rejects_are_tallied_by_reason() {
        let cfg = PreprocessConfig {
            fractions: SplitFractions { train: 1.0, validation: 0.0, test: 0.0 },
            vocab_cap: 500,
            ..PreprocessConfig::default()
        };
        let out = preprocess(&small_corpus(), EmojiInventory::default_set(), &cfg).unwrap();
        assert_eq!(out.stats.rejected["too-few-words"], 1);
        assert_eq!(out.stats.rejected["media-or-url"], 1);
        assert_eq!(out.stats.total, 43);
        assert_eq!(out.stats.accepted, 41);
    }

    #[test]
    fn deterministic_end_to_end() {
        let cfg = PreprocessConfig { vocab_cap: 200, seed: 9, ..PreprocessConfig::default() };
        let a = preprocess(&small_corpus(), EmojiInventory::default_set(), &cfg).unwrap();
        let b = preprocess(&small_corpus(), EmojiInventory::default_set(), &cfg).unwrap();
        assert_eq!(a.splits.train, b.splits.train);
        assert_eq!(a.vocab, b.vocab);
        assert_eq!(
            serde_json::to_string(&a.stats).unwrap(),
            serde_json::to_string(&b.stats).unwrap()
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let cfg = PreprocessConfig {
            fractions: SplitFractions { train: 1.0, validation: 0.0, test: 0.0 },
            vocab_cap: 500,
            ..PreprocessConfig::default()
        };
        let out = preprocess(&small_corpus(), EmojiInventory::default_set(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_pairs_jsonl(&mut buf, &out.splits.train).unwrap();
        let back = read_pairs_jsonl(&buf[..]).unwrap();
        assert_eq!(back, out.splits.train);
    }

    #[test]
    fn raw_jsonl_accepts_metadata() {
        let line = r#"{"source":"a b c","response":"x y z 😂","metadata":{"media":"false"}}"#;
        let pairs = read_raw_jsonl(line.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].metadata.as_ref().unwrap()["media"], "false");
    }
}
