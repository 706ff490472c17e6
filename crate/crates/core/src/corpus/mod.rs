//! Corpus construction: normalization, filtering, emoji labeling,
//! vocabulary, splits, and line-delimited IO.

pub mod emoji;
pub mod filter;
pub mod normalize;
pub mod pipeline;
pub mod split;
pub mod vocab;

pub use emoji::{EmojiInventory, LABEL_COUNT};
pub use filter::{filter_pair, select_emoji_label, LanguageFilter, RawPair, RejectReason, Verdict};
pub use normalize::{normalize, normalize_text, NormalizeConfig, NormalizedText};
pub use pipeline::{
    encode_pairs, preprocess, read_pairs_jsonl, read_raw_jsonl, write_pairs_jsonl,
    ConversationPair, EncodedPair, PreprocessConfig, PreprocessOutput, PreprocessStats,
};
pub use split::{split_corpus, SplitFractions, Splits};
pub use vocab::{
    Vocab, EOS_ID, EOS_TOKEN, NUM_ID, NUM_TOKEN, PAD_ID, PAD_TOKEN, SOS_ID, SOS_TOKEN, UNK_ID,
    UNK_TOKEN,
};
