//! The 64-emoji label inventory and emoji character handling.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of label emojis. Fixed by the task definition.
pub const LABEL_COUNT: usize = 64;

/// Is this scalar an emoji for tokenization purposes? Covers the common
/// pictographic blocks; modifier scalars are handled separately.
pub fn is_emoji_char(c: char) -> bool {
    matches!(u32::from(c),
        0x1F000..=0x1FAFF   // pictographs, emoticons, transport, supplemental
        | 0x2600..=0x27BF   // misc symbols, dingbats
        | 0x2B00..=0x2BFF   // stars, arrows used as emoji
    )
}

/// Skin-tone modifiers (Fitzpatrick scale).
pub fn is_skin_tone_modifier(c: char) -> bool {
    matches!(u32::from(c), 0x1F3FB..=0x1F3FF)
}

/// Scalars that carry no visible content of their own: variation selectors,
/// zero-width joiners and friends. Dropped during tokenization.
pub fn is_invisible_modifier(c: char) -> bool {
    matches!(
        u32::from(c),
        0xFE00..=0xFE0F | 0x200B..=0x200D | 0xFEFF | 0x2060
    )
}

/// Strip modifiers so skin-tone and presentation variants compare equal.
pub fn canonicalize_emoji(s: &str) -> String {
    s.chars()
        .filter(|&c| !is_skin_tone_modifier(c) && !is_invisible_modifier(c))
        .collect()
}

/// The fixed label set with global corpus occurrence counts.
///
/// Counts are filled by the corpus pipeline's first pass and drive the
/// rarity tie-break during labeling. Variants differing only in skin tone
/// or presentation map onto the canonical entry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmojiInventory {
    emojis: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: IndexMap<String, usize>,
}

impl EmojiInventory {
    pub fn new(emojis: Vec<String>) -> Result<Self> {
        if emojis.len() != LABEL_COUNT {
            return Err(Error::Config(format!(
                "emoji inventory needs exactly {LABEL_COUNT} entries, got {}",
                emojis.len()
            )));
        }
        let canonical: Vec<String> = emojis.iter().map(|e| canonicalize_emoji(e)).collect();
        let mut index = IndexMap::new();
        for (i, e) in canonical.iter().enumerate() {
            if e.is_empty() || index.insert(e.clone(), i).is_some() {
                return Err(Error::Config(format!("emoji inventory entry {i} ('{e}') is empty or duplicated")));
            }
        }
        let counts = vec![0; canonical.len()];
        Ok(EmojiInventory { emojis: canonical, counts, index })
    }

    pub fn default_set() -> Self {
        let emojis = DEFAULT_EMOJIS.iter().map(|s| s.to_string()).collect();
        Self::new(emojis).expect("default inventory is well-formed")
    }

    pub fn len(&self) -> usize {
        self.emojis.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn emoji(&self, id: usize) -> Result<&str> {
        self.emojis
            .get(id)
            .map(String::as_str)
            .ok_or(Error::EmojiIdOutOfRange { id, len: self.emojis.len() })
    }

    /// Label id for a token, after canonicalization. `None` for non-labels.
    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(&canonicalize_emoji(token)).copied()
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add_occurrence(&mut self, id: usize, n: u64) {
        self.counts[id] += n;
    }

    pub fn set_counts(&mut self, counts: Vec<u64>) -> Result<()> {
        if counts.len() != self.emojis.len() {
            return Err(Error::Config("count table size mismatch".into()));
        }
        self.counts = counts;
        Ok(())
    }

    pub fn emojis(&self) -> &[String] {
        &self.emojis
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: EmojiInventory = serde_json::from_str(json)?;
        let mut inv = Self::new(raw.emojis)?;
        if raw.counts.len() == LABEL_COUNT {
            inv.set_counts(raw.counts)?;
        }
        Ok(inv)
    }
}

/// Default label set: 64 common emojis, most frequent first.
pub const DEFAULT_EMOJIS: [&str; 64] = [
    "😂", "❤", "😭", "😍", "😊", "😁", "😩", "🙏", "💕", "😔", "😒", "😏", "😉", "👌",
    "😢", "😅", "🙌", "💔", "😌", "😕", "🙈", "😳", "💙", "✨", "😎", "😡", "💯", "🙄",
    "🔥", "😴", "😬", "💖", "😞", "😋", "😐", "👍", "💀", "😤", "😜", "😀", "💜", "😪",
    "💛", "😷", "👏", "🎉", "😈", "💞", "✌", "🌹", "🎶", "💗", "😫", "😻", "💘", "🙃",
    "😠", "🤔", "😑", "💓", "☀", "😆", "😱", "💚",
];
