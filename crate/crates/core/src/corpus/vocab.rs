//! Closed word-level vocabulary and caption tokenization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

pub const SPECIAL_TOKENS: [&str; 4] = [PAD, CLS, SEP, MASK];

/// Content words of the default vocabulary. Every word the caption grammar,
/// the QA templates and the captioning prompt can emit is listed here.
pub const DEFAULT_CONTENT_WORDS: [&str; 32] = [
    "a", "is", "shown", "then", "moves", "blinks", "left", "right", "up", "down", "square", "circle", "bar", "cross",
    "ring", "bright", "dim", "video", "of", "what", "shape", "first", "last", "does", "which", "happens", "and", "the",
    "it", "two", "shapes", "are",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        let words = SPECIAL_TOKENS
            .iter()
            .chain(DEFAULT_CONTENT_WORDS.iter())
            .map(|w| w.to_string())
            .collect();
        Vocab { words }
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        Vocab::new(words)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Builds a vocabulary. The four special tokens must occupy ids 0..4 in
    /// the order PAD, CLS, SEP, MASK and appear nowhere else; at least eight
    /// distinct content words must follow.
    pub fn new(words: Vec<String>) -> Result<Self> {
        if words.len() < SPECIAL_TOKENS.len() {
            return Err(Error::config("vocab", "missing special tokens"));
        }
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if words[i] != *special {
                return Err(Error::config(
                    "vocab",
                    format!("id {i} must be the special token {special}"),
                ));
            }
        }
        let content = &words[SPECIAL_TOKENS.len()..];
        if content.iter().any(|w| SPECIAL_TOKENS.contains(&w.as_str())) {
            return Err(Error::config("vocab", "special tokens may appear only once"));
        }
        if content.len() < 8 {
            return Err(Error::config(
                "vocab",
                format!("needs at least 8 content words, got {}", content.len()),
            ));
        }
        for (i, w) in content.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::config("vocab", format!("invalid word {w:?}")));
            }
            if content[..i].contains(w) {
                return Err(Error::config("vocab", format!("duplicate word {w:?}")));
            }
        }
        Ok(Vocab { words })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.words.iter().position(|w| w == word).map(|i| i as u32)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn cls_id(&self) -> u32 {
        1
    }

    pub fn sep_id(&self) -> u32 {
        2
    }

    pub fn mask_id(&self) -> u32 {
        3
    }

    pub fn is_special(&self, id: u32) -> bool {
        (id as usize) < SPECIAL_TOKENS.len()
    }

    /// Ids of all non-special words.
    pub fn content_ids(&self) -> std::ops::Range<u32> {
        SPECIAL_TOKENS.len() as u32..self.words.len() as u32
    }

    /// Maps caption words to ids without adding special tokens.
    pub fn encode_words(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace()
            .map(|w| {
                self.id(w)
                    .filter(|&id| !self.is_special(id))
                    .ok_or_else(|| Error::Data(format!("out-of-vocabulary word {w:?}")))
            })
            .collect()
    }

    /// Joins the content words of `ids`, dropping special tokens.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| !self.is_special(id))
            .filter_map(|&id| self.word(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A caption as `[CLS] w_1 .. w_N [SEP]`, optionally right-padded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub token_ids: Vec<u32>,
    /// True exactly on the N caption-word positions.
    pub content_mask: Vec<bool>,
}

impl TokenizedText {
    /// Number of caption words N.
    pub fn n(&self) -> usize {
        self.content_mask.iter().filter(|&&m| m).count()
    }

    /// Length without padding, N + 2.
    pub fn unpadded_len(&self) -> usize {
        self.n() + 2
    }

    pub fn content_ids(&self) -> &[u32] {
        &self.token_ids[1..1 + self.n()]
    }

    /// Appends PAD tokens up to `len`; never truncates.
    pub fn padded(&self, len: usize) -> TokenizedText {
        let mut out = self.clone();
        while out.token_ids.len() < len {
            out.token_ids.push(0);
            out.content_mask.push(false);
        }
        out
    }

    fn from_content(vocab: &Vocab, content: &[u32]) -> TokenizedText {
        let mut token_ids = Vec::with_capacity(content.len() + 2);
        token_ids.push(vocab.cls_id());
        token_ids.extend_from_slice(content);
        token_ids.push(vocab.sep_id());
        let mut content_mask = vec![true; token_ids.len()];
        content_mask[0] = false;
        content_mask[token_ids.len() - 1] = false;
        TokenizedText {
            token_ids,
            content_mask,
        }
    }
}

/// Whitespace word-level tokenization with `[CLS]` prepended and `[SEP]` appended.
pub fn tokenize(caption: &str, vocab: &Vocab) -> Result<TokenizedText> {
    let content = vocab.encode_words(caption)?;
    if content.is_empty() {
        return Err(Error::Data("empty caption".into()));
    }
    Ok(TokenizedText::from_content(vocab, &content))
}

/// Tokenizes already-mapped content ids (used for question + candidate texts).
pub fn tokenize_ids(content: &[u32], vocab: &Vocab) -> Result<TokenizedText> {
    if content.is_empty() {
        return Err(Error::Data("empty caption".into()));
    }
    if let Some(&bad) = content
        .iter()
        .find(|&&id| vocab.is_special(id) || id as usize >= vocab.len())
    {
        return Err(Error::Data(format!("token id {bad} is not a content word")));
    }
    Ok(TokenizedText::from_content(vocab, content))
}

pub fn detokenize(text: &TokenizedText, vocab: &Vocab) -> String {
    vocab.decode(text.content_ids())
}
