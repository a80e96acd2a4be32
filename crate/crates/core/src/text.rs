//! Caption vocabulary, tokenization, and token embedding.
//!
//! Word-level tokenizer: lowercase, strip punctuation, split on whitespace.
//! Ids 0..4 are reserved; corpus words start at 4, ordered by frequency
//! (descending) then lexicographically, so construction is deterministic.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
/// Boundary between the text and video segments of a joint sequence.
pub const EOS_TEXT: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: usize = 4;

const RESERVED_NAMES: [&str; 4] = ["<pad>", "<bos>", "<eos_text>", "<unk>"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

/// Caption as a sequence of vocabulary indices (no BOS/EOS; the joint
/// sequence builder adds those).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Lowercase, strip punctuation to spaces, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

impl Vocab {
    /// Build from a caption corpus, keeping words with count >= `min_count`.
    pub fn build(corpus: &[impl AsRef<str>], min_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Input("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for caption in corpus {
            for tok in tokenize(caption.as_ref()) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        kept.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

        let mut id_to_token: Vec<String> =
            RESERVED_NAMES.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(kept.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(id_to_token))
    }

    fn from_tokens(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            token_to_id,
            id_to_token,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved ids are always present
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Words to ids; unknown words map to UNK.
    pub fn encode(&self, caption: &str) -> TokenSeq {
        let ids = tokenize(caption)
            .iter()
            .map(|t| self.token_to_id.get(t).copied().unwrap_or(UNK))
            .collect();
        TokenSeq { ids }
    }

    /// Ids to words; reserved ids are skipped so that decoding raw model
    /// output yields a plain caption.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| id >= RESERVED)
            .filter_map(|&id| self.token_of(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One corpus token per line; line number = id - 4.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(&text))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for token in &self.id_to_token[RESERVED..] {
            out.push_str(token);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        let mut id_to_token: Vec<String> =
            RESERVED_NAMES.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(text.lines().map(str::to_string));
        Self::from_tokens(id_to_token)
    }
}

/// Differentiable embedding lookup: row i of the output is table[seq[i]].
pub fn embed(g: &mut Graph, table: NodeId, seq: &TokenSeq) -> Result<NodeId> {
    g.gather_rows(table, &seq.ids)
}
