use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const HASH: u32 = 4;
pub const SLASH: u32 = 5;

pub const PAD_TOKEN: &str = "⟨PAD⟩";
pub const UNK_TOKEN: &str = "⟨UNK⟩";
pub const BOS_TOKEN: &str = "⟨BOS⟩";
pub const EOS_TOKEN: &str = "⟨EOS⟩";
pub const HASH_TOKEN: &str = "#";
pub const SLASH_TOKEN: &str = "/";

/// Reserved tokens in id order.
pub const RESERVED: [&str; 6] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, HASH_TOKEN, SLASH_TOKEN];

pub const DEFAULT_VOCAB_CAP: usize = 30_000;

/// Bijective token ↔ id map. Ids are line numbers in the persisted file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    max_token_chars: usize,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() {
            return Err(Error::MalformedVocab(format!(
                "{} tokens, fewer than the {} reserved",
                tokens.len(),
                RESERVED.len()
            )));
        }
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens[i] != *r {
                return Err(Error::MalformedVocab(format!(
                    "id {i} must be `{r}`, found `{}`",
                    tokens[i]
                )));
            }
        }
        if tokens.len() > DEFAULT_VOCAB_CAP {
            return Err(Error::MalformedVocab(format!(
                "{} tokens exceed the cap of {DEFAULT_VOCAB_CAP}",
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        let mut max_token_chars = 1;
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::MalformedVocab(format!("token {i} is empty or has whitespace")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::MalformedVocab(format!("duplicate token `{t}`")));
            }
            max_token_chars = max_token_chars.max(t.chars().count());
        }
        Ok(Vocab {
            tokens,
            index,
            max_token_chars,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_reserved(id: u32) -> bool {
        (id as usize) < RESERVED.len()
    }

    /// Greedy longest-match segmentation of one whitespace-free word.
    pub fn segment_word(&self, word: &str, out: &mut Vec<u32>) {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = bounds.len() - 1;
        let mut i = 0;
        while i < n {
            let longest = self.max_token_chars.min(n - i);
            let hit = (1..=longest)
                .rev()
                .find_map(|len| self.id(&word[bounds[i]..bounds[i + len]]).map(|id| (id, len)));
            match hit {
                Some((id, len)) => {
                    out.push(id);
                    i += len;
                }
                None => {
                    out.push(UNK);
                    i += 1;
                }
            }
        }
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            let _ = writeln!(s, "{t}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        Vocab::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::parse(&text)
    }

    /// SHA-256 of the persisted file contents, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }
}
