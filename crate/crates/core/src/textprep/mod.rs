//! Model-input assembly, subword vocabulary, fixed-length encoding.
//!
//! A headline edit becomes one marked string:
//!
//! ```text
//! ⟨BOS⟩ prefix # span / edit # suffix ⟨EOS⟩
//! ```
//!
//! so a single sequence carries both the original and the edited title.

mod bpe;
mod vocab;

use std::ops::Range;

pub use bpe::{train_vocab, MIN_PAIR_COUNT};
pub use vocab::*;

use crate::corpus::HeadlineEdit;
use crate::error::{Error, Result};

pub const DEFAULT_SEQ_LEN: usize = 512;

/// Fixed-length encoded input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Count of non-PAD positions; PAD fills `real_length..`.
    pub real_length: usize,
    /// Positions of the edit's subword tokens.
    pub edit_span: Range<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn push_words<'a>(out: &mut Vec<&'a str>, text: &'a str) {
    out.extend(text.split_whitespace());
}

/// Builds the marked input string, preserving case.
pub fn assemble_input(h: &HeadlineEdit) -> String {
    let m = h.marked();
    assemble_parts(m.prefix, m.span, &h.edit, m.suffix)
}

/// Builds the marked input string as the model sees it.
pub fn model_input(h: &HeadlineEdit, lowercase: bool) -> String {
    if !lowercase {
        return assemble_input(h);
    }
    let m = h.marked();
    assemble_parts(
        &m.prefix.to_lowercase(),
        &m.span.to_lowercase(),
        &h.edit.to_lowercase(),
        &m.suffix.to_lowercase(),
    )
}

fn assemble_parts(prefix: &str, span: &str, edit: &str, suffix: &str) -> String {
    let mut words = vec![BOS_TOKEN];
    push_words(&mut words, prefix);
    words.push(HASH_TOKEN);
    push_words(&mut words, span);
    words.push(SLASH_TOKEN);
    push_words(&mut words, edit);
    words.push(HASH_TOKEN);
    push_words(&mut words, suffix);
    words.push(EOS_TOKEN);
    words.join(" ")
}

/// Word indices `(start, end)` of the edit: after the last standalone `/`
/// that sits between the first and last standalone `#`.
fn locate_edit_words(words: &[&str]) -> Option<Range<usize>> {
    let open = words.iter().position(|w| *w == HASH_TOKEN)?;
    let close = words.iter().rposition(|w| *w == HASH_TOKEN)?;
    if close <= open {
        return None;
    }
    let slash = open + 1 + words[open + 1..close].iter().rposition(|w| *w == SLASH_TOKEN)?;
    Some(slash + 1..close)
}

/// Segments an assembled input string into exactly `max_len` ids.
///
/// Longer inputs are cut on the right and the last kept position is forced to
/// `EOS`.
pub fn encode(v: &Vocab, s: &str, max_len: usize) -> Result<TokenSequence> {
    let words: Vec<&str> = s.split_whitespace().collect();
    let edit_words = locate_edit_words(&words).ok_or_else(|| Error::EditRegionNotFound(s.into()))?;

    let mut ids = Vec::with_capacity(max_len);
    let mut edit_start = 0;
    let mut edit_end = 0;
    for (wi, w) in words.iter().enumerate() {
        if wi == edit_words.start {
            edit_start = ids.len();
        }
        match RESERVED.iter().position(|r| r == w) {
            Some(id) => ids.push(id as u32),
            None => v.segment_word(w, &mut ids),
        }
        if wi + 1 == edit_words.end {
            edit_end = ids.len();
        }
    }
    if edit_words.is_empty() {
        edit_end = edit_start;
    }

    if ids.len() > max_len {
        ids.truncate(max_len);
        ids[max_len - 1] = EOS;
        edit_end = edit_end.min(max_len - 1);
    }
    if edit_start >= edit_end {
        return Err(Error::EditRegionNotFound(s.into()));
    }
    let real_length = ids.len();
    ids.resize(max_len, PAD);
    Ok(TokenSequence {
        ids,
        real_length,
        edit_span: edit_start..edit_end,
    })
}

/// Assembles, normalizes and encodes one record.
pub fn encode_headline(v: &Vocab, h: &HeadlineEdit, lowercase: bool, max_len: usize) -> Result<TokenSequence> {
    encode(v, &model_input(h, lowercase), max_len)
}
