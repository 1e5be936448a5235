//! Byte-pair-encoding vocabulary training over whitespace-separated words.
//!
//! Merges never cross word boundaries. Every character seen in the corpus gets
//! its own token before any merge is learned, so a trained vocabulary only
//! emits `UNK` for characters it has never seen.

use std::collections::{BTreeMap, HashMap};

use super::vocab::{Vocab, RESERVED};
use crate::error::{Error, Result};

/// Pairs seen fewer times than this are never merged.
pub const MIN_PAIR_COUNT: u64 = 2;

fn is_reserved_word(w: &str) -> bool {
    RESERVED.contains(&w)
}

/// Learns a vocabulary of at most `cap` tokens. Deterministic in the corpus
/// contents: ties between equally frequent pairs go to the lexicographically
/// smallest pair.
pub fn train_vocab<I, S>(corpus: I, cap: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut docs = 0usize;
    for doc in corpus {
        docs += 1;
        for w in doc.as_ref().split_whitespace() {
            if !is_reserved_word(w) {
                *word_counts.entry(w.to_string()).or_default() += 1;
            }
        }
    }
    if docs == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut char_counts: BTreeMap<char, u64> = BTreeMap::new();
    for (w, &c) in &word_counts {
        for ch in w.chars() {
            *char_counts.entry(ch).or_default() += c;
        }
    }
    let mut chars: Vec<(char, u64)> = char_counts.into_iter().collect();
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    let mut known: HashMap<String, ()> = tokens.iter().map(|t| (t.clone(), ())).collect();
    for (ch, _) in chars {
        let s = ch.to_string();
        if known.insert(s.clone(), ()).is_none() {
            tokens.push(s);
        }
    }
    if tokens.len() > cap {
        return Err(Error::VocabCapTooSmall {
            cap,
            needed: tokens.len(),
        });
    }

    let mut words: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| (w.chars().map(|ch| ch.to_string()).collect(), c))
        .collect();

    while tokens.len() < cap {
        let mut pairs: HashMap<(&str, &str), u64> = HashMap::new();
        for (syms, c) in &words {
            for pair in syms.windows(2) {
                *pairs.entry((&pair[0], &pair[1])).or_default() += c;
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, c)| c >= MIN_PAIR_COUNT)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let (left, right) = (left.to_string(), right.to_string());
        let merged = format!("{left}{right}");
        for (syms, _) in &mut words {
            merge_pair(syms, &left, &right, &merged);
        }
        if known.insert(merged.clone(), ()).is_none() {
            tokens.push(merged);
        }
    }

    Vocab::from_tokens(tokens)
}

fn merge_pair(syms: &mut Vec<String>, left: &str, right: &str, merged: &str) {
    if syms.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(std::mem::take(&mut syms[i]));
            i += 1;
        }
    }
    *syms = out;
}
