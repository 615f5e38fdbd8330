//! Token counting and normalization shared by the gateway mock and the
//! summarization budget check.
//!
//! The token proxy treats every CJK character as one token and every
//! whitespace-separated run of other characters as one token. Exact model
//! tokenization is not required anywhere; all budget checks use this proxy.

use std::collections::BTreeSet;

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF      // CJK unified ideographs
        | 0x3400..=0x4DBF    // extension A
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x3040..=0x30FF    // hiragana + katakana
        | 0xAC00..=0xD7AF    // hangul
    )
}

/// Count tokens: 1 per CJK character, 1 per whitespace-split word otherwise.
pub fn count_tokens(text: &str) -> usize {
    split_tokens(text).count()
}

/// First `budget` tokens of `text`, joined the way they appeared (CJK chars
/// concatenated, words space-separated).
pub fn truncate_tokens(text: &str, budget: usize) -> String {
    let mut out = String::new();
    for tok in split_tokens(text).take(budget) {
        match tok {
            Token::Cjk(c) => out.push(c),
            Token::Word(w) => {
                if !out.is_empty() && !out.ends_with(|c: char| is_cjk(c)) {
                    out.push(' ');
                }
                out.push_str(w);
            }
        }
    }
    out
}

enum Token<'a> {
    Cjk(char),
    Word(&'a str),
}

fn split_tokens(text: &str) -> impl Iterator<Item = Token<'_>> {
    let mut items = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word_start = None;
        for (i, c) in chunk.char_indices() {
            if is_cjk(c) {
                if let Some(s) = word_start.take() {
                    items.push(Token::Word(&chunk[s..i]));
                }
                items.push(Token::Cjk(c));
            } else if word_start.is_none() {
                word_start = Some(i);
            }
        }
        if let Some(s) = word_start {
            items.push(Token::Word(&chunk[s..]));
        }
    }
    items.into_iter()
}

/// Lowercased token set for similarity checks: CJK characters individually,
/// alphanumeric runs as words, everything else discarded.
pub fn normalized_token_set(text: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    let mut word = String::new();
    let flush = |word: &mut String, set: &mut BTreeSet<String>| {
        if !word.is_empty() {
            set.insert(std::mem::take(word));
        }
    };
    for c in text.chars() {
        if is_cjk(c) {
            flush(&mut word, &mut set);
            set.insert(c.to_string());
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, &mut set);
        }
    }
    flush(&mut word, &mut set);
    set
}

/// Jaccard similarity of the normalized token sets of two texts.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
