use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::ingest::Document;

/// A sentence of a document. `start` is a character offset into the document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub start: usize,
    pub text: String,
}

/// Default abbreviations that never end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "et al.", "al.", "etc.", "vs.", "cf.", "Dr.", "Prof.", "Mr.", "Ms.", "Fig.", "Sec.", "No.",
];

/// Splits at `.`, `!` or `?` followed by whitespace and an uppercase letter,
/// or by the end of the text. A period closing a word listed in
/// `abbreviations` never splits.
pub fn split_sentences(doc: &Document, abbreviations: &HashSet<String>) -> Vec<Sentence> {
    let chars: Vec<char> = doc.text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut seg_start = 0;
    let push = |from: usize, to: usize, out: &mut Vec<Sentence>| {
        let lead = chars[from..to].iter().take_while(|c| c.is_whitespace()).count();
        let trail = chars[from..to].iter().rev().take_while(|c| c.is_whitespace()).count();
        if lead + trail < to - from {
            out.push(Sentence {
                doc_id: doc.doc_id.clone(),
                start: from + lead,
                text: chars[from + lead..to - trail].iter().collect(),
            });
        }
    };

    for i in 0..n {
        if !matches!(chars[i], '.' | '!' | '?') {
            continue;
        }
        let mut k = i + 1;
        let at_end = k == n;
        if !at_end {
            if !chars[k].is_whitespace() {
                continue;
            }
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            if k < n && !chars[k].is_uppercase() {
                continue;
            }
        }
        if chars[i] == '.' && !abbreviations.is_empty() {
            let word_start = chars[..i].iter().rposition(|c| c.is_whitespace()).map_or(0, |p| p + 1);
            let word: String = chars[word_start..=i].iter().collect();
            // multi-word abbreviations such as "et al." are matched on their suffix
            if abbreviations
                .iter()
                .any(|a| a == &word || (a.contains(' ') && ends_with_words(&chars[..=i], a)))
            {
                continue;
            }
        }
        push(seg_start, i + 1, &mut out);
        seg_start = i + 1;
    }
    if seg_start < n {
        push(seg_start, n, &mut out);
    }
    out
}

fn ends_with_words(chars: &[char], phrase: &str) -> bool {
    let phrase: Vec<char> = phrase.chars().collect();
    if chars.len() < phrase.len() || chars[chars.len() - phrase.len()..] != phrase[..] {
        return false;
    }
    let before = chars.len() - phrase.len();
    before == 0 || chars[before - 1].is_whitespace()
}
