//! Lexical highlighting: the sentence sharing the most query tokens.

use std::collections::BTreeSet;

use super::fuzzy::{fuzzy_resolve, DEFAULT_FUZZY_THRESHOLD};
use crate::featurizer::tokenize;
use crate::model::Span;

struct Sentence<'t> {
    span: Span,
    text: &'t str,
}

/// Sentences end at `.`, `?` or `!` (inclusive) or at a line break;
/// surrounding whitespace is trimmed. Spans are in chars.
fn sentences(text: &str) -> Vec<Sentence<'_>> {
    let mut out = Vec::new();
    let mut push = |start_byte: usize, end_byte: usize, start_char: usize| {
        let raw = &text[start_byte..end_byte];
        let lead = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return;
        }
        let start = start_char + raw[..lead].chars().count();
        out.push(Sentence {
            span: Span {
                start,
                end: start + trimmed.chars().count(),
            },
            text: trimmed,
        });
    };
    let mut start_byte = 0;
    let mut start_char = 0;
    for (char_pos, (byte_pos, c)) in text.char_indices().enumerate() {
        if matches!(c, '.' | '?' | '!' | '\n') {
            let end_byte = byte_pos + c.len_utf8();
            push(start_byte, end_byte, start_char);
            start_byte = end_byte;
            start_char = char_pos + 1;
        }
    }
    if start_byte < text.len() {
        push(start_byte, text.len(), start_char);
    }
    out
}

pub fn sentence_spans(text: &str) -> Vec<Span> {
    sentences(text).into_iter().map(|s| s.span).collect()
}

fn sentence_score(distinct_query: &BTreeSet<&str>, sentence: &str) -> usize {
    let vocab: BTreeSet<String> = tokenize(sentence).into_iter().collect();
    distinct_query
        .iter()
        .filter(|q| {
            fuzzy_resolve(q, vocab.iter().map(String::as_str), DEFAULT_FUZZY_THRESHOLD).is_some()
        })
        .count()
}

fn best<'t>(query_tokens: &[String], text: &'t str) -> Option<(usize, Sentence<'t>)> {
    let distinct: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
    let mut best: Option<(usize, Sentence<'t>)> = None;
    for s in sentences(text) {
        let score = sentence_score(&distinct, s.text);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, s));
        }
    }
    best
}

/// Span of the highest-scoring sentence (earliest on ties), or nothing when
/// no sentence shares a token with the query.
pub fn highlight_span(query_tokens: &[String], answer_text: &str) -> Vec<Span> {
    match best(query_tokens, answer_text) {
        Some((score, s)) if score > 0 => vec![s.span],
        _ => Vec::new(),
    }
}

/// Best sentence text, falling back to the first sentence.
pub(crate) fn best_sentence<'t>(query_tokens: &[String], text: &'t str) -> &'t str {
    match best(query_tokens, text) {
        Some((_, s)) => s.text,
        None => text.trim(),
    }
}
