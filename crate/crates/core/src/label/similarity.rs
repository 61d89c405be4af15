//! Text normalization and similarity measures used by the rule classifier.

use std::collections::BTreeSet;

/// Lowercases and collapses every whitespace run to one space.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// `1 - levenshtein / max_len` over whitespace-normalized, lowercased text.
/// Two empty strings are identical.
pub fn text_similarity(a: &str, b: &str) -> f64 {
    let a = normalize_whitespace(a);
    let b = normalize_whitespace(b);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(&a, &b) as f64 / longest as f64
}

/// Lowercased word tokens (`[A-Za-z0-9_]+`); curly apostrophes fold to `'`
/// and apostrophes stay inside words.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '_' || (ch == '\'' && !current.is_empty()) {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current).trim_end_matches('\'').to_string());
        }
    }
    if !current.is_empty() {
        out.push(current.trim_end_matches('\'').to_string());
    }
    out
}

/// Tokens re-joined with single spaces and padded, so that phrase lookups
/// with `contains_phrase` respect word boundaries.
pub fn phrase_text(text: &str) -> String {
    format!(" {} ", tokens(text).join(" "))
}

pub fn contains_phrase(padded: &str, phrase: &str) -> bool {
    let needle = phrase_text(phrase);
    !needle.trim().is_empty() && padded.contains(&needle)
}

/// Share of `followup`'s distinct content tokens (non-stopwords of two or
/// more characters) that also occur in `reference`. Zero when the follow-up
/// has no content tokens.
pub fn token_overlap(followup: &str, reference: &str, stopwords: &BTreeSet<String>) -> f64 {
    let content = |t: &str| -> BTreeSet<String> {
        tokens(t).into_iter().filter(|w| w.chars().count() > 1 && !stopwords.contains(w)).collect()
    };
    let asked = content(followup);
    if asked.is_empty() {
        return 0.0;
    }
    let known = content(reference);
    asked.intersection(&known).count() as f64 / asked.len() as f64
}

/// Bodies of fenced code blocks; the whole text when there are none.
pub fn code_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                blocks.push(body.join("\n"));
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    // An unterminated fence still counts as a block.
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    blocks.retain(|b| !b.trim().is_empty());
    if blocks.is_empty() && !text.trim().is_empty() {
        blocks.push(text.to_string());
    }
    blocks
}
