//! Canonical tokenizer shared by every text metric.
//!
//! Text is casefolded, split on whitespace, and every character that is
//! neither alphanumeric nor whitespace becomes a token of its own. The
//! rule is deliberately simple so that every metric sees the same tokens.

use std::fmt;
use std::ops::Deref;

/// Ordered lowercase tokens produced by [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Copy with every all-punctuation token removed.
    pub fn without_punctuation(&self) -> TokenSeq {
        TokenSeq(
            self.0
                .iter()
                .filter(|t| !t.chars().all(is_punctuation))
                .cloned()
                .collect(),
        )
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Anything that is not a letter, digit or whitespace.
pub fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if is_punctuation(c) {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_string());
        } else {
            current.extend(c.to_lowercase());
        }
    }
    flush(&mut current, &mut tokens);
    TokenSeq(tokens)
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
