//! Token counting used for chunk budgets, prompt budgets and token-level
//! embeddings.
//!
//! The default tokenizer is model-agnostic: whitespace separates words, and
//! each word is further split so that every run of alphanumeric characters
//! is one token and every other character is a token of its own.

use std::ops::Range;

/// A token with its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// Splits text into tokens. Implementations must be deterministic, must never
/// produce a token containing whitespace, and must yield spans in increasing
/// order.
pub trait Tokenizer: Send + Sync {
    fn spans(&self, text: &str) -> Vec<TokenSpan>;

    fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }

    fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.spans(text).into_iter().map(|s| s.text(text)).collect()
    }

    /// Short identifier recorded in fingerprints and artifact metadata.
    fn name(&self) -> &str;
}

/// Whitespace-delimited words further split at punctuation.
#[derive(Debug, Default, Clone, Copy)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn spans(&self, text: &str) -> Vec<TokenSpan> {
        let mut out = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_alphanumeric() {
                if word_start.is_none() {
                    word_start = Some(i);
                }
                continue;
            }
            if let Some(s) = word_start.take() {
                out.push(TokenSpan { start: s, end: i });
            }
            if !c.is_whitespace() {
                out.push(TokenSpan {
                    start: i,
                    end: i + c.len_utf8(),
                });
            }
        }
        if let Some(s) = word_start {
            out.push(TokenSpan {
                start: s,
                end: text.len(),
            });
        }
        out
    }

    fn count(&self, text: &str) -> usize {
        // same walk as `spans` without allocating
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }

    fn name(&self) -> &str {
        "word-punct-v1"
    }
}
