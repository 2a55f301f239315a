//! Cleaning rules applied to every document before tokenization, in a fixed
//! order: strip URLs (scheme-prefixed and bare `t.co/...` shortlinks), strip
//! @mentions, strip digit characters, strip punctuation and symbols
//! (including emoji), lowercase, collapse whitespace. No stemming, stopword
//! removal, or slang normalization. URL removal runs first so that link
//! fragments cannot survive the digit and punctuation passes.

use regex::Regex;
use std::sync::OnceLock;

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:[a-z][a-z0-9+.-]*://\S+|t\.co/\S+)").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

/// Applies the cleaning rules. Idempotent; empty output is permitted.
pub fn clean(text: &str) -> String {
    let no_urls = url_re().replace_all(text, " ");
    let no_mentions = mention_re().replace_all(&no_urls, " ");
    let kept: String = no_mentions
        .chars()
        .filter(|c| !c.is_numeric())
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    let lowered = kept.to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits cleaned text on runs of whitespace; never yields empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
