//! Unicode-aware lowercase word segmentation.
//!
//! No stemming, no stop-word removal. Index, query, and every oracle must
//! tokenize identically, so this is the single tokenizer in the crate.

/// Splits `text` into lowercase alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
