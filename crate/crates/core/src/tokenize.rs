//! Deterministic, locale-independent tokenization shared by the entropy
//! model and the embedder: lowercase, split on anything that is not
//! `[a-z0-9_]`. Punctuation separates tokens, underscores do not.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_alphanumeric() || ch == '_' {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}
