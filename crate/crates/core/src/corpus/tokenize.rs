use super::stopwords::is_stop_word;

/// Lowercased alphabetic tokens of at least two letters, split on every
/// non-letter, with English stop-words removed. Bytes are decoded lossily.
pub fn tokenize(raw: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(raw);
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .filter(|t| !is_stop_word(t))
        .collect()
}
