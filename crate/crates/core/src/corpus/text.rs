//! Tokenization shared by layering, keyphrase extraction and the stub scorers.

/// Lower-cased tokens split on whitespace and punctuation. `#`, `_` and
/// apostrophes are kept as token characters so hashtags and possessives stay
/// intact; leading/trailing apostrophes are trimmed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '#' || c == '_' || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Normal form used to compare keyphrases: tokens joined by single spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    tokenize(phrase).join(" ")
}
