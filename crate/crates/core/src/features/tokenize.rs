use std::collections::HashSet;
use std::sync::OnceLock;

use unicode_general_category::{get_general_category, GeneralCategory};

/// The bundled English stopword list (179 words, one per line).
pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Lowercases and deletes punctuation.
fn normalize_text(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|&c| !is_punctuation(c))
        .collect()
}

/// Caption tokenizer: lowercase, strip Unicode punctuation, split on
/// whitespace, drop stopwords.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::with_stopwords(BUNDLED_STOPWORDS.lines())
    }
}

impl Tokenizer {
    /// Stopwords go through the same normalization as captions, so `don't`
    /// in the list also removes `dont`.
    pub fn with_stopwords<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let stopwords = words
            .into_iter()
            .map(normalize_text)
            .map(|w| w.trim().to_string())
            .filter(|w| !w.is_empty())
            .collect();
        Self { stopwords }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }

    pub fn tokenize(&self, caption: &str) -> Vec<String> {
        normalize_text(caption)
            .split_whitespace()
            .filter(|t| !self.is_stopword(t))
            .map(str::to_string)
            .collect()
    }
}

pub(crate) fn default_tokenizer() -> &'static Tokenizer {
    static DEFAULT: OnceLock<Tokenizer> = OnceLock::new();
    DEFAULT.get_or_init(Tokenizer::default)
}

/// Tokenizes with the bundled stopword list.
pub fn tokenize(caption: &str) -> Vec<String> {
    default_tokenizer().tokenize(caption)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_list_size() {
        assert_eq!(BUNDLED_STOPWORDS.lines().count(), 179);
    }

    #[test]
    fn examples() {
        assert_eq!(
            tokenize("A soldier hugging a child."),
            ["soldier", "hugging", "child"]
        );
        assert!(tokenize("").is_empty());
        assert!(tokenize("The THE the!!!").is_empty());
    }

    #[test]
    fn unicode_punctuation_and_contractions() {
        assert_eq!(
            tokenize("«Police» — saluting… ¿crashed?"),
            ["police", "saluting", "crashed"]
        );
        assert!(tokenize("Don't, WON'T").is_empty());
        assert_eq!(tokenize("Café\tnaïve\nÉCOLE"), ["café", "naïve", "école"]);
        // Symbols are not punctuation.
        assert_eq!(tokenize("$5 +1"), ["$5", "+1"]);
    }
}
