use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use super::tokenize::default_tokenizer;
use super::FeatureError;

/// Bag-of-Words columns: tokens in descending corpus frequency, ties in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
    corpus_label: String,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_count: usize, corpus_label: String) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            index,
            min_count,
            corpus_label,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn corpus_label(&self) -> &str {
        &self.corpus_label
    }

    pub fn with_corpus_label(mut self, label: impl Into<String>) -> Self {
        self.corpus_label = label.into();
        self
    }
}

/// Counts tokens over `corpus` and keeps those seen at least `min_count`
/// times. Stopwords are never admitted, even if the token lists contain them.
pub fn build_vocabulary<S: AsRef<str>>(
    corpus: &[Vec<S>],
    min_count: usize,
) -> Result<Vocabulary, FeatureError> {
    if min_count == 0 {
        return Err(FeatureError::BadMinCount);
    }
    let tokenizer = default_tokenizer();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for t in doc {
            let t = t.as_ref();
            if !t.is_empty() && !tokenizer.is_stopword(t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(FeatureError::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = kept.into_iter().map(|(t, _)| t.to_string()).collect();
    Ok(Vocabulary::from_tokens(tokens, min_count, String::new()))
}

/// Writes `# min_count=<k> corpus=<label>` then one token per line.
pub fn write_vocabulary(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let mut out = format!("# min_count={} corpus={}\n", vocab.min_count, vocab.corpus_label);
    for t in &vocab.tokens {
        out.push_str(t);
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, FeatureError> {
    let path = path.as_ref();
    let malformed = |detail: &str| FeatureError::MalformedVocabulary {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix("# min_count="))
        .ok_or_else(|| malformed("missing `# min_count=` header"))?;
    let (count, label) = header.split_once(" corpus=").unwrap_or((header, ""));
    let min_count: usize = count.trim().parse().map_err(|_| malformed("bad min_count"))?;
    let tokens: Vec<String> = lines.map(str::to_string).collect();
    let vocab = Vocabulary::from_tokens(tokens, min_count, label.to_string());
    if vocab.index.len() != vocab.tokens.len() {
        return Err(malformed("duplicate token"));
    }
    if vocab
        .tokens
        .iter()
        .any(|t| t.is_empty() || t.chars().any(char::is_whitespace))
    {
        return Err(malformed("empty or whitespace-containing token"));
    }
    if vocab.is_empty() {
        return Err(FeatureError::EmptyVocabulary { min_count });
    }
    Ok(vocab)
}
