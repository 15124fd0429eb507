//! Post text normalization: URL and punctuation stripping, digit filtering,
//! stopword removal and suffix-stripping stemming.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Upper bound on re-stemming passes; stems settle after one or two in practice.
const MAX_STEM_PASSES: usize = 8;

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|ftp://|www\.)\S*").expect("static regex"))
}

/// Text normalizer holding the stopword list and the stemmer.
pub struct Preprocessor {
    stopwords: HashSet<String>,
    stemmer: Stemmer,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("stopwords", &self.stopwords.len())
            .finish()
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::with_stopwords(DEFAULT_STOPWORDS.lines())
    }
}

impl Preprocessor {
    pub fn with_stopwords<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let stopwords = words
            .into_iter()
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .collect();
        Preprocessor {
            stopwords,
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    /// Loads a one-word-per-line stopword file.
    pub fn from_stopword_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::with_stopwords(text.lines()))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// Stems until the word stops changing so that preprocessing is idempotent.
    fn stem(&self, word: &str) -> String {
        let mut current = word.to_owned();
        for _ in 0..MAX_STEM_PASSES {
            let next = self.stemmer.stem(&current).into_owned();
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    pub fn preprocess(&self, raw: &str) -> Vec<String> {
        let lowered = raw.to_lowercase();
        let without_urls = url_pattern().replace_all(&lowered, " ");
        without_urls
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .filter(|w| !w.chars().any(|c| c.is_numeric()))
            .filter(|w| !self.is_stopword(w))
            .map(|w| self.stem(w))
            .filter(|w| !w.is_empty() && !self.is_stopword(w))
            .collect()
    }
}

/// Preprocesses with the bundled English stopword list.
pub fn preprocess(raw: &str) -> Vec<String> {
    static DEFAULT: OnceLock<Preprocessor> = OnceLock::new();
    DEFAULT.get_or_init(Preprocessor::default).preprocess(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_urls_and_punctuation() {
        assert_eq!(preprocess("Check http://x.io NOW!!"), vec!["check"]);
        assert_eq!(preprocess("see www.example.com/page?q=1 later"), vec!["see", "later"]);
    }

    #[test]
    fn all_stopwords_yield_nothing() {
        assert!(preprocess("the and a").is_empty());
        assert!(preprocess("").is_empty());
        assert!(preprocess("don't won't").is_empty());
    }

    #[test]
    fn digit_words_removed_and_inflections_stemmed() {
        assert_eq!(preprocess("running runs ran2"), vec!["run", "run"]);
        assert_eq!(preprocess("Sorting 3way quick-sort"), vec!["sort", "quick", "sort"]);
    }

    #[test]
    fn bundled_list_size() {
        assert_eq!(Preprocessor::default().stopwords.len(), 179);
    }

    #[test]
    fn custom_stopword_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "# comment\nfoo\nBar\n").unwrap();
        let pre = Preprocessor::from_stopword_file(&path).unwrap();
        assert_eq!(pre.preprocess("foo bar the baz"), vec!["the", "baz"]);
    }

    proptest! {
        #[test]
        fn idempotent(raw in "[a-zA-Z0-9 .,!?'/:-]{0,80}") {
            let once = preprocess(&raw);
            let twice = preprocess(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn idempotent_on_english_like_words(words in proptest::collection::vec("(agreed|generalization|conditional|relational|happily|flies|sorted|hashing|ponies|caresses|abilities|cried|ran|graphs|trees)", 0..12)) {
            let raw = words.join(" ");
            let once = preprocess(&raw);
            prop_assert_eq!(preprocess(&once.join(" ")), once);
        }
    }
}
