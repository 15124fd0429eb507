use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: usize = 10;

/// Dense word index built from corpus frequencies. Indices follow lexicographic word order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_sorted(entries: Vec<(String, usize)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        let (words, counts) = entries.into_iter().unzip();
        Vocabulary {
            words,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn count(&self, index: usize) -> usize {
        self.counts[index]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Writes `word<TAB>count` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: message.to_owned(),
            };
            let (w, c) = line.split_once('\t').ok_or_else(|| parse_err("expected word<TAB>count"))?;
            let c = c.parse().map_err(|_| parse_err("count is not an integer"))?;
            entries.push((w.to_owned(), c));
        }
        if entries.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(Error::Integrity(format!("{}: words not strictly sorted", path.display())));
        }
        Ok(Self::from_sorted(entries))
    }
}

/// Keeps exactly the tokens whose total corpus frequency is at least `min_count`.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyDataset("no documents to build a vocabulary from".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in docs.iter().flatten() {
        *counts.entry(token.as_ref()).or_default() += 1;
    }
    let entries: Vec<_> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_owned(), c))
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    Ok(Vocabulary::from_sorted(entries))
}

/// Sparse bag of words over a vocabulary, ordered by word index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermFrequencyVector {
    entries: BTreeMap<usize, u32>,
}

impl TermFrequencyVector {
    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut entries = BTreeMap::new();
        for (w, c) in counts {
            if c > 0 {
                *entries.entry(w).or_insert(0) += c;
            }
        }
        TermFrequencyVector { entries }
    }

    pub fn get(&self, word: usize) -> u32 {
        self.entries.get(&word).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().map(|(&w, &c)| (w, c))
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| c as u64).sum()
    }

    /// Expands to a token sequence (word indices repeated by count).
    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .flat_map(|(&w, &c)| std::iter::repeat_n(w, c as usize))
    }
}

pub fn term_frequency<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TermFrequencyVector {
    let mut entries = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *entries.entry(i).or_insert(0u32) += 1;
        }
    }
    TermFrequencyVector { entries }
}
