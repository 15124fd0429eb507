//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling, with fold-in
//! Gibbs inference for unseen documents.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::TermFrequencyVector;
use crate::error::{Error, Result};

pub const DEFAULT_TOPIC_WORD_PRIOR: f64 = 0.01;
pub const DEFAULT_ITERS: usize = 500;

/// Fold-in sweeps per inference call and how many of them are discarded before averaging.
const INFER_SWEEPS: usize = 60;
const INFER_BURN_IN: usize = 20;

/// Mixed into the model seed so inference draws a stream distinct from fitting.
const INFER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// A point on the probability simplex over topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    pub const TOLERANCE: f64 = 1e-9;

    /// Validates non-negativity and unit sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("topic distribution has no entries".into()));
        }
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::Integrity("topic distribution has a negative or non-finite entry".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::Integrity(format!("topic distribution sums to {sum}")));
        }
        Ok(TopicDistribution(probs))
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0);
        TopicDistribution(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Self {
        TopicDistribution(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; the first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn l2_distance(&self, other: &TopicDistribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub iters: usize,
    /// Symmetric document-topic prior; `None` selects `50 / K`.
    pub doc_topic_prior: Option<f64>,
    pub topic_word_prior: f64,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(num_topics: usize, seed: u64) -> Self {
        LdaConfig {
            num_topics,
            iters: DEFAULT_ITERS,
            doc_topic_prior: None,
            topic_word_prior: DEFAULT_TOPIC_WORD_PRIOR,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.doc_topic_prior
            .unwrap_or(50.0 / self.num_topics.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    num_topics: usize,
    vocab_size: usize,
    /// Row-major `num_topics x vocab_size` word probabilities.
    topic_word: Vec<f64>,
    alpha: f64,
    beta: f64,
    seed: u64,
}

/// Fitted model plus the per-sweep joint log-likelihood `log p(w, z)`.
#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: LdaModel,
    pub log_likelihood: Vec<f64>,
}

struct GibbsState {
    k: usize,
    w: usize,
    alpha: f64,
    beta: f64,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    doc_len: Vec<u32>,
}

impl GibbsState {
    fn log_likelihood(&self) -> f64 {
        let lg = libm::lgamma;
        let (k, w) = (self.k as f64, self.w as f64);
        let mut ll = 0.0;
        // log p(w | z)
        for t in 0..self.k {
            ll += lg(w * self.beta) - lg(self.topic_total[t] as f64 + w * self.beta);
            for &c in &self.topic_word[t * self.w..(t + 1) * self.w] {
                if c > 0 {
                    ll += lg(c as f64 + self.beta) - lg(self.beta);
                }
            }
        }
        // log p(z)
        for (d, &len) in self.doc_len.iter().enumerate() {
            ll += lg(k * self.alpha) - lg(len as f64 + k * self.alpha);
            for &c in &self.doc_topic[d * self.k..(d + 1) * self.k] {
                if c > 0 {
                    ll += lg(c as f64 + self.alpha) - lg(self.alpha);
                }
            }
        }
        ll
    }
}

/// Draws an index proportional to `weights`, whose sum is `total`.
fn sample_index<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in weights.iter().enumerate() {
        u -= p;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

pub fn lda_fit(docs: &[TermFrequencyVector], vocab_size: usize, cfg: &LdaConfig) -> Result<LdaModel> {
    lda_fit_traced(docs, vocab_size, cfg).map(|f| f.model)
}

pub fn lda_fit_traced(docs: &[TermFrequencyVector], vocab_size: usize, cfg: &LdaConfig) -> Result<LdaFit> {
    let k = cfg.num_topics;
    if k == 0 {
        return Err(Error::Config("LDA needs at least one topic".into()));
    }
    if cfg.iters == 0 {
        return Err(Error::Config("LDA needs at least one sweep".into()));
    }
    if docs.is_empty() {
        return Err(Error::EmptyDataset("no documents for LDA".into()));
    }
    if k > vocab_size {
        return Err(Error::Config(format!(
            "{k} topics exceed the vocabulary size {vocab_size}"
        )));
    }
    let alpha = cfg.alpha();
    let beta = cfg.topic_word_prior;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Config("LDA priors must be positive".into()));
    }
    if let Some((w, _)) = docs.iter().flat_map(|d| d.iter()).find(|&(w, _)| w >= vocab_size) {
        return Err(Error::Shape(format!("word index {w} outside vocabulary of {vocab_size}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words: Vec<Vec<usize>> = docs.iter().map(|d| d.tokens().collect()).collect();
    let mut state = GibbsState {
        k,
        w: vocab_size,
        alpha,
        beta,
        doc_topic: vec![0; docs.len() * k],
        topic_word: vec![0; k * vocab_size],
        topic_total: vec![0; k],
        doc_len: words.iter().map(|d| d.len() as u32).collect(),
    };
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(words.len());
    for (d, doc) in words.iter().enumerate() {
        let z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
        for (&w, &t) in doc.iter().zip(&z) {
            state.doc_topic[d * k + t] += 1;
            state.topic_word[t * vocab_size + w] += 1;
            state.topic_total[t] += 1;
        }
        assignments.push(z);
    }

    let w_beta = vocab_size as f64 * beta;
    let mut weights = vec![0.0; k];
    let mut trace = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        for (d, doc) in words.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = assignments[d][i];
                state.doc_topic[d * k + old] -= 1;
                state.topic_word[old * vocab_size + w] -= 1;
                state.topic_total[old] -= 1;

                let mut total = 0.0;
                for (t, slot) in weights.iter_mut().enumerate() {
                    let p = (state.doc_topic[d * k + t] as f64 + alpha)
                        * (state.topic_word[t * vocab_size + w] as f64 + beta)
                        / (state.topic_total[t] as f64 + w_beta);
                    *slot = p;
                    total += p;
                }
                let new = sample_index(&mut rng, &weights, total);

                assignments[d][i] = new;
                state.doc_topic[d * k + new] += 1;
                state.topic_word[new * vocab_size + w] += 1;
                state.topic_total[new] += 1;
            }
        }
        trace.push(state.log_likelihood());
    }

    let mut topic_word = vec![0.0; k * vocab_size];
    for t in 0..k {
        let row = &mut topic_word[t * vocab_size..(t + 1) * vocab_size];
        let denom = state.topic_total[t] as f64 + w_beta;
        for (w, slot) in row.iter_mut().enumerate() {
            *slot = (state.topic_word[t * vocab_size + w] as f64 + beta) / denom;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }

    Ok(LdaFit {
        model: LdaModel {
            num_topics: k,
            vocab_size,
            topic_word,
            alpha,
            beta,
            seed: cfg.seed,
        },
        log_likelihood: trace,
    })
}

impl LdaModel {
    #[cfg(test)]
    pub(crate) fn uniform(num_topics: usize, vocab_size: usize) -> Self {
        LdaModel {
            num_topics,
            vocab_size,
            topic_word: vec![1.0 / vocab_size as f64; num_topics * vocab_size],
            alpha: 50.0 / num_topics as f64,
            beta: DEFAULT_TOPIC_WORD_PRIOR,
            seed: 0,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn topic(&self, t: usize) -> &[f64] {
        &self.topic_word[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    /// Fold-in inference with the topic-word matrix held fixed. Every call reseeds
    /// from the model seed, so equal documents always receive equal distributions.
    pub fn infer(&self, doc: &TermFrequencyVector) -> TopicDistribution {
        let k = self.num_topics;
        let words: Vec<usize> = doc.tokens().filter(|&w| w < self.vocab_size).collect();
        if words.is_empty() {
            return TopicDistribution::uniform(k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ INFER_STREAM);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k)).collect();
        for &t in &z {
            counts[t] += 1;
        }
        let mut acc = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for sweep in 0..INFER_SWEEPS {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for (t, slot) in weights.iter_mut().enumerate() {
                    let p = (counts[t] as f64 + self.alpha) * self.topic_word[t * self.vocab_size + w];
                    *slot = p;
                    total += p;
                }
                z[i] = sample_index(&mut rng, &weights, total);
                counts[z[i]] += 1;
            }
            if sweep >= INFER_BURN_IN {
                for (a, &c) in acc.iter_mut().zip(&counts) {
                    *a += c as f64 + self.alpha;
                }
            }
        }
        TopicDistribution::from_weights(acc)
    }

    /// CSV layout: a `K,W,alpha,beta,seed` header record, its values, then one row per topic.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_path(path.as_ref())?;
        w.write_record(["K", "W", "alpha", "beta", "seed"])?;
        w.write_record([
            self.num_topics.to_string(),
            self.vocab_size.to_string(),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.seed.to_string(),
        ])?;
        for t in 0..self.num_topics {
            w.write_record(self.topic(t).iter().map(|p| p.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)?;
        let bad = |line: usize, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_owned(),
        };
        let mut records = r.records();
        let header = records.next().ok_or_else(|| bad(2, "missing model header values"))??;
        let field = |i: usize| header.get(i).ok_or_else(|| bad(2, "short header"));
        let num_topics: usize = field(0)?.parse().map_err(|_| bad(2, "bad K"))?;
        let vocab_size: usize = field(1)?.parse().map_err(|_| bad(2, "bad W"))?;
        let alpha: f64 = field(2)?.parse().map_err(|_| bad(2, "bad alpha"))?;
        let beta: f64 = field(3)?.parse().map_err(|_| bad(2, "bad beta"))?;
        let seed: u64 = field(4)?.parse().map_err(|_| bad(2, "bad seed"))?;
        let mut topic_word = Vec::with_capacity(num_topics * vocab_size);
        for (t, rec) in records.enumerate() {
            let rec = rec?;
            if rec.len() != vocab_size {
                return Err(bad(t + 3, "topic row length differs from W"));
            }
            for v in rec.iter() {
                topic_word.push(v.parse().map_err(|_| bad(t + 3, "bad probability"))?);
            }
        }
        if topic_word.len() != num_topics * vocab_size {
            return Err(bad(num_topics + 2, "wrong number of topic rows"));
        }
        Ok(LdaModel {
            num_topics,
            vocab_size,
            topic_word,
            alpha,
            beta,
            seed,
        })
    }
}

pub fn lda_infer(model: &LdaModel, doc: &TermFrequencyVector) -> TopicDistribution {
    model.infer(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two topics over disjoint halves of a 10-word vocabulary.
    fn two_group_corpus(n_docs: usize, seed: u64) -> Vec<TermFrequencyVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_docs)
            .map(|d| {
                let base = if d % 2 == 0 { 0 } else { 5 };
                TermFrequencyVector::from_counts((0..20).map(|_| (base + rng.random_range(0..5), 1)))
            })
            .collect()
    }

    #[test]
    fn rejects_degenerate_configs() {
        let docs = two_group_corpus(4, 1);
        assert!(lda_fit(&docs, 10, &LdaConfig::new(11, 0)).is_err());
        assert!(lda_fit(&docs, 10, &LdaConfig::new(0, 0)).is_err());
        assert!(lda_fit(&[], 10, &LdaConfig::new(2, 0)).is_err());
        let mut cfg = LdaConfig::new(2, 0);
        cfg.iters = 0;
        assert!(lda_fit(&docs, 10, &cfg).is_err());
    }

    #[test]
    fn single_topic_is_smoothed_corpus_frequency() {
        let docs = two_group_corpus(10, 3);
        let mut cfg = LdaConfig::new(1, 5);
        cfg.iters = 3;
        let model = lda_fit(&docs, 12, &cfg).unwrap();
        let mut counts = [0u64; 12];
        for d in &docs {
            for (w, c) in d.iter() {
                counts[w] += c as u64;
            }
        }
        let total: u64 = counts.iter().sum();
        for (w, &c) in counts.iter().enumerate() {
            let expected = (c as f64 + 0.01) / (total as f64 + 12.0 * 0.01);
            assert!((model.topic(0)[w] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_document_infers_the_prior() {
        let docs = two_group_corpus(20, 4);
        let mut cfg = LdaConfig::new(3, 1);
        cfg.iters = 20;
        let model = lda_fit(&docs, 10, &cfg).unwrap();
        let theta = model.infer(&TermFrequencyVector::default());
        for &p in theta.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_are_distributions_and_inference_is_on_simplex() {
        let docs = two_group_corpus(30, 8);
        let mut cfg = LdaConfig::new(2, 9);
        cfg.iters = 50;
        let model = lda_fit(&docs, 10, &cfg).unwrap();
        for t in 0..2 {
            let s: f64 = model.topic(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(model.topic(t).iter().all(|&p| p > 0.0));
        }
        for d in &docs {
            let theta = model.infer(d);
            assert!(TopicDistribution::new(theta.probs().to_vec()).is_ok());
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let docs = two_group_corpus(30, 2);
        let mut cfg = LdaConfig::new(2, 77);
        cfg.iters = 40;
        let a = lda_fit(&docs, 10, &cfg).unwrap();
        let b = lda_fit(&docs, 10, &cfg).unwrap();
        assert!(a.topic_word.iter().zip(&b.topic_word).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.infer(&docs[0]), b.infer(&docs[0]));
    }

    #[test]
    fn log_likelihood_trends_upward() {
        let docs = two_group_corpus(60, 6);
        let mut cfg = LdaConfig::new(2, 6);
        cfg.iters = 100;
        let fit = lda_fit_traced(&docs, 10, &cfg).unwrap();
        let tenth = fit.log_likelihood.len() / 10;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let head = mean(&fit.log_likelihood[..tenth]);
        let tail = mean(&fit.log_likelihood[fit.log_likelihood.len() - tenth..]);
        assert!(tail >= head, "head {head} tail {tail}");
    }

    #[test]
    fn model_file_roundtrip_is_exact() {
        let docs = two_group_corpus(20, 10);
        let mut cfg = LdaConfig::new(2, 10);
        cfg.iters = 10;
        let model = lda_fit(&docs, 10, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lda.csv");
        model.save(&p).unwrap();
        assert_eq!(LdaModel::load(&p).unwrap(), model);
    }

    #[test]
    fn simplex_validation() {
        assert!(TopicDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(TopicDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(TopicDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(TopicDistribution::new(vec![]).is_err());
        assert_eq!(TopicDistribution::uniform(4).argmax(), 0);
    }
}
