//! Post text features: preprocessing, vocabulary, LDA topics for posts and course weeks.

mod lda;
mod preprocess;
mod vocab;

use std::collections::BTreeMap;
use std::path::Path;

pub use lda::{
    lda_fit, lda_fit_traced, lda_infer, LdaConfig, LdaFit, LdaModel, TopicDistribution, DEFAULT_ITERS,
    DEFAULT_TOPIC_WORD_PRIOR,
};
pub use preprocess::{preprocess, Preprocessor};
pub use vocab::{build_vocabulary, term_frequency, TermFrequencyVector, Vocabulary, DEFAULT_MIN_COUNT};

use crate::corpus::{CourseSchedule, Dataset};
use crate::error::{Error, Result};

/// One distribution per course week, inferred with `model` from the week's document.
pub fn course_topics(
    schedule: &CourseSchedule,
    model: &LdaModel,
    vocab: &Vocabulary,
) -> Result<Vec<TopicDistribution>> {
    schedule
        .week_docs()
        .iter()
        .enumerate()
        .map(|(week, doc)| {
            let tf = term_frequency(doc, vocab);
            if tf.is_empty() {
                return Err(Error::EmptyWeekDocument { week });
            }
            Ok(model.infer(&tf))
        })
        .collect()
}

/// Index of the course week whose distribution is L2-nearest to `theta`; first on ties.
pub fn assign_course_topic(theta: &TopicDistribution, course: &[TopicDistribution]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, week) in course.iter().enumerate() {
        let d = theta.l2_distance(week);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicConfig {
    /// Defaults to the number of course weeks.
    pub num_topics: Option<usize>,
    pub iters: usize,
    pub doc_topic_prior: Option<f64>,
    pub topic_word_prior: f64,
    pub min_count: usize,
    pub seed: u64,
    /// Fit course-week topics with their own LDA instead of the joint post+week model.
    pub separate_course_model: bool,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            num_topics: None,
            iters: DEFAULT_ITERS,
            doc_topic_prior: None,
            topic_word_prior: DEFAULT_TOPIC_WORD_PRIOR,
            min_count: DEFAULT_MIN_COUNT,
            seed: 0,
            separate_course_model: false,
        }
    }
}

/// Everything the recommender needs from the text side.
#[derive(Debug, Clone)]
pub struct TopicArtifacts {
    pub vocab: Vocabulary,
    pub model: LdaModel,
    pub course_thetas: Vec<TopicDistribution>,
    /// Topic distribution of every post in the dataset, keyed by post id.
    pub post_thetas: BTreeMap<u64, TopicDistribution>,
}

impl TopicArtifacts {
    pub fn num_topics(&self) -> usize {
        self.model.num_topics()
    }

    pub fn theta(&self, post_id: u64) -> Option<&TopicDistribution> {
        self.post_thetas.get(&post_id)
    }
}

/// Builds the vocabulary and LDA model from posts before `train_end` plus the course
/// week documents, then infers topics for every post and every week.
pub fn fit_topics(ds: &Dataset, train_end: f64, cfg: &TopicConfig) -> Result<TopicArtifacts> {
    let course = ds.course();
    let train_docs: Vec<&Vec<String>> = ds
        .events()
        .iter()
        .filter(|e| e.timestamp < train_end)
        .map(|e| &e.tokens)
        .collect();
    if train_docs.is_empty() {
        return Err(Error::EmptyDataset(format!("no posts before {train_end} to fit topics on")));
    }
    let corpus: Vec<Vec<String>> = train_docs
        .iter()
        .map(|d| (*d).clone())
        .chain(course.week_docs().iter().cloned())
        .collect();
    let vocab = build_vocabulary(&corpus, cfg.min_count)?;
    let num_topics = cfg.num_topics.unwrap_or(course.num_weeks());
    let lda_cfg = LdaConfig {
        num_topics,
        iters: cfg.iters,
        doc_topic_prior: cfg.doc_topic_prior,
        topic_word_prior: cfg.topic_word_prior,
        seed: cfg.seed,
    };

    let week_tfs: Vec<TermFrequencyVector> = course.week_docs().iter().map(|d| term_frequency(d, &vocab)).collect();
    let train_tfs = train_docs.iter().map(|d| term_frequency(d, &vocab));
    let (model, course_thetas) = if cfg.separate_course_model {
        let model = lda_fit(&train_tfs.collect::<Vec<_>>(), vocab.len(), &lda_cfg)?;
        let course_model = lda_fit(&week_tfs, vocab.len(), &lda_cfg)?;
        let thetas = course_topics(course, &course_model, &vocab)?;
        (model, thetas)
    } else {
        let docs: Vec<_> = train_tfs.chain(week_tfs.iter().cloned()).collect();
        let model = lda_fit(&docs, vocab.len(), &lda_cfg)?;
        let thetas = course_topics(course, &model, &vocab)?;
        (model, thetas)
    };

    let post_thetas = ds
        .events()
        .iter()
        .map(|e| (e.post_id, model.infer(&term_frequency(&e.tokens, &vocab))))
        .collect();
    Ok(TopicArtifacts {
        vocab,
        model,
        course_thetas,
        post_thetas,
    })
}

/// CSV with one `key, p_0, .., p_{K-1}` row per distribution.
pub fn write_distributions<'a>(
    rows: impl IntoIterator<Item = (String, &'a TopicDistribution)>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path.as_ref())?;
    for (key, dist) in rows {
        w.write_record(std::iter::once(key).chain(dist.probs().iter().map(|p| p.to_string())))?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_distributions(path: impl AsRef<Path>) -> Result<Vec<(String, TopicDistribution)>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let key = rec.get(0).ok_or_else(|| bad("empty row".into()))?.to_owned();
        let probs = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let dist = TopicDistribution::new(probs).map_err(|e| bad(e.to_string()))?;
        out.push((key, dist));
    }
    Ok(out)
}

impl TopicArtifacts {
    /// Writes `lda_model.csv`, `vocab.tsv`, `course_topics.csv` and `post_topics.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.model.save(dir.join("lda_model.csv"))?;
        self.vocab.save(dir.join("vocab.tsv"))?;
        write_distributions(
            self.course_thetas.iter().enumerate().map(|(i, d)| (i.to_string(), d)),
            dir.join("course_topics.csv"),
        )?;
        write_distributions(
            self.post_thetas.iter().map(|(id, d)| (id.to_string(), d)),
            dir.join("post_topics.csv"),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let model = LdaModel::load(dir.join("lda_model.csv"))?;
        let vocab = Vocabulary::load(dir.join("vocab.tsv"))?;
        let course_thetas = read_distributions(dir.join("course_topics.csv"))?
            .into_iter()
            .map(|(_, d)| d)
            .collect();
        let post_path = dir.join("post_topics.csv");
        let post_thetas = read_distributions(&post_path)?
            .into_iter()
            .map(|(k, d)| {
                k.parse::<u64>()
                    .map(|id| (id, d))
                    .map_err(|e| Error::Parse {
                        path: post_path.clone(),
                        line: 0,
                        message: format!("post id {k}: {e}"),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(TopicArtifacts {
            vocab,
            model,
            course_thetas,
            post_thetas,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> TopicDistribution {
        TopicDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn nearest_week_with_first_index_tiebreak() {
        let weeks = [dist(&[1.0, 0.0]), dist(&[0.0, 1.0]), dist(&[0.5, 0.5])];
        assert_eq!(assign_course_topic(&dist(&[0.0, 1.0]), &weeks), 1);
        assert_eq!(assign_course_topic(&dist(&[0.5, 0.5]), &weeks[..2]), 0);
        assert_eq!(assign_course_topic(&dist(&[0.6, 0.4]), &weeks), 2);
    }

    #[test]
    fn empty_week_is_named() {
        let vocab = build_vocabulary(&[vec!["sort"]], 1).unwrap();
        let docs = vec![TermFrequencyVector::from_counts([(0, 3)])];
        let mut cfg = LdaConfig::new(1, 0);
        cfg.iters = 2;
        let model = lda_fit(&docs, 1, &cfg).unwrap();
        let schedule = CourseSchedule::new(
            vec![vec!["sort".into()], vec!["graph".into()]],
            vec![0.0, 10.0],
        )
        .unwrap();
        assert!(matches!(
            course_topics(&schedule, &model, &vocab).unwrap_err(),
            Error::EmptyWeekDocument { week: 1 }
        ));
        let one = CourseSchedule::new(vec![vec!["sort".into()]], vec![0.0]).unwrap();
        let thetas = course_topics(&one, &model, &vocab).unwrap();
        assert_eq!(thetas.len(), 1);
        assert_eq!(thetas[0], model.infer(&docs[0]));
    }
}
