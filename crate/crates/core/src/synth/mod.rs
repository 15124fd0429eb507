//! Seeded synthetic forum with known latent structure: drifting student interests,
//! topical threads that open and age, revisits, replies and topic-model text.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, write_schedule, CourseSchedule, Dataset, PostEvent, SECONDS_PER_DAY, SECONDS_PER_WEEK};
use crate::error::{Error, Result};
use crate::text::Preprocessor;

/// Concentration of the per-topic word distributions.
pub const WORD_PRIOR: f64 = 0.05;
const INTEREST_PRIOR: f64 = 0.3;
const MIXTURE_PRIOR: f64 = 0.2;
/// Weight of the student's own earlier posts when picking a reply parent.
const OWN_PARENT_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_students: usize,
    pub num_threads: usize,
    pub num_weeks: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    pub mean_posts_per_student: usize,
    /// Per-week pull of each student's interests towards the week's scheduled topic.
    pub drift_strength: f64,
    pub reply_prob: f64,
    /// Extra weight `1 + revisit_boost` on threads the student already posted on.
    pub revisit_boost: f64,
    /// E-folding time of a thread's attractiveness after it opens; 0 disables aging.
    pub thread_lifetime_days: f64,
    /// Log-scale spread of the heavy-tailed per-thread appeal; 0 makes threads equally appealing.
    pub thread_appeal_spread: f64,
    /// Extra pull back to a thread per reply the student received there since last posting.
    pub reply_excitation: f64,
    /// A reply's pull decays with its delay after the student's post, on this time scale.
    pub excitation_days: f64,
    pub words_per_post: usize,
    pub words_per_week: usize,
    /// Unix time of the first course week.
    pub course_start: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::algo_like(0.1)
    }
}

impl SynthConfig {
    /// A course the size of a mid-sized algorithms MOOC (1833 students, 1323 threads,
    /// about 9.3k posts over 9 weeks), multiplied by `scale`.
    pub fn algo_like(scale: f64) -> Self {
        let scaled = |x: f64| ((x * scale).round() as usize).max(1);
        SynthConfig {
            num_students: scaled(1833.0),
            num_threads: scaled(1323.0),
            num_weeks: 9,
            num_topics: 9,
            vocab_size: 600,
            mean_posts_per_student: 5,
            drift_strength: 0.35,
            reply_prob: 0.4,
            revisit_boost: 4.0,
            thread_lifetime_days: 20.0,
            thread_appeal_spread: 1.5,
            reply_excitation: 20.0,
            excitation_days: 2.0,
            words_per_post: 30,
            words_per_week: 400,
            course_start: 1_600_000_000.0,
            seed: 0,
        }
    }

    pub fn preset(name: &str, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        match name {
            "algo-like" => Ok(Self::algo_like(scale)),
            other => Err(Error::Config(format!("unknown preset `{other}` (algo-like)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_students", self.num_students),
            ("num_threads", self.num_threads),
            ("num_weeks", self.num_weeks),
            ("num_topics", self.num_topics),
            ("vocab_size", self.vocab_size),
            ("mean_posts_per_student", self.mean_posts_per_student),
            ("words_per_post", self.words_per_post),
            ("words_per_week", self.words_per_week),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < self.num_topics {
            return Err(Error::Config(format!(
                "vocab_size {} is smaller than num_topics {}",
                self.vocab_size, self.num_topics
            )));
        }
        for (name, p) in [("drift_strength", self.drift_strength), ("reply_prob", self.reply_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("revisit_boost", self.revisit_boost),
            ("thread_lifetime_days", self.thread_lifetime_days),
            ("thread_appeal_spread", self.thread_appeal_spread),
            ("reply_excitation", self.reply_excitation),
            ("excitation_days", self.excitation_days),
            ("course_start", self.course_start),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn total_posts(&self) -> usize {
        self.num_students * self.mean_posts_per_student
    }

    pub fn course_end(&self) -> f64 {
        self.course_start + self.num_weeks as f64 * SECONDS_PER_WEEK
    }
}

/// The latent quantities the data was drawn from, keyed by external id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Scheduled topic of each week.
    pub week_topics: Vec<usize>,
    /// Per student, one interest distribution per week.
    pub student_interests: BTreeMap<String, Vec<Vec<f64>>>,
    pub thread_mixtures: BTreeMap<String, Vec<f64>>,
    pub thread_open_times: BTreeMap<String, f64>,
    /// Topic that produced each post, keyed by post id.
    pub post_topics: BTreeMap<u64, usize>,
    /// Row-major `num_topics x vocab_size` word distributions.
    pub topic_words: Vec<Vec<f64>>,
    pub vocabulary: Vec<String>,
}

impl GroundTruth {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

pub const POSTS_FILE: &str = "posts.jsonl";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const TRUTH_FILE: &str = "ground_truth.json";

impl Synthetic {
    /// Writes `posts.jsonl`, `schedule.json` and `ground_truth.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&self.dataset, dir.join(POSTS_FILE))?;
        write_schedule(self.dataset.course(), dir.join(SCHEDULE_FILE))?;
        self.truth.write_json(dir.join(TRUTH_FILE))
    }
}

fn dirichlet<R: Rng>(rng: &mut R, concentration: f64, len: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    loop {
        let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `count` distinct alphabetic pseudo-words that preprocessing maps to themselves.
pub fn pseudo_words<R: Rng>(count: usize, rng: &mut R) -> Vec<String> {
    const ONSETS: &[u8] = b"bdfgklmnprtvz";
    const VOWELS: &[u8] = b"aiou";
    const CODAS: &[u8] = b"bdgkmnprtz";
    let pre = Preprocessor::default();
    let mut out = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    while out.len() < count {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*ONSETS.choose(rng).expect("non-empty") as char);
            w.push(*VOWELS.choose(rng).expect("non-empty") as char);
        }
        w.push(*CODAS.choose(rng).expect("non-empty") as char);
        if seen.contains(&w) {
            continue;
        }
        if pre.preprocess(&w) == [w.as_str()] {
            seen.insert(w.clone());
            out.push(w);
        }
    }
    out
}

fn sample_words<R: Rng>(rng: &mut R, topic_mix: &[f64], word_dists: &[WeightedIndex<f64>], vocab: &[String], n: usize) -> Vec<String> {
    let topics = WeightedIndex::new(topic_mix).expect("valid mixture");
    (0..n)
        .map(|_| vocab[word_dists[topics.sample(rng)].sample(rng)].clone())
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (k, weeks) = (cfg.num_topics, cfg.num_weeks);

    let vocabulary = pseudo_words(cfg.vocab_size, &mut rng);
    let topic_words: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut rng, WORD_PRIOR, cfg.vocab_size)).collect();
    let word_dists: Vec<WeightedIndex<f64>> = topic_words
        .iter()
        .map(|w| WeightedIndex::new(w).expect("valid word distribution"))
        .collect();
    let week_topics: Vec<usize> = (0..weeks).map(|w| w % k).collect();
    let onehot = |t: usize| (0..k).map(|i| if i == t { 1.0 } else { 0.0 }).collect::<Vec<f64>>();

    let activity = LogNormal::new(0.0, 1.0).expect("valid lognormal");
    let students: Vec<(Vec<Vec<f64>>, f64)> = (0..cfg.num_students)
        .map(|_| {
            let mut interest = dirichlet(&mut rng, INTEREST_PRIOR, k);
            let mut by_week = Vec::with_capacity(weeks);
            for &topic in &week_topics {
                let focus = onehot(topic);
                interest = normalized(
                    interest
                        .iter()
                        .zip(&focus)
                        .map(|(&a, &f)| (1.0 - cfg.drift_strength) * a + cfg.drift_strength * f)
                        .collect(),
                );
                by_week.push(interest.clone());
            }
            (by_week, activity.sample(&mut rng))
        })
        .collect();

    let duration = weeks as f64 * SECONDS_PER_WEEK;
    let appeal = LogNormal::new(0.0, cfg.thread_appeal_spread).expect("valid lognormal");
    let mut threads: Vec<(Vec<f64>, f64, f64)> = (0..cfg.num_threads)
        .map(|i| {
            let open = if i == 0 { 0.0 } else { rng.random_range(0.0..duration) };
            (dirichlet(&mut rng, MIXTURE_PRIOR, k), open, appeal.sample(&mut rng))
        })
        .collect();
    threads.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut times: Vec<f64> = (0..cfg.total_posts()).map(|_| rng.random_range(0.0..duration)).collect();
    times.sort_by(f64::total_cmp);
    let student_pick = WeightedIndex::new(students.iter().map(|s| s.1)).expect("positive activity");
    let lifetime = cfg.thread_lifetime_days * SECONDS_PER_DAY;

    let excitation_scale = cfg.excitation_days * SECONDS_PER_DAY;
    let mut last_post: HashMap<(usize, usize), f64> = HashMap::new();
    // Summed pull of the replies a student received on a thread since last posting there.
    let mut pending: HashMap<(usize, usize), f64> = HashMap::new();
    let mut thread_posts: Vec<Vec<(u64, usize)>> = vec![Vec::new(); cfg.num_threads];
    let mut raw = Vec::with_capacity(times.len());
    let mut post_topic = BTreeMap::new();
    for (i, &t) in times.iter().enumerate() {
        let post_id = i as u64 + 1;
        let s = student_pick.sample(&mut rng);
        let week = ((t / SECONDS_PER_WEEK) as usize).min(weeks - 1);
        let interest = &students[s].0[week];
        let open = threads.partition_point(|th| th.1 <= t);
        let weights: Vec<f64> = threads[..open]
            .iter()
            .enumerate()
            .map(|(p, (mix, opened, appeal))| {
                let aging = if lifetime > 0.0 { (-(t - opened) / lifetime).exp() } else { 1.0 };
                let revisit = if last_post.contains_key(&(s, p)) { 1.0 + cfg.revisit_boost } else { 1.0 };
                let excited = pending.get(&(s, p)).copied().unwrap_or(0.0);
                appeal * dot(interest, mix) * aging * revisit * (1.0 + cfg.reply_excitation * excited)
            })
            .collect();
        let p = WeightedIndex::new(&weights)
            .map_err(|e| Error::Integrity(format!("no thread can receive post {post_id}: {e}")))?
            .sample(&mut rng);

        // Topic that explains this pairing, drawn from its posterior.
        let mix = &threads[p].0;
        let joint: Vec<f64> = interest.iter().zip(mix).map(|(a, b)| a * b).collect();
        let z = WeightedIndex::new(&joint)
            .map(|d| d.sample(&mut rng))
            .unwrap_or_else(|_| WeightedIndex::new(mix).expect("valid mixture").sample(&mut rng));
        let text_mix: Vec<f64> = onehot(z).iter().zip(mix).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
        let tokens = sample_words(&mut rng, &text_mix, &word_dists, &vocabulary, cfg.words_per_post);

        let previous = &thread_posts[p];
        let parent = if !previous.is_empty() && rng.random_bool(cfg.reply_prob) {
            let w: Vec<f64> = previous
                .iter()
                .map(|&(_, author)| if author == s { OWN_PARENT_WEIGHT } else { 1.0 })
                .collect();
            let (parent_id, author) = previous[WeightedIndex::new(&w).expect("positive weights").sample(&mut rng)];
            if author != s && excitation_scale > 0.0 {
                let since = t - last_post[&(author, p)];
                *pending.entry((author, p)).or_default() += (-since / excitation_scale).exp();
            }
            Some(parent_id)
        } else {
            None
        };

        last_post.insert((s, p), t);
        pending.remove(&(s, p));
        thread_posts[p].push((post_id, s));
        post_topic.insert(post_id, z);
        raw.push((post_id, s, p, t, tokens, parent));
    }

    let mut student_ids: HashMap<usize, usize> = HashMap::new();
    let mut thread_ids: HashMap<usize, usize> = HashMap::new();
    let mut student_names = Vec::new();
    let mut thread_names = Vec::new();
    let mut events = Vec::with_capacity(raw.len());
    for (post_id, s, p, t, tokens, parent) in raw {
        let student = *student_ids.entry(s).or_insert_with(|| {
            student_names.push(format!("u{s}"));
            student_names.len() - 1
        });
        let thread = *thread_ids.entry(p).or_insert_with(|| {
            thread_names.push(format!("t{p}"));
            thread_names.len() - 1
        });
        events.push(PostEvent {
            post_id,
            student,
            thread,
            timestamp: cfg.course_start + t,
            tokens,
            parent_post_id: parent,
        });
    }

    let week_docs = week_topics
        .iter()
        .map(|&topic| sample_words(&mut rng, &onehot(topic), &word_dists, &vocabulary, cfg.words_per_week))
        .collect();
    let boundaries = (0..weeks).map(|w| cfg.course_start + w as f64 * SECONDS_PER_WEEK).collect();
    let course = CourseSchedule::new(week_docs, boundaries)?;

    let truth = GroundTruth {
        week_topics,
        student_interests: student_ids.keys().map(|&s| (format!("u{s}"), students[s].0.clone())).collect(),
        thread_mixtures: thread_ids.keys().map(|&p| (format!("t{p}"), threads[p].0.clone())).collect(),
        thread_open_times: thread_ids
            .keys()
            .map(|&p| (format!("t{p}"), cfg.course_start + threads[p].1))
            .collect(),
        post_topics: post_topic,
        topic_words,
        vocabulary,
    };
    let dataset = Dataset::new(events, student_names, thread_names, course)?;
    Ok(Synthetic { dataset, truth })
}
