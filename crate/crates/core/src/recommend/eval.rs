use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, PostEvent};
use crate::error::{Error, Result};

use super::baselines::{baseline_pop, baseline_rec, baseline_user_rec};
use super::rank::{average_precision, RankedRecommendation};

/// Anything that can rank threads for a student at a point in time.
pub trait Recommender: Sync {
    fn name(&self) -> String;
    fn rank(&self, student: usize, at: f64, top_k: usize) -> Result<RankedRecommendation>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Pop,
    Rec,
    UserRec,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pop" => Ok(BaselineKind::Pop),
            "rec" => Ok(BaselineKind::Rec),
            "user-rec" => Ok(BaselineKind::UserRec),
            other => Err(Error::Config(format!("unknown baseline `{other}` (pop, rec, user-rec)"))),
        }
    }
}

/// Heuristic rankings restricted to threads with a training post.
pub struct Baseline<'a> {
    kind: BaselineKind,
    ascending: bool,
    train: &'a Dataset,
    global: Vec<usize>,
    active: Vec<bool>,
}

impl<'a> Baseline<'a> {
    /// `ascending` flips the recency direction of `Rec` and of the tail of `UserRec`.
    pub fn new(kind: BaselineKind, train: &'a Dataset, ascending: bool) -> Self {
        let global = match kind {
            BaselineKind::Pop => baseline_pop(train),
            BaselineKind::Rec | BaselineKind::UserRec => baseline_rec(train, ascending),
        };
        let mut active = vec![false; train.num_threads()];
        for e in train.events() {
            active[e.thread] = true;
        }
        Baseline { kind, ascending, train, global, active }
    }
}

impl Recommender for Baseline<'_> {
    fn name(&self) -> String {
        match (self.kind, self.ascending) {
            (BaselineKind::Pop, _) => "pop".into(),
            (BaselineKind::Rec, false) => "rec".into(),
            (BaselineKind::Rec, true) => "rec-ascending".into(),
            (BaselineKind::UserRec, false) => "user-rec".into(),
            (BaselineKind::UserRec, true) => "user-rec-ascending".into(),
        }
    }

    fn rank(&self, student: usize, _at: f64, top_k: usize) -> Result<RankedRecommendation> {
        let order = match self.kind {
            BaselineKind::UserRec => baseline_user_rec(self.train, student, self.ascending),
            _ => self.global.clone(),
        };
        Ok(RankedRecommendation::heuristic(
            order.into_iter().filter(|&p| self.active[p]).take(top_k).collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub n_cutoff: usize,
    /// Time rankings are produced at: the start of the test window.
    pub at: f64,
    /// Rank again at every test post, against that post's thread alone.
    pub per_event: bool,
}

impl EvalOptions {
    pub fn at(at: f64) -> Self {
        EvalOptions { n_cutoff: 5, at, per_event: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub map_at_n: f64,
    pub n_cutoff: usize,
    pub users_evaluated: usize,
    /// Average precision keyed by external student id.
    pub per_user_ap: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["student_id", "average_precision"])?;
        for (student, ap) in &self.per_user_ap {
            w.write_record([student.as_str(), &ap.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// MAP@N of `rec` over every student who posts in `test`.
pub fn evaluate(rec: &dyn Recommender, test: &Dataset, opts: EvalOptions) -> Result<EvalReport> {
    if opts.n_cutoff == 0 {
        return Err(Error::Config("cutoff N must be at least 1".into()));
    }
    let mut by_student: BTreeMap<usize, Vec<&PostEvent>> = BTreeMap::new();
    for e in test.events() {
        by_student.entry(e.student).or_default().push(e);
    }
    if by_student.is_empty() {
        return Err(Error::NoEvaluableStudents);
    }
    let students: Vec<(usize, Vec<&PostEvent>)> = by_student.into_iter().collect();
    let aps: Vec<f64> = students
        .par_iter()
        .map(|(s, events)| {
            if opts.per_event {
                let mut sum = 0.0;
                for e in events {
                    let ranked = rec.rank(*s, e.timestamp, opts.n_cutoff)?;
                    sum += average_precision(&ranked.thread_ids, &BTreeSet::from([e.thread]), opts.n_cutoff);
                }
                Ok(sum / events.len() as f64)
            } else {
                let relevant: BTreeSet<usize> = events.iter().map(|e| e.thread).collect();
                let ranked = rec.rank(*s, opts.at, opts.n_cutoff)?;
                Ok(average_precision(&ranked.thread_ids, &relevant, opts.n_cutoff))
            }
        })
        .collect::<Result<_>>()?;
    let map_at_n = aps.iter().sum::<f64>() / aps.len() as f64;
    let per_user_ap = students
        .iter()
        .zip(&aps)
        .map(|((s, _), &ap)| (test.student_ids()[*s].clone(), ap))
        .collect();
    Ok(EvalReport {
        method: rec.name(),
        map_at_n,
        n_cutoff: opts.n_cutoff,
        users_evaluated: aps.len(),
        per_user_ap,
    })
}
