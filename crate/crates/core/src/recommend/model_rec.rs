use crate::corpus::{Dataset, ThreadIndex};
use crate::error::{Error, Result};
use crate::model::{predict_next, project_student, project_thread, zeta, Checkpoint, LastThread};
use crate::scalar::Scalar;

use super::rank::{rank_onehot_candidates, RankedRecommendation};
use super::Recommender;

/// Ranks threads with a trained checkpoint whose states describe the end of `train`.
pub struct ModelRecommender<'a, T> {
    checkpoint: &'a Checkpoint<T>,
    train: &'a Dataset,
    history: ThreadIndex<'a>,
    candidates: Vec<usize>,
}

impl<'a, T: Scalar> ModelRecommender<'a, T> {
    pub fn new(checkpoint: &'a Checkpoint<T>, train: &'a Dataset) -> Result<Self> {
        let dims = checkpoint.params.dims;
        if dims.m != train.num_students() || dims.n != train.num_threads() {
            return Err(Error::Shape(format!(
                "checkpoint covers {} students and {} threads, dataset has {} and {}",
                dims.m,
                dims.n,
                train.num_students(),
                train.num_threads()
            )));
        }
        if dims.s != train.course().num_weeks() {
            return Err(Error::Shape(format!(
                "checkpoint has {} weeks, course has {}",
                dims.s,
                train.course().num_weeks()
            )));
        }
        if let Some(last) = train.events().last() {
            if last.timestamp >= checkpoint.train_end {
                return Err(Error::Integrity(format!(
                    "dataset has events at {} but the checkpoint states end at {}",
                    last.timestamp, checkpoint.train_end
                )));
            }
        }
        let history = ThreadIndex::new(train);
        let candidates = history.active_threads().collect();
        Ok(ModelRecommender { checkpoint, train, history, candidates })
    }

    /// Threads with at least one training post; the only ones that can be recommended.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    fn check_time(&self, at: f64) -> Result<()> {
        if at < self.checkpoint.train_end {
            return Err(Error::Config(format!(
                "cannot rank at {at}, before the end of training {}",
                self.checkpoint.train_end
            )));
        }
        Ok(())
    }

    /// Predicted next-thread embedding `[static (n), dynamic (d)]` for `student` at `at`.
    pub fn predict(&self, student: usize, at: f64) -> Result<Vec<T>> {
        self.check_time(at)?;
        let ck = self.checkpoint;
        let state = &ck.states.students[student];
        let u_hat = if ck.ablation.no_student_projection {
            state.embedding.clone()
        } else {
            let week = ck.states.last_week[student].unwrap_or_else(|| self.train.course().week_at(at));
            project_student(&state.embedding, state.elapsed(at, ck.time_unit), week, &ck.params)?
        };
        let last = ck.states.last_thread[student].map(|thread| LastThread {
            thread,
            embedding: ck.states.threads[thread].embedding.as_slice(),
        });
        predict_next(&u_hat, student, last, &ck.params)
    }

    /// Dynamic halves of every candidate's target vector as seen by `student` at `at`.
    pub fn candidate_vectors(&self, student: usize, at: f64) -> Result<Vec<(usize, Vec<T>)>> {
        self.check_time(at)?;
        let ck = self.checkpoint;
        let u = &ck.states.students[student].embedding;
        let (alpha, beta) = (ck.params.hyper.alpha.as_f64(), ck.params.hyper.beta.as_f64());
        self.candidates
            .iter()
            .map(|&p| {
                let p_emb = &ck.states.threads[p].embedding;
                let v = if ck.ablation.no_thread_projection {
                    p_emb.clone()
                } else {
                    let h = self.history.history(student, p, ck.train_end);
                    project_thread(u, p_emb, T::of(zeta(&h, at, alpha, beta, ck.time_unit)?))
                };
                Ok((p, v))
            })
            .collect()
    }

    pub fn recommend(&self, student: usize, at: f64, top_k: usize) -> Result<RankedRecommendation> {
        if student >= self.train.num_students() {
            return Err(Error::Config(format!("unknown student index {student}")));
        }
        let q = self.predict(student, at)?;
        let cands = self.candidate_vectors(student, at)?;
        Ok(rank_onehot_candidates(&q, self.checkpoint.params.dims.n, &cands, top_k))
    }
}

impl<T: Scalar> Recommender for ModelRecommender<'_, T> {
    fn name(&self) -> String {
        format!("model[{}]", self.checkpoint.ablation)
    }

    fn rank(&self, student: usize, at: f64, top_k: usize) -> Result<RankedRecommendation> {
        self.recommend(student, at, top_k)
    }
}
