//! Forum events, course structure, ingestion and chronological splits.

mod history;
mod ingest;
mod split;

pub use history::{reply_history, ReplyHistory, ThreadIndex};
pub use ingest::{
    ingest_jsonl, ingest_jsonl_with, write_id_map, write_jsonl, write_schedule, write_schedule_text, IdMapEntry,
};
pub use split::{split_by_time, SplitSpec};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_WEEK: f64 = 7.0 * SECONDS_PER_DAY;

/// One post: a student acting on a thread at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PostEvent {
    pub post_id: u64,
    pub student: usize,
    pub thread: usize,
    /// Seconds since course start.
    pub timestamp: f64,
    pub tokens: Vec<String>,
    /// Set when the post explicitly replies to an earlier post on the same thread.
    pub parent_post_id: Option<u64>,
}

/// Week-by-week course material, used to derive per-week topic distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseSchedule {
    week_docs: Vec<Vec<String>>,
    week_boundaries: Vec<f64>,
}

impl CourseSchedule {
    pub fn new(week_docs: Vec<Vec<String>>, week_boundaries: Vec<f64>) -> Result<Self> {
        if week_docs.is_empty() {
            return Err(Error::Integrity("course schedule needs at least one week".into()));
        }
        if week_docs.len() != week_boundaries.len() {
            return Err(Error::Integrity(format!(
                "{} week documents but {} week boundaries",
                week_docs.len(),
                week_boundaries.len()
            )));
        }
        if week_boundaries.iter().any(|t| !t.is_finite())
            || week_boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Integrity("week boundaries must be finite and strictly increasing".into()));
        }
        Ok(CourseSchedule {
            week_docs,
            week_boundaries,
        })
    }

    pub fn num_weeks(&self) -> usize {
        self.week_docs.len()
    }

    pub fn week_docs(&self) -> &[Vec<String>] {
        &self.week_docs
    }

    pub fn week_boundaries(&self) -> &[f64] {
        &self.week_boundaries
    }

    /// Week in progress at time `t`; times before the first boundary map to week 0.
    pub fn week_at(&self, t: f64) -> usize {
        self.week_boundaries
            .partition_point(|&start| start <= t)
            .saturating_sub(1)
    }
}

/// A chronologically ordered event log over dense student and thread registries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    events: Vec<PostEvent>,
    students: Vec<String>,
    threads: Vec<String>,
    course: CourseSchedule,
}

impl Dataset {
    /// Sorts events by `(timestamp, post_id)` and validates every structural invariant.
    /// `students`/`threads` hold the external id for each dense index.
    pub fn new(
        mut events: Vec<PostEvent>,
        students: Vec<String>,
        threads: Vec<String>,
        course: CourseSchedule,
    ) -> Result<Self> {
        if students.is_empty() || threads.is_empty() {
            return Err(Error::EmptyDataset("registries need at least one student and one thread".into()));
        }
        events.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then(a.post_id.cmp(&b.post_id))
        });
        let ds = Dataset {
            events,
            students,
            threads,
            course,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashMap::with_capacity(self.events.len());
        for e in &self.events {
            if !(e.timestamp.is_finite() && e.timestamp >= 0.0) {
                return Err(Error::Integrity(format!(
                    "post {} has invalid timestamp {}",
                    e.post_id, e.timestamp
                )));
            }
            if e.student >= self.students.len() || e.thread >= self.threads.len() {
                return Err(Error::Integrity(format!("post {} references an unregistered entity", e.post_id)));
            }
            if let Some(parent) = e.parent_post_id {
                match seen.get(&parent) {
                    Some(&(thread, ts)) if thread == e.thread && ts < e.timestamp => {}
                    Some(&(thread, _)) if thread != e.thread => {
                        return Err(Error::Integrity(format!(
                            "post {} replies to post {parent} in a different thread",
                            e.post_id
                        )))
                    }
                    _ => {
                        return Err(Error::Integrity(format!(
                            "post {} replies to post {parent}, which is missing or not strictly earlier",
                            e.post_id
                        )))
                    }
                }
            }
            if seen.insert(e.post_id, (e.thread, e.timestamp)).is_some() {
                return Err(Error::Integrity(format!("duplicate post id {}", e.post_id)));
            }
        }
        Ok(())
    }

    /// Events strictly before `end`, with the full registries.
    pub fn before(&self, end: f64) -> Dataset {
        let cut = self.events.partition_point(|e| e.timestamp < end);
        self.with_events(self.events[..cut].to_vec())
    }

    /// Same registries and course, different event subset (already sorted).
    pub(crate) fn with_events(&self, events: Vec<PostEvent>) -> Dataset {
        Dataset {
            events,
            students: self.students.clone(),
            threads: self.threads.clone(),
            course: self.course.clone(),
        }
    }

    pub fn events(&self) -> &[PostEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_students(&self) -> usize {
        self.students.len()
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn course(&self) -> &CourseSchedule {
        &self.course
    }

    pub fn student_ids(&self) -> &[String] {
        &self.students
    }

    pub fn thread_ids(&self) -> &[String] {
        &self.threads
    }

    pub fn student_index(&self, external: &str) -> Option<usize> {
        self.students.iter().position(|s| s == external)
    }

    /// Mean gap between consecutive events, the unit all elapsed times are expressed in.
    /// Falls back to one second when the log spans no time.
    pub fn mean_inter_event_gap(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) if self.events.len() > 1 && b.timestamp > a.timestamp => {
                (b.timestamp - a.timestamp) / (self.events.len() - 1) as f64
            }
            _ => 1.0,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn schedule(weeks: usize) -> CourseSchedule {
        CourseSchedule::new(
            (0..weeks).map(|w| vec![format!("week{w}")]).collect(),
            (0..weeks).map(|w| w as f64 * SECONDS_PER_WEEK).collect(),
        )
        .unwrap()
    }

    /// `(post_id, student, thread, timestamp, parent)` tuples.
    pub fn dataset(m: usize, n: usize, rows: &[(u64, usize, usize, f64, Option<u64>)]) -> Dataset {
        let events = rows
            .iter()
            .map(|&(post_id, student, thread, timestamp, parent_post_id)| PostEvent {
                post_id,
                student,
                thread,
                timestamp,
                tokens: vec![],
                parent_post_id,
            })
            .collect();
        Dataset::new(
            events,
            (0..m).map(|i| format!("s{i}")).collect(),
            (0..n).map(|i| format!("t{i}")).collect(),
            schedule(2),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn events_sorted_with_post_id_tiebreak() {
        let ds = dataset(2, 2, &[(5, 0, 0, 3.0, None), (2, 1, 1, 3.0, None), (9, 0, 1, 1.0, None)]);
        let ids: Vec<u64> = ds.events().iter().map(|e| e.post_id).collect();
        assert_eq!(ids, [9, 2, 5]);
    }

    #[test]
    fn rejects_cross_thread_and_forward_parents() {
        let mk = |rows: Vec<PostEvent>| {
            Dataset::new(rows, vec!["a".into()], vec!["x".into(), "y".into()], schedule(1))
        };
        let ev = |post_id, thread, timestamp, parent_post_id| PostEvent {
            post_id,
            student: 0,
            thread,
            timestamp,
            tokens: vec![],
            parent_post_id,
        };
        let cross = mk(vec![ev(1, 0, 1.0, None), ev(2, 1, 2.0, Some(1))]).unwrap_err();
        assert!(matches!(cross, Error::Integrity(_)));
        assert!(mk(vec![ev(1, 0, 1.0, Some(2)), ev(2, 0, 2.0, None)]).is_err());
        assert!(mk(vec![ev(1, 0, 1.0, None), ev(2, 0, 1.0, Some(1))]).is_err());
        assert!(mk(vec![ev(1, 0, 1.0, None), ev(1, 0, 2.0, None)]).is_err());
        assert!(mk(vec![ev(1, 0, -1.0, None)]).is_err());
    }

    #[test]
    fn week_lookup() {
        let s = schedule(3);
        assert_eq!(s.week_at(0.0), 0);
        assert_eq!(s.week_at(SECONDS_PER_WEEK - 1.0), 0);
        assert_eq!(s.week_at(SECONDS_PER_WEEK), 1);
        assert_eq!(s.week_at(1e9), 2);
        assert!(CourseSchedule::new(vec![vec![], vec![]], vec![1.0, 1.0]).is_err());
        assert!(CourseSchedule::new(vec![], vec![]).is_err());
    }

    #[test]
    fn mean_gap() {
        let ds = dataset(1, 1, &[(1, 0, 0, 0.0, None), (2, 0, 0, 4.0, None), (3, 0, 0, 10.0, None)]);
        assert_eq!(ds.mean_inter_event_gap(), 5.0);
        assert_eq!(dataset(1, 1, &[(1, 0, 0, 3.0, None)]).mean_inter_event_gap(), 1.0);
    }
}
