use std::collections::HashMap;

use super::{Dataset, PostEvent};

/// Activity on a thread since a student's last post there.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplyHistory {
    /// Plain posts by other students after `last_own_post`.
    pub post_times: Vec<f64>,
    /// Explicit replies to one of the student's posts on the thread after `last_own_post`.
    pub reply_times: Vec<f64>,
    /// Last time the student posted on the thread; `None` if never.
    pub last_own_post: Option<f64>,
}

/// Classifies the events of one thread relative to a student. Each event lands in
/// at most one list, and the student's own posts land in neither.
fn classify<'a>(
    thread_events: impl DoubleEndedIterator<Item = &'a PostEvent> + Clone,
    author_of: impl Fn(u64) -> Option<usize>,
    student: usize,
    t_end: f64,
) -> ReplyHistory {
    let before_end = thread_events.filter(|e| e.timestamp < t_end);
    let Some(t_up) = before_end
        .clone()
        .rev()
        .find(|e| e.student == student)
        .map(|e| e.timestamp)
    else {
        return ReplyHistory::default();
    };
    let mut history = ReplyHistory {
        last_own_post: Some(t_up),
        ..Default::default()
    };
    for e in before_end.filter(|e| e.timestamp > t_up && e.student != student) {
        let is_reply_to_student = e
            .parent_post_id
            .and_then(&author_of)
            .is_some_and(|author| author == student);
        if is_reply_to_student {
            history.reply_times.push(e.timestamp);
        } else {
            history.post_times.push(e.timestamp);
        }
    }
    history
}

/// Scans the whole dataset. Use [`ThreadIndex`] when querying repeatedly.
pub fn reply_history(ds: &Dataset, student: usize, thread: usize, t_end: f64) -> ReplyHistory {
    let authors: HashMap<u64, usize> = ds.events().iter().map(|e| (e.post_id, e.student)).collect();
    let on_thread: Vec<&PostEvent> = ds.events().iter().filter(|e| e.thread == thread).collect();
    classify(on_thread.into_iter(), |id| authors.get(&id).copied(), student, t_end)
}

/// Per-thread event lists for repeated history queries over one dataset.
#[derive(Debug, Clone)]
pub struct ThreadIndex<'a> {
    by_thread: Vec<Vec<&'a PostEvent>>,
    authors: HashMap<u64, usize>,
}

impl<'a> ThreadIndex<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        let mut by_thread = vec![Vec::new(); ds.num_threads()];
        for e in ds.events() {
            by_thread[e.thread].push(e);
        }
        let authors = ds.events().iter().map(|e| (e.post_id, e.student)).collect();
        ThreadIndex { by_thread, authors }
    }

    pub fn history(&self, student: usize, thread: usize, t_end: f64) -> ReplyHistory {
        let events = &self.by_thread[thread];
        let end = events.partition_point(|e| e.timestamp < t_end);
        classify(
            events[..end].iter().copied(),
            |id| self.authors.get(&id).copied(),
            student,
            t_end,
        )
    }

    /// Threads with at least one event.
    pub fn active_threads(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_thread
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(i, _)| i)
    }
}
