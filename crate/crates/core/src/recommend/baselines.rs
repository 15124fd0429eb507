use std::cmp::Reverse;

use crate::corpus::Dataset;

/// Every registered thread, most posts first; ties by smaller id.
pub fn baseline_pop(train: &Dataset) -> Vec<usize> {
    let mut counts = vec![0usize; train.num_threads()];
    for e in train.events() {
        counts[e.thread] += 1;
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&p| (Reverse(counts[p]), p));
    order
}

fn last_activity(train: &Dataset, student: Option<usize>) -> Vec<Option<f64>> {
    let mut last = vec![None; train.num_threads()];
    for e in train.events() {
        if student.is_none_or(|s| s == e.student) {
            last[e.thread] = Some(e.timestamp);
        }
    }
    last
}

/// Orders `threads` by last activity (most recent first, or oldest first when
/// `ascending`); threads without activity go last. Ties by smaller id.
fn by_activity(threads: impl Iterator<Item = usize>, last: &[Option<f64>], ascending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = threads.collect();
    order.sort_by(|&a, &b| {
        let key = |p: usize| last[p];
        match (key(a), key(b)) {
            (Some(x), Some(y)) => {
                let c = if ascending { x.total_cmp(&y) } else { y.total_cmp(&x) };
                c.then(a.cmp(&b))
            }
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        }
    });
    order
}

/// Every registered thread by the time of its latest post.
pub fn baseline_rec(train: &Dataset, ascending: bool) -> Vec<usize> {
    let last = last_activity(train, None);
    by_activity(0..train.num_threads(), &last, ascending)
}

/// Threads the student posted on, by the time of their latest post there, followed by
/// the remaining threads in [`baseline_rec`] order.
pub fn baseline_user_rec(train: &Dataset, student: usize, ascending: bool) -> Vec<usize> {
    let own = last_activity(train, Some(student));
    let visited = (0..train.num_threads()).filter(|&p| own[p].is_some());
    let mut order = by_activity(visited, &own, false);
    order.extend(baseline_rec(train, ascending).into_iter().filter(|&p| own[p].is_none()));
    order
}
