use std::collections::HashMap;

/// Events that can be processed together: no student or thread appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TBatch {
    pub events: Vec<usize>,
}

/// Assigns each `(student, thread)` event to batch `1 + max(last batch of its student,
/// last batch of its thread)`, or batch 0 when both are unseen. Input must be chronological.
pub fn t_batch(events: impl IntoIterator<Item = (usize, usize)>) -> Vec<TBatch> {
    let mut student_batch: HashMap<usize, usize> = HashMap::new();
    let mut thread_batch: HashMap<usize, usize> = HashMap::new();
    let mut batches: Vec<TBatch> = Vec::new();
    for (i, (student, thread)) in events.into_iter().enumerate() {
        let after = student_batch
            .get(&student)
            .into_iter()
            .chain(thread_batch.get(&thread))
            .max()
            .map_or(0, |&b| b + 1);
        if after == batches.len() {
            batches.push(TBatch::default());
        }
        batches[after].events.push(i);
        student_batch.insert(student, after);
        thread_batch.insert(thread, after);
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn manual_trace() {
        let b = t_batch([(1, 1), (1, 2), (2, 1)]);
        assert_eq!(b, vec![TBatch { events: vec![0] }, TBatch { events: vec![1, 2] }]);
    }

    #[test]
    fn single_student_is_fully_sequential() {
        let b = t_batch((0..7).map(|i| (0, i % 3)));
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|t| t.events.len() == 1));
        assert!(t_batch(std::iter::empty()).is_empty());
    }

    proptest! {
        #[test]
        fn invariants_hold(events in proptest::collection::vec((0usize..20, 0usize..15), 0..300)) {
            let batches = t_batch(events.iter().copied());
            let mut flat: Vec<usize> = batches.iter().flat_map(|b| b.events.clone()).collect();
            for b in &batches {
                prop_assert!(!b.events.is_empty());
                let s: HashSet<_> = b.events.iter().map(|&i| events[i].0).collect();
                let t: HashSet<_> = b.events.iter().map(|&i| events[i].1).collect();
                prop_assert_eq!(s.len(), b.events.len());
                prop_assert_eq!(t.len(), b.events.len());
            }
            flat.sort_unstable();
            prop_assert_eq!(flat, (0..events.len()).collect::<Vec<_>>());
        }
    }
}
