use super::Dataset;
use crate::error::{Error, Result};

/// Training ends at `train_end`; the test window is `[train_end, test_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_end: f64,
    pub test_end: f64,
}

impl SplitSpec {
    pub fn new(train_end: f64, test_end: f64) -> Result<Self> {
        let spec = SplitSpec { train_end, test_end };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.train_end && self.train_end < self.test_end) {
            return Err(Error::Split(format!(
                "need 0 < train_end < test_end, got {} and {}",
                self.train_end, self.test_end
            )));
        }
        Ok(())
    }
}

/// Partitions events below `test_end` into a training prefix and a test window.
/// Both halves keep the full student and thread registries.
pub fn split_by_time(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let events = ds.events();
    let cut = events.partition_point(|e| e.timestamp < spec.train_end);
    let end = events.partition_point(|e| e.timestamp < spec.test_end);
    if cut == 0 {
        return Err(Error::Split(format!(
            "no training events before {}",
            spec.train_end
        )));
    }
    if cut == end {
        log::warn!(
            "test window [{}, {}) contains no events",
            spec.train_end,
            spec.test_end
        );
    }
    Ok((
        ds.with_events(events[..cut].to_vec()),
        ds.with_events(events[cut..end].to_vec()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::dataset;
    use proptest::prelude::*;

    fn times(ds: &Dataset) -> Vec<f64> {
        ds.events().iter().map(|e| e.timestamp).collect()
    }

    #[test]
    fn threshold_filter() {
        let ds = dataset(1, 1, &[(1, 0, 0, 1.0, None), (2, 0, 0, 5.0, None), (3, 0, 0, 9.0, None)]);
        let (train, test) = split_by_time(&ds, SplitSpec::new(6.0, 10.0).unwrap()).unwrap();
        assert_eq!(times(&train), [1.0, 5.0]);
        assert_eq!(times(&test), [9.0]);
        assert_eq!(train.num_students(), ds.num_students());
        assert_eq!(test.num_threads(), ds.num_threads());
    }

    #[test]
    fn train_end_past_last_event_gives_empty_test() {
        let ds = dataset(1, 1, &[(1, 0, 0, 1.0, None), (2, 0, 0, 5.0, None)]);
        let (train, test) = split_by_time(&ds, SplitSpec::new(50.0, 60.0).unwrap()).unwrap();
        assert_eq!(train.len(), 2);
        assert!(test.is_empty());
    }

    #[test]
    fn empty_train_and_invalid_spec_are_errors() {
        let ds = dataset(1, 1, &[(1, 0, 0, 5.0, None)]);
        assert!(split_by_time(&ds, SplitSpec { train_end: 2.0, test_end: 9.0 }).is_err());
        assert!(SplitSpec::new(0.0, 1.0).is_err());
        assert!(SplitSpec::new(3.0, 3.0).is_err());
    }

    proptest! {
        #[test]
        fn partitions_events_below_test_end(
            ts in proptest::collection::vec(0.0f64..100.0, 10),
            t1 in 1.0f64..90.0,
            width in 0.5f64..50.0,
        ) {
            let rows: Vec<_> = ts.iter().enumerate().map(|(i, &t)| (i as u64, 0, 0, t, None)).collect();
            let ds = dataset(1, 1, &rows);
            let spec = SplitSpec::new(t1, t1 + width).unwrap();
            let below_t1 = ts.iter().filter(|&&t| t < t1).count();
            match split_by_time(&ds, spec) {
                Ok((train, test)) => {
                    let brute_train: Vec<u64> = ds.events().iter().filter(|e| e.timestamp < t1).map(|e| e.post_id).collect();
                    let brute_test: Vec<u64> = ds.events().iter()
                        .filter(|e| e.timestamp >= t1 && e.timestamp < t1 + width).map(|e| e.post_id).collect();
                    prop_assert_eq!(train.events().iter().map(|e| e.post_id).collect::<Vec<_>>(), brute_train);
                    prop_assert_eq!(test.events().iter().map(|e| e.post_id).collect::<Vec<_>>(), brute_test);
                    let below_t2 = ts.iter().filter(|&&t| t < t1 + width).count();
                    prop_assert_eq!(train.len() + test.len(), below_t2);
                }
                Err(_) => prop_assert_eq!(below_t1, 0),
            }
        }
    }
}
