use crate::scalar::Scalar;

/// An entity's current dynamic embedding and when it last changed.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicState<T> {
    pub embedding: Vec<T>,
    pub last_update: Option<f64>,
}

impl<T: Scalar> DynamicState<T> {
    pub fn zeros(d: usize) -> Self {
        DynamicState {
            embedding: vec![T::zero(); d],
            last_update: None,
        }
    }

    /// Elapsed time since the last update in units of `time_unit`; zero before the first one.
    pub fn elapsed(&self, t: f64, time_unit: f64) -> T {
        match self.last_update {
            Some(last) => T::of(((t - last) / time_unit).max(0.0)),
            None => T::zero(),
        }
    }
}

/// All dynamic state carried along the replayed timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityStates<T> {
    pub students: Vec<DynamicState<T>>,
    pub threads: Vec<DynamicState<T>>,
    /// Thread each student posted on most recently.
    pub last_thread: Vec<Option<usize>>,
    /// Course week assigned to each student's most recent post.
    pub last_week: Vec<Option<usize>>,
}

impl<T: Scalar> EntityStates<T> {
    pub fn new(m: usize, n: usize, d: usize) -> Self {
        EntityStates {
            students: vec![DynamicState::zeros(d); m],
            threads: vec![DynamicState::zeros(d); n],
            last_thread: vec![None; m],
            last_week: vec![None; m],
        }
    }
}
