use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard deviation of the zero-mean Gaussian used for every weight matrix.
pub const INIT_STD: f64 = 0.1;

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Dynamic embedding size.
    pub d: usize,
    /// Number of post topics.
    pub k: usize,
    /// Number of course weeks.
    pub s: usize,
    pub m: usize,
    pub n: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.s == 0 || self.m == 0 || self.n == 0 {
            return Err(Error::Config(format!("all model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Rows of the recurrent weight matrices: two embeddings, the topic vector, elapsed time.
    pub fn update_input(&self) -> usize {
        2 * self.d + self.k + 1
    }

    /// Rows of the prediction matrix: projected student, student one-hot, last thread, thread one-hot.
    pub fn pred_input(&self) -> usize {
        self.m + self.n + 2 * self.d
    }

    /// Length of predicted and target thread embeddings (static one-hot part, then dynamic part).
    pub fn pred_output(&self) -> usize {
        self.n + self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => crate::scalar::sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Scalars that are selected by search rather than trained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper<T> {
    /// Decay rate for plain posts in the excitation factor.
    pub alpha: T,
    /// Decay rate for explicit replies in the excitation factor.
    pub beta: T,
    pub lambda_u: T,
    pub lambda_t: T,
    pub activation: Activation,
}

impl<T: Scalar> Default for Hyper<T> {
    fn default() -> Self {
        Hyper {
            alpha: T::of(0.5),
            beta: T::of(0.001),
            lambda_u: T::one(),
            lambda_t: T::one(),
            activation: Activation::Sigmoid,
        }
    }
}

/// The trainable tensors. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensors<T> {
    /// `(2d+K+1) x d`, student recurrent cell.
    pub w_u: Array2<T>,
    /// `(2d+K+1) x d`, thread recurrent cell.
    pub w_p: Array2<T>,
    /// Elapsed-time context weights, length `d`.
    pub w_delta: Array1<T>,
    /// Course-week context weights, `d x S`.
    pub w_theta: Array2<T>,
    /// `(m+n+2d) x (n+d)` prediction layer.
    pub w_pred: Array2<T>,
    /// Prediction bias, length `n+d`.
    pub b_pred: Array1<T>,
}

pub const TENSOR_NAMES: [&str; 6] = ["W_u", "W_p", "W_delta", "W_theta", "W_pred", "B_pred"];

impl<T: Scalar> Tensors<T> {
    pub fn zeros(dims: &Dims) -> Self {
        Tensors {
            w_u: Array2::zeros((dims.update_input(), dims.d)),
            w_p: Array2::zeros((dims.update_input(), dims.d)),
            w_delta: Array1::zeros(dims.d),
            w_theta: Array2::zeros((dims.d, dims.s)),
            w_pred: Array2::zeros((dims.pred_input(), dims.pred_output())),
            b_pred: Array1::zeros(dims.pred_output()),
        }
    }

    /// Row-major `(rows, cols)` of each tensor, in [`TENSOR_NAMES`] order.
    pub fn shapes(&self) -> [(usize, usize); 6] {
        [
            self.w_u.dim(),
            self.w_p.dim(),
            (self.w_delta.len(), 1),
            self.w_theta.dim(),
            self.w_pred.dim(),
            (1, self.b_pred.len()),
        ]
    }

    pub fn slices(&self) -> [&[T]; 6] {
        fn s<T>(o: Option<&[T]>) -> &[T] {
            o.expect("tensors are kept in standard layout")
        }
        [
            s(self.w_u.as_slice()),
            s(self.w_p.as_slice()),
            s(self.w_delta.as_slice()),
            s(self.w_theta.as_slice()),
            s(self.w_pred.as_slice()),
            s(self.b_pred.as_slice()),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [T]; 6] {
        fn s<T>(o: Option<&mut [T]>) -> &mut [T] {
            o.expect("tensors are kept in standard layout")
        }
        [
            s(self.w_u.as_slice_mut()),
            s(self.w_p.as_slice_mut()),
            s(self.w_delta.as_slice_mut()),
            s(self.w_theta.as_slice_mut()),
            s(self.w_pred.as_slice_mut()),
            s(self.b_pred.as_slice_mut()),
        ]
    }

    pub fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(T::zero());
        }
    }

    pub fn squared_norm(&self) -> T {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|&x| x * x)
            .sum()
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn num_entries(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub dims: Dims,
    pub tensors: Tensors<T>,
    pub hyper: Hyper<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(dims: Dims, hyper: Hyper<T>) -> Result<Self> {
        dims.validate()?;
        Ok(ModelParams {
            dims,
            tensors: Tensors::zeros(&dims),
            hyper,
        })
    }

    /// Gaussian weights with standard deviation [`INIT_STD`]; the bias starts at zero.
    pub fn init<R: Rng>(dims: Dims, hyper: Hyper<T>, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(dims, hyper)?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let [w_u, w_p, w_delta, w_theta, w_pred, _] = params.tensors.slices_mut();
        for slot in [w_u, w_p, w_delta, w_theta, w_pred] {
            slot.iter_mut().for_each(|x| *x = T::of(normal.sample(rng)));
        }
        Ok(params)
    }

    /// Checks every tensor against the declared dimensions and finiteness.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let expected = Tensors::<T>::zeros(&self.dims).shapes();
        for ((name, got), want) in TENSOR_NAMES.iter().zip(self.tensors.shapes()).zip(expected) {
            if got != want {
                return Err(Error::Shape(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        if !self.tensors.all_finite() {
            return Err(Error::Integrity("parameters contain non-finite values".into()));
        }
        Ok(())
    }
}
