//! Per-event computation graph: projection, prediction, loss and update, with its
//! reverse-mode gradient.
//!
//! Dynamic states entering an event are constants, so the graph is a tree rooted at the
//! scalar loss:
//!
//! ```text
//! û   = (1 + W_delta·Δ + W_theta[:, week]) ⊙ u_prev
//! q̃   = W_predᵀ [û, e_student, p_last, e_last] + B_pred
//! u'  = act(W_uᵀ [u_prev, p_prev, θ, Δ_u])
//! p'  = act(W_pᵀ [p_prev, u_prev, θ, Δ_p])
//! L   = |q̃ − [e_target, p̂]| + λ_U |u' − u_prev| + λ_T |p' − p_prev|
//! ```

use super::ops::{prediction_residual, recurrent_cell, student_context, update_input};
use super::params::{ModelParams, Tensors};
use crate::scalar::{l2_norm, Scalar};

/// Everything one training event needs, with all times already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EventInputs<T> {
    pub student: usize,
    /// Thread actually posted on (the prediction target).
    pub thread: usize,
    pub u_prev: Vec<T>,
    pub p_prev: Vec<T>,
    /// Post topic vector; zeros when text features are disabled.
    pub theta: Vec<T>,
    /// Time since the student's previous event; drives both the update and the projection.
    pub delta_u: T,
    /// Time since the thread's previous event.
    pub delta_p: T,
    /// Course week used as projection context.
    pub week: usize,
    /// Thread the student posted on before this event, with its embedding.
    pub last_thread: Option<(usize, Vec<T>)>,
    /// Dynamic half of the target (the student-personalized thread projection).
    pub target_proj: Vec<T>,
    pub project_student: bool,
    pub update_student: bool,
    pub update_thread: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventForward<T> {
    pub u_hat: Vec<T>,
    pub prediction: Vec<T>,
    pub u_new: Vec<T>,
    pub p_new: Vec<T>,
    pub prediction_loss: T,
    pub student_penalty: T,
    pub thread_penalty: T,
}

impl<T: Scalar> EventForward<T> {
    pub fn loss(&self) -> T {
        self.prediction_loss + self.student_penalty + self.thread_penalty
    }
}

fn diff<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn event_forward<T: Scalar>(params: &ModelParams<T>, inp: &EventInputs<T>) -> EventForward<T> {
    let dims = params.dims;
    let u_hat = if inp.project_student {
        student_context(inp.delta_u, inp.week, params)
            .into_iter()
            .zip(&inp.u_prev)
            .map(|(c, &x)| c * x)
            .collect()
    } else {
        inp.u_prev.clone()
    };
    let last = inp.last_thread.as_ref().map(|(thread, emb)| super::ops::LastThread {
        thread: *thread,
        embedding: emb.as_slice(),
    });
    let prediction = super::ops::predict_next(&u_hat, inp.student, last, params)
        .expect("event inputs are shaped by the caller");
    let residual = prediction_residual(&prediction, inp.thread, &inp.target_proj, dims.n);

    let act = params.hyper.activation;
    let (u_new, student_penalty) = if inp.update_student {
        let z = update_input(&inp.u_prev, &inp.p_prev, &inp.theta, inp.delta_u);
        let u_new = recurrent_cell(&params.tensors.w_u, &z, act);
        let pen = params.hyper.lambda_u * l2_norm(&diff(&u_new, &inp.u_prev));
        (u_new, pen)
    } else {
        (inp.u_prev.clone(), T::zero())
    };
    let (p_new, thread_penalty) = if inp.update_thread {
        let z = update_input(&inp.p_prev, &inp.u_prev, &inp.theta, inp.delta_p);
        let p_new = recurrent_cell(&params.tensors.w_p, &z, act);
        let pen = params.hyper.lambda_t * l2_norm(&diff(&p_new, &inp.p_prev));
        (p_new, pen)
    } else {
        (inp.p_prev.clone(), T::zero())
    };

    EventForward {
        u_hat,
        prediction,
        u_new,
        p_new,
        prediction_loss: l2_norm(&residual),
        student_penalty,
        thread_penalty,
    }
}

/// `v / |v|` scaled by `weight`; the zero vector at the kink.
fn unit_direction<T: Scalar>(v: &[T], weight: T) -> Option<Vec<T>> {
    let norm = l2_norm(v);
    if norm == T::zero() {
        return None;
    }
    Some(v.iter().map(|&x| weight * x / norm).collect())
}

/// Backpropagates one recurrent cell's penalty into its weight gradient.
fn backprop_cell<T: Scalar>(
    grad: &mut ndarray::Array2<T>,
    input: &[T],
    output: &[T],
    prev: &[T],
    lambda: T,
    act: super::Activation,
) {
    let Some(g_out) = unit_direction(&diff(output, prev), lambda) else {
        return;
    };
    let g_pre: Vec<T> = g_out
        .iter()
        .zip(output)
        .map(|(&g, &y)| g * act.derivative_from_output(y))
        .collect();
    for (mut row, &x) in grad.rows_mut().into_iter().zip(input) {
        if x == T::zero() {
            continue;
        }
        for (slot, &g) in row.iter_mut().zip(&g_pre) {
            *slot += x * g;
        }
    }
}

/// Adds the gradient of the event loss with respect to every tensor into `grads`.
pub fn event_backward<T: Scalar>(
    params: &ModelParams<T>,
    inp: &EventInputs<T>,
    fwd: &EventForward<T>,
    grads: &mut Tensors<T>,
) {
    let dims = params.dims;
    let t = &params.tensors;

    let residual = prediction_residual(&fwd.prediction, inp.thread, &inp.target_proj, dims.n);
    if let Some(g_q) = unit_direction(&residual, T::one()) {
        for (slot, &g) in grads.b_pred.iter_mut().zip(&g_q) {
            *slot += g;
        }
        let mut add_row = |row: usize, scale: T| {
            if scale == T::zero() {
                return;
            }
            for (slot, &g) in grads.w_pred.row_mut(row).iter_mut().zip(&g_q) {
                *slot += scale * g;
            }
        };
        for (j, &x) in fwd.u_hat.iter().enumerate() {
            add_row(j, x);
        }
        add_row(dims.d + inp.student, T::one());
        if let Some((thread, emb)) = &inp.last_thread {
            for (j, &x) in emb.iter().enumerate() {
                add_row(dims.d + dims.m + j, x);
            }
            add_row(2 * dims.d + dims.m + thread, T::one());
        }

        if inp.project_student {
            for j in 0..dims.d {
                let g_uhat: T = t.w_pred.row(j).iter().zip(&g_q).map(|(&w, &g)| w * g).sum();
                let g_ctx = g_uhat * inp.u_prev[j];
                grads.w_delta[j] += g_ctx * inp.delta_u;
                grads.w_theta[[j, inp.week]] += g_ctx;
            }
        }
    }

    let act = params.hyper.activation;
    if inp.update_student {
        let z = update_input(&inp.u_prev, &inp.p_prev, &inp.theta, inp.delta_u);
        backprop_cell(&mut grads.w_u, &z, &fwd.u_new, &inp.u_prev, params.hyper.lambda_u, act);
    }
    if inp.update_thread {
        let z = update_input(&inp.p_prev, &inp.u_prev, &inp.theta, inp.delta_p);
        backprop_cell(&mut grads.w_p, &z, &fwd.p_new, &inp.p_prev, params.hyper.lambda_t, act);
    }
}

#[cfg(test)]
mod tests {
    use super::super::ops;
    use super::super::params::{Dims, Hyper};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(seed: u64) -> (ModelParams<f64>, EventInputs<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Dims { d: 3, k: 2, s: 2, m: 4, n: 4 };
        let mut params = ModelParams::init(dims, Hyper::default(), &mut rng).unwrap();
        params.tensors.w_pred.mapv_inplace(|x| x * 5.0);
        let mut v = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let theta = v(2);
        let s: f64 = theta.iter().sum();
        let inp = EventInputs {
            student: 1,
            thread: 2,
            u_prev: v(3),
            p_prev: v(3),
            theta: theta.iter().map(|x| x / s).collect(),
            delta_u: 1.7,
            delta_p: 0.4,
            week: 1,
            last_thread: Some((3, v(3))),
            target_proj: v(3),
            project_student: true,
            update_student: true,
            update_thread: true,
        };
        (params, inp)
    }

    #[test]
    fn forward_agrees_with_the_individual_ops() {
        let (params, inp) = random_case(4);
        let fwd = event_forward(&params, &inp);
        let u_hat = ops::project_student(&inp.u_prev, inp.delta_u, inp.week, &params).unwrap();
        assert_eq!(fwd.u_hat, u_hat);
        let (thread, emb) = inp.last_thread.as_ref().unwrap();
        let last = ops::LastThread { thread: *thread, embedding: emb };
        assert_eq!(fwd.prediction, ops::predict_next(&u_hat, 1, Some(last), &params).unwrap());
        let (u_new, p_new) =
            ops::update(&inp.u_prev, &inp.p_prev, &inp.theta, inp.delta_u, inp.delta_p, &params).unwrap();
        assert_eq!((fwd.u_new.clone(), fwd.p_new.clone()), (u_new.clone(), p_new.clone()));
        let l = ops::loss(&fwd.prediction, 2, &inp.target_proj, &u_new, &inp.u_prev, &p_new, &inp.p_prev, &params)
            .unwrap();
        assert!((fwd.loss() - l).abs() < 1e-14);
    }

    #[test]
    fn frozen_entities_contribute_nothing() {
        let (params, mut inp) = random_case(5);
        inp.update_student = false;
        inp.update_thread = false;
        let fwd = event_forward(&params, &inp);
        assert_eq!(fwd.u_new, inp.u_prev);
        assert_eq!(fwd.student_penalty + fwd.thread_penalty, 0.0);
        let mut g = Tensors::zeros(&params.dims);
        event_backward(&params, &inp, &fwd, &mut g);
        assert!(g.w_u.iter().chain(g.w_p.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn zero_residual_uses_zero_subgradient() {
        let (mut params, mut inp) = random_case(6);
        params.tensors.w_pred.fill(0.0);
        params.tensors.b_pred.fill(0.0);
        params.tensors.b_pred[inp.thread] = 1.0;
        inp.target_proj = vec![0.0; 3];
        let fwd = event_forward(&params, &inp);
        assert_eq!(fwd.prediction_loss, 0.0);
        let mut g = Tensors::zeros(&params.dims);
        event_backward(&params, &inp, &fwd, &mut g);
        assert!(g.b_pred.iter().all(|&x| x == 0.0));
    }
}
