//! The forward operations of the model, one function per step.

use super::params::ModelParams;
use crate::corpus::ReplyHistory;
use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Scalar};

fn check_len<T>(name: &str, v: &[T], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::Shape(format!("{name} has length {}, expected {want}", v.len())));
    }
    Ok(())
}

/// `act(Wᵀ · input)` for a `(rows x d)` weight matrix.
pub(crate) fn recurrent_cell<T: Scalar>(
    weights: &ndarray::Array2<T>,
    input: &[T],
    activation: super::Activation,
) -> Vec<T> {
    let d = weights.ncols();
    let mut pre = vec![T::zero(); d];
    for (row, &x) in weights.rows().into_iter().zip(input) {
        if x == T::zero() {
            continue;
        }
        for (acc, &w) in pre.iter_mut().zip(row.iter()) {
            *acc += w * x;
        }
    }
    pre.into_iter().map(|a| activation.apply(a)).collect()
}

pub(crate) fn update_input<T: Scalar>(own: &[T], other: &[T], theta: &[T], delta: T) -> Vec<T> {
    let mut z = Vec::with_capacity(own.len() + other.len() + theta.len() + 1);
    z.extend_from_slice(own);
    z.extend_from_slice(other);
    z.extend_from_slice(theta);
    z.push(delta);
    z
}

/// Coupled recurrent update. Both outputs are computed from the pre-update embeddings.
/// Elapsed times are in normalized units.
pub fn update<T: Scalar>(
    u_prev: &[T],
    p_prev: &[T],
    theta: &[T],
    delta_u: T,
    delta_p: T,
    params: &ModelParams<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let dims = params.dims;
    check_len("student embedding", u_prev, dims.d)?;
    check_len("thread embedding", p_prev, dims.d)?;
    check_len("topic vector", theta, dims.k)?;
    if delta_u < T::zero() || delta_p < T::zero() {
        return Err(Error::Integrity("elapsed time must be non-negative".into()));
    }
    let act = params.hyper.activation;
    let u_new = recurrent_cell(&params.tensors.w_u, &update_input(u_prev, p_prev, theta, delta_u), act);
    let p_new = recurrent_cell(&params.tensors.w_p, &update_input(p_prev, u_prev, theta, delta_p), act);
    Ok((u_new, p_new))
}

/// Multiplicative context applied to the student embedding: `1 + W_delta·Δ + W_theta[:, week]`.
pub(crate) fn student_context<T: Scalar>(delta: T, week: usize, params: &ModelParams<T>) -> Vec<T> {
    let t = &params.tensors;
    (0..params.dims.d)
        .map(|j| T::one() + t.w_delta[j] * delta + t.w_theta[[j, week]])
        .collect()
}

/// Projects a student embedding `delta` normalized time units ahead while studying `week`.
pub fn project_student<T: Scalar>(u: &[T], delta: T, week: usize, params: &ModelParams<T>) -> Result<Vec<T>> {
    check_len("student embedding", u, params.dims.d)?;
    if week >= params.dims.s {
        return Err(Error::Shape(format!("week {week} outside {} course weeks", params.dims.s)));
    }
    Ok(student_context(delta, week, params)
        .into_iter()
        .zip(u)
        .map(|(c, &x)| c * x)
        .collect())
}

/// Excitation a student feels towards a thread at `t_query`: exponentially decayed
/// counts of plain posts (rate `alpha`) and replies to the student (rate `beta`) since
/// the student's last post there. Gaps are divided by `time_unit`.
pub fn zeta(history: &ReplyHistory, t_query: f64, alpha: f64, beta: f64, time_unit: f64) -> Result<f64> {
    let Some(t_up) = history.last_own_post else {
        return Ok(0.0);
    };
    let decayed = |times: &[f64], rate: f64| -> Result<f64> {
        times.iter().try_fold(0.0, |acc, &t| {
            if t < t_up || t > t_query {
                return Err(Error::Integrity(format!(
                    "history timestamp {t} outside ({t_up}, {t_query})"
                )));
            }
            Ok(acc + (-rate * (t - t_up) / time_unit).exp())
        })
    };
    Ok(decayed(&history.post_times, alpha)? + decayed(&history.reply_times, beta)?)
}

/// Convex pull of the thread embedding towards the student: weight `ζ/(1+ζ)` on `u`.
pub fn project_thread<T: Scalar>(u: &[T], p: &[T], zeta: T) -> Vec<T> {
    let denom = T::one() + zeta;
    let (wu, wp) = (zeta / denom, T::one() / denom);
    u.iter().zip(p).map(|(&a, &b)| wu * a + wp * b).collect()
}

/// Thread the student last posted on, with its current dynamic embedding.
#[derive(Debug, Clone, Copy)]
pub struct LastThread<'a, T> {
    pub thread: usize,
    pub embedding: &'a [T],
}

/// `W_predᵀ · [û, onehot(student), p_last, onehot(last thread)] + B_pred`. The one-hot
/// blocks select rows directly. A cold-start student passes `None` for the last thread.
pub fn predict_next<T: Scalar>(
    u_hat: &[T],
    student: usize,
    last: Option<LastThread<'_, T>>,
    params: &ModelParams<T>,
) -> Result<Vec<T>> {
    let dims = params.dims;
    check_len("projected student embedding", u_hat, dims.d)?;
    if student >= dims.m {
        return Err(Error::Shape(format!("student {student} outside {} students", dims.m)));
    }
    if let Some(l) = &last {
        check_len("last thread embedding", l.embedding, dims.d)?;
        if l.thread >= dims.n {
            return Err(Error::Shape(format!("thread {} outside {} threads", l.thread, dims.n)));
        }
    }
    let w = &params.tensors.w_pred;
    let mut q = params.tensors.b_pred.to_vec();
    let mut add_row = |row: usize, scale: T| {
        if scale == T::zero() {
            return;
        }
        for (acc, &x) in q.iter_mut().zip(w.row(row).iter()) {
            *acc += x * scale;
        }
    };
    for (j, &x) in u_hat.iter().enumerate() {
        add_row(j, x);
    }
    add_row(dims.d + student, T::one());
    if let Some(l) = last {
        for (j, &x) in l.embedding.iter().enumerate() {
            add_row(dims.d + dims.m + j, x);
        }
        add_row(2 * dims.d + dims.m + l.thread, T::one());
    }
    Ok(q)
}

/// Distance of the prediction to `[onehot(target), target_proj]` plus the unsquared
/// temporal-smoothness penalties on both updates.
#[allow(clippy::too_many_arguments)]
pub fn loss<T: Scalar>(
    pred: &[T],
    target_thread: usize,
    target_proj: &[T],
    u_new: &[T],
    u_prev: &[T],
    p_new: &[T],
    p_prev: &[T],
    params: &ModelParams<T>,
) -> Result<T> {
    let dims = params.dims;
    check_len("prediction", pred, dims.pred_output())?;
    check_len("projected target", target_proj, dims.d)?;
    let residual = prediction_residual(pred, target_thread, target_proj, dims.n);
    let diff = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&x, &y)| x - y).collect() };
    Ok(l2_norm(&residual)
        + params.hyper.lambda_u * l2_norm(&diff(u_new, u_prev))
        + params.hyper.lambda_t * l2_norm(&diff(p_new, p_prev)))
}

/// `pred - [onehot_n(target), target_proj]`.
pub(crate) fn prediction_residual<T: Scalar>(pred: &[T], target: usize, target_proj: &[T], n: usize) -> Vec<T> {
    let mut r = pred.to_vec();
    r[target] -= T::one();
    for (slot, &t) in r[n..].iter_mut().zip(target_proj) {
        *slot -= t;
    }
    r
}
