use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{event_backward, event_forward, Dims, EventInputs, Hyper, ModelParams, Tensors, TENSOR_NAMES};

/// Gradients smaller than this are compared absolutely rather than relatively, so that
/// entries whose true gradient vanishes are not judged on floating-point noise.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor and flat index where the worst disagreement occurred.
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub entries_checked: usize,
}

/// Reverse-mode gradient of the per-event loss.
pub fn analytic_gradient(params: &ModelParams<f64>, inp: &EventInputs<f64>) -> Tensors<f64> {
    let fwd = event_forward(params, inp);
    let mut grads = Tensors::zeros(&params.dims);
    event_backward(params, inp, &fwd, &mut grads);
    grads
}

pub fn grad_check(params: &ModelParams<f64>, inp: &EventInputs<f64>, eps: f64) -> GradCheckReport {
    grad_check_with(params, inp, eps, analytic_gradient)
}

/// Compares `gradient` against central differences of the per-event loss for every
/// parameter entry. Relative error is `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn grad_check_with(
    params: &ModelParams<f64>,
    inp: &EventInputs<f64>,
    eps: f64,
    gradient: impl Fn(&ModelParams<f64>, &EventInputs<f64>) -> Tensors<f64>,
) -> GradCheckReport {
    let analytic = gradient(params, inp);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: TENSOR_NAMES[0],
        worst_index: 0,
        entries_checked: 0,
    };
    for (ti, name) in TENSOR_NAMES.iter().enumerate() {
        let len = analytic.slices()[ti].len();
        for j in 0..len {
            let original = probe.tensors.slices()[ti][j];
            probe.tensors.slices_mut()[ti][j] = original + eps;
            let plus = event_forward(&probe, inp).loss();
            probe.tensors.slices_mut()[ti][j] = original - eps;
            let minus = event_forward(&probe, inp).loss();
            probe.tensors.slices_mut()[ti][j] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.slices()[ti][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name;
                report.worst_index = j;
            }
            report.entries_checked += 1;
        }
    }
    report
}

/// A random event on the given dimensions with every code path active: projection,
/// a previous thread, both updates and a thread target pulled towards the student.
pub fn random_instance(seed: u64, dims: Dims) -> (ModelParams<f64>, EventInputs<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = Hyper {
        lambda_u: rng.random_range(0.2..2.0),
        lambda_t: rng.random_range(0.2..2.0),
        ..Hyper::default()
    };
    let mut params = ModelParams::init(dims, hyper, &mut rng).expect("valid dimensions");
    // Larger weights keep the prediction residual well away from zero.
    params.tensors.w_pred.mapv_inplace(|x| 5.0 * x);
    params.tensors.w_u.mapv_inplace(|x| 10.0 * x);
    params.tensors.w_p.mapv_inplace(|x| 10.0 * x);
    params.tensors.b_pred.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    let mut vec = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    let u_prev = vec(dims.d);
    let p_prev = vec(dims.d);
    let raw_theta = vec(dims.k);
    let last_emb = vec(dims.d);
    let total: f64 = raw_theta.iter().sum();
    let zeta: f64 = rng.random_range(0.0..3.0);
    let target_proj = crate::model::project_thread(&u_prev, &p_prev, zeta);
    let inp = EventInputs {
        student: rng.random_range(0..dims.m),
        thread: rng.random_range(0..dims.n),
        u_prev,
        p_prev,
        theta: raw_theta.iter().map(|x| x / total).collect(),
        delta_u: rng.random_range(0.0..3.0),
        delta_p: rng.random_range(0.0..3.0),
        week: rng.random_range(0..dims.s),
        last_thread: Some((rng.random_range(0..dims.n), last_emb)),
        target_proj,
        project_student: true,
        update_student: true,
        update_thread: true,
    };
    (params, inp)
}
