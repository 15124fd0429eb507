use crate::model::{Dims, Tensors};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adaptive-moment optimizer over the full tensor set.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    first: Tensors<T>,
    second: Tensors<T>,
    steps: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dims: &Dims, learning_rate: f64) -> Self {
        Adam {
            lr: T::of(learning_rate),
            first: Tensors::zeros(dims),
            second: Tensors::zeros(dims),
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut Tensors<T>, grads: &Tensors<T>) {
        self.steps += 1;
        let (b1, b2, eps) = (T::of(BETA1), T::of(BETA2), T::of(EPSILON));
        let c1 = T::one() - b1.powi(self.steps);
        let c2 = T::one() - b2.powi(self.steps);
        let slots = params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.first.slices_mut().into_iter().zip(self.second.slices_mut()));
        for ((p, g), (m, v)) in slots {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        let dims = Dims { d: 1, k: 1, s: 1, m: 1, n: 1 };
        let mut p = Tensors::<f64>::zeros(&dims);
        let mut g = Tensors::<f64>::zeros(&dims);
        g.b_pred[0] = 3.0;
        g.b_pred[1] = -0.2;
        let mut opt = Adam::new(&dims, 0.01);
        opt.step(&mut p, &g);
        assert!((p.b_pred[0] + 0.01).abs() < 1e-9);
        assert!((p.b_pred[1] - 0.01).abs() < 1e-9);
        assert_eq!(p.w_u[[0, 0]], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let dims = Dims { d: 1, k: 1, s: 1, m: 1, n: 1 };
        let mut p = Tensors::<f64>::zeros(&dims);
        p.w_delta[0] = 2.0;
        let mut opt = Adam::new(&dims, 0.05);
        for _ in 0..500 {
            let mut g = Tensors::zeros(&dims);
            g.w_delta[0] = 2.0 * (p.w_delta[0] - 0.5);
            opt.step(&mut p, &g);
        }
        assert!((p.w_delta[0] - 0.5).abs() < 1e-2);
    }
}
