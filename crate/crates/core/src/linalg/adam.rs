use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
}

impl AdamState {
    pub fn like(param: &Matrix) -> AdamState {
        AdamState {
            m: Matrix::zeros(param.rows(), param.cols()),
            v: Matrix::zeros(param.rows(), param.cols()),
        }
    }
}

/// One bias-corrected Adam update. `t` is the 1-based step index shared by
/// every tensor updated in the same optimizer step.
pub fn adam_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    t: u64,
    lr: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::shape(format!(
            "adam_step: param {}x{}, grad {}x{}, moments {}x{}",
            param.rows(),
            param.cols(),
            grad.rows(),
            grad.cols(),
            state.m.rows(),
            state.m.cols()
        )));
    }
    if t == 0 {
        return Err(Error::usage("adam_step: step index must be >= 1"));
    }
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    let (p, g) = (param.data_mut(), grad.data());
    let (m, v) = (state.m.data_mut(), state.v.data_mut());
    for i in 0..p.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Matrix::filled(2, 2, 1.5);
        let g = Matrix::zeros(2, 2);
        let mut st = AdamState::like(&p);
        adam_step(&mut p, &g, &mut st, 1, 1e-3).unwrap();
        assert_eq!(p, Matrix::filled(2, 2, 1.5));
    }

    #[test]
    fn first_step_matches_closed_form() {
        // At t=1 the bias corrections make m_hat = g and v_hat = g^2, so the
        // update is lr * g / (|g| + eps).
        let mut p = Matrix::filled(1, 1, 1.0);
        let g = Matrix::filled(1, 1, 0.5);
        let mut st = AdamState::like(&p);
        adam_step(&mut p, &g, &mut st, 1, 1e-3).unwrap();
        let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() <= 1e-15);
        assert!((p.get(0, 0) - 0.999).abs() <= 1e-6);
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let run = || {
            let mut p = Matrix::from_vec(1, 3, vec![0.1, -0.2, 0.3]).unwrap();
            let g = Matrix::from_vec(1, 3, vec![0.01, 0.02, -0.03]).unwrap();
            let mut st = AdamState::like(&p);
            for t in 1..=10 {
                adam_step(&mut p, &g, &mut st, t, 1e-3).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = Matrix::zeros(2, 2);
        let g = Matrix::zeros(2, 3);
        let mut st = AdamState::like(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, 1, 1e-3),
            Err(Error::Shape(_))
        ));
    }
}
