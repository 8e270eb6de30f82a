//! Online gradient descent for a linear baseline `f_beta(x) = beta . x`, used
//! when no external baseline forecast exists.

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::objectives::{CostKind, LabelRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub beta: Vec<f64>,
    /// Step size `zeta`.
    pub step: f64,
}

impl BaselineParams {
    pub fn zeros(dim: usize, step: f64) -> Self {
        Self { beta: vec![0.0; dim], step }
    }

    pub fn raw_prediction(&self, x: &[f64]) -> Result<f64, SolverError> {
        if x.len() != self.beta.len() {
            return Err(SolverError::Dimension {
                expected: self.beta.len(),
                got: x.len(),
            });
        }
        Ok(self.beta.iter().zip(x).map(|(b, v)| b * v).sum())
    }

    /// `f_beta(x)` clipped to the label range.
    pub fn predict(&self, x: &[f64], range: &LabelRange) -> Result<f64, SolverError> {
        Ok(range.clip(self.raw_prediction(x)?))
    }
}

/// Gradient of the loss at `f_beta(x)` with respect to `beta`.
pub fn loss_gradient(params: &BaselineParams, x: &[f64], y: f64, loss: CostKind) -> Result<Vec<f64>, SolverError> {
    let pred = params.raw_prediction(x)?;
    match loss {
        CostKind::Squared => Ok(x.iter().map(|v| 2.0 * (pred - y) * v).collect()),
        other => Err(SolverError::NonDifferentiable(other.tag())),
    }
}

/// `beta <- beta - zeta * grad`.
pub fn ogd_baseline_step(
    params: &BaselineParams,
    x: &[f64],
    y: f64,
    loss: CostKind,
) -> Result<BaselineParams, SolverError> {
    if !params.beta.iter().all(|b| b.is_finite()) || !params.step.is_finite() {
        return Err(SolverError::NonFinite);
    }
    let g = loss_gradient(params, x, y, loss)?;
    Ok(BaselineParams {
        beta: params.beta.iter().zip(&g).map(|(b, d)| b - params.step * d).collect(),
        step: params.step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_examples() {
        let p = BaselineParams { beta: vec![0.5, -1.0], step: 0.3 };
        // perfect fit: 0.5*2 - 1*1 = 0
        let out = ogd_baseline_step(&p, &[2.0, 1.0], 0.0, CostKind::Squared).unwrap();
        assert_eq!(out.beta, p.beta);
        let p = BaselineParams::zeros(1, 0.5);
        let out = ogd_baseline_step(&p, &[1.0], 1.0, CostKind::Squared).unwrap();
        assert_abs_diff_eq!(out.beta[0], 1.0, epsilon = 1e-15);
        let p = BaselineParams { beta: vec![0.2], step: 0.0 };
        assert_eq!(ogd_baseline_step(&p, &[3.0], 1.0, CostKind::Squared).unwrap().beta, vec![0.2]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = BaselineParams { beta: vec![0.3, -0.7, 1.1], step: 0.1 };
        let x = [0.9, -1.3, 0.4];
        let y = 0.25;
        let g = loss_gradient(&p, &x, y, CostKind::Squared).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut up = p.clone();
            let mut dn = p.clone();
            up.beta[k] += h;
            dn.beta[k] -= h;
            let f = |q: &BaselineParams| CostKind::Squared.raw(q.raw_prediction(&x).unwrap(), y);
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = BaselineParams::zeros(2, 0.1);
        assert!(matches!(
            ogd_baseline_step(&p, &[1.0], 0.0, CostKind::Squared),
            Err(SolverError::Dimension { expected: 2, got: 1 })
        ));
        assert!(ogd_baseline_step(&p, &[1.0, 1.0], 0.0, CostKind::Absolute).is_err());
    }
}
