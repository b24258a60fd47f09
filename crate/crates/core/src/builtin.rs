//! Built-in problems.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{AffineConstraints, ConstraintTerm};
use crate::error::{Error, Result};
use crate::problem::DelayProblem;

/// `y'(t) = -y(t - τ)`, `τ = p + y(t)`: a scalar equation whose delay
/// depends on the current state. Periodic orbits are born in a Hopf
/// bifurcation at `p = π/2` with period `2π`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SdProto;

impl SdProto {
    /// Phase and amplitude conditions
    /// `[v(0); 2∫_0^1 sin(2πt) v(t) dt - y0]`.
    pub fn constraints(&self, y0: f64) -> AffineConstraints {
        let terms = vec![
            ConstraintTerm::Point {
                t: 0.0,
                weights: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            },
            ConstraintTerm::Integral {
                weight: Arc::new(|t| DMatrix::from_row_slice(2, 1, &[0.0, 2.0 * (2.0 * PI * t).sin()])),
            },
            ConstraintTerm::Constant {
                offset: DVector::from_row_slice(&[0.0, -y0]),
            },
        ];
        AffineConstraints::new(2, 1, terms).expect("shapes are fixed")
    }
}

impl DelayProblem for SdProto {
    fn dim(&self) -> usize {
        1
    }

    fn n_params(&self) -> usize {
        1
    }

    fn n_delays(&self) -> usize {
        1
    }

    fn smoothness_order(&self) -> usize {
        usize::MAX
    }

    fn rhs(&self, u: &[f64], _p: &[f64], out: &mut [f64]) {
        out[0] = -u[1];
    }

    fn delay(&self, _j: usize, u: &[f64], p: &[f64]) -> f64 {
        p[0] + u[0]
    }

    fn rhs_derivatives(&self, _u: &[f64], _p: &[f64], du: &mut DMatrix<f64>, dp: &mut DMatrix<f64>) {
        du[(0, 0)] = 0.0;
        du[(0, 1)] = -1.0;
        dp[(0, 0)] = 0.0;
    }

    fn delay_derivatives(&self, _j: usize, _u: &[f64], _p: &[f64], du: &mut [f64], dp: &mut [f64]) {
        du[0] = 1.0;
        dp[0] = 1.0;
    }
}

/// Maps an amplitude parameter to the constraints of a problem family.
pub type ConstraintFamily = Arc<dyn Fn(f64) -> AffineConstraints + Send + Sync>;

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Result<(Arc<dyn DelayProblem>, ConstraintFamily)> {
    match name {
        "sd_proto" => Ok((Arc::new(SdProto), Arc::new(|y0| SdProto.constraints(y0)))),
        other => Err(Error::InvalidArgument(format!("unknown problem `{other}`"))),
    }
}
