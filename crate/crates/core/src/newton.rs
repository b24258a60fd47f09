//! Damped Newton iteration with dense LU solves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square nonlinear system `F(x) = 0` with a dense Jacobian.
pub trait NonlinearSystem {
    fn len(&self) -> usize;
    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Entry that must stay strictly positive (the period), if any.
    fn positive_index(&self) -> Option<usize> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Damping {
    None,
    /// Backtracking on `‖F‖_∞`: halve the step until the residual decreases,
    /// at most `max_halvings` times.
    Armijo { factor: f64, max_halvings: usize },
}

impl Default for Damping {
    fn default() -> Self {
        Damping::Armijo {
            factor: 0.5,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iters: usize,
    pub damping: Damping,
    /// Emit `iter k residual r step s` through `log::info!`.
    pub log_iterations: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            tol_step: 1e-12,
            max_iters: 50,
            damping: Damping::default(),
            log_iterations: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0 && self.tol_step > 0.0) {
            return Err(Error::InvalidArgument("Newton tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let Damping::Armijo { factor, .. } = self.damping {
            if !(factor > 0.0 && factor < 1.0) {
                return Err(Error::InvalidArgument("backtracking factor must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖F(x_k)‖_∞` before each step.
    pub residual_history: Vec<f64>,
    /// `‖λ_k Δx_k‖_∞` of each accepted step.
    pub step_history: Vec<f64>,
    pub final_residual: f64,
    pub final_x: DVector<f64>,
}

/// Pivot threshold relative to the largest entry of the pivot row.
const PIVOT_RTOL: f64 = 1e-14;

/// LU factorization with partial pivoting that flags near-zero pivots.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    /// Returns `None` if some pivot is below `1e-14 · max|row|`.
    pub fn new(a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut row_scale = DMatrix::from_iterator(
            n,
            1,
            a.row_iter().map(|r| r.amax()),
        );
        let lu = a.lu();
        lu.p().permute_rows(&mut row_scale);
        let u = lu.u();
        for i in 0..n {
            let pivot = u[(i, i)].abs();
            if !pivot.is_finite() || pivot <= PIVOT_RTOL * row_scale[(i, 0)] || pivot == 0.0 {
                return None;
            }
        }
        Some(Self { lu })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.lu.solve(b)
    }
}

fn try_residual_norm<S: NonlinearSystem + ?Sized>(system: &S, x: &DVector<f64>) -> Option<f64> {
    match system.residual(x) {
        Ok(f) => {
            let r = f.amax();
            r.is_finite().then_some(r)
        }
        Err(_) => None,
    }
}

/// Newton iteration `x ← x - λ J(x)⁻¹ F(x)`.
///
/// Converged when `‖F‖_∞ ≤ tol_residual` or the accepted step is below
/// `tol_step`. Steps that would make the positive entry non-positive, or
/// whose residual cannot be evaluated, are halved. Hitting `max_iters`
/// returns a non-converged report.
pub fn solve<S: NonlinearSystem + ?Sized>(system: &S, x0: DVector<f64>, cfg: &NewtonConfig) -> Result<NewtonReport> {
    cfg.validate()?;
    if x0.len() != system.len() {
        return Err(Error::DimensionMismatch(format!(
            "initial guess has length {}, system has {}",
            x0.len(),
            system.len()
        )));
    }
    let pos = system.positive_index();
    if let Some(k) = pos {
        if x0[k].is_nan() || x0[k] <= 0.0 {
            return Err(Error::NonpositivePeriod(x0[k]));
        }
    }
    let mut x = x0;
    let mut residual_history = Vec::new();
    let mut step_history = Vec::new();
    let mut f = system.residual(&x)?;
    let mut r = f.amax();
    for k in 0..cfg.max_iters {
        if r <= cfg.tol_residual {
            return Ok(NewtonReport {
                converged: true,
                iterations: k,
                residual_history,
                step_history,
                final_residual: r,
                final_x: x,
            });
        }
        let jac = system.jacobian(&x)?;
        let lu = DenseLu::new(jac).ok_or(Error::SingularJacobian(k))?;
        let delta = lu.solve(&f).ok_or(Error::SingularJacobian(k))?;

        let mut lambda = 1.0;
        let (factor, max_halvings) = match cfg.damping {
            Damping::None => (0.5, 0),
            Damping::Armijo { factor, max_halvings } => (factor, max_halvings),
        };
        let mut halvings = 0;
        let mut trial;
        let mut trial_r;
        loop {
            trial = &x - &delta * lambda;
            let admissible = pos.is_none_or(|p| trial[p] > 0.0);
            trial_r = if admissible { try_residual_norm(system, &trial) } else { None };
            let accept = match (cfg.damping, trial_r) {
                (_, None) => false,
                (Damping::None, Some(_)) => true,
                (Damping::Armijo { .. }, Some(tr)) => tr < r || halvings >= max_halvings,
            };
            if accept {
                break;
            }
            // Positivity and evaluability are enforced even without damping.
            if halvings >= max_halvings.max(30) {
                return Ok(NewtonReport {
                    converged: false,
                    iterations: k,
                    residual_history,
                    step_history,
                    final_residual: r,
                    final_x: x,
                });
            }
            lambda *= factor;
            halvings += 1;
        }
        let step = (&delta * lambda).amax();
        residual_history.push(r);
        step_history.push(step);
        if cfg.log_iterations {
            log::info!("iter {} residual {:e} step {:e}", k + 1, r, step);
        }
        x = trial;
        f = system.residual(&x)?;
        r = trial_r.unwrap_or_else(|| f.amax());
        if step <= cfg.tol_step {
            return Ok(NewtonReport {
                converged: true,
                iterations: k + 1,
                residual_history,
                step_history,
                final_residual: r,
                final_x: x,
            });
        }
    }
    let converged = r <= cfg.tol_residual;
    Ok(NewtonReport {
        converged,
        iterations: cfg.max_iters,
        residual_history,
        step_history,
        final_residual: r,
        final_x: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cubic;

    impl NonlinearSystem for Cubic {
        fn len(&self) -> usize {
            2
        }

        fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_row_slice(&[x[0].powi(3) - 3.0, x[1] - 2.0 * x[0]]))
        }

        fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(2, 2, &[3.0 * x[0] * x[0], 0.0, -2.0, 1.0]))
        }

        fn positive_index(&self) -> Option<usize> {
            Some(0)
        }
    }

    #[test]
    fn converges_on_cube_root() {
        let rep = solve(&Cubic, DVector::from_row_slice(&[1.0, 0.0]), &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
        let c = 3f64.cbrt();
        assert!((rep.final_x[0] - c).abs() < 1e-12);
        assert!((rep.final_x[1] - 2.0 * c).abs() < 1e-12);
        assert_eq!(rep.residual_history.len(), rep.iterations);
        assert_eq!(rep.step_history.len(), rep.iterations);
    }

    #[test]
    fn exact_start_takes_no_step() {
        let c = 3f64.cbrt();
        let x0 = DVector::from_row_slice(&[c, 2.0 * c]);
        let rep = solve(&Cubic, x0, &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
    }

    #[test]
    fn positivity_guard_rejects_sign_flip() {
        // From x = 0.1 the full step overshoots to a large positive value; from a
        // tiny positive value with a bad derivative it would flip. Starting at a
        // non-positive entry is rejected outright.
        let err = solve(&Cubic, DVector::from_row_slice(&[0.0, 0.0]), &NewtonConfig::default());
        assert!(matches!(err, Err(Error::NonpositivePeriod(_))));
        let rep = solve(&Cubic, DVector::from_row_slice(&[0.05, 0.0]), &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
    }

    #[test]
    fn singular_jacobian_reported() {
        struct Flat;
        impl NonlinearSystem for Flat {
            fn len(&self) -> usize {
                2
            }
            fn residual(&self, _x: &DVector<f64>) -> Result<DVector<f64>> {
                Ok(DVector::from_row_slice(&[1.0, 1.0]))
            }
            fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
                Ok(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]))
            }
        }
        let err = solve(&Flat, DVector::zeros(2), &NewtonConfig::default()).unwrap_err();
        assert_eq!(err, Error::SingularJacobian(0));
    }

    #[test]
    fn max_iters_gives_unconverged_report() {
        let cfg = NewtonConfig {
            max_iters: 1,
            ..NewtonConfig::default()
        };
        let rep = solve(&Cubic, DVector::from_row_slice(&[1.0, 0.0]), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn config_validation() {
        let bad = NewtonConfig {
            tol_residual: 0.0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonConfig {
            max_iters: 0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
