use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sdcolloc::harness::{continue_in_y0, hopf_seed};
use sdcolloc::newton::{solve, DenseLu};
use sdcolloc::{CollocationSystem, Damping, Error, Mesh, NewtonConfig, NodeFamily, NonlinearSystem, SdProto};

fn mesh(l: usize, m: usize) -> Arc<Mesh> {
    Arc::new(Mesh::uniform(l, m, NodeFamily::GaussLegendre).unwrap())
}

fn assert_report_shape(r: &sdcolloc::NewtonReport, tol: f64) {
    assert_eq!(r.residual_history.len(), r.iterations);
    assert_eq!(r.step_history.len(), r.iterations);
    if r.converged {
        assert!(r.final_residual <= tol, "converged with residual {}", r.final_residual);
    }
}

fn last_three_decreasing(h: &[f64], last: f64) -> bool {
    let mut all: Vec<f64> = h.to_vec();
    all.push(last);
    let tail = &all[all.len().saturating_sub(3)..];
    tail.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn hopf_seed_converges_quickly() {
    let m = mesh(20, 4);
    let cons = SdProto.constraints(0.1);
    let sys = CollocationSystem::new(&SdProto, &cons, m.clone()).unwrap();
    let cfg = NewtonConfig::default();
    let r = solve(&sys, hopf_seed(0.1, &m), &cfg).unwrap();
    assert!(r.converged);
    assert!(r.iterations <= 10, "{} iterations", r.iterations);
    assert_report_shape(&r, cfg.tol_residual);
    assert!(last_three_decreasing(&r.residual_history, r.final_residual));
    let period = r.final_x[sys.layout().period_index()];
    assert!(period > 6.0 && period < 6.6, "T = {period}");
}

#[test]
fn prototype_continuation_reaches_period_seven() {
    let m = mesh(10, 5);
    let cfg = NewtonConfig {
        tol_residual: 1e-12,
        ..NewtonConfig::default()
    };
    let family = sdcolloc::builtin("sd_proto").unwrap().1;
    let sol = continue_in_y0(&SdProto, &family, 0.1, 0.75, 14, &m, hopf_seed(0.1, &m), &cfg).unwrap();
    assert!((sol.period() - 7.0).abs() < 0.01, "T = {}", sol.period());
    assert_report_shape(&sol.report, cfg.tol_residual);

    // exact start
    let cons = SdProto.constraints(0.75);
    let sys = CollocationSystem::new(&SdProto, &cons, m.clone()).unwrap();
    let again = solve(&sys, sol.flat(), &cfg).unwrap();
    assert!(again.converged && again.iterations <= 1);

    // local uniqueness under relative perturbations of size 1e-3
    let mut rng = StdRng::seed_from_u64(11);
    let x = sol.flat();
    for _ in 0..5 {
        let x0 = x.map(|xi| xi * (1.0 + 1e-3 * rng.random_range(-1.0..1.0)));
        let r = solve(&sys, x0, &cfg).unwrap();
        assert!(r.converged);
        assert!((&r.final_x - &x).amax() <= 1e-9);
        assert!(last_three_decreasing(&r.residual_history, r.final_residual));
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let m = mesh(12, 3);
    let cons = SdProto.constraints(0.3);
    let sys = CollocationSystem::new(&SdProto, &cons, m.clone()).unwrap();
    let cfg = NewtonConfig::default();
    let a = solve(&sys, hopf_seed(0.3, &m), &cfg).unwrap();
    let b = solve(&sys, hopf_seed(0.3, &m), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.final_x.as_slice(), b.final_x.as_slice());
}

#[test]
fn iteration_cap_gives_unconverged_report() {
    let m = mesh(10, 3);
    let cons = SdProto.constraints(0.5);
    let sys = CollocationSystem::new(&SdProto, &cons, m.clone()).unwrap();
    let cfg = NewtonConfig {
        max_iters: 1,
        ..NewtonConfig::default()
    };
    let r = solve(&sys, hopf_seed(0.5, &m), &cfg).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 1);
    assert_report_shape(&r, cfg.tol_residual);
}

#[test]
fn rejects_bad_start_and_config() {
    let m = mesh(4, 2);
    let cons = SdProto.constraints(0.1);
    let sys = CollocationSystem::new(&SdProto, &cons, m.clone()).unwrap();
    let mut x0 = hopf_seed(0.1, &m);
    x0[sys.layout().period_index()] = 0.0;
    assert!(matches!(solve(&sys, x0, &NewtonConfig::default()), Err(Error::NonpositivePeriod(_))));
    assert!(solve(&sys, DVector::zeros(3), &NewtonConfig::default()).is_err());
    for bad in [
        NewtonConfig {
            tol_residual: 0.0,
            ..NewtonConfig::default()
        },
        NewtonConfig {
            max_iters: 0,
            ..NewtonConfig::default()
        },
    ] {
        assert!(solve(&sys, hopf_seed(0.1, &m), &bad).is_err());
    }
}

/// `F(x) = (x0 - 1, 0)`: the Jacobian has a zero row.
struct Degenerate;

impl NonlinearSystem for Degenerate {
    fn len(&self) -> usize {
        2
    }
    fn residual(&self, x: &DVector<f64>) -> sdcolloc::Result<DVector<f64>> {
        Ok(DVector::from_row_slice(&[x[0] - 1.0, 0.0]))
    }
    fn jacobian(&self, _x: &DVector<f64>) -> sdcolloc::Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))
    }
}

#[test]
fn singular_jacobian_reports_iteration() {
    let err = solve(&Degenerate, DVector::from_row_slice(&[3.0, 0.0]), &NewtonConfig::default()).unwrap_err();
    assert_eq!(err, Error::SingularJacobian(0));
    assert!(err.to_string().contains("iteration 0"));
    assert!(DenseLu::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0 + 1e-16])).is_none());
}

/// Period guard: a full Newton step would drive `x[0]` negative.
struct Guarded;

impl NonlinearSystem for Guarded {
    fn len(&self) -> usize {
        1
    }
    fn residual(&self, x: &DVector<f64>) -> sdcolloc::Result<DVector<f64>> {
        Ok(DVector::from_element(1, (10.0 * x[0]).ln()))
    }
    fn jacobian(&self, x: &DVector<f64>) -> sdcolloc::Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, 1.0 / x[0]))
    }
    fn positive_index(&self) -> Option<usize> {
        Some(0)
    }
}

#[test]
fn positive_entry_stays_positive() {
    for damping in [Damping::None, Damping::default()] {
        let cfg = NewtonConfig {
            damping,
            ..NewtonConfig::default()
        };
        // a full step from 1 lands at 1 - ln 10 < 0, from 3 at 3 - 3 ln 30 < 0
        for start in [1.0, 3.0, 0.05] {
            let r = solve(&Guarded, DVector::from_element(1, start), &cfg).unwrap();
            assert!(r.converged);
            assert!((r.final_x[0] - 0.1).abs() < 1e-9);
        }
    }
}
