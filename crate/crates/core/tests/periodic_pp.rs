use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use sdcolloc::harness::fit_slope;
use sdcolloc::ppoly::{
    integral_operator, lipschitz_seminorm_estimate, norm_lipschitz_estimate, norm_sup_grid, project_pl, scalar_fn,
    uniform_grid, FnPeriodic,
};
use sdcolloc::{DifferentiablePeriodic, DiscontinuousPP, ExtendedVector, Mesh, NodeFamily, PeriodicFunction, PeriodicPP};

fn mesh(l: usize, m: usize) -> Arc<Mesh> {
    Arc::new(Mesh::uniform(l, m, NodeFamily::GaussLegendre).unwrap())
}

fn sine() -> impl DifferentiablePeriodic {
    scalar_fn(|t| (2.0 * PI * t).sin(), |t| 2.0 * PI * (2.0 * PI * t).cos())
}

fn grid_error(a: &impl PeriodicFunction, b: &impl PeriodicFunction) -> f64 {
    uniform_grid(10001)
        .map(|t| (a.value(t)[0] - b.value(t)[0]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn constant_function_is_constant() {
    let v = PeriodicPP::constant(mesh(7, 3), &[2.5, -1.0]);
    for t in [-3.7, 0.0, 0.123, 0.5, 1.0, 42.42] {
        let x = v.value(t);
        assert!((x[0] - 2.5).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
        assert!(v.derivative(t).iter().all(|d| d.abs() < 1e-12));
    }
}

#[test]
fn wrap_around_is_bit_exact() {
    let v = PeriodicPP::interpolate(mesh(20, 5), &sine());
    assert_eq!(v.value(1.25), v.value(0.25));
    assert_eq!(v.value(-0.75), v.value(0.25));
    assert_eq!(v.derivative(1.25), v.derivative(0.25));
}

#[test]
fn sine_interpolant_accuracy() {
    let v = PeriodicPP::interpolate(mesh(20, 5), &sine());
    let err = (v.value(0.3)[0] - (0.6 * PI).sin()).abs();
    // (2π/20)^6 / 6! ≈ 1.3e-6 bounds the degree-5 interpolation error
    assert!(err < 1.5e-6, "{err}");
    let v4 = PeriodicPP::interpolate(mesh(10, 4), &sine());
    assert!(v4.derivative(0.25)[0].abs() < 2.0 * PI * (2.0 * PI / 10.0f64).powi(4));
}

#[test]
fn derivative_at_breakpoint_is_left_slope() {
    // m = 1, L = 2: nodes 0 -> 0, 0.5 -> 1; slope +2 on the left of 0.5, -2 on the right
    let v = PeriodicPP::from_nodal(mesh(2, 1), 1, vec![0.0, 1.0]).unwrap();
    assert_eq!(v.derivative(0.5), vec![2.0]);
    assert_eq!(v.derivative(0.5 + 1e-9), vec![-2.0]);
    assert_eq!(v.derivative(0.0), vec![-2.0]);
}

#[test]
fn projection_reproduces_polynomials_of_degree_below_m() {
    let msh = mesh(5, 4);
    let cubic = FnPeriodic::new(1, |t, o: &mut [f64]| o[0] = 1.0 - 2.0 * t + 3.0 * t * t - 0.5 * t * t * t);
    let p = project_pl(&cubic, msh);
    for t in [0.01, 0.33, 0.5, 0.77, 0.99] {
        assert!((p.value(t)[0] - cubic.value(t)[0]).abs() < 1e-13);
    }
}

#[test]
fn projection_error_of_sine_is_fourth_order() {
    let pts: Vec<(usize, f64)> = [10, 20, 40]
        .iter()
        .map(|&l| (l, grid_error(&project_pl(&sine(), mesh(l, 4)), &sine())))
        .collect();
    let slope = fit_slope(&pts).unwrap();
    assert!((slope - 4.0).abs() < 0.3, "{slope}");
}

#[test]
fn projection_of_kink_is_first_order() {
    let kink = FnPeriodic::new(1, |t, o: &mut [f64]| {
        let d = (t - t.floor() - 1.0 / 3.0).abs();
        o[0] = d.min(1.0 - d);
    });
    let pts: Vec<(usize, f64)> = [10, 20, 40, 80]
        .iter()
        .map(|&l| (l, grid_error(&project_pl(&kink, mesh(l, 3)), &kink)))
        .collect();
    let slope = fit_slope(&pts).unwrap();
    assert!((0.5..=1.5).contains(&slope), "{slope}");
}

#[test]
fn integral_operator_closed_forms() {
    let msh = mesh(6, 3);
    let zero = DiscontinuousPP::zeros(msh.clone(), 1);
    let x = integral_operator(&zero, &[1.5], &[7.0, 2.0]).unwrap();
    assert!(x.v.values().iter().all(|v| *v == 1.5));
    assert_eq!(x.alpha, vec![1.5]);
    assert_eq!(x.mu, vec![7.0, 2.0]);

    let one = DiscontinuousPP::from_values(msh.clone(), 1, vec![1.0; msh.num_collocation_nodes()]).unwrap();
    let x = integral_operator(&one, &[0.0], &[1.0]).unwrap();
    assert!(x.v.values().iter().all(|v| v.abs() < 1e-15));
    assert!((x.alpha[0] - 1.0).abs() < 1e-15);
}

#[test]
fn integral_operator_recovers_sine_from_cosine() {
    let cosine = FnPeriodic::new(1, |t, o: &mut [f64]| o[0] = (2.0 * PI * t).cos());
    let target = FnPeriodic::new(1, |t, o: &mut [f64]| o[0] = (2.0 * PI * t).sin() / (2.0 * PI));
    for m in [3, 4, 5] {
        let x = integral_operator(&project_pl(&cosine, mesh(20, m)), &[0.0], &[1.0]).unwrap();
        let err = grid_error(&x.v, &target);
        assert!(err < 5.0 * (2.0 * PI / 20.0f64).powi(m as i32), "m = {m}: {err}");
        assert!(x.alpha[0].abs() < 1e-12);
    }
}

#[test]
fn grid_norms() {
    let msh = mesh(4, 2);
    let zero = ExtendedVector::new(PeriodicPP::zeros(msh.clone(), 1), vec![0.0], vec![0.0]).unwrap();
    assert_eq!(norm_sup_grid(&zero, 10001).unwrap(), 0.0);
    let x = ExtendedVector::new(PeriodicPP::zeros(msh.clone(), 1), vec![2.0], vec![1.0, 3.0]).unwrap();
    assert_eq!(norm_sup_grid(&x, 10001).unwrap(), 3.0);
    let s = ExtendedVector::new(PeriodicPP::interpolate(mesh(20, 5), &sine()), vec![0.0], vec![0.0]).unwrap();
    assert!((norm_sup_grid(&s, 10001).unwrap() - 1.0).abs() < 1e-5);
    assert!(norm_sup_grid(&s, 1).is_err());
}

#[test]
fn lipschitz_estimates() {
    let c = ExtendedVector::new(PeriodicPP::constant(mesh(5, 3), &[-0.7]), vec![0.0], vec![0.0]).unwrap();
    assert!((norm_lipschitz_estimate(&c, 1001).unwrap() - 0.7).abs() < 1e-14);

    let s = PeriodicPP::interpolate(mesh(20, 5), &sine());
    assert!((lipschitz_seminorm_estimate(&s, 10001).unwrap() - 2.0 * PI).abs() < 1e-3);

    let hat = PeriodicPP::from_nodal(mesh(4, 1), 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
    assert!((lipschitz_seminorm_estimate(&hat, 10001).unwrap() - 4.0).abs() < 1e-9);
    let x = ExtendedVector::new(hat, vec![0.0], vec![0.0]).unwrap();
    assert!((norm_lipschitz_estimate(&x, 10001).unwrap() - 4.0).abs() < 1e-9);
    assert!(norm_lipschitz_estimate(&x, 2).is_err());
}

#[test]
fn smooth_interpolation_error_slope_at_least_m_minus_half() {
    let z = FnPeriodic::new(1, |t, o: &mut [f64]| o[0] = (0.8 * (2.0 * PI * t).sin()).exp());
    for m in [2, 3, 4] {
        let pts: Vec<(usize, f64)> = [10, 20, 40, 80]
            .iter()
            .map(|&l| (l, grid_error(&project_pl(&z, mesh(l, m)), &z)))
            .collect();
        let slope = fit_slope(&pts).unwrap();
        assert!(slope >= m as f64 - 0.5, "m = {m}: {slope}");
    }
}

fn random_pp(l: usize, m: usize, seed: &[f64]) -> PeriodicPP {
    let msh = mesh(l, m);
    let n = msh.num_nodes();
    PeriodicPP::from_nodal(msh, 1, (0..n).map(|k| seed[k % seed.len()] * ((k * 7 + 3) % 11) as f64).collect()).unwrap()
}

proptest! {
    #[test]
    fn evaluation_is_one_periodic(l in 1usize..30, m in 1usize..7, seed in prop::collection::vec(-2.0f64..2.0, 1..8), k in 0u32..4096, shift in -3i32..4) {
        let v = random_pp(l, m, &seed);
        // dyadic t keeps t + shift exact
        let t = k as f64 / 4096.0;
        prop_assert_eq!(v.value(t), v.value(t + shift as f64));
        prop_assert_eq!(v.value(0.0), v.value(1.0));
    }

    #[test]
    fn projection_is_idempotent(l in 1usize..20, m in 1usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let msh = mesh(l, m);
        let z = FnPeriodic::new(1, |t, o: &mut [f64]| o[0] = a * (2.0 * PI * t).sin() + b * (6.0 * PI * t).cos());
        let p = project_pl(&z, msh.clone());
        let pp = project_pl(&p, msh);
        prop_assert_eq!(p.values(), pp.values());
    }

    #[test]
    fn integral_operator_output_continuous_and_periodic(l in 1usize..20, m in 1usize..7, seed in prop::collection::vec(-2.0f64..2.0, 1..8), alpha in -1.0f64..1.0) {
        let msh = mesh(l, m);
        let n = msh.num_collocation_nodes();
        let w = DiscontinuousPP::from_values(msh.clone(), 1, (0..n).map(|k| seed[k % seed.len()] + k as f64 * 0.01).collect()).unwrap();
        let x = integral_operator(&w, &[alpha], &[1.0]).unwrap();
        prop_assert_eq!(x.v.value(0.0), x.v.value(1.0));
        let mut left = [0.0];
        let mut right = [0.0];
        for i in 0..l {
            x.v.piece_value_into(i, 1.0, &mut left);
            x.v.piece_value_into((i + 1) % l, 0.0, &mut right);
            prop_assert!((left[0] - right[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_operator_is_linear(l in 1usize..16, m in 1usize..6, s1 in prop::collection::vec(-1.0f64..1.0, 1..6), s2 in prop::collection::vec(-1.0f64..1.0, 1..6), a in -2.0f64..2.0, b in -2.0f64..2.0, al in -1.0f64..1.0, bl in -1.0f64..1.0) {
        let msh = mesh(l, m);
        let n = msh.num_collocation_nodes();
        let w1 = DiscontinuousPP::from_values(msh.clone(), 1, (0..n).map(|k| s1[k % s1.len()]).collect()).unwrap();
        let w2 = DiscontinuousPP::from_values(msh.clone(), 1, (0..n).map(|k| s2[(k * 3) % s2.len()]).collect()).unwrap();
        let comb = w1.linear_combination(a, &w2, b).unwrap();
        let lhs = integral_operator(&comb, &[a * al + b * bl], &[a - b]).unwrap();
        let x1 = integral_operator(&w1, &[al], &[1.0]).unwrap();
        let x2 = integral_operator(&w2, &[bl], &[-1.0]).unwrap();
        for k in 0..msh.num_nodes() {
            let rhs = a * x1.v.values()[k] + b * x2.v.values()[k];
            prop_assert!((lhs.v.values()[k] - rhs).abs() < 1e-13);
        }
        prop_assert!((lhs.alpha[0] - (a * x1.alpha[0] + b * x2.alpha[0])).abs() < 1e-13);
        prop_assert!((lhs.mu[0] - (a * x1.mu[0] + b * x2.mu[0])).abs() < 1e-13);
    }
}
