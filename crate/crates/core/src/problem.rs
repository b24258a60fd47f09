//! Delay equations with finitely many discrete, possibly state-dependent
//! delays,
//!
//! ```text
//! y'(t) = f(y(t - τ_0), ..., y(t - τ_nd), p),   τ_0 = 0,
//! τ_j   = τ_j(y(t - τ_0), ..., y(t - τ_{j-1}), p),
//! ```
//!
//! and their right-hand side after rescaling the period to 1:
//! `G(v, t, (T, p)) = T f(v(t - τ_0/T), ..., v(t - τ_nd/T), p)`.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::ppoly::{DifferentiablePeriodic, PeriodicFunction};

/// An autonomous delay equation in discrete-delay form.
///
/// Stacked states `u` hold `n_delays + 1` blocks of `dim` entries, block `j`
/// being the state at deviated time `t - τ_j`. Implementations must be pure.
pub trait DelayProblem: Send + Sync {
    /// State dimension `n_y`.
    fn dim(&self) -> usize;
    /// Parameter count `n_p` (the period is not counted).
    fn n_params(&self) -> usize;
    /// Number of non-trivial delays `n_d`.
    fn n_delays(&self) -> usize;
    /// Declared number of continuous derivatives of `f` and the delays.
    /// Only used to report the expected convergence order `min(ℓ, m)`.
    fn smoothness_order(&self) -> usize;

    fn rhs(&self, u: &[f64], p: &[f64], out: &mut [f64]);

    /// Delay `τ_j` for `j` in `1..=n_delays`; `u` holds blocks `0..j`.
    fn delay(&self, j: usize, u: &[f64], p: &[f64]) -> f64;

    /// `∂f/∂u` (`dim × (n_delays+1)·dim`) and `∂f/∂p` (`dim × n_params`).
    ///
    /// Defaults to central differences.
    fn rhs_derivatives(&self, u: &[f64], p: &[f64], du: &mut DMatrix<f64>, dp: &mut DMatrix<f64>) {
        fd_rhs_derivatives(self, u, p, du, dp)
    }

    /// `∂τ_j/∂u` (length `j·dim`) and `∂τ_j/∂p` (length `n_params`).
    ///
    /// Defaults to central differences.
    fn delay_derivatives(&self, j: usize, u: &[f64], p: &[f64], du: &mut [f64], dp: &mut [f64]) {
        fd_delay_derivatives(self, j, u, p, du, dp)
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central-difference `∂f/∂u`, `∂f/∂p`.
pub fn fd_rhs_derivatives<P: DelayProblem + ?Sized>(
    prob: &P,
    u: &[f64],
    p: &[f64],
    du: &mut DMatrix<f64>,
    dp: &mut DMatrix<f64>,
) {
    let n = prob.dim();
    let mut up = u.to_vec();
    let mut pp = p.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for k in 0..u.len() {
        let h = fd_step(u[k]);
        up[k] = u[k] + h;
        prob.rhs(&up, p, &mut fp);
        up[k] = u[k] - h;
        prob.rhs(&up, p, &mut fm);
        up[k] = u[k];
        for r in 0..n {
            du[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    for k in 0..p.len() {
        let h = fd_step(p[k]);
        pp[k] = p[k] + h;
        prob.rhs(u, &pp, &mut fp);
        pp[k] = p[k] - h;
        prob.rhs(u, &pp, &mut fm);
        pp[k] = p[k];
        for r in 0..n {
            dp[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
}

/// Central-difference `∂τ_j/∂u`, `∂τ_j/∂p`.
pub fn fd_delay_derivatives<P: DelayProblem + ?Sized>(
    prob: &P,
    j: usize,
    u: &[f64],
    p: &[f64],
    du: &mut [f64],
    dp: &mut [f64],
) {
    let mut up = u.to_vec();
    let mut pp = p.to_vec();
    for k in 0..u.len() {
        let h = fd_step(u[k]);
        up[k] = u[k] + h;
        let a = prob.delay(j, &up, p);
        up[k] = u[k] - h;
        let b = prob.delay(j, &up, p);
        up[k] = u[k];
        du[k] = (a - b) / (2.0 * h);
    }
    for k in 0..p.len() {
        let h = fd_step(p[k]);
        pp[k] = p[k] + h;
        let a = prob.delay(j, u, &pp);
        pp[k] = p[k] - h;
        let b = prob.delay(j, u, &pp);
        pp[k] = p[k];
        dp[k] = (a - b) / (2.0 * h);
    }
}

/// States along the delay chain at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedStates {
    /// Deviated arguments `θ_j = t - τ_j / T`, with `t` reduced to `[0, 1)`
    /// first and `θ_j` not reduced.
    pub theta: Vec<f64>,
    /// Delays `τ_j`, with `τ_0 = 0`.
    pub tau: Vec<f64>,
    /// Stacked states `v(θ_j)`.
    pub u: Vec<f64>,
}

fn check_mu<P: DelayProblem + ?Sized>(prob: &P, mu: &[f64]) -> Result<f64> {
    if mu.len() != prob.n_params() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "mu has length {}, expected {}",
            mu.len(),
            prob.n_params() + 1
        )));
    }
    let period = mu[0];
    if period.is_nan() || period <= 0.0 {
        return Err(Error::NonpositivePeriod(period));
    }
    Ok(period)
}

/// Evaluates the delay chain at `t` for the state history `v`.
pub fn delayed_states<P: DelayProblem + ?Sized>(
    prob: &P,
    v: &(impl PeriodicFunction + ?Sized),
    t: f64,
    mu: &[f64],
) -> Result<DelayedStates> {
    let period = check_mu(prob, mu)?;
    let n = prob.dim();
    if v.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "history has dimension {}, problem has {n}",
            v.dim()
        )));
    }
    let p = &mu[1..];
    let nd = prob.n_delays();
    let t = t - t.floor();
    let mut theta = Vec::with_capacity(nd + 1);
    let mut tau = Vec::with_capacity(nd + 1);
    let mut u = vec![0.0; n * (nd + 1)];
    theta.push(t);
    tau.push(0.0);
    v.value_into(t, &mut u[..n]);
    for j in 1..=nd {
        let tj = prob.delay(j, &u[..j * n], p);
        if !tj.is_finite() {
            return Err(Error::NonFiniteDelay { index: j });
        }
        let th = t - tj / period;
        v.value_into(th, &mut u[j * n..(j + 1) * n]);
        theta.push(th);
        tau.push(tj);
    }
    Ok(DelayedStates { theta, tau, u })
}

/// `G(v, t, μ) = T f(v(θ_0), ..., v(θ_nd), p)` with deviated arguments
/// wrapped modulo 1.
pub fn rhs_g<P: DelayProblem + ?Sized>(
    prob: &P,
    v: &(impl PeriodicFunction + ?Sized),
    t: f64,
    mu: &[f64],
) -> Result<Vec<f64>> {
    let states = delayed_states(prob, v, t, mu)?;
    let mut out = vec![0.0; prob.dim()];
    prob.rhs(&states.u, &mu[1..], &mut out);
    out.iter_mut().for_each(|o| *o *= mu[0]);
    Ok(out)
}

/// First-order expansion of `G` around `(v, μ)` at one time point:
///
/// `dG = Σ_j coeff[j] · dv(θ_j) + mu_coeff · dμ`.
///
/// The coefficients contain `v'(θ_j)` from the chain rule through the
/// state-dependent arguments; on a breakpoint the left derivative is used.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsLinearization {
    pub value: Vec<f64>,
    pub theta: Vec<f64>,
    /// `dim × dim` blocks, one per deviated argument.
    pub coeff: Vec<DMatrix<f64>>,
    /// `dim × (n_params + 1)`.
    pub mu_coeff: DMatrix<f64>,
}

impl RhsLinearization {
    /// Applies the expansion to a direction `(dv, dmu)`.
    pub fn apply(&self, dv: &(impl PeriodicFunction + ?Sized), dmu: &[f64]) -> Vec<f64> {
        let n = self.value.len();
        let mut out = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for (theta, a) in self.theta.iter().zip(&self.coeff) {
            dv.value_into(*theta, &mut buf);
            for (r, o) in out.iter_mut().enumerate() {
                for c in 0..n {
                    *o += a[(r, c)] * buf[c];
                }
            }
        }
        for (r, o) in out.iter_mut().enumerate() {
            for (c, d) in dmu.iter().enumerate() {
                *o += self.mu_coeff[(r, c)] * d;
            }
        }
        out
    }
}

pub fn linearize_rhs<P: DelayProblem + ?Sized>(
    prob: &P,
    v: &(impl DifferentiablePeriodic + ?Sized),
    t: f64,
    mu: &[f64],
) -> Result<RhsLinearization> {
    let states = delayed_states(prob, v, t, mu)?;
    let n = prob.dim();
    let nd = prob.n_delays();
    let n_mu = mu.len();
    let period = mu[0];
    let p = &mu[1..];

    // du_k = Σ_{i<=k} c[k][i] dv(θ_i) + d[k] dμ
    let mut c: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(nd + 1);
    let mut d: Vec<DMatrix<f64>> = Vec::with_capacity(nd + 1);
    c.push(vec![DMatrix::identity(n, n)]);
    d.push(DMatrix::zeros(n, n_mu));

    let mut vprime = vec![0.0; n];
    for j in 1..=nd {
        let mut g_u = vec![0.0; j * n];
        let mut g_p = vec![0.0; p.len()];
        prob.delay_derivatives(j, &states.u[..j * n], p, &mut g_u, &mut g_p);
        // dτ_j = Σ_i e[i] dv(θ_i) + e_mu dμ, with rows of length n.
        let mut e: Vec<DMatrix<f64>> = vec![DMatrix::zeros(1, n); j];
        let mut e_mu = DMatrix::zeros(1, n_mu);
        for k in 0..j {
            let gk = DMatrix::from_row_slice(1, n, &g_u[k * n..(k + 1) * n]);
            for (i, cki) in c[k].iter().enumerate() {
                e[i] += &gk * cki;
            }
            e_mu += &gk * &d[k];
        }
        for (q, gp) in g_p.iter().enumerate() {
            e_mu[(0, q + 1)] += gp;
        }
        // dθ_j = -dτ_j / T + τ_j dT / T²
        // du_j = dv(θ_j) + v'(θ_j) dθ_j
        v.derivative_into(states.theta[j], &mut vprime);
        let vp = DMatrix::from_column_slice(n, 1, &vprime);
        let mut cj: Vec<DMatrix<f64>> = e.iter().map(|ei| &vp * ei * (-1.0 / period)).collect();
        cj.push(DMatrix::identity(n, n));
        let mut dj = &vp * &e_mu * (-1.0 / period);
        for r in 0..n {
            dj[(r, 0)] += vprime[r] * states.tau[j] / (period * period);
        }
        c.push(cj);
        d.push(dj);
    }

    let mut f = vec![0.0; n];
    prob.rhs(&states.u, p, &mut f);
    let mut f_u = DMatrix::zeros(n, n * (nd + 1));
    let mut f_p = DMatrix::zeros(n, p.len());
    prob.rhs_derivatives(&states.u, p, &mut f_u, &mut f_p);

    let mut coeff = vec![DMatrix::zeros(n, n); nd + 1];
    let mut mu_coeff = DMatrix::zeros(n, n_mu);
    for k in 0..=nd {
        let fk = f_u.columns(k * n, n).into_owned();
        for (i, cki) in c[k].iter().enumerate() {
            coeff[i] += &fk * cki * period;
        }
        mu_coeff += &fk * &d[k] * period;
    }
    for r in 0..n {
        mu_coeff[(r, 0)] += f[r];
        for q in 0..p.len() {
            mu_coeff[(r, q + 1)] += period * f_p[(r, q)];
        }
    }
    let value = f.iter().map(|x| x * period).collect();
    Ok(RhsLinearization {
        value,
        theta: states.theta,
        coeff,
        mu_coeff,
    })
}

/// Directional derivative of [`rhs_g`] at `(v, μ)` along `(dv, dmu)`.
pub fn rhs_g_jacobian_action<P: DelayProblem + ?Sized>(
    prob: &P,
    v: &(impl DifferentiablePeriodic + ?Sized),
    t: f64,
    mu: &[f64],
    dv: &(impl PeriodicFunction + ?Sized),
    dmu: &[f64],
) -> Result<Vec<f64>> {
    if dmu.len() != mu.len() {
        return Err(Error::DimensionMismatch("dmu and mu lengths differ".into()));
    }
    Ok(linearize_rhs(prob, v, t, mu)?.apply(dv, dmu))
}

/// Largest relative discrepancy between supplied and finite-difference
/// derivatives of `f` and all delays over random sample points.
///
/// Relative errors are measured as `|a - b| / max(1, |b|)`. Points are drawn
/// uniformly from `[-scale, scale]` for states and `params ± scale` for
/// parameters.
pub fn check_coefficient_derivatives<P: DelayProblem + ?Sized>(
    prob: &P,
    params: &[f64],
    scale: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = prob.dim();
    let nd = prob.n_delays();
    let np = prob.n_params();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..n * (nd + 1)).map(|_| rng.random_range(-scale..scale)).collect();
        let p: Vec<f64> = params.iter().map(|x| x + rng.random_range(-scale..scale)).collect();
        let mut a_u = DMatrix::zeros(n, n * (nd + 1));
        let mut a_p = DMatrix::zeros(n, np);
        let mut b_u = a_u.clone();
        let mut b_p = a_p.clone();
        prob.rhs_derivatives(&u, &p, &mut a_u, &mut a_p);
        fd_rhs_derivatives(prob, &u, &p, &mut b_u, &mut b_p);
        for (a, b) in a_u.iter().zip(b_u.iter()).chain(a_p.iter().zip(b_p.iter())) {
            worst = worst.max(rel(*a, *b));
        }
        for j in 1..=nd {
            let mut a_u = vec![0.0; j * n];
            let mut a_p = vec![0.0; np];
            let mut b_u = a_u.clone();
            let mut b_p = a_p.clone();
            prob.delay_derivatives(j, &u[..j * n], &p, &mut a_u, &mut a_p);
            fd_delay_derivatives(prob, j, &u[..j * n], &p, &mut b_u, &mut b_p);
            for (a, b) in a_u.iter().zip(&b_u).chain(a_p.iter().zip(&b_p)) {
                worst = worst.max(rel(*a, *b));
            }
        }
    }
    worst
}

/// Largest relative discrepancy between [`rhs_g_jacobian_action`] and a
/// central difference of [`rhs_g`] with step `h`, over random times and
/// random directions `(dv = c·w, dμ)`.
pub fn check_jacobian_action<P, V, W>(
    prob: &P,
    v: &V,
    mu: &[f64],
    direction: &W,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<f64>
where
    P: DelayProblem + ?Sized,
    V: DifferentiablePeriodic + ?Sized,
    W: PeriodicFunction + ?Sized,
{
    let mut rng = StdRng::seed_from_u64(seed);
    let n = prob.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t: f64 = rng.random_range(0.0..1.0);
        let scale: f64 = rng.random_range(-1.0..1.0);
        let dmu: Vec<f64> = mu.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let dv = ScaledSum { base: v, dir: direction, a: 0.0, b: scale };
        let action = rhs_g_jacobian_action(prob, v, t, mu, &dv, &dmu)?;
        let shifted = |eps: f64| -> Result<Vec<f64>> {
            let vs = ScaledSum { base: v, dir: direction, a: 1.0, b: eps * scale };
            let ms: Vec<f64> = mu.iter().zip(&dmu).map(|(m, d)| m + eps * d).collect();
            rhs_g(prob, &vs, t, &ms)
        };
        let fp = shifted(h)?;
        let fm = shifted(-h)?;
        for r in 0..n {
            let fd = (fp[r] - fm[r]) / (2.0 * h);
            worst = worst.max((fd - action[r]).abs() / fd.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// `a·base + b·dir`.
struct ScaledSum<'a, V: ?Sized, W: ?Sized> {
    base: &'a V,
    dir: &'a W,
    a: f64,
    b: f64,
}

impl<V: PeriodicFunction + ?Sized, W: PeriodicFunction + ?Sized> PeriodicFunction for ScaledSum<'_, V, W> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        let mut d = vec![0.0; out.len()];
        self.dir.value_into(t, &mut d);
        if self.a == 0.0 {
            out.iter_mut().zip(&d).for_each(|(o, x)| *o = self.b * x);
        } else {
            self.base.value_into(t, out);
            out.iter_mut().zip(&d).for_each(|(o, x)| *o = self.a * *o + self.b * x);
        }
    }
}
