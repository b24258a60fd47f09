//! 1-periodic piecewise polynomials on a [`Mesh`], the interpolation
//! projection onto discontinuous pieces of degree `m - 1`, the integral
//! operator that maps those back to continuous periodic pieces of degree
//! `m`, and grid norms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// A vector-valued 1-periodic function that can be sampled anywhere.
pub trait PeriodicFunction {
    fn dim(&self) -> usize;
    fn value_into(&self, t: f64, out: &mut [f64]);

    fn value(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.value_into(t, &mut out);
        out
    }
}

/// A periodic function with a (possibly one-sided) derivative everywhere.
pub trait DifferentiablePeriodic: PeriodicFunction {
    fn derivative_into(&self, t: f64, out: &mut [f64]);

    fn derivative(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.derivative_into(t, &mut out);
        out
    }
}

/// Wraps a closure `t -> v(t)` as a periodic function. The closure is
/// trusted to be 1-periodic.
pub struct FnPeriodic<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &mut [f64])> FnPeriodic<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &mut [f64])> PeriodicFunction for FnPeriodic<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

/// A closure pair `(v, v')` as a differentiable periodic function.
pub struct SmoothFn<F, D> {
    dim: usize,
    f: F,
    df: D,
}

impl<F: Fn(f64, &mut [f64]), D: Fn(f64, &mut [f64])> SmoothFn<F, D> {
    pub fn new(dim: usize, f: F, df: D) -> Self {
        Self { dim, f, df }
    }
}

impl<F: Fn(f64, &mut [f64]), D> PeriodicFunction for SmoothFn<F, D> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

impl<F: Fn(f64, &mut [f64]), D: Fn(f64, &mut [f64])> DifferentiablePeriodic for SmoothFn<F, D> {
    fn derivative_into(&self, t: f64, out: &mut [f64]) {
        (self.df)(t, out)
    }
}

/// Scalar closure helper: `t -> [f(t)]` with derivative `t -> [df(t)]`.
#[allow(clippy::type_complexity)]
pub fn scalar_fn(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
) -> SmoothFn<impl Fn(f64, &mut [f64]), impl Fn(f64, &mut [f64])> {
    SmoothFn::new(1, move |t, o: &mut [f64]| o[0] = f(t), move |t, o: &mut [f64]| o[0] = df(t))
}

/// Continuous, 1-periodic, degree-`m` piecewise polynomial stored by its
/// values at the `m * L` shared representation nodes.
///
/// `values[k * dim + c]` is component `c` at global node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPP {
    mesh: Arc<Mesh>,
    dim: usize,
    values: Vec<f64>,
}

impl PeriodicPP {
    pub fn from_nodal(mesh: Arc<Mesh>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let expected = dim * mesh.num_nodes();
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} nodal values, got {}",
                values.len()
            )));
        }
        Ok(Self { mesh, dim, values })
    }

    pub fn zeros(mesh: Arc<Mesh>, dim: usize) -> Self {
        let n = dim * mesh.num_nodes();
        Self {
            mesh,
            dim,
            values: vec![0.0; n],
        }
    }

    pub fn constant(mesh: Arc<Mesh>, c: &[f64]) -> Self {
        let values = c.iter().copied().cycle().take(c.len() * mesh.num_nodes()).collect();
        Self {
            mesh,
            dim: c.len(),
            values,
        }
    }

    /// Nodal interpolant of `f` at the representation nodes.
    pub fn interpolate(mesh: Arc<Mesh>, f: &(impl PeriodicFunction + ?Sized)) -> Self {
        let dim = f.dim();
        let mut values = vec![0.0; dim * mesh.num_nodes()];
        for (k, t) in mesh.representation_nodes().into_iter().enumerate() {
            f.value_into(t, &mut values[k * dim..(k + 1) * dim]);
        }
        Self { mesh, dim, values }
    }

    /// Resamples `f` onto another mesh (evaluation at its representation nodes).
    pub fn resample(&self, mesh: Arc<Mesh>) -> Self {
        Self::interpolate(mesh, self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node_value(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.dim + c]
    }

    fn accumulate(&self, i: usize, basis: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &b) in basis.iter().enumerate() {
            let k = self.mesh.node_index(i, r);
            let row = &self.values[k * self.dim..(k + 1) * self.dim];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += b * v;
            }
        }
    }

    /// Value of the polynomial piece `i` at local coordinate `s`.
    pub fn piece_value_into(&self, i: usize, s: f64, out: &mut [f64]) {
        let basis = self.mesh.reference().representation.values(s);
        self.accumulate(i, &basis, out);
    }

    /// Derivative (in `t`) of the polynomial piece `i` at local coordinate `s`.
    pub fn piece_derivative_into(&self, i: usize, s: f64, out: &mut [f64]) {
        let deriv = self.mesh.reference().representation.derivatives(s);
        self.accumulate(i, &deriv, out);
        let h = self.mesh.width(i);
        out.iter_mut().for_each(|o| *o /= h);
    }
}

impl PeriodicFunction for PeriodicPP {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.mesh.locate(t);
        self.piece_value_into(i, s, out);
    }
}

impl DifferentiablePeriodic for PeriodicPP {
    /// Derivative of the piece containing `t`; on a breakpoint, the left piece.
    fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.mesh.locate(t);
        self.piece_derivative_into(i, s, out);
    }
}

/// Piecewise polynomial of degree `m - 1` on each interval, stored by its
/// values at the collocation nodes; may jump at breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuousPP {
    mesh: Arc<Mesh>,
    dim: usize,
    /// `values[(i * m + j) * dim + c]`
    values: Vec<f64>,
}

impl DiscontinuousPP {
    pub fn from_values(mesh: Arc<Mesh>, dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = dim * mesh.num_collocation_nodes();
        if dim == 0 || values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} collocation values, got {}",
                values.len()
            )));
        }
        Ok(Self { mesh, dim, values })
    }

    pub fn zeros(mesh: Arc<Mesh>, dim: usize) -> Self {
        let n = dim * mesh.num_collocation_nodes();
        Self {
            mesh,
            dim,
            values: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn accumulate(&self, i: usize, basis: &[f64], out: &mut [f64]) {
        let m = self.mesh.degree();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &b) in basis.iter().enumerate() {
            let k = i * m + j;
            for (o, &v) in out.iter_mut().zip(&self.values[k * self.dim..(k + 1) * self.dim]) {
                *o += b * v;
            }
        }
    }

    pub fn piece_value_into(&self, i: usize, s: f64, out: &mut [f64]) {
        let basis = self.mesh.reference().collocation.values(s);
        self.accumulate(i, &basis, out);
    }

    /// Integral over the whole period, per component.
    pub fn integral(&self) -> Vec<f64> {
        let weights = self.mesh.reference().interval_weights();
        let m = self.mesh.degree();
        let mut total = vec![0.0; self.dim];
        for i in 0..self.mesh.intervals() {
            let h = self.mesh.width(i);
            for (j, w) in weights.iter().enumerate() {
                let k = i * m + j;
                for (c, t) in total.iter_mut().enumerate() {
                    *t += h * w * self.values[k * self.dim + c];
                }
            }
        }
        total
    }

    /// Scales and adds: `self * a + other * b`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.values.len() != other.values.len() || self.mesh != other.mesh {
            return Err(Error::MeshMismatch("operands live on different meshes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            mesh: self.mesh.clone(),
            dim: self.dim,
            values,
        })
    }
}

impl PeriodicFunction for DiscontinuousPP {
    fn dim(&self) -> usize {
        self.dim
    }

    /// On a breakpoint, the left piece is used.
    fn value_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.mesh.locate(t);
        self.piece_value_into(i, s, out);
    }
}

impl DifferentiablePeriodic for DiscontinuousPP {
    fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.mesh.locate(t);
        let deriv = self.mesh.reference().collocation.derivatives(s);
        self.accumulate(i, &deriv, out);
        let h = self.mesh.width(i);
        out.iter_mut().for_each(|o| *o /= h);
    }
}

/// Interpolation projection: the piecewise degree-`m - 1` polynomial that
/// matches `z` at every collocation node of `mesh`.
pub fn project_pl(z: &(impl PeriodicFunction + ?Sized), mesh: Arc<Mesh>) -> DiscontinuousPP {
    let dim = z.dim();
    let nodes = mesh.collocation_nodes();
    let mut values = vec![0.0; dim * nodes.len()];
    for (k, &t) in nodes.iter().enumerate() {
        z.value_into(t, &mut values[k * dim..(k + 1) * dim]);
    }
    DiscontinuousPP { mesh, dim, values }
}

/// Element `(v, alpha, mu)` of the extended space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedVector {
    pub v: PeriodicPP,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ExtendedVector {
    pub fn new(v: PeriodicPP, alpha: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if alpha.len() != v.dim() {
            return Err(Error::DimensionMismatch(format!(
                "alpha has length {}, expected {}",
                alpha.len(),
                v.dim()
            )));
        }
        if mu.is_empty() {
            return Err(Error::DimensionMismatch("mu must hold at least the period".into()));
        }
        Ok(Self { v, alpha, mu })
    }

    pub fn period(&self) -> f64 {
        self.mu[0]
    }

    /// `self - other`, both on the same mesh.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.v.mesh() != other.v.mesh() || self.v.values.len() != other.v.values.len() {
            return Err(Error::MeshMismatch("operands live on different meshes".into()));
        }
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        Ok(Self {
            v: PeriodicPP {
                mesh: self.v.mesh.clone(),
                dim: self.v.dim,
                values: sub(&self.v.values, &other.v.values),
            },
            alpha: sub(&self.alpha, &other.alpha),
            mu: sub(&self.mu, &other.mu),
        })
    }

    fn finite_part_norm(&self) -> f64 {
        self.alpha.iter().chain(&self.mu).fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// The integral operator applied to `(w, alpha, nu)`:
/// `t -> alpha + ∫_0^t w - t ∫_0^1 w`, `alpha + ∫_0^1 w`, `nu`.
///
/// Antiderivatives are taken exactly per interval, so the first component is
/// a continuous periodic piecewise polynomial of degree `m` on `w`'s mesh.
pub fn integral_operator(w: &DiscontinuousPP, alpha: &[f64], nu: &[f64]) -> Result<ExtendedVector> {
    let dim = w.dim;
    if alpha.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "alpha has length {}, expected {dim}",
            alpha.len()
        )));
    }
    let mesh = w.mesh.clone();
    let m = mesh.degree();
    let anti = &mesh.reference().antiderivative;
    let total = w.integral();
    let mut values = vec![0.0; dim * mesh.num_nodes()];
    let mut running = vec![0.0; dim];
    for i in 0..mesh.intervals() {
        let h = mesh.width(i);
        for r in 0..m {
            let t = mesh.representation_node(i, r);
            let k = mesh.node_index(i, r);
            for c in 0..dim {
                let mut local = 0.0;
                for j in 0..m {
                    local += anti[(r, j)] * w.values[(i * m + j) * dim + c];
                }
                values[k * dim + c] = alpha[c] + running[c] + h * local - t * total[c];
            }
        }
        for (c, run) in running.iter_mut().enumerate() {
            let mut piece = 0.0;
            for j in 0..m {
                piece += anti[(m, j)] * w.values[(i * m + j) * dim + c];
            }
            *run += h * piece;
        }
    }
    let v = PeriodicPP { mesh, dim, values };
    let alpha_out = alpha.iter().zip(&total).map(|(a, s)| a + s).collect();
    Ok(ExtendedVector {
        v,
        alpha: alpha_out,
        mu: nu.to_vec(),
    })
}

fn check_grid(grid_points: usize, min: usize) -> Result<()> {
    if grid_points < min {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least {min} points, got {grid_points}"
        )));
    }
    Ok(())
}

/// Uniform grid `k / (n - 1)`, `k = 0..n`.
pub fn uniform_grid(n: usize) -> impl Iterator<Item = f64> {
    let d = (n - 1) as f64;
    (0..n).map(move |k| k as f64 / d)
}

/// Max-abs of `f` over a uniform grid of `grid_points` points in `[0, 1]`.
pub fn sup_on_grid(f: &(impl PeriodicFunction + ?Sized), grid_points: usize) -> Result<f64> {
    check_grid(grid_points, 2)?;
    let mut buf = vec![0.0; f.dim()];
    let mut best: f64 = 0.0;
    for t in uniform_grid(grid_points) {
        f.value_into(t, &mut buf);
        best = buf.iter().fold(best, |acc, x| acc.max(x.abs()));
    }
    Ok(best)
}

/// `max(sup_grid |v|, |alpha|, |mu|)`.
pub fn norm_sup_grid(x: &ExtendedVector, grid_points: usize) -> Result<f64> {
    Ok(sup_on_grid(&x.v, grid_points)?.max(x.finite_part_norm()))
}

/// Lower-bound estimate of the Lipschitz seminorm of a continuous periodic
/// piecewise polynomial: largest grid difference quotient, together with
/// the exact piece derivatives sampled at `4m + 1` points per interval
/// (endpoints included, so both one-sided slopes at every breakpoint count).
pub fn lipschitz_seminorm_estimate(v: &PeriodicPP, grid_points: usize) -> Result<f64> {
    check_grid(grid_points, 3)?;
    let dim = v.dim();
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut best: f64 = 0.0;
    let dt = 1.0 / (grid_points - 1) as f64;
    v.value_into(0.0, &mut a);
    for t in uniform_grid(grid_points).skip(1) {
        v.value_into(t, &mut b);
        for c in 0..dim {
            best = best.max((b[c] - a[c]).abs() / dt);
        }
        std::mem::swap(&mut a, &mut b);
    }
    let mesh = v.mesh();
    let samples = 4 * mesh.degree();
    for i in 0..mesh.intervals() {
        for q in 0..=samples {
            v.piece_derivative_into(i, q as f64 / samples as f64, &mut a);
            best = a.iter().fold(best, |acc, x| acc.max(x.abs()));
        }
    }
    Ok(best)
}

/// Estimate of `max(‖v‖_sup, Lip(v), |alpha|, |mu|)`; never exceeds the true
/// Lipschitz norm by more than rounding.
pub fn norm_lipschitz_estimate(x: &ExtendedVector, grid_points: usize) -> Result<f64> {
    check_grid(grid_points, 3)?;
    let sup = sup_on_grid(&x.v, grid_points)?;
    let lip = lipschitz_seminorm_estimate(&x.v, grid_points)?;
    Ok(sup.max(lip).max(x.finite_part_norm()))
}
