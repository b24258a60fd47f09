//! The square algebraic system obtained by collocating the rescaled delay
//! equation at every `t_{i,j}`, plus the affine constraints.
//!
//! Unknowns are the nodal values of `y^L` followed by `T` and `p`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::AffineConstraints;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::newton::NonlinearSystem;
use crate::ppoly::{DifferentiablePeriodic, ExtendedVector, PeriodicFunction, PeriodicPP};
use crate::problem::{linearize_rhs, rhs_g, DelayProblem};

/// Index map for the flat unknown vector `(y^L nodal values, T, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLayout {
    pub dim: usize,
    pub nodes: usize,
    pub n_params: usize,
}

impl UnknownLayout {
    pub fn new(dim: usize, mesh: &Mesh, n_params: usize) -> Self {
        Self {
            dim,
            nodes: mesh.num_nodes(),
            n_params,
        }
    }

    /// `n_y · m · L + n_p + 1`.
    pub fn len(&self) -> usize {
        self.state_len() + self.n_params + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state_len(&self) -> usize {
        self.dim * self.nodes
    }

    /// Flat index of component `c` at global node `k`.
    pub fn node_index(&self, c: usize, k: usize) -> usize {
        k * self.dim + c
    }

    pub fn period_index(&self) -> usize {
        self.state_len()
    }

    pub fn param_index(&self, j: usize) -> usize {
        self.state_len() + 1 + j
    }

    /// Inverse of [`UnknownLayout::node_index`]; `None` for the tail.
    pub fn node_of(&self, flat: usize) -> Option<(usize, usize)> {
        (flat < self.state_len()).then(|| (flat % self.dim, flat / self.dim))
    }
}

/// Residual vector with its two blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationResidual {
    pub values: DVector<f64>,
    pub fde_len: usize,
}

impl CollocationResidual {
    pub fn fde_block(&self) -> &[f64] {
        &self.values.as_slice()[..self.fde_len]
    }

    pub fn constraint_block(&self) -> &[f64] {
        &self.values.as_slice()[self.fde_len..]
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.amax()
    }
}

/// Collocation equations for one problem, constraint set and mesh.
#[derive(Clone)]
pub struct CollocationSystem<'a> {
    problem: &'a dyn DelayProblem,
    constraints: &'a AffineConstraints,
    mesh: Arc<Mesh>,
    layout: UnknownLayout,
}

impl<'a> CollocationSystem<'a> {
    pub fn new(problem: &'a dyn DelayProblem, constraints: &'a AffineConstraints, mesh: Arc<Mesh>) -> Result<Self> {
        if constraints.len() != problem.n_params() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} constraints for {} parameters plus period",
                constraints.len(),
                problem.n_params()
            )));
        }
        if constraints.dim() != problem.dim() {
            return Err(Error::DimensionMismatch("constraints and problem disagree on n_y".into()));
        }
        let layout = UnknownLayout::new(problem.dim(), &mesh, problem.n_params());
        Ok(Self {
            problem,
            constraints,
            mesh,
            layout,
        })
    }

    pub fn layout(&self) -> UnknownLayout {
        self.layout
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn problem(&self) -> &'a dyn DelayProblem {
        self.problem
    }

    pub fn constraints(&self) -> &'a AffineConstraints {
        self.constraints
    }

    /// Splits a flat vector into `(y^L, μ)`.
    pub fn split(&self, x: &DVector<f64>) -> Result<(PeriodicPP, Vec<f64>)> {
        if x.len() != self.layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "unknown vector has length {}, expected {}",
                x.len(),
                self.layout.len()
            )));
        }
        let n = self.layout.state_len();
        let v = PeriodicPP::from_nodal(self.mesh.clone(), self.layout.dim, x.as_slice()[..n].to_vec())?;
        Ok((v, x.as_slice()[n..].to_vec()))
    }

    pub fn pack(&self, v: &PeriodicPP, mu: &[f64]) -> Result<DVector<f64>> {
        if v.values().len() != self.layout.state_len() || mu.len() != self.layout.n_params + 1 {
            return Err(Error::DimensionMismatch("state or parameters do not fit the layout".into()));
        }
        Ok(DVector::from_iterator(
            self.layout.len(),
            v.values().iter().chain(mu).copied(),
        ))
    }

    /// The collocation solution `x` as `(v, v(0), μ)`.
    pub fn lift(&self, x: &DVector<f64>) -> Result<ExtendedVector> {
        let (v, mu) = self.split(x)?;
        let alpha = v.value(0.0);
        ExtendedVector::new(v, alpha, mu)
    }

    pub fn residual(&self, x: &DVector<f64>) -> Result<CollocationResidual> {
        let (v, mu) = self.split(x)?;
        let n = self.layout.dim;
        let m = self.mesh.degree();
        let reference = self.mesh.reference();
        let fde_len = self.layout.state_len();
        let mut values = DVector::zeros(self.layout.len());
        let mut dv = vec![0.0; n];
        for i in 0..self.mesh.intervals() {
            for j in 0..m {
                let t = self.mesh.collocation_node(i, j);
                v.piece_derivative_into(i, reference.collocation.nodes()[j], &mut dv);
                let g = rhs_g(self.problem, &v, t, &mu)?;
                let row = (i * m + j) * n;
                for c in 0..n {
                    let r = dv[c] - g[c];
                    if !r.is_finite() {
                        return Err(Error::NonFiniteResidual { interval: i, node: j });
                    }
                    values[row + c] = r;
                }
            }
        }
        let tail = self.constraints.evaluate_pp(&v, &mu)?;
        values.rows_mut(fde_len, tail.len()).copy_from(&tail);
        Ok(CollocationResidual { values, fde_len })
    }

    /// Dense Jacobian of [`CollocationSystem::residual`].
    ///
    /// Columns for nodal values are assembled from the basis functions at each
    /// deviated argument; the derivative `v'` appearing through the
    /// state-dependent arguments is taken from the left piece on breakpoints.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (v, mu) = self.split(x)?;
        let n = self.layout.dim;
        let m = self.mesh.degree();
        let size = self.layout.len();
        let mu_col = self.layout.period_index();
        let reference = self.mesh.reference();
        let rep = &reference.representation;
        let mut jac = DMatrix::zeros(size, size);
        let mut basis = vec![0.0; m + 1];
        let mut dbasis = vec![0.0; m + 1];
        for i in 0..self.mesh.intervals() {
            let h = self.mesh.width(i);
            for j in 0..m {
                let row = (i * m + j) * n;
                let s = reference.collocation.nodes()[j];
                rep.values_and_derivatives_into(s, &mut basis, &mut dbasis);
                for (r, db) in dbasis.iter().enumerate() {
                    let k = self.mesh.node_index(i, r);
                    for c in 0..n {
                        jac[(row + c, self.layout.node_index(c, k))] += db / h;
                    }
                }
                let t = self.mesh.collocation_node(i, j);
                let lin = linearize_rhs(self.problem, &v, t, &mu)?;
                for (theta, a) in lin.theta.iter().zip(&lin.coeff) {
                    let (ii, ss) = self.mesh.locate(*theta);
                    rep.values_into(ss, &mut basis);
                    for (r, &b) in basis.iter().enumerate() {
                        if b == 0.0 {
                            continue;
                        }
                        let k = self.mesh.node_index(ii, r);
                        for rr in 0..n {
                            for c in 0..n {
                                jac[(row + rr, self.layout.node_index(c, k))] -= a[(rr, c)] * b;
                            }
                        }
                    }
                }
                for rr in 0..n {
                    for q in 0..lin.mu_coeff.ncols() {
                        jac[(row + rr, mu_col + q)] -= lin.mu_coeff[(rr, q)];
                    }
                }
            }
        }
        let n_mu = self.layout.n_params + 1;
        let cons = self.constraints.linearize(&self.mesh, n_mu)?;
        let tail = self.layout.state_len();
        jac.view_mut((tail, 0), (n_mu, tail)).copy_from(&cons.dv);
        jac.view_mut((tail, tail), (n_mu, n_mu)).copy_from(&cons.dmu);
        Ok(jac)
    }

    /// Max-abs of `v' - G(v, ·, μ)` over a uniform grid.
    pub fn grid_residual(&self, v: &PeriodicPP, mu: &[f64], grid_points: usize) -> Result<f64> {
        residual_on_grid(self.problem, v, mu, grid_points)
    }
}

/// Max over a uniform grid of `|v'(t) - G(v, t, μ)|` (left derivative on
/// breakpoints). This is the collocation residual without division by `T`.
pub fn residual_on_grid(
    problem: &dyn DelayProblem,
    v: &PeriodicPP,
    mu: &[f64],
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let mut dv = vec![0.0; v.dim()];
    let mut worst: f64 = 0.0;
    for t in crate::ppoly::uniform_grid(grid_points) {
        v.derivative_into(t, &mut dv);
        let g = rhs_g(problem, v, t, mu)?;
        for (a, b) in dv.iter().zip(&g) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

impl NonlinearSystem for CollocationSystem<'_> {
    fn len(&self) -> usize {
        self.layout.len()
    }

    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(CollocationSystem::residual(self, x)?.values)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        CollocationSystem::jacobian(self, x)
    }

    fn positive_index(&self) -> Option<usize> {
        Some(self.layout.period_index())
    }
}
