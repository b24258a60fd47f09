//! Affine side conditions `R(v, μ) ∈ R^{n_p + 1}` (phase, amplitude, ...)
//! that make the periodic boundary value problem square.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{gauss_legendre, Mesh};
use crate::ppoly::{PeriodicFunction, PeriodicPP};

pub type WeightFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// One additive term of an affine constraint map.
#[derive(Clone)]
pub enum ConstraintTerm {
    /// `weights · v(t)`, `weights` is `n_c × n_y`.
    Point { t: f64, weights: DMatrix<f64> },
    /// `∫_0^1 w(t) · v(t) dt`, `w(t)` is `n_c × n_y`.
    Integral { weight: WeightFn },
    /// `matrix · μ`, `matrix` is `n_c × n_μ`.
    Mu { matrix: DMatrix<f64> },
    /// Constant offset of length `n_c`.
    Constant { offset: DVector<f64> },
}

impl fmt::Debug for ConstraintTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTerm::Point { t, weights } => f
                .debug_struct("Point")
                .field("t", t)
                .field("weights", weights)
                .finish(),
            ConstraintTerm::Integral { .. } => f.write_str("Integral { .. }"),
            ConstraintTerm::Mu { matrix } => f.debug_struct("Mu").field("matrix", matrix).finish(),
            ConstraintTerm::Constant { offset } => f.debug_struct("Constant").field("offset", offset).finish(),
        }
    }
}

/// Coefficients of an affine constraint map restricted to piecewise
/// polynomials on one mesh: `R = dv · nodal_values + dmu · μ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLinearization {
    pub dv: DMatrix<f64>,
    pub dmu: DMatrix<f64>,
    pub offset: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct AffineConstraints {
    n_c: usize,
    dim: usize,
    terms: Vec<ConstraintTerm>,
}

impl AffineConstraints {
    pub fn new(n_c: usize, dim: usize, terms: Vec<ConstraintTerm>) -> Result<Self> {
        for term in &terms {
            let ok = match term {
                ConstraintTerm::Point { weights, .. } => weights.nrows() == n_c && weights.ncols() == dim,
                ConstraintTerm::Mu { matrix } => matrix.nrows() == n_c,
                ConstraintTerm::Constant { offset } => offset.len() == n_c,
                ConstraintTerm::Integral { .. } => true,
            };
            if !ok {
                return Err(Error::DimensionMismatch(format!("constraint term {term:?} has wrong shape")));
            }
        }
        Ok(Self { n_c, dim, terms })
    }

    pub fn len(&self) -> usize {
        self.n_c
    }

    pub fn is_empty(&self) -> bool {
        self.n_c == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ConstraintTerm] {
        &self.terms
    }

    /// Quadrature points `(interval, local s, t, weight)` for integral
    /// terms: `m + 2` Gauss points per interval of `mesh`.
    fn quadrature(mesh: &Mesh) -> Result<Vec<(usize, f64, f64, f64)>> {
        let (x, w) = gauss_legendre(mesh.degree() + 2)?;
        let mut pts = Vec::with_capacity(mesh.intervals() * x.len());
        for i in 0..mesh.intervals() {
            let (a, b) = mesh.interval(i);
            for (s, ws) in x.iter().zip(&w) {
                pts.push((i, *s, a + (b - a) * s, ws * (b - a)));
            }
        }
        Ok(pts)
    }

    /// `R(v, μ)`, integrals by per-interval Gauss quadrature on `quad_mesh`.
    pub fn evaluate(
        &self,
        v: &(impl PeriodicFunction + ?Sized),
        quad_mesh: &Mesh,
        mu: &[f64],
    ) -> Result<DVector<f64>> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch("constraint dimension differs from v".into()));
        }
        let mut out = DVector::zeros(self.n_c);
        let mut buf = DVector::zeros(self.dim);
        for term in &self.terms {
            match term {
                ConstraintTerm::Point { t, weights } => {
                    v.value_into(*t, buf.as_mut_slice());
                    out += weights * &buf;
                }
                ConstraintTerm::Integral { weight } => {
                    for (_, _, t, qw) in Self::quadrature(quad_mesh)? {
                        v.value_into(t, buf.as_mut_slice());
                        out += weight(t) * &buf * qw;
                    }
                }
                ConstraintTerm::Mu { matrix } => {
                    if matrix.ncols() != mu.len() {
                        return Err(Error::DimensionMismatch("mu length differs from constraint matrix".into()));
                    }
                    out += matrix * DVector::from_column_slice(mu);
                }
                ConstraintTerm::Constant { offset } => out += offset,
            }
        }
        Ok(out)
    }

    /// `R(v, μ)` with integrals on `v`'s own mesh.
    pub fn evaluate_pp(&self, v: &PeriodicPP, mu: &[f64]) -> Result<DVector<f64>> {
        self.evaluate(v, v.mesh(), mu)
    }

    /// Exact affine coefficients on piecewise polynomials over `mesh`, with
    /// the same quadrature as [`AffineConstraints::evaluate`].
    pub fn linearize(&self, mesh: &Mesh, n_mu: usize) -> Result<ConstraintLinearization> {
        let n = self.dim;
        let nodes = mesh.num_nodes();
        let mut dv = DMatrix::zeros(self.n_c, n * nodes);
        let mut dmu = DMatrix::zeros(self.n_c, n_mu);
        let mut offset = DVector::zeros(self.n_c);
        let rep = &mesh.reference().representation;
        let mut basis = vec![0.0; rep.len()];
        let mut scatter = |dv: &mut DMatrix<f64>, i: usize, s: f64, w: &DMatrix<f64>| {
            rep.values_into(s, &mut basis);
            for (r, &b) in basis.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let k = mesh.node_index(i, r);
                for row in 0..self.n_c {
                    for c in 0..n {
                        dv[(row, k * n + c)] += b * w[(row, c)];
                    }
                }
            }
        };
        for term in &self.terms {
            match term {
                ConstraintTerm::Point { t, weights } => {
                    let (i, s) = mesh.locate(*t);
                    scatter(&mut dv, i, s, weights);
                }
                ConstraintTerm::Integral { weight } => {
                    for (i, s, t, qw) in Self::quadrature(mesh)? {
                        scatter(&mut dv, i, s, &(weight(t) * qw));
                    }
                }
                ConstraintTerm::Mu { matrix } => {
                    if matrix.ncols() != n_mu {
                        return Err(Error::DimensionMismatch("mu length differs from constraint matrix".into()));
                    }
                    dmu += matrix;
                }
                ConstraintTerm::Constant { offset: o } => offset += o,
            }
        }
        Ok(ConstraintLinearization { dv, dmu, offset })
    }
}
