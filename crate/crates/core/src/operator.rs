//! Fixed-point form of the collocation problem,
//! `x = Φ_L(x) = 𝓛 P_L g(x)` on `x = (v, α, μ)`, with probes for the
//! consistency error `𝓛 (P_L - I) g(x*)` and the conditioning of
//! `I - DΦ_L(x)`.
//!
//! Here `g(v, α, μ) = (t ↦ G(v, t, μ), α, μ + R(v, μ))` and `𝓛` is
//! [`integral_operator`]. A collocation solution `(y^L, μ)` lifted to
//! `(y^L, y^L(0), μ)` is a fixed point of `Φ_L` and vice versa.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::AffineConstraints;
use crate::error::{Error, Result};
use crate::mesh::{gauss_legendre, Mesh};
use crate::newton::DenseLu;
use crate::ppoly::{integral_operator, project_pl, uniform_grid, DiscontinuousPP, ExtendedVector, FnPeriodic, PeriodicFunction, PeriodicPP};
use crate::problem::{linearize_rhs, rhs_g, rhs_g_jacobian_action, DelayProblem};

/// `g(x)` sampled where `P_L` needs it: the first component at the
/// collocation nodes of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GSample {
    pub w: DiscontinuousPP,
    pub alpha: Vec<f64>,
    pub nu: Vec<f64>,
}

fn check_dims(prob: &dyn DelayProblem, constraints: &AffineConstraints, x: &ExtendedVector) -> Result<()> {
    if x.v.dim() != prob.dim() || constraints.dim() != prob.dim() {
        return Err(Error::DimensionMismatch("state dimension differs between problem and x".into()));
    }
    if x.mu.len() != prob.n_params() + 1 || constraints.len() != x.mu.len() {
        return Err(Error::DimensionMismatch("mu, constraints and parameters disagree".into()));
    }
    Ok(())
}

/// `g(x)` with the first component sampled at the collocation nodes of `mesh`
/// (so `w` is `P_L` of the first component).
pub fn apply_g(
    prob: &dyn DelayProblem,
    constraints: &AffineConstraints,
    mesh: &Arc<Mesh>,
    x: &ExtendedVector,
) -> Result<GSample> {
    check_dims(prob, constraints, x)?;
    let n = prob.dim();
    let nodes = mesh.collocation_nodes();
    let mut values = vec![0.0; n * nodes.len()];
    for (k, &t) in nodes.iter().enumerate() {
        let g = rhs_g(prob, &x.v, t, &x.mu)?;
        values[k * n..(k + 1) * n].copy_from_slice(&g);
    }
    let w = DiscontinuousPP::from_values(mesh.clone(), n, values)?;
    let r = constraints.evaluate_pp(&x.v, &x.mu)?;
    let nu = x.mu.iter().zip(r.iter()).map(|(m, r)| m + r).collect();
    Ok(GSample {
        w,
        alpha: x.alpha.clone(),
        nu,
    })
}

/// `Φ_L(x) = 𝓛 P_L g(x)` on `mesh`.
pub fn apply_phi_l(
    prob: &dyn DelayProblem,
    constraints: &AffineConstraints,
    mesh: &Arc<Mesh>,
    x: &ExtendedVector,
) -> Result<ExtendedVector> {
    let g = apply_g(prob, constraints, mesh, x)?;
    integral_operator(&g.w, &g.alpha, &g.nu)
}

/// `DΦ_L(x) δ`, assembled from directional derivatives of `G` at the
/// collocation nodes.
pub fn apply_dphi_l(
    prob: &dyn DelayProblem,
    constraints: &AffineConstraints,
    mesh: &Arc<Mesh>,
    x: &ExtendedVector,
    delta: &ExtendedVector,
) -> Result<ExtendedVector> {
    check_dims(prob, constraints, x)?;
    let n = prob.dim();
    let nodes = mesh.collocation_nodes();
    let mut values = vec![0.0; n * nodes.len()];
    for (k, &t) in nodes.iter().enumerate() {
        let d = rhs_g_jacobian_action(prob, &x.v, t, &x.mu, &delta.v, &delta.mu)?;
        values[k * n..(k + 1) * n].copy_from_slice(&d);
    }
    let w = DiscontinuousPP::from_values(mesh.clone(), n, values)?;
    // Linear part of R.
    let r = constraints.evaluate_pp(&delta.v, &delta.mu)?;
    let r0 = constraints.evaluate_pp(&PeriodicPP::zeros(delta.v.mesh().clone(), n), &vec![0.0; delta.mu.len()])?;
    let nu = delta
        .mu
        .iter()
        .zip(r.iter().zip(r0.iter()))
        .map(|(m, (a, b))| m + a - b)
        .collect::<Vec<_>>();
    integral_operator(&w, &delta.alpha, &nu)
}

/// `DΦ_L(x)` restricted to `range(𝓛 P_L)`, in coordinates
/// `(nodal values of v, α, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub dim: usize,
    pub nodes: usize,
    pub n_mu: usize,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Coordinates of an extended vector on the matrix's mesh.
    pub fn coordinates(&self, x: &ExtendedVector) -> Result<DVector<f64>> {
        if x.v.values().len() != self.dim * self.nodes || x.mu.len() != self.n_mu || x.alpha.len() != self.dim {
            return Err(Error::DimensionMismatch("vector does not match operator layout".into()));
        }
        Ok(DVector::from_iterator(
            self.size(),
            x.v.values().iter().chain(&x.alpha).chain(&x.mu).copied(),
        ))
    }

    pub fn from_coordinates(&self, mesh: Arc<Mesh>, c: &DVector<f64>) -> Result<ExtendedVector> {
        let nv = self.dim * self.nodes;
        let s = c.as_slice();
        ExtendedVector::new(
            PeriodicPP::from_nodal(mesh, self.dim, s[..nv].to_vec())?,
            s[nv..nv + self.dim].to_vec(),
            s[nv + self.dim..].to_vec(),
        )
    }
}

/// Builds the matrix of `DΦ_L(x)`; `x.v` must live on `mesh`.
pub fn operator_matrix(
    prob: &dyn DelayProblem,
    constraints: &AffineConstraints,
    mesh: &Arc<Mesh>,
    x: &ExtendedVector,
) -> Result<OperatorMatrix> {
    check_dims(prob, constraints, x)?;
    if x.v.mesh().as_ref() != mesh.as_ref() {
        return Err(Error::MeshMismatch("x must be represented on the operator mesh".into()));
    }
    let n = prob.dim();
    let m = mesh.degree();
    let nodes = mesh.num_nodes();
    let n_mu = x.mu.len();
    let nv = n * nodes;
    let size = nv + n + n_mu;
    let a_col = nv;
    let mu_col = nv + n;
    let rep = &mesh.reference().representation;

    // W: (P_L Dg)(δ) at collocation nodes, rows (i*m+j)*n + r.
    let mut w = DMatrix::zeros(n * mesh.num_collocation_nodes(), size);
    let mut basis = vec![0.0; m + 1];
    for i in 0..mesh.intervals() {
        for j in 0..m {
            let row = (i * m + j) * n;
            let lin = linearize_rhs(prob, &x.v, mesh.collocation_node(i, j), &x.mu)?;
            for (theta, a) in lin.theta.iter().zip(&lin.coeff) {
                let (ii, ss) = mesh.locate(*theta);
                rep.values_into(ss, &mut basis);
                for (r, &b) in basis.iter().enumerate() {
                    let k = mesh.node_index(ii, r);
                    for rr in 0..n {
                        for c in 0..n {
                            w[(row + rr, k * n + c)] += a[(rr, c)] * b;
                        }
                    }
                }
            }
            for rr in 0..n {
                for q in 0..n_mu {
                    w[(row + rr, mu_col + q)] += lin.mu_coeff[(rr, q)];
                }
            }
        }
    }

    // 𝓛 on (w, α, ν): v_k = α + Σ K[k, ij] w_ij, α' = α + Σ b_ij w_ij.
    let anti = &mesh.reference().antiderivative;
    let coll = mesh.num_collocation_nodes();
    let mut kmat = DMatrix::zeros(nodes, coll);
    let mut bvec = vec![0.0; coll];
    for i in 0..mesh.intervals() {
        let h = mesh.width(i);
        for j in 0..m {
            bvec[i * m + j] = h * anti[(m, j)];
        }
    }
    for i in 0..mesh.intervals() {
        let h = mesh.width(i);
        for r in 0..m {
            let k = mesh.node_index(i, r);
            let t = mesh.representation_node(i, r);
            for (q, b) in bvec.iter().enumerate() {
                let iq = q / m;
                let mut val = -t * b;
                if iq < i {
                    val += b;
                } else if iq == i {
                    val += h * anti[(r, q % m)];
                }
                kmat[(k, q)] = val;
            }
        }
    }

    let mut matrix = DMatrix::zeros(size, size);
    let bmat = DMatrix::from_row_slice(1, coll, &bvec);
    for rr in 0..n {
        let w_r = DMatrix::from_fn(coll, size, |q, c| w[(q * n + rr, c)]);
        let kw = &kmat * &w_r;
        for k in 0..nodes {
            matrix.row_mut(k * n + rr).copy_from(&kw.row(k));
            matrix[(k * n + rr, a_col + rr)] += 1.0;
        }
        let bw = &bmat * &w_r;
        matrix.row_mut(a_col + rr).copy_from(&bw.row(0));
        matrix[(a_col + rr, a_col + rr)] += 1.0;
    }
    let cons = constraints.linearize(mesh, n_mu)?;
    matrix.view_mut((mu_col, 0), (n_mu, nv)).copy_from(&cons.dv);
    let mut mu_block = cons.dmu.clone();
    for q in 0..n_mu {
        mu_block[(q, q)] += 1.0;
    }
    matrix.view_mut((mu_col, mu_col), (n_mu, n_mu)).copy_from(&mu_block);

    Ok(OperatorMatrix {
        matrix,
        dim: n,
        nodes,
        n_mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityProbe {
    /// Smallest singular value of `I - DΦ_L` in nodal coordinates.
    pub sigma_min: f64,
    /// `‖(I - DΦ_L)⁻¹‖_∞` in nodal coordinates; `+∞` if singular.
    pub cstab_estimate: f64,
}

/// Conditioning of `I - DΦ_L(x)` on `mesh`.
pub fn stability_probe(
    prob: &dyn DelayProblem,
    constraints: &AffineConstraints,
    mesh: &Arc<Mesh>,
    x: &ExtendedVector,
) -> Result<StabilityProbe> {
    let op = operator_matrix(prob, constraints, mesh, x)?;
    let size = op.size();
    let a = DMatrix::identity(size, size) - &op.matrix;

    let cstab_estimate = match DenseLu::new(a.clone()) {
        Some(lu) => match lu.solve_matrix(&DMatrix::identity(size, size)) {
            Some(inv) => inv.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
            None => f64::INFINITY,
        },
        None => f64::INFINITY,
    };

    let sigma_min = a.singular_values().min();
    Ok(StabilityProbe {
        sigma_min,
        cstab_estimate,
    })
}

/// Norms of the consistency defect `𝓛 (P_L - I) z` for a periodic function `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyError {
    /// `max(sup_grid |E|, |∫_0^1 e|)` with `E(t) = ∫_0^t e - t ∫_0^1 e`,
    /// `e = P_L z - z`.
    pub sup: f64,
    /// `max(sup, sup_t |e(t) - ∫_0^1 e|)`: a Lipschitz-norm estimate.
    pub lipschitz: f64,
}

/// `𝓛 (P_L - I) z` measured on a uniform grid. Integrals use 6-point Gauss
/// rules on the partition formed by the grid and the mesh breakpoints.
pub fn integrated_projection_defect(
    z: &(impl PeriodicFunction + ?Sized),
    mesh: &Arc<Mesh>,
    grid_points: usize,
) -> Result<ConsistencyError> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let n = z.dim();
    let pz = project_pl(z, mesh.clone());
    let mut cuts: Vec<(f64, bool)> = uniform_grid(grid_points).map(|t| (t, true)).collect();
    cuts.extend(mesh.breakpoints().iter().map(|&t| (t, false)));
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    cuts.dedup_by(|b, a| {
        if (a.0 - b.0).abs() <= 1e-15 {
            a.1 |= b.1;
            true
        } else {
            false
        }
    });

    let (qx, qw) = gauss_legendre(6)?;
    let mut zb = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let mut running = vec![0.0; n];
    // (t, ∫_0^t e) at grid points
    let mut at_grid: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![0.0; n])];
    // e at sample points, for the derivative estimate
    let mut e_samples: Vec<Vec<f64>> = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0].0, win[1].0);
        let mid = 0.5 * (a + b);
        let (piece, _) = mesh.locate(mid);
        let (pa, pb_end) = mesh.interval(piece);
        for (x, w) in qx.iter().zip(&qw) {
            let t = a + (b - a) * x;
            z.value_into(t, &mut zb);
            pz.piece_value_into(piece, (t - pa) / (pb_end - pa), &mut pb);
            let e: Vec<f64> = pb.iter().zip(&zb).map(|(p, z)| p - z).collect();
            for c in 0..n {
                running[c] += (b - a) * w * e[c];
            }
            e_samples.push(e);
        }
        if win[1].1 {
            at_grid.push((b, running.clone()));
        }
    }
    let total = running;
    let mut sup = total.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    for (t, integral) in &at_grid {
        for c in 0..n {
            sup = sup.max((integral[c] - t * total[c]).abs());
        }
    }
    let mut lip = sup;
    for e in &e_samples {
        for c in 0..n {
            lip = lip.max((e[c] - total[c]).abs());
        }
    }
    Ok(ConsistencyError { sup, lipschitz: lip })
}

/// Consistency error `𝓛 (P_L - I) g(x_ref)` on `mesh`, where `g(x_ref)` is
/// evaluated through a reference solution on a mesh at least 8 times finer
/// with degree at least `m + 2`.
pub fn consistency_error(
    prob: &dyn DelayProblem,
    mesh: &Arc<Mesh>,
    x_ref: &ExtendedVector,
    grid_points: usize,
) -> Result<ConsistencyError> {
    let ref_mesh = x_ref.v.mesh();
    if ref_mesh.intervals() < 8 * mesh.intervals() || ref_mesh.degree() < mesh.degree() + 2 {
        return Err(Error::MeshMismatch(format!(
            "reference (L = {}, m = {}) is not fine enough for L = {}, m = {}",
            ref_mesh.intervals(),
            ref_mesh.degree(),
            mesh.intervals(),
            mesh.degree()
        )));
    }
    if x_ref.v.dim() != prob.dim() || x_ref.mu.len() != prob.n_params() + 1 {
        return Err(Error::DimensionMismatch("reference does not match the problem".into()));
    }
    let z = FnPeriodic::new(prob.dim(), |t, out: &mut [f64]| {
        match rhs_g(prob, &x_ref.v, t, &x_ref.mu) {
            Ok(g) => out.copy_from_slice(&g),
            Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
        }
    });
    let err = integrated_projection_defect(&z, mesh, grid_points)?;
    if !err.sup.is_finite() {
        return Err(Error::InvalidArgument("right-hand side failed on the reference solution".into()));
    }
    Ok(err)
}
