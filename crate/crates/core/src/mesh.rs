//! Meshes on the rescaled period `[0, 1]`, reference node families,
//! Lagrange bases and Gauss quadrature.
//!
//! A mesh of `L` intervals and degree `m` carries `m` collocation nodes per
//! interval (images of reference nodes in `[0, 1]`) and `m + 1` uniformly
//! spaced representation nodes per interval. The right endpoint of interval
//! `i` is shared with the left endpoint of interval `i + 1`, and `t_L` is
//! identified with `t_0`, so a continuous periodic piecewise polynomial has
//! exactly `m * L` nodal values per component.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this to a breakpoint are snapped onto it.
pub const SNAP_TOLERANCE: f64 = 1e-14;

const LEGENDRE_NEWTON_TOL: f64 = 1e-15;
const LEGENDRE_NEWTON_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFamily {
    /// Roots of the shifted Legendre polynomial of degree `m`.
    #[default]
    GaussLegendre,
    /// Roots of the Chebyshev polynomial of the second kind `U_m`, mapped to `[0, 1]`.
    Chebyshev2,
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeFamily::GaussLegendre => f.write_str("gauss-legendre"),
            NodeFamily::Chebyshev2 => f.write_str("chebyshev2"),
        }
    }
}

impl FromStr for NodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gauss-legendre" | "gausslegendre" | "gauss" | "legendre" => Ok(NodeFamily::GaussLegendre),
            "chebyshev2" | "chebyshev-2" | "cheb2" | "chebyshev" => Ok(NodeFamily::Chebyshev2),
            _ => Err(Error::UnsupportedFamily(s.to_string())),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
fn gauss_legendre_symmetric(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let mf = m as f64;
    for i in 1..=m {
        // Chebyshev-like initial guess, descending in i.
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (mf + 0.5)).cos();
        for _ in 0..LEGENDRE_NEWTON_MAX_ITERS {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= LEGENDRE_NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// The `m` reference collocation nodes in `(0, 1)`, ascending.
pub fn reference_nodes(m: usize, family: NodeFamily) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("degree m must be at least 1".into()));
    }
    let nodes = match family {
        NodeFamily::GaussLegendre => {
            let (x, _) = gauss_legendre_symmetric(m);
            x.into_iter().map(|x| 0.5 * (1.0 + x)).collect()
        }
        NodeFamily::Chebyshev2 => {
            let mf = m as f64;
            (1..=m)
                .rev()
                .map(|k| 0.5 * (1.0 + (std::f64::consts::PI * k as f64 / (mf + 1.0)).cos()))
                .collect()
        }
    };
    Ok(nodes)
}

/// Quadrature rule on `[0, 1]` built on the reference nodes of `family`.
///
/// For `GaussLegendre` this is the `m`-point Gauss rule (exact to degree
/// `2m - 1`); for `Chebyshev2` it is the interpolatory rule on the same nodes
/// (exact to degree `m - 1`).
pub fn quadrature_rule(m: usize, family: NodeFamily) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    match family {
        NodeFamily::GaussLegendre => {
            let (x, w) = gauss_legendre_symmetric(m);
            Ok((
                x.into_iter().map(|x| 0.5 * (1.0 + x)).collect(),
                w.into_iter().map(|w| 0.5 * w).collect(),
            ))
        }
        NodeFamily::Chebyshev2 => {
            let nodes = reference_nodes(m, family)?;
            let basis = LagrangeBasis::new(&nodes)?;
            let weights = basis.integrals(0.0, 1.0);
            Ok((nodes, weights))
        }
    }
}

/// Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    quadrature_rule(m, NodeFamily::GaussLegendre)
}

/// Barycentric weights `w_j = 1 / prod_{k != j} (x_j - x_k)`.
pub fn barycentric_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(nodes.len());
    for (j, &xj) in nodes.iter().enumerate() {
        let mut prod = 1.0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                let d = xj - xk;
                if d == 0.0 {
                    return Err(Error::DuplicateNodes(j.min(k), j.max(k)));
                }
                prod *= d;
            }
        }
        weights.push(1.0 / prod);
    }
    Ok(weights)
}

/// Lagrange basis on a fixed node set, evaluated through the barycentric
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("empty node set".into()));
        }
        let weights = barycentric_weights(nodes)?;
        Ok(Self {
            nodes: nodes.to_vec(),
            weights,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Basis values `l_j(s)`.
    ///
    /// Uses the node-product form `w_j * prod_{k != j}(s - x_k)`; within
    /// [`SNAP_TOLERANCE`] of a node the Kronecker values are returned exactly.
    pub fn values_into(&self, s: f64, out: &mut [f64]) {
        if let Some(hit) = self.nodes.iter().position(|&x| (x - s).abs() <= SNAP_TOLERANCE) {
            out.iter_mut().enumerate().for_each(|(j, o)| *o = if j == hit { 1.0 } else { 0.0 });
            return;
        }
        for (j, o) in out.iter_mut().enumerate().take(self.nodes.len()) {
            let mut p = self.weights[j];
            for (k, &xk) in self.nodes.iter().enumerate() {
                if k != j {
                    p *= s - xk;
                }
            }
            *o = p;
        }
    }

    /// Basis values and first derivatives at `s`.
    pub fn values_and_derivatives_into(&self, s: f64, values: &mut [f64], derivs: &mut [f64]) {
        for j in 0..self.nodes.len() {
            let mut p = 1.0;
            let mut dp = 0.0;
            for (k, &xk) in self.nodes.iter().enumerate() {
                if k != j {
                    dp = dp * (s - xk) + p;
                    p *= s - xk;
                }
            }
            values[j] = self.weights[j] * p;
            derivs[j] = self.weights[j] * dp;
        }
    }

    pub fn values(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.values_into(s, &mut out);
        out
    }

    pub fn derivatives(&self, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.values_and_derivatives_into(s, &mut v, &mut d);
        d
    }

    /// Interpolant of `data` (one value per node) at `s`, in the barycentric
    /// second form. Reproduces constants up to rounding.
    pub fn interpolate(&self, data: &[f64], s: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &w), &f) in self.nodes.iter().zip(&self.weights).zip(data) {
            let d = s - x;
            if d == 0.0 {
                return f;
            }
            let c = w / d;
            num += c * f;
            den += c;
        }
        num / den
    }

    /// `∫_a^b l_j(s) ds` for every basis function, exact (Gauss rule with
    /// enough points for the basis degree).
    pub fn integrals(&self, a: f64, b: f64) -> Vec<f64> {
        let n = self.len();
        let (qx, qw) = gauss_legendre_symmetric(n.div_ceil(2).max(1));
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut out = vec![0.0; n];
        let mut vals = vec![0.0; n];
        for (&x, &w) in qx.iter().zip(&qw) {
            self.values_into(mid + half * x, &mut vals);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += half * w * v;
            }
        }
        out
    }
}

/// Per-interval data shared by every interval of a mesh, on the reference
/// interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    pub collocation: LagrangeBasis,
    pub representation: LagrangeBasis,
    /// `antiderivative[(r, j)] = ∫_0^{r/m} l_j(s) ds`, `l_j` the collocation basis.
    pub antiderivative: DMatrix<f64>,
}

impl ReferenceElement {
    fn new(m: usize, family: NodeFamily) -> Result<Self> {
        let collocation = LagrangeBasis::new(&reference_nodes(m, family)?)?;
        let rep: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
        let representation = LagrangeBasis::new(&rep)?;
        let mut antiderivative = DMatrix::zeros(m + 1, m);
        for (r, &s) in rep.iter().enumerate() {
            for (j, v) in collocation.integrals(0.0, s).into_iter().enumerate() {
                antiderivative[(r, j)] = v;
            }
        }
        Ok(Self {
            collocation,
            representation,
            antiderivative,
        })
    }

    /// `∫_0^1 l_j(s) ds` (the interpolatory quadrature weights).
    pub fn interval_weights(&self) -> Vec<f64> {
        let m = self.antiderivative.nrows() - 1;
        (0..self.antiderivative.ncols())
            .map(|j| self.antiderivative[(m, j)])
            .collect()
    }
}

/// Partition `0 = t_0 < ... < t_L = 1` with its collocation and
/// representation nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    breakpoints: Vec<f64>,
    degree: usize,
    family: NodeFamily,
    c_msh: f64,
    reference: ReferenceElement,
}

impl Mesh {
    pub fn uniform(intervals: usize, degree: usize, family: NodeFamily) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one interval".into()));
        }
        let lf = intervals as f64;
        let breakpoints = (0..=intervals).map(|i| i as f64 / lf).collect();
        Self::from_breakpoints(breakpoints, degree, family)
    }

    pub fn from_breakpoints(breakpoints: Vec<f64>, degree: usize, family: NodeFamily) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("degree m must be at least 1".into()));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidMesh("need at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidMesh("breakpoints must start at 0 and end at 1".into()));
        }
        let mut h_max: f64 = 0.0;
        for (i, w) in breakpoints.windows(2).enumerate() {
            let h = w[1] - w[0];
            if h <= 0.0 || !h.is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "breakpoints not strictly increasing at index {}",
                    i + 1
                )));
            }
            h_max = h_max.max(h);
        }
        let intervals = breakpoints.len() - 1;
        // Round off so that i/L meshes report exactly 1.
        let c_msh = (h_max * intervals as f64 * 1e12).round() / 1e12;
        Ok(Self {
            breakpoints,
            degree,
            family,
            c_msh,
            reference: ReferenceElement::new(degree, family)?,
        })
    }

    /// Same breakpoints with another degree or family.
    pub fn with_degree(&self, degree: usize, family: NodeFamily) -> Result<Self> {
        Self::from_breakpoints(self.breakpoints.clone(), degree, family)
    }

    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `L * max_i (t_i - t_{i-1})`.
    pub fn c_msh(&self) -> f64 {
        self.c_msh
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    /// Number of distinct representation nodes, `m * L`.
    pub fn num_nodes(&self) -> usize {
        self.degree * self.intervals()
    }

    /// Number of collocation nodes, also `m * L`.
    pub fn num_collocation_nodes(&self) -> usize {
        self.degree * self.intervals()
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Collocation node `t_{i,j}` (zero-based `i`, `j`).
    pub fn collocation_node(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.interval(i);
        a + (b - a) * self.reference.collocation.nodes()[j]
    }

    pub fn collocation_nodes(&self) -> Vec<f64> {
        (0..self.intervals())
            .flat_map(|i| (0..self.degree).map(move |j| (i, j)))
            .map(|(i, j)| self.collocation_node(i, j))
            .collect()
    }

    /// Representation node `r` (0..=m) of interval `i`.
    pub fn representation_node(&self, i: usize, r: usize) -> f64 {
        let (a, b) = self.interval(i);
        if r == self.degree {
            return b;
        }
        a + (b - a) * (r as f64 / self.degree as f64)
    }

    /// The `m * L` distinct representation nodes in `[0, 1)`, global order.
    pub fn representation_nodes(&self) -> Vec<f64> {
        (0..self.intervals())
            .flat_map(|i| (0..self.degree).map(move |r| (i, r)))
            .map(|(i, r)| self.representation_node(i, r))
            .collect()
    }

    /// Global node index of representation node `r` (0..=m) of interval `i`.
    pub fn node_index(&self, i: usize, r: usize) -> usize {
        (i * self.degree + r) % self.num_nodes()
    }

    /// Reduces `t` modulo 1 and snaps it to a nearby breakpoint.
    ///
    /// Returns a value in `[0, 1)`; points that reduce to 1 map to `0.0`.
    pub fn reduce(&self, t: f64) -> f64 {
        let mut r = t - t.floor();
        if r >= 1.0 {
            r = 0.0;
        }
        let k = self.upper_interval(r);
        // Candidates: breakpoints k and k+1 bracket r.
        for idx in [k, k + 1] {
            if idx < self.breakpoints.len() && (r - self.breakpoints[idx]).abs() <= SNAP_TOLERANCE {
                r = self.breakpoints[idx];
            }
        }
        if r >= 1.0 {
            r = 0.0;
        }
        r
    }

    /// Index `i` with `t_i <= r < t_{i+1}` for `r` in `[0, 1)`.
    fn upper_interval(&self, r: f64) -> usize {
        let idx = self.breakpoints.partition_point(|&b| b <= r);
        idx.saturating_sub(1).min(self.intervals() - 1)
    }

    /// Interval index and local coordinate `s ∈ (0, 1]` of `t` after
    /// reduction modulo 1.
    ///
    /// A point on a breakpoint belongs to the interval on its LEFT; `t = 0`
    /// is the right end of the last interval.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let r = self.reduce(t);
        let l = self.intervals();
        if r == 0.0 {
            return (l - 1, 1.0);
        }
        // First breakpoint >= r; r lies in (t_{k-1}, t_k].
        let k = self.breakpoints.partition_point(|&b| b < r).clamp(1, l);
        let (a, b) = self.interval(k - 1);
        (k - 1, (r - a) / (b - a))
    }

    /// Like [`Mesh::locate`] but with the RIGHT convention at breakpoints.
    pub fn locate_right(&self, t: f64) -> (usize, f64) {
        let r = self.reduce(t);
        let i = self.upper_interval(r);
        let (a, b) = self.interval(i);
        (i, (r - a) / (b - a))
    }

    /// Whether `t` (mod 1) sits on a breakpoint.
    pub fn is_breakpoint(&self, t: f64) -> bool {
        let r = self.reduce(t);
        self.breakpoints.binary_search_by(|b| b.total_cmp(&r)).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gauss_nodes_small_degrees() {
        let n1 = reference_nodes(1, NodeFamily::GaussLegendre).unwrap();
        assert_eq!(n1, vec![0.5]);
        let n2 = reference_nodes(2, NodeFamily::GaussLegendre).unwrap();
        let s3 = 3f64.sqrt();
        assert!(close(n2[0], (3.0 - s3) / 6.0, 1e-15));
        assert!(close(n2[1], (3.0 + s3) / 6.0, 1e-15));
        assert!(close(n2[0], 0.211_324_865_405_187_1, 1e-15));
        assert!(close(n2[0] + n2[1], 1.0, 1e-15));
    }

    #[test]
    fn gauss_three_point_exactness() {
        let (x, w) = quadrature_rule(3, NodeFamily::GaussLegendre).unwrap();
        for k in 0..=5 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!(close(q, 1.0 / (k as f64 + 1.0), 1e-15), "k = {k}");
        }
        let q6: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((q6 - 1.0 / 7.0).abs() > 1e-6);
    }

    #[test]
    fn two_point_rule_misses_quartic() {
        let (x, w) = quadrature_rule(2, NodeFamily::GaussLegendre).unwrap();
        let cubic: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert!(close(cubic, 0.25, 1e-16));
        let quartic: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        // Brute-force: 0.5 * (a^4 + b^4) with a,b the two nodes.
        let brute = 0.5 * (x[0].powi(4) + x[1].powi(4));
        assert!(close(quartic, brute, 1e-16));
        let err = 0.2 - quartic;
        assert!(close(err, 1.0 / 180.0, 1e-15), "err = {err}");
    }

    #[test]
    fn midpoint_rule_linear() {
        let (x, w) = quadrature_rule(1, NodeFamily::GaussLegendre).unwrap();
        assert_eq!(x, vec![0.5]);
        assert_eq!(w, vec![1.0]);
        assert_eq!(x[0] * w[0], 0.5);
    }

    #[test]
    fn chebyshev_nodes_sorted_interior() {
        for m in 1..8 {
            let n = reference_nodes(m, NodeFamily::Chebyshev2).unwrap();
            assert_eq!(n.len(), m);
            assert!(n.windows(2).all(|w| w[0] < w[1]));
            assert!(n.iter().all(|&x| x > 0.0 && x < 1.0));
        }
        let n1 = reference_nodes(1, NodeFamily::Chebyshev2).unwrap();
        assert!(close(n1[0], 0.5, 1e-16));
    }

    #[test]
    fn family_parse() {
        assert_eq!("gauss-legendre".parse::<NodeFamily>().unwrap(), NodeFamily::GaussLegendre);
        assert_eq!("Chebyshev2".parse::<NodeFamily>().unwrap(), NodeFamily::Chebyshev2);
        assert!(matches!("lobatto".parse::<NodeFamily>(), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn barycentric_closed_forms() {
        assert_eq!(barycentric_weights(&[0.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(barycentric_weights(&[0.0, 0.5, 1.0]).unwrap(), vec![2.0, -4.0, 2.0]);
        assert_eq!(barycentric_weights(&[0.0, 0.3, 0.3]), Err(Error::DuplicateNodes(1, 2)));
    }

    #[test]
    fn basis_reproduces_nodal_data_and_constants() {
        let basis = LagrangeBasis::new(&[0.1, 0.4, 0.45, 0.9]).unwrap();
        let data = [1.0, -2.0, 0.5, 3.0];
        for (k, &x) in basis.nodes().iter().enumerate() {
            assert_eq!(basis.interpolate(&data, x), data[k]);
        }
        for s in [-0.3, 0.0, 0.17, 0.5, 1.2] {
            assert!(close(basis.interpolate(&[7.0; 4], s), 7.0, 1e-13));
            let sum: f64 = basis.values(s).iter().sum();
            assert!(close(sum, 1.0, 1e-13));
            let dsum: f64 = basis.derivatives(s).iter().sum();
            assert!(close(dsum, 0.0, 1e-12));
        }
    }

    #[test]
    fn basis_derivative_matches_difference_quotient() {
        let basis = LagrangeBasis::new(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let h = 1e-6;
        for s in [0.0, 0.13, 0.5, 0.999] {
            let d = basis.derivatives(s);
            let vp = basis.values(s + h);
            let vm = basis.values(s - h);
            for j in 0..5 {
                let fd = (vp[j] - vm[j]) / (2.0 * h);
                assert!(close(d[j], fd, 1e-7), "s={s} j={j}");
            }
        }
    }

    #[test]
    fn uniform_mesh_shapes() {
        let mesh = Mesh::uniform(2, 1, NodeFamily::GaussLegendre).unwrap();
        assert_eq!(mesh.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(mesh.collocation_nodes(), vec![0.25, 0.75]);
        assert_eq!(mesh.c_msh(), 1.0);

        let mesh = Mesh::uniform(4, 3, NodeFamily::Chebyshev2).unwrap();
        assert_eq!(mesh.intervals(), 4);
        assert_eq!(mesh.breakpoints(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(mesh.reference().collocation.len(), 3);
        assert_eq!(mesh.collocation_nodes().len(), 12);
        assert_eq!(mesh.representation_nodes().len(), 12);
    }

    #[test]
    fn mesh_validation() {
        assert!(Mesh::uniform(0, 2, NodeFamily::GaussLegendre).is_err());
        assert!(Mesh::uniform(3, 0, NodeFamily::GaussLegendre).is_err());
        assert!(Mesh::from_breakpoints(vec![0.0, 0.6, 0.4, 1.0], 2, NodeFamily::GaussLegendre).is_err());
        assert!(Mesh::from_breakpoints(vec![0.1, 1.0], 2, NodeFamily::GaussLegendre).is_err());
        let m = Mesh::from_breakpoints(vec![0.0, 0.1, 0.5, 1.0], 2, NodeFamily::GaussLegendre).unwrap();
        assert!(close(m.c_msh(), 1.5, 1e-12));
    }

    #[test]
    fn locate_uses_left_convention() {
        let mesh = Mesh::uniform(4, 2, NodeFamily::GaussLegendre).unwrap();
        assert_eq!(mesh.locate(0.5), (1, 1.0));
        assert_eq!(mesh.locate_right(0.5), (2, 0.0));
        assert_eq!(mesh.locate(0.0), (3, 1.0));
        assert_eq!(mesh.locate(1.0), (3, 1.0));
        assert_eq!(mesh.locate(-0.75), (0, 1.0));
        let (i, s) = mesh.locate(0.5 + 1e-15);
        assert_eq!((i, s), (1, 1.0));
        let (i, s) = mesh.locate(0.6);
        assert_eq!(i, 2);
        assert!(close(s, 0.4, 1e-12));
        assert!(mesh.is_breakpoint(1.25));
        assert!(!mesh.is_breakpoint(0.3));
    }

    #[test]
    fn antiderivative_table_integrates_exactly() {
        let mesh = Mesh::uniform(1, 4, NodeFamily::GaussLegendre).unwrap();
        let re = mesh.reference();
        // Integrate s^3 on [0, r/m] via the collocation basis.
        let data: Vec<f64> = re.collocation.nodes().iter().map(|s| s.powi(3)).collect();
        for r in 0..=4 {
            let s = r as f64 / 4.0;
            let q: f64 = (0..4).map(|j| re.antiderivative[(r, j)] * data[j]).sum();
            assert!(close(q, s.powi(4) / 4.0, 1e-15));
        }
    }
}
