//! Seeding, continuation in the amplitude `y0`, and the convergence sweep
//! over `(L, m)` with residuals measured on a uniform grid.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::builtin::ConstraintFamily;
use crate::collocation::{residual_on_grid, CollocationSystem};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mesh::{Mesh, NodeFamily};
use crate::newton::{self, NewtonConfig, NewtonReport};
use crate::operator::{consistency_error, stability_probe};
use crate::ppoly::{ExtendedVector, FnPeriodic, PeriodicFunction, PeriodicPP};
use crate::problem::DelayProblem;

/// Seed near the Hopf point of the prototype: `y = y0 sin(2πt)`, `T = 2π`,
/// `p = π/2`, as flat collocation unknowns on `mesh`.
pub fn hopf_seed(y0: f64, mesh: &Arc<Mesh>) -> DVector<f64> {
    let f = FnPeriodic::new(1, |t, out: &mut [f64]| out[0] = y0 * (2.0 * PI * t).sin());
    let v = PeriodicPP::interpolate(mesh.clone(), &f);
    DVector::from_iterator(
        v.values().len() + 2,
        v.values().iter().copied().chain([2.0 * PI, PI / 2.0]),
    )
}

/// A converged (or attempted) solve on one mesh.
#[derive(Debug, Clone)]
pub struct Solution {
    pub v: PeriodicPP,
    pub mu: Vec<f64>,
    pub report: NewtonReport,
}

impl Solution {
    pub fn period(&self) -> f64 {
        self.mu[0]
    }

    /// Flat unknowns `(nodal values, μ)`.
    pub fn flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.v.values().len() + self.mu.len(),
            self.v.values().iter().chain(&self.mu).copied(),
        )
    }

    /// `(v, v(0), μ)`.
    pub fn lift(&self) -> Result<ExtendedVector> {
        ExtendedVector::new(self.v.clone(), self.v.value(0.0), self.mu.clone())
    }

    /// Flat unknowns resampled onto another mesh.
    pub fn resample_flat(&self, mesh: &Arc<Mesh>) -> DVector<f64> {
        let v = self.v.resample(mesh.clone());
        DVector::from_iterator(
            v.values().len() + self.mu.len(),
            v.values().iter().chain(&self.mu).copied(),
        )
    }
}

/// Newton solve of the collocation system on `mesh` from `x0`.
pub fn solve(
    prob: &dyn DelayProblem,
    constraints: &crate::constraints::AffineConstraints,
    mesh: &Arc<Mesh>,
    x0: DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<Solution> {
    let sys = CollocationSystem::new(prob, constraints, mesh.clone())?;
    let report = newton::solve(&sys, x0, cfg)?;
    let (v, mu) = sys.split(&report.final_x)?;
    Ok(Solution { v, mu, report })
}

/// Natural continuation in `y0`: a converged solve at `from_y0` from `x0`,
/// then `steps` equal increments to `to_y0`, each seeded by the previous
/// solution.
#[allow(clippy::too_many_arguments)]
pub fn continue_in_y0(
    prob: &dyn DelayProblem,
    family: &ConstraintFamily,
    from_y0: f64,
    to_y0: f64,
    steps: usize,
    mesh: &Arc<Mesh>,
    x0: DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<Solution> {
    if steps == 0 {
        return Err(Error::InvalidArgument("continuation needs at least one step".into()));
    }
    let attempt = |y0: f64, x: DVector<f64>| -> Result<Solution> {
        let cons = family(y0);
        let fail = |reason: String| Error::ContinuationFailed { y0, reason };
        let sol = solve(prob, &cons, mesh, x, cfg).map_err(|e| fail(e.to_string()))?;
        if !sol.report.converged {
            return Err(fail(format!(
                "Newton did not converge (residual {:e} after {} iterations)",
                sol.report.final_residual, sol.report.iterations
            )));
        }
        Ok(sol)
    };
    let mut sol = attempt(from_y0, x0)?;
    if from_y0 == to_y0 {
        return Ok(sol);
    }
    for k in 1..=steps {
        let y0 = from_y0 + (to_y0 - from_y0) * k as f64 / steps as f64;
        sol = attempt(y0, sol.flat())?;
    }
    Ok(sol)
}

/// How the sweep obtains its first solution at the target amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum SeedStrategy {
    /// Hopf seed directly at the target amplitude.
    Hopf,
    /// A solution file, resampled onto the base mesh.
    File { file: PathBuf },
    /// Hopf seed at `from_y0`, then continuation to the target.
    Continuation { from_y0: f64, steps: usize },
}

impl Default for SeedStrategy {
    fn default() -> Self {
        SeedStrategy::Continuation {
            from_y0: 0.1,
            steps: 14,
        }
    }
}

fn default_problem() -> String {
    "sd_proto".into()
}
fn default_y0() -> f64 {
    0.75
}
fn default_l_list() -> Vec<usize> {
    vec![10, 20, 40, 80]
}
fn default_m_list() -> Vec<usize> {
    vec![3, 5]
}
fn default_grid_points() -> usize {
    10001
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_problem")]
    pub problem: String,
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(rename = "L_list", default = "default_l_list")]
    pub l_list: Vec<usize>,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub node_family: NodeFamily,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub seed: SeedStrategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: default_problem(),
            y0: default_y0(),
            l_list: default_l_list(),
            m_list: default_m_list(),
            grid_points: default_grid_points(),
            node_family: NodeFamily::default(),
            output_dir: default_output_dir(),
            newton: NewtonConfig::default(),
            seed: SeedStrategy::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
        }
        if self.l_list.is_empty() || self.m_list.is_empty() {
            return Err(Error::InvalidArgument("L_list and m_list must be non-empty".into()));
        }
        if self.l_list.contains(&0) || self.m_list.contains(&0) {
            return Err(Error::InvalidArgument("every L and m must be at least 1".into()));
        }
        if !self.y0.is_finite() {
            return Err(Error::InvalidArgument("y0 must be finite".into()));
        }
        if let SeedStrategy::Continuation { steps: 0, .. } = self.seed {
            return Err(Error::InvalidArgument("continuation needs at least one step".into()));
        }
        self.newton.validate()
    }
}

/// Converged solution at the target amplitude on `mesh`, following the seed
/// strategy of `cfg`.
pub fn seed_solution(
    prob: &dyn DelayProblem,
    family: &ConstraintFamily,
    cfg: &RunConfig,
    mesh: &Arc<Mesh>,
) -> Result<Solution> {
    match &cfg.seed {
        SeedStrategy::Hopf => continue_in_y0(prob, family, cfg.y0, cfg.y0, 1, mesh, hopf_seed(cfg.y0, mesh), &cfg.newton),
        SeedStrategy::Continuation { from_y0, steps } => continue_in_y0(
            prob,
            family,
            *from_y0,
            cfg.y0,
            *steps,
            mesh,
            hopf_seed(*from_y0, mesh),
            &cfg.newton,
        ),
        SeedStrategy::File { file } => {
            let reader = std::io::BufReader::new(std::fs::File::open(file)?);
            let (v, mu) = crate::io::read_solution(reader)?;
            if v.dim() != prob.dim() {
                return Err(Error::DimensionMismatch("seed file has the wrong state dimension".into()));
            }
            let v = v.resample(mesh.clone());
            let x0 = DVector::from_iterator(v.values().len() + mu.len(), v.values().iter().chain(&mu).copied());
            continue_in_y0(prob, family, cfg.y0, cfg.y0, 1, mesh, x0, &cfg.newton)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub l: usize,
    pub m: usize,
    /// Grid maximum of `|v' - G|`; NaN for failed cells.
    pub residual_max: f64,
    pub period: f64,
    pub p: f64,
    pub newton_iters: usize,
    pub converged: bool,
    /// Per-`m` slope, filled after the sweep.
    pub fitted_slope: Option<f64>,
}

/// Residuals below this are at the Newton tolerance floor and are left out
/// of slope fits.
pub const SLOPE_FLOOR: f64 = 1e-11;

/// Least-squares slope of `-log(residual)` against `log(L)`; `None` with
/// fewer than two usable points.
pub fn fit_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| r.is_finite() && *r >= SLOPE_FLOOR)
        .map(|(l, r)| ((*l as f64).ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<ConvergenceRecord>,
    /// `(m, slope)` in the order of `m_list`.
    pub slopes: Vec<(usize, Option<f64>)>,
}

/// Solves every `(L, m)` cell at `cfg.y0` and records the grid residual.
///
/// The seed chain runs on `L = min(L_list)`, `m = max(m_list)`; every cell is
/// then seeded by the finest converged solution so far, resampled onto the
/// cell's mesh. Failed cells are kept as unconverged records.
pub fn convergence_sweep(prob: &dyn DelayProblem, family: &ConstraintFamily, cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let l_base = *cfg.l_list.iter().min().expect("validated");
    let m_base = *cfg.m_list.iter().max().expect("validated");
    let base_mesh = Arc::new(Mesh::uniform(l_base, m_base, cfg.node_family)?);
    let mut best = seed_solution(prob, family, cfg, &base_mesh)?;
    let cons = family(cfg.y0);

    let mut records = Vec::new();
    for &m in &cfg.m_list {
        let mut ls = cfg.l_list.clone();
        ls.sort_unstable();
        for &l in &ls {
            let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
            let x0 = best.resample_flat(&mesh);
            let record = match solve(prob, &cons, &mesh, x0, &cfg.newton) {
                Ok(sol) if sol.report.converged => {
                    let residual = residual_on_grid(prob, &sol.v, &sol.mu, cfg.grid_points)?;
                    let rec = ConvergenceRecord {
                        l,
                        m,
                        residual_max: residual,
                        period: sol.mu[0],
                        p: sol.mu.get(1).copied().unwrap_or(f64::NAN),
                        newton_iters: sol.report.iterations,
                        converged: true,
                        fitted_slope: None,
                    };
                    if mesh.num_nodes() > best.v.mesh().num_nodes() {
                        best = sol;
                    }
                    rec
                }
                outcome => {
                    let iters = match &outcome {
                        Ok(sol) => sol.report.iterations,
                        Err(e) => {
                            log::warn!("cell L = {l}, m = {m} failed: {e}");
                            0
                        }
                    };
                    ConvergenceRecord {
                        l,
                        m,
                        residual_max: f64::NAN,
                        period: f64::NAN,
                        p: f64::NAN,
                        newton_iters: iters,
                        converged: false,
                        fitted_slope: None,
                    }
                }
            };
            records.push(record);
        }
    }
    let mut slopes = Vec::new();
    for &m in &cfg.m_list {
        let pts: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| r.m == m && r.converged)
            .map(|r| (r.l, r.residual_max))
            .collect();
        let s = fit_slope(&pts);
        for r in records.iter_mut().filter(|r| r.m == m) {
            r.fitted_slope = s;
        }
        slopes.push((m, s));
    }
    Ok(SweepResult { records, slopes })
}

pub const CSV_HEADER: &str = "L,m,residual_max,T,p,newton_iters,converged";

pub fn write_records_csv(w: &mut impl Write, records: &[ConvergenceRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.l,
            r.m,
            fmt_f64(r.residual_max),
            fmt_f64(r.period),
            fmt_f64(r.p),
            r.newton_iters,
            r.converged
        )?;
    }
    Ok(())
}

pub fn write_slopes_csv(w: &mut impl Write, slopes: &[(usize, Option<f64>)]) -> Result<()> {
    writeln!(w, "m,fitted_slope")?;
    for (m, s) in slopes {
        writeln!(w, "{},{}", m, fmt_f64(s.unwrap_or(f64::NAN)))?;
    }
    Ok(())
}

/// Gnuplot script drawing `residual_max` against `L` on log-log axes, one
/// series per `m`, with dashed guides of slope `m` through each series'
/// first point.
pub fn write_plot_script(w: &mut impl Write, csv_name: &str, records: &[ConvergenceRecord]) -> Result<()> {
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set logscale xy")?;
    writeln!(w, "set xlabel 'L'")?;
    writeln!(w, "set ylabel 'max residual'")?;
    writeln!(w, "set key outside right")?;
    writeln!(w, "set terminal pngcairo size 800,600")?;
    writeln!(w, "set output 'convergence.png'")?;
    let mut ms: Vec<usize> = records.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut parts = Vec::new();
    for (k, m) in ms.iter().enumerate() {
        let color = k + 1;
        parts.push(format!(
            "'{csv_name}' using ($2=={m} && strcol(7) eq 'true' ? $1 : 1/0):3 skip 1 with linespoints lc {color} title 'm = {m}'"
        ));
        if let Some(r) = records.iter().filter(|r| r.m == *m && r.converged).min_by_key(|r| r.l) {
            let c = r.residual_max * (r.l as f64).powi(*m as i32);
            parts.push(format!("{}*x**(-{m}) with lines dt 2 lc {color} notitle", fmt_f64(c)));
        }
    }
    if parts.is_empty() {
        writeln!(w, "# no converged cells")?;
    } else {
        writeln!(w, "plot {}", parts.join(", \\\n     "))?;
    }
    Ok(())
}

/// Writes `convergence.csv`, `slopes.csv` and `convergence.gp` to `dir`.
pub fn write_sweep_outputs(dir: &std::path::Path, sweep: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("convergence.csv"))?;
    write_records_csv(&mut f, &sweep.records)?;
    let mut f = std::fs::File::create(dir.join("slopes.csv"))?;
    write_slopes_csv(&mut f, &sweep.slopes)?;
    let mut f = std::fs::File::create(dir.join("convergence.gp"))?;
    write_plot_script(&mut f, "convergence.csv", &sweep.records)?;
    Ok(())
}

/// Resamples `from` onto `mesh` and solves there; an unconverged solve is an
/// error.
pub fn refine(
    prob: &dyn DelayProblem,
    constraints: &crate::constraints::AffineConstraints,
    mesh: &Arc<Mesh>,
    from: &Solution,
    cfg: &NewtonConfig,
) -> Result<Solution> {
    let sol = solve(prob, constraints, mesh, from.resample_flat(mesh), cfg)?;
    if !sol.report.converged {
        return Err(Error::ContinuationFailed {
            y0: f64::NAN,
            reason: format!(
                "no convergence on L = {}, m = {} (residual {:e})",
                mesh.intervals(),
                mesh.degree(),
                sol.report.final_residual
            ),
        });
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    pub l: usize,
    pub m: usize,
    pub sigma_min: f64,
    pub cstab_estimate: f64,
}

/// Stability probe of `I - DΦ_L` at the converged solution of every
/// `(L, m)` cell of `cfg`, each seeded from `base`.
pub fn stability_table(
    prob: &dyn DelayProblem,
    family: &ConstraintFamily,
    cfg: &RunConfig,
    base: &Solution,
) -> Result<Vec<StabilityRecord>> {
    cfg.validate()?;
    let cons = family(cfg.y0);
    let mut out = Vec::new();
    for &m in &cfg.m_list {
        for &l in &cfg.l_list {
            let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
            let sol = refine(prob, &cons, &mesh, base, &cfg.newton)?;
            let probe = stability_probe(prob, &cons, &mesh, &sol.lift()?)?;
            out.push(StabilityRecord {
                l,
                m,
                sigma_min: probe.sigma_min,
                cstab_estimate: probe.cstab_estimate,
            });
        }
    }
    Ok(out)
}

/// Reference solution for consistency measurements: `L_ref = 8 max(L)`,
/// `m_ref = m + 2`, solved to `1e-12`.
pub fn reference_solution(
    prob: &dyn DelayProblem,
    family: &ConstraintFamily,
    cfg: &RunConfig,
    m: usize,
    base: &Solution,
) -> Result<Solution> {
    cfg.validate()?;
    let l_max = *cfg.l_list.iter().max().expect("validated");
    let mesh = Arc::new(Mesh::uniform(8 * l_max, m + 2, cfg.node_family)?);
    let newton = NewtonConfig {
        tol_residual: cfg.newton.tol_residual.min(1e-12),
        ..cfg.newton
    };
    refine(prob, &family(cfg.y0), &mesh, base, &newton)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRecord {
    pub l: usize,
    pub m: usize,
    pub sup: f64,
    pub lipschitz: f64,
}

/// Consistency error of degree `m` on every `L` of `cfg` against `reference`.
pub fn consistency_table(
    prob: &dyn DelayProblem,
    cfg: &RunConfig,
    m: usize,
    reference: &Solution,
) -> Result<Vec<ConsistencyRecord>> {
    let x_ref = reference.lift()?;
    let mut ls = cfg.l_list.clone();
    ls.sort_unstable();
    ls.iter()
        .map(|&l| {
            let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
            let e = consistency_error(prob, &mesh, &x_ref, cfg.grid_points)?;
            Ok(ConsistencyRecord {
                l,
                m,
                sup: e.sup,
                lipschitz: e.lipschitz,
            })
        })
        .collect()
}

pub fn write_stability_csv(w: &mut impl Write, records: &[StabilityRecord]) -> Result<()> {
    writeln!(w, "L,m,sigma_min,cstab_estimate")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.l, r.m, fmt_f64(r.sigma_min), fmt_f64(r.cstab_estimate))?;
    }
    Ok(())
}

pub fn write_consistency_csv(w: &mut impl Write, records: &[ConsistencyRecord]) -> Result<()> {
    writeln!(w, "L,m,consistency_sup,consistency_lipschitz")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.l, r.m, fmt_f64(r.sup), fmt_f64(r.lipschitz))?;
    }
    Ok(())
}
