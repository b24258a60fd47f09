use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sdcolloc::harness::{
    consistency_table, convergence_sweep, fit_slope, reference_solution, refine, seed_solution, stability_table,
    write_consistency_csv, write_stability_csv, write_sweep_outputs, RunConfig, Solution,
};
use sdcolloc::io::{fmt_f64, write_matrix, write_solution, write_vector};
use sdcolloc::operator::apply_phi_l;
use sdcolloc::ppoly::norm_sup_grid;
use sdcolloc::{builtin, residual_on_grid, CollocationSystem, ConstraintFamily, DelayProblem, Mesh, PeriodicFunction};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Problem, constraint family and the converged solution on the coarsest
/// interval count and highest degree of the config.
fn setup(cfg: &RunConfig) -> Result<(Arc<dyn DelayProblem>, ConstraintFamily, Solution)> {
    let (prob, family) = builtin(&cfg.problem)?;
    let l = *cfg.l_list.iter().min().expect("validated");
    let m = *cfg.m_list.iter().max().expect("validated");
    let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
    let base = seed_solution(prob.as_ref(), &family, cfg, &mesh).context("seeding failed")?;
    log::info!("seed solution on L = {l}, m = {m}: T = {}", base.period());
    Ok((prob, family, base))
}

fn cells(cfg: &RunConfig) -> Vec<(usize, usize)> {
    cfg.m_list
        .iter()
        .flat_map(|&m| cfg.l_list.iter().map(move |&l| (l, m)))
        .collect()
}

pub fn solve(cfg: &RunConfig, dump_residual: bool, dump_jacobian: bool) -> Result<()> {
    let (prob, family, base) = setup(cfg)?;
    let cons = family(cfg.y0);
    println!("L,m,T,p,residual_max,newton_iters");
    for (l, m) in cells(cfg) {
        let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
        let sol = refine(prob.as_ref(), &cons, &mesh, &base, &cfg.newton)?;
        let residual = residual_on_grid(prob.as_ref(), &sol.v, &sol.mu, cfg.grid_points)?;
        println!(
            "{l},{m},{},{},{},{}",
            fmt_f64(sol.period()),
            fmt_f64(sol.mu.get(1).copied().unwrap_or(f64::NAN)),
            fmt_f64(residual),
            sol.report.iterations
        );
        let tag = format!("L{l}_m{m}");
        write_solution(&mut create(&cfg.output_dir, &format!("solution_{tag}.txt"))?, &sol.v, &sol.mu)?;
        if dump_residual || dump_jacobian {
            let sys = CollocationSystem::new(prob.as_ref(), &cons, mesh.clone())?;
            let x = sol.flat();
            if dump_residual {
                let r = sys.residual(&x)?;
                write_vector(&mut create(&cfg.output_dir, &format!("residual_{tag}.txt"))?, &r.values)?;
            }
            if dump_jacobian {
                let j = sys.jacobian(&x)?;
                write_matrix(&mut create(&cfg.output_dir, &format!("jacobian_{tag}.txt"))?, &j)?;
            }
        }
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let (prob, family) = builtin(&cfg.problem)?;
    let result = convergence_sweep(prob.as_ref(), &family, cfg)?;
    write_sweep_outputs(&cfg.output_dir, &result)?;
    println!("L,m,residual_max,T,newton_iters,converged");
    for r in &result.records {
        println!(
            "{},{},{:.6e},{:.8},{},{}",
            r.l, r.m, r.residual_max, r.period, r.newton_iters, r.converged
        );
    }
    for (m, s) in &result.slopes {
        match s {
            Some(s) => println!("m = {m}: fitted slope {s:.3}"),
            None => println!("m = {m}: fitted slope unavailable"),
        }
    }
    println!("wrote convergence.csv, slopes.csv, convergence.gp to {}", cfg.output_dir.display());
    let failed = result.records.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        bail!("{failed} of {} cells did not converge", result.records.len());
    }
    Ok(())
}

pub fn probe_stability(cfg: &RunConfig) -> Result<()> {
    let (prob, family, base) = setup(cfg)?;
    let table = stability_table(prob.as_ref(), &family, cfg, &base)?;
    write_stability_csv(&mut create(&cfg.output_dir, "stability.csv")?, &table)?;
    println!("L,m,sigma_min,cstab_estimate");
    for r in &table {
        println!("{},{},{:.6e},{:.6e}", r.l, r.m, r.sigma_min, r.cstab_estimate);
    }
    Ok(())
}

pub fn verify_fixedpoint(cfg: &RunConfig, threshold: f64) -> Result<()> {
    let (prob, family, base) = setup(cfg)?;
    let cons = family(cfg.y0);
    let mut worst: f64 = 0.0;
    let mut out = create(&cfg.output_dir, "fixedpoint.csv")?;
    use std::io::Write;
    writeln!(out, "L,m,phi_defect,alpha_defect")?;
    println!("L,m,phi_defect,alpha_defect");
    for (l, m) in cells(cfg) {
        let mesh = Arc::new(Mesh::uniform(l, m, cfg.node_family)?);
        let sol = refine(prob.as_ref(), &cons, &mesh, &base, &cfg.newton)?;
        let x = sol.lift()?;
        let phi = apply_phi_l(prob.as_ref(), &cons, &mesh, &x)?;
        let d = norm_sup_grid(&phi.difference(&x)?, cfg.grid_points)?;
        let v0 = phi.v.value(0.0);
        let a = phi.alpha.iter().zip(&v0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
        writeln!(out, "{l},{m},{},{}", fmt_f64(d), fmt_f64(a))?;
        println!("{l},{m},{d:.3e},{a:.3e}");
    }
    if worst > threshold {
        bail!("fixed-point defect {worst:e} exceeds {threshold:e}");
    }
    Ok(())
}

pub fn consistency(cfg: &RunConfig) -> Result<()> {
    let (prob, family, base) = setup(cfg)?;
    let mut rows = Vec::new();
    for &m in &cfg.m_list {
        let reference = reference_solution(prob.as_ref(), &family, cfg, m, &base)
            .with_context(|| format!("reference solution for m = {m}"))?;
        let table = consistency_table(prob.as_ref(), cfg, m, &reference)?;
        let slope = |f: fn(&sdcolloc::harness::ConsistencyRecord) -> f64| {
            fit_slope(&table.iter().map(|r| (r.l, f(r))).collect::<Vec<_>>())
        };
        println!(
            "m = {m}: slope (Lipschitz norm) {}, slope (sup norm) {}",
            slope(|r| r.lipschitz).map_or("n/a".into(), |s| format!("{s:.3}")),
            slope(|r| r.sup).map_or("n/a".into(), |s| format!("{s:.3}"))
        );
        rows.extend(table);
    }
    write_consistency_csv(&mut create(&cfg.output_dir, "consistency.csv")?, &rows)?;
    println!("L,m,consistency_sup,consistency_lipschitz");
    for r in &rows {
        println!("{},{},{:.6e},{:.6e}", r.l, r.m, r.sup, r.lipschitz);
    }
    Ok(())
}
