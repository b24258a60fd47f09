use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdcolloc::harness::{RunConfig, SeedStrategy};
use sdcolloc::{Damping, NodeFamily};

mod commands;

#[derive(Parser)]
#[command(name = "sdcolloc", version, about = "Periodic solutions of state-dependent delay equations by collocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every (L, m) cell and write one solution file per cell.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the collocation residual vector of each cell.
        #[arg(long)]
        dump_residual: bool,
        /// Also write the collocation Jacobian of each cell.
        #[arg(long)]
        dump_jacobian: bool,
    },
    /// Convergence sweep: grid residuals, fitted slopes and a gnuplot script.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Smallest singular value and inverse norm of I - DΦ_L per cell.
    ProbeStability {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check that each collocation solution is a fixed point of Φ_L.
    VerifyFixedpoint {
        #[command(flatten)]
        run: RunArgs,
        /// Largest accepted sup-grid distance between Φ_L(x) and x.
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
    /// Consistency error against a reference solution on a finer mesh.
    Consistency {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedKind {
    Hopf,
    Continuation,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its entries.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Amplitude constraint value.
    #[arg(long)]
    y0: Option<f64>,
    /// Comma-separated numbers of mesh intervals.
    #[arg(short = 'L', long, value_delimiter = ',')]
    intervals: Option<Vec<usize>>,
    /// Comma-separated polynomial degrees.
    #[arg(short = 'm', long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// gauss-legendre or chebyshev2.
    #[arg(long)]
    node_family: Option<NodeFamily>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Newton residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Plain Newton steps without backtracking.
    #[arg(long)]
    no_damping: bool,
    #[arg(long, value_enum)]
    seed: Option<SeedKind>,
    /// Start from a solution file instead.
    #[arg(long, conflicts_with = "seed")]
    seed_file: Option<PathBuf>,
    /// Starting amplitude of the continuation seed.
    #[arg(long)]
    from_y0: Option<f64>,
    /// Continuation steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Log Newton iterations.
    #[arg(short, long)]
    verbose: bool,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        if let Some(y0) = self.y0 {
            cfg.y0 = y0;
        }
        if let Some(l) = &self.intervals {
            cfg.l_list = l.clone();
        }
        if let Some(m) = &self.degrees {
            cfg.m_list = m.clone();
        }
        if let Some(g) = self.grid_points {
            cfg.grid_points = g;
        }
        if let Some(f) = self.node_family {
            cfg.node_family = f;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(t) = self.tol {
            cfg.newton.tol_residual = t;
        }
        if let Some(k) = self.max_iters {
            cfg.newton.max_iters = k;
        }
        if self.no_damping {
            cfg.newton.damping = Damping::None;
        }
        if self.verbose {
            cfg.newton.log_iterations = true;
        }
        if let Some(file) = &self.seed_file {
            cfg.seed = SeedStrategy::File { file: file.clone() };
        }
        match self.seed {
            Some(SeedKind::Hopf) => cfg.seed = SeedStrategy::Hopf,
            Some(SeedKind::Continuation) if !matches!(cfg.seed, SeedStrategy::Continuation { .. }) => {
                cfg.seed = SeedStrategy::default()
            }
            _ => {}
        }
        if let SeedStrategy::Continuation { from_y0, steps } = &mut cfg.seed {
            if let Some(y) = self.from_y0 {
                *from_y0 = y;
            }
            if let Some(s) = self.steps {
                *steps = s;
            }
        } else if self.from_y0.is_some() || self.steps.is_some() {
            anyhow::bail!("--from-y0 and --steps apply to the continuation seed only");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Solve { run, .. }
        | Command::Sweep { run }
        | Command::ProbeStability { run }
        | Command::VerifyFixedpoint { run, .. }
        | Command::Consistency { run } => run.verbose,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Solve {
            run,
            dump_residual,
            dump_jacobian,
        } => run.resolve().and_then(|cfg| commands::solve(&cfg, *dump_residual, *dump_jacobian)),
        Command::Sweep { run } => run.resolve().and_then(|cfg| commands::sweep(&cfg)),
        Command::ProbeStability { run } => run.resolve().and_then(|cfg| commands::probe_stability(&cfg)),
        Command::VerifyFixedpoint { run, threshold } => {
            run.resolve().and_then(|cfg| commands::verify_fixedpoint(&cfg, *threshold))
        }
        Command::Consistency { run } => run.resolve().and_then(|cfg| commands::consistency(&cfg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
