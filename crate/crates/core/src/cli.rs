//! Command-line interface: foliate, slice, verify, and info commands over
//! the configured metric families.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::foliation::foliate;
use crate::geometry::compute_geometry;
use crate::grid::ScalarField;
use crate::metric::LambdaScanOptions;
use crate::solver::newton_solve;
use crate::verify::{run_suite, SuiteMode};

#[derive(Parser, Debug)]
#[command(
    name = "cmc",
    version,
    about = "Constant-mean-curvature foliations of collapsing torus spacetimes"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// March a foliation across a curvature schedule and write it to JSON.
    Foliate(FoliateArgs),
    /// Solve a single prescribed-curvature slice and write it as CSV.
    Slice(SliceArgs),
    /// Run the verification battery.
    Verify(VerifyArgs),
    /// Describe the configured metric and its vacuum-energy estimate.
    Info(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metric family: minkowski, collapse, wavy, desitter, or tabulated.
    #[arg(long)]
    family: Option<String>,
    /// Spatial dimension (1 or 2).
    #[arg(long)]
    dim: Option<usize>,
    /// Grid points per axis, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Ripple amplitude for the wavy family.
    #[arg(long)]
    eps: Option<f64>,
    /// Expansion rate for the desitter family.
    #[arg(long)]
    h0: Option<f64>,
    /// Lattice file for the tabulated family.
    #[arg(long)]
    metric_file: Option<PathBuf>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.family {
            cfg.family = v.clone();
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = &self.grid {
            cfg.grid = v.clone();
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.h0 {
            cfg.h0 = v;
        }
        if let Some(v) = &self.metric_file {
            cfg.metric_file = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FoliateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// First prescribed mean curvature.
    #[arg(long)]
    tau0: Option<f64>,
    /// Last prescribed mean curvature.
    #[arg(long)]
    tau_max: Option<f64>,
    /// Number of recorded slices.
    #[arg(long)]
    slices: Option<usize>,
    /// Output path for the foliation record.
    #[arg(long, default_value = "foliation.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SliceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Prescribed mean curvature of the slice.
    #[arg(long)]
    tau: f64,
    /// Output CSV path for the graph values.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Include the two-dimensional battery.
    #[arg(long)]
    full: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn cmd_foliate(args: &FoliateArgs) -> Result<i32> {
    let mut cfg = args.common.build_config()?;
    if let Some(v) = args.tau0 {
        cfg.tau0 = v;
    }
    if let Some(v) = args.tau_max {
        cfg.tau_max = v;
    }
    if let Some(v) = args.slices {
        cfg.slices = v;
    }
    let metric = cfg.metric()?;
    let grid = cfg.grid()?;
    let result = foliate(&metric, grid, &cfg.foliate_options())?;
    println!(
        "family {}, vacuum energy estimate {:.6e} (gate threshold {:.6e})",
        result.family, result.lambda.lambda, result.gate_threshold
    );
    for s in &result.slices {
        println!(
            "tau {:10.4}  volume {:12.6e}  lapse [{:.4e}, {:.4e}]  residual {:.2e}",
            s.tau, s.volume, s.lapse_min, s.lapse_max, s.residual
        );
    }
    result.save(&args.out)?;
    println!(
        "wrote {} slices ({} committed solves) to {}",
        result.slices.len(),
        result.substeps_taken,
        args.out.display()
    );
    Ok(0)
}

fn cmd_slice(args: &SliceArgs) -> Result<i32> {
    let cfg = args.common.build_config()?;
    let metric = cfg.metric()?;
    let grid = cfg.grid()?;

    // Unlike foliate, a single solve proceeds below the gate threshold; it
    // just carries no existence certificate there.
    let lambda = metric.estimate_lambda(&LambdaScanOptions::default())?;
    let threshold = (metric.dim() as f64 * lambda.lambda).sqrt();
    if args.tau <= threshold {
        eprintln!(
            "warning: tau = {} is at or below the gate threshold sqrt(n lambda) = {:.6}; \
             solving anyway without an existence certificate",
            args.tau, threshold
        );
    }

    let t_seed = metric.seed_time_for_curvature(args.tau, &grid)?;
    let seed = ScalarField::constant(grid, t_seed);
    let (u, trace) = newton_solve(&metric, &seed, args.tau, &cfg.newton())?;
    let geom = compute_geometry(&metric, &u, 1e-12)?;
    println!(
        "tau {}: {} Newton iterations, residual {:.2e}, volume {:.6e}, graph range [{:.6}, {:.6}]",
        args.tau,
        trace.iterations,
        trace.final_residual,
        geom.total_volume(),
        u.min(),
        u.max()
    );
    if let Some(path) = &args.out {
        u.write_csv_file(path)?;
        println!("wrote graph values to {}", path.display());
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mode = if args.full { SuiteMode::Full } else { SuiteMode::Quick };
    let report = run_suite(mode);
    print!("{}", report.render_text());
    if let Some(path) = &args.json {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&report)?)?;
        std::fs::rename(&tmp, path)?;
        println!("wrote report to {}", path.display());
    }
    Ok(if report.all_passed() { 0 } else { 2 })
}

fn cmd_info(args: &CommonArgs) -> Result<i32> {
    let cfg = args.build_config()?;
    let metric = cfg.metric()?;
    let (lo, hi) = metric.time_domain();
    println!("{}", metric.describe());
    println!("spatial dimension {}, time domain ({lo}, {hi})", metric.dim());
    let grid = cfg.grid()?;
    println!(
        "grid {:?}, lengths {:?}",
        cfg.grid_sizes(),
        cfg.lengths()
    );
    let lambda = metric.estimate_lambda(&LambdaScanOptions::default())?;
    let threshold = (metric.dim() as f64 * lambda.lambda).sqrt();
    println!(
        "vacuum energy estimate {:.6e} (converged: {}), gate threshold {:.6e}",
        lambda.lambda, lambda.converged, threshold
    );
    match metric.seed_time_for_curvature(cfg.tau0, &grid) {
        Ok(t) => println!("slice-average curvature {} near t = {:.6}", cfg.tau0, t),
        Err(e) => println!("no seed time for curvature {}: {e}", cfg.tau0),
    }
    Ok(0)
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Clap handles help and version as "errors" with exit code 0.
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Foliate(a) => cmd_foliate(a),
        Command::Slice(a) => cmd_slice(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Info(a) => cmd_info(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::GateRefused { lambda_converged: false, .. } = e {
                eprintln!(
                    "note: the vacuum-energy scan did not converge; the threshold may be unreliable"
                );
            }
            1
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
