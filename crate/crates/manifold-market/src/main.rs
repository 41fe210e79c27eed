//! Command-line entry point: `simulate`, `check`, `phase`, and `ihat`
//! subcommands with deterministic CSV outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifold_market::output::{fmt_float, phase_csv, summary_text, trajectory_csv, write_atomic};
use manifold_market::{
    check_nash_concentrated, classify_outcome, cylinder_demo, detect_eaton_lipsey,
    estimate_ihat, phase_sweep, simulate, ManifoldModel, ModelError, RunConfig,
    TerminationReason,
};

#[derive(Parser)]
#[command(name = "manifold-market", version, about = "Spatial competition on compact manifolds")]
struct Cli {
    /// Override the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress and summary output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gradient dynamics and write trajectory and summary files.
    Simulate(ConfigArg),
    /// Print the concentrated-equilibrium report for the configured market.
    Check(ConfigArg),
    /// Sweep a (beta, N) grid and write the phase-diagram CSV.
    Phase {
        #[command(flatten)]
        config: ConfigArg,
        /// Smallest beta on the grid.
        #[arg(long)]
        beta_min: f64,
        /// Largest beta on the grid.
        #[arg(long)]
        beta_max: f64,
        /// Number of equally spaced beta values.
        #[arg(long, default_value_t = 8)]
        beta_steps: usize,
        /// Comma-separated firm counts, e.g. "3,4,5".
        #[arg(long, value_delimiter = ',', default_value = "3")]
        n: Vec<usize>,
        /// Seeded simulations per grid cell.
        #[arg(long, default_value_t = 8)]
        replicates: usize,
    },
    /// Monte Carlo estimate of the hypercube distance integral ī(A).
    Ihat {
        /// Hypercube dimension A.
        #[arg(long)]
        dim: usize,
        /// Sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn exit_code_for(e: &ModelError) -> ExitCode {
    match e {
        ModelError::Config(_) | ModelError::InvalidInput(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn load(cli: &Cli, arg: &ConfigArg) -> Result<RunConfig, ModelError> {
    let mut cfg = RunConfig::load(&arg.config)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, arg: &ConfigArg) -> Result<ExitCode, ModelError> {
    let cfg = load(cli, arg)?;
    let traj = simulate(&cfg.market, &cfg.manifold, None, &cfg.sim_options)?;
    let label = classify_outcome(&traj, &cfg.manifold)?;

    let dim = cfg.manifold.intrinsic_dimension();
    write_atomic(&cfg.output_dir.join("trajectory.csv"), &trajectory_csv(&traj, dim))?;
    write_atomic(&cfg.output_dir.join("summary.txt"), &summary_text(&traj, &label))?;
    if !cli.quiet {
        print!("{}", summary_text(&traj, &label));
        if let ManifoldModel::Segment { .. } = cfg.manifold {
            if let Ok(p) = detect_eaton_lipsey(&traj, &cfg.manifold, 0.03) {
                println!("eaton_lipsey_match: {}", p.matches);
            }
        }
        if let ManifoldModel::Product(_) = cfg.manifold {
            if let Ok((_, labels)) = cylinder_demo(&cfg.market, &cfg.manifold, &cfg.sim_options) {
                for (k, l) in labels.iter().enumerate() {
                    println!("factor {k}: {:?}", l.kind);
                }
            }
        }
    }
    if traj.terminated_reason == TerminationReason::Diverged {
        eprintln!("dynamics diverged: non-finite gradient encountered");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(cli: &Cli, arg: &ConfigArg) -> Result<ExitCode, ModelError> {
    let cfg = load(cli, arg)?;
    let r = check_nash_concentrated(&cfg.manifold, &cfg.market)?;
    println!("median_ok: {}", r.median_ok);
    println!("cardinality_class: {:?}", r.cardinality_class);
    println!("price_bar: {}", fmt_float(r.price_bar));
    println!("curvature_margin: {}", fmt_float(r.curvature_margin));
    println!("beta_threshold: {}", fmt_float(r.beta_threshold));
    if let Some((est, se)) = r.ihat {
        println!("ihat: {} +- {}", fmt_float(est), fmt_float(se));
    }
    println!("lambda_p_max: {}", fmt_float(r.lambda_p_max));
    println!("lambda_y_max: {}", fmt_float(r.lambda_y_max));
    println!("is_nash_candidate: {}", r.is_nash_candidate);
    println!("welfare_local_max: {}", r.welfare_local_max);
    println!("welfare_global_max: {}", r.welfare_global_max);
    for reason in &r.reasons {
        println!("reason: {reason}");
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_phase(
    cli: &Cli,
    arg: &ConfigArg,
    beta_min: f64,
    beta_max: f64,
    beta_steps: usize,
    n: &[usize],
    replicates: usize,
) -> Result<ExitCode, ModelError> {
    let cfg = load(cli, arg)?;
    if beta_steps < 1 || !(beta_min > 0.0) || beta_max < beta_min {
        return Err(ModelError::Config(
            "need 0 < beta-min <= beta-max and beta-steps >= 1".into(),
        ));
    }
    let beta_grid: Vec<f64> = if beta_steps == 1 {
        vec![beta_min]
    } else {
        (0..beta_steps)
            .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (beta_steps - 1) as f64)
            .collect()
    };
    let mut n_grid = n.to_vec();
    n_grid.sort_unstable();
    n_grid.dedup();

    let d = phase_sweep(
        &cfg.manifold,
        &cfg.market,
        &beta_grid,
        &n_grid,
        replicates,
        &cfg.sim_options,
    )?;
    write_atomic(&cfg.output_dir.join("phase.csv"), &phase_csv(&d))?;
    if !cli.quiet {
        print!("{}", phase_csv(&d));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_ihat(cli: &Cli, dim: usize, samples: usize) -> Result<ExitCode, ModelError> {
    let seed = cli.seed.unwrap_or(0);
    let (est, se) = estimate_ihat(dim, samples, seed)?;
    println!("ihat({dim}) = {} +- {}", fmt_float(est), fmt_float(se));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(arg) => cmd_simulate(&cli, arg),
        Command::Check(arg) => cmd_check(&cli, arg),
        Command::Phase { config, beta_min, beta_max, beta_steps, n, replicates } => {
            cmd_phase(&cli, config, *beta_min, *beta_max, *beta_steps, n, *replicates)
        }
        Command::Ihat { dim, samples } => cmd_ihat(&cli, *dim, *samples),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
