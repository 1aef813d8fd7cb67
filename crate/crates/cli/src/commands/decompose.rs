//! `tensordict decompose`: planted orthogonal tensor, noisy projected SGD,
//! component/trace/report artifacts.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use tensordict::io::{write_csv_matrix, write_trace_csv};
use tensordict::linalg::random_orthonormal;
use tensordict::saddle::{
    noisy_pgd, ComponentSet, GradientOracle, IcaOracle, Schedule, SgdConfig, SimpleOracle,
};

use super::{ensure_out_dir, fail_usage, write_json};
use crate::{EXIT_NO_CONVERGENCE, EXIT_OK};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Simple,
    Ica,
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// Sampling oracle: simple (x = d^{1/4}·a_i) or ica (y = A·x).
    #[arg(long, value_enum)]
    mode: Mode,

    /// Problem dimension (components = dimension).
    #[arg(long, default_value_t = 10)]
    d: usize,

    /// JSON config overriding the defaults (unknown keys rejected).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for components.csv, trace.csv, report.json.
    #[arg(long)]
    out: PathBuf,

    /// Seed override (wins over the config file).
    #[arg(long)]
    seed: Option<u64>,
}

/// On-disk config: every field optional, defaults depend on --mode.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    eta: Option<f64>,
    iters: Option<usize>,
    noise_scale: Option<f64>,
    batch: Option<usize>,
    schedule: Option<Schedule>,
    per_column_noise: Option<bool>,
    seed: Option<u64>,
    target_error: Option<f64>,
}

pub fn run(args: DecomposeArgs) -> u8 {
    let file_cfg = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail_usage(format!("config {}: {e}", path.display())),
            };
            match serde_json::from_str::<FileConfig>(&text) {
                Ok(c) => c,
                Err(e) => return fail_usage(format!("config schema: {e}")),
            }
        }
        None => FileConfig::default(),
    };
    if args.d == 0 {
        return fail_usage("--d must be positive");
    }

    let config = SgdConfig {
        eta: file_cfg.eta.unwrap_or(1e-2),
        iters: file_cfg.iters.unwrap_or(10_000),
        noise_scale: file_cfg.noise_scale.unwrap_or(1.0),
        batch: file_cfg.batch.unwrap_or(match args.mode {
            Mode::Simple => 1,
            Mode::Ica => 100,
        }),
        schedule: file_cfg.schedule.unwrap_or(Schedule::Constant),
        per_column_noise: file_cfg.per_column_noise.unwrap_or(false),
        seed: args.seed.or(file_cfg.seed).unwrap_or(0),
    };
    let target = file_cfg.target_error.unwrap_or(match args.mode {
        Mode::Simple => 0.05,
        Mode::Ica => 0.1,
    });
    if let Err(e) = config.validate() {
        return fail_usage(e);
    }
    if let Err(e) = ensure_out_dir(&args.out) {
        return fail_usage(e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = args.d;
    let basis = random_orthonormal(d, d, &mut rng);
    let oracle: Box<dyn GradientOracle> = match args.mode {
        Mode::Simple => match SimpleOracle::new(
            ComponentSet::new(basis).expect("orthonormal columns"),
            config.batch,
        ) {
            Ok(o) => Box::new(o),
            Err(e) => return fail_usage(e),
        },
        Mode::Ica => match IcaOracle::new(basis, config.batch) {
            Ok(o) => Box::new(o),
            Err(e) => return fail_usage(e),
        },
    };
    let u0 = ComponentSet::random(d, d, &mut rng);
    let run = match noisy_pgd(oracle.as_ref(), &config, &u0, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NO_CONVERGENCE;
        }
    };

    let final_err = run.trace.last().map_or(f64::INFINITY, |t| t.recon_error);
    let converged = final_err <= target;

    if let Err(e) = write_csv_matrix(&args.out.join("components.csv"), run.components.matrix()) {
        return fail_usage(e);
    }
    let rows: Vec<(usize, f64, f64)> = run
        .trace
        .iter()
        .map(|t| (t.iter, t.objective, t.recon_error))
        .collect();
    if let Err(e) = write_trace_csv(&args.out.join("trace.csv"), &rows) {
        return fail_usage(e);
    }
    let report = json!({
        "mode": match args.mode { Mode::Simple => "simple", Mode::Ica => "ica" },
        "d": d,
        "iterations": run.trace.len() - 1,
        "final_recon_error": final_err,
        "final_objective": run.trace.last().map(|t| t.objective),
        "target_error": target,
        "converged": converged,
        "seed": config.seed,
        "eta": config.eta,
        "batch": config.batch,
    });
    if let Err(e) = write_json(&args.out.join("report.json"), &report) {
        return fail_usage(e);
    }
    println!(
        "decompose: final recon error {final_err:.4e} after {} iterations ({})",
        run.trace.len() - 1,
        if converged { "converged" } else { "no convergence" }
    );
    if converged {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}
