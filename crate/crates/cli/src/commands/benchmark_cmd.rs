//! `tensordict benchmark`: run the verification suite end-to-end and emit a
//! markdown + JSON report with plot-ready CSV curves.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use tensordict::benchmark::{run_all, CRITERIA};

use super::{ensure_out_dir, fail_usage, write_json};
use crate::{EXIT_CRITERIA_FAILED, EXIT_OK};

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Output directory for report.md, report.json and curves/.
    #[arg(long)]
    out: PathBuf,

    /// Restrict to one criterion group: saddle, cumulant, convals, embed.
    #[arg(long)]
    only: Option<String>,

    /// Base seed shifting every internal seed (0 = the pinned gate).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(args: BenchmarkArgs) -> u8 {
    if let Some(group) = &args.only {
        let known: Vec<&str> = {
            let mut g: Vec<&str> = CRITERIA.iter().map(|c| c.2).collect();
            g.dedup();
            g
        };
        if !known.contains(&group.as_str()) {
            return fail_usage(format!(
                "unknown group {group:?}; expected one of {known:?}"
            ));
        }
    }
    if let Err(e) = ensure_out_dir(&args.out) {
        return fail_usage(e);
    }
    let curves_dir = args.out.join("curves");
    if let Err(e) = ensure_out_dir(&curves_dir) {
        return fail_usage(e);
    }

    let started = std::time::Instant::now();
    let reports = match run_all(args.only.as_deref(), args.seed) {
        Ok(r) => r,
        Err(e) => return fail_usage(e),
    };
    let elapsed = started.elapsed().as_secs_f64();

    let mut md = String::new();
    let _ = writeln!(md, "# Benchmark report\n");
    let _ = writeln!(md, "total runtime: {elapsed:.1}s\n");
    let mut failures = Vec::new();
    for report in &reports {
        println!("{}", report.status_line());
        let _ = writeln!(
            md,
            "## Criterion {}: {} [{}]\n",
            report.id,
            report.name,
            if report.passed { "PASS" } else { "FAIL" }
        );
        for line in &report.details {
            println!("    {line}");
            let _ = writeln!(md, "- {line}");
        }
        let _ = writeln!(md);
        for curve in &report.curves {
            let file = curves_dir.join(format!("{}.csv", curve.name));
            let mut text = format!("{},{}\n", curve.x_label, curve.y_label);
            for (x, y) in &curve.points {
                let _ = writeln!(text, "{x},{y:.10e}");
            }
            if let Err(e) = std::fs::write(&file, text) {
                return fail_usage(format!("cannot write {}: {e}", file.display()));
            }
            let _ = writeln!(md, "curve: `curves/{}.csv`\n", curve.name);
        }
        if !report.passed {
            failures.push(format!("{} ({})", report.id, report.name));
        }
    }
    let json_report = json!({
        "runtime_seconds": elapsed,
        "seed": args.seed,
        "criteria": reports.iter().map(|r| json!({
            "id": r.id,
            "name": r.name,
            "group": r.group,
            "passed": r.passed,
            "details": r.details,
        })).collect::<Vec<_>>(),
        "failures": failures,
    });
    if let Err(e) = write_json(&args.out.join("report.json"), &json_report) {
        return fail_usage(e);
    }
    if let Err(e) = std::fs::write(args.out.join("report.md"), md) {
        return fail_usage(format!("cannot write report.md: {e}"));
    }
    if failures.is_empty() {
        println!("benchmark: all {} criteria passed ({elapsed:.1}s)", reports.len());
        EXIT_OK
    } else {
        eprintln!("benchmark: failed criteria: {}", failures.join(", "));
        EXIT_CRITERIA_FAILED
    }
}
