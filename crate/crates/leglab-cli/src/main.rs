//! Batch front-end: verify serialized curves, run pipelines from spec
//! files, and ship the bundled demo problems.
//!
//! Exit codes: 0 all certificates pass, 1 certificate or pipeline failure,
//! 2 usage or parse error.

use clap::{Parser, Subcommand};
use leglab::demos::{build_demo, demo_names, run_demo_file, DemoFile};
use leglab::report::{curve_csv, verify_bundle, CurveBundle};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "leglab", version, about = "Holomorphic Legendrian curve pipelines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recompute all certificates of a serialized curve bundle
    Verify {
        path: PathBuf,
    },
    /// Run a pipeline from a spec file
    Run {
        /// approximate | extend | push | mergelyan | carleman | embed
        pipeline: String,
        spec: PathBuf,
        /// cap for the polynomial-degree escalation
        #[arg(long)]
        degree_max: Option<u32>,
        /// override the error budget
        #[arg(long)]
        tol: Option<f64>,
        /// seed for all randomized steps
        #[arg(long)]
        seed: Option<u64>,
        /// where to write the final curve JSON (report goes next to it)
        #[arg(long, default_value = "curve.json")]
        out: PathBuf,
        /// also write CSV samples of the curve here
        #[arg(long)]
        csv: Option<PathBuf>,
        /// samples per boundary or arc in the CSV
        #[arg(long, default_value_t = 1024)]
        csv_points: usize,
    },
    /// List bundled demos or write one as a runnable spec file
    Demo {
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // the cap is honored trivially: every pipeline in this build runs on a
    // single thread, but the variable must still parse cleanly
    if let Ok(v) = std::env::var("LEGLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {}
            _ => {
                eprintln!("LEGLAB_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Verify { path } => cmd_verify(&path),
        Cmd::Run { pipeline, spec, degree_max, tol, seed, out, csv, csv_points } => {
            cmd_run(&pipeline, &spec, degree_max, tol, seed, &out, csv.as_deref(), csv_points)
        }
        Cmd::Demo { name, list, out } => cmd_demo(name.as_deref(), list, out.as_deref()),
    }
}

fn cmd_verify(path: &std::path::Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let bundle: CurveBundle = match serde_json::from_str(&text) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("parse error: {e}");
            return ExitCode::from(2);
        }
    };
    match verify_bundle(&bundle) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("verification error: {e}");
            ExitCode::from(1)
        }
    }
}

fn pipeline_matches(pipeline: &str, file: &DemoFile) -> bool {
    matches!(
        (pipeline, file),
        ("approximate", DemoFile::Approximate { .. })
            | ("extend", DemoFile::Extend { .. })
            | ("push", DemoFile::Push { .. })
            | ("mergelyan", DemoFile::Mergelyan { .. })
            | ("carleman", DemoFile::Carleman { .. })
            | ("embed", DemoFile::Embed { .. })
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    pipeline: &str,
    spec_path: &std::path::Path,
    degree_max: Option<u32>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: &std::path::Path,
    csv: Option<&std::path::Path>,
    csv_points: usize,
) -> ExitCode {
    let known = ["approximate", "extend", "push", "mergelyan", "carleman", "embed"];
    if !known.contains(&pipeline) {
        eprintln!("unknown pipeline {pipeline:?}; expected one of {known:?}");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", spec_path.display());
            return ExitCode::from(2);
        }
    };
    let mut file: DemoFile = match serde_json::from_str(&text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("parse error: {e}");
            return ExitCode::from(2);
        }
    };
    if !pipeline_matches(pipeline, &file) {
        eprintln!("spec file does not describe a {pipeline} run");
        return ExitCode::from(2);
    }
    if let Some(d) = degree_max {
        file.set_degree_max(d);
    }
    if let Some(t) = tol {
        file.set_tol(t);
    }
    if let Some(s) = seed {
        file.set_seed(s);
    }
    let report_path = out.with_extension("report.json");
    match run_demo_file(&file) {
        Ok(artifacts) => {
            let curve_json = serde_json::to_string(&artifacts.bundle).unwrap();
            if let Err(e) = std::fs::write(out, curve_json) {
                eprintln!("cannot write {}: {e}", out.display());
                return ExitCode::from(2);
            }
            std::fs::write(
                &report_path,
                serde_json::to_string_pretty(&artifacts.report).unwrap(),
            )
            .ok();
            if let Some(csv_path) = csv {
                match curve_csv(&artifacts.bundle.curve, &artifacts.csv_arc, csv_points) {
                    Ok(text) => {
                        std::fs::write(csv_path, text).ok();
                    }
                    Err(e) => eprintln!("csv sampling failed: {e}"),
                }
            }
            // final gate: re-verify the written curve
            match verify_bundle(&artifacts.bundle) {
                Ok(r) if r.pass => {
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    ExitCode::SUCCESS
                }
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("verification error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            let diag = serde_json::json!({ "error": e.to_string() });
            std::fs::write(&report_path, serde_json::to_string_pretty(&diag).unwrap()).ok();
            eprintln!("pipeline failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_demo(name: Option<&str>, list: bool, out: Option<&std::path::Path>) -> ExitCode {
    if list || name.is_none() {
        for n in demo_names() {
            println!("{n}");
        }
        return if list || name.is_none() && !demo_names().is_empty() {
            if name.is_none() && !list {
                // bare `demo` with no name prints usage-style output
                eprintln!("usage: leglab demo <name> [--out file.json] or leglab demo --list");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        };
    }
    let name = name.unwrap();
    match build_demo(name) {
        Some(file) => {
            let json = serde_json::to_string_pretty(&file).unwrap();
            let path = out
                .map(|p| p.to_path_buf())
                .unwrap_or_else(|| PathBuf::from(format!("{name}.json")));
            if let Err(e) = std::fs::write(&path, json) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        None => {
            eprintln!("unknown demo {name:?}; try --list");
            ExitCode::from(2)
        }
    }
}
