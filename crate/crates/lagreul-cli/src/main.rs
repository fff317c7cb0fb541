//! Command-line harness: runs solver experiments and the operator, kernel,
//! flow-map, and commutator audits; persists reports as JSON lines and CSV.
//!
//! Exit codes: 0 all pass, 2 audit failure, 3 solver non-convergence,
//! 4 manifest error, 1 other errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lagreul::audit::{self, BoundAudit};
use lagreul::error::Error;
use lagreul::harness::{self, Experiment, HarnessReport};
use lagreul::manifest::Manifest;

#[derive(Parser)]
#[command(name = "lagreul", version, about = "Lagrangian-Eulerian solver kit and audit harness")]
struct Cli {
    /// Manifest file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for the common block.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Picard solve with field dumps and an iteration trace.
    Solve,
    /// Heat-kernel mass, scaling exponents, and two-time kernel audits.
    VerifyKernels,
    /// Operator identities and the heat/Duhamel/gradient bounds.
    VerifyOperators,
    /// Flow-map composition bound audits.
    VerifyFlowmap,
    /// Commutator dual forms, commutator bounds, variation identities.
    VerifyCommutators,
    /// Ball invariance and contraction probes.
    Contraction,
    /// Lipschitz dependence of solutions on data.
    Lipschitz,
    /// The Holder-continuity counterexample demonstration.
    Counterexample,
    /// Transport invariant of the magnetic model.
    MhdInvariant,
    /// Aggregates audit JSONL files in a directory into a CSV summary.
    Report {
        /// Directory of .jsonl audit files.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_manifest(cli: &Cli) -> Result<Manifest, Error> {
    let mut manifest = match &cli.manifest {
        Some(path) => Manifest::from_file(path)?,
        None => Manifest::default(),
    };
    if let Some(seed) = cli.seed {
        manifest.common.seed = seed;
    }
    if let Some(out) = &cli.out {
        manifest.common.out_dir = Some(out.display().to_string());
    }
    Ok(manifest)
}

fn write_report(report: &HarnessReport, out_dir: Option<&Path>, name: &str) -> Result<(), Error> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join(format!("{name}.jsonl")))?;
        audit::write_jsonl(std::io::BufWriter::new(file), &report.audits)?;
    }
    Ok(())
}

fn print_summary(report: &HarnessReport) {
    for a in &report.audits {
        let sweep = if a.sweep.is_empty() {
            String::new()
        } else {
            let parts: Vec<String> = a
                .sweep
                .iter()
                .map(|(k, v)| format!("{k}={v:.4}"))
                .collect();
            format!(" [{}]", parts.join(", "))
        };
        println!(
            "{:<44} measured {:>12.5e}  bound {:>12.5e}  {:?}{}",
            a.id, a.measured, a.bound, a.verdict, sweep
        );
    }
    let passed = report.audits.iter().filter(|a| a.passed()).count();
    println!("{passed}/{} audits passed", report.audits.len());
}

fn run_report(dir: &Path) -> Result<HarnessReport, Error> {
    let mut audits: Vec<BoundAudit> = Vec::new();
    if dir.exists() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "jsonl").unwrap_or(false))
            .collect();
        entries.sort();
        for path in entries {
            let file = std::fs::File::open(&path)?;
            audits.extend(audit::read_jsonl(std::io::BufReader::new(file))?);
        }
    }
    let csv_path = dir.join("summary.csv");
    let mut buf = Vec::new();
    audit::write_csv(&mut buf, &audits)?;
    if dir.exists() {
        std::fs::write(&csv_path, &buf)?;
        println!("wrote {}", csv_path.display());
    } else {
        println!("directory {} does not exist; empty summary", dir.display());
    }
    Ok(HarnessReport {
        audits,
        scalars: Vec::new(),
    })
}

fn run(cli: &Cli) -> Result<HarnessReport, Error> {
    let manifest = load_manifest(cli)?;
    let common = manifest.common.clone();
    let out_dir = common.out_dir.as_ref().map(PathBuf::from);
    let out = out_dir.as_deref();

    let (report, name) = match &cli.command {
        Command::Solve => {
            let artifacts = harness::run_solve(&common, &manifest.solve, out)?;
            println!("converged in {} iterations", artifacts.iterations);
            (artifacts.report, "solve")
        }
        Command::VerifyKernels => (
            harness::run_experiment(Experiment::Kernels, &common, &manifest, &common)?,
            "verify_kernels",
        ),
        Command::VerifyOperators => (
            harness::run_experiment(Experiment::Operators, &common, &manifest, &common)?,
            "verify_operators",
        ),
        Command::VerifyFlowmap => (
            harness::run_experiment(Experiment::Flowmap, &common, &manifest, &common)?,
            "verify_flowmap",
        ),
        Command::VerifyCommutators => (
            harness::run_experiment(Experiment::Commutators, &common, &manifest, &common)?,
            "verify_commutators",
        ),
        Command::Contraction => (
            harness::run_experiment(Experiment::Contraction, &common, &manifest, &common)?,
            "contraction",
        ),
        Command::Lipschitz => (
            harness::run_experiment(Experiment::Lipschitz, &common, &manifest, &common)?,
            "lipschitz",
        ),
        Command::Counterexample => (
            harness::run_experiment(Experiment::Counterexample, &common, &manifest, &common)?,
            "counterexample",
        ),
        Command::MhdInvariant => (
            harness::run_experiment(Experiment::Mhd, &common, &manifest, &common)?,
            "mhd_invariant",
        ),
        Command::Report { dir } => {
            let report = run_report(dir)?;
            println!("{} audits aggregated", report.audits.len());
            return Ok(report);
        }
    };
    write_report(&report, out, name)?;
    print_summary(&report);
    Ok(report)
}

fn main() -> ExitCode {
    lagreul::par::init_threads_from_env();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if report.all_passed() {
                ExitCode::from(0)
            } else {
                eprintln!("audit failures detected");
                ExitCode::from(2)
            }
        }
        Err(Error::Manifest(msg)) => {
            eprintln!("manifest error: {msg}");
            ExitCode::from(4)
        }
        Err(Error::NonConvergence {
            iters,
            last_distance,
            ..
        }) => {
            eprintln!("solver did not converge in {iters} iterations (last distance {last_distance:.3e})");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
