//! Command-line front end: solve twisting elements, compute homology
//! reports, verify certificates, audit against the reference oracle, and
//! inspect basis sizes.
//!
//! Exit codes: 0 success, 1 mathematical or verification failure, 2 bad
//! usage. The basis cache directory is taken from the `ECCLES_CACHE`
//! environment variable; unset means in-memory only. All file outputs are
//! byte-identical across reruns with the same arguments, seed, and version.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eccles::barratt_eccles::FiltrationIndex;
use eccles::chains::Ring;
use eccles::pipeline::{
    self, run_report, report_csv, solve_certificate, verify_certificate, PipelineError,
    ReportRequest,
};

#[derive(Parser)]
#[command(
    name = "eccles",
    version,
    about = "Twisted chain complexes on filtered permutation operads",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the twisting element through a truncation order and save its
    /// certificate as JSON.
    Solve {
        /// Codegree m of the generator (the twist lives on stage m).
        #[arg(long)]
        codegree: u32,
        /// Truncation order R (orders 2..=R are solved).
        #[arg(long)]
        truncation: usize,
        /// Coefficients: "Z" or "F<p>" with p prime, e.g. F2, F5.
        #[arg(long, default_value = "Z", value_parser = parse_ring)]
        ring: Ring,
        /// Seed selecting the kernel-coset representative at each order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Certificate output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank and torsion of the dual twisted complex per window degree,
    /// printed as a table and optionally saved as JSON and/or CSV.
    Report {
        /// Filtration stage n: a number, or "inf" for the whole operad.
        #[arg(long, value_parser = parse_stage)]
        stage: FiltrationIndex,
        /// Codegree m of the generator.
        #[arg(long)]
        codegree: u32,
        /// Truncation order R.
        #[arg(long)]
        truncation: usize,
        /// Coefficients: "Z" or "F<p>" with p prime.
        #[arg(long, default_value = "Z", value_parser = parse_ring)]
        ring: Ring,
        /// Lower end of the topological-degree window.
        #[arg(long, allow_negative_numbers = true)]
        q_lo: i64,
        /// Upper end of the topological-degree window.
        #[arg(long, allow_negative_numbers = true)]
        q_hi: i64,
        /// Drop the twist and report the internal differential alone.
        #[arg(long, default_value_t = false)]
        untwisted: bool,
        /// Use this saved certificate instead of solving on the fly.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Seed for the on-the-fly solve (ignored with --certificate).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the row table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-check a saved certificate: defining-equation residuals, chain
    /// degrees, vanishing order-1 part, and the order-2 generator.
    Verify {
        /// Certificate to verify.
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Run the reference-oracle audit battery against the main
    /// implementation.
    Audit,
    /// Representative and full dimensions of the basis slices in range.
    InspectBasis {
        /// Filtration stage n: a number, or "inf" for the whole operad.
        #[arg(long, value_parser = parse_stage)]
        stage: FiltrationIndex,
        /// Largest order (arity) to list.
        #[arg(long, default_value_t = 4)]
        max_order: usize,
        /// Largest chain degree to list.
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
        /// Write the table as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_ring(s: &str) -> Result<Ring, String> {
    if s == "Z" || s == "z" {
        return Ok(Ring::Integers);
    }
    if let Some(rest) = s.strip_prefix('F').or_else(|| s.strip_prefix('f')) {
        let p: u64 = rest
            .parse()
            .map_err(|_| format!("expected F<p> with a numeric p, got {s:?}"))?;
        let ring = Ring::ModP(p);
        ring.validate()
            .map_err(|_| format!("{p} is not a prime below 2^31"))?;
        return Ok(ring);
    }
    Err(format!("expected \"Z\" or \"F<p>\", got {s:?}"))
}

fn parse_stage(s: &str) -> Result<FiltrationIndex, String> {
    if s == "inf" {
        return Ok(FiltrationIndex::Infinite);
    }
    let n: u32 = s
        .parse()
        .map_err(|_| format!("expected a stage number or \"inf\", got {s:?}"))?;
    if n == 0 {
        return Err("stage 0 is empty; stages start at 1".into());
    }
    Ok(FiltrationIndex::Finite(n))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) if e.is_usage() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    let store = pipeline::store_from_env();
    match cli.cmd {
        Cmd::Solve {
            codegree,
            truncation,
            ring,
            seed,
            out,
        } => {
            let cert = solve_certificate(codegree, truncation, ring, seed, &store)?;
            pipeline::write_json(&cert, &out)?;
            let top_terms = cert
                .residual_checks
                .last()
                .map(|c| c.order)
                .unwrap_or(truncation);
            println!(
                "solved codegree {codegree} through order {top_terms} over {ring} (seed {seed}); \
                 certificate written to {}",
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Report {
            stage,
            codegree,
            truncation,
            ring,
            q_lo,
            q_hi,
            untwisted,
            certificate,
            seed,
            json,
            csv,
        } => {
            if untwisted && certificate.is_some() {
                return Err(PipelineError::Usage(
                    "--untwisted and --certificate are mutually exclusive".into(),
                ));
            }
            let loaded = certificate
                .as_deref()
                .map(pipeline::read_certificate)
                .transpose()?;
            let req = ReportRequest {
                n: stage,
                m: codegree,
                trunc: truncation,
                ring,
                q_lo,
                q_hi,
                untwisted,
                seed,
            };
            let report = run_report(&req, loaded.as_ref(), &store)?;
            let twist = if report.untwisted {
                "untwisted".to_string()
            } else {
                format!("twisted, seed {}", report.seed.unwrap_or(0))
            };
            println!(
                "stage {}, codegree {}, truncation {}, ring {}, {}",
                report.n, report.m, report.trunc, report.ring, twist
            );
            println!("{:>5} {:>7} {:>5}  {:<20} {}", "q", "total", "rank", "torsion", "stable");
            for row in &report.rows {
                println!(
                    "{:>5} {:>7} {:>5}  {:<20} {}",
                    row.q,
                    row.total_degree,
                    row.rank,
                    if row.torsion.is_empty() {
                        "-".to_string()
                    } else {
                        row.torsion.join(";")
                    },
                    row.stable
                );
            }
            for note in &report.notes {
                println!("note: {note}");
            }
            if let Some(path) = json {
                pipeline::write_json(&report, &path)?;
                println!("report written to {}", path.display());
            }
            if let Some(path) = csv {
                pipeline::write_text(&report_csv(&report), &path)?;
                println!("rows written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { certificate } => {
            let cert = pipeline::read_certificate(&certificate)?;
            let report = verify_certificate(&cert, &store)?;
            for check in &report.residual_checks {
                println!(
                    "order {:>2} residual: {}",
                    check.order,
                    if check.ok { "zero" } else { "NONZERO" }
                );
            }
            for check in &report.degree_checks {
                println!(
                    "order {:>2} chain degree {}: {}",
                    check.order,
                    check.expected_chain_degree,
                    if check.ok { "ok" } else { "WRONG" }
                );
            }
            println!(
                "order-1 part vanishes: {}",
                if report.order_one_vanishes { "ok" } else { "NO" }
            );
            println!(
                "order-2 generator: {}",
                if report.generator_ok { "ok" } else { "NO" }
            );
            if report.passed {
                println!("certificate verified");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("certificate REJECTED");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Audit => {
            let report = pipeline::run_oracle_audits(&store);
            for check in &report.checks {
                match (&check.ok, &check.witness) {
                    (true, _) => println!("{:<32} ok", check.name),
                    (false, Some(w)) => println!("{:<32} FAILED: {w}", check.name),
                    (false, None) => println!("{:<32} FAILED", check.name),
                }
            }
            if report.passed() {
                println!("all audits passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("audits FAILED");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::InspectBasis {
            stage,
            max_order,
            max_degree,
            json,
        } => {
            let insp = pipeline::inspect_basis(stage, max_order, max_degree, &store)?;
            println!("stage {}", insp.n);
            println!(
                "{:>5} {:>12} {:>15} {:>15}",
                "order", "chain degree", "representatives", "full dimension"
            );
            for row in &insp.rows {
                println!(
                    "{:>5} {:>12} {:>15} {:>15}",
                    row.order, row.chain_degree, row.representatives, row.full_dimension
                );
            }
            if let Some(path) = json {
                pipeline::write_json(&insp, &path)?;
                println!("table written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
