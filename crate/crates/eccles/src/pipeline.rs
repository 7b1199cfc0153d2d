//! File-level runs behind the command-line tool: solve a twisting element
//! and save its certificate, compute homology reports as JSON or CSV,
//! verify certificates, audit the implementation against the reference
//! oracle, and inspect basis sizes. Every output is deterministic for a
//! fixed (configuration, seed, software version): rerunning a command
//! reproduces the bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barratt_eccles::{
    differential, BEChain, BasisStore, BeError, FiltrationIndex,
};
use crate::chains::{homology, ChainComplexSlice, ChainsError, IntMatrix, Ring};
use crate::koszul_complex::{
    homology_report, KoszulError, TwistedComplexSpec, TwistedHomologyReport,
};
use crate::mc_solver::{solve_omega, verify_mc, McError, McReport, OmegaCertificate, SolveRequest};
use crate::oracle::{run_audits, OracleReport};

/// Environment variable naming the on-disk basis cache directory.
pub const CACHE_ENV: &str = "ECCLES_CACHE";

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad arguments; the command line maps this to exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mc(Box<McError>),
    #[error(transparent)]
    Koszul(Box<KoszulError>),
    #[error(transparent)]
    Chains(#[from] ChainsError),
    #[error(transparent)]
    Basis(#[from] BeError),
}

impl From<McError> for PipelineError {
    fn from(e: McError) -> Self {
        PipelineError::Mc(Box::new(e))
    }
}

impl From<KoszulError> for PipelineError {
    fn from(e: KoszulError) -> Self {
        PipelineError::Koszul(Box::new(e))
    }
}

impl PipelineError {
    /// True for errors in how the run was requested rather than in the
    /// mathematics or the environment.
    pub fn is_usage(&self) -> bool {
        matches!(self, PipelineError::Usage(_))
    }
}

/// A store backed by the directory named in `ECCLES_CACHE`, or in-memory
/// when the variable is unset or empty.
pub fn store_from_env() -> BasisStore {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => BasisStore::new(Some(PathBuf::from(dir))),
        _ => BasisStore::in_memory(),
    }
}

fn check_common(m: u32, trunc: usize, ring: &Ring) -> Result<(), PipelineError> {
    if m == 0 {
        return Err(PipelineError::Usage(
            "the codegree m must be at least 1: the generator of the order-2 slice lives in \
             chain degree m - 1, and m = 0 would place it in degree -1, which is empty"
                .into(),
        ));
    }
    if trunc < 2 {
        return Err(PipelineError::Usage(format!(
            "the truncation order R must be at least 2, got {trunc}: order 1 carries no \
             twisting term"
        )));
    }
    if ring.validate().is_err() {
        return Err(PipelineError::Usage(format!(
            "coefficients must be Z or F_p for a prime p below 2^31, got {ring}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Solving
// ---------------------------------------------------------------------------

/// Solve the twisting element through order `trunc` and return its
/// certificate.
pub fn solve_certificate(
    m: u32,
    trunc: usize,
    ring: Ring,
    seed: u64,
    store: &BasisStore,
) -> Result<OmegaCertificate, PipelineError> {
    check_common(m, trunc, &ring)?;
    Ok(solve_omega(
        &SolveRequest {
            m,
            trunc,
            ring,
            seed,
        },
        store,
    )?)
}

/// Independently re-check a certificate: residuals of the defining equation
/// through the truncation order, chain degrees, vanishing order-1 part, and
/// the order-2 generator.
pub fn verify_certificate(
    cert: &OmegaCertificate,
    store: &BasisStore,
) -> Result<McReport, PipelineError> {
    Ok(verify_mc(cert, store)?)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// What to compute a homology report for. With `untwisted` the differential
/// is the internal one alone and no certificate is involved; otherwise a
/// certificate is loaded or solved on the fly with `seed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRequest {
    pub n: FiltrationIndex,
    pub m: u32,
    #[serde(rename = "R")]
    pub trunc: usize,
    pub ring: Ring,
    pub q_lo: i64,
    pub q_hi: i64,
    pub untwisted: bool,
    pub seed: u64,
}

pub fn run_report(
    req: &ReportRequest,
    certificate: Option<&OmegaCertificate>,
    store: &BasisStore,
) -> Result<TwistedHomologyReport, PipelineError> {
    check_common(req.m, req.trunc, &req.ring)?;
    if req.q_lo > req.q_hi {
        return Err(PipelineError::Usage(format!(
            "empty degree window: q_lo = {} exceeds q_hi = {}",
            req.q_lo, req.q_hi
        )));
    }
    if let FiltrationIndex::Finite(n) = req.n {
        if n < req.m {
            return Err(PipelineError::Usage(format!(
                "the filtration stage ({n}) must be at least the codegree m ({}): the \
                 twisting element is supported on stage m",
                req.m
            )));
        }
    }
    let spec = TwistedComplexSpec {
        n: req.n,
        m: req.m,
        trunc: req.trunc,
        ring: req.ring,
        q_lo: req.q_lo,
        q_hi: req.q_hi,
    };
    if req.untwisted {
        if certificate.is_some() {
            return Err(PipelineError::Usage(
                "an untwisted report does not take a certificate".into(),
            ));
        }
        return Ok(homology_report(&spec, None, store)?);
    }
    let solved;
    let cert = match certificate {
        Some(c) => c,
        None => {
            solved = solve_omega(
                &SolveRequest {
                    m: req.m,
                    trunc: req.trunc,
                    ring: req.ring,
                    seed: req.seed,
                },
                store,
            )?;
            &solved
        }
    };
    Ok(homology_report(&spec, Some(cert), store)?)
}

/// The report as CSV with the fixed column set. Torsion invariant factors
/// are `;`-separated inside their cell.
pub fn report_csv(report: &TwistedHomologyReport) -> String {
    let mut out = String::from("q,total_degree,rank,torsion,stable\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.q,
            row.total_degree,
            row.rank,
            row.torsion.join(";"),
            row.stable
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Pretty JSON plus a trailing newline; identical input produces identical
/// bytes.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_text(text: &str, path: &Path) -> Result<(), PipelineError> {
    fs::write(path, text)?;
    Ok(())
}

pub fn read_certificate(path: &Path) -> Result<OmegaCertificate, PipelineError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_report(path: &Path) -> Result<TwistedHomologyReport, PipelineError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisCount {
    pub order: usize,
    pub chain_degree: usize,
    pub representatives: usize,
    pub full_dimension: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisInspection {
    pub n: FiltrationIndex,
    pub rows: Vec<BasisCount>,
}

/// Representative and full-slice dimensions for every order and chain
/// degree in range.
pub fn inspect_basis(
    n: FiltrationIndex,
    max_order: usize,
    max_degree: usize,
    store: &BasisStore,
) -> Result<BasisInspection, PipelineError> {
    if max_order == 0 {
        return Err(PipelineError::Usage("the order range is empty".into()));
    }
    let mut rows = Vec::new();
    for r in 1..=max_order {
        let factorial: usize = (1..=r).product();
        for k in 0..=max_degree {
            let reps = store.representatives(n, r, k)?;
            rows.push(BasisCount {
                order: r,
                chain_degree: k,
                representatives: reps.len(),
                full_dimension: reps.len() * factorial,
            });
        }
    }
    Ok(BasisInspection { n, rows })
}

// ---------------------------------------------------------------------------
// Full-slice homology through the main code path
// ---------------------------------------------------------------------------

/// One homology row of a full operad slice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceHomologyRow {
    pub chain_degree: usize,
    pub rank: usize,
    pub torsion: Vec<String>,
}

/// Homology of the full (all translates, untwisted) arity-`r` slice of the
/// stage-`n` operad, computed with the main enumeration, differential, and
/// linear algebra. The oracle recomputes this table independently; the two
/// must agree.
pub fn operad_slice_homology(
    n: FiltrationIndex,
    r: usize,
    ring: &Ring,
    store: &BasisStore,
) -> Result<Vec<SliceHomologyRow>, PipelineError> {
    let FiltrationIndex::Finite(stage) = n else {
        return Err(PipelineError::Usage(
            "slice homology needs a finite stage: the whole operad has unbounded dimension"
                .into(),
        ));
    };
    if stage == 0 || r == 0 {
        return Err(PipelineError::Usage(
            "slice homology needs a stage and order of at least 1".into(),
        ));
    }
    if ring.validate().is_err() {
        return Err(PipelineError::Usage(format!(
            "coefficients must be Z or F_p for a prime p below 2^31, got {ring}"
        )));
    }
    // full bases per dimension until the first empty one; the complexity
    // bound caps the dimension, so this terminates
    let mut bases = Vec::new();
    loop {
        let b = store.basis(n, r, bases.len())?;
        if b.is_empty() {
            break;
        }
        bases.push(b);
    }
    let top = bases.len() as i64 - 1;
    let mut labels: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for (k, b) in bases.iter().enumerate() {
        labels.insert(k as i64, b.iter().map(|s| s.encode()).collect());
    }
    let mut boundaries: BTreeMap<i64, IntMatrix> = BTreeMap::new();
    for k in 1..bases.len() {
        let source = &bases[k];
        let target = &bases[k - 1];
        let mut entries = Vec::new();
        for (j, s) in source.iter().enumerate() {
            let image = differential(&BEChain::from_simplex(s.clone()));
            for (t, c) in image.terms() {
                let i = target
                    .binary_search(t)
                    .expect("face of a slice element is a slice element");
                entries.push((i as u32, j as u32, c.clone()));
            }
        }
        boundaries.insert(
            k as i64,
            IntMatrix::from_entries(target.len(), source.len(), entries),
        );
    }
    let slice = ChainComplexSlice::new(0, top.max(0), labels, boundaries)?;
    let mut rows = Vec::new();
    for k in 0..bases.len() {
        let (rank, torsion) = homology(&slice, k as i64, ring)?;
        rows.push(SliceHomologyRow {
            chain_degree: k,
            rank,
            torsion: torsion.iter().map(BigInt::to_string).collect(),
        });
    }
    Ok(rows)
}

/// Run the full oracle audit battery.
pub fn run_oracle_audits(store: &BasisStore) -> OracleReport {
    run_audits(store)
}
