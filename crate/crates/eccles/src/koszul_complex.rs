//! The twisted complex on the truncated algebra: blocks indexed by
//! topological degree q = r m - c, differential delta + partial where delta
//! is the slice differential and partial(xi) = xi o omega raises the order.
//! Both summands raise q by exactly one, so the complex is a single graded
//! object with one matrix per window degree. Square-zero is verified over the
//! coefficient ring before a complex is returned.
//!
//! Truncation semantics: orders above R are quotiented away, so targets of
//! partial that escape the truncation are dropped; the result is genuinely a
//! complex at every R. Homology rows carry a stability flag comparing the
//! runs at R and R-1 on the same window.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barratt_eccles::{BESimplex, BasisStore, BeError, FiltrationIndex};
use crate::chains::{rank, torsion_coefficients, ChainsError, IntMatrix, Ring};
use crate::mc_solver::{embedded_series, McError, OmegaCertificate};
use crate::power_series::{
    internal_differential, prelie_compose, CoinvariantClass, DegreeRule, SeriesError,
    TruncatedSeries,
};
use crate::{DEFINITION_VERSION, SOFTWARE_VERSION};

#[derive(Debug, Error)]
pub enum KoszulError {
    #[error("invalid spec: {0}")]
    BadSpec(String),
    #[error("certificate incompatible with spec: {0}")]
    CertificateMismatch(String),
    #[error("differential square is nonzero from degree q={q}")]
    SquareZeroFailed { q: i64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Basis(#[from] BeError),
    #[error(transparent)]
    Chains(#[from] ChainsError),
    #[error(transparent)]
    Mc(#[from] Box<McError>),
}

impl From<McError> for KoszulError {
    fn from(e: McError) -> Self {
        KoszulError::Mc(Box::new(e))
    }
}

/// Parameters of a windowed twisted complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistedComplexSpec {
    pub n: FiltrationIndex,
    pub m: u32,
    #[serde(rename = "R")]
    pub trunc: usize,
    pub ring: Ring,
    pub q_lo: i64,
    pub q_hi: i64,
}

impl TwistedComplexSpec {
    pub fn validate(&self) -> Result<(), KoszulError> {
        if self.m < 1 {
            return Err(KoszulError::BadSpec("m must be at least 1".into()));
        }
        if let FiltrationIndex::Finite(n) = self.n {
            if n < self.m {
                return Err(KoszulError::BadSpec(format!(
                    "filtration {n} below the codegree {}",
                    self.m
                )));
            }
        }
        if self.trunc < 2 {
            return Err(KoszulError::BadSpec("truncation must be at least 2".into()));
        }
        if self.q_lo > self.q_hi {
            return Err(KoszulError::BadSpec(format!(
                "empty window [{}, {}]",
                self.q_lo, self.q_hi
            )));
        }
        self.ring.validate()?;
        Ok(())
    }

    pub fn rule(&self) -> DegreeRule {
        DegreeRule::new(self.n, self.m)
    }
}

/// One (order, chain degree) block inside a window degree.
#[derive(Clone)]
pub struct DegreeBlock {
    pub order: usize,
    pub chain_degree: usize,
    pub offset: usize,
    pub reps: Arc<Vec<BESimplex>>,
}

impl DegreeBlock {
    pub fn size(&self) -> usize {
        self.reps.len()
    }
}

/// Which differential twists the complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistKind {
    /// delta only.
    Untwisted,
    /// delta + (. o omega).
    Derivation,
    /// delta + the graded commutator with omega.
    Adjoint,
}

/// The assembled complex: per window degree q, the concatenated block basis
/// (orders ascending) and the matrix M_q of the differential C_q -> C_{q+1}.
pub struct GradedBlockComplex {
    pub rule: DegreeRule,
    pub trunc: usize,
    pub ring: Ring,
    pub q_lo: i64,
    pub q_hi: i64,
    pub twist: TwistKind,
    blocks: BTreeMap<i64, Vec<DegreeBlock>>,
    matrices: BTreeMap<i64, IntMatrix>,
}

impl GradedBlockComplex {
    pub fn blocks(&self, q: i64) -> &[DegreeBlock] {
        self.blocks.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dim(&self, q: i64) -> usize {
        self.blocks(q).iter().map(DegreeBlock::size).sum()
    }

    /// The matrix C_q -> C_{q+1}; defined for q_lo <= q < q_hi.
    pub fn matrix(&self, q: i64) -> Option<&IntMatrix> {
        self.matrices.get(&q)
    }

    /// Transpose every matrix and negate the grading; an involution.
    pub fn dualize(&self) -> GradedBlockComplex {
        let mut blocks = BTreeMap::new();
        for (&q, blk) in &self.blocks {
            blocks.insert(-q, blk.clone());
        }
        let mut matrices = BTreeMap::new();
        for (&q, mat) in &self.matrices {
            // M'_p = transpose(M_{-p-1}): C'_p = C_{-p} -> C'_{p+1} = C_{-p-1}
            matrices.insert(-q - 1, mat.transpose());
        }
        GradedBlockComplex {
            rule: self.rule,
            trunc: self.trunc,
            ring: self.ring,
            q_lo: -self.q_hi,
            q_hi: -self.q_lo,
            twist: self.twist,
            blocks,
            matrices,
        }
    }

    /// The same window at a lower truncation order: rows and columns of
    /// every block of order above the cut are removed (the further quotient).
    pub fn restrict_truncation(&self, trunc: usize) -> GradedBlockComplex {
        assert!(trunc <= self.trunc);
        let mut blocks: BTreeMap<i64, Vec<DegreeBlock>> = BTreeMap::new();
        // per degree: kept global index -> new index, or None
        let mut keep: BTreeMap<i64, Vec<Option<u32>>> = BTreeMap::new();
        for (&q, blk) in &self.blocks {
            let total: usize = blk.iter().map(DegreeBlock::size).sum();
            let mut mask = vec![None; total];
            let mut kept = Vec::new();
            let mut offset = 0usize;
            let mut next = 0u32;
            for b in blk {
                if b.order <= trunc {
                    for i in 0..b.size() {
                        mask[b.offset + i] = Some(next + i as u32);
                    }
                    kept.push(DegreeBlock {
                        order: b.order,
                        chain_degree: b.chain_degree,
                        offset,
                        reps: b.reps.clone(),
                    });
                    offset += b.size();
                    next += b.size() as u32;
                }
            }
            keep.insert(q, mask);
            blocks.insert(q, kept);
        }
        let mut matrices = BTreeMap::new();
        for (&q, mat) in &self.matrices {
            let col_mask = &keep[&q];
            let row_mask = &keep[&(q + 1)];
            let rows = row_mask.iter().flatten().count();
            let cols = col_mask.iter().flatten().count();
            let mut entries = Vec::new();
            for (old_j, new_j) in col_mask.iter().enumerate() {
                let Some(new_j) = new_j else { continue };
                for (old_i, v) in mat.column(old_j) {
                    if let Some(new_i) = row_mask[*old_i as usize] {
                        entries.push((new_i, *new_j, v.clone()));
                    }
                }
            }
            matrices.insert(q, IntMatrix::from_entries(rows, cols, entries));
        }
        GradedBlockComplex {
            rule: self.rule,
            trunc,
            ring: self.ring,
            q_lo: self.q_lo,
            q_hi: self.q_hi,
            twist: self.twist,
            blocks,
            matrices,
        }
    }
}

/// Check a certificate against a spec and produce the (embedded, truncated,
/// ring-normalized) twisting series.
pub fn certificate_series(
    spec: &TwistedComplexSpec,
    cert: &OmegaCertificate,
) -> Result<TruncatedSeries, KoszulError> {
    if cert.m != spec.m {
        return Err(KoszulError::CertificateMismatch(format!(
            "codegree {} vs {}",
            cert.m, spec.m
        )));
    }
    if cert.ring != spec.ring {
        return Err(KoszulError::CertificateMismatch(format!(
            "ring {} vs {}",
            cert.ring, spec.ring
        )));
    }
    if cert.trunc < spec.trunc {
        return Err(KoszulError::CertificateMismatch(format!(
            "certificate truncation {} below requested {}",
            cert.trunc, spec.trunc
        )));
    }
    let series = embedded_series(cert, spec.n)?;
    Ok(series.truncated(spec.trunc).normalized(&spec.ring))
}

/// Assemble the windowed complex and verify square-zero over the ring.
/// `omega = None` builds the untwisted complex.
pub fn build(
    spec: &TwistedComplexSpec,
    omega: Option<&TruncatedSeries>,
    twist: TwistKind,
    store: &BasisStore,
) -> Result<GradedBlockComplex, KoszulError> {
    spec.validate()?;
    if matches!(twist, TwistKind::Untwisted) != omega.is_none() {
        return Err(KoszulError::BadSpec(
            "a twisting series is required exactly when the twist uses one".into(),
        ));
    }
    if let Some(w) = omega {
        if w.rule() != spec.rule() || w.truncation() != spec.trunc {
            return Err(KoszulError::CertificateMismatch(
                "twisting series parameters differ from the spec".into(),
            ));
        }
    }
    let rule = spec.rule();
    let mut blocks: BTreeMap<i64, Vec<DegreeBlock>> = BTreeMap::new();
    for q in spec.q_lo..=spec.q_hi {
        let mut row = Vec::new();
        let mut offset = 0usize;
        for r in 1..=spec.trunc {
            let c = r as i64 * spec.m as i64 - q;
            let Ok(c) = usize::try_from(c) else { continue };
            let reps = store.representatives(spec.n, r, c)?;
            if reps.is_empty() {
                continue;
            }
            row.push(DegreeBlock {
                order: r,
                chain_degree: c,
                offset,
                reps: reps.clone(),
            });
            offset += reps.len();
        }
        blocks.insert(q, row);
    }
    let mut matrices = BTreeMap::new();
    for q in spec.q_lo..spec.q_hi {
        let mat = assemble_matrix(spec, &blocks[&q], &blocks[&(q + 1)], omega, twist)?;
        matrices.insert(q, mat);
    }
    let complex = GradedBlockComplex {
        rule,
        trunc: spec.trunc,
        ring: spec.ring,
        q_lo: spec.q_lo,
        q_hi: spec.q_hi,
        twist,
        blocks,
        matrices,
    };
    // the single most important correctness gate for the sign conventions
    for q in spec.q_lo..spec.q_hi.saturating_sub(1) {
        let first = &complex.matrices[&q];
        let second = &complex.matrices[&(q + 1)];
        let square = second.mul(first).reduced_by(&spec.ring);
        if !square.is_zero() {
            return Err(KoszulError::SquareZeroFailed { q });
        }
    }
    Ok(complex)
}

trait RingReduce {
    fn reduced_by(self, ring: &Ring) -> Self;
}

impl RingReduce for IntMatrix {
    fn reduced_by(self, ring: &Ring) -> IntMatrix {
        match ring {
            Ring::Integers => self,
            Ring::ModP(p) => self.reduce_mod(*p),
        }
    }
}

fn assemble_matrix(
    spec: &TwistedComplexSpec,
    domain: &[DegreeBlock],
    codomain: &[DegreeBlock],
    omega: Option<&TruncatedSeries>,
    twist: TwistKind,
) -> Result<IntMatrix, KoszulError> {
    let rows: usize = codomain.iter().map(DegreeBlock::size).sum();
    let cols: usize = domain.iter().map(DegreeBlock::size).sum();
    let target: BTreeMap<usize, &DegreeBlock> =
        codomain.iter().map(|b| (b.order, b)).collect();
    let mut entries: Vec<(u32, u32, BigInt)> = Vec::new();
    let push_class = |class: &CoinvariantClass,
                          col: usize,
                          entries: &mut Vec<(u32, u32, BigInt)>|
     -> Result<(), KoszulError> {
        if class.is_zero() {
            return Ok(());
        }
        let Some(block) = target.get(&class.order()) else {
            // order escaped the window row: impossible since both summands
            // raise q by one and stay within the truncation
            return Err(KoszulError::BadSpec(format!(
                "image hit an absent order-{} block",
                class.order()
            )));
        };
        debug_assert_eq!(block.chain_degree, class.chain_degree());
        for (row, coeff) in class.expand(&block.reps)? {
            let norm = spec.ring.normalize(&coeff);
            if !norm.is_zero() {
                entries.push((block.offset as u32 + row, col as u32, norm));
            }
        }
        Ok(())
    };
    for dblock in domain {
        for (j, rep) in dblock.reps.iter().enumerate() {
            let col = dblock.offset + j;
            let single = CoinvariantClass::singleton(rep.clone())?;
            let delta = internal_differential(&single, spec.m);
            push_class(&delta, col, &mut entries)?;
            if let Some(w) = omega {
                let xi = singleton_series(spec, dblock, rep)?;
                let image = twisted_image(&xi, w, twist)?;
                for r in 1..=spec.trunc {
                    // the order-preserving part of the twist is zero
                    // (omega(1) = 0), so no double count against delta
                    let part = image.order(r);
                    if r != dblock.order {
                        push_class(part, col, &mut entries)?;
                    } else if !part.is_zero() {
                        return Err(KoszulError::CertificateMismatch(
                            "twisting series has a nonzero order-1 component".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(IntMatrix::from_entries(rows, cols, entries))
}

fn singleton_series(
    spec: &TwistedComplexSpec,
    block: &DegreeBlock,
    rep: &BESimplex,
) -> Result<TruncatedSeries, KoszulError> {
    let rule = spec.rule();
    let degree = rule.total_degree(block.order, block.chain_degree);
    let mut xi = TruncatedSeries::zero(rule, spec.trunc, degree);
    xi.set_order(block.order, CoinvariantClass::singleton(rep.clone())?)?;
    Ok(xi)
}

fn twisted_image(
    xi: &TruncatedSeries,
    omega: &TruncatedSeries,
    twist: TwistKind,
) -> Result<TruncatedSeries, KoszulError> {
    match twist {
        TwistKind::Untwisted => unreachable!("untwisted assembly skips the twist"),
        TwistKind::Derivation => Ok(prelie_compose(xi, omega)?),
        TwistKind::Adjoint => {
            // xi o omega - (-1)^{|xi| + m} omega o xi
            let mut out = prelie_compose(xi, omega)?;
            let mut other = prelie_compose(omega, xi)?;
            let m = xi.rule().m as i64;
            if (xi.total_degree() + m) % 2 == 0 {
                other = other.negated();
            }
            out.add_assign(&other)?;
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Homology report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BlockInfo {
    pub order: usize,
    pub chain_degree: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ReportRow {
    /// Topological degree q = r m - c.
    pub q: i64,
    /// Total degree of the primal classes contributing to this row (= -q).
    pub total_degree: i64,
    pub blocks: Vec<BlockInfo>,
    pub rank: usize,
    /// Invariant factors > 1 of the q -> q+1 matrix (empty over a field).
    pub torsion: Vec<String>,
    /// True when the R-1 run reports the same rank and torsion.
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwistedHomologyReport {
    pub n: FiltrationIndex,
    pub m: u32,
    #[serde(rename = "R")]
    pub trunc: usize,
    pub ring: Ring,
    pub seed: Option<u64>,
    pub untwisted: bool,
    pub q_lo: i64,
    pub q_hi: i64,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    pub definition_version: u32,
    pub software_version: String,
}

/// Rank and torsion of the dual homology at every computable window degree.
///
/// Row q uses the matrices M_{q-1} and M_q: rank = dim_q - rank M_{q-1} -
/// rank M_q, torsion = invariant factors of M_q. These are the dual-side
/// values: dualizing transposes matrices, which changes no rank and moves
/// torsion by the usual degree shift; reports state the dual convention.
pub fn homology_report(
    spec: &TwistedComplexSpec,
    cert: Option<&OmegaCertificate>,
    store: &BasisStore,
) -> Result<TwistedHomologyReport, KoszulError> {
    spec.validate()?;
    let omega = cert.map(|c| certificate_series(spec, c)).transpose()?;
    let twist = if omega.is_some() {
        TwistKind::Derivation
    } else {
        TwistKind::Untwisted
    };
    let complex = build(spec, omega.as_ref(), twist, store)?;
    let rows_full = window_rows(&complex, &spec.ring);
    // stability: the same window one truncation lower
    let stable_rows: Option<BTreeMap<i64, (usize, Vec<String>)>> = if spec.trunc >= 3 {
        let lower = complex.restrict_truncation(spec.trunc - 1);
        Some(
            window_rows(&lower, &spec.ring)
                .into_iter()
                .map(|r| (r.q, (r.rank, r.torsion)))
                .collect(),
        )
    } else {
        None
    };
    let mut rows = Vec::new();
    for mut row in rows_full {
        row.stable = stable_rows
            .as_ref()
            .and_then(|m| m.get(&row.q))
            .map(|(rank, torsion)| *rank == row.rank && *torsion == row.torsion)
            .unwrap_or(false);
        rows.push(row);
    }
    let mut notes = Vec::new();
    if rows.is_empty() {
        notes.push("window too narrow: no degree has both adjacent matrices".into());
    }
    if spec.q_lo + 1 <= spec.q_hi - 1 {
        notes.push(format!(
            "rows cover q in [{}, {}]; the window edges lack one-sided matrices",
            spec.q_lo + 1,
            spec.q_hi - 1
        ));
    }
    notes.push("rank and torsion are those of the dual (cohomological) classes at q".into());
    Ok(TwistedHomologyReport {
        n: spec.n,
        m: spec.m,
        trunc: spec.trunc,
        ring: spec.ring,
        seed: cert.map(|c| c.seed),
        untwisted: cert.is_none(),
        q_lo: spec.q_lo,
        q_hi: spec.q_hi,
        rows,
        notes,
        definition_version: DEFINITION_VERSION,
        software_version: SOFTWARE_VERSION.to_string(),
    })
}

fn window_rows(complex: &GradedBlockComplex, ring: &Ring) -> Vec<ReportRow> {
    let mut rank_cache: BTreeMap<i64, usize> = BTreeMap::new();
    let mut rows = Vec::new();
    for q in (complex.q_lo + 1)..complex.q_hi {
        let m_in = complex.matrix(q - 1).expect("interior degree");
        let m_out = complex.matrix(q).expect("interior degree");
        let rank_in = *rank_cache
            .entry(q - 1)
            .or_insert_with(|| rank(m_in, ring));
        let rank_out = *rank_cache.entry(q).or_insert_with(|| rank(m_out, ring));
        let dim = complex.dim(q);
        let torsion = match ring {
            Ring::Integers => torsion_coefficients(m_out)
                .into_iter()
                .map(|t| t.to_string())
                .collect(),
            Ring::ModP(_) => Vec::new(),
        };
        rows.push(ReportRow {
            q,
            total_degree: -q,
            blocks: complex
                .blocks(q)
                .iter()
                .map(|b| BlockInfo {
                    order: b.order,
                    chain_degree: b.chain_degree,
                    dim: b.size(),
                })
                .collect(),
            rank: dim - rank_in - rank_out,
            torsion,
            stable: false,
        });
    }
    rows
}
