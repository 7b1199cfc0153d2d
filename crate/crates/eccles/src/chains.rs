//! Exact linear algebra over Z and F_p: sparse integer matrices, Smith normal
//! form, homology of chain complex slices, and canonical solutions of d.x = b.
//!
//! All integer arithmetic is arbitrary precision; intermediate entries in a
//! Smith reduction can far exceed machine words. Every operation is
//! deterministic for fixed input: pivot rules are fixed (smallest nonzero
//! magnitude, then lowest row, then lowest column) and all iteration orders
//! are over sorted structures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no solution: right-hand side is not in the image")]
    NoSolution,
    #[error("degree {0} outside slice interval [{1}, {2}]")]
    DegreeOutsideSlice(i64, i64, i64),
    #[error("{0} is not a valid field modulus (need an odd prime or 2)")]
    BadModulus(u64),
    #[error("boundary(d-1).boundary(d) != 0 at degree {0}")]
    NotAComplex(i64),
}

/// Ground ring tag: the integers, or the prime field F_p.
/// Serializes as "Z" or {"Fp": p}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ring {
    #[serde(rename = "Z")]
    Integers,
    #[serde(rename = "Fp")]
    ModP(u64),
}

impl Ring {
    pub fn validate(&self) -> Result<(), ChainsError> {
        match self {
            Ring::Integers => Ok(()),
            Ring::ModP(p) => {
                if is_prime(*p) && *p < (1 << 31) {
                    Ok(())
                } else {
                    Err(ChainsError::BadModulus(*p))
                }
            }
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self, Ring::ModP(_))
    }

    /// Canonical representative: identity over Z, least nonnegative residue mod p.
    pub fn normalize(&self, v: &BigInt) -> BigInt {
        match self {
            Ring::Integers => v.clone(),
            Ring::ModP(p) => v.mod_floor(&BigInt::from(*p)),
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Integers => write!(f, "Z"),
            Ring::ModP(p) => write!(f, "F{p}"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A scalar tagged with its ring. Values are kept normalized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficient {
    pub ring: Ring,
    pub value: BigInt,
}

impl Coefficient {
    pub fn new(ring: Ring, value: BigInt) -> Self {
        Coefficient {
            ring,
            value: ring.normalize(&value),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn add(&self, other: &Coefficient) -> Coefficient {
        assert_eq!(self.ring, other.ring);
        Coefficient::new(self.ring, &self.value + &other.value)
    }

    pub fn mul(&self, other: &Coefficient) -> Coefficient {
        assert_eq!(self.ring, other.ring);
        Coefficient::new(self.ring, &self.value * &other.value)
    }

    pub fn neg(&self) -> Coefficient {
        Coefficient::new(self.ring, -&self.value)
    }
}

/// Sparse integer matrix, column-major, each column sorted by row index with
/// nonzero entries only. The canonical form makes derived `PartialEq` a true
/// equality of matrices.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    columns: Vec<Vec<(u32, BigInt)>>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix({}x{}, nnz={})", self.rows, self.cols, self.nnz())
    }
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            columns: vec![Vec::new(); cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zero(n, n);
        for j in 0..n {
            m.columns[j].push((j as u32, BigInt::one()));
        }
        m
    }

    /// Sums duplicate coordinates, drops zeros.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (u32, u32, BigInt)>,
    ) -> Self {
        let mut acc: BTreeMap<(u32, u32), BigInt> = BTreeMap::new();
        for (i, j, v) in entries {
            assert!((i as usize) < rows && (j as usize) < cols, "entry out of shape");
            let slot = acc.entry((j, i)).or_insert_with(BigInt::zero);
            *slot += v;
        }
        let mut columns = vec![Vec::new(); cols];
        for ((j, i), v) in acc {
            if !v.is_zero() {
                columns[j as usize].push((i, v));
            }
        }
        IntMatrix { rows, cols, columns }
    }

    pub fn from_dense_rows(rows: &[Vec<BigInt>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        IntMatrix::from_entries(
            r,
            c,
            rows.iter().enumerate().flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(j, v)| (i as u32, j as u32, v.clone()))
            }),
        )
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        let owned: Vec<Vec<BigInt>> = rows
            .iter()
            .map(|row| row.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        IntMatrix::from_dense_rows(&owned)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }

    pub fn column(&self, j: usize) -> &[(u32, BigInt)] {
        &self.columns[j]
    }

    pub fn set_column(&mut self, j: usize, mut col: Vec<(u32, BigInt)>) {
        col.retain(|(_, v)| !v.is_zero());
        col.sort_by_key(|&(i, _)| i);
        debug_assert!(col.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(col.iter().all(|&(i, _)| (i as usize) < self.rows));
        self.columns[j] = col;
    }

    pub fn get(&self, i: usize, j: usize) -> BigInt {
        match self.columns[j].binary_search_by_key(&(i as u32), |&(r, _)| r) {
            Ok(k) => self.columns[j][k].1.clone(),
            Err(_) => BigInt::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<BigInt>> {
        let mut out = vec![vec![BigInt::zero(); self.cols]; self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col {
                out[*i as usize][j] = v.clone();
            }
        }
        out
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut columns = vec![Vec::new(); self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col {
                columns[*i as usize].push((j as u32, v.clone()));
            }
        }
        IntMatrix {
            rows: self.cols,
            cols: self.rows,
            columns,
        }
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(
            self.cols, other.rows,
            "shape mismatch in matrix multiplication"
        );
        let mut columns = Vec::with_capacity(other.cols);
        for j in 0..other.cols {
            let mut acc: BTreeMap<u32, BigInt> = BTreeMap::new();
            for (k, bv) in &other.columns[j] {
                for (i, av) in &self.columns[*k as usize] {
                    let slot = acc.entry(*i).or_insert_with(BigInt::zero);
                    *slot += av * bv;
                }
            }
            columns.push(
                acc.into_iter()
                    .filter(|(_, v)| !v.is_zero())
                    .collect::<Vec<_>>(),
            );
        }
        IntMatrix {
            rows: self.rows,
            cols: other.cols,
            columns,
        }
    }

    pub fn mat_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![BigInt::zero(); self.rows];
        for (j, xv) in x.iter().enumerate() {
            if xv.is_zero() {
                continue;
            }
            for (i, v) in &self.columns[j] {
                out[*i as usize] += v * xv;
            }
        }
        out
    }

    /// Entrywise reduction to least nonnegative residues mod p (drops zeros).
    pub fn reduce_mod(&self, p: u64) -> IntMatrix {
        let bp = BigInt::from(p);
        let mut columns = Vec::with_capacity(self.cols);
        for col in &self.columns {
            columns.push(
                col.iter()
                    .map(|(i, v)| (*i, v.mod_floor(&bp)))
                    .filter(|(_, v)| !v.is_zero())
                    .collect::<Vec<_>>(),
            );
        }
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            columns,
        }
    }
}

/// U.M.V = D with U, V unimodular and D diagonal in divisibility order.
pub struct SnfDecomposition {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl SnfDecomposition {
    pub fn diagonal(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n).map(|t| self.d.get(t, t)).collect()
    }
}

// Dense working state for the Smith reduction; U and V tracking is optional
// (diagonal-only queries on cores skip the transform memory).
struct SnfWork {
    a: Vec<Vec<BigInt>>,
    u: Vec<Vec<BigInt>>,
    v: Vec<Vec<BigInt>>,
    rows: usize,
    cols: usize,
    track: bool,
}

impl SnfWork {
    fn swap_rows(&mut self, i: usize, k: usize) {
        if i != k {
            self.a.swap(i, k);
            if self.track {
                self.u.swap(i, k);
            }
        }
    }

    fn swap_cols(&mut self, j: usize, k: usize) {
        if j != k {
            for row in &mut self.a {
                row.swap(j, k);
            }
            if self.track {
                for row in &mut self.v {
                    row.swap(j, k);
                }
            }
        }
    }

    // row_i -= q * row_k
    fn row_sub(&mut self, i: usize, k: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let d = &self.a[k][j] * q;
            self.a[i][j] -= d;
        }
        if self.track {
            for j in 0..self.rows {
                let d = &self.u[k][j] * q;
                self.u[i][j] -= d;
            }
        }
    }

    // col_j -= q * col_k
    fn col_sub(&mut self, j: usize, k: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for row in &mut self.a {
            let d = &row[k] * q;
            row[j] -= d;
        }
        if self.track {
            for row in &mut self.v {
                let d = &row[k] * q;
                row[j] -= d;
            }
        }
    }

    fn negate_row(&mut self, i: usize) {
        for v in &mut self.a[i] {
            *v = -&*v;
        }
        if self.track {
            for v in &mut self.u[i] {
                *v = -&*v;
            }
        }
    }

    // Smallest nonzero magnitude in the submatrix at (t..), ties to lowest
    // row then column.
    fn find_pivot(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(BigInt, usize, usize)> = None;
        for i in t..self.rows {
            for j in t..self.cols {
                if self.a[i][j].is_zero() {
                    continue;
                }
                let mag = self.a[i][j].abs();
                match &best {
                    Some((m, _, _)) if *m <= mag => {}
                    _ => best = Some((mag, i, j)),
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }
}

/// Smith normal form with transforms. Dense algorithm: intended for the
/// small matrices this workspace feeds it (blocks up to a few hundred);
/// rank and invariant factor queries on large sparse matrices go through
/// [`rank`] and [`invariant_factors`] instead.
pub fn smith_normal_form(m: &IntMatrix) -> SnfDecomposition {
    let mut w = snf_work(m, true);
    let a = run_snf(&mut w);
    let out = SnfDecomposition {
        u: dense_with_shape(w.rows, w.rows, &w.u),
        d: dense_with_shape(w.rows, w.cols, &a),
        v: dense_with_shape(w.cols, w.cols, &w.v),
    };
    debug_assert!(out.u.mul(m).mul(&out.v) == out.d, "U.M.V != D");
    out
}

/// The Smith diagonal without transform matrices: same reduction, a third of
/// the memory, for invariant-factor queries on elimination cores.
pub fn smith_diagonal(m: &IntMatrix) -> Vec<BigInt> {
    let mut w = snf_work(m, false);
    let a = run_snf(&mut w);
    (0..w.rows.min(w.cols)).map(|t| a[t][t].clone()).collect()
}

fn snf_work(m: &IntMatrix, track: bool) -> SnfWork {
    let rows = m.rows();
    let cols = m.cols();
    SnfWork {
        a: m.to_dense(),
        u: if track {
            IntMatrix::identity(rows).to_dense()
        } else {
            Vec::new()
        },
        v: if track {
            IntMatrix::identity(cols).to_dense()
        } else {
            Vec::new()
        },
        rows,
        cols,
        track,
    }
}

fn run_snf(w: &mut SnfWork) -> Vec<Vec<BigInt>> {
    let (rows, cols) = (w.rows, w.cols);
    let mut t = 0;
    'outer: while t < rows.min(cols) {
        let Some((pi, pj)) = w.find_pivot(t) else {
            break;
        };
        w.swap_rows(t, pi);
        w.swap_cols(t, pj);

        // Clear column t below the pivot; a nonzero remainder means a
        // strictly smaller entry exists, so re-pivot.
        let mut dirty = false;
        for i in t + 1..rows {
            if w.a[i][t].is_zero() {
                continue;
            }
            let (q, r) = w.a[i][t].div_mod_floor(&w.a[t][t]);
            w.row_sub(i, t, &q);
            if !r.is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue 'outer;
        }
        // Clear row t to the right of the pivot.
        for j in t + 1..cols {
            if w.a[t][j].is_zero() {
                continue;
            }
            let (q, r) = w.a[t][j].div_mod_floor(&w.a[t][t]);
            w.col_sub(j, t, &q);
            if !r.is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue 'outer;
        }
        // Divisibility fix: fold an offending row into the pivot row and redo.
        for i in t + 1..rows {
            for j in t + 1..cols {
                if !w.a[i][j].is_zero() && !w.a[i][j].is_multiple_of(&w.a[t][t]) {
                    let one = BigInt::from(-1);
                    w.row_sub(t, i, &one);
                    continue 'outer;
                }
            }
        }
        if w.a[t][t].is_negative() {
            w.negate_row(t);
        }
        t += 1;
    }
    std::mem::take(&mut w.a)
}

// from_dense_rows cannot infer the column count of a 0-row matrix
fn dense_with_shape(r: usize, c: usize, rows: &[Vec<BigInt>]) -> IntMatrix {
    IntMatrix::from_entries(
        r,
        c,
        rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, v)| (i as u32, j as u32, v.clone()))
        }),
    )
}

/// Fraction-free determinant (Bareiss). Test and audit helper.
pub fn determinant(m: &IntMatrix) -> BigInt {
    assert_eq!(m.rows(), m.cols(), "determinant of non-square matrix");
    let n = m.rows();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.to_dense();
    let mut sign = 1i32;
    let mut prev = BigInt::one();
    for t in 0..n - 1 {
        if a[t][t].is_zero() {
            let Some(k) = (t + 1..n).find(|&k| !a[k][t].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(t, k);
            sign = -sign;
        }
        for i in t + 1..n {
            for j in t + 1..n {
                let num = &a[i][j] * &a[t][t] - &a[i][t] * &a[t][j];
                let (q, r) = num.div_rem(&prev);
                debug_assert!(r.is_zero(), "Bareiss division must be exact");
                a[i][j] = q;
            }
        }
        prev = a[t][t].clone();
    }
    let mut det = a[n - 1][n - 1].clone();
    if sign < 0 {
        det = -det;
    }
    det
}

// ---------------------------------------------------------------------------
// Sparse elimination engine
//
// Row-operation-only Gaussian elimination that only ever pivots on entries
// the ring can divide by (units of Z, any nonzero scalar of F_p). Removing a
// pivot's row and column is a unimodular reduction, so ranks and invariant
// factors of the remainder compose with the peeled part. The engine returns
// a small dense core when no admissible pivot remains.
// ---------------------------------------------------------------------------

trait ScalarRing {
    type Elt: Clone + PartialEq + fmt::Debug;
    fn from_bigint(&self, v: &BigInt) -> Self::Elt;
    fn to_bigint(&self, v: &Self::Elt) -> BigInt;
    fn is_zero(&self, v: &Self::Elt) -> bool;
    /// a - b*c
    fn sub_mul(&self, a: &Self::Elt, b: &Self::Elt, c: &Self::Elt) -> Self::Elt;
    fn can_pivot(&self, v: &Self::Elt) -> bool;
    /// a / pivot, defined when can_pivot(pivot)
    fn div_by_pivot(&self, a: &Self::Elt, pivot: &Self::Elt) -> Self::Elt;
}

struct ZRing;

impl ScalarRing for ZRing {
    type Elt = BigInt;
    fn from_bigint(&self, v: &BigInt) -> BigInt {
        v.clone()
    }
    fn to_bigint(&self, v: &BigInt) -> BigInt {
        v.clone()
    }
    fn is_zero(&self, v: &BigInt) -> bool {
        v.is_zero()
    }
    fn sub_mul(&self, a: &BigInt, b: &BigInt, c: &BigInt) -> BigInt {
        a - b * c
    }
    fn can_pivot(&self, v: &BigInt) -> bool {
        v.abs().is_one()
    }
    fn div_by_pivot(&self, a: &BigInt, pivot: &BigInt) -> BigInt {
        // pivot is +-1
        if pivot.is_one() {
            a.clone()
        } else {
            -a
        }
    }
}

struct FpRing {
    p: u64,
}

impl FpRing {
    fn inv(&self, a: u64) -> u64 {
        // extended Euclid; a != 0 mod p, p prime
        let (mut t, mut new_t) = (0i128, 1i128);
        let (mut r, mut new_r) = (self.p as i128, (a % self.p) as i128);
        while new_r != 0 {
            let q = r / new_r;
            (t, new_t) = (new_t, t - q * new_t);
            (r, new_r) = (new_r, r - q * new_r);
        }
        assert_eq!(r, 1, "non-invertible residue");
        (t.rem_euclid(self.p as i128)) as u64
    }
}

impl ScalarRing for FpRing {
    type Elt = u64;
    fn from_bigint(&self, v: &BigInt) -> u64 {
        use num_traits::ToPrimitive;
        v.mod_floor(&BigInt::from(self.p)).to_u64().unwrap()
    }
    fn to_bigint(&self, v: &u64) -> BigInt {
        BigInt::from(*v)
    }
    fn is_zero(&self, v: &u64) -> bool {
        *v == 0
    }
    fn sub_mul(&self, a: &u64, b: &u64, c: &u64) -> u64 {
        let p = self.p as u128;
        let prod = (*b as u128 * *c as u128) % p;
        ((*a as u128 + p - prod) % p) as u64
    }
    fn can_pivot(&self, v: &u64) -> bool {
        *v != 0
    }
    fn div_by_pivot(&self, a: &u64, pivot: &u64) -> u64 {
        let inv = self.inv(*pivot);
        ((*a as u128 * inv as u128) % self.p as u128) as u64
    }
}

struct PivotRecord<E> {
    row: u32,
    col: u32,
    pivot: E,
    // remaining entries of the pivot row at deactivation time, pivot excluded
    row_rest: Vec<(u32, E)>,
}

// Nonzero part of an elimination core, in the eliminator's column space.
struct TrimmedCore {
    cols: Vec<u32>,
    mat: IntMatrix,
    rhs: Option<Vec<BigInt>>,
    // every dropped (all-zero) active row had a zero right-hand side
    dropped_rhs_zero: bool,
}

struct Eliminator<'r, R: ScalarRing> {
    ring: &'r R,
    rows: Vec<Vec<(u32, R::Elt)>>,
    rhs: Option<Vec<R::Elt>>,
    col_rows: Vec<BTreeSet<u32>>,
    row_active: Vec<bool>,
    col_active: Vec<bool>,
    // (column degree, column index): deterministic pivot candidate order
    col_queue: BTreeSet<(u32, u32)>,
    pivots: Vec<PivotRecord<R::Elt>>,
    pivot_count: usize,
    ncols: usize,
    // live nonzeros in the active submatrix, and the high-water mark
    live: usize,
    live_peak: usize,
    // when false, pivot rows are dropped instead of recorded (rank-only runs)
    keep_records: bool,
}

impl<'r, R: ScalarRing> Eliminator<'r, R> {
    fn new(ring: &'r R, m: &IntMatrix, rhs: Option<&[BigInt]>) -> Self {
        let nrows = m.rows();
        let ncols = m.cols();
        let mut rows: Vec<Vec<(u32, R::Elt)>> = vec![Vec::new(); nrows];
        let mut col_rows: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); ncols];
        for j in 0..ncols {
            for (i, v) in m.column(j) {
                let e = ring.from_bigint(v);
                if !ring.is_zero(&e) {
                    rows[*i as usize].push((j as u32, e));
                    col_rows[j].insert(*i);
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        let col_queue: BTreeSet<(u32, u32)> = (0..ncols)
            .filter(|&j| !col_rows[j].is_empty())
            .map(|j| (col_rows[j].len() as u32, j as u32))
            .collect();
        let rhs = rhs.map(|b| {
            assert_eq!(b.len(), nrows, "rhs length mismatch");
            b.iter().map(|v| ring.from_bigint(v)).collect()
        });
        let keep_records = rhs.is_some();
        let live = rows.iter().map(Vec::len).sum();
        Eliminator {
            ring,
            rows,
            rhs,
            col_rows,
            row_active: vec![true; nrows],
            col_active: vec![true; ncols],
            col_queue,
            pivots: Vec::new(),
            pivot_count: 0,
            ncols,
            live,
            live_peak: live,
            keep_records,
        }
    }

    fn row_get(&self, i: u32, j: u32) -> Option<&R::Elt> {
        let row = &self.rows[i as usize];
        row.binary_search_by_key(&j, |&(c, _)| c)
            .ok()
            .map(|k| &row[k].1)
    }

    // row_k -= factor * row_pivot, maintaining the column index and queue.
    fn row_op(&mut self, k: u32, piv: u32, factor: &R::Elt) {
        let pivot_row = std::mem::take(&mut self.rows[piv as usize]);
        let target = std::mem::take(&mut self.rows[k as usize]);
        let target_len = target.len();
        let mut out = Vec::with_capacity(target.len() + pivot_row.len());
        let mut a = target.into_iter().peekable();
        let mut b = pivot_row.iter().peekable();
        while a.peek().is_some() || b.peek().is_some() {
            let take_a = match (a.peek(), b.peek()) {
                (Some((ja, _)), Some((jb, _))) => {
                    if ja == jb {
                        let (j, va) = a.next().unwrap();
                        let (_, vb) = b.next().unwrap();
                        let nv = self.ring.sub_mul(&va, factor, vb);
                        if self.ring.is_zero(&nv) {
                            self.unindex(j, k);
                        } else {
                            out.push((j, nv));
                        }
                        continue;
                    }
                    ja < jb
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_a {
                out.push(a.next().unwrap());
            } else {
                let (j, vb) = b.next().unwrap();
                let zero = self.ring.from_bigint(&BigInt::zero());
                let nv = self.ring.sub_mul(&zero, factor, vb);
                if !self.ring.is_zero(&nv) {
                    self.index(*j, k);
                    out.push((*j, nv));
                }
            }
        }
        self.live = self.live + out.len() - target_len;
        self.live_peak = self.live_peak.max(self.live);
        self.rows[k as usize] = out;
        self.rows[piv as usize] = pivot_row;
        if let Some(rhs) = &mut self.rhs {
            let nv = self
                .ring
                .sub_mul(&rhs[k as usize], factor, &rhs[piv as usize]);
            rhs[k as usize] = nv;
        }
    }

    fn index(&mut self, j: u32, i: u32) {
        if self.col_active[j as usize] {
            let deg = self.col_rows[j as usize].len() as u32;
            if deg > 0 {
                self.col_queue.remove(&(deg, j));
            }
            self.col_rows[j as usize].insert(i);
            self.col_queue.insert((deg + 1, j));
        } else {
            self.col_rows[j as usize].insert(i);
        }
    }

    fn unindex(&mut self, j: u32, i: u32) {
        if self.col_active[j as usize] {
            let deg = self.col_rows[j as usize].len() as u32;
            self.col_queue.remove(&(deg, j));
            self.col_rows[j as usize].remove(&i);
            // zero-degree columns wait outside the queue as free variables
            if deg > 1 {
                self.col_queue.insert((deg - 1, j));
            }
        } else {
            self.col_rows[j as usize].remove(&i);
        }
    }

    // One peel step. Returns false when no admissible pivot remains.
    fn step(&mut self) -> bool {
        // Candidate columns in (degree, index) order; the first admissible
        // (unit under Z) entry with lowest (row degree, row index) wins.
        let mut cursor: Option<(u32, u32)> = None;
        loop {
            let next = match cursor {
                None => self.col_queue.iter().next().copied(),
                Some(c) => self
                    .col_queue
                    .range((std::ops::Bound::Excluded(c), std::ops::Bound::Unbounded))
                    .next()
                    .copied(),
            };
            let Some((deg, j)) = next else {
                return false;
            };
            cursor = Some((deg, j));
            debug_assert!(deg > 0, "empty column in pivot queue");
            let mut best: Option<(usize, u32)> = None;
            for &i in &self.col_rows[j as usize] {
                let v = self.row_get(i, j).expect("column index out of sync");
                if self.ring.can_pivot(v) {
                    let rd = self.rows[i as usize].len();
                    if best.map_or(true, |(brd, bri)| (rd, i) < (brd, bri)) {
                        best = Some((rd, i));
                    }
                }
            }
            if let Some((_, pi)) = best {
                self.eliminate_at(pi, j);
                return true;
            }
        }
    }

    fn eliminate_at(&mut self, pi: u32, pj: u32) {
        let pivot = self.row_get(pi, pj).unwrap().clone();
        let victims: Vec<u32> = self.col_rows[pj as usize]
            .iter()
            .copied()
            .filter(|&i| i != pi)
            .collect();
        for k in victims {
            let entry = self.row_get(k, pj).unwrap().clone();
            let factor = self.ring.div_by_pivot(&entry, &pivot);
            self.row_op(k, pi, &factor);
            debug_assert!(self.row_get(k, pj).is_none(), "pivot column not cleared");
        }
        // Deactivate pivot row and column.
        self.row_active[pi as usize] = false;
        let deg = self.col_rows[pj as usize].len() as u32;
        self.col_queue.remove(&(deg, pj));
        self.col_active[pj as usize] = false;
        // Remove the pivot row from all column indices it touches.
        let row = std::mem::take(&mut self.rows[pi as usize]);
        self.live -= row.len();
        let mut row_rest = Vec::with_capacity(row.len().saturating_sub(1));
        for (j, v) in row {
            if j != pj {
                if self.col_active[j as usize] {
                    let d = self.col_rows[j as usize].len() as u32;
                    self.col_queue.remove(&(d, j));
                    self.col_rows[j as usize].remove(&pi);
                    if d > 1 {
                        self.col_queue.insert((d - 1, j));
                    }
                } else {
                    self.col_rows[j as usize].remove(&pi);
                }
                if self.keep_records {
                    row_rest.push((j, v));
                }
            } else {
                self.col_rows[j as usize].remove(&pi);
            }
        }
        self.pivot_count += 1;
        if self.keep_records {
            self.pivots.push(PivotRecord {
                row: pi,
                col: pj,
                pivot,
                row_rest,
            });
        }
    }

    fn run(&mut self) {
        while self.step() {}
    }

    fn active_rows(&self) -> Vec<u32> {
        (0..self.rows.len() as u32)
            .filter(|&i| self.row_active[i as usize])
            .collect()
    }

    fn active_cols(&self) -> Vec<u32> {
        (0..self.ncols as u32)
            .filter(|&j| self.col_active[j as usize])
            .collect()
    }

    // Dense core over the active rows and columns (may have zero rows).
    fn core(&self) -> (Vec<u32>, Vec<u32>, IntMatrix, Option<Vec<BigInt>>) {
        let act_rows = self.active_rows();
        let act_cols = self.active_cols();
        let col_pos: BTreeMap<u32, u32> = act_cols
            .iter()
            .enumerate()
            .map(|(k, &j)| (j, k as u32))
            .collect();
        let mut entries = Vec::new();
        for (ri, &i) in act_rows.iter().enumerate() {
            for (j, v) in &self.rows[i as usize] {
                let cj = col_pos[j];
                entries.push((ri as u32, cj, self.ring.to_bigint(v)));
            }
        }
        let core = IntMatrix::from_entries(act_rows.len(), act_cols.len(), entries);
        let rhs = self.rhs.as_ref().map(|b| {
            act_rows
                .iter()
                .map(|&i| self.ring.to_bigint(&b[i as usize]))
                .collect()
        });
        (act_rows, act_cols, core, rhs)
    }

    // The core with all-zero rows and columns removed: zero columns are free
    // variables, zero rows only constrain the right-hand side.
    fn core_trimmed(&self) -> TrimmedCore {
        let rows_kept: Vec<u32> = self
            .active_rows()
            .into_iter()
            .filter(|&i| !self.rows[i as usize].is_empty())
            .collect();
        let cols_kept: Vec<u32> = self
            .active_cols()
            .into_iter()
            .filter(|&j| !self.col_rows[j as usize].is_empty())
            .collect();
        let col_pos: BTreeMap<u32, u32> = cols_kept
            .iter()
            .enumerate()
            .map(|(k, &j)| (j, k as u32))
            .collect();
        let mut entries = Vec::new();
        for (ri, &i) in rows_kept.iter().enumerate() {
            for (j, v) in &self.rows[i as usize] {
                entries.push((ri as u32, col_pos[j], self.ring.to_bigint(v)));
            }
        }
        let mat = IntMatrix::from_entries(rows_kept.len(), cols_kept.len(), entries);
        let rhs = self.rhs.as_ref().map(|b| {
            rows_kept
                .iter()
                .map(|&i| self.ring.to_bigint(&b[i as usize]))
                .collect()
        });
        let dropped_rhs_zero = self.rhs.as_ref().map_or(true, |b| {
            self.active_rows()
                .into_iter()
                .filter(|&i| self.rows[i as usize].is_empty())
                .all(|i| {
                    let v = self.ring.to_bigint(&b[i as usize]);
                    v.is_zero()
                })
        });
        TrimmedCore {
            cols: cols_kept,
            mat,
            rhs,
            dropped_rhs_zero,
        }
    }

    // Propagate a full-width solution vector through the peeled pivots.
    fn back_substitute(&self, x: &mut [BigInt]) {
        let rhs = self.rhs.as_ref().expect("back substitution without rhs");
        for rec in self.pivots.iter().rev() {
            let mut acc = self.ring.to_bigint(&rhs[rec.row as usize]);
            for (j, v) in &rec.row_rest {
                acc -= self.ring.to_bigint(v) * &x[*j as usize];
            }
            let e = self.ring.from_bigint(&acc);
            let q = self.ring.div_by_pivot(&e, &rec.pivot);
            x[rec.col as usize] = self.ring.to_bigint(&q);
        }
    }
}

/// Rank over the given ring. Unit-pivot peel plus a dense Smith core.
pub fn rank(m: &IntMatrix, ring: &Ring) -> usize {
    ring.validate().expect("invalid ring");
    match ring {
        Ring::Integers => {
            // rank over Z is rank over the fraction field, so rows may be
            // divided by their content between peel rounds; stalls fall back
            // to a dense transform-free reduction of the (small) remainder
            let mut total = 0usize;
            let mut work = m.clone();
            loop {
                let zr = ZRing;
                let mut el = Eliminator::new(&zr, &work, None);
                el.run();
                total += el.pivot_count;
                let tc = el.core_trimmed();
                if tc.mat.nnz() == 0 {
                    return total;
                }
                let (stripped, next) = strip_row_contents(&tc.mat);
                if el.pivot_count == 0 && !stripped {
                    return total
                        + smith_diagonal(&next).iter().filter(|d| !d.is_zero()).count();
                }
                work = next;
            }
        }
        Ring::ModP(p) => {
            let fp = FpRing { p: *p };
            let mut el = Eliminator::new(&fp, m, None);
            el.run();
            // every nonzero scalar pivots, so the core is all zeros
            debug_assert!(el.core().2.is_zero());
            el.pivot_count
        }
    }
}

// Divide every row by the gcd of its entries; the bool reports whether any
// row changed. Rank-preserving, lattice-changing.
fn strip_row_contents(m: &IntMatrix) -> (bool, IntMatrix) {
    let gcds = row_gcds(m);
    let mut changed = false;
    let mut entries = Vec::with_capacity(m.nnz());
    for j in 0..m.cols() {
        for (i, v) in m.column(j) {
            let g = &gcds[*i as usize];
            if g.is_one() {
                entries.push((*i, j as u32, v.clone()));
            } else {
                changed = true;
                entries.push((*i, j as u32, v / g));
            }
        }
    }
    (changed, IntMatrix::from_entries(m.rows(), m.cols(), entries))
}

fn row_gcds(m: &IntMatrix) -> Vec<BigInt> {
    let mut gcds = vec![BigInt::zero(); m.rows()];
    for j in 0..m.cols() {
        for (i, v) in m.column(j) {
            let g = &mut gcds[*i as usize];
            *g = g.gcd(v);
        }
    }
    gcds
}

/// Elimination footprint of a unit-pivot peel over Z, for sizing decisions.
#[derive(Debug, Clone, Copy)]
#[allow(dead_code)]
pub(crate) struct PeelStats {
    pub pivots: usize,
    pub core_rows: usize,
    pub core_cols: usize,
    pub core_nnz: usize,
    pub live_peak: usize,
}

#[allow(dead_code)]
pub(crate) fn peel_stats(m: &IntMatrix) -> PeelStats {
    let zr = ZRing;
    let mut el = Eliminator::new(&zr, m, None);
    el.run();
    let (_, _, core, _) = el.core();
    PeelStats {
        pivots: el.pivot_count,
        core_rows: core.rows(),
        core_cols: core.cols(),
        core_nnz: core.nnz(),
        live_peak: el.live_peak,
    }
}

/// Nonzero invariant factors of M in divisibility order (1s included).
pub fn invariant_factors(m: &IntMatrix) -> Vec<BigInt> {
    // Unit peel, then pull the global content out (the invariant factors of
    // g.M are g times those of M) and peel again; a remainder with content 1
    // and no units goes to the dense transform-free reduction.
    let mut out: Vec<BigInt> = Vec::new();
    let mut scale = BigInt::one();
    let mut work = m.clone();
    loop {
        let zr = ZRing;
        let mut el = Eliminator::new(&zr, &work, None);
        el.run();
        out.extend(std::iter::repeat(scale.clone()).take(el.pivot_count));
        let tc = el.core_trimmed();
        if tc.mat.nnz() == 0 {
            return out;
        }
        let g = matrix_content(&tc.mat);
        if g.is_one() {
            out.extend(
                smith_diagonal(&tc.mat)
                    .into_iter()
                    .filter(|d| !d.is_zero())
                    .map(|d| d * &scale),
            );
            return out;
        }
        work = divide_matrix(&tc.mat, &g);
        scale *= g;
    }
}

// Gcd of all entries of a matrix with at least one nonzero entry.
fn matrix_content(m: &IntMatrix) -> BigInt {
    let mut g = BigInt::zero();
    for j in 0..m.cols() {
        for (_, v) in m.column(j) {
            g = g.gcd(v);
            if g.is_one() {
                return g;
            }
        }
    }
    g
}

fn divide_matrix(m: &IntMatrix, g: &BigInt) -> IntMatrix {
    let mut entries = Vec::with_capacity(m.nnz());
    for j in 0..m.cols() {
        for (i, v) in m.column(j) {
            entries.push((*i, j as u32, v / g));
        }
    }
    IntMatrix::from_entries(m.rows(), m.cols(), entries)
}

/// Torsion coefficients presented by M: invariant factors greater than 1.
pub fn torsion_coefficients(m: &IntMatrix) -> Vec<BigInt> {
    invariant_factors(m)
        .into_iter()
        .filter(|d| !d.is_one())
        .collect()
}

// ---------------------------------------------------------------------------
// Solving
// ---------------------------------------------------------------------------

/// Above this dimension `solve_in_image` over Z skips the kernel-coset
/// canonicalization (the echelonized kernel would itself be huge); the
/// particular solution with free parameters zero is still deterministic.
const CANONICAL_SOLVE_LIMIT: usize = 400;

/// Solve M.x = b over the ring. Over Z the result is canonical below
/// [`CANONICAL_SOLVE_LIMIT`]: the SNF particular solution with free
/// parameters zero, reduced at the kernel pivot coordinates to least
/// nonnegative residues. Over F_p the particular solution has free
/// parameters zero.
pub fn solve_in_image(
    m: &IntMatrix,
    b: &[BigInt],
    ring: &Ring,
) -> Result<Vec<BigInt>, ChainsError> {
    ring.validate().expect("invalid ring");
    if b.len() != m.rows() {
        return Err(ChainsError::DimensionMismatch(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            m.rows()
        )));
    }
    if b.iter().all(|v| ring.normalize(v).is_zero()) {
        // the canonical preimage of zero is zero
        return Ok(vec![BigInt::zero(); m.cols()]);
    }
    match ring {
        Ring::ModP(p) => solve_fp(m, b, *p),
        Ring::Integers => {
            if m.rows().max(m.cols()) <= CANONICAL_SOLVE_LIMIT {
                solve_z_canonical(m, b)
            } else {
                solve_z_large(m, b)
            }
        }
    }
}

fn solve_fp(m: &IntMatrix, b: &[BigInt], p: u64) -> Result<Vec<BigInt>, ChainsError> {
    let fp = FpRing { p };
    let mut el = Eliminator::new(&fp, m, Some(b));
    el.run();
    // all remaining active rows are zero rows; they must be consistent
    for &i in &el.active_rows() {
        if !el.rows[i as usize].is_empty() {
            unreachable!("nonzero row survived field elimination");
        }
        if let Some(rhs) = &el.rhs {
            if rhs[i as usize] != 0 {
                return Err(ChainsError::NoSolution);
            }
        }
    }
    let mut x = vec![BigInt::zero(); m.cols()];
    el.back_substitute(&mut x);
    for v in &mut x {
        *v = v.mod_floor(&BigInt::from(p));
    }
    debug_assert!(mat_vec_eq_mod(m, &x, b, p));
    Ok(x)
}

fn mat_vec_eq_mod(m: &IntMatrix, x: &[BigInt], b: &[BigInt], p: u64) -> bool {
    let bp = BigInt::from(p);
    let mx = m.mat_vec(x);
    mx.iter()
        .zip(b)
        .all(|(l, r)| (l - r).mod_floor(&bp).is_zero())
}

fn solve_z_canonical(m: &IntMatrix, b: &[BigInt]) -> Result<Vec<BigInt>, ChainsError> {
    let snf = smith_normal_form(m);
    let diag = snf.diagonal();
    let rank = diag.iter().filter(|d| !d.is_zero()).count();
    let y = snf.u.mat_vec(b);
    let mut z = vec![BigInt::zero(); m.cols()];
    for (t, d) in diag.iter().enumerate().take(rank) {
        let (q, r) = y[t].div_mod_floor(d);
        if !r.is_zero() {
            return Err(ChainsError::NoSolution);
        }
        z[t] = q;
    }
    for yv in y.iter().skip(rank) {
        if !yv.is_zero() {
            return Err(ChainsError::NoSolution);
        }
    }
    let mut x = snf.v.mat_vec(&z);

    // Kernel coset canonicalization: reduce against the column-echelonized
    // kernel so entries at kernel pivot coordinates land in [0, pivot).
    let kernel: Vec<Vec<BigInt>> = (rank..m.cols())
        .map(|j| {
            (0..m.cols())
                .map(|i| snf.v.get(i, j))
                .collect::<Vec<BigInt>>()
        })
        .collect();
    let echelon = column_echelon(kernel);
    for g in &echelon {
        let pivot_row = g.iter().position(|v| !v.is_zero()).unwrap();
        let q = x[pivot_row].div_floor(&g[pivot_row]);
        if !q.is_zero() {
            for (xe, ge) in x.iter_mut().zip(g) {
                *xe -= &q * ge;
            }
        }
    }
    debug_assert_eq!(m.mat_vec(&x), b.to_vec());
    Ok(x)
}

/// Column echelon form of an integer lattice basis: strictly increasing
/// pivot rows, positive pivots. Unimodular column operations only, so the
/// span is unchanged.
fn column_echelon(mut vecs: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    vecs.retain(|v| v.iter().any(|e| !e.is_zero()));
    let mut out: Vec<Vec<BigInt>> = Vec::new();
    while !vecs.is_empty() {
        let lead = |v: &Vec<BigInt>| v.iter().position(|e| !e.is_zero()).unwrap();
        let p = vecs.iter().map(|v| lead(v)).min().unwrap();
        let mut carriers: Vec<Vec<BigInt>> = Vec::new();
        let mut rest: Vec<Vec<BigInt>> = Vec::new();
        for v in vecs {
            if lead(&v) == p {
                carriers.push(v);
            } else {
                rest.push(v);
            }
        }
        // combine carriers pairwise until one survivor holds gcd at row p
        let mut survivor = carriers.pop().unwrap();
        for other in carriers {
            let ext = survivor[p].extended_gcd(&other[p]);
            let (sa, sb) = (&survivor[p] / &ext.gcd, &other[p] / &ext.gcd);
            let combo: Vec<BigInt> = survivor
                .iter()
                .zip(&other)
                .map(|(a, b)| &ext.x * a + &ext.y * b)
                .collect();
            let killed: Vec<BigInt> = survivor
                .iter()
                .zip(&other)
                .map(|(a, b)| &sa * b - &sb * a)
                .collect();
            survivor = combo;
            if killed.iter().any(|e| !e.is_zero()) {
                rest.push(killed);
            }
        }
        if survivor[p].is_negative() {
            for e in &mut survivor {
                *e = -&*e;
            }
        }
        out.push(survivor);
        vecs = rest;
    }
    out
}

fn solve_z_large(m: &IntMatrix, b: &[BigInt]) -> Result<Vec<BigInt>, ChainsError> {
    let zr = ZRing;
    let mut el = Eliminator::new(&zr, m, Some(b));
    el.run();
    let tc = el.core_trimmed();
    if !tc.dropped_rhs_zero {
        // a vanished row still demanded something nonzero
        return Err(ChainsError::NoSolution);
    }
    let mut x = vec![BigInt::zero(); m.cols()];
    if tc.mat.nnz() > 0 {
        let rhs = tc.rhs.expect("solve core carries its rhs");
        // dividing a row and its rhs by the row content preserves the
        // solution set; an indivisible rhs entry certifies insolubility
        let (stripped, mat, rhs) = strip_rows_with_rhs(&tc.mat, &rhs)?;
        let small = mat.rows().max(mat.cols()) <= CANONICAL_SOLVE_LIMIT;
        let core_x = if !small && (el.pivot_count > 0 || stripped) {
            solve_z_large(&mat, &rhs)?
        } else {
            solve_z_canonical(&mat, &rhs)?
        };
        for (k, &j) in tc.cols.iter().enumerate() {
            x[j as usize] = core_x[k].clone();
        }
    }
    el.back_substitute(&mut x);
    debug_assert_eq!(m.mat_vec(&x), b.to_vec());
    Ok(x)
}

// Divide each row and its rhs entry by the row content; an rhs entry the
// content does not divide proves there is no integer solution.
fn strip_rows_with_rhs(
    m: &IntMatrix,
    b: &[BigInt],
) -> Result<(bool, IntMatrix, Vec<BigInt>), ChainsError> {
    let gcds = row_gcds(m);
    let mut changed = false;
    let mut rhs = b.to_vec();
    for (i, g) in gcds.iter().enumerate() {
        if g.is_zero() || g.is_one() {
            continue;
        }
        let (q, r) = rhs[i].div_mod_floor(g);
        if !r.is_zero() {
            return Err(ChainsError::NoSolution);
        }
        rhs[i] = q;
        changed = true;
    }
    if !changed {
        return Ok((false, m.clone(), rhs));
    }
    let mut entries = Vec::with_capacity(m.nnz());
    for j in 0..m.cols() {
        for (i, v) in m.column(j) {
            let g = &gcds[*i as usize];
            if g.is_one() {
                entries.push((*i, j as u32, v.clone()));
            } else {
                entries.push((*i, j as u32, v / g));
            }
        }
    }
    Ok((
        true,
        IntMatrix::from_entries(m.rows(), m.cols(), entries),
        rhs,
    ))
}

/// Basis of ker(M) over Z: the trailing columns of V from the Smith
/// decomposition. Dense-algorithm sizes only.
pub fn kernel_basis(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    let snf = smith_normal_form(m);
    let rank = snf
        .diagonal()
        .iter()
        .filter(|d| !d.is_zero())
        .count();
    (rank..m.cols())
        .map(|j| (0..m.cols()).map(|i| snf.v.get(i, j)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Chain complex slices
// ---------------------------------------------------------------------------

/// A finite slice of a chain complex with chosen ordered bases. Degrees
/// outside the interval are zero, so boundary maps at the ends are zero maps;
/// the slice is the entire complex, unlike the windowed twisted complexes
/// which track validity separately.
pub struct ChainComplexSlice {
    lo: i64,
    hi: i64,
    dims: BTreeMap<i64, usize>,
    labels: BTreeMap<i64, Vec<String>>,
    boundaries: BTreeMap<i64, IntMatrix>,
}

impl ChainComplexSlice {
    /// `bases`: per-degree ordered labels; `boundaries[d]`: matrix from
    /// degree d to degree d-1 for interior d. Validates shapes and that
    /// consecutive boundaries compose to zero.
    pub fn new(
        lo: i64,
        hi: i64,
        bases: BTreeMap<i64, Vec<String>>,
        boundaries: BTreeMap<i64, IntMatrix>,
    ) -> Result<Self, ChainsError> {
        assert!(lo <= hi);
        let mut dims = BTreeMap::new();
        for d in lo..=hi {
            dims.insert(d, bases.get(&d).map_or(0, Vec::len));
        }
        for (d, m) in &boundaries {
            let (Some(&nd), Some(&nd1)) = (dims.get(d), dims.get(&(d - 1))) else {
                return Err(ChainsError::DegreeOutsideSlice(*d, lo, hi));
            };
            if m.cols() != nd || m.rows() != nd1 {
                return Err(ChainsError::DimensionMismatch(format!(
                    "boundary({d}) is {}x{} but dims are {nd1}x{nd}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let slice = ChainComplexSlice {
            lo,
            hi,
            dims,
            labels: bases,
            boundaries,
        };
        for d in lo + 1..=hi {
            let lower = slice.boundary(d - 1);
            let upper = slice.boundary(d);
            if !lower.mul(&upper).is_zero() {
                return Err(ChainsError::NotAComplex(d));
            }
        }
        Ok(slice)
    }

    pub fn interval(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn dim(&self, d: i64) -> usize {
        self.dims.get(&d).copied().unwrap_or(0)
    }

    pub fn labels(&self, d: i64) -> &[String] {
        match self.labels.get(&d) {
            Some(v) => v.as_slice(),
            None => &[],
        }
    }

    /// Boundary from degree d to d-1; zero map when d or d-1 leaves the
    /// interval.
    pub fn boundary(&self, d: i64) -> IntMatrix {
        if let Some(m) = self.boundaries.get(&d) {
            return m.clone();
        }
        let rows = self.dim(d - 1);
        let cols = self.dim(d);
        IntMatrix::zero(rows, cols)
    }
}

/// One row of a homology table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomologyRow {
    pub degree: i64,
    pub rank: usize,
    pub torsion: Vec<BigInt>,
    pub valid: bool,
}

/// Homology per degree; `valid = false` marks degrees whose answer is
/// affected by a truncation (always true for full slices).
#[derive(Debug)]
pub struct HomologyReport {
    pub ring: Ring,
    pub rows: Vec<HomologyRow>,
}

/// H_d of the slice: (free rank, torsion coefficients). Over F_p the rank is
/// the F_p-dimension and torsion is empty.
pub fn homology(
    c: &ChainComplexSlice,
    d: i64,
    ring: &Ring,
) -> Result<(usize, Vec<BigInt>), ChainsError> {
    let (lo, hi) = c.interval();
    if d < lo || d > hi {
        return Err(ChainsError::DegreeOutsideSlice(d, lo, hi));
    }
    let out_bdry = c.boundary(d);
    let in_bdry = c.boundary(d + 1);
    let (r_out, r_in) = match ring {
        Ring::Integers => (rank(&out_bdry, ring), rank(&in_bdry, ring)),
        Ring::ModP(p) => (
            rank(&out_bdry.reduce_mod(*p), ring),
            rank(&in_bdry.reduce_mod(*p), ring),
        ),
    };
    let free_rank = c.dim(d) - r_out - r_in;
    let torsion = match ring {
        // ker(boundary(d)) is a saturated submodule, so the torsion of the
        // quotient equals the torsion presented by the incoming boundary
        Ring::Integers => torsion_coefficients(&in_bdry),
        Ring::ModP(_) => Vec::new(),
    };
    Ok((free_rank, torsion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bi(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn snf_zero_matrix() {
        let m = IntMatrix::zero(3, 2);
        let snf = smith_normal_form(&m);
        assert!(snf.d.is_zero());
        assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d);
    }

    #[test]
    fn snf_diag_2_3() {
        let m = IntMatrix::from_i64_rows(&[&[2, 0], &[0, 3]]);
        let snf = smith_normal_form(&m);
        assert_eq!(snf.diagonal(), vec![bi(1), bi(6)]);
        assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d);
        assert_eq!(determinant(&snf.u).abs(), bi(1));
        assert_eq!(determinant(&snf.v).abs(), bi(1));
    }

    #[test]
    fn snf_one_by_one() {
        let m = IntMatrix::from_i64_rows(&[&[1]]);
        let snf = smith_normal_form(&m);
        assert_eq!(snf.d, IntMatrix::identity(1));
        assert_eq!(snf.u, IntMatrix::identity(1));
        assert_eq!(snf.v, IntMatrix::identity(1));
    }

    #[test]
    fn snf_needs_divisibility_fix() {
        // diag(2,3) embedded with off-diagonal junk
        let m = IntMatrix::from_i64_rows(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
        let snf = smith_normal_form(&m);
        assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d);
        let diag = snf.diagonal();
        for w in diag.windows(2) {
            if !w[1].is_zero() {
                assert!(w[1].is_multiple_of(&w[0]), "diag not a chain: {diag:?}");
            }
        }
    }

    fn random_matrix_strategy(
        max_rows: usize,
        max_cols: usize,
    ) -> impl Strategy<Value = IntMatrix> {
        (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-4i64..=4, r * c).prop_map(move |vals| {
                IntMatrix::from_entries(
                    r,
                    c,
                    vals.into_iter()
                        .enumerate()
                        .map(|(k, v)| ((k / c) as u32, (k % c) as u32, BigInt::from(v))),
                )
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn snf_decomposition_properties(m in random_matrix_strategy(5, 5)) {
            let snf = smith_normal_form(&m);
            prop_assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d.clone());
            prop_assert_eq!(determinant(&snf.u).abs(), bi(1));
            prop_assert_eq!(determinant(&snf.v).abs(), bi(1));
            let diag = snf.diagonal();
            for w in diag.windows(2) {
                if !w[1].is_zero() {
                    prop_assert!(w[1].is_multiple_of(&w[0]));
                }
            }
            // peel path agrees with the dense path
            let nonzero: Vec<BigInt> =
                diag.iter().filter(|d| !d.is_zero()).cloned().collect();
            prop_assert_eq!(invariant_factors(&m), nonzero.clone());
            prop_assert_eq!(rank(&m, &Ring::Integers), nonzero.len());
        }

        #[test]
        fn solve_agrees_on_constructed_rhs(
            m in random_matrix_strategy(5, 5),
            xs in proptest::collection::vec(-3i64..=3, 5),
        ) {
            let x: Vec<BigInt> = xs.iter().take(m.cols()).map(|&v| bi(v)).collect();
            let b = m.mat_vec(&x);
            let got = solve_in_image(&m, &b, &Ring::Integers).expect("b is in the image");
            prop_assert_eq!(m.mat_vec(&got), b.clone());
            // canonical: resolving the same system twice is identical
            let again = solve_in_image(&m, &b, &Ring::Integers).unwrap();
            prop_assert_eq!(got, again);
            // the large-matrix path must also solve it exactly
            let large = solve_z_large(&m, &b).expect("b is in the image");
            prop_assert_eq!(m.mat_vec(&large), b);
        }

        #[test]
        fn fp_solve_agrees_on_constructed_rhs(
            m in random_matrix_strategy(5, 5),
            xs in proptest::collection::vec(0i64..=4, 5),
        ) {
            let p = 5u64;
            let x: Vec<BigInt> = xs.iter().take(m.cols()).map(|&v| bi(v)).collect();
            let b: Vec<BigInt> = m
                .mat_vec(&x)
                .iter()
                .map(|v| v.mod_floor(&bi(p as i64)))
                .collect();
            let got = solve_in_image(&m, &b, &Ring::ModP(p)).expect("b is in the image");
            prop_assert!(mat_vec_eq_mod(&m, &got, &b, p));
        }
    }

    #[test]
    fn solve_identity_and_forced() {
        let id = IntMatrix::identity(3);
        let b = vec![bi(5), bi(-7), bi(0)];
        assert_eq!(solve_in_image(&id, &b, &Ring::Integers).unwrap(), b);

        let m2 = IntMatrix::from_i64_rows(&[&[2]]);
        assert_eq!(
            solve_in_image(&m2, &[bi(4)], &Ring::Integers).unwrap(),
            vec![bi(2)]
        );
        assert_eq!(
            solve_in_image(&m2, &[bi(3)], &Ring::Integers),
            Err(ChainsError::NoSolution)
        );
        // over F_5: 3 * inverse(2) = 3 * 3 = 9 = 4
        assert_eq!(
            solve_in_image(&m2, &[bi(3)], &Ring::ModP(5)).unwrap(),
            vec![bi(4)]
        );
    }

    #[test]
    fn solve_canonicalizes_across_presentations() {
        // x + y = 2 has infinitely many integer solutions; the canonical one
        // is stable and satisfies the system
        let m = IntMatrix::from_i64_rows(&[&[1, 1]]);
        let x = solve_in_image(&m, &[bi(2)], &Ring::Integers).unwrap();
        assert_eq!(m.mat_vec(&x), vec![bi(2)]);
        assert_eq!(x, solve_in_image(&m, &[bi(2)], &Ring::Integers).unwrap());
    }

    #[test]
    fn kernel_basis_spans_kernel() {
        let m = IntMatrix::from_i64_rows(&[&[1, 2, 3], &[2, 4, 6]]);
        let k = kernel_basis(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.mat_vec(v).iter().all(|e| e.is_zero()));
        }
    }

    fn slice_from(
        dims: &[(i64, usize)],
        boundaries: Vec<(i64, IntMatrix)>,
    ) -> ChainComplexSlice {
        let lo = dims.iter().map(|&(d, _)| d).min().unwrap();
        let hi = dims.iter().map(|&(d, _)| d).max().unwrap();
        let bases = dims
            .iter()
            .map(|&(d, n)| (d, (0..n).map(|k| format!("e{d}_{k}")).collect()))
            .collect();
        ChainComplexSlice::new(lo, hi, bases, boundaries.into_iter().collect()).unwrap()
    }

    #[test]
    fn homology_point() {
        let c = slice_from(&[(0, 1)], vec![]);
        assert_eq!(homology(&c, 0, &Ring::Integers).unwrap(), (1, vec![]));
        assert_eq!(homology(&c, 0, &Ring::ModP(2)).unwrap(), (1, vec![]));
        assert!(homology(&c, 1, &Ring::Integers).is_err());
    }

    #[test]
    fn homology_multiplication_by_two() {
        let c = slice_from(
            &[(0, 1), (1, 1)],
            vec![(1, IntMatrix::from_i64_rows(&[&[2]]))],
        );
        assert_eq!(homology(&c, 0, &Ring::Integers).unwrap(), (0, vec![bi(2)]));
        assert_eq!(homology(&c, 1, &Ring::Integers).unwrap(), (0, vec![]));
        // mod 2 the map is zero
        assert_eq!(homology(&c, 0, &Ring::ModP(2)).unwrap(), (1, vec![]));
        assert_eq!(homology(&c, 1, &Ring::ModP(2)).unwrap(), (1, vec![]));
        assert_eq!(homology(&c, 0, &Ring::ModP(3)).unwrap(), (0, vec![]));
    }

    #[test]
    fn homology_circle() {
        // two vertices, two parallel edges
        let d1 = IntMatrix::from_i64_rows(&[&[1, 1], &[-1, -1]]);
        let c = slice_from(&[(0, 2), (1, 2)], vec![(1, d1)]);
        assert_eq!(homology(&c, 0, &Ring::Integers).unwrap(), (1, vec![]));
        assert_eq!(homology(&c, 1, &Ring::Integers).unwrap(), (1, vec![]));
    }

    #[test]
    fn slice_rejects_non_complexes() {
        let d1 = IntMatrix::from_i64_rows(&[&[1]]);
        let d2 = IntMatrix::from_i64_rows(&[&[1]]);
        let bases: BTreeMap<i64, Vec<String>> = [
            (0, vec!["a".into()]),
            (1, vec!["b".into()]),
            (2, vec!["c".into()]),
        ]
        .into_iter()
        .collect();
        let boundaries = [(1, d1), (2, d2)].into_iter().collect();
        assert!(matches!(
            ChainComplexSlice::new(0, 2, bases, boundaries),
            Err(ChainsError::NotAComplex(2))
        ));
    }

    // dim_Fp H_d(C (x) F_p) = rank H_d + p-torsion at d + p-torsion at d-1
    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn universal_coefficients(
            a in random_matrix_strategy(4, 4),
            mix in proptest::collection::vec(-2i64..=2, 16),
            p in prop::sample::select(vec![2u64, 3, 5]),
        ) {
            // C_2 --B--> C_1 --A--> C_0 with A.B = 0: B = K.R for the kernel K
            let k = kernel_basis(&a);
            let c2 = 3usize;
            let mut entries = Vec::new();
            for (col, chunk) in mix.chunks(k.len().max(1)).take(c2).enumerate() {
                for (ki, kv) in k.iter().enumerate() {
                    let coeff = chunk.get(ki).copied().unwrap_or(0);
                    if coeff == 0 { continue; }
                    for (ri, e) in kv.iter().enumerate() {
                        entries.push((ri as u32, col as u32, bi(coeff) * e));
                    }
                }
            }
            let b = IntMatrix::from_entries(a.cols(), c2, entries);
            prop_assert!(a.mul(&b).is_zero());
            let c = slice_from(
                &[(0, a.rows()), (1, a.cols()), (2, c2)],
                vec![(1, a.clone()), (2, b)],
            );
            let ring_p = Ring::ModP(p);
            let bp = bi(p as i64);
            for d in [0i64, 1] {
                let (rz, tz) = homology(&c, d, &Ring::Integers).unwrap();
                let (rp, _) = homology(&c, d, &ring_p).unwrap();
                let t_here = tz.iter().filter(|t| t.is_multiple_of(&bp)).count();
                let t_below = if d > 0 {
                    homology(&c, d - 1, &Ring::Integers)
                        .unwrap()
                        .1
                        .iter()
                        .filter(|t| t.is_multiple_of(&bp))
                        .count()
                } else {
                    0
                };
                prop_assert_eq!(rp, rz + t_here + t_below);
            }
        }
    }

    #[test]
    fn ring_and_coefficient_basics() {
        assert!(Ring::ModP(7).validate().is_ok());
        assert!(Ring::ModP(6).validate().is_err());
        assert!(Ring::ModP(1).validate().is_err());
        assert_eq!(Ring::ModP(5).normalize(&bi(-3)), bi(2));
        assert_eq!(Ring::Integers.to_string(), "Z");
        assert_eq!(Ring::ModP(2).to_string(), "F2");

        let a = Coefficient::new(Ring::ModP(5), bi(7));
        assert_eq!(a.value, bi(2));
        let b = Coefficient::new(Ring::ModP(5), bi(4));
        assert_eq!(a.add(&b).value, bi(1));
        assert_eq!(a.mul(&b).value, bi(3));
        assert_eq!(a.neg().value, bi(3));
        assert!(Coefficient::new(Ring::Integers, bi(0)).is_zero());
    }

    #[test]
    fn large_solver_handles_consistency_failure() {
        // second row is incompatible with the first
        let m = IntMatrix::from_i64_rows(&[&[1, 1], &[1, 1]]);
        let err = solve_z_large(&m, &[bi(1), bi(2)]);
        assert_eq!(err, Err(ChainsError::NoSolution));
        // remaining all-zero rows with nonzero rhs in the fp path
        let err2 = solve_fp(&m, &[bi(1), bi(2)], 5);
        assert_eq!(err2, Err(ChainsError::NoSolution));
    }
}
