//! The free complete algebra on one variable x of degree -m, truncated at a
//! finite order: coinvariant normal forms with the sign twist, grading
//! bookkeeping, the pre-Lie circle product, and derivations xi |-> xi o omega.
//!
//! An order-r element is a class in the twisted coinvariants of the arity-r
//! operad slice tensored with x^r; the twist multiplies by sgn(sigma)^m when
//! translating by sigma. Classes are stored on orbit representatives (first
//! layer = identity), which are the lexicographically least orbit elements.
//!
//! Sign conventions, fixed here once and validated by the pre-Lie and
//! square-zero test batteries: for homogeneous operad parts p (in a, order s)
//! and q (in b, order t), slot 1 <= i <= s contributes
//!     (-1)^{|p||q| + (t-1) m (|p| + i - 1)}  (p o_i q) x^{s+t-1}
//! to a o b, where |.| is the chain degree. Every such slot sum descends to
//! coinvariants: translating either factor changes slot contributions by
//! permutations and signs that cancel against the twist.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barratt_eccles::{
    canonical_translate, differential, partial_composite, BEChain, BESimplex, FiltrationIndex,
};
use crate::chains::{IntMatrix, Ring};
use crate::symm;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series parameters differ: ({0}) vs ({1})")]
    ParameterMismatch(String, String),
    #[error("order {0} outside 1..={1}")]
    OrderOutOfRange(usize, usize),
    #[error("component at order {order} has chain degree {found}, expected {expected}")]
    DegreeMismatch {
        order: usize,
        found: usize,
        expected: i64,
    },
    #[error("simplex outside the expected coinvariant slice: {0}")]
    OutsideSlice(String),
    #[error("malformed series data: {0}")]
    Malformed(String),
}

/// Degree bookkeeping for Ê_n(x) with x of degree -m: an order-r element with
/// operad chain degree c has total degree c - r m, topological degree
/// q = r m - c.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeRule {
    pub n: FiltrationIndex,
    pub m: u32,
}

impl DegreeRule {
    pub fn new(n: FiltrationIndex, m: u32) -> Self {
        DegreeRule { n, m }
    }

    pub fn total_degree(&self, order: usize, chain_degree: usize) -> i64 {
        chain_degree as i64 - order as i64 * self.m as i64
    }

    pub fn topological_degree(&self, order: usize, chain_degree: usize) -> i64 {
        -self.total_degree(order, chain_degree)
    }

    /// Chain degree of the order-r component of a homogeneous element of the
    /// given total degree, if it is realizable (nonnegative).
    pub fn chain_degree(&self, order: usize, total_degree: i64) -> Option<usize> {
        let c = total_degree + order as i64 * self.m as i64;
        usize::try_from(c).ok()
    }

    /// Chain degree m(r-1)-1 of the order-r twisting component, r >= 2.
    pub fn twist_chain_degree(&self, order: usize) -> Option<usize> {
        debug_assert!(order >= 2);
        usize::try_from(self.m as i64 * (order as i64 - 1) - 1).ok()
    }
}

/// Element of a twisted coinvariant slice: a chain supported on orbit
/// representatives (identity first layer).
#[derive(Clone, PartialEq, Eq)]
pub struct CoinvariantClass {
    chain: BEChain,
}

impl CoinvariantClass {
    pub fn zero(order: usize, chain_degree: usize) -> Self {
        CoinvariantClass {
            chain: BEChain::zero(order, chain_degree),
        }
    }

    /// Wrap a chain already supported on orbit representatives.
    pub fn from_representatives(chain: BEChain) -> Result<Self, SeriesError> {
        for (s, _) in chain.terms() {
            if !s.layer_perm(0).is_identity() {
                return Err(SeriesError::OutsideSlice(s.encode()));
            }
        }
        Ok(CoinvariantClass { chain })
    }

    pub fn singleton(rep: BESimplex) -> Result<Self, SeriesError> {
        CoinvariantClass::from_representatives(BEChain::from_simplex(rep))
    }

    pub fn order(&self) -> usize {
        self.chain.arity()
    }

    pub fn chain_degree(&self) -> usize {
        self.chain.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.chain.is_zero()
    }

    pub fn chain(&self) -> &BEChain {
        &self.chain
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BESimplex, &BigInt)> {
        self.chain.terms()
    }

    pub fn coefficient(&self, s: &BESimplex) -> BigInt {
        self.chain.coefficient(s)
    }

    pub fn add_assign(&mut self, other: &CoinvariantClass) {
        self.chain.add_assign(&other.chain);
    }

    pub fn scale(&mut self, c: &BigInt) {
        self.chain.scale(c);
    }

    pub fn negated(&self) -> CoinvariantClass {
        CoinvariantClass {
            chain: self.chain.negated(),
        }
    }

    /// Reduce every coefficient by the ring (a no-op over the integers).
    pub fn normalized(&self, ring: &Ring) -> CoinvariantClass {
        let mut out = BEChain::zero(self.order(), self.chain_degree());
        for (s, c) in self.chain.terms() {
            out.add_term(s.clone(), ring.normalize(c));
        }
        CoinvariantClass { chain: out }
    }

    /// Column vector of this class against an ordered slice basis.
    pub fn expand(&self, basis: &[BESimplex]) -> Result<Vec<(u32, BigInt)>, SeriesError> {
        let mut out = Vec::with_capacity(self.chain.len());
        for (s, c) in self.chain.terms() {
            let row = basis
                .binary_search(s)
                .map_err(|_| SeriesError::OutsideSlice(s.encode()))?;
            out.push((row as u32, c.clone()));
        }
        out.sort_by_key(|&(r, _)| r);
        Ok(out)
    }
}

impl fmt::Debug for CoinvariantClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}]", self.chain)
    }
}

/// Send every simplex to (sign of its translation)^m times its orbit
/// representative. A retraction onto representative-supported chains.
pub fn coinvariant_reduce(x: &BEChain, m: u32) -> CoinvariantClass {
    let mut out = BEChain::zero(x.arity(), x.dim());
    for (s, c) in x.terms() {
        let (sigma, rep) = canonical_translate(s);
        let mut coeff = c.clone();
        if m % 2 == 1 && symm::sign(&sigma) < 0 {
            coeff = -coeff;
        }
        out.add_term(rep, coeff);
    }
    CoinvariantClass { chain: out }
}

/// The twisted-coinvariant internal differential: differentiate a
/// representative-supported chain and reduce the faces.
pub fn internal_differential(x: &CoinvariantClass, m: u32) -> CoinvariantClass {
    coinvariant_reduce(&differential(&x.chain), m)
}

/// Homogeneous element of the truncated algebra: one coinvariant class per
/// order 1..=R, the order-r class in chain degree total_degree + r m.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SeriesJson", into = "SeriesJson")]
pub struct TruncatedSeries {
    rule: DegreeRule,
    trunc: usize,
    total_degree: i64,
    orders: Vec<CoinvariantClass>,
}

impl TruncatedSeries {
    pub fn zero(rule: DegreeRule, trunc: usize, total_degree: i64) -> Self {
        assert!(trunc >= 1, "truncation order must be at least 1");
        let orders = (1..=trunc)
            .map(|r| {
                let c = rule.chain_degree(r, total_degree).unwrap_or(0);
                CoinvariantClass::zero(r, c)
            })
            .collect();
        TruncatedSeries {
            rule,
            trunc,
            total_degree,
            orders,
        }
    }

    /// The variable x itself: the order-1 unit class, total degree -m.
    pub fn variable(rule: DegreeRule, trunc: usize) -> Self {
        let mut s = TruncatedSeries::zero(rule, trunc, -(rule.m as i64));
        let unit = BESimplex::vertex(&symm::Perm::identity(1));
        s.orders[0] = CoinvariantClass {
            chain: BEChain::from_simplex(unit),
        };
        s
    }

    pub fn rule(&self) -> DegreeRule {
        self.rule
    }

    pub fn truncation(&self) -> usize {
        self.trunc
    }

    pub fn total_degree(&self) -> i64 {
        self.total_degree
    }

    pub fn order(&self, r: usize) -> &CoinvariantClass {
        &self.orders[r - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.orders.iter().all(|c| c.is_zero())
    }

    /// Replace the order-r component. The class must sit in the chain degree
    /// the total degree dictates.
    pub fn set_order(&mut self, r: usize, class: CoinvariantClass) -> Result<(), SeriesError> {
        if r < 1 || r > self.trunc {
            return Err(SeriesError::OrderOutOfRange(r, self.trunc));
        }
        if class.order() != r {
            return Err(SeriesError::Malformed(format!(
                "class has order {}, expected {r}",
                class.order()
            )));
        }
        let expected = self.total_degree + r as i64 * self.rule.m as i64;
        if !class.is_zero() && class.chain_degree() as i64 != expected {
            return Err(SeriesError::DegreeMismatch {
                order: r,
                found: class.chain_degree(),
                expected,
            });
        }
        self.orders[r - 1] = class;
        Ok(())
    }

    pub fn add_assign(&mut self, other: &TruncatedSeries) -> Result<(), SeriesError> {
        self.check_compatible(other)?;
        if self.total_degree != other.total_degree {
            return Err(SeriesError::Malformed(format!(
                "cannot add total degrees {} and {}",
                self.total_degree, other.total_degree
            )));
        }
        for (mine, theirs) in self.orders.iter_mut().zip(&other.orders) {
            mine.add_assign(theirs);
        }
        Ok(())
    }

    pub fn scale(&mut self, c: &BigInt) {
        for class in &mut self.orders {
            class.scale(c);
        }
    }

    pub fn negated(&self) -> TruncatedSeries {
        let mut out = self.clone();
        out.scale(&BigInt::from(-1));
        out
    }

    pub fn normalized(&self, ring: &Ring) -> TruncatedSeries {
        let mut out = self.clone();
        for class in &mut out.orders {
            *class = class.normalized(ring);
        }
        out
    }

    /// Drop to a lower truncation order.
    pub fn truncated(&self, trunc: usize) -> TruncatedSeries {
        assert!(trunc >= 1 && trunc <= self.trunc);
        TruncatedSeries {
            rule: self.rule,
            trunc,
            total_degree: self.total_degree,
            orders: self.orders[..trunc].to_vec(),
        }
    }

    fn check_compatible(&self, other: &TruncatedSeries) -> Result<(), SeriesError> {
        if self.rule != other.rule || self.trunc != other.trunc {
            return Err(SeriesError::ParameterMismatch(
                format!("n={}, m={}, R={}", self.rule.n, self.rule.m, self.trunc),
                format!("n={}, m={}, R={}", other.rule.n, other.rule.m, other.trunc),
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "series(n={}, m={}, R={}, deg={})",
            self.rule.n, self.rule.m, self.trunc, self.total_degree
        )?;
        for (idx, class) in self.orders.iter().enumerate() {
            if !class.is_zero() {
                writeln!(f, "  x^{}: {:?}", idx + 1, class)?;
            }
        }
        Ok(())
    }
}

/// The circle product a o b: all single-slot substitutions of components of b
/// into components of a, with the slot sign fixed in the module docs.
/// Total degrees add and shift by m.
pub fn prelie_compose(
    a: &TruncatedSeries,
    b: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    a.check_compatible(b)?;
    let rule = a.rule();
    let trunc = a.truncation();
    let m = rule.m as i64;
    let out_degree = a.total_degree() + b.total_degree() + m;
    let mut out = TruncatedSeries::zero(rule, trunc, out_degree);
    for s in 1..=trunc {
        let a_s = a.order(s);
        if a_s.is_zero() {
            continue;
        }
        let p_deg = a_s.chain_degree() as i64;
        for t in 1..=trunc {
            let r_out = s + t - 1;
            if r_out > trunc {
                break;
            }
            let b_t = b.order(t);
            if b_t.is_zero() {
                continue;
            }
            let q_deg = b_t.chain_degree() as i64;
            let acc = &mut out.orders[r_out - 1];
            for i in 1..=s {
                // (-1)^{|p||q| + (t-1) m (|p| + i - 1)}
                let exponent = p_deg * q_deg + (t as i64 - 1) * m * (p_deg + i as i64 - 1);
                let slot_sign = if exponent % 2 == 0 { 1 } else { -1 };
                let composite = partial_composite(a_s.chain(), b_t.chain(), i)
                    .expect("slot within arity");
                // composites of representatives are representative-supported
                let mut reduced = coinvariant_reduce(&composite, rule.m);
                debug_assert_eq!(reduced.chain(), &composite, "composite left normal form");
                if slot_sign < 0 {
                    reduced = reduced.negated();
                }
                acc.add_assign(&reduced);
            }
        }
    }
    Ok(out)
}

/// The derivation attached to omega, applied to xi: xi o omega.
pub fn derivation_apply(
    xi: &TruncatedSeries,
    omega: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    prelie_compose(xi, omega)
}

/// Matrix of a slice map against ordered representative bases: column j is
/// the expansion of f(domain[j]).
pub fn slice_map_matrix(
    domain: &[BESimplex],
    codomain: &[BESimplex],
    mut f: impl FnMut(&BESimplex) -> CoinvariantClass,
) -> Result<IntMatrix, SeriesError> {
    let mut entries: Vec<(u32, u32, BigInt)> = Vec::new();
    for (j, s) in domain.iter().enumerate() {
        let image = f(s);
        for (row, coeff) in image.expand(codomain)? {
            entries.push((row, j as u32, coeff));
        }
    }
    Ok(IntMatrix::from_entries(
        codomain.len(),
        domain.len(),
        entries,
    ))
}

// --- serialization mirror ---------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    n: FiltrationIndex,
    m: u32,
    #[serde(rename = "R")]
    trunc: usize,
    total_degree: i64,
    orders: Vec<OrderJson>,
}

#[derive(Serialize, Deserialize)]
struct OrderJson {
    r: usize,
    chain_degree: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    simplex: String,
    coeff: String,
}

impl From<TruncatedSeries> for SeriesJson {
    fn from(s: TruncatedSeries) -> SeriesJson {
        let orders = (1..=s.trunc)
            .filter(|&r| !s.order(r).is_zero())
            .map(|r| {
                let class = s.order(r);
                OrderJson {
                    r,
                    chain_degree: class.chain_degree(),
                    terms: class
                        .terms()
                        .map(|(simplex, coeff)| TermJson {
                            simplex: simplex.encode(),
                            coeff: coeff.to_string(),
                        })
                        .collect(),
                }
            })
            .collect();
        SeriesJson {
            n: s.rule.n,
            m: s.rule.m,
            trunc: s.trunc,
            total_degree: s.total_degree,
            orders,
        }
    }
}

impl TryFrom<SeriesJson> for TruncatedSeries {
    type Error = SeriesError;

    fn try_from(j: SeriesJson) -> Result<TruncatedSeries, SeriesError> {
        if j.trunc < 1 {
            return Err(SeriesError::Malformed("R must be at least 1".into()));
        }
        let rule = DegreeRule::new(j.n, j.m);
        let mut out = TruncatedSeries::zero(rule, j.trunc, j.total_degree);
        for order in j.orders {
            if order.r < 1 || order.r > j.trunc {
                return Err(SeriesError::OrderOutOfRange(order.r, j.trunc));
            }
            let mut chain = BEChain::zero(order.r, order.chain_degree);
            for term in order.terms {
                let simplex = BESimplex::decode(&term.simplex)
                    .map_err(|e| SeriesError::Malformed(e.to_string()))?;
                if simplex.arity() != order.r || simplex.dim() != order.chain_degree {
                    return Err(SeriesError::Malformed(format!(
                        "term {} outside order-{} degree-{} slice",
                        term.simplex, order.r, order.chain_degree
                    )));
                }
                if !simplex.layer_perm(0).is_identity() {
                    return Err(SeriesError::Malformed(format!(
                        "term {} is not an orbit representative",
                        term.simplex
                    )));
                }
                let coeff: BigInt = term
                    .coeff
                    .parse()
                    .map_err(|_| SeriesError::Malformed(format!("bad coefficient {}", term.coeff)))?;
                chain.add_term(simplex, coeff);
            }
            out.set_order(order.r, CoinvariantClass { chain })?;
        }
        Ok(out)
    }
}
