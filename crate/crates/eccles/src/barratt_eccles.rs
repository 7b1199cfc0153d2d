//! The chain Barratt-Eccles operad and its complexity filtration: normalized
//! simplices of permutation tuples, the face differential, the free left
//! translation action, partial composites via shuffles, and filtered basis
//! enumeration with a disk cache.
//!
//! A nondegenerate k-simplex of arity r is a tuple (w_0, ..., w_k) of
//! permutations with adjacent entries distinct. The complexity of a simplex
//! at a letter pair i < j is the collapsed length of the restriction of its
//! layers to {i, j}; the n-th filtration stage keeps the simplices whose
//! complexity is at most n at every pair. Left translation is free and
//! preserves complexity, so every orbit has a unique representative whose
//! first layer is the identity; bases are enumerated and cached as those
//! representatives and expanded on demand.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symm::{self, PairOrder, Perm};
use crate::DEFINITION_VERSION;

#[derive(Debug, Error)]
pub enum BeError {
    #[error("degenerate word: layers {0} and {1} coincide")]
    Degenerate(usize, usize),
    #[error("layer {0} is not a permutation")]
    BadLayer(usize),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("slot {slot} out of range 1..={arity}")]
    SlotOutOfRange { slot: usize, arity: usize },
    #[error("letter pair ({0}, {1}) invalid")]
    BadPair(usize, usize),
    #[error("malformed cache entry: {0}")]
    MalformedCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Symm(#[from] symm::SymmError),
}

/// Filtration stage: a finite complexity bound, or the whole operad.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FiltrationIndex {
    Finite(u32),
    Infinite,
}

impl FiltrationIndex {
    fn bound(self) -> u32 {
        match self {
            FiltrationIndex::Finite(n) => n,
            FiltrationIndex::Infinite => u32::MAX,
        }
    }

    fn dir_name(self) -> String {
        match self {
            FiltrationIndex::Finite(n) => format!("E{n}"),
            FiltrationIndex::Infinite => "Einf".to_string(),
        }
    }
}

impl fmt::Display for FiltrationIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiltrationIndex::Finite(n) => write!(f, "{n}"),
            FiltrationIndex::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for FiltrationIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FiltrationIndex::Finite(n) => s.serialize_u32(*n),
            FiltrationIndex::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for FiltrationIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(FiltrationIndex::Finite(n)),
            Raw::Text(t) if t == "inf" => Ok(FiltrationIndex::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a filtration index or \"inf\", found {t:?}"
            ))),
        }
    }
}

/// Nondegenerate simplex: layers stored as one flat byte word, layer t at
/// `word[t*r .. (t+1)*r]`. Derived ordering is lexicographic on the flat
/// word, which is the global basis order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BESimplex {
    arity: u8,
    word: Vec<u8>,
}

impl BESimplex {
    pub fn from_layers(layers: &[Perm]) -> Result<Self, BeError> {
        assert!(!layers.is_empty(), "a simplex has at least one layer");
        let r = layers[0].arity();
        let mut word = Vec::with_capacity(r * layers.len());
        for (t, layer) in layers.iter().enumerate() {
            if layer.arity() != r {
                return Err(BeError::ArityMismatch(layer.arity(), r));
            }
            if t > 0 && layers[t - 1] == *layer {
                return Err(BeError::Degenerate(t - 1, t));
            }
            word.extend_from_slice(layer.images());
        }
        Ok(BESimplex {
            arity: r as u8,
            word,
        })
    }

    // Callers guarantee layer validity and nondegeneracy.
    fn from_flat_unchecked(arity: u8, word: Vec<u8>) -> Self {
        debug_assert_eq!(word.len() % arity as usize, 0);
        let s = BESimplex { arity, word };
        debug_assert!(
            (0..s.dim()).all(|t| s.layer(t) != s.layer(t + 1)),
            "degenerate simplex constructed"
        );
        s
    }

    pub fn vertex(p: &Perm) -> Self {
        BESimplex {
            arity: p.arity() as u8,
            word: p.images().to_vec(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn dim(&self) -> usize {
        self.word.len() / self.arity as usize - 1
    }

    pub fn layer(&self, t: usize) -> &[u8] {
        let r = self.arity as usize;
        &self.word[t * r..(t + 1) * r]
    }

    pub fn layer_perm(&self, t: usize) -> Perm {
        Perm::from_images(self.layer(t).to_vec()).expect("stored layer is a permutation")
    }

    pub fn layers(&self) -> Vec<Perm> {
        (0..=self.dim()).map(|t| self.layer_perm(t)).collect()
    }

    /// `"1 2 3|2 1 3"`: layers separated by `|`, letters by spaces.
    pub fn encode(&self) -> String {
        (0..=self.dim())
            .map(|t| {
                self.layer(t)
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn decode(s: &str) -> Result<Self, BeError> {
        let layers = s
            .split('|')
            .map(Perm::parse_one_line)
            .collect::<Result<Vec<_>, _>>()?;
        if layers.is_empty() {
            return Err(BeError::MalformedCache(s.to_string()));
        }
        BESimplex::from_layers(&layers)
    }
}

impl fmt::Debug for BESimplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.encode())
    }
}

impl fmt::Display for BESimplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.encode())
    }
}

/// Z-linear combination of equidimensional simplices of one arity. The ring
/// quotient (for F_p work) is applied downstream when matrices are built.
#[derive(Clone, PartialEq, Eq)]
pub struct BEChain {
    arity: usize,
    dim: usize,
    terms: std::collections::BTreeMap<BESimplex, BigInt>,
}

impl BEChain {
    pub fn zero(arity: usize, dim: usize) -> Self {
        BEChain {
            arity,
            dim,
            terms: Default::default(),
        }
    }

    pub fn from_simplex(s: BESimplex) -> Self {
        let mut c = BEChain::zero(s.arity(), s.dim());
        c.add_term(s, BigInt::from(1));
        c
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BESimplex, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, s: &BESimplex) -> BigInt {
        self.terms.get(s).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn add_term(&mut self, s: BESimplex, c: BigInt) {
        debug_assert_eq!(s.arity(), self.arity);
        debug_assert_eq!(s.dim(), self.dim);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(s) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &BEChain) {
        assert_eq!(self.arity, other.arity);
        assert_eq!(self.dim, other.dim);
        for (s, c) in &other.terms {
            self.add_term(s.clone(), c.clone());
        }
    }

    pub fn scale(&mut self, c: &BigInt) {
        if c.is_zero() {
            self.terms.clear();
            return;
        }
        for v in self.terms.values_mut() {
            *v *= c;
        }
    }

    pub fn negated(&self) -> BEChain {
        let mut out = self.clone();
        out.scale(&BigInt::from(-1));
        out
    }
}

impl fmt::Debug for BEChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(s, c)| format!("{c}*[{}]", s.encode()))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Alternating face sum; degenerate faces (equal new neighbours) are dropped.
/// Dimension 0 maps to zero.
pub fn differential(x: &BEChain) -> BEChain {
    let r = x.arity();
    let k = x.dim();
    if k == 0 {
        return BEChain::zero(r, 0);
    }
    let mut out = BEChain::zero(r, k - 1);
    for (s, c) in x.terms() {
        for t in 0..=k {
            // dropping layer t makes old layers t-1 and t+1 adjacent
            if t > 0 && t < k && s.layer(t - 1) == s.layer(t + 1) {
                continue;
            }
            let mut word = Vec::with_capacity(r * k);
            word.extend_from_slice(&s.word[..t * r]);
            word.extend_from_slice(&s.word[(t + 1) * r..]);
            let face = BESimplex::from_flat_unchecked(s.arity, word);
            let sign = if t % 2 == 0 { c.clone() } else { -c.clone() };
            out.add_term(face, sign);
        }
    }
    out
}

pub fn translate_simplex(sigma: &Perm, s: &BESimplex) -> BESimplex {
    assert_eq!(sigma.arity(), s.arity(), "translation arity mismatch");
    let images = sigma.images();
    let word = s.word.iter().map(|&v| images[v as usize - 1]).collect();
    BESimplex::from_flat_unchecked(s.arity, word)
}

/// Left translation: relabel every layer by sigma. Free, degree preserving,
/// commutes with the differential.
pub fn translate(sigma: &Perm, x: &BEChain) -> Result<BEChain, BeError> {
    if sigma.arity() != x.arity() {
        return Err(BeError::ArityMismatch(sigma.arity(), x.arity()));
    }
    let mut out = BEChain::zero(x.arity(), x.dim());
    for (s, c) in x.terms() {
        out.add_term(translate_simplex(sigma, s), c.clone());
    }
    Ok(out)
}

/// The unique factorization x = sigma . rep with rep's first layer the
/// identity. rep is the lexicographically least element of the orbit.
pub fn canonical_translate(s: &BESimplex) -> (Perm, BESimplex) {
    let sigma = s.layer_perm(0);
    if sigma.is_identity() {
        return (sigma, s.clone());
    }
    let rep = translate_simplex(&sigma.inverse(), s);
    (sigma, rep)
}

/// Collapsed length of the restriction of the layer sequence to {i, j}.
pub fn complexity(s: &BESimplex, i: usize, j: usize) -> Result<usize, BeError> {
    if i == 0 || i >= j || j > s.arity() {
        return Err(BeError::BadPair(i, j));
    }
    let mut len = 1usize;
    let mut last = restrict_layer(s.layer(0), i, j);
    for t in 1..=s.dim() {
        let cur = restrict_layer(s.layer(t), i, j);
        if cur != last {
            len += 1;
            last = cur;
        }
    }
    Ok(len)
}

fn restrict_layer(layer: &[u8], i: usize, j: usize) -> PairOrder {
    for &v in layer {
        if v as usize == i {
            return PairOrder::Straight;
        }
        if v as usize == j {
            return PairOrder::Reversed;
        }
    }
    unreachable!("letters {i}, {j} missing from layer")
}

/// True iff every pair complexity is at most n.
pub fn in_filtration(s: &BESimplex, n: FiltrationIndex) -> bool {
    let bound = n.bound();
    if bound == u32::MAX {
        return true;
    }
    let r = s.arity();
    for i in 1..r {
        for j in i + 1..=r {
            if complexity(s, i, j).expect("valid pair") as u32 > bound {
                return false;
            }
        }
    }
    true
}

/// Chain-level partial composite: Eilenberg-Zilber shuffles of the two layer
/// sequences, block substitution layerwise, shuffle signature as sign.
pub fn partial_composite(a: &BEChain, b: &BEChain, slot: usize) -> Result<BEChain, BeError> {
    let r = a.arity();
    let s = b.arity();
    if slot == 0 || slot > r {
        return Err(BeError::SlotOutOfRange { slot, arity: r });
    }
    let p = a.dim();
    let q = b.dim();
    let mut out = BEChain::zero(r + s - 1, p + q);
    for (sa, ca) in a.terms() {
        for (sb, cb) in b.terms() {
            let coeff = ca * cb;
            staircases(sa, sb, slot, |simplex, sign| {
                let signed = if sign > 0 { coeff.clone() } else { -&coeff };
                out.add_term(simplex, signed);
            });
        }
    }
    Ok(out)
}

// Enumerate the (p,q)-shuffle staircases of u and v at the given slot.
// u and v nondegenerate implies every staircase is nondegenerate: block
// substitution is injective in each argument separately.
fn staircases(u: &BESimplex, v: &BESimplex, slot: usize, mut emit: impl FnMut(BESimplex, i32)) {
    let p = u.dim();
    let q = v.dim();
    let out_arity = (u.arity() + v.arity() - 1) as u8;
    // table[a][b] = word of block_substitute(u_a, v_b, slot)
    let table: Vec<Vec<Vec<u8>>> = (0..=p)
        .map(|a| {
            let ua = u.layer_perm(a);
            (0..=q)
                .map(|b| {
                    let vb = v.layer_perm(b);
                    symm::block_substitute(&ua, &vb, slot)
                        .expect("slot validated")
                        .images()
                        .to_vec()
                })
                .collect()
        })
        .collect();
    let mut word: Vec<u8> = Vec::with_capacity(out_arity as usize * (p + q + 1));
    word.extend_from_slice(&table[0][0]);
    walk(&table, p, q, 0, 0, 0, &mut word, &mut emit, out_arity);
}

#[allow(clippy::too_many_arguments)]
fn walk(
    table: &[Vec<Vec<u8>>],
    p: usize,
    q: usize,
    a: usize,
    b: usize,
    inversions: usize,
    word: &mut Vec<u8>,
    emit: &mut impl FnMut(BESimplex, i32),
    out_arity: u8,
) {
    if a == p && b == q {
        let sign = if inversions % 2 == 0 { 1 } else { -1 };
        emit(
            BESimplex::from_flat_unchecked(out_arity, word.clone()),
            sign,
        );
        return;
    }
    if a < p {
        word.extend_from_slice(&table[a + 1][b]);
        walk(table, p, q, a + 1, b, inversions, word, emit, out_arity);
        word.truncate(word.len() - out_arity as usize);
    }
    if b < q {
        // a v-step jumps over the remaining u-steps
        word.extend_from_slice(&table[a][b + 1]);
        walk(
            table,
            p,
            q,
            a,
            b + 1,
            inversions + (p - a),
            word,
            emit,
            out_arity,
        );
        word.truncate(word.len() - out_arity as usize);
    }
}

// ---------------------------------------------------------------------------
// Basis enumeration
// ---------------------------------------------------------------------------

const MAX_ENUM_ARITY: usize = 8;

struct EnumTables {
    perms: Vec<Perm>,
    // bit per letter pair (i-major order), set iff the pair reads reversed
    masks: Vec<u32>,
    npairs: usize,
}

fn enum_tables(r: usize) -> EnumTables {
    assert!(
        (1..=MAX_ENUM_ARITY).contains(&r),
        "basis enumeration supports arity 1..={MAX_ENUM_ARITY}"
    );
    let perms = symm::all_perms(r);
    let npairs = r * (r - 1) / 2;
    let masks = perms
        .iter()
        .map(|w| {
            let mut mask = 0u32;
            let mut bit = 0;
            for i in 1..r {
                for j in i + 1..=r {
                    if symm::restrict_pair(w, i, j).unwrap() == PairOrder::Reversed {
                        mask |= 1 << bit;
                    }
                    bit += 1;
                }
            }
            mask
        })
        .collect();
    EnumTables {
        perms,
        masks,
        npairs,
    }
}

/// Visit the orbit representatives (first layer = identity) of the dimension
/// k basis of the n-th filtration stage at arity r, in lexicographic order,
/// without materializing the list.
pub fn for_each_representative(
    n: FiltrationIndex,
    r: usize,
    k: usize,
    mut visit: impl FnMut(&BESimplex),
) {
    let tables = enum_tables(r);
    let bound = n.bound();
    if bound < 1 {
        return;
    }
    let mut layers: Vec<usize> = vec![0]; // identity is lex-first
    let mut counts: Vec<u32> = vec![1; tables.npairs];
    rec_enumerate(&tables, bound, k, &mut layers, &mut counts, &mut visit);
}

fn rec_enumerate(
    tables: &EnumTables,
    bound: u32,
    k: usize,
    layers: &mut Vec<usize>,
    counts: &mut [u32],
    visit: &mut impl FnMut(&BESimplex),
) {
    let depth = layers.len() - 1;
    if depth == k {
        let r = tables.perms[0].arity();
        let mut word = Vec::with_capacity(r * (k + 1));
        for &idx in layers.iter() {
            word.extend_from_slice(tables.perms[idx].images());
        }
        let s = BESimplex::from_flat_unchecked(r as u8, word);
        visit(&s);
        return;
    }
    let cur = *layers.last().unwrap();
    let cur_mask = tables.masks[cur];
    'cand: for cand in 0..tables.perms.len() {
        if cand == cur {
            continue;
        }
        let mut diff = tables.masks[cand] ^ cur_mask;
        if bound != u32::MAX {
            let mut probe = diff;
            while probe != 0 {
                let bit = probe.trailing_zeros() as usize;
                if counts[bit] + 1 > bound {
                    continue 'cand;
                }
                probe &= probe - 1;
            }
        }
        // apply
        let mut applied = diff;
        while applied != 0 {
            let bit = applied.trailing_zeros() as usize;
            counts[bit] += 1;
            applied &= applied - 1;
        }
        layers.push(cand);
        rec_enumerate(tables, bound, k, layers, counts, visit);
        layers.pop();
        while diff != 0 {
            let bit = diff.trailing_zeros() as usize;
            counts[bit] -= 1;
            diff &= diff - 1;
        }
    }
}

fn enumerate_representatives(n: FiltrationIndex, r: usize, k: usize) -> Vec<BESimplex> {
    let mut out = Vec::new();
    for_each_representative(n, r, k, |s| out.push(s.clone()));
    debug_assert!(out.windows(2).all(|w| w[0] < w[1]), "not in lex order");
    out
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Default)]
struct Manifest {
    version: u32,
    // key "E{n}/r{r}" -> observed dimension data
    slices: std::collections::BTreeMap<String, SliceInfo>,
}

#[derive(Serialize, Deserialize, Default, Clone)]
struct SliceInfo {
    // largest k seen with a nonempty basis
    top_nonempty: Option<u32>,
    // smallest k seen with an empty basis
    first_empty: Option<u32>,
}

/// Memoizing basis provider with an optional on-disk cache.
///
/// Disk layout: `<root>/E{n}/r{r}/k{k}`, a text file whose first line is
/// `eccles-basis v<version> n=<n> r=<r> k=<k> count=<count>` followed by one
/// orbit representative per line. Full bases are reconstructed as the r!
/// left translates of the representatives. `<root>/manifest.json` records
/// observed top dimensions per (n, r).
pub struct BasisStore {
    root: Option<PathBuf>,
    reps: Mutex<HashMap<(FiltrationIndex, usize, usize), Arc<Vec<BESimplex>>>>,
    full: Mutex<HashMap<(FiltrationIndex, usize, usize), Arc<Vec<BESimplex>>>>,
}

impl BasisStore {
    pub fn new(cache_root: Option<PathBuf>) -> Self {
        BasisStore {
            root: cache_root,
            reps: Mutex::new(HashMap::new()),
            full: Mutex::new(HashMap::new()),
        }
    }

    pub fn in_memory() -> Self {
        BasisStore::new(None)
    }

    pub fn cache_root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    /// Orbit representatives (first layer = identity) of basis(n, r, k), in
    /// lexicographic order.
    pub fn representatives(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
    ) -> Result<Arc<Vec<BESimplex>>, BeError> {
        let key = (n, r, k);
        if let Some(hit) = self.reps.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        if let Some(found) = self.read_cached(n, r, k)? {
            let arc = Arc::new(found);
            self.reps.lock().unwrap().insert(key, arc.clone());
            return Ok(arc);
        }
        let computed = enumerate_representatives(n, r, k);
        if self.root.is_some() {
            self.write_cached(n, r, k, &computed)?;
        }
        let arc = Arc::new(computed);
        self.reps.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    /// The full ordered basis: all r! translates of every representative,
    /// in global lexicographic order.
    pub fn basis(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
    ) -> Result<Arc<Vec<BESimplex>>, BeError> {
        let key = (n, r, k);
        if let Some(hit) = self.full.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let reps = self.representatives(n, r, k)?;
        let perms = symm::all_perms(r);
        let mut out = Vec::with_capacity(reps.len() * perms.len());
        for sigma in &perms {
            for rep in reps.iter() {
                out.push(translate_simplex(sigma, rep));
            }
        }
        out.sort();
        debug_assert!(out.windows(2).all(|w| w[0] < w[1]), "orbits overlap");
        let arc = Arc::new(out);
        self.full.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    /// Index of a representative within `representatives(n, r, k)`.
    pub fn representative_index(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
        s: &BESimplex,
    ) -> Result<Option<usize>, BeError> {
        let reps = self.representatives(n, r, k)?;
        Ok(reps.binary_search(s).ok())
    }

    fn slice_path(&self, n: FiltrationIndex, r: usize, k: usize) -> Option<PathBuf> {
        self.root
            .as_ref()
            .map(|root| root.join(n.dir_name()).join(format!("r{r}")).join(format!("k{k}")))
    }

    fn read_cached(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
    ) -> Result<Option<Vec<BESimplex>>, BeError> {
        let Some(path) = self.slice_path(n, r, k) else {
            return Ok(None);
        };
        if !path.exists() {
            return Ok(None);
        }
        match parse_cache_file(&path, n, r, k) {
            Ok(list) => Ok(Some(list)),
            // stale or corrupt entries are recomputed, never trusted
            Err(_) => Ok(None),
        }
    }

    fn write_cached(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
        list: &[BESimplex],
    ) -> Result<(), BeError> {
        let Some(path) = self.slice_path(n, r, k) else {
            return Ok(());
        };
        let dir = path.parent().expect("slice path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(
                f,
                "eccles-basis v{DEFINITION_VERSION} n={n} r={r} k={k} count={}",
                list.len()
            )?;
            for s in list {
                writeln!(f, "{}", s.encode())?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        self.update_manifest(n, r, k, !list.is_empty())?;
        Ok(())
    }

    fn update_manifest(
        &self,
        n: FiltrationIndex,
        r: usize,
        k: usize,
        nonempty: bool,
    ) -> Result<(), BeError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let path = root.join("manifest.json");
        let mut manifest: Manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Manifest::default(),
        };
        manifest.version = DEFINITION_VERSION;
        let key = format!("{}/r{r}", n.dir_name());
        let info = manifest.slices.entry(key).or_default();
        let k = k as u32;
        if nonempty {
            info.top_nonempty = Some(info.top_nonempty.map_or(k, |t| t.max(k)));
        } else {
            info.first_empty = Some(info.first_empty.map_or(k, |t| t.min(k)));
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&manifest).expect("serializable"))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn parse_cache_file(
    path: &Path,
    n: FiltrationIndex,
    r: usize,
    k: usize,
) -> Result<Vec<BESimplex>, BeError> {
    let f = fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .ok_or_else(|| BeError::MalformedCache("empty file".into()))??;
    let expected = format!("eccles-basis v{DEFINITION_VERSION} n={n} r={r} k={k} count=");
    let count: usize = header
        .strip_prefix(&expected)
        .and_then(|rest| rest.parse().ok())
        .ok_or_else(|| BeError::MalformedCache(format!("bad header: {header}")))?;
    let mut out = Vec::with_capacity(count);
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let s = BESimplex::decode(&line)?;
        if s.arity() != r || s.dim() != k {
            return Err(BeError::MalformedCache(format!("wrong shape: {line}")));
        }
        out.push(s);
    }
    if out.len() != count {
        return Err(BeError::MalformedCache(format!(
            "expected {count} entries, found {}",
            out.len()
        )));
    }
    if !out.windows(2).all(|w| w[0] < w[1]) {
        return Err(BeError::MalformedCache("entries out of order".into()));
    }
    Ok(out)
}
