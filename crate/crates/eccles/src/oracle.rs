//! Slow reference implementations used as ground truth by the test and
//! acceptance suites. Everything here recomputes results from first
//! principles — brute-force word enumeration, exhaustive orbit search, a
//! textbook dense Smith reduction over machine integers — sharing only the
//! permutation layer and the simplex data type with the main code paths, so
//! an agreement between the two is meaningful evidence.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::barratt_eccles::{
    differential, in_filtration, partial_composite, translate, BEChain, BESimplex, BasisStore,
    FiltrationIndex,
};
use crate::power_series::coinvariant_reduce;
use crate::symm::{all_perms, block_substitute, compose, restrict_pair, sign, PairOrder, Perm};

/// Outcome of one audit, with a witness string when it fails.
#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub name: String,
    pub ok: bool,
    pub witness: Option<String>,
}

impl OracleCheck {
    fn pass(name: &str) -> Self {
        OracleCheck {
            name: name.to_string(),
            ok: true,
            witness: None,
        }
    }

    fn fail(name: &str, witness: String) -> Self {
        OracleCheck {
            name: name.to_string(),
            ok: false,
            witness: Some(witness),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

// ---------------------------------------------------------------------------
// Independent coinvariant reduction
// ---------------------------------------------------------------------------

/// Reduce a chain onto identity-first representatives by exhaustive orbit
/// search: for each term, try every permutation until the translate with
/// identity bottom layer appears, and weight by that permutation's sign to
/// the twist power. Must agree with the main reduction.
pub fn orbit_sum_reduce(x: &BEChain, m: u32) -> BEChain {
    let r = x.arity();
    let perms = all_perms(r);
    let mut out = BEChain::zero(r, x.dim());
    for (s, c) in x.terms() {
        let layers = s.layers();
        let mut hit = false;
        for sigma in &perms {
            let moved: Vec<Perm> = layers
                .iter()
                .map(|w| compose(sigma, w).expect("arities agree"))
                .collect();
            if !moved[0].is_identity() {
                continue;
            }
            let rep = BESimplex::from_layers(&moved).expect("translation keeps nondegeneracy");
            let mut coeff = c.clone();
            if m % 2 == 1 && sign(sigma) < 0 {
                coeff = -coeff;
            }
            out.add_term(rep, coeff);
            hit = true;
            break;
        }
        assert!(hit, "free action must reach an identity-first translate");
    }
    out
}

// ---------------------------------------------------------------------------
// Independent slice enumeration and homology
// ---------------------------------------------------------------------------

// Collapsed length of the (i, j)-restriction of a word, recomputed from the
// pair orders directly. `i < j` are letters.
fn word_pair_complexity(word: &[Perm], i: usize, j: usize) -> usize {
    let mut len = 0usize;
    let mut last: Option<PairOrder> = None;
    for w in word {
        let o = restrict_pair(w, i, j).expect("valid pair");
        if last != Some(o) {
            len += 1;
            last = Some(o);
        }
    }
    len
}

// Complexity bound check; `bound = u32::MAX` means the whole operad.
fn word_in_stage(word: &[Perm], bound: u32) -> bool {
    if bound == u32::MAX {
        return true;
    }
    let r = word[0].arity();
    for i in 1..r {
        for j in (i + 1)..=r {
            if word_pair_complexity(word, i, j) > bound as usize {
                return false;
            }
        }
    }
    true
}

/// All nondegenerate dimension-k words of the given stage and arity, by
/// brute-force extension of shorter words.
pub fn brute_force_words(bound: u32, r: usize, k: usize) -> Vec<Vec<Perm>> {
    let perms = all_perms(r);
    let mut words: Vec<Vec<Perm>> = perms
        .iter()
        .filter(|p| word_in_stage(std::slice::from_ref(*p), bound))
        .map(|p| vec![p.clone()])
        .collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for word in &words {
            for p in &perms {
                if p == word.last().unwrap() {
                    continue;
                }
                let mut longer = word.clone();
                longer.push(p.clone());
                if word_in_stage(&longer, bound) {
                    next.push(longer);
                }
            }
        }
        words = next;
    }
    words
}

/// The brute-force identity-first orbit representatives of a slice, in the
/// global basis order (lexicographic on the flat word).
pub fn brute_force_representatives(bound: u32, r: usize, k: usize) -> Vec<BESimplex> {
    let mut reps: Vec<BESimplex> = brute_force_words(bound, r, k)
        .into_iter()
        .filter(|w| w[0].is_identity())
        .map(|w| BESimplex::from_layers(&w).expect("nondegenerate by construction"))
        .collect();
    reps.sort();
    reps
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceHomology {
    pub degree: usize,
    pub rank: usize,
    pub torsion: Vec<i128>,
}

/// Integral homology of the full (untwisted, non-coinvariant) arity slice of
/// the given stage, from first principles: brute-force bases, the face sum
/// with alternating signs, and a local dense Smith reduction.
pub fn slice_homology(bound: u32, r: usize) -> Vec<SliceHomology> {
    // enumerate until the first empty dimension; extensions of nothing stay
    // empty, so the complex vanishes above it
    let mut bases: Vec<Vec<Vec<Perm>>> = Vec::new();
    loop {
        let words = brute_force_words(bound, r, bases.len());
        if words.is_empty() {
            break;
        }
        bases.push(words);
    }
    let top = bases.len();
    let index: Vec<BTreeMap<Vec<Perm>, usize>> = bases
        .iter()
        .map(|b| b.iter().cloned().zip(0usize..).collect())
        .collect();
    // boundary[k]: dimension k -> k-1, dense; entry 0 is an unused stub
    let mut boundary: Vec<Vec<Vec<i128>>> = vec![Vec::new()];
    for k in 1..top {
        let rows = bases[k - 1].len();
        let cols = bases[k].len();
        let mut mat = vec![vec![0i128; cols]; rows];
        for (j, word) in bases[k].iter().enumerate() {
            let mut s: i128 = 1;
            for t in 0..=k {
                let mut face: Vec<Perm> = word.clone();
                face.remove(t);
                let degenerate = (1..face.len()).any(|u| face[u - 1] == face[u]);
                if !degenerate {
                    // faces only lose pair-order changes, so they stay in
                    // the stage and are present in the lower basis
                    let i = index[k - 1][&face];
                    mat[i][j] += s;
                }
                s = -s;
            }
        }
        boundary.push(mat);
    }
    let mut out = Vec::new();
    for k in 0..top {
        let dim = bases[k].len();
        let rank_out = if k == 0 { 0 } else { dense_rank(&boundary[k]) };
        let (rank_in, torsion) = if k + 1 < top {
            let diag = dense_smith_diagonal(&boundary[k + 1]);
            let rank = diag.iter().filter(|d| **d != 0).count();
            (rank, diag.into_iter().filter(|d| d.abs() > 1).collect())
        } else {
            (0, Vec::new())
        };
        out.push(SliceHomology {
            degree: k,
            rank: dim - rank_out - rank_in,
            torsion,
        });
    }
    out
}

// Textbook dense Smith reduction over i128; returns the diagonal, entries
// nonnegative and each dividing the next.
fn dense_smith_diagonal(m: &[Vec<i128>]) -> Vec<i128> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut t = 0usize;
    'outer: while t < rows.min(cols) {
        // smallest nonzero magnitude in the remaining block
        let mut best: Option<(i128, usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 {
                    let mag = a[i][j].abs();
                    if best.map_or(true, |(b, _, _)| mag < b) {
                        best = Some((mag, i, j));
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else { break };
        a.swap(t, pi);
        for row in &mut a {
            row.swap(t, pj);
        }
        let mut dirty = false;
        for i in t + 1..rows {
            if a[i][t] != 0 {
                let q = a[i][t].div_euclid(a[t][t]);
                for j in t..cols {
                    let sub = q.checked_mul(a[t][j]).expect("oracle entry overflow");
                    a[i][j] -= sub;
                }
                if a[i][t] != 0 {
                    dirty = true;
                }
            }
        }
        for j in t + 1..cols {
            if a[t][j] != 0 {
                let q = a[t][j].div_euclid(a[t][t]);
                for row in a.iter_mut() {
                    let sub = q.checked_mul(row[t]).expect("oracle entry overflow");
                    row[j] -= sub;
                }
                if a[t][j] != 0 {
                    dirty = true;
                }
            }
        }
        if dirty {
            continue 'outer;
        }
        for i in t + 1..rows {
            for j in t + 1..cols {
                if a[i][j] % a[t][t] != 0 {
                    // fold the offending row into the pivot row and redo
                    for u in t..cols {
                        let add = a[i][u];
                        a[t][u] += add;
                    }
                    continue 'outer;
                }
            }
        }
        if a[t][t] < 0 {
            for j in t..cols {
                a[t][j] = -a[t][j];
            }
        }
        t += 1;
    }
    (0..rows.min(cols)).map(|i| a[i][i]).collect()
}

fn dense_rank(m: &[Vec<i128>]) -> usize {
    dense_smith_diagonal(m).iter().filter(|d| **d != 0).count()
}

// ---------------------------------------------------------------------------
// Axiom audits of the main implementations
// ---------------------------------------------------------------------------

/// Substitution associativity on permutations: the nested and sequential
/// laws, exhaustive up to the given arity.
pub fn audit_substitution_associativity(max_arity: usize) -> OracleCheck {
    let name = "substitution-associativity";
    for r in 1..=max_arity {
        for s in 1..=max_arity {
            for t in 1..=max_arity {
                for u in all_perms(r) {
                    for v in all_perms(s) {
                        for w in all_perms(t) {
                            // nested: (u o_i v) o_{i-1+j} w = u o_i (v o_j w)
                            for i in 1..=r {
                                for j in 1..=s {
                                    let lhs = block_substitute(
                                        &block_substitute(&u, &v, i).unwrap(),
                                        &w,
                                        i - 1 + j,
                                    )
                                    .unwrap();
                                    let rhs = block_substitute(
                                        &u,
                                        &block_substitute(&v, &w, j).unwrap(),
                                        i,
                                    )
                                    .unwrap();
                                    if lhs != rhs {
                                        return OracleCheck::fail(
                                            name,
                                            format!(
                                                "nested law at u={} v={} w={} i={i} j={j}",
                                                u.one_line(),
                                                v.one_line(),
                                                w.one_line()
                                            ),
                                        );
                                    }
                                }
                            }
                            // sequential: disjoint letters i < j of u
                            for i in 1..=r {
                                for j in (i + 1)..=r {
                                    let lhs = block_substitute(
                                        &block_substitute(&u, &v, i).unwrap(),
                                        &w,
                                        j + s - 1,
                                    )
                                    .unwrap();
                                    let rhs = block_substitute(
                                        &block_substitute(&u, &w, j).unwrap(),
                                        &v,
                                        i,
                                    )
                                    .unwrap();
                                    if lhs != rhs {
                                        return OracleCheck::fail(
                                            name,
                                            format!(
                                                "sequential law at u={} v={} w={} i={i} j={j}",
                                                u.one_line(),
                                                v.one_line(),
                                                w.one_line()
                                            ),
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// Composites intertwine translations:
/// `translate(s, a) o_i translate(t, b) = translate(rho, a o_j b)` with
/// `j = s^{-1}(i)` and `rho = (s o_i id) . (id o_j t)`. Exhaustive over the
/// acting permutations, on a deterministic thinning of the brute-force
/// words of the full operad.
pub fn audit_equivariance(max_arity: usize, max_total_dim: usize) -> OracleCheck {
    let name = "composite-equivariance";
    for r in 2..=max_arity {
        for s in 1..=max_arity {
            for ka in 0..=max_total_dim {
                for kb in 0..=(max_total_dim - ka) {
                    let aws = brute_force_words(u32::MAX, r, ka);
                    let bws = brute_force_words(u32::MAX, s, kb);
                    if aws.is_empty() || bws.is_empty() {
                        continue;
                    }
                    for aw in aws.iter().step_by(aws.len().div_ceil(4)) {
                        for bw in bws.iter().step_by(bws.len().div_ceil(4)) {
                            let a = BEChain::from_simplex(BESimplex::from_layers(aw).unwrap());
                            let b = BEChain::from_simplex(BESimplex::from_layers(bw).unwrap());
                            for sigma in all_perms(r) {
                                for tau in all_perms(s) {
                                    for i in 1..=r {
                                        let lhs = partial_composite(
                                            &translate(&sigma, &a).unwrap(),
                                            &translate(&tau, &b).unwrap(),
                                            i,
                                        )
                                        .unwrap();
                                        let j = sigma.inverse().apply(i);
                                        let rho = compose(
                                            &block_substitute(&sigma, &Perm::identity(s), i)
                                                .unwrap(),
                                            &block_substitute(&Perm::identity(r), &tau, j)
                                                .unwrap(),
                                        )
                                        .unwrap();
                                        let rhs = translate(
                                            &rho,
                                            &partial_composite(&a, &b, j).unwrap(),
                                        )
                                        .unwrap();
                                        if lhs != rhs {
                                            return OracleCheck::fail(
                                                name,
                                                format!(
                                                    "a={:?} b={:?} sigma={} tau={} i={i}",
                                                    a,
                                                    b,
                                                    sigma.one_line(),
                                                    tau.one_line()
                                                ),
                                            );
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// Boundary of a composite:
/// `d(a o_i b) = da o_i b + (-1)^{dim a} a o_i db`.
pub fn audit_leibniz(max_arity: usize, max_total_dim: usize) -> OracleCheck {
    let name = "composite-leibniz";
    for r in 1..=max_arity {
        for s in 1..=max_arity {
            for ka in 0..=max_total_dim {
                for kb in 0..=(max_total_dim - ka) {
                    let aws = brute_force_words(u32::MAX, r, ka);
                    let bws = brute_force_words(u32::MAX, s, kb);
                    if aws.is_empty() || bws.is_empty() {
                        continue;
                    }
                    for aw in aws.iter().step_by(aws.len().div_ceil(5)) {
                        for bw in bws.iter().step_by(bws.len().div_ceil(5)) {
                            let a = BEChain::from_simplex(BESimplex::from_layers(aw).unwrap());
                            let b = BEChain::from_simplex(BESimplex::from_layers(bw).unwrap());
                            for i in 1..=r {
                                let comp = partial_composite(&a, &b, i).unwrap();
                                let lhs = differential(&comp);
                                let total = ka + kb;
                                let mut rhs =
                                    BEChain::zero(r + s - 1, total.saturating_sub(1));
                                if ka > 0 {
                                    rhs.add_assign(
                                        &partial_composite(&differential(&a), &b, i).unwrap(),
                                    );
                                }
                                if kb > 0 {
                                    let mut adb =
                                        partial_composite(&a, &differential(&b), i).unwrap();
                                    if ka % 2 == 1 {
                                        adb = adb.negated();
                                    }
                                    rhs.add_assign(&adb);
                                }
                                if lhs != rhs {
                                    return OracleCheck::fail(
                                        name,
                                        format!("a={:?} b={:?} i={i}", a, b),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// `d o d = 0` on every brute-force word in the given ranges.
pub fn audit_boundary_squares_to_zero(
    bound: u32,
    max_arity: usize,
    max_dim: usize,
) -> OracleCheck {
    let name = "boundary-squares-to-zero";
    for r in 1..=max_arity {
        for k in 2..=max_dim {
            for word in brute_force_words(bound, r, k) {
                let s = BESimplex::from_layers(&word).unwrap();
                let dd = differential(&differential(&BEChain::from_simplex(s.clone())));
                if !dd.is_zero() {
                    return OracleCheck::fail(name, s.encode());
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// Vertex composites follow the bare substitution table: a single simplex
/// with coefficient one.
pub fn audit_vertex_composition_table(max_arity: usize) -> OracleCheck {
    let name = "vertex-composition-table";
    for r in 1..=max_arity {
        for s in 1..=max_arity {
            for u in all_perms(r) {
                for v in all_perms(s) {
                    for i in 1..=r {
                        let a = BEChain::from_simplex(BESimplex::vertex(&u));
                        let b = BEChain::from_simplex(BESimplex::vertex(&v));
                        let comp = partial_composite(&a, &b, i).unwrap();
                        let expected = BESimplex::vertex(&block_substitute(&u, &v, i).unwrap());
                        let ok = comp.len() == 1
                            && comp.coefficient(&expected) == BigInt::from(1)
                            && comp.dim() == 0;
                        if !ok {
                            return OracleCheck::fail(
                                name,
                                format!("u={} v={} i={i}", u.one_line(), v.one_line()),
                            );
                        }
                    }
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// The main enumeration must produce exactly the brute-force identity-first
/// words, in the same order, and every one must satisfy the stage bound.
pub fn audit_enumeration(
    store: &BasisStore,
    max_stage: u32,
    max_arity: usize,
    max_dim: usize,
) -> OracleCheck {
    let name = "representative-enumeration";
    for n in 1..=max_stage {
        for r in 1..=max_arity {
            for k in 0..=max_dim {
                let brute = brute_force_representatives(n, r, k);
                let main = match store.representatives(FiltrationIndex::Finite(n), r, k) {
                    Ok(v) => v,
                    Err(e) => return OracleCheck::fail(name, format!("store error: {e}")),
                };
                if brute.len() != main.len()
                    || brute.iter().zip(main.iter()).any(|(a, b)| a != b)
                {
                    return OracleCheck::fail(
                        name,
                        format!(
                            "stage {n} arity {r} dimension {k}: {} vs {}",
                            brute.len(),
                            main.len()
                        ),
                    );
                }
                if main
                    .iter()
                    .any(|s| !in_filtration(s, FiltrationIndex::Finite(n)))
                {
                    return OracleCheck::fail(name, format!("stage {n} leak at r={r} k={k}"));
                }
            }
        }
    }
    OracleCheck::pass(name)
}

/// The main twisted reduction against the exhaustive orbit search, on random
/// chains for both twist parities.
pub fn audit_reduction(samples: usize, seed: u64) -> OracleCheck {
    use rand::{Rng, SeedableRng};
    let name = "twisted-orbit-reduction";
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut word_cache: BTreeMap<(usize, usize), Vec<Vec<Perm>>> = BTreeMap::new();
    for trial in 0..samples {
        let r = rng.gen_range(2..=4usize);
        let k = rng.gen_range(0..=2usize);
        let words = word_cache
            .entry((r, k))
            .or_insert_with(|| brute_force_words(u32::MAX, r, k));
        let mut x = BEChain::zero(r, k);
        for _ in 0..rng.gen_range(1..=4usize) {
            let w = &words[rng.gen_range(0..words.len())];
            let c = BigInt::from(rng.gen_range(-3i64..=3));
            x.add_term(BESimplex::from_layers(w).unwrap(), c);
        }
        for m in [1u32, 2] {
            let main = coinvariant_reduce(&x, m);
            let slow = orbit_sum_reduce(&x, m);
            if main.chain() != &slow {
                return OracleCheck::fail(
                    name,
                    format!("trial {trial}, twist {m}, chain {:?}", x),
                );
            }
        }
    }
    OracleCheck::pass(name)
}

/// Run every audit at its default size.
pub fn run_audits(store: &BasisStore) -> OracleReport {
    OracleReport {
        checks: vec![
            audit_substitution_associativity(3),
            audit_equivariance(3, 2),
            audit_leibniz(3, 2),
            audit_boundary_squares_to_zero(3, 3, 3),
            audit_vertex_composition_table(3),
            audit_enumeration(store, 3, 4, 3),
            audit_reduction(250, 17),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audits_all_pass() {
        let store = BasisStore::in_memory();
        let report = run_audits(&store);
        for check in &report.checks {
            assert!(check.ok, "{}: {:?}", check.name, check.witness);
        }
        assert!(report.passed());
    }

    #[test]
    fn brute_force_matches_known_cell_counts() {
        // stage 2, arity 3: full slice sizes are 3! times the representative
        // counts 1, 5, 6, 2, then empty
        let expect = [6usize, 30, 36, 12, 0];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(brute_force_words(2, 3, k).len(), *e, "dimension {k}");
        }
    }

    #[test]
    fn spheres_in_low_stages() {
        // the arity-2 slice of stage n has the homology of an (n-1)-sphere
        for n in 1..=4u32 {
            let h = slice_homology(n, 2);
            assert_eq!(h.len(), n as usize, "stage {n} top dimension");
            for row in &h {
                let expect_rank = match (row.degree, n) {
                    (0, 1) => 2, // two points
                    (0, _) => 1,
                    (d, _) if d == n as usize - 1 => 1,
                    _ => 0,
                };
                assert_eq!(row.rank, expect_rank, "stage {n} degree {}", row.degree);
                assert!(row.torsion.is_empty(), "stage {n} degree {}", row.degree);
            }
        }
    }

    #[test]
    fn bottom_stage_is_discrete() {
        for r in 1..=4usize {
            let h = slice_homology(1, r);
            assert_eq!(h.len(), 1, "arity {r} has vertices only");
            assert_eq!(h[0].rank, (1..=r).product::<usize>());
            assert!(h[0].torsion.is_empty());
        }
    }

    #[test]
    fn middle_degree_of_the_two_sphere_vanishes() {
        let h = slice_homology(3, 2);
        assert_eq!(h.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 0, 1]);
    }

    #[test]
    fn orbit_reduction_handles_signs() {
        // a single non-representative vertex at arity 2
        let flip = Perm::parse_one_line("2 1").unwrap();
        let x = BEChain::from_simplex(BESimplex::vertex(&flip));
        let odd = orbit_sum_reduce(&x, 1);
        let even = orbit_sum_reduce(&x, 2);
        let rep = BESimplex::vertex(&Perm::identity(2));
        assert_eq!(odd.coefficient(&rep), BigInt::from(-1));
        assert_eq!(even.coefficient(&rep), BigInt::from(1));
    }

    #[test]
    fn dense_smith_finds_torsion() {
        // diag(2, 6) disguised by row and column mixing
        let m = vec![vec![2, 2], vec![2, 8]];
        assert_eq!(dense_smith_diagonal(&m), vec![2, 6]);
        let r = vec![vec![0, 0], vec![0, 0]];
        assert_eq!(dense_smith_diagonal(&r), vec![0, 0]);
    }
}
