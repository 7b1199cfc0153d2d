//! Symmetric group combinatorics: one-line words, signs, block substitution
//! (the permutation operad), and restriction to a pair of letters.
//!
//! Letters are 1-based throughout; the canonical encoding of a permutation is
//! its one-line word, and lexicographic order on one-line words is the
//! tie-break order used everywhere downstream.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymmError {
    #[error("images {0:?} are not a bijection of 1..={1}")]
    NotAPermutation(Vec<u8>, usize),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("slot {slot} out of range 1..={arity}")]
    SlotOutOfRange { slot: usize, arity: usize },
    #[error("invalid letter pair ({0}, {1}): need 1 <= i < j <= arity")]
    BadPair(usize, usize),
}

/// A permutation of `{1..r}` in one-line notation: entry `t` is the image of
/// letter `t+1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    images: Vec<u8>,
}

/// The element of `Σ_2` obtained by restricting a permutation to two letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairOrder {
    Straight,
    Reversed,
}

impl Perm {
    pub fn from_images(images: Vec<u8>) -> Result<Self, SymmError> {
        let r = images.len();
        let mut seen = vec![false; r + 1];
        for &v in &images {
            let v = v as usize;
            if v == 0 || v > r || seen[v] {
                return Err(SymmError::NotAPermutation(images.clone(), r));
            }
            seen[v] = true;
        }
        Ok(Perm { images })
    }

    pub fn identity(r: usize) -> Self {
        Perm {
            images: (1..=r as u8).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.images.len()
    }

    /// Image of letter `i` (1-based).
    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1] as usize
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(t, &v)| v as usize == t + 1)
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0u8; self.images.len()];
        for (t, &v) in self.images.iter().enumerate() {
            images[v as usize - 1] = t as u8 + 1;
        }
        Perm { images }
    }

    /// One-line word with space-separated letters, e.g. "2 3 1".
    pub fn one_line(&self) -> String {
        self.images
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_one_line(s: &str) -> Result<Self, SymmError> {
        let images: Vec<u8> = s
            .split_whitespace()
            .map(|tok| tok.parse::<u8>().unwrap_or(0))
            .collect();
        Perm::from_images(images)
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.one_line())
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_line())
    }
}

/// `(p·q)(i) = p(q(i))`.
pub fn compose(p: &Perm, q: &Perm) -> Result<Perm, SymmError> {
    if p.arity() != q.arity() {
        return Err(SymmError::ArityMismatch(p.arity(), q.arity()));
    }
    let images = q.images.iter().map(|&v| p.images[v as usize - 1]).collect();
    Ok(Perm { images })
}

/// Signature: `-1` to the number of inversions.
pub fn sign(p: &Perm) -> i32 {
    let w = &p.images;
    let mut inversions = 0usize;
    for a in 0..w.len() {
        for b in a + 1..w.len() {
            if w[a] > w[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Replace letter `i` of `u` by the block `v`, relabelling order-preservingly.
///
/// In the one-line word of `u`, values below `i` are kept, values above `i`
/// are shifted up by `arity(v) - 1`, and the value `i` is expanded to the
/// word of `v` translated to start at `i`.
pub fn block_substitute(u: &Perm, v: &Perm, i: usize) -> Result<Perm, SymmError> {
    let r = u.arity();
    let s = v.arity();
    if i == 0 || i > r {
        return Err(SymmError::SlotOutOfRange { slot: i, arity: r });
    }
    let shift = (s - 1) as u8;
    let i8 = i as u8;
    let mut images = Vec::with_capacity(r + s - 1);
    for &val in &u.images {
        if val < i8 {
            images.push(val);
        } else if val > i8 {
            images.push(val + shift);
        } else {
            for &b in &v.images {
                images.push(b + i8 - 1);
            }
        }
    }
    Ok(Perm { images })
}

/// Relative order of the letters `i < j` in the one-line word of `w`:
/// `Straight` iff the value `i` appears before the value `j`.
pub fn restrict_pair(w: &Perm, i: usize, j: usize) -> Result<PairOrder, SymmError> {
    let r = w.arity();
    if i == 0 || j == 0 || i >= j || j > r {
        return Err(SymmError::BadPair(i, j));
    }
    for &v in &w.images {
        if v as usize == i {
            return Ok(PairOrder::Straight);
        }
        if v as usize == j {
            return Ok(PairOrder::Reversed);
        }
    }
    unreachable!("validated permutation contains every letter")
}

/// All permutations of arity `r` in lexicographic one-line order.
pub fn all_perms(r: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut images: Vec<u8> = (1..=r as u8).collect();
    loop {
        out.push(Perm {
            images: images.clone(),
        });
        // next_permutation in place; stops after the lex-greatest word
        let Some(k) = (0..images.len().saturating_sub(1))
            .rev()
            .find(|&k| images[k] < images[k + 1])
        else {
            break;
        };
        let l = (k + 1..images.len())
            .rev()
            .find(|&l| images[l] > images[k])
            .unwrap();
        images.swap(k, l);
        images[k + 1..].reverse();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(word: &[u8]) -> Perm {
        Perm::from_images(word.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Perm::from_images(vec![1, 1]).is_err());
        assert!(Perm::from_images(vec![0, 1]).is_err());
        assert!(Perm::from_images(vec![1, 3]).is_err());
    }

    #[test]
    fn compose_cases() {
        let id3 = Perm::identity(3);
        assert_eq!(compose(&id3, &id3).unwrap(), id3);
        let t = p(&[2, 1]);
        assert_eq!(compose(&t, &t).unwrap(), Perm::identity(2));
        // (2 3 1) and (3 1 2) are mutually inverse
        assert_eq!(compose(&p(&[2, 3, 1]), &p(&[3, 1, 2])).unwrap(), id3);
        assert!(compose(&t, &id3).is_err());
    }

    #[test]
    fn compose_is_left_application() {
        // (p.q)(i) = p(q(i)), checked pointwise on a non-commuting pair
        let a = p(&[2, 3, 1]);
        let b = p(&[2, 1, 3]);
        let ab = compose(&a, &b).unwrap();
        for i in 1..=3 {
            assert_eq!(ab.apply(i), a.apply(b.apply(i)));
        }
        assert_ne!(ab, compose(&b, &a).unwrap());
    }

    #[test]
    fn sign_cases() {
        assert_eq!(sign(&Perm::identity(5)), 1);
        assert_eq!(sign(&p(&[2, 1])), -1);
        assert_eq!(sign(&p(&[2, 3, 1])), 1);
    }

    #[test]
    fn inverse_round_trips() {
        for w in all_perms(4) {
            assert_eq!(compose(&w, &w.inverse()).unwrap(), Perm::identity(4));
            assert_eq!(compose(&w.inverse(), &w).unwrap(), Perm::identity(4));
        }
    }

    #[test]
    fn block_substitute_cases() {
        let id2 = Perm::identity(2);
        assert_eq!(
            block_substitute(&id2, &id2, 1).unwrap(),
            Perm::identity(3)
        );
        assert_eq!(
            block_substitute(&p(&[2, 1]), &id2, 1).unwrap(),
            p(&[3, 1, 2])
        );
        assert_eq!(
            block_substitute(&id2, &p(&[2, 1]), 2).unwrap(),
            p(&[1, 3, 2])
        );
        assert!(block_substitute(&id2, &id2, 3).is_err());
        assert!(block_substitute(&id2, &id2, 0).is_err());
    }

    #[test]
    fn block_substitute_units() {
        let e1 = Perm::identity(1);
        for w in all_perms(3) {
            assert_eq!(block_substitute(&e1, &w, 1).unwrap(), w);
            for i in 1..=3 {
                assert_eq!(block_substitute(&w, &e1, i).unwrap(), w);
            }
        }
    }

    #[test]
    fn block_substitute_operad_axioms_exhaustive() {
        // sequential associativity and disjoint-slot commutation, all r,s,t <= 3
        for r in 1..=3usize {
            for s in 1..=3usize {
                for t in 1..=3usize {
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
                                        assert_eq!(lhs, rhs);
                                    }
                                }
                                // disjoint slots i < j commute after reindexing
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
                                        assert_eq!(lhs, rhs);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn restrict_pair_cases() {
        for r in 2..=5 {
            let id = Perm::identity(r);
            for i in 1..r {
                for j in i + 1..=r {
                    assert_eq!(restrict_pair(&id, i, j).unwrap(), PairOrder::Straight);
                }
            }
        }
        assert_eq!(
            restrict_pair(&p(&[2, 1]), 1, 2).unwrap(),
            PairOrder::Reversed
        );
        // word 2,3,1: value 3 appears before value 1
        assert_eq!(
            restrict_pair(&p(&[2, 3, 1]), 1, 3).unwrap(),
            PairOrder::Reversed
        );
        assert!(restrict_pair(&p(&[2, 1]), 2, 2).is_err());
        assert!(restrict_pair(&p(&[2, 1]), 1, 3).is_err());
    }

    #[test]
    fn all_perms_lex_sorted_and_complete() {
        let ps = all_perms(4);
        assert_eq!(ps.len(), 24);
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
        let ps1 = all_perms(1);
        assert_eq!(ps1, vec![Perm::identity(1)]);
    }

    fn perm_strategy(max_r: usize) -> impl Strategy<Value = Perm> {
        (1..=max_r).prop_flat_map(|r| {
            Just((1..=r as u8).collect::<Vec<u8>>())
                .prop_shuffle()
                .prop_map(|images| Perm::from_images(images).unwrap())
        })
    }

    proptest! {
        #[test]
        fn sign_is_a_homomorphism(seed in 0u64..1000, r in 2usize..=6) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a: Vec<u8> = (1..=r as u8).collect();
            let mut b: Vec<u8> = (1..=r as u8).collect();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            let pa = Perm::from_images(a).unwrap();
            let pb = Perm::from_images(b).unwrap();
            prop_assert_eq!(
                sign(&compose(&pa, &pb).unwrap()),
                sign(&pa) * sign(&pb)
            );
        }

        #[test]
        fn parse_round_trips(w in perm_strategy(6)) {
            prop_assert_eq!(Perm::parse_one_line(&w.one_line()).unwrap(), w);
        }

        #[test]
        fn sign_of_inverse_matches(w in perm_strategy(6)) {
            prop_assert_eq!(sign(&w), sign(&w.inverse()));
        }
    }
}
