use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::word::{
    add_canonical, half_shuffle_letters, parse_coeff, shuffle_letters, JsonTerm, JsonTerms, Word,
};
use crate::error::{Error, Result};

/// A permutation of `{1, …, n}` stored as its image sequence
/// `(σ(1), …, σ(n))`. Order 0 is the empty permutation `λ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn new(images: Vec<u32>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            let i = x as usize;
            if i == 0 || i > n || seen[i - 1] {
                return Err(Error::InvalidPermutation(images));
            }
            seen[i - 1] = true;
        }
        Ok(Permutation(images))
    }

    /// `λ`, the only element of `S_0`.
    pub fn empty() -> Self {
        Permutation(Vec::new())
    }

    /// `1_n`.
    pub fn identity(n: usize) -> Self {
        Permutation((1..=n as u32).collect())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[u32] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| x as usize == i + 1)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize - 1] = i as u32 + 1;
        }
        Permutation(inv)
    }

    /// The word `n + σ(1), …, n + σ(m)`.
    fn shifted(&self, n: usize) -> Vec<u32> {
        self.0.iter().map(|&x| x + n as u32).collect()
    }

    fn from_word_unchecked(w: Word) -> Self {
        Permutation(w.into_letters())
    }
}

impl Ord for Permutation {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Permutation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "λ");
        }
        let sep = if self.0.len() > 9 { "," } else { "" };
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(sep))
    }
}

/// Integer combination of permutations of possibly mixed orders, in canonical
/// form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PermutationSum {
    terms: BTreeMap<Permutation, BigInt>,
}

impl PermutationSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms<I, C>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Permutation, C)>,
        C: Into<BigInt>,
    {
        let mut s = Self::zero();
        for (p, c) in terms {
            s.add_term(p, c.into());
        }
        s
    }

    pub fn add_term(&mut self, p: Permutation, c: BigInt) {
        add_canonical(&mut self.terms, p, c);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(p.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        Self::from_terms(self.terms.iter().map(|(p, v)| (p.clone(), v * c)))
    }

    pub fn coeff(&self, p: &Permutation) -> BigInt {
        self.terms.get(p).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Permutation, &BigInt)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn mass(&self) -> BigInt {
        self.terms.values().sum()
    }

    /// Largest order among the terms, 0 for the zero sum.
    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Permutation::order).max().unwrap_or(0)
    }

    /// Terms with coefficients converted to `f64`.
    pub fn to_f64_terms(&self) -> Vec<(Permutation, f64)> {
        self.terms
            .iter()
            .map(|(p, c)| (p.clone(), c.to_f64().unwrap_or(f64::NAN)))
            .collect()
    }

    /// Bilinear extension of `σ ∗′ ρ`.
    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (s, a) in &self.terms {
            for (r, b) in &other.terms {
                let ab = a * b;
                for (p, c) in perm_product(s, r).terms {
                    out.add_term(p, c * &ab);
                }
            }
        }
        out
    }

    /// Bilinear extension of `σ ≻ ρ`.
    pub fn half_shuffle(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (s, a) in &self.terms {
            for (r, b) in &other.terms {
                let ab = a * b;
                for (p, c) in half_shuffle(s, r)?.terms {
                    out.add_term(p, c * &ab);
                }
            }
        }
        Ok(out)
    }
}

impl From<Permutation> for PermutationSum {
    fn from(p: Permutation) -> Self {
        Self {
            terms: BTreeMap::from([(p, BigInt::one())]),
        }
    }
}

impl fmt::Display for PermutationSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(p, c)| {
                if c.is_one() {
                    format!("{p}")
                } else {
                    format!("{c}{p}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Serialize for PermutationSum {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        JsonTerms {
            terms: self
                .terms
                .iter()
                .map(|(p, c)| JsonTerm {
                    word: p.0.clone(),
                    coeff: c.to_string(),
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PermutationSum {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = JsonTerms::deserialize(de)?;
        let mut s = PermutationSum::zero();
        for t in raw.terms {
            let c = parse_coeff(&t.coeff).map_err(serde::de::Error::custom)?;
            let p = Permutation::new(t.word).map_err(serde::de::Error::custom)?;
            s.add_term(p, c);
        }
        Ok(s)
    }
}

/// `σ ∗′ ρ = σ ⧢ ρ̄`, with `ρ̄(i) = n + ρ(i)`.
pub fn perm_product(sigma: &Permutation, rho: &Permutation) -> PermutationSum {
    let shifted = rho.shifted(sigma.order());
    PermutationSum {
        terms: shuffle_letters(&sigma.0, &shifted)
            .into_iter()
            .map(|(w, c)| (Permutation::from_word_unchecked(w), c))
            .collect(),
    }
}

/// `σ ≻ ρ = (σ ⧢ ρ̄(1..m−1)) ρ̄(m)`; `σ ≻ λ = 0` for `σ ≠ λ`; `λ ≻ λ` is
/// rejected.
pub fn half_shuffle(sigma: &Permutation, rho: &Permutation) -> Result<PermutationSum> {
    let shifted = rho.shifted(sigma.order());
    Ok(PermutationSum {
        terms: half_shuffle_letters(&sigma.0, &shifted)?
            .into_iter()
            .map(|(w, c)| (Permutation::from_word_unchecked(w), c))
            .collect(),
    })
}

/// `m_≻(ρ₁, …, ρₙ) = (⋯((ρ₁ ≻ ρ₂) ≻ ρ₃)⋯) ≻ ρₙ`.
pub fn m_succ(args: &[PermutationSum]) -> Result<PermutationSum> {
    let (first, rest) = args
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("m_succ needs at least one argument".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, r| acc.half_shuffle(r))
}

/// `m_≻(1_{n₁}, …, 1_{n_l})`, the kernel used by the one-form lifts.
pub fn m_succ_identities(orders: &[usize]) -> Result<PermutationSum> {
    let args: Vec<PermutationSum> = orders
        .iter()
        .map(|&n| PermutationSum::from(Permutation::identity(n)))
        .collect();
    m_succ(&args)
}

/// `1_{n₁} ∗′ ⋯ ∗′ 1_{n_l}`.
pub fn product_of_identities(orders: &[usize]) -> PermutationSum {
    orders.iter().fold(
        PermutationSum::from(Permutation::empty()),
        |acc, &n| acc.product(&PermutationSum::from(Permutation::identity(n))),
    )
}

/// The unique order-preserving relabelling of distinct integers onto
/// `{1, …, k}`.
pub fn standardize(seq: &[i64]) -> Result<Permutation> {
    let mut sorted: Vec<(i64, usize)> = seq.iter().copied().zip(0..).collect();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::RepeatedEntry(pair[0].0));
        }
    }
    let mut images = vec![0u32; seq.len()];
    for (rank, &(_, pos)) in sorted.iter().enumerate() {
        images[pos] = rank as u32 + 1;
    }
    Ok(Permutation(images))
}

/// `△′ = (st ⊗ st) ∘ δ′`. Keys are `(left, right)` pairs, in cut order.
pub fn mr_coproduct(sigma: &Permutation) -> BTreeMap<(Permutation, Permutation), BigInt> {
    let st = |s: &[u32]| {
        let v: Vec<i64> = s.iter().map(|&x| i64::from(x)).collect();
        standardize(&v).expect("permutation entries are distinct")
    };
    let mut out = BTreeMap::new();
    for k in 0..=sigma.order() {
        add_canonical(
            &mut out,
            (st(&sigma.0[..k]), st(&sigma.0[k..])),
            BigInt::one(),
        );
    }
    out
}

/// `σ · (a₁⋯aₙ) = a_{σ(1)}⋯a_{σ(n)}`.
pub fn apply_perm(sigma: &Permutation, w: &Word) -> Result<Word> {
    if sigma.order() != w.len() {
        return Err(Error::LengthMismatch {
            expected: sigma.order(),
            found: w.len(),
        });
    }
    Ok(Word::new(
        sigma
            .0
            .iter()
            .map(|&i| w.letters()[i as usize - 1])
            .collect(),
    ))
}

/// The permutation of `S_{n₁+n₂}` exchanging the contiguous blocks
/// `(k₁+1, …, k₁+k₂)` and `(k₁+k₂+1, …, n₁+k₂)` of `(1, …, n₁+n₂)`.
pub fn block_swap(k1: usize, k2: usize, n1: usize, n2: usize) -> Result<Permutation> {
    if n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(Error::IndexRange(format!(
            "block_swap needs n2 >= 1, 0 <= k1 <= n1, 0 <= k2 <= n2 (k1={k1}, k2={k2}, n1={n1}, n2={n2})"
        )));
    }
    let span = |a: usize, b: usize| a as u32..=b as u32;
    let images: Vec<u32> = span(1, k1)
        .chain(span(k1 + k2 + 1, n1 + k2))
        .chain(span(k1 + 1, k1 + k2))
        .chain(span(n1 + k2 + 1, n1 + n2))
        .collect();
    Permutation::new(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(images: &[u32]) -> Permutation {
        Permutation::new(images.to_vec()).unwrap()
    }

    fn sum(ps: &[&[u32]]) -> PermutationSum {
        PermutationSum::from_terms(ps.iter().map(|x| (p(x), 1)))
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![3, 1]).is_err());
    }

    #[test]
    fn product_worked_example() {
        assert_eq!(
            perm_product(&p(&[1]), &p(&[2, 1])),
            sum(&[&[1, 3, 2], &[3, 1, 2], &[3, 2, 1]])
        );
    }

    #[test]
    fn product_unit_and_small_cases() {
        let s = p(&[2, 3, 1]);
        assert_eq!(perm_product(&Permutation::empty(), &s), s.clone().into());
        assert_eq!(perm_product(&s, &Permutation::empty()), s.into());
        let one = Permutation::identity(1);
        assert_eq!(perm_product(&one, &one), sum(&[&[1, 2], &[2, 1]]));
    }

    #[test]
    fn half_shuffle_worked_examples() {
        assert_eq!(
            half_shuffle(&p(&[1]), &p(&[3, 1, 2])).unwrap(),
            sum(&[&[1, 4, 2, 3], &[4, 1, 2, 3], &[4, 2, 1, 3]])
        );
        assert!(half_shuffle(&p(&[1]), &Permutation::empty())
            .unwrap()
            .is_zero());
        assert_eq!(
            half_shuffle(&Permutation::empty(), &p(&[2, 1])).unwrap(),
            sum(&[&[2, 1]])
        );
        assert!(matches!(
            half_shuffle(&Permutation::empty(), &Permutation::empty()),
            Err(Error::EmptyHalfShuffle)
        ));
    }

    #[test]
    fn m_succ_of_single_letters() {
        let one = PermutationSum::from(Permutation::identity(1));
        assert_eq!(m_succ(std::slice::from_ref(&one)).unwrap(), sum(&[&[1]]));
        assert_eq!(m_succ(&[one.clone(), one.clone()]).unwrap(), sum(&[&[1, 2]]));
        assert_eq!(m_succ(&[one.clone(), one.clone(), one]).unwrap(), sum(&[&[1, 2, 3]]));
        assert!(m_succ(&[]).is_err());
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[]).unwrap(), Permutation::empty());
        assert_eq!(standardize(&[4, 2]).unwrap(), p(&[2, 1]));
        assert_eq!(standardize(&[3, 1, 4]).unwrap(), p(&[2, 1, 3]));
        assert!(matches!(standardize(&[3, 1, 3]), Err(Error::RepeatedEntry(3))));
    }

    #[test]
    fn coproduct_examples() {
        let lam = Permutation::empty();
        let one = Permutation::identity(1);
        let keys = |s: &Permutation| mr_coproduct(s).into_keys().collect::<Vec<_>>();
        assert_eq!(keys(&lam), vec![(lam.clone(), lam.clone())]);
        assert_eq!(
            keys(&p(&[2, 1])),
            vec![
                (lam.clone(), p(&[2, 1])),
                (one.clone(), one.clone()),
                (p(&[2, 1]), lam.clone())
            ]
        );
        assert_eq!(
            keys(&Permutation::identity(2)),
            vec![
                (lam.clone(), Permutation::identity(2)),
                (one.clone(), one),
                (Permutation::identity(2), lam)
            ]
        );
    }

    #[test]
    fn coproduct_counit() {
        // projecting either factor onto the span of λ recovers σ
        let s = p(&[3, 1, 4, 2]);
        let cop = mr_coproduct(&s);
        let left: Vec<_> = cop.keys().filter(|(l, _)| l.order() == 0).collect();
        let right: Vec<_> = cop.keys().filter(|(_, r)| r.order() == 0).collect();
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].1, s);
        assert_eq!(right[0].0, s);
    }

    #[test]
    fn apply_perm_examples() {
        let abc = Word::new(vec![10, 11, 12]);
        assert_eq!(apply_perm(&Permutation::identity(3), &abc).unwrap(), abc);
        assert_eq!(
            apply_perm(&p(&[2, 1]), &Word::new(vec![10, 11])).unwrap(),
            Word::new(vec![11, 10])
        );
        assert_eq!(
            apply_perm(&p(&[3, 1, 2]), &abc).unwrap(),
            Word::new(vec![12, 10, 11])
        );
        assert!(apply_perm(&p(&[2, 1]), &abc).is_err());
    }

    #[test]
    fn block_swap_examples() {
        assert_eq!(block_swap(1, 0, 2, 3).unwrap(), Permutation::identity(5));
        assert_eq!(block_swap(0, 1, 1, 1).unwrap(), p(&[2, 1]));
        assert_eq!(block_swap(1, 1, 2, 2).unwrap(), p(&[1, 3, 2, 4]));
        assert!(block_swap(3, 0, 2, 2).is_err());
        assert_eq!(block_swap(0, 2, 2, 2).unwrap(), p(&[3, 4, 1, 2]));
        assert!(block_swap(0, 3, 2, 2).is_err());
        assert!(block_swap(0, 0, 2, 0).is_err());
    }

    #[test]
    fn standardize_inverts_action_on_increasing_words() {
        for sigma in [p(&[3, 1, 2]), p(&[2, 4, 1, 3]), Permutation::identity(3)] {
            let inc = Word::new((10..10 + sigma.order() as u32).collect());
            let w = apply_perm(&sigma, &inc).unwrap();
            let v: Vec<i64> = w.letters().iter().map(|&x| i64::from(x)).collect();
            assert_eq!(standardize(&v).unwrap(), sigma);
        }
    }
}
