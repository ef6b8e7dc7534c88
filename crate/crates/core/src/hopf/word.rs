use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite sequence of letter indices; the empty word is the unit `e`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<u32>) -> Self {
        Word(letters)
    }

    pub fn letter(a: u32) -> Self {
        Word(vec![a])
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<u32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// All `n + 1` deconcatenation splits, in order of the cut position.
    pub fn deconcat(&self) -> Vec<(Word, Word)> {
        (0..=self.len())
            .map(|k| (Word(self.0[..k].to_vec()), Word(self.0[k..].to_vec())))
            .collect()
    }
}

impl From<&[u32]> for Word {
    fn from(letters: &[u32]) -> Self {
        Word(letters.to_vec())
    }
}

impl From<&str> for Word {
    /// Parses a word written as a string of decimal digits, e.g. `"132"`.
    /// Panics on non-digit characters; meant for tests and small literals.
    fn from(s: &str) -> Self {
        Word(
            s.chars()
                .map(|c| c.to_digit(10).expect("word literal must be digits"))
                .collect(),
        )
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Shuffle of two letter sequences, by the last-letter recursion
/// `sh(ua, vb) = sh(ua, v) b + sh(u, vb) a`, evaluated bottom-up over prefixes.
pub(crate) fn shuffle_letters(u: &[u32], v: &[u32]) -> BTreeMap<Word, BigInt> {
    let (n, m) = (u.len(), v.len());
    // table[i][j] = sh(u[..i], v[..j])
    let mut prev: Vec<BTreeMap<Word, BigInt>> = (0..=m)
        .map(|j| BTreeMap::from([(Word(v[..j].to_vec()), BigInt::one())]))
        .collect();
    for i in 1..=n {
        let mut row: Vec<BTreeMap<Word, BigInt>> = Vec::with_capacity(m + 1);
        row.push(BTreeMap::from([(Word(u[..i].to_vec()), BigInt::one())]));
        for j in 1..=m {
            let mut acc = BTreeMap::new();
            for (w, c) in &row[j - 1] {
                let mut w = w.0.clone();
                w.push(v[j - 1]);
                *acc.entry(Word(w)).or_insert_with(BigInt::zero) += c;
            }
            for (w, c) in &prev[j] {
                let mut w = w.0.clone();
                w.push(u[i - 1]);
                *acc.entry(Word(w)).or_insert_with(BigInt::zero) += c;
            }
            row.push(acc);
        }
        prev = row;
    }
    prev.pop().unwrap_or_default()
}

/// Word-level half-shuffle `u ≻ v = sh(u, v') b` where `v = v'b`.
/// `u ≻ e = 0` for nonempty `u`; `e ≻ e` is undefined.
pub(crate) fn half_shuffle_letters(u: &[u32], v: &[u32]) -> Result<BTreeMap<Word, BigInt>> {
    match v.split_last() {
        None if u.is_empty() => Err(Error::EmptyHalfShuffle),
        None => Ok(BTreeMap::new()),
        Some((&last, head)) => Ok(shuffle_letters(u, head)
            .into_iter()
            .map(|(mut w, c)| {
                w.0.push(last);
                (w, c)
            })
            .collect()),
    }
}

pub(crate) fn add_canonical<K: Ord>(terms: &mut BTreeMap<K, BigInt>, key: K, c: BigInt) {
    use std::collections::btree_map::Entry;
    if c.is_zero() {
        return;
    }
    match terms.entry(key) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

/// Finite integer combination of words, kept in canonical form: no zero
/// coefficients, terms ordered by length then lexicographically.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordPolynomial {
    terms: BTreeMap<Word, BigInt>,
}

impl WordPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        Self::from(Word::empty())
    }

    pub fn from_terms<I, C>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Word, C)>,
        C: Into<BigInt>,
    {
        let mut p = Self::zero();
        for (w, c) in terms {
            p.add_term(w, c.into());
        }
        p
    }

    pub fn add_term(&mut self, w: Word, c: BigInt) {
        if c.is_zero() {
            return;
        }
        add_canonical(&mut self.terms, w, c);
    }

    pub fn coeff(&self, w: &Word) -> BigInt {
        self.terms.get(w).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn constant_term(&self) -> BigInt {
        self.coeff(&Word::empty())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &BigInt)> {
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

    /// Sum of all coefficients.
    pub fn mass(&self) -> BigInt {
        self.terms.values().sum()
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|(w, v)| (w.clone(), v * c))
                .collect(),
        }
    }

    pub fn shuffle(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let ab = a * b;
                for (w, c) in shuffle_letters(u.letters(), v.letters()) {
                    out.add_term(w, c * &ab);
                }
            }
        }
        out
    }

    /// Bilinear extension of the word-level half-shuffle.
    pub fn half_shuffle(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let ab = a * b;
                for (w, c) in half_shuffle_letters(u.letters(), v.letters())? {
                    out.add_term(w, c * &ab);
                }
            }
        }
        Ok(out)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        out
    }
}

impl From<Word> for WordPolynomial {
    fn from(w: Word) -> Self {
        Self {
            terms: BTreeMap::from([(w, BigInt::one())]),
        }
    }
}

impl From<&str> for WordPolynomial {
    fn from(s: &str) -> Self {
        Self::from(Word::from(s))
    }
}

impl Add for &WordPolynomial {
    type Output = WordPolynomial;
    fn add(self, rhs: &WordPolynomial) -> WordPolynomial {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }
}

impl Sub for &WordPolynomial {
    type Output = WordPolynomial;
    fn sub(self, rhs: &WordPolynomial) -> WordPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &WordPolynomial {
    type Output = WordPolynomial;
    fn neg(self) -> WordPolynomial {
        self.scale(&BigInt::from(-1))
    }
}

impl Mul<&WordPolynomial> for &BigInt {
    type Output = WordPolynomial;
    fn mul(self, rhs: &WordPolynomial) -> WordPolynomial {
        rhs.scale(self)
    }
}

impl fmt::Display for WordPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                if c.is_one() {
                    format!("{w}")
                } else {
                    format!("{c}*{w}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `u ⧢ v` for single words.
pub fn shuffle(u: &Word, v: &Word) -> WordPolynomial {
    WordPolynomial {
        terms: shuffle_letters(u.letters(), v.letters()),
    }
}

/// Word-level `u ≻ v`.
pub fn half_shuffle_words(u: &Word, v: &Word) -> Result<WordPolynomial> {
    Ok(WordPolynomial {
        terms: half_shuffle_letters(u.letters(), v.letters())?,
    })
}

pub fn deconcat(w: &Word) -> Vec<(Word, Word)> {
    w.deconcat()
}

/// Left-nested iterated half-shuffle on polynomials, `(⋯(p₁ ≻ p₂) ≻ ⋯) ≻ pₙ`.
pub fn m_succ_words(ps: &[WordPolynomial]) -> Result<WordPolynomial> {
    let (first, rest) = ps
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("m_succ needs at least one argument".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, p| acc.half_shuffle(p))
}

// Canonical JSON: {"terms":[{"word":[..],"coeff":"<decimal>"}]}.

#[derive(Serialize, Deserialize)]
pub(crate) struct JsonTerm {
    pub word: Vec<u32>,
    pub coeff: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct JsonTerms {
    pub terms: Vec<JsonTerm>,
}

pub(crate) fn parse_coeff(s: &str) -> std::result::Result<BigInt, String> {
    s.parse::<BigInt>()
        .map_err(|e| format!("bad coefficient {s:?}: {e}"))
}

impl Serialize for WordPolynomial {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        JsonTerms {
            terms: self
                .terms
                .iter()
                .map(|(w, c)| JsonTerm {
                    word: w.0.clone(),
                    coeff: c.to_string(),
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for WordPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = JsonTerms::deserialize(de)?;
        let mut p = WordPolynomial::zero();
        for t in raw.terms {
            let c = parse_coeff(&t.coeff).map_err(serde::de::Error::custom)?;
            p.add_term(Word(t.word), c);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(terms: &[(&str, i64)]) -> WordPolynomial {
        WordPolynomial::from_terms(terms.iter().map(|&(w, c)| (Word::from(w), c)))
    }

    #[test]
    fn shuffle_unit_laws() {
        let w = Word::from("312");
        assert_eq!(shuffle(&Word::empty(), &w), WordPolynomial::from(w.clone()));
        assert_eq!(shuffle(&w, &Word::empty()), WordPolynomial::from(w));
    }

    #[test]
    fn shuffle_letter_with_word() {
        let got = shuffle(&Word::from("1"), &Word::from("32"));
        assert_eq!(got, wp(&[("132", 1), ("312", 1), ("321", 1)]));
    }

    #[test]
    fn shuffle_12_12_matches_interleavings() {
        // oracle: enumerate the 6 position subsets of size 2 in 4 slots
        let (u, v) = ([1u32, 2], [1u32, 2]);
        let mut oracle = WordPolynomial::zero();
        for mask in 0u32..16 {
            if mask.count_ones() != 2 {
                continue;
            }
            let (mut i, mut j, mut w) = (0, 0, Vec::new());
            for pos in 0..4 {
                if mask >> pos & 1 == 1 {
                    w.push(u[i]);
                    i += 1;
                } else {
                    w.push(v[j]);
                    j += 1;
                }
            }
            oracle.add_term(Word::new(w), BigInt::one());
        }
        let got = shuffle(&Word::from("12"), &Word::from("12"));
        assert_eq!(got, oracle);
        assert_eq!(got, wp(&[("1122", 4), ("1212", 2)]));
    }

    #[test]
    fn cancellation_keeps_canonical_form() {
        let mut p = wp(&[("12", 3), ("1", 1)]);
        p.add_term(Word::from("12"), BigInt::from(-3));
        assert_eq!(p, wp(&[("1", 1)]));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn half_shuffle_edges() {
        assert!(matches!(
            half_shuffle_words(&Word::empty(), &Word::empty()),
            Err(Error::EmptyHalfShuffle)
        ));
        assert!(half_shuffle_words(&Word::from("1"), &Word::empty())
            .unwrap()
            .is_zero());
        assert_eq!(
            half_shuffle_words(&Word::empty(), &Word::from("21")).unwrap(),
            wp(&[("21", 1)])
        );
    }

    #[test]
    fn deconcat_splits() {
        assert_eq!(deconcat(&Word::empty()), vec![(Word::empty(), Word::empty())]);
        let ab = Word::new(vec![0, 1]);
        assert_eq!(
            deconcat(&ab),
            vec![
                (Word::empty(), ab.clone()),
                (Word::letter(0), Word::letter(1)),
                (ab.clone(), Word::empty())
            ]
        );
        assert_eq!(deconcat(&Word::from("123")).len(), 4);
    }

    #[test]
    fn json_round_trip() {
        let p = wp(&[("132", 2), ("1", -7)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"terms":[{"word":[1],"coeff":"-7"},{"word":[1,3,2],"coeff":"2"}]}"#
        );
        let back: WordPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
