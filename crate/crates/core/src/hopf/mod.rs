//! Exact integer arithmetic on words and permutations: the shuffle Hopf
//! algebra, the Malvenuto–Reutenauer product `∗′`, its coproduct, and the
//! dendriform half-shuffle `≻` with its iterate `m_≻`.
//!
//! Coefficients are arbitrary-precision integers, so every identity here is
//! checked exactly. The word-level half-shuffle is the primitive; the
//! permutation-level one applies it to `σ` and the shifted word `ρ̄`.

mod permutation;
mod word;

pub use permutation::{
    apply_perm, block_swap, half_shuffle, m_succ, m_succ_identities, mr_coproduct, perm_product,
    product_of_identities, standardize, Permutation, PermutationSum,
};
pub use word::{deconcat, half_shuffle_words, m_succ_words, shuffle, Word, WordPolynomial};

use num_traits::Zero;

use crate::error::{Error, Result};

/// Checks the shuffle identity for iterated half-shuffles,
///
/// `sh(m_≻(p₁..pₙ), m_≻(pₙ₊₁..pₙ₊ₘ)) = Σ_{ρ ∈ 1ₙ ∗′ 1ₘ} m_≻(p_{ρ(1)}, …, p_{ρ(n+m)})`,
///
/// exactly. `polys` holds `p₁..pₙ₊ₘ` and `n` splits it; both halves must be
/// nonempty and no `pᵢ` may have a constant term.
pub fn lemma1_check(polys: &[WordPolynomial], n: usize) -> Result<bool> {
    if n == 0 || n >= polys.len() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < {} to split the arguments",
            polys.len()
        )));
    }
    if polys.iter().any(|p| !p.constant_term().is_zero()) {
        return Err(Error::NonZeroConstant);
    }
    let m = polys.len() - n;
    let lhs = m_succ_words(&polys[..n])?.shuffle(&m_succ_words(&polys[n..])?);

    let mut rhs = WordPolynomial::zero();
    for (rho, c) in perm_product(&Permutation::identity(n), &Permutation::identity(m)).terms() {
        let args: Vec<WordPolynomial> = rho
            .images()
            .iter()
            .map(|&i| polys[i as usize - 1].clone())
            .collect();
        rhs = &rhs + &m_succ_words(&args)?.scale(c);
    }
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter(a: u32) -> WordPolynomial {
        WordPolynomial::from(Word::letter(a))
    }

    #[test]
    fn lemma1_two_letters() {
        assert!(lemma1_check(&[letter(0), letter(1)], 1).unwrap());
        // both sides equal ab + ba
        let lhs = m_succ_words(&[letter(0)])
            .unwrap()
            .shuffle(&m_succ_words(&[letter(1)]).unwrap());
        let ab = WordPolynomial::from_terms([(Word::new(vec![0, 1]), 1), (Word::new(vec![1, 0]), 1)]);
        assert_eq!(lhs, ab);
    }

    #[test]
    fn lemma1_word_and_letter() {
        let ab = WordPolynomial::from(Word::new(vec![0, 1]));
        assert!(lemma1_check(&[ab, letter(2)], 1).unwrap());
    }

    #[test]
    fn lemma1_three_letters() {
        assert!(lemma1_check(&[letter(0), letter(1), letter(2)], 2).unwrap());
    }

    #[test]
    fn lemma1_rejects_constant_terms() {
        let bad = &letter(0) + &WordPolynomial::unit();
        assert!(matches!(
            lemma1_check(&[bad, letter(1)], 1),
            Err(Error::NonZeroConstant)
        ));
        assert!(lemma1_check(&[letter(0), letter(1)], 2).is_err());
    }
}
