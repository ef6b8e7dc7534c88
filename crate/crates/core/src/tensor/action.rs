//! Permutation actions on level arrays and the map `σ ↦ ŝ(σ)`.

use crate::error::{Error, Result};
use crate::hopf::{block_swap, half_shuffle, product_of_identities, Permutation, PermutationSum};

use super::TruncatedTensorSeries;

/// `out[w] = level[σ·w]` where `(σ·w)_j = w_{σ(j)}`.
///
/// `level` has `dim^n` entries with `n = σ.order()`.
pub fn permute_pullback(level: &[f64], dim: usize, sigma: &Permutation) -> Result<Vec<f64>> {
    let n = sigma.order();
    let size = dim.pow(n as u32);
    if level.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            found: level.len(),
        });
    }
    let mut out = vec![0.0; size];
    accumulate_pullback(level, dim, &sigma.inverse(), 1.0, &mut out);
    Ok(out)
}

/// `out[w] += c·level[σ·w]`, given `σ⁻¹`. Lengths are not checked.
pub(crate) fn accumulate_pullback(level: &[f64], dim: usize, sigma_inv: &Permutation, c: f64, out: &mut [f64]) {
    let n = sigma_inv.order();
    if sigma_inv.is_identity() {
        for (o, x) in out.iter_mut().zip(level) {
            *o += c * x;
        }
        return;
    }
    // letter i of w lands at position σ⁻¹(i) of σ·w
    let strides: Vec<usize> = sigma_inv
        .images()
        .iter()
        .map(|&j| dim.pow((n - j as usize) as u32))
        .collect();
    let mut digit = vec![0usize; n];
    let mut src = 0usize;
    for o in out.iter_mut() {
        *o += c * level[src];
        for i in (0..n).rev() {
            if digit[i] + 1 < dim {
                digit[i] += 1;
                src += strides[i];
                break;
            }
            src -= digit[i] * strides[i];
            digit[i] = 0;
        }
    }
}

/// `out[σ·w] = level[w]`, the transpose of [`permute_pullback`].
pub fn permute_pushforward(level: &[f64], dim: usize, sigma: &Permutation) -> Result<Vec<f64>> {
    permute_pullback(level, dim, &sigma.inverse())
}

/// `ŝ(σ) = Σ_w ⟨s, σ·w⟩ w`, extended linearly over the terms of `sigma`.
///
/// A term of order `n` contributes only to level `n` of the output.
pub fn s_hat(sigma: &PermutationSum, s: &TruncatedTensorSeries) -> Result<TruncatedTensorSeries> {
    if sigma.max_order() > s.depth() {
        return Err(Error::InsufficientDepth {
            required: sigma.max_order(),
            available: s.depth(),
        });
    }
    let mut out = TruncatedTensorSeries::zeros(s.dim(), s.depth());
    for (p, c) in sigma.to_f64_terms() {
        let n = p.order();
        let src = s.level(n);
        accumulate_pullback(src, s.dim(), &p.inverse(), c, out.level_mut(n));
    }
    Ok(out)
}

/// Largest entry of `LHS − RHS` in the change-of-variable identity for
/// `1_{n₁} ≻ 1_{n₂}` at level `n₁ + n₂`:
///
/// `(st)^(1_{n₁}≻1_{n₂}) − ŝ(1_{n₁}≻1_{n₂})
///   = Σ_{k₁ ≤ n₁, k₂ < n₂} ρ · (ŝ(1_{k₁}∗′1_{k₂}) ⊗ t̂(1_{n₁−k₁}≻1_{n₂−k₂}))`
///
/// with `ρ = block_swap(k₁, k₂, n₁, n₂)` acting by pushforward.
pub fn change_of_variable_defect(
    s: &TruncatedTensorSeries,
    t: &TruncatedTensorSeries,
    n1: usize,
    n2: usize,
) -> Result<f64> {
    let n = n1 + n2;
    if n2 == 0 {
        return Err(Error::InvalidArgument("n2 must be at least 1".into()));
    }
    let d = s.dim();
    let st = s.mul(t)?;
    let hs = half_shuffle(&Permutation::identity(n1), &Permutation::identity(n2))?;
    let lhs_full = s_hat(&hs, &st)?;
    let lhs_s = s_hat(&hs, s)?;
    let mut rhs = vec![0.0; d.pow(n as u32)];
    for k1 in 0..=n1 {
        for k2 in 0..n2 {
            let left = s_hat(&product_of_identities(&[k1, k2]), s)?;
            let right = s_hat(
                &half_shuffle(&Permutation::identity(n1 - k1), &Permutation::identity(n2 - k2))?,
                t,
            )?;
            let (a, b) = (left.level(k1 + k2), right.level(n - k1 - k2));
            let mut block = Vec::with_capacity(a.len() * b.len());
            for x in a {
                block.extend(b.iter().map(|y| x * y));
            }
            let rho = block_swap(k1, k2, n1, n2)?;
            for (r, v) in rhs.iter_mut().zip(permute_pushforward(&block, d, &rho)?) {
                *r += v;
            }
        }
    }
    Ok(lhs_full
        .level(n)
        .iter()
        .zip(lhs_s.level(n))
        .zip(&rhs)
        .map(|((a, b), r)| (a - b - r).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopf::{apply_perm, perm_product, Word};
    use crate::tensor::{conc_mul, exp, random_group_like};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm(images: &[u32]) -> Permutation {
        Permutation::new(images.to_vec()).unwrap()
    }

    #[test]
    fn pullback_matches_word_action() {
        let d = 3;
        let s: Vec<f64> = (0..27).map(|i| i as f64).collect();
        let sigma = perm(&[3, 1, 2]);
        let out = permute_pullback(&s, d, &sigma).unwrap();
        let mut w = vec![0u32; 3];
        for (idx, &o) in out.iter().enumerate() {
            crate::tensor::digits(idx, d, &mut w);
            let moved = apply_perm(&sigma, &Word::new(w.clone())).unwrap();
            let src = moved.letters().iter().fold(0, |a, &x| a * d + x as usize);
            assert_eq!(o, s[src]);
        }
        let back = permute_pushforward(&out, d, &sigma).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn identity_and_transposition() {
        let v = TruncatedTensorSeries::from_vector(&[0.5, -1.5], 3);
        let g = exp(&v).unwrap();
        let id = s_hat(&Permutation::identity(2).into(), g.series()).unwrap();
        assert_eq!(id.level(2), g.level(2));
        assert!(id.level(1).iter().all(|&x| x == 0.0));
        let sw = s_hat(&perm(&[2, 1]).into(), g.series()).unwrap();
        assert_eq!(sw.level(2), g.level(2));
        assert!(s_hat(&Permutation::identity(4).into(), g.series()).is_err());
    }

    #[test]
    fn character_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let perms: Vec<Permutation> = vec![
            Permutation::empty(),
            perm(&[1]),
            perm(&[1, 2]),
            perm(&[2, 1]),
        ];
        for _ in 0..5 {
            let s = random_group_like(2, 4, 1.0, &mut rng);
            for a in &perms {
                for b in &perms {
                    let lhs = conc_mul(
                        &s_hat(&a.clone().into(), s.series()).unwrap(),
                        &s_hat(&b.clone().into(), s.series()).unwrap(),
                    )
                    .unwrap();
                    let rhs = s_hat(&perm_product(a, b), s.series()).unwrap();
                    assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn change_of_variable() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let s = random_group_like(2, 4, 1.0, &mut rng);
            let t = random_group_like(2, 4, 1.0, &mut rng);
            for n1 in 0..=2 {
                for n2 in 1..=2 {
                    let e = change_of_variable_defect(s.series(), t.series(), n1, n2).unwrap();
                    assert!(e < 1e-12, "n1={n1} n2={n2}: {e}");
                }
            }
        }
    }
}
