use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roughalg::hopf::{half_shuffle_words, perm_product, shuffle, Permutation, PermutationSum, Word, WordPolynomial};
use roughalg::signature::{signature, signature_on, PiecewiseLinearPath};
use roughalg::tensor::{conc_mul_with, group_like_defect, random_group_like};
use roughalg::Execution;

fn word(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(1u32..=3, 1..=max_len).prop_map(Word::new)
}

fn permutation(max_order: usize) -> impl Strategy<Value = Permutation> {
    (1..=max_order)
        .prop_flat_map(|n| Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle())
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn polygon() -> impl Strategy<Value = PiecewiseLinearPath> {
    (1usize..=3)
        .prop_flat_map(|d| {
            prop::collection::vec((0.05f64..1.0, prop::collection::vec(-1.0f64..1.0, d)), 2..8)
        })
        .prop_map(|pts| {
            let mut t = 0.0;
            let (mut times, mut points) = (Vec::new(), Vec::new());
            for (dt, x) in pts {
                times.push(t);
                points.push(x);
                t += dt;
            }
            PiecewiseLinearPath::new(times, points).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_is_commutative(u in word(4), v in word(4)) {
        prop_assert_eq!(shuffle(&u, &v), shuffle(&v, &u));
    }

    #[test]
    fn shuffle_is_associative(u in word(3), v in word(3), w in word(3)) {
        let left = shuffle(&u, &v).shuffle(&w.clone().into());
        let right = WordPolynomial::from(u).shuffle(&shuffle(&v, &w));
        prop_assert_eq!(left, right);
    }

    #[test]
    fn half_shuffles_split_the_shuffle(u in word(4), v in word(4)) {
        let split = &half_shuffle_words(&u, &v).unwrap() + &half_shuffle_words(&v, &u).unwrap();
        prop_assert_eq!(split, shuffle(&u, &v));
    }

    #[test]
    fn mr_product_is_associative(a in permutation(3), b in permutation(3), c in permutation(2)) {
        let left = perm_product(&a, &b).product(&PermutationSum::from(c.clone()));
        let right = PermutationSum::from(a).product(&perm_product(&b, &c));
        prop_assert_eq!(left, right);
    }

    #[test]
    fn mr_product_mass_is_binomial(a in permutation(4), b in permutation(4)) {
        let (n, m) = (a.order() as u64, b.order() as u64);
        let binom: u64 = (1..=m).fold(1, |acc, k| acc * (n + k) / k);
        prop_assert_eq!(perm_product(&a, &b).mass(), binom.into());
    }

    #[test]
    fn chen_identity(path in polygon(), frac in 0.01f64..0.99, depth in 1usize..=4) {
        let (s, e) = (path.start(), path.end());
        let u = s + frac * (e - s);
        let joined = signature_on(&path, depth, s, u).unwrap().mul(&signature_on(&path, depth, u, e).unwrap()).unwrap();
        let whole = signature(&path, depth);
        prop_assert!(joined.series().max_abs_diff(whole.series()).unwrap() < 1e-10);
        prop_assert!(group_like_defect(whole.series()) < 1e-10);
    }

    #[test]
    fn parallel_product_is_bit_identical(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_group_like(d, 5, 1.0, &mut rng);
        let b = random_group_like(d, 5, 1.0, &mut rng);
        let seq = conc_mul_with(a.series(), b.series(), Execution::Sequential).unwrap();
        let par = conc_mul_with(a.series(), b.series(), Execution::Parallel).unwrap();
        prop_assert_eq!(seq, par);
    }
}
