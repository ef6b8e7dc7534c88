//! Seeded self-check suites over the algebraic and analytic identities.
//!
//! Each suite returns a [`Report`] listing one [`Check`] per identity with the
//! worst defect seen. Reports are deterministic for a fixed seed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::effects::{
    compose_effect, composition_constant, continuity_ratio, integrate_effect, iterated_constant, iterated_effect,
    operator_norm, reset, FiberElement, PolynomialMap, SlowlyVaryingOneForm,
};
use crate::error::{Error, Result};
use crate::hopf::{
    half_shuffle, half_shuffle_words, lemma1_check, perm_product, shuffle, Permutation, PermutationSum, Word,
    WordPolynomial,
};
use crate::integration::{rough_integral, RoughIntegralProblem};
use crate::one_form::{LipOneFormData, PolynomialOneForm};
use crate::signature::{lift_path, signature, signature_on, PiecewiseLinearPath, SampledRoughPath};
use crate::tensor::{
    change_of_variable_defect, conc_mul, group_like_defect, random_group_like, s_hat, Control,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Hopf,
    Signature,
    ChangeVar,
    Effects,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Hopf => "hopf",
            Suite::Signature => "signature",
            Suite::ChangeVar => "changevar",
            Suite::Effects => "effects",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hopf" => Ok(Suite::Hopf),
            "signature" => Ok(Suite::Signature),
            "changevar" => Ok(Suite::ChangeVar),
            "effects" => Ok(Suite::Effects),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected hopf, signature, changevar or effects"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random cases per check; each suite has its own default.
    pub cases: Option<usize>,
    /// Replaces every tolerance when set.
    pub tolerance: Option<f64>,
}


#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub worst_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Builder {
    opts: VerifyOptions,
    checks: Vec<Check>,
}

impl Builder {
    fn new(opts: VerifyOptions) -> Self {
        Self {
            opts,
            checks: Vec::new(),
        }
    }

    fn cases(&self, default: usize) -> usize {
        self.opts.cases.unwrap_or(default)
    }

    fn push(&mut self, name: &str, cases: usize, worst: f64, tol: f64, note: Option<String>) {
        let tol = self.opts.tolerance.unwrap_or(tol);
        self.checks.push(Check {
            name: name.into(),
            cases,
            worst_defect: worst,
            tolerance: tol,
            passed: worst <= tol,
            note,
        });
    }

    fn finish(self, suite: Suite) -> Report {
        Report {
            suite: suite.name().into(),
            seed: self.opts.seed,
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
        }
    }
}

pub fn run_suite(suite: Suite, opts: VerifyOptions) -> Result<Report> {
    match suite {
        Suite::Hopf => hopf_suite(opts),
        Suite::Signature => signature_suite(opts),
        Suite::ChangeVar => changevar_suite(opts),
        Suite::Effects => effects_suite(&EffectsInput::generated(opts.seed)?, opts),
    }
}

fn perm(images: &[u32]) -> Permutation {
    Permutation::new(images.to_vec()).expect("valid permutation")
}

fn perm_sum(ps: &[&[u32]]) -> PermutationSum {
    PermutationSum::from_terms(ps.iter().map(|x| (perm(x), 1)))
}

fn random_word(rng: &mut ChaCha8Rng, max_len: usize, alphabet: u32) -> Word {
    let n = rng.gen_range(1..=max_len);
    Word::new((0..n).map(|_| rng.gen_range(1..=alphabet)).collect())
}

fn random_perm(rng: &mut ChaCha8Rng, max_order: usize) -> Permutation {
    let n = rng.gen_range(0..=max_order);
    let mut images: Vec<u32> = (1..=n as u32).collect();
    for i in (1..n).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(images).expect("valid permutation")
}

/// Single letters and two-letter words over `{1, 2}`.
fn short_words() -> Vec<WordPolynomial> {
    let mut out: Vec<WordPolynomial> = (1..=2).map(|a| Word::letter(a).into()).collect();
    for a in 1..=2 {
        for b in 1..=2 {
            out.push(Word::new(vec![a, b]).into());
        }
    }
    out
}

/// Exact identities of words and permutations. Defects count mismatching cases.
pub fn hopf_suite(opts: VerifyOptions) -> Result<Report> {
    let mut b = Builder::new(opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut bad = 0;
    bad += usize::from(perm_product(&perm(&[1]), &perm(&[2, 1])) != perm_sum(&[&[1, 3, 2], &[3, 1, 2], &[3, 2, 1]]));
    bad += usize::from(
        half_shuffle(&perm(&[1]), &perm(&[3, 1, 2]))? != perm_sum(&[&[1, 4, 2, 3], &[4, 1, 2, 3], &[4, 2, 1, 3]]),
    );
    b.push("mr_worked_examples", 2, bad as f64, 0.0, None);

    let words = short_words();
    let (mut cases, mut bad) = (0, 0);
    for len in 2..=4usize {
        let total = words.len().pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let args: Vec<WordPolynomial> = (0..len)
                .map(|_| {
                    let w = words[c % words.len()].clone();
                    c /= words.len();
                    w
                })
                .collect();
            for n in 1..len {
                cases += 1;
                bad += usize::from(!lemma1_check(&args, n)?);
            }
        }
    }
    b.push("lemma1_exhaustive", cases, bad as f64, 0.0, None);

    let n = b.cases(200);
    let (mut comm, mut assoc, mut dendri) = (0, 0, 0);
    for _ in 0..n {
        let u = random_word(&mut rng, 4, 3);
        let v = random_word(&mut rng, 4, 3);
        let w = random_word(&mut rng, 3, 3);
        comm += usize::from(shuffle(&u, &v) != shuffle(&v, &u));
        let uv = shuffle(&u, &v);
        let vw = WordPolynomial::from(v.clone()).shuffle(&w.clone().into());
        assoc += usize::from(uv.shuffle(&w.clone().into()) != WordPolynomial::from(u.clone()).shuffle(&vw));
        let split = &half_shuffle_words(&u, &v)? + &half_shuffle_words(&v, &u)?;
        dendri += usize::from(split != shuffle(&u, &v));
    }
    b.push("shuffle_commutative", n, comm as f64, 0.0, None);
    b.push("shuffle_associative", n, assoc as f64, 0.0, None);
    b.push("half_shuffle_splits_shuffle", n, dendri as f64, 0.0, None);

    let mut assoc = 0;
    for _ in 0..n {
        let (x, y, z) = (random_perm(&mut rng, 3), random_perm(&mut rng, 3), random_perm(&mut rng, 2));
        let left = perm_product(&x, &y).product(&z.clone().into());
        let right = PermutationSum::from(x).product(&perm_product(&y, &z));
        assoc += usize::from(left != right);
    }
    b.push("mr_product_associative", n, assoc as f64, 0.0, None);
    Ok(b.finish(Suite::Hopf))
}

fn random_polygon(rng: &mut ChaCha8Rng, d: usize, segments: usize) -> PiecewiseLinearPath {
    let mut t = 0.0;
    let mut times = Vec::with_capacity(segments + 1);
    let mut points = Vec::with_capacity(segments + 1);
    for _ in 0..=segments {
        times.push(t);
        points.push((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        t += rng.gen_range(0.1..1.0);
    }
    PiecewiseLinearPath::new(times, points).expect("valid polygon")
}

/// Chen, reparametrisation, time reversal and group-likeness of signatures,
/// and the Lévy area of the unit circle.
pub fn signature_suite(opts: VerifyOptions) -> Result<Report> {
    let mut b = Builder::new(opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = b.cases(100);
    let (mut chen, mut reparam, mut reverse, mut defect) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let d = rng.gen_range(1..=3);
        let depth = rng.gen_range(1..=4);
        let segs = rng.gen_range(1..=8);
        let path = random_polygon(&mut rng, d, segs);
        let (s, e) = (path.start(), path.end());
        let whole = signature(&path, depth);
        let u = rng.gen_range(s..e);
        let split = signature_on(&path, depth, s, u)?.mul(&signature_on(&path, depth, u, e)?)?;
        chen = chen.max(split.series().max_abs_diff(whole.series())?);

        // same image, new clock and an extra breakpoint inside a segment
        let mut times: Vec<f64> = path.times().iter().map(|t| (t - s).powi(2) + 3.0 * t).collect();
        let mut points = path.points().to_vec();
        let lam = rng.gen_range(0.1..0.9);
        let mid: Vec<f64> = points[0].iter().zip(&points[1]).map(|(a, b)| a + lam * (b - a)).collect();
        times.insert(1, times[0] + lam * (times[1] - times[0]));
        points.insert(1, mid);
        let moved = signature(&PiecewiseLinearPath::new(times, points)?, depth);
        reparam = reparam.max(moved.series().max_abs_diff(whole.series())?);

        let back = signature(&path.reversed(), depth);
        reverse = reverse.max(back.series().max_abs_diff(whole.inverse().series())?);
        defect = defect.max(group_like_defect(whole.series()));
    }
    b.push("chen_identity", n, chen, 1e-10, None);
    b.push("reparametrisation_invariance", n, reparam, 1e-10, None);
    b.push("time_reversal_inverse", n, reverse, 1e-10, None);
    b.push("group_like_defect", n, defect, 1e-10, None);

    let circle = PiecewiseLinearPath::sample(
        |t| vec![(2.0 * std::f64::consts::PI * t).cos(), (2.0 * std::f64::consts::PI * t).sin()],
        0.0,
        1.0,
        1000,
    )?;
    let s = signature(&circle, 2);
    let area = 0.5 * (s.level(2)[1] - s.level(2)[2]);
    b.push(
        "circle_levy_area",
        1,
        (area - std::f64::consts::PI).abs(),
        1e-3,
        Some(format!("area {area}")),
    );
    Ok(b.finish(Suite::Signature))
}

/// The character property of `ŝ` and the change-of-variable identity.
pub fn changevar_suite(opts: VerifyOptions) -> Result<Report> {
    let mut b = Builder::new(opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let small: Vec<Permutation> = vec![Permutation::empty(), perm(&[1]), perm(&[1, 2]), perm(&[2, 1])];

    let n = b.cases(100);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let d = rng.gen_range(1..=3);
        let s = random_group_like(d, 5, 1.0, &mut rng);
        for x in &small {
            let sx = s_hat(&x.clone().into(), s.series())?;
            for y in &small {
                let lhs = conc_mul(&sx, &s_hat(&y.clone().into(), s.series())?)?;
                let rhs = s_hat(&perm_product(x, y), s.series())?;
                worst = worst.max(lhs.max_abs_diff(&rhs)?);
            }
        }
    }
    b.push("character_property", n, worst, 1e-12, None);

    let n = b.cases(50);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let d = rng.gen_range(1..=3);
        let s = random_group_like(d, 5, 1.0, &mut rng);
        let t = random_group_like(d, 5, 1.0, &mut rng);
        for n1 in 0..=2 {
            for n2 in 1..=2 {
                worst = worst.max(change_of_variable_defect(s.series(), t.series(), n1, n2)?);
            }
        }
    }
    b.push("change_of_variable", n, worst, 1e-10, None);
    Ok(b.finish(Suite::ChangeVar))
}

/// A path and a polynomial one-form for [`effects_suite`].
#[derive(Clone, Debug)]
pub struct EffectsInput {
    pub path: PiecewiseLinearPath,
    pub form: PolynomialOneForm,
    pub p: f64,
}

impl EffectsInput {
    /// A smooth planar curve with 64 segments and a random quadratic form.
    pub fn generated(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = PiecewiseLinearPath::sample(|t| vec![(3.0 * t).cos(), (2.0 * t).sin() + 0.3 * t], 0.0, 1.0, 64)?;
        let form = PolynomialOneForm::random(2, 2, 2, 1.0, &mut rng);
        Ok(Self { path, form, p: 2.5 })
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Every `step`-th sample index, always including the last.
fn strided(n: usize, max: usize) -> Vec<usize> {
    let step = n.div_ceil(max).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(step).collect();
    if *idx.last().expect("nonempty") != n - 1 {
        idx.push(n - 1);
    }
    idx
}

/// Inserts the geodesic midpoint of every sample interval.
fn refine(x: &SampledRoughPath) -> Result<SampledRoughPath> {
    let mut times = Vec::with_capacity(2 * x.times().len());
    let mut elements = Vec::with_capacity(2 * x.times().len());
    for w in x.times().windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        times.push(w[0]);
        elements.push(x.element_at(w[0])?);
        times.push(m);
        elements.push(x.element_at(m)?);
    }
    times.push(x.end());
    elements.push(x.element_at(x.end())?);
    SampledRoughPath::new(times, elements)
}

/// Invariants of slowly-varying one-forms and effects on one path and form.
pub fn effects_suite(input: &EffectsInput, opts: VerifyOptions) -> Result<Report> {
    let mut b = Builder::new(opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let p = input.p;
    let cap = p.floor() as usize;
    let deg = input.form.degree();
    let depth = (deg + 1).max(cap).max(2);
    let base = Arc::new(lift_path(&input.path, depth));
    let (s, t) = (base.start(), base.end());
    let d = base.dim();
    let nsamp = base.times().len();
    let omega = Control::linear(1.0);
    let theta = (cap + 1) as f64 / p;

    // reset cocycle over sample triples
    let phi = {
        let levels = (1..=depth)
            .map(|k| (0..2 * d.pow(k as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        FiberElement::new(d, 2, levels)?
    };
    let idx = strided(nsamp, 12);
    let el = base.elements();
    let (mut worst, mut cases) = (0.0f64, 0);
    for &i in &idx {
        for &j in idx.iter().filter(|&&j| j >= i) {
            for &k in idx.iter().filter(|&&k| k >= j) {
                let a = el[i].increment_to(&el[j])?;
                let c = el[j].increment_to(&el[k])?;
                let lhs = reset(&reset(&phi, &a)?, &c)?;
                let rhs = reset(&phi, &el[i].increment_to(&el[k])?)?;
                worst = worst.max(lhs.max_abs_diff(&rhs)?);
                cases += 1;
            }
        }
    }
    b.push("reset_cocycle", cases, worst, 1e-12, None);

    let id = SlowlyVaryingOneForm::level_one_identity(base.clone(), p)?;
    let h_id = integrate_effect(&id, s, t, f64::INFINITY)?;
    let worst = h_id
        .values
        .iter()
        .zip(input.path.points())
        .map(|(h, x)| {
            let inc: Vec<f64> = x.iter().zip(&input.path.points()[0]).map(|(a, b)| a - b).collect();
            l1_diff(h, &inc)
        })
        .fold(0.0, f64::max);
    b.push("identity_integrates_to_increment", nsamp, worst, 1e-12, None);

    // full Taylor stack of the form against the rough integral
    let lip = LipOneFormData::from_polynomial(&input.form, deg.max(cap) as f64 + 1.0);
    let taylor = SlowlyVaryingOneForm::local_taylor(base.clone(), &lip, deg, p)?;
    let h_taylor = integrate_effect(&taylor, s, t, f64::INFINITY)?;
    let mut prob = RoughIntegralProblem::new((*base).clone(), lip.clone(), p, (s, t), 1);
    prob.strict = false;
    let ri = rough_integral(&prob)?;
    b.push(
        "taylor_effect_matches_rough_integral",
        1,
        l1_diff(h_taylor.last(), &ri.level1),
        1e-8,
        (deg > cap).then(|| format!("form degree {deg} exceeds floor(p) = {cap}")),
    );

    let sq = PolynomialMap::tensor_square(d);
    let comp = compose_effect(&id, &sq, p + 1.0, f64::INFINITY)?;
    let h_comp = integrate_effect(&comp.form, s, t, f64::INFINITY)?;
    let hs = h_id.last();
    let want: Vec<f64> = (0..d * d).map(|r| hs[r / d] * hs[r % d]).collect();
    b.push(
        "compose_square_reproduces_map",
        1,
        l1_diff(h_comp.last(), &want),
        1e-8,
        (cap < 2).then(|| "exact only when floor(p) >= 2".to_string()),
    );
    let comp_const = composition_constant(&comp, &id, &omega, theta)?;

    let it = iterated_effect(&id, &id, f64::INFINITY)?;
    let h_it = integrate_effect(&it, s, t, f64::INFINITY)?;
    let sig = signature(&input.path, 2);
    b.push(
        "iterated_identity_is_level_two",
        1,
        l1_diff(h_it.last(), sig.level(2)),
        1e-8,
        (cap < 2).then(|| "exact only when floor(p) >= 2".to_string()),
    );
    let it_const = iterated_constant(&it, &id, &id, &omega, theta)?;

    // Young-type local estimate under one dyadic refinement
    let slow = SlowlyVaryingOneForm::local_taylor(base.clone(), &lip, cap.max(1) - 1, p)?;
    let ratio_at = |x: Arc<SampledRoughPath>| -> Result<f64> {
        let beta = SlowlyVaryingOneForm::local_taylor(x.clone(), &lip, cap.max(1) - 1, p)?;
        let h = integrate_effect(&beta, s, t, f64::INFINITY)?;
        let pv = Control::p_variation(x.times(), x.elements(), p)?;
        continuity_ratio(&beta, &h, &Control::linear(1.0).plus(pv), theta)
    };
    let coarse_path = Arc::new(SampledRoughPath::new(
        idx.iter().map(|&i| base.times()[i]).collect(),
        idx.iter().map(|&i| base.elements()[i].clone()).collect(),
    )?);
    let r0 = ratio_at(coarse_path.clone())?;
    let r1 = ratio_at(Arc::new(refine(&coarse_path)?))?;
    b.push(
        "continuity_ratio_stable_under_refinement",
        2,
        (r1 / r0 - 1.0).max(0.0),
        0.10,
        Some(format!("coarse {r0:e}, refined {r1:e}")),
    );

    // operator norm is a norm on sampled forms
    let mut worst: f64 = 0.0;
    let pairs = b.cases(5);
    for _ in 0..pairs {
        let mut random_form = || -> Result<SlowlyVaryingOneForm> {
            SlowlyVaryingOneForm::from_fn(base.clone(), p, |_, _| {
                let levels = (1..=cap.max(1))
                    .map(|k| (0..d.pow(k as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                FiberElement::new(d, 1, levels)
            })
        };
        let (x, y) = (random_form()?, random_form()?);
        let nx = operator_norm(&x, &omega, theta)?.value;
        let ny = operator_norm(&y, &omega, theta)?.value;
        let nxy = operator_norm(&x.axpy(1.0, &y)?, &omega, theta)?.value;
        let n3 = operator_norm(&x.scale(-2.5), &omega, theta)?.value;
        worst = worst.max((nxy - nx - ny).max(0.0) / (nx + ny)).max((n3 - 2.5 * nx).abs() / n3);
    }
    b.push("operator_norm_is_a_norm", pairs, worst, 1e-12, None);

    let norm = operator_norm(&slow, &omega, theta)?;
    let h_slow = integrate_effect(&slow, s, t, f64::INFINITY)?;
    let pvar_const = h_slow.p_variation(p) / norm.value;
    b.push(
        "constants",
        1,
        0.0,
        0.0,
        Some(format!(
            "sampled operator norm {:e}; |h|_p-var / norm {pvar_const:e}; composition {comp_const:e}; iterated {it_const:e}",
            norm.value
        )),
    );
    Ok(b.finish(Suite::Effects))
}
