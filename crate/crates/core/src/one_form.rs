//! Polynomial one-forms `p: ℝ^d → L(ℝ^d, ℝ^e)` and their lifts to the group.
//!
//! `(D^k p)(0)` is stored as an `e × d^{k+1}` row-major array. Within a row
//! the first `k` slots are derivative slots and the last slot takes `dx`.
//!
//! The group lift `F_p` has level `l` equal to
//! `Σ (D^{k₁}p ⊗ ⋯ ⊗ D^{k_l}p)(ŝ(m_≻(1_{k₁+1}, …, 1_{k_l+1})))`
//! summed over `k_i ∈ 0..=n`. The permutation sums depend only on the degree,
//! so they are computed once per `(n, l)` and cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::hopf::{m_succ_identities, Permutation, PermutationSum};
use crate::signature::SampledRoughPath;
use crate::tensor::{accumulate_pullback, GroupElement, TruncatedTensorSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialOneForm {
    dim_in: usize,
    dim_out: usize,
    degree: usize,
    coeffs: Vec<Vec<f64>>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Contracts the first slot of each row of an `e × d^m` array with `v`.
fn contract_leading(arr: &[f64], rows: usize, d: usize, v: &[f64]) -> Vec<f64> {
    let row = arr.len() / rows;
    let tail = row / d;
    let mut out = vec![0.0; rows * tail];
    for r in 0..rows {
        let dst = &mut out[r * tail..(r + 1) * tail];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let src = &arr[r * row + i * tail..r * row + (i + 1) * tail];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += vi * x;
            }
        }
    }
    out
}

/// All permutations of `0..k` in lexicographic order.
fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Permutation of `k + 1` slots acting on the first `k` only.
fn slot_permutation(p: &[usize]) -> Permutation {
    let mut images: Vec<u32> = p.iter().map(|&i| i as u32 + 1).collect();
    images.push(p.len() as u32 + 1);
    Permutation::new(images).expect("valid slot permutation")
}

impl PolynomialOneForm {
    pub fn new(dim_in: usize, dim_out: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "a one-form needs positive dimensions and at least one coefficient array".into(),
            ));
        }
        for (k, c) in coeffs.iter().enumerate() {
            let want = dim_out * dim_in.pow(k as u32 + 1);
            if c.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    found: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient in derivative {k}"
                )));
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            degree: coeffs.len() - 1,
            coeffs,
        })
    }

    /// Constant form `v ↦ A` with `A` given as `e × d` row-major.
    pub fn constant(dim_in: usize, dim_out: usize, a: Vec<f64>) -> Result<Self> {
        Self::new(dim_in, dim_out, vec![a])
    }

    /// Random form with symmetric derivative slots and entries in `[−scale, scale]`.
    pub fn random<R: Rng + ?Sized>(dim_in: usize, dim_out: usize, degree: usize, scale: f64, rng: &mut R) -> Self {
        let coeffs = (0..=degree)
            .map(|k| {
                (0..dim_out * dim_in.pow(k as u32 + 1))
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect()
            })
            .collect();
        Self::new(dim_in, dim_out, coeffs).expect("shapes").symmetrized()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s)?;
        raw.validated()
    }

    /// Re-checks shapes after deserialization.
    pub fn validated(self) -> Result<Self> {
        let degree = self.degree;
        let form = Self::new(self.dim_in, self.dim_out, self.coeffs)?;
        if form.degree != degree {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} does not match {} coefficient arrays",
                form.coeffs.len()
            )));
        }
        Ok(form)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(D^k p)(0)` as `e × d^{k+1}`.
    pub fn coeff(&self, k: usize) -> &[f64] {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Largest deviation from symmetry in the derivative slots.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 2..=self.degree {
            let width = self.dim_in.pow(k as u32 + 1);
            for p in all_permutations(k) {
                let sigma = slot_permutation(&p);
                for row in self.coeffs[k].chunks(width) {
                    let moved = crate::tensor::permute_pullback(row, self.dim_in, &sigma).expect("shape");
                    for (a, b) in row.iter().zip(&moved) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// Averages each derivative array over permutations of its derivative slots.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for k in 2..=self.degree {
            let width = self.dim_in.pow(k as u32 + 1);
            let perms = all_permutations(k);
            let w = 1.0 / perms.len() as f64;
            for (r, row) in self.coeffs[k].chunks(width).enumerate() {
                let mut acc = vec![0.0; width];
                for p in &perms {
                    let moved =
                        crate::tensor::permute_pullback(row, self.dim_in, &slot_permutation(p)).expect("shape");
                    for (o, x) in acc.iter_mut().zip(moved) {
                        *o += w * x;
                    }
                }
                out.coeffs[k][r * width..(r + 1) * width].copy_from_slice(&acc);
            }
        }
        out
    }

    /// `p(v) ∈ L(ℝ^d, ℝ^e)` as an `e × d` array.
    pub fn matrix_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: v.len(),
            });
        }
        let e = self.dim_out;
        let mut out = vec![0.0; e * self.dim_in];
        for (k, c) in self.coeffs.iter().enumerate() {
            let mut arr = c.clone();
            for _ in 0..k {
                arr = contract_leading(&arr, e, self.dim_in, v);
            }
            let f = 1.0 / factorial(k);
            for (o, x) in out.iter_mut().zip(arr) {
                *o += f * x;
            }
        }
        Ok(out)
    }

    /// `p(v)(w)`.
    pub fn evaluate(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: w.len(),
            });
        }
        let m = self.matrix_at(v)?;
        Ok(m.chunks(self.dim_in)
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// The form `v ↦ p(v + a)`, whose coefficients are `(D^j p)(a)`.
    pub fn shifted(&self, a: &[f64]) -> Result<Self> {
        if a.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: a.len(),
            });
        }
        let e = self.dim_out;
        let mut coeffs: Vec<Vec<f64>> = self.coeffs.iter().map(|c| vec![0.0; c.len()]).collect();
        for (k, c) in self.coeffs.iter().enumerate() {
            let mut arr = c.clone();
            for m in 0..=k {
                // arr = D^k p(0) contracted m times with a, lands in D^{k−m}
                let f = 1.0 / factorial(m);
                for (o, x) in coeffs[k - m].iter_mut().zip(&arr) {
                    *o += f * x;
                }
                if m < k {
                    arr = contract_leading(&arr, e, self.dim_in, a);
                }
            }
        }
        Self::new(self.dim_in, self.dim_out, coeffs)
    }

    /// Coefficients truncated or zero-padded to `degree`.
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(degree + 1);
        while coeffs.len() < degree + 1 {
            let k = coeffs.len();
            coeffs.push(vec![0.0; self.dim_out * self.dim_in.pow(k as u32 + 1)]);
        }
        Self::new(self.dim_in, self.dim_out, coeffs).expect("shapes")
    }

    /// `f_p(g) = Σ_k (D^k p)(0) g^{k+1}`.
    pub fn f_p(&self, g: &TruncatedTensorSeries) -> Result<Vec<f64>> {
        self.check_input(g, self.degree + 1)?;
        let mut out = vec![0.0; self.dim_out];
        for (k, c) in self.coeffs.iter().enumerate() {
            let lv = g.level(k + 1);
            for (o, row) in out.iter_mut().zip(c.chunks(lv.len())) {
                *o += row.iter().zip(lv).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    fn check_input(&self, g: &TruncatedTensorSeries, depth: usize) -> Result<()> {
        if g.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: g.dim(),
            });
        }
        if g.depth() < depth {
            return Err(Error::InsufficientDepth {
                required: depth,
                available: g.depth(),
            });
        }
        Ok(())
    }

    /// `F_p(s)` truncated at `out_depth`; needs `s` of depth `out_depth·(n+1)`.
    pub fn lift(&self, s: &TruncatedTensorSeries, out_depth: usize) -> Result<GroupElement> {
        self.lift_with(s, out_depth, Execution::default())
    }

    pub fn lift_with(&self, s: &TruncatedTensorSeries, out_depth: usize, exec: Execution) -> Result<GroupElement> {
        self.check_input(s, out_depth * (self.degree + 1))?;
        let e = self.dim_out;
        let mut out = TruncatedTensorSeries::unit(e, out_depth);
        for l in 1..=out_depth {
            let plan = level_plan(self.degree, l)?;
            let live: Vec<&PlanTerm> = plan
                .iter()
                .filter(|t| t.ks.iter().all(|&k| self.coeffs[k].iter().any(|&x| x != 0.0)))
                .collect();
            let parts = map_indexed(live.len(), exec, |i| self.lift_term(live[i], s));
            let lv = out.level_mut(l);
            for part in parts {
                for (o, x) in lv.iter_mut().zip(part) {
                    *o += x;
                }
            }
        }
        GroupElement::new(out)
    }

    /// One `k`-tuple of level `l`: pull back level `K` of `s` by the
    /// permutations, then contract blocks from the right.
    fn lift_term(&self, term: &PlanTerm, s: &TruncatedTensorSeries) -> Vec<f64> {
        let d = self.dim_in;
        let e = self.dim_out;
        let kk: usize = term.ks.iter().map(|k| k + 1).sum();
        let src = s.level(kk);
        let mut acc = vec![0.0; src.len()];
        for (inv, c) in &term.perms {
            accumulate_pullback(src, d, inv, *c, &mut acc);
        }
        // acc: [prefix word] × [outputs so far]
        let mut done = 1usize;
        for &k in term.ks.iter().rev() {
            let m = d.pow(k as u32 + 1);
            let coef = &self.coeffs[k];
            let pre = acc.len() / (m * done);
            let mut next = vec![0.0; pre * e * done];
            for p in 0..pre {
                for o in 0..e {
                    let dst = &mut next[(p * e + o) * done..(p * e + o + 1) * done];
                    for (idx, &c) in coef[o * m..(o + 1) * m].iter().enumerate() {
                        if c == 0.0 {
                            continue;
                        }
                        let base = (p * m + idx) * done;
                        for (x, &y) in dst.iter_mut().zip(&acc[base..base + done]) {
                            *x += c * y;
                        }
                    }
                }
            }
            acc = next;
            done *= e;
        }
        acc
    }
}

/// `(k₁, …, k_l)` with the terms of `m_≻(1_{k₁+1}, …, 1_{k_l+1})`, each stored as
/// `(σ⁻¹, coefficient)`.
struct PlanTerm {
    ks: Vec<usize>,
    perms: Vec<(Permutation, f64)>,
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<Vec<PlanTerm>>>>;

fn level_plan(degree: usize, l: usize) -> Result<Arc<Vec<PlanTerm>>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().expect("plan cache").get(&(degree, l)) {
        return Ok(p.clone());
    }
    let mut terms = Vec::new();
    for st in sigma_terms(degree, l)? {
        let perms = st
            .permutations
            .to_f64_terms()
            .into_iter()
            .map(|(p, c)| (p.inverse(), c))
            .collect();
        terms.push(PlanTerm { ks: st.ks, perms });
    }
    let plan = Arc::new(terms);
    cache
        .lock()
        .expect("plan cache")
        .insert((degree, l), plan.clone());
    Ok(plan)
}

/// One summand of `σ_l`: derivative orders `k_i` and `m_≻(1_{k₁+1}, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaTerm {
    pub ks: Vec<usize>,
    pub permutations: PermutationSum,
}

impl SigmaTerm {
    /// `(D^{k₁}p)(0) ⊗ ⋯ ⊗ (D^{k_l}p)(0)` as an `e^l × d^K` array, output
    /// indices and input slots both in block order.
    pub fn coefficient(&self, p: &PolynomialOneForm) -> Vec<f64> {
        let (d, e) = (p.dim_in, p.dim_out);
        let mut acc = vec![1.0];
        let mut rows = 1usize;
        let mut cols = 1usize;
        for &k in &self.ks {
            let m = d.pow(k as u32 + 1);
            let c = &p.coeffs[k];
            let mut next = vec![0.0; rows * e * cols * m];
            for r in 0..rows {
                for o in 0..e {
                    for cc in 0..cols {
                        let a = acc[r * cols + cc];
                        for idx in 0..m {
                            next[(r * e + o) * cols * m + cc * m + idx] = a * c[o * m + idx];
                        }
                    }
                }
            }
            acc = next;
            rows *= e;
            cols *= m;
        }
        acc
    }
}

fn sigma_terms(degree: usize, l: usize) -> Result<Vec<SigmaTerm>> {
    if l == 0 {
        return Err(Error::InvalidArgument("sigma_l needs l >= 1".into()));
    }
    let base = degree + 1;
    let count = base.pow(l as u32);
    let mut out = Vec::with_capacity(count);
    for code in 0..count {
        let mut ks = vec![0usize; l];
        let mut c = code;
        for slot in ks.iter_mut().rev() {
            *slot = c % base;
            c /= base;
        }
        let orders: Vec<usize> = ks.iter().map(|k| k + 1).collect();
        out.push(SigmaTerm {
            ks,
            permutations: m_succ_identities(&orders)?,
        });
    }
    Ok(out)
}

/// The summands of `σ_l` for a form of the given degree.
pub fn sigma_l(p: &PolynomialOneForm, l: usize) -> Result<Vec<SigmaTerm>> {
    sigma_terms(p.degree, l)
}

/// A point-evaluated derivative stack `x ↦ θ^j(x)`.
pub type StackFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `Lip(γ)` data given as explicit derivative stacks `θ^0, …, θ^{⌊γ⌋}`, each
/// returning an `e × d^{j+1}` array.
#[derive(Clone)]
pub struct LipOneFormData {
    dim_in: usize,
    dim_out: usize,
    stack: Vec<StackFn>,
    bound: f64,
    gamma: f64,
}

impl std::fmt::Debug for LipOneFormData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LipOneFormData")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("stack_len", &self.stack.len())
            .field("bound", &self.bound)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl LipOneFormData {
    pub fn new(dim_in: usize, dim_out: usize, stack: Vec<StackFn>, bound: f64, gamma: f64) -> Result<Self> {
        if stack.is_empty() {
            return Err(Error::InvalidArgument("empty derivative stack".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            dim_in,
            dim_out,
            stack,
            bound,
            gamma,
        })
    }

    /// Exact stack of a polynomial form, `θ^j(x) = (D^j p)(x)`, carried up
    /// to `j = max(deg p, ⌊γ⌋)` with zero derivatives above the degree.
    pub fn from_polynomial(p: &PolynomialOneForm, gamma: f64) -> Self {
        let top = p.degree.max(gamma.floor() as usize);
        let p = p.with_degree(top);
        let stack = (0..=top)
            .map(|j| {
                let p = p.clone();
                Arc::new(move |x: &[f64]| p.shifted(x).expect("dimension").coeffs[j].clone()) as StackFn
            })
            .collect();
        Self {
            dim_in: p.dim_in,
            dim_out: p.dim_out,
            stack,
            bound: 0.0,
            gamma,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    /// `θ^j(x)`.
    pub fn theta(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.stack.get(j).ok_or(Error::InsufficientDepth {
            required: j + 1,
            available: self.stack.len(),
        })?;
        let v = f(x);
        let want = self.dim_out * self.dim_in.pow(j as u32 + 1);
        if v.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                found: v.len(),
            });
        }
        Ok(v)
    }

    /// Degree-`cap` Taylor model based at `x`, not re-based.
    pub fn taylor_at(&self, x: &[f64], cap: usize) -> Result<PolynomialOneForm> {
        if x.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: x.len(),
            });
        }
        let coeffs = (0..=cap).map(|j| self.theta(j, x)).collect::<Result<Vec<_>>>()?;
        PolynomialOneForm::new(self.dim_in, self.dim_out, coeffs)
    }

    /// `max_j ‖R_j(x, y)‖₁ / |x − y|^{γ − j}` for `j ≤ ⌊γ⌋` available in the
    /// stack, with `R_j` the Taylor remainder of `θ^j` expanded at `y`.
    pub fn remainder_ratio(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let top = (self.gamma.floor() as usize).min(self.stack.len() - 1);
        let model = self.taylor_at(y, top)?;
        let h: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dist: f64 = h.iter().map(|v| v.abs()).sum();
        if dist == 0.0 {
            return Ok(0.0);
        }
        let approx = model.shifted(&h)?;
        let mut worst: f64 = 0.0;
        for j in 0..=top {
            let exact = self.theta(j, x)?;
            let r: f64 = exact.iter().zip(&approx.coeffs[j]).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(r / dist.powf(self.gamma - j as f64));
        }
        Ok(worst)
    }
}

/// `p_{x_s}` re-based to 0: the degree-`cap` Taylor model of `lip` at `x_s`,
/// expressed through its derivatives at the origin.
pub fn local_taylor_form(lip: &LipOneFormData, x_s: &[f64], cap: usize) -> Result<PolynomialOneForm> {
    let neg: Vec<f64> = x_s.iter().map(|v| -v).collect();
    lip.taylor_at(x_s, cap)?.shifted(&neg)
}

/// How [`almost_multiplicative_y`] evaluates `Y_{s,t}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum YRoute {
    /// `F_p(X_s)⁻¹ F_p(X_t)`.
    Difference,
    /// `F_q(X_s⁻¹X_t)` with `q(v) = p(x_s + v)`.
    #[default]
    Increment,
}

/// `Y_{s,t}` for a form given at base 0.
pub fn almost_multiplicative_y(
    p: &PolynomialOneForm,
    x: &SampledRoughPath,
    s: f64,
    t: f64,
    out_depth: usize,
    route: YRoute,
) -> Result<GroupElement> {
    x.check_interval(s, t)?;
    if s == t {
        return Ok(GroupElement::identity(p.dim_out, out_depth));
    }
    let xs = x.element_at(s)?;
    let xt = x.element_at(t)?;
    match route {
        YRoute::Difference => {
            let a = p.lift(xs.series(), out_depth)?;
            let b = p.lift(xt.series(), out_depth)?;
            a.increment_to(&b)
        }
        YRoute::Increment => {
            let q = p.shifted(xs.level(1))?;
            q.lift(xs.increment_to(&xt)?.series(), out_depth)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{lift_path, signature, PiecewiseLinearPath};
    use crate::tensor::group_like_defect;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_form() -> PolynomialOneForm {
        PolynomialOneForm::new(1, 1, vec![vec![0.0], vec![1.0]]).unwrap()
    }

    fn unit_time_lift(depth: usize) -> GroupElement {
        let p = PiecewiseLinearPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]).unwrap();
        signature(&p, depth)
    }

    #[test]
    fn evaluation_examples() {
        let c = PolynomialOneForm::constant(2, 1, vec![2.0, -1.0]).unwrap();
        assert_eq!(c.evaluate(&[5.0, 7.0], &[1.0, 1.0]).unwrap(), vec![1.0]);
        assert_eq!(identity_form().evaluate(&[3.0], &[2.0]).unwrap(), vec![6.0]);
        assert!(c.evaluate(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn base_point_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = PolynomialOneForm::random(2, 2, 3, 1.0, &mut rng);
        assert!(p.max_asymmetry() < 1e-15);
        let v0 = [0.4, -0.7];
        let at_v0 = p.shifted(&v0).unwrap();
        for _ in 0..10 {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let w = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let direct = p.evaluate(&v, &w).unwrap();
            let dv = [v[0] - v0[0], v[1] - v0[1]];
            let rebased = at_v0.evaluate(&dv, &w).unwrap();
            for (a, b) in direct.iter().zip(&rebased) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let back = at_v0.shifted(&[-0.4, 0.7]).unwrap();
        for (a, b) in back.coeffs.iter().flatten().zip(p.coeffs.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_lifts() {
        let p = identity_form();
        let g = unit_time_lift(2);
        assert_eq!(p.f_p(GroupElement::identity(1, 2).series()).unwrap(), vec![0.0]);
        assert!((p.f_p(g.series()).unwrap()[0] - 0.5).abs() < 1e-15);
        let g = unit_time_lift(4);
        let f = p.lift(g.series(), 2).unwrap();
        let want = [1.0, 0.5, 0.125];
        for (k, w) in want.iter().enumerate() {
            assert!((f.level(k)[0] - w).abs() < 1e-15, "level {k}");
        }
        assert!(matches!(
            p.lift(g.series(), 3),
            Err(Error::InsufficientDepth { required: 6, .. })
        ));
        let one = p.lift(GroupElement::identity(1, 4).series(), 2).unwrap();
        assert_eq!(one, GroupElement::identity(1, 2));
    }

    #[test]
    fn sigma_examples() {
        let c = PolynomialOneForm::constant(1, 1, vec![1.0]).unwrap();
        let s = sigma_l(&c, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].permutations, Permutation::identity(1).into());
        let s = sigma_l(&identity_form(), 1).unwrap();
        assert_eq!(s[1].permutations, Permutation::identity(2).into());
        let s = sigma_l(&c, 2).unwrap();
        assert_eq!(s[0].permutations, Permutation::identity(2).into());
        assert!(sigma_l(&c, 0).is_err());
    }

    #[test]
    fn lift_matches_dense_sigma_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = PolynomialOneForm::random(2, 2, 1, 1.0, &mut rng);
        let s = crate::tensor::random_group_like(2, 4, 1.0, &mut rng);
        let f = p.lift(s.series(), 2).unwrap();
        for l in 1..=2 {
            let mut want = vec![0.0; 2usize.pow(l as u32)];
            for term in sigma_l(&p, l).unwrap() {
                let coef = term.coefficient(&p);
                let hat = crate::tensor::s_hat(&term.permutations, s.series()).unwrap();
                let kk: usize = term.ks.iter().map(|k| k + 1).sum();
                let lv = hat.level(kk);
                for (o, slot) in want.iter_mut().enumerate() {
                    *slot += coef[o * lv.len()..(o + 1) * lv.len()]
                        .iter()
                        .zip(lv)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
            for (a, b) in f.level(l).iter().zip(&want) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lift_is_group_like_and_level_one_is_f_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..3 {
            let p = PolynomialOneForm::random(2, 2, 2, 1.0, &mut rng);
            let s = crate::tensor::random_group_like(2, 9, 0.8, &mut rng);
            let f = p.lift(s.series(), 3).unwrap();
            assert!(group_like_defect(f.series()) < 1e-10);
            let fp = p.f_p(s.series()).unwrap();
            assert_eq!(f.level(1), fp.as_slice());
        }
    }

    #[test]
    fn local_taylor_examples() {
        let c = LipOneFormData::from_polynomial(&PolynomialOneForm::constant(2, 1, vec![1.0, 2.0]).unwrap(), 3.0);
        let a = local_taylor_form(&c, &[0.3, 0.1], 0).unwrap();
        let b = local_taylor_form(&c, &[-5.0, 2.0], 0).unwrap();
        assert_eq!(a, b);
        let lin = LipOneFormData::from_polynomial(&identity_form(), 2.0);
        let q = local_taylor_form(&lin, &[1.0], 1).unwrap();
        assert_eq!(q.coeffs, vec![vec![0.0], vec![1.0]]);
        let sin_stack: Vec<StackFn> = vec![
            Arc::new(|x: &[f64]| vec![x[0].sin()]),
            Arc::new(|x: &[f64]| vec![x[0].cos()]),
            Arc::new(|x: &[f64]| vec![-x[0].sin()]),
        ];
        let lip = LipOneFormData::new(1, 1, sin_stack, 1.0, 2.5).unwrap();
        let q = local_taylor_form(&lip, &[0.7], 2).unwrap();
        assert!((q.evaluate(&[0.7], &[1.0]).unwrap()[0] - 0.7f64.sin()).abs() < 1e-14);
        assert!(local_taylor_form(&lip, &[0.7], 3).is_err());
        assert!(lip.remainder_ratio(&[0.2], &[0.25]).unwrap() <= 1.0);
    }

    #[test]
    fn y_routes_agree_and_telescope() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let p = PolynomialOneForm::random(2, 2, 2, 1.0, &mut rng);
        let path = PiecewiseLinearPath::new(
            vec![0.0, 0.3, 0.6, 1.0],
            vec![vec![0.1, 0.2], vec![0.5, -0.1], vec![0.2, 0.4], vec![-0.3, 0.1]],
        )
        .unwrap();
        let x = lift_path(&path, 6);
        let a = almost_multiplicative_y(&p, &x, 0.3, 1.0, 2, YRoute::Difference).unwrap();
        let b = almost_multiplicative_y(&p, &x, 0.3, 1.0, 2, YRoute::Increment).unwrap();
        assert!(a.series().max_abs_diff(b.series()).unwrap() < 1e-10);
        let su = almost_multiplicative_y(&p, &x, 0.0, 0.6, 2, YRoute::Difference).unwrap();
        let ut = almost_multiplicative_y(&p, &x, 0.6, 1.0, 2, YRoute::Difference).unwrap();
        let st = almost_multiplicative_y(&p, &x, 0.0, 1.0, 2, YRoute::Difference).unwrap();
        assert!(su.mul(&ut).unwrap().series().max_abs_diff(st.series()).unwrap() < 1e-12);
        let same = almost_multiplicative_y(&p, &x, 0.6, 0.6, 2, YRoute::Increment).unwrap();
        assert_eq!(same, GroupElement::identity(2, 2));
    }
}
