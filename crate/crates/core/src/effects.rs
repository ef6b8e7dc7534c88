//! Slowly-varying one-forms along a sampled rough path, their integrals
//! (effects), and the operations that keep the class closed: composition
//! with smooth maps and iterated integration.
//!
//! A fiber element is a stack `φ = (φ¹, …, φᴺ)` with `φᵏ` a linear map from
//! level `k` of the tensor algebra into `U`. It acts on a series `x` by
//! `φ(x) = Σ_k φᵏ(xᵏ)`; there is no constant term.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::hopf::{half_shuffle, product_of_identities, Permutation, PermutationSum};
use crate::one_form::LipOneFormData;
use crate::sewing::SewingReport;
use crate::signature::SampledRoughPath;
use crate::tensor::{accumulate_pullback, p_variation_power_from, Control, GroupElement, TruncatedTensorSeries};

/// A stack of linear maps `φᵏ : (ℝ^d)^{⊗k} → ℝ^e`, each stored as an
/// `e × d^k` row-major array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberElement {
    dim_in: usize,
    dim_out: usize,
    levels: Vec<Vec<f64>>,
}

impl FiberElement {
    pub fn new(dim_in: usize, dim_out: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || levels.is_empty() {
            return Err(Error::InvalidArgument(
                "a fiber element needs positive dimensions and at least one level".into(),
            ));
        }
        for (i, l) in levels.iter().enumerate() {
            let want = dim_out * dim_in.pow(i as u32 + 1);
            if l.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    found: l.len(),
                });
            }
        }
        Ok(Self { dim_in, dim_out, levels })
    }

    pub fn zeros(dim_in: usize, dim_out: usize, depth: usize) -> Self {
        let levels = (1..=depth.max(1))
            .map(|k| vec![0.0; dim_out * dim_in.pow(k as u32)])
            .collect();
        Self { dim_in, dim_out, levels }
    }

    /// `x ↦ x¹` on `ℝ^d`, padded with zero levels to `depth`.
    pub fn level_one_identity(dim: usize, depth: usize) -> Self {
        let mut f = Self::zeros(dim, dim, depth);
        for i in 0..dim {
            f.levels[0][i * dim + i] = 1.0;
        }
        f
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `φᵏ` for `k ≥ 1`.
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Truncated or zero-padded to `depth` levels.
    pub fn with_depth(&self, depth: usize) -> Self {
        let mut levels = self.levels.clone();
        levels.truncate(depth.max(1));
        while levels.len() < depth {
            let k = levels.len() + 1;
            levels.push(vec![0.0; self.dim_out * self.dim_in.pow(k as u32)]);
        }
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            levels,
        }
    }

    /// `φ(x) = Σ_k φᵏ(xᵏ)`.
    pub fn eval(&self, x: &TruncatedTensorSeries) -> Result<Vec<f64>> {
        if x.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: x.dim(),
            });
        }
        if x.depth() < self.depth() {
            return Err(Error::InsufficientDepth {
                required: self.depth(),
                available: x.depth(),
            });
        }
        let mut out = vec![0.0; self.dim_out];
        for (k, lev) in self.levels.iter().enumerate() {
            let xk = x.level(k + 1);
            for (o, row) in out.iter_mut().zip(lev.chunks(xk.len())) {
                *o += row.iter().zip(xk).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// `‖φᵏ‖`, the operator norm for `ℓ¹` on both sides: the largest column sum.
    pub fn level_norm(&self, k: usize) -> f64 {
        let cols = self.dim_in.pow(k as u32);
        let lev = &self.levels[k - 1];
        (0..cols)
            .map(|w| (0..self.dim_out).map(|i| lev[i * cols + w].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_k ‖φᵏ‖`.
    pub fn norm(&self) -> f64 {
        (1..=self.depth()).map(|k| self.level_norm(k)).fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim_in != other.dim_in || self.dim_out != other.dim_out {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in * self.dim_out,
                found: other.dim_in * other.dim_out,
            });
        }
        Ok(())
    }

    /// Levelwise `self + c·other`, padded to the larger depth.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let depth = self.depth().max(other.depth());
        let mut out = self.with_depth(depth);
        for (a, b) in out.levels.iter_mut().zip(&other.levels) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.levels.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self
            .sub(other)?
            .levels
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs())))
    }
}

/// `x ↦ φ(a x) − φ(a)`, computed on the stack.
///
/// Level `j` of the result is `Σ_{k ≥ j} Σ_{|u| = k−j} aᵘ φᵏ(u ·)`.
pub fn reset(phi: &FiberElement, a: &GroupElement) -> Result<FiberElement> {
    let d = phi.dim_in;
    if a.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: a.dim(),
        });
    }
    let n = phi.depth();
    if a.depth() + 1 < n {
        return Err(Error::InsufficientDepth {
            required: n - 1,
            available: a.depth(),
        });
    }
    let mut levels = Vec::with_capacity(n);
    for j in 1..=n {
        let cols = d.pow(j as u32);
        let mut out = vec![0.0; phi.dim_out * cols];
        for k in j..=n {
            let au = a.level(k - j);
            let src = phi.level(k);
            let src_cols = d.pow(k as u32);
            for i in 0..phi.dim_out {
                let row = &src[i * src_cols..(i + 1) * src_cols];
                let dst = &mut out[i * cols..(i + 1) * cols];
                for (u, &c) in au.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for (o, x) in dst.iter_mut().zip(&row[u * cols..(u + 1) * cols]) {
                        *o += c * x;
                    }
                }
            }
        }
        levels.push(out);
    }
    FiberElement::new(d, phi.dim_out, levels)
}

/// A fiber element at every sample time of a rough path.
#[derive(Clone, Debug)]
pub struct SlowlyVaryingOneForm {
    base: Arc<SampledRoughPath>,
    fibers: Vec<FiberElement>,
    p: f64,
}

impl SlowlyVaryingOneForm {
    pub fn new(base: Arc<SampledRoughPath>, fibers: Vec<FiberElement>, p: f64) -> Result<Self> {
        if fibers.len() != base.times().len() {
            return Err(Error::LengthMismatch {
                expected: base.times().len(),
                found: fibers.len(),
            });
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be a finite real >= 1, got {p}")));
        }
        let (e, n) = (fibers[0].dim_out, fibers[0].depth());
        for f in &fibers {
            if f.dim_in != base.dim() {
                return Err(Error::DimensionMismatch {
                    expected: base.dim(),
                    found: f.dim_in,
                });
            }
            if f.dim_out != e {
                return Err(Error::DimensionMismatch {
                    expected: e,
                    found: f.dim_out,
                });
            }
            if f.depth() != n {
                return Err(Error::DepthMismatch {
                    expected: n,
                    found: f.depth(),
                });
            }
        }
        if n > base.depth() {
            return Err(Error::InsufficientDepth {
                required: n,
                available: base.depth(),
            });
        }
        Ok(Self { base, fibers, p })
    }

    /// Fibers `f(i, X_{t_i})`.
    pub fn from_fn(
        base: Arc<SampledRoughPath>,
        p: f64,
        mut f: impl FnMut(usize, &GroupElement) -> Result<FiberElement>,
    ) -> Result<Self> {
        let fibers = base
            .elements()
            .iter()
            .enumerate()
            .map(|(i, g)| f(i, g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, fibers, p)
    }

    /// `β(X_t)(x) = x¹` with `⌊p⌋` levels.
    pub fn level_one_identity(base: Arc<SampledRoughPath>, p: f64) -> Result<Self> {
        let fiber = FiberElement::level_one_identity(base.dim(), (p.floor() as usize).max(1));
        let fibers = vec![fiber; base.times().len()];
        Self::new(base, fibers, p)
    }

    /// `φ^{k+1} = θᵏ(x_t)` for `k ≤ degree`: the degree-`degree` Taylor
    /// model of the form at the trace, acting on increments.
    pub fn local_taylor(base: Arc<SampledRoughPath>, lip: &LipOneFormData, degree: usize, p: f64) -> Result<Self> {
        let (d, e) = (lip.dim_in(), lip.dim_out());
        Self::from_fn(base, p, |_, g| {
            let q = lip.taylor_at(g.level(1), degree)?;
            FiberElement::new(d, e, q.coeffs().to_vec())
        })
    }

    pub fn zero(base: Arc<SampledRoughPath>, dim_out: usize, p: f64) -> Result<Self> {
        let fiber = FiberElement::zeros(base.dim(), dim_out, (p.floor() as usize).max(1));
        let fibers = vec![fiber; base.times().len()];
        Self::new(base, fibers, p)
    }

    pub fn base(&self) -> &Arc<SampledRoughPath> {
        &self.base
    }

    pub fn fibers(&self) -> &[FiberElement] {
        &self.fibers
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `⌊p⌋`.
    pub fn degree_cap(&self) -> usize {
        self.p.floor() as usize
    }

    pub fn dim_out(&self) -> usize {
        self.fibers[0].dim_out
    }

    pub fn depth(&self) -> usize {
        self.fibers[0].depth()
    }

    pub fn same_base(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
            || (self.base.times() == other.base.times() && self.base.elements() == other.base.elements())
    }

    fn check_base(&self, other: &Self) -> Result<()> {
        if !self.same_base(other) {
            return Err(Error::InvalidArgument("one-forms live on different base paths".into()));
        }
        Ok(())
    }

    /// Samplewise `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        let fibers = self
            .fibers
            .iter()
            .zip(&other.fibers)
            .map(|(a, b)| a.axpy(c, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.base.clone(), fibers, self.p)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            base: self.base.clone(),
            fibers: self.fibers.iter().map(|f| f.scale(c)).collect(),
            p: self.p,
        }
    }
}

/// The sampled operator norm `‖β‖_θ^ω` and its parts.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorNorm {
    pub value: f64,
    /// `max_t ‖β(X_t)‖`.
    pub sup_term: f64,
    /// `max_{s<t} ‖β(X_t) − β(X_s)_{X_{s,t}}‖_k / ω(s,t)^{θ−k/p}` per level.
    pub variation_terms: Vec<f64>,
    /// Levels `k` with `θ − k/p ≤ 0`.
    pub nonpositive_exponents: Vec<usize>,
    pub infinite: bool,
}

/// `sup_t ‖β(X_t)‖ + max_k sup_{s<t} ‖β(X_t) − β(X_s)_{X_{s,t}}‖_k / ω(s,t)^{θ−k/p}`
/// with both suprema over sample times.
pub fn operator_norm(beta: &SlowlyVaryingOneForm, omega: &Control, theta: f64) -> Result<OperatorNorm> {
    if !(theta > 1.0) {
        return Err(Error::InvalidArgument(format!("theta must exceed 1, got {theta}")));
    }
    let times = beta.base.times();
    let elements = beta.base.elements();
    let n = times.len();
    let depth = beta.depth();
    let sup_term = beta.fibers.iter().map(FiberElement::norm).fold(0.0, f64::max);
    let rows = map_indexed(n, Execution::default(), |i| -> Result<Vec<f64>> {
        let mut worst = vec![0.0f64; depth];
        for j in i + 1..n {
            let inc = elements[i].increment_to(&elements[j])?;
            let diff = beta.fibers[j].sub(&reset(&beta.fibers[i], &inc)?)?;
            let w = omega.eval(times[i], times[j]);
            for (k, slot) in worst.iter_mut().enumerate() {
                let num = diff.level_norm(k + 1);
                let r = if num == 0.0 {
                    0.0
                } else if w == 0.0 {
                    f64::INFINITY
                } else {
                    num / w.powf(theta - (k + 1) as f64 / beta.p)
                };
                *slot = slot.max(r);
            }
        }
        Ok(worst)
    });
    let mut variation_terms = vec![0.0f64; depth];
    for r in rows {
        for (v, x) in variation_terms.iter_mut().zip(r?) {
            *v = v.max(x);
        }
    }
    let var = variation_terms.iter().copied().fold(0.0, f64::max);
    Ok(OperatorNorm {
        value: sup_term + var,
        sup_term,
        nonpositive_exponents: (1..=depth).filter(|&k| theta - k as f64 / beta.p <= 0.0).collect(),
        infinite: var.is_infinite(),
        variation_terms,
    })
}

/// `h_t = ∫_S^t β(X_r) dX_r` at the sample times of `[S, T]`.
#[derive(Clone, Debug, Serialize)]
pub struct EffectPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// `‖h_T − h_T'‖₁` with `h'` summed over every other sample.
    pub refinement_gap: f64,
}

impl EffectPath {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("nonempty")
    }

    /// Value at a sample time.
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        let i = self.times.binary_search_by(|x| x.total_cmp(&t)).ok()?;
        Some(&self.values[i])
    }

    /// `‖h‖_{p-var}` over the samples with the `ℓ¹` norm.
    pub fn p_variation(&self, p: f64) -> f64 {
        let h = &self.values;
        let dist = |i: usize, j: usize| -> f64 {
            h[i].iter()
                .zip(&h[j])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                .powf(p)
        };
        p_variation_power_from(h.len(), dist).powf(1.0 / p)
    }
}

fn sample_index(x: &SampledRoughPath, t: f64) -> Result<usize> {
    x.index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("{t} is not a sample time")))
}

/// Riemann sums `Σ β(X_{t_k})(X_{t_k,t_{k+1}})` over the samples in `[s, t]`.
///
/// `s` and `t` must be sample times. Fails when dropping every other sample
/// changes `h_t` by more than `tol`.
pub fn integrate_effect(beta: &SlowlyVaryingOneForm, s: f64, t: f64, tol: f64) -> Result<EffectPath> {
    let x = &beta.base;
    let (i0, i1) = (sample_index(x, s)?, sample_index(x, t)?);
    if i1 <= i0 {
        return Err(Error::InvalidArgument(format!("integration needs s < t, got [{s}, {t}]")));
    }
    let el = x.elements();
    let piece = |a: usize, b: usize| -> Result<Vec<f64>> { beta.fibers[a].eval(el[a].increment_to(&el[b])?.series()) };
    let pieces = map_indexed(i1 - i0, Execution::default(), |k| piece(i0 + k, i0 + k + 1))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let e = beta.dim_out();
    let mut acc = vec![0.0; e];
    let mut values = vec![acc.clone()];
    for v in &pieces {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
        values.push(acc.clone());
    }
    let mut coarse_pts: Vec<usize> = (i0..=i1).step_by(2).collect();
    if *coarse_pts.last().expect("nonempty") != i1 {
        coarse_pts.push(i1);
    }
    let mut coarse = vec![0.0; e];
    for w in coarse_pts.windows(2) {
        for (a, b) in coarse.iter_mut().zip(piece(w[0], w[1])?) {
            *a += b;
        }
    }
    let gap: f64 = coarse.iter().zip(&acc).map(|(a, b)| (a - b).abs()).sum();
    if !(gap <= tol) {
        return Err(Error::NotConverged(Box::new(SewingReport {
            levels_used: 1,
            final_gap: gap,
            gaps: vec![gap],
            cst_estimate: 0.0,
            admission_ratio: 0.0,
            control: None,
        })));
    }
    Ok(EffectPath {
        times: x.times()[i0..=i1].to_vec(),
        values,
        refinement_gap: gap,
    })
}

/// `φ_1^{k_1} ⊗ ⋯ ⊗ φ_l^{k_l}` as a `(Π e_i) × d^{Σk}` array.
fn tensor_levels(factors: &[&FiberElement], ks: &[usize]) -> Vec<f64> {
    let d = factors[0].dim_in;
    let (mut rows, mut cols) = (1usize, 1usize);
    let mut acc = vec![1.0];
    for (f, &k) in factors.iter().zip(ks) {
        let fc = d.pow(k as u32);
        let lev = f.level(k);
        let (nr, nc) = (rows * f.dim_out, cols * fc);
        let mut next = vec![0.0; nr * nc];
        for r in 0..rows {
            for i in 0..f.dim_out {
                let dst = &mut next[(r * f.dim_out + i) * nc..(r * f.dim_out + i + 1) * nc];
                for c in 0..cols {
                    let a = acc[r * cols + c];
                    if a == 0.0 {
                        continue;
                    }
                    for (o, x) in dst[c * fc..(c + 1) * fc].iter_mut().zip(&lev[i * fc..(i + 1) * fc]) {
                        *o = a * x;
                    }
                }
            }
        }
        acc = next;
        rows = nr;
        cols = nc;
    }
    acc
}

/// Compositions `ks` with `1 ≤ k_i ≤ caps[i]` and `Σ k_i ≤ total`.
fn compositions(caps: &[usize], total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(caps.len());
    fn go(caps: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == caps.len() {
            out.push(cur.clone());
            return;
        }
        let rest = caps.len() - cur.len() - 1;
        for k in 1..=caps[cur.len()].min(left.saturating_sub(rest)) {
            cur.push(k);
            go(caps, left - k, cur, out);
            cur.pop();
        }
    }
    go(caps, total, &mut cur, &mut out);
    out
}

/// The stack of `x ↦ Σ_ks (φ_1^{k_1} ⊗ ⋯ ⊗ φ_l^{k_l})(ŝ(kernel(ks))(x))` truncated
/// to degree `cap`.
fn truncated_combination(
    factors: &[&FiberElement],
    cap: usize,
    kernel: impl Fn(&[usize]) -> Result<PermutationSum>,
) -> Result<FiberElement> {
    let d = factors[0].dim_in;
    if factors.iter().any(|f| f.dim_in != d) {
        return Err(Error::InvalidArgument("factors act on different spaces".into()));
    }
    let e: usize = factors.iter().map(|f| f.dim_out).product();
    let mut out = FiberElement::zeros(d, e, cap);
    let caps: Vec<usize> = factors.iter().map(|f| f.depth()).collect();
    for ks in compositions(&caps, cap) {
        let big_k: usize = ks.iter().sum();
        let phi = tensor_levels(factors, &ks);
        let cols = d.pow(big_k as u32);
        let terms = kernel(&ks)?.to_f64_terms();
        let dst = &mut out.levels[big_k - 1];
        for r in 0..e {
            let src = &phi[r * cols..(r + 1) * cols];
            let row = &mut dst[r * cols..(r + 1) * cols];
            // ψ[v] += c·Φ[π⁻¹·v]
            for (pi, c) in &terms {
                accumulate_pullback(src, d, pi, *c, row);
            }
        }
    }
    Ok(out)
}

/// `∏_{≤cap}(φ^{⊗l})`, kernel `1_{k₁} ∗′ ⋯ ∗′ 1_{k_l}`, valued in `U^{⊗l}`.
pub fn truncated_power(phi: &FiberElement, l: usize, cap: usize) -> Result<FiberElement> {
    if l == 0 || l > cap {
        return Err(Error::InvalidArgument(format!("power {l} must lie in 1..={cap}")));
    }
    let factors = vec![phi; l];
    truncated_combination(&factors, cap, |ks| Ok(product_of_identities(ks)))
}

/// `∏_{≤cap}(φ₁ ⊗ φ₂)`, kernel `1_{k₁} ∗′ 1_{k₂}`, valued in `U₁ ⊗ U₂`.
pub fn truncated_product(phi1: &FiberElement, phi2: &FiberElement, cap: usize) -> Result<FiberElement> {
    truncated_combination(&[phi1, phi2], cap.max(1), |ks| Ok(product_of_identities(ks)))
}

/// `∏_{≤cap}(φ₁ ≻ φ₂)`, kernel `1_{k₁} ≻ 1_{k₂}`, valued in `U₁ ⊗ U₂`.
pub fn truncated_half_shuffle(phi1: &FiberElement, phi2: &FiberElement, cap: usize) -> Result<FiberElement> {
    truncated_combination(&[phi1, phi2], cap.max(1), |ks| {
        half_shuffle(&Permutation::identity(ks[0]), &Permutation::identity(ks[1]))
    })
}

/// Swaps the output factors of a stack valued in `U₁ ⊗ U₂`.
pub fn swap_output(phi: &FiberElement, e1: usize, e2: usize) -> Result<FiberElement> {
    if e1 * e2 != phi.dim_out {
        return Err(Error::DimensionMismatch {
            expected: phi.dim_out,
            found: e1 * e2,
        });
    }
    let mut out = phi.clone();
    for (k, lev) in phi.levels.iter().enumerate() {
        let cols = phi.dim_in.pow(k as u32 + 1);
        for i in 0..e1 {
            for j in 0..e2 {
                out.levels[k][(j * e1 + i) * cols..(j * e1 + i + 1) * cols]
                    .copy_from_slice(&lev[(i * e2 + j) * cols..(i * e2 + j + 1) * cols]);
            }
        }
    }
    Ok(out)
}

/// A map `φ : ℝ^u → ℝ^w` with derivatives available up to some order.
pub trait SmoothMap: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    /// Highest derivative order provided.
    fn max_order(&self) -> usize;
    /// `D^l φ(u)` as a `w × u^l` row-major array; `l = 0` gives `φ(u)`.
    fn derivative(&self, l: usize, u: &[f64]) -> Result<Vec<f64>>;
}

/// `φ(u) = Σ_j A_j(u^{⊗j})` with `A_j` a `w × u^j` array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMap {
    dim_in: usize,
    dim_out: usize,
    terms: Vec<Vec<f64>>,
}

impl PolynomialMap {
    pub fn new(dim_in: usize, dim_out: usize, terms: Vec<Vec<f64>>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || terms.is_empty() {
            return Err(Error::InvalidArgument("polynomial map needs positive dimensions and a term".into()));
        }
        for (j, a) in terms.iter().enumerate() {
            let want = dim_out * dim_in.pow(j as u32);
            if a.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    found: a.len(),
                });
            }
        }
        Ok(Self { dim_in, dim_out, terms })
    }

    /// `u ↦ A u`.
    pub fn linear(dim_in: usize, dim_out: usize, a: Vec<f64>) -> Result<Self> {
        Self::new(dim_in, dim_out, vec![vec![0.0; dim_out], a])
    }

    /// `u ↦ u ⊗ u`.
    pub fn tensor_square(dim: usize) -> Self {
        let w = dim * dim;
        let mut a2 = vec![0.0; w * w];
        for r in 0..w {
            a2[r * w + r] = 1.0;
        }
        Self {
            dim_in: dim,
            dim_out: w,
            terms: vec![vec![0.0; w], vec![0.0; w * dim], a2],
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.len() - 1
    }
}

/// Ordered tuples of `l` distinct positions in `0..j`.
fn injections(j: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    fn go(j: usize, l: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        for s in 0..j {
            if !cur.contains(&s) {
                cur.push(s);
                go(j, l, cur, out);
                cur.pop();
            }
        }
    }
    go(j, l, &mut cur, &mut out);
    out
}

impl SmoothMap for PolynomialMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn derivative(&self, l: usize, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim_in;
        if u.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: u.len(),
            });
        }
        let cols = m.pow(l as u32);
        let mut out = vec![0.0; self.dim_out * cols];
        let mut idx = Vec::new();
        for (j, a) in self.terms.iter().enumerate().skip(l) {
            let slots = injections(j, l);
            let jc = m.pow(j as u32);
            idx.resize(j, 0);
            for w in 0..jc {
                crate::tensor::digits(w, m, &mut idx);
                for s in &slots {
                    let weight: f64 = (0..j).filter(|p| !s.contains(p)).map(|p| u[idx[p] as usize]).product();
                    if weight == 0.0 {
                        continue;
                    }
                    let target = s.iter().fold(0, |acc, &p| acc * m + idx[p] as usize);
                    for r in 0..self.dim_out {
                        out[r * cols + target] += a[r * jc + w] * weight;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A composed one-form with the effect it was built from.
#[derive(Clone, Debug)]
pub struct Composition {
    pub form: SlowlyVaryingOneForm,
    /// `h = ∫ β₁(X) dX` at the sample times.
    pub inner: EffectPath,
    /// `max_{l ≤ ⌊p⌋} max_t ‖D^l φ(h_t)‖`, the sampled `‖φ‖_{γ,‖h‖_∞}`.
    pub phi_norm: f64,
}

/// `β(X_t)(x) = Σ_{l=1}^{⌊p⌋} (1/l!) D^l φ(h_t) ∏_{≤⌊p⌋}(β₁(X_t)^{⊗l})(x)`,
/// whose integral is `φ(h_t) − φ(h_0)`.
pub fn compose_effect(beta1: &SlowlyVaryingOneForm, phi: &dyn SmoothMap, gamma: f64, tol: f64) -> Result<Composition> {
    let p = beta1.p;
    if !(gamma > p) {
        return Err(Error::Hypothesis(format!("gamma = {gamma} does not exceed p = {p}")));
    }
    let cap = beta1.degree_cap();
    if phi.max_order() < cap {
        return Err(Error::InsufficientDepth {
            required: cap,
            available: phi.max_order(),
        });
    }
    if phi.dim_in() != beta1.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: beta1.dim_out(),
            found: phi.dim_in(),
        });
    }
    let x = &beta1.base;
    let inner = integrate_effect(beta1, x.start(), x.end(), tol)?;
    let (u, w, d) = (phi.dim_in(), phi.dim_out(), x.dim());
    let per_sample = map_indexed(inner.values.len(), Execution::default(), |i| -> Result<(FiberElement, f64)> {
        let h = &inner.values[i];
        let mut out = FiberElement::zeros(d, w, cap);
        let mut norm: f64 = 0.0;
        let mut fact = 1.0;
        for l in 1..=cap {
            fact *= l as f64;
            let dl = phi.derivative(l, h)?;
            let ul = u.pow(l as u32);
            norm = norm.max(
                (0..ul)
                    .map(|c| (0..w).map(|r| dl[r * ul + c].abs()).sum::<f64>())
                    .fold(0.0, f64::max),
            );
            let pw = truncated_power(&beta1.fibers[i], l, cap)?;
            for (k, lev) in pw.levels.iter().enumerate() {
                let cols = d.pow(k as u32 + 1);
                let dst = &mut out.levels[k];
                for r in 0..w {
                    for i_idx in 0..ul {
                        let c = dl[r * ul + i_idx] / fact;
                        if c == 0.0 {
                            continue;
                        }
                        for (o, v) in dst[r * cols..(r + 1) * cols].iter_mut().zip(&lev[i_idx * cols..(i_idx + 1) * cols]) {
                            *o += c * v;
                        }
                    }
                }
            }
        }
        Ok((out, norm))
    });
    let mut fibers = Vec::with_capacity(per_sample.len());
    let mut phi_norm: f64 = 0.0;
    for r in per_sample {
        let (f, n) = r?;
        fibers.push(f);
        phi_norm = phi_norm.max(n);
    }
    Ok(Composition {
        form: SlowlyVaryingOneForm::new(x.clone(), fibers, p)?,
        inner,
        phi_norm,
    })
}

/// `‖β‖ / (‖φ‖ · max(‖β₁‖, ‖β₁‖^{⌊p⌋}))`, the measured composition constant.
pub fn composition_constant(comp: &Composition, beta1: &SlowlyVaryingOneForm, omega: &Control, theta: f64) -> Result<f64> {
    let b = operator_norm(&comp.form, omega, theta)?.value;
    let b1 = operator_norm(beta1, omega, theta)?.value;
    let denom = comp.phi_norm * b1.max(b1.powi(beta1.degree_cap() as i32));
    Ok(if denom > 0.0 { b / denom } else { 0.0 })
}

/// `β(X_t) = h¹_t ⊗ β₂(X_t) + ∏_{≤⌊p⌋}(β₁(X_t) ≻ β₂(X_t))` with
/// `h¹ = ∫ β₁(X) dX`, valued in `U₁ ⊗ U₂`.
pub fn iterated_effect(beta1: &SlowlyVaryingOneForm, beta2: &SlowlyVaryingOneForm, tol: f64) -> Result<SlowlyVaryingOneForm> {
    beta1.check_base(beta2)?;
    let x = &beta1.base;
    let h1 = integrate_effect(beta1, x.start(), x.end(), tol)?;
    let cap = beta1.degree_cap().max(beta2.degree_cap());
    let (e1, e2, d) = (beta1.dim_out(), beta2.dim_out(), x.dim());
    let depth = cap.max(beta2.depth());
    let fibers = (0..x.times().len())
        .map(|i| -> Result<FiberElement> {
            let f2 = &beta2.fibers[i];
            let mut first = FiberElement::zeros(d, e1 * e2, depth);
            for (k, lev) in f2.levels.iter().enumerate() {
                let cols = d.pow(k as u32 + 1);
                for (a, &h) in h1.values[i].iter().enumerate() {
                    for b in 0..e2 {
                        let dst = &mut first.levels[k][(a * e2 + b) * cols..(a * e2 + b + 1) * cols];
                        for (o, v) in dst.iter_mut().zip(&lev[b * cols..(b + 1) * cols]) {
                            *o = h * v;
                        }
                    }
                }
            }
            first.add(&truncated_half_shuffle(&beta1.fibers[i], f2, cap)?)
        })
        .collect::<Result<Vec<_>>>()?;
    SlowlyVaryingOneForm::new(x.clone(), fibers, beta1.p.max(beta2.p))
}

/// `‖β‖ / (‖β₁‖ ‖β₂‖)`, the measured iterated-integration constant.
pub fn iterated_constant(
    beta: &SlowlyVaryingOneForm,
    beta1: &SlowlyVaryingOneForm,
    beta2: &SlowlyVaryingOneForm,
    omega: &Control,
    theta: f64,
) -> Result<f64> {
    let b = operator_norm(beta, omega, theta)?.value;
    let denom = operator_norm(beta1, omega, theta)?.value * operator_norm(beta2, omega, theta)?.value;
    Ok(if denom > 0.0 { b / denom } else { 0.0 })
}

/// `max_{s<t} ‖h_t − h_s − β(X_s)(X_{s,t})‖₁ / ω̂(s,t)^θ` over sample pairs.
pub fn continuity_ratio(beta: &SlowlyVaryingOneForm, h: &EffectPath, omega_hat: &Control, theta: f64) -> Result<f64> {
    let x = &beta.base;
    let idx = h
        .times
        .iter()
        .map(|&t| sample_index(x, t))
        .collect::<Result<Vec<_>>>()?;
    let el = x.elements();
    let rows = map_indexed(idx.len(), Execution::default(), |a| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for b in a + 1..idx.len() {
            let (i, j) = (idx[a], idx[b]);
            let local = beta.fibers[i].eval(el[i].increment_to(&el[j])?.series())?;
            let num: f64 = h.values[b]
                .iter()
                .zip(&h.values[a])
                .zip(&local)
                .map(|((ht, hs), l)| (ht - hs - l).abs())
                .sum();
            let w = omega_hat.eval(h.times[a], h.times[b]);
            if num > 0.0 {
                worst = worst.max(if w > 0.0 { num / w.powf(theta) } else { f64::INFINITY });
            }
        }
        Ok(worst)
    });
    rows.into_iter().try_fold(0.0, |m, r| Ok(f64::max(m, r?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::one_form::PolynomialOneForm;
    use crate::signature::{lift_path, PiecewiseLinearPath};
    use crate::tensor::random_group_like;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fiber(d: usize, e: usize, depth: usize, rng: &mut ChaCha8Rng) -> FiberElement {
        let levels = (1..=depth)
            .map(|k| (0..e * d.pow(k as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        FiberElement::new(d, e, levels).unwrap()
    }

    fn line(n: usize, depth: usize) -> Arc<SampledRoughPath> {
        let path = PiecewiseLinearPath::sample(|t| vec![t], 0.0, 1.0, n).unwrap();
        Arc::new(lift_path(&path, depth))
    }

    #[test]
    fn reset_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let phi = random_fiber(2, 2, 3, &mut rng);
        let one = GroupElement::identity(2, 3);
        assert_eq!(reset(&phi, &one).unwrap(), phi);
        let flat = random_fiber(2, 3, 1, &mut rng).with_depth(3);
        let a = random_group_like(2, 3, 1.0, &mut rng);
        assert!(reset(&flat, &a).unwrap().max_abs_diff(&flat).unwrap() < 1e-15);
        for _ in 0..10 {
            let a = random_group_like(2, 3, 1.0, &mut rng);
            let b = random_group_like(2, 3, 1.0, &mut rng);
            let lhs = reset(&reset(&phi, &a).unwrap(), &b).unwrap();
            let rhs = reset(&phi, &a.mul(&b).unwrap()).unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
            let x = random_group_like(2, 3, 1.0, &mut rng);
            let direct: Vec<f64> = phi
                .eval(a.mul(&x).unwrap().series())
                .unwrap()
                .iter()
                .zip(phi.eval(a.series()).unwrap())
                .map(|(u, v)| u - v)
                .collect();
            let via = reset(&phi, &a).unwrap().eval(x.series()).unwrap();
            for (u, v) in direct.iter().zip(&via) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norms() {
        let f = FiberElement::new(2, 2, vec![vec![1.0, -2.0, 3.0, 0.5]]).unwrap();
        assert_eq!(f.level_norm(1), 4.0);
        let base = line(1, 2);
        let beta = SlowlyVaryingOneForm::new(base.clone(), vec![FiberElement::level_one_identity(1, 1).scale(2.0); 2], 1.0).unwrap();
        let n = operator_norm(&beta, &Control::linear(1.0), 2.0).unwrap();
        assert_eq!(n.value, 2.0);
        assert_eq!(n.variation_terms, vec![0.0]);

        let jump = SlowlyVaryingOneForm::new(
            base,
            vec![FiberElement::level_one_identity(1, 1), FiberElement::level_one_identity(1, 1).scale(3.0)],
            1.0,
        )
        .unwrap();
        let wide = operator_norm(&jump, &Control::linear(1.0), 2.0).unwrap();
        let narrow = operator_norm(&jump, &Control::linear(0.01), 2.0).unwrap();
        assert_eq!(wide.variation_terms[0], 2.0);
        assert!((narrow.variation_terms[0] - 100.0 * wide.variation_terms[0]).abs() < 1e-9);
        assert!(operator_norm(&jump, &Control::linear(1.0), 1.0).is_err());
    }

    #[test]
    fn identity_integrates_to_increment() {
        let path = PiecewiseLinearPath::new(
            vec![0.0, 0.3, 0.7, 1.0],
            vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5], vec![1.0, 3.0]],
        )
        .unwrap();
        let base = Arc::new(lift_path(&path, 2));
        let beta = SlowlyVaryingOneForm::level_one_identity(base.clone(), 2.0).unwrap();
        let h = integrate_effect(&beta, 0.0, 1.0, 1e-12).unwrap();
        for (i, v) in h.values.iter().enumerate() {
            assert_eq!(v[0], path.points()[i][0] - path.points()[0][0]);
            assert_eq!(v[1], path.points()[i][1] - path.points()[0][1]);
        }
        let zero = SlowlyVaryingOneForm::zero(base, 3, 2.0).unwrap();
        assert!(integrate_effect(&zero, 0.0, 1.0, 0.0).unwrap().values.iter().flatten().all(|&v| v == 0.0));
        assert!(integrate_effect(&beta, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn truncated_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let phi = random_fiber(2, 2, 2, &mut rng);
        assert_eq!(truncated_power(&phi, 1, 2).unwrap(), phi);
        assert!(truncated_power(&phi, 3, 2).is_err());

        let one = random_fiber(2, 1, 1, &mut rng);
        let sq = truncated_power(&one, 2, 2).unwrap();
        assert!(sq.level(1).iter().all(|&v| v == 0.0));
        let a = one.level(1);
        for w in 0..4 {
            let (i, j) = (w / 2, w % 2);
            assert!((sq.level(2)[w] - 2.0 * a[i] * a[j]).abs() < 1e-15);
        }

        // (φ(x))^{⊗l} agrees with the truncated power up to terms of degree > cap
        for _ in 0..5 {
            let phi = random_fiber(2, 2, 2, &mut rng);
            let x = random_group_like(2, 6, 0.7, &mut rng);
            let v = phi.eval(x.series()).unwrap();
            let full = truncated_power(&phi, 3, 6).unwrap().eval(x.series()).unwrap();
            let mut want = vec![0.0; 8];
            for (i, slot) in want.iter_mut().enumerate() {
                *slot = v[i / 4] * v[(i / 2) % 2] * v[i % 2];
            }
            for (a, b) in full.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn half_shuffle_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let phi1 = random_fiber(2, 1, 1, &mut rng);
        let id = FiberElement::level_one_identity(2, 1);
        let hs = truncated_half_shuffle(&phi1, &id, 2).unwrap();
        // 1_1 ≻ 1_1 = (12): ψ[i][ab] = φ₁[a]·δ_{ib}
        for i in 0..2 {
            for w in 0..4 {
                let want = if w % 2 == i { phi1.level(1)[w / 2] } else { 0.0 };
                assert_eq!(hs.level(2)[i * 4 + w], want);
            }
        }
        let top = FiberElement::new(2, 1, vec![vec![0.0; 2], vec![1.0; 4]]).unwrap();
        let z = truncated_half_shuffle(&top, &id, 2).unwrap();
        assert!(z.levels().iter().flatten().all(|&v| v == 0.0));

        for _ in 0..5 {
            let a = random_fiber(2, 2, 2, &mut rng);
            let b = random_fiber(2, 3, 2, &mut rng);
            let ab = truncated_half_shuffle(&a, &b, 3).unwrap();
            let ba = swap_output(&truncated_half_shuffle(&b, &a, 3).unwrap(), 3, 2).unwrap();
            let prod = truncated_product(&a, &b, 3).unwrap();
            assert!(ab.add(&ba).unwrap().max_abs_diff(&prod).unwrap() < 1e-12);
        }
    }

    #[test]
    fn polynomial_map_derivatives() {
        let sq = PolynomialMap::tensor_square(2);
        let u = [1.5, -2.0];
        assert_eq!(sq.derivative(0, &u).unwrap(), vec![2.25, -3.0, -3.0, 4.0]);
        let d1 = sq.derivative(1, &u).unwrap();
        // D(u⊗u)[h] = h⊗u + u⊗h; column 0 is h = e₁
        assert_eq!((0..4).map(|r| d1[r * 2]).collect::<Vec<_>>(), vec![3.0, -2.0, -2.0, 0.0]);
        let d2 = sq.derivative(2, &u).unwrap();
        assert_eq!(d2[4 + 1], 1.0);
        assert_eq!(d2[4 + 2], 1.0);
        assert!(sq.derivative(3, &u).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composition_reproduces_map_of_effect() {
        let base = line(16, 2);
        let beta1 = SlowlyVaryingOneForm::level_one_identity(base, 2.0).unwrap();
        let sq = PolynomialMap::tensor_square(1);
        let comp = compose_effect(&beta1, &sq, 3.0, 1e-9).unwrap();
        let h = integrate_effect(&comp.form, 0.0, 1.0, 1e-9).unwrap();
        assert!((h.last()[0] - 1.0).abs() < 1e-12);

        let lin = PolynomialMap::linear(1, 2, vec![2.0, -3.0]).unwrap();
        let comp = compose_effect(&beta1, &lin, 3.0, 1e-9).unwrap();
        let h = integrate_effect(&comp.form, 0.0, 1.0, 1e-9).unwrap();
        assert!((h.last()[0] - 2.0).abs() < 1e-12 && (h.last()[1] + 3.0).abs() < 1e-12);
        assert!(compose_effect(&beta1, &lin, 2.0, 1e-9).is_err());
        let c = composition_constant(&comp, &beta1, &Control::linear(1.0), 2.0).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn iterated_integral_of_identity() {
        let base = line(32, 2);
        let id = SlowlyVaryingOneForm::level_one_identity(base.clone(), 2.0).unwrap();
        let it = iterated_effect(&id, &id, 1e-9).unwrap();
        let h = integrate_effect(&it, 0.0, 1.0, 1e-9).unwrap();
        assert!((h.last()[0] - 0.5).abs() < 1e-12);
        let zero = SlowlyVaryingOneForm::zero(base, 1, 2.0).unwrap();
        let z = iterated_effect(&zero, &id, 1e-9).unwrap();
        assert!(z.fibers().iter().all(|f| f.norm() == 0.0));
        let other = SlowlyVaryingOneForm::level_one_identity(line(8, 2), 2.0).unwrap();
        assert!(iterated_effect(&id, &other, 1e-9).is_err());
    }

    #[test]
    fn taylor_stack_matches_signature_level() {
        let path = PiecewiseLinearPath::sample(|t| vec![t.cos(), (2.0 * t).sin()], 0.0, 1.0, 12).unwrap();
        let base = Arc::new(lift_path(&path, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let p = PolynomialOneForm::random(2, 1, 2, 1.0, &mut rng);
        let lip = LipOneFormData::from_polynomial(&p, 3.0);
        let beta = SlowlyVaryingOneForm::local_taylor(base.clone(), &lip, 2, 2.5).unwrap();
        let h = integrate_effect(&beta, 0.0, 1.0, 1e-9).unwrap();
        let xs = base.elements()[0].clone();
        let xt = base.elements().last().unwrap().clone();
        let diff = p.f_p(xt.series()).unwrap()[0] - p.f_p(xs.series()).unwrap()[0];
        assert!((h.last()[0] - diff).abs() < 1e-10);
    }

    #[test]
    fn operator_norm_is_a_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let base = line(10, 2);
        let rand_form = |rng: &mut ChaCha8Rng| {
            let fibers = (0..11).map(|_| random_fiber(1, 2, 2, rng)).collect();
            SlowlyVaryingOneForm::new(base.clone(), fibers, 2.0).unwrap()
        };
        let w = Control::linear(1.0);
        for _ in 0..5 {
            let a = rand_form(&mut rng);
            let b = rand_form(&mut rng);
            let na = operator_norm(&a, &w, 1.5).unwrap().value;
            let nb = operator_norm(&b, &w, 1.5).unwrap().value;
            let nab = operator_norm(&a.axpy(1.0, &b).unwrap(), &w, 1.5).unwrap().value;
            assert!(nab <= (na + nb) * (1.0 + 1e-12));
            let n3 = operator_norm(&a.scale(-3.0), &w, 1.5).unwrap().value;
            assert!((n3 - 3.0 * na).abs() < 1e-12 * n3);
        }
    }
}
