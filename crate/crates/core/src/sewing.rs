//! Noncommutative sewing of almost multiplicative functionals.
//!
//! Given `μ(s, t)` with `d(μ(s,t), μ(s,u)μ(u,t)) ≤ V(t − s)`, the products of
//! `μ` over dyadic partitions of `[S, T]` converge to a multiplicative `u`.
//! Distances are the inhomogeneous `ℓ¹` distance of
//! [`crate::tensor::inhomogeneous_distance`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::signature::SampledRoughPath;
use crate::tensor::{inhomogeneous_distance, GroupElement};

/// Pieces multiplied per task before partial products are combined.
const FOLD_CHUNK: usize = 256;
/// Points of the grid on which admission and control estimates sample triples.
const ADMISSION_POINTS: usize = 17;

/// `V(t) = K·t^α` with `α > 1`, and its dyadic majorant
/// `V̄(t) = Σ θⁿ V(t 2⁻ⁿ) = K t^α / (1 − θ 2^{−α})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrongControl {
    pub k: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl StrongControl {
    /// Picks `θ = min(0.9·2^α, 4)`, or the midpoint of `(2, 2^α)` when that is
    /// not above 2.
    pub fn new(k: f64, alpha: f64) -> Result<Self> {
        let top = 2f64.powf(alpha);
        let mut theta = (0.9 * top).min(4.0);
        if theta <= 2.0 {
            theta = 0.5 * (2.0 + top);
        }
        Self::with_theta(k, alpha, theta)
    }

    pub fn with_theta(k: f64, alpha: f64, theta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("control constant must be positive, got {k}")));
        }
        if !(alpha > 1.0) {
            return Err(Error::InvalidArgument(format!("control exponent must exceed 1, got {alpha}")));
        }
        if !(theta > 2.0 && theta < 2f64.powf(alpha)) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in (2, 2^alpha), got {theta}"
            )));
        }
        Ok(Self { k, alpha, theta })
    }

    pub fn v(&self, t: f64) -> f64 {
        self.k * t.max(0.0).powf(self.alpha)
    }

    pub fn v_bar(&self, t: f64) -> f64 {
        self.v(t) / (1.0 - self.theta * 2f64.powf(-self.alpha))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SewOptions {
    pub tol: f64,
    pub max_level: usize,
    pub min_level: usize,
}

impl Default for SewOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_level: 20,
            min_level: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SewingReport {
    pub levels_used: usize,
    pub final_gap: f64,
    /// `d(P_m, P_{m−1})` for `m = 1..=levels_used`.
    pub gaps: Vec<f64>,
    /// Largest `d(μ(s,t), u(s,t)) / V̄(t−s)` over dyadic sub-intervals.
    pub cst_estimate: f64,
    /// Largest `defect / V(t−s)` seen by the admission test.
    pub admission_ratio: f64,
    /// Absent for scalar Riemann sums, which use no control.
    pub control: Option<StrongControl>,
}

fn fold_product(pieces: &[GroupElement]) -> Result<GroupElement> {
    let mut it = pieces.iter();
    let mut acc = it.next().expect("nonempty").clone();
    for g in it {
        acc = acc.mul(g)?;
    }
    Ok(acc)
}

/// `μ(t₀,t₁)⋯μ(t_{n−1},t_n)`.
pub fn riemann_product<F>(mu: &F, partition: &[f64]) -> Result<GroupElement>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    riemann_product_with(mu, partition, Execution::default())
}

/// Evaluates the pieces in chunks of fixed size; each chunk is folded left and
/// the chunk products are folded left, independent of scheduling.
pub fn riemann_product_with<F>(mu: &F, partition: &[f64], exec: Execution) -> Result<GroupElement>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    if partition.len() < 2 {
        return Err(Error::InvalidArgument("a partition needs two points".into()));
    }
    if partition.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("partition must be sorted".into()));
    }
    let n = partition.len() - 1;
    let chunks = n.div_ceil(FOLD_CHUNK);
    let partial = map_indexed(chunks, exec, |c| {
        let lo = c * FOLD_CHUNK;
        let hi = (lo + FOLD_CHUNK).min(n);
        let mut acc = mu(partition[lo], partition[lo + 1])?;
        for i in lo + 1..hi {
            acc = acc.mul(&mu(partition[i], partition[i + 1])?)?;
        }
        Ok(acc)
    });
    let partial = partial.into_iter().collect::<Result<Vec<_>>>()?;
    fold_product(&partial)
}

fn dyadic(s: f64, t: f64, level: usize) -> Vec<f64> {
    let n = 1usize << level;
    (0..=n)
        .map(|i| if i == n { t } else { s + (t - s) * i as f64 / n as f64 })
        .collect()
}

fn admission_grid(s: f64, t: f64) -> Vec<f64> {
    let n = ADMISSION_POINTS - 1;
    (0..=n)
        .map(|i| if i == n { t } else { s + (t - s) * i as f64 / n as f64 })
        .collect()
}

/// `(s, u, t, defect)` for every grid triple `s < u < t`.
fn grid_defects<F>(mu: &F, s: f64, t: f64) -> Result<Vec<(f64, f64, f64, f64)>>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    let g = admission_grid(s, t);
    let n = g.len();
    let pairs = map_indexed(n * n, Execution::default(), |ij| {
        let (i, j) = (ij / n, ij % n);
        if i < j {
            mu(g[i], g[j]).map(Some)
        } else {
            Ok(None)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let at = |i: usize, j: usize| pairs[i * n + j].as_ref().expect("i < j");
    let mut out = Vec::new();
    for i in 0..n {
        for k in i + 2..n {
            for j in i + 1..k {
                let split = at(i, j).mul(at(j, k))?;
                let d = inhomogeneous_distance(at(i, k).series(), split.series())?;
                out.push((g[i], g[j], g[k], d));
            }
        }
    }
    Ok(out)
}

/// Checks `d(μ(s,t), μ(s,u)μ(u,t)) ≤ V(t−s)` on a 17-point grid and returns
/// the largest ratio `defect / V`.
pub fn admission_test<F>(mu: &F, control: &StrongControl, s: f64, t: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    let mut worst: f64 = 0.0;
    for (a, u, b, d) in grid_defects(mu, s, t)? {
        let bound = control.v(b - a);
        // roundoff allowance for exactly multiplicative μ
        if d > bound * (1.0 + 1e-9) + 1e-13 {
            return Err(Error::AdmissionFailed {
                s: a,
                u,
                t: b,
                defect: d,
                bound,
            });
        }
        if bound > 0.0 {
            worst = worst.max(d / bound);
        }
    }
    Ok(worst)
}

/// `V(t) = K t^α` with `K` twice the largest sampled `defect / (t−s)^α`.
pub fn estimate_control<F>(mu: &F, s: f64, t: f64, alpha: f64) -> Result<StrongControl>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    let worst = grid_defects(mu, s, t)?
        .into_iter()
        .map(|(a, _, b, d)| d / (b - a).powf(alpha))
        .fold(0.0, f64::max);
    StrongControl::new((2.0 * worst).max(1e-300), alpha)
}

/// The multiplicative functional produced by [`sew`].
pub struct Sewn<F> {
    mu: F,
    start: f64,
    end: f64,
    level: usize,
    total: GroupElement,
    report: SewingReport,
}

impl<F> Sewn<F>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    pub fn report(&self) -> &SewingReport {
        &self.report
    }

    /// `u(S, T)`.
    pub fn total(&self) -> &GroupElement {
        &self.total
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `u(s, t)` from the finest dyadic grid of `[S, T]`: the grid pieces
    /// inside `[s, t]`, with `μ` on the partial pieces at the ends.
    pub fn eval(&self, s: f64, t: f64) -> Result<GroupElement> {
        if !(s <= t && s >= self.start && t <= self.end) {
            return Err(Error::IntervalOutOfRange {
                start: s,
                end: t,
                min: self.start,
                max: self.end,
            });
        }
        if s == t {
            let g = (self.mu)(s, t)?;
            return Ok(GroupElement::identity(g.dim(), g.depth()));
        }
        let grid = dyadic(self.start, self.end, self.level);
        let mut part = vec![s];
        part.extend(grid.iter().copied().filter(|&x| x > s && x < t));
        part.push(t);
        riemann_product(&self.mu, &part)
    }
}

/// Sews `μ` on `[s, t]` by dyadic refinement until successive products differ
/// by less than `opts.tol`.
pub fn sew<F>(mu: F, control: StrongControl, s: f64, t: f64, opts: SewOptions) -> Result<Sewn<F>>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    if !(s < t) {
        return Err(Error::InvalidArgument(format!("sewing needs s < t, got [{s}, {t}]")));
    }
    let admission_ratio = admission_test(&mu, &control, s, t)?;
    let mut prev = mu(s, t)?;
    let mut gaps = Vec::new();
    let mut level = 0;
    let mut converged = false;
    while level < opts.max_level {
        level += 1;
        let cur = riemann_product(&mu, &dyadic(s, t, level))?;
        let gap = inhomogeneous_distance(cur.series(), prev.series())?;
        gaps.push(gap);
        prev = cur;
        if gap < opts.tol && level >= opts.min_level {
            converged = true;
            break;
        }
    }
    let mut report = SewingReport {
        levels_used: level,
        final_gap: gaps.last().copied().unwrap_or(0.0),
        gaps,
        cst_estimate: 0.0,
        admission_ratio,
        control: Some(control),
    };
    if !converged {
        return Err(Error::NotConverged(Box::new(report)));
    }
    let mut sewn = Sewn {
        mu,
        start: s,
        end: t,
        level,
        total: prev,
        report: report.clone(),
    };
    report.cst_estimate = estimate_cst(&sewn)?;
    sewn.report = report;
    Ok(sewn)
}

/// Compares `μ` with `u` on dyadic sub-intervals down to depth 4. `u` on
/// each coarse interval is the product of the finest sub-interval values.
fn estimate_cst<F>(sewn: &Sewn<F>) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<GroupElement> + Sync,
{
    let depth = sewn.level.min(4);
    let fine = dyadic(sewn.start, sewn.end, depth);
    let leaves = map_indexed(fine.len() - 1, Execution::default(), |i| sewn.eval(fine[i], fine[i + 1]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for m in 0..=depth {
        let width = 1usize << (depth - m);
        for (j, block) in leaves.chunks(width).enumerate() {
            let (a, b) = (fine[j * width], fine[(j + 1) * width]);
            let u = if m == 0 { sewn.total.clone() } else { fold_product(block)? };
            let d = inhomogeneous_distance((sewn.mu)(a, b)?.series(), u.series())?;
            let vb = sewn.report.control.map_or(0.0, |c| c.v_bar(b - a));
            if vb > 0.0 {
                worst = worst.max(d / vb);
            }
        }
    }
    Ok(worst)
}

/// Sews `μ(s, t) = f_s(X_s)⁻¹ f_s(X_t)`.
///
/// `f(s, g)` evaluates `f_s` at `g`. Without an explicit control one is
/// estimated with exponent `alpha`.
pub fn integrate_time_varying<F>(
    f: F,
    x: &SampledRoughPath,
    s: f64,
    t: f64,
    alpha: f64,
    control: Option<StrongControl>,
    opts: SewOptions,
) -> Result<(GroupElement, SewingReport)>
where
    F: Fn(f64, &GroupElement) -> Result<GroupElement> + Sync,
{
    x.check_interval(s, t)?;
    let mu = |a: f64, b: f64| -> Result<GroupElement> {
        let fa = f(a, &x.element_at(a)?)?;
        if a == b {
            return Ok(GroupElement::identity(fa.dim(), fa.depth()));
        }
        fa.increment_to(&f(a, &x.element_at(b)?)?)
    };
    let control = match control {
        Some(c) => c,
        None => estimate_control(&mu, s, t, alpha)?,
    };
    let sewn = sew(mu, control, s, t, opts)?;
    Ok((sewn.total().clone(), sewn.report().clone()))
}
