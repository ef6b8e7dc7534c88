//! Distances on group elements, p-variation and controls.

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

use super::{GroupElement, TruncatedTensorSeries};

/// `max_k ‖π_k(a⁻¹b)‖₁^{1/k}` over levels `1..=N`.
pub fn homogeneous_distance(a: &GroupElement, b: &GroupElement) -> Result<f64> {
    let inc = a.increment_to(b)?;
    Ok((1..=inc.depth())
        .map(|k| inc.series().level_norm(k).powf(1.0 / k as f64))
        .fold(0.0, f64::max))
}

/// `Σ_k ‖π_k(a − b)‖₁`, including level 0.
///
/// Unlike the homogeneous distance this satisfies `d(xz, yz) ≤ ‖z‖₁ d(x, y)`,
/// which the sewing estimates rely on.
pub fn inhomogeneous_distance(a: &TruncatedTensorSeries, b: &TruncatedTensorSeries) -> Result<f64> {
    Ok(a.sub(b)?.l1_norm())
}

fn check_points(points: &[GroupElement], p: f64) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "p-variation needs at least two points".into(),
        ));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

fn distance_powers(points: &[GroupElement], p: f64) -> Result<Vec<f64>> {
    let n = points.len();
    let inverses: Vec<GroupElement> = points.iter().map(GroupElement::inverse).collect();
    let rows = map_indexed(n, Execution::default(), |i| {
        (0..n)
            .map(|j| {
                if j <= i {
                    return Ok(0.0);
                }
                let inc = inverses[i].mul(&points[j])?;
                let d = (1..=inc.depth())
                    .map(|k| inc.series().level_norm(k).powf(1.0 / k as f64))
                    .fold(0.0, f64::max);
                Ok(d.powf(p))
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut flat = Vec::with_capacity(n * n);
    for r in rows {
        flat.extend(r?);
    }
    Ok(flat)
}

/// `sup_D Σ dist(i_k, i_{k+1})` over sub-partitions `0 = i_0 < … < i_m = n−1`,
/// given the `p`-th powers of pairwise distances.
pub fn p_variation_power_from(n: usize, dist_pow: impl Fn(usize, usize) -> f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        best[j] = (0..j)
            .map(|i| best[i] + dist_pow(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    best[n - 1]
}

/// `‖X‖_{p-var}^p` over the sampled points, exact over sub-partitions.
pub fn p_variation_power(points: &[GroupElement], p: f64) -> Result<f64> {
    check_points(points, p)?;
    let n = points.len();
    let dp = distance_powers(points, p)?;
    Ok(p_variation_power_from(n, |i, j| dp[i * n + j]))
}

/// `‖X‖_{p-var}` over the sampled points.
pub fn p_variation(points: &[GroupElement], p: f64) -> Result<f64> {
    Ok(p_variation_power(points, p)?.powf(1.0 / p))
}

/// Exhaustive search over all subsets of interior points.
pub fn p_variation_brute_force(points: &[GroupElement], p: f64) -> Result<f64> {
    check_points(points, p)?;
    let n = points.len();
    if n > 24 {
        return Err(Error::InvalidArgument(
            "exhaustive p-variation is limited to 24 points".into(),
        ));
    }
    let dp = distance_powers(points, p)?;
    let interior = n - 2;
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << interior) {
        let mut prev = 0;
        let mut acc = 0.0;
        for k in 0..interior {
            if mask & (1 << k) != 0 {
                acc += dp[prev * n + k + 1];
                prev = k + 1;
            }
        }
        acc += dp[prev * n + n - 1];
        best = best.max(acc);
    }
    Ok(best.powf(1.0 / p))
}

/// A control `ω(s, t)`.
#[derive(Clone, Debug)]
pub enum Control {
    /// `c·(t − s)`.
    Linear { c: f64 },
    /// `‖X‖_{p-var,[s,t]}^p` tabulated on sample times. Off-grid arguments
    /// round outward to the enclosing samples.
    PVariation {
        times: Vec<f64>,
        table: Vec<f64>,
    },
    Sum(Box<Control>, Box<Control>),
}

impl Control {
    pub fn linear(c: f64) -> Self {
        Control::Linear { c }
    }

    /// Tabulates the p-variation control of sampled points, `O(n³)`.
    pub fn p_variation(times: &[f64], points: &[GroupElement], p: f64) -> Result<Self> {
        check_points(points, p)?;
        if times.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: times.len(),
            });
        }
        let n = points.len();
        let dp = distance_powers(points, p)?;
        let rows = map_indexed(n, Execution::default(), |i| {
            let mut best = vec![0.0f64; n];
            for j in i + 1..n {
                best[j] = (i..j)
                    .map(|k| best[k] + dp[k * n + j])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            best
        });
        Ok(Control::PVariation {
            times: times.to_vec(),
            table: rows.concat(),
        })
    }

    pub fn plus(self, other: Control) -> Self {
        Control::Sum(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        match self {
            Control::Linear { c } => c * (t - s),
            Control::PVariation { times, table } => {
                let n = times.len();
                let i = times.partition_point(|&x| x <= s).saturating_sub(1);
                let j = times.partition_point(|&x| x < t).min(n - 1);
                if j <= i {
                    0.0
                } else {
                    table[i * n + j]
                }
            }
            Control::Sum(a, b) => a.eval(s, t) + b.eval(s, t),
        }
    }
}
