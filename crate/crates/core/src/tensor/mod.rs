//! Dense truncated tensor algebra over `ℝ^d`.
//!
//! A [`TruncatedTensorSeries`] stores levels `0..=N` contiguously. Level `k`
//! holds `d^k` coefficients in row-major order: the word `i₁…i_k` sits at
//! index `i₁·d^{k−1} + … + i_k`, so the first letter is the most significant
//! digit. Concatenation splits a word into a prefix and a suffix, which in this
//! layout is a quotient and remainder by a power of `d`.

mod action;
mod metric;

pub(crate) use action::accumulate_pullback;
pub use action::{change_of_variable_defect, permute_pullback, permute_pushforward, s_hat};
pub use metric::{
    homogeneous_distance, inhomogeneous_distance, p_variation, p_variation_brute_force,
    p_variation_power, p_variation_power_from, Control,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, map_indexed, Execution};

/// Below this many output entries a level is convolved on the calling thread.
const PAR_LEVEL_MIN: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensorSeries {
    dim: usize,
    depth: usize,
    data: Vec<f64>,
}

fn level_offset(dim: usize, k: usize) -> usize {
    if dim == 1 {
        k
    } else {
        (dim.pow(k as u32) - 1) / (dim - 1)
    }
}

impl TruncatedTensorSeries {
    pub fn zeros(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1, "alphabet size must be positive");
        let len = level_offset(dim, depth + 1);
        Self {
            dim,
            depth,
            data: vec![0.0; len],
        }
    }

    pub fn unit(dim: usize, depth: usize) -> Self {
        let mut s = Self::zeros(dim, depth);
        s.data[0] = 1.0;
        s
    }

    /// Series `v` placed at level 1.
    pub fn from_vector(v: &[f64], depth: usize) -> Self {
        let mut s = Self::zeros(v.len(), depth);
        if depth >= 1 {
            s.level_mut(1).copy_from_slice(v);
        }
        s
    }

    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || levels.len() < 2 {
            return Err(Error::InvalidArgument(
                "a series needs dim >= 1 and depth >= 1".into(),
            ));
        }
        let depth = levels.len() - 1;
        let mut s = Self::zeros(dim, depth);
        for (k, lv) in levels.into_iter().enumerate() {
            let want = dim.pow(k as u32);
            if lv.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    found: lv.len(),
                });
            }
            if lv.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient at level {k}"
                )));
            }
            s.level_mut(k).copy_from_slice(&lv);
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let lo = level_offset(self.dim, k);
        &self.data[lo..lo + self.dim.pow(k as u32)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let lo = level_offset(self.dim, k);
        let n = self.dim.pow(k as u32);
        &mut self.data[lo..lo + n]
    }

    pub fn levels(&self) -> Vec<Vec<f64>> {
        (0..=self.depth).map(|k| self.level(k).to_vec()).collect()
    }

    /// All coefficients, level by level.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Row-major index of a word within its level.
    pub fn word_index(&self, letters: &[u32]) -> usize {
        letters
            .iter()
            .fold(0, |acc, &a| acc * self.dim + a as usize)
    }

    /// Coefficient `⟨s, w⟩`; zero above the truncation depth.
    pub fn coeff(&self, letters: &[u32]) -> f64 {
        if letters.len() > self.depth {
            return 0.0;
        }
        self.level(letters.len())[self.word_index(letters)]
    }

    pub fn set_coeff(&mut self, letters: &[u32], value: f64) {
        let i = self.word_index(letters);
        self.level_mut(letters.len())[i] = value;
    }

    pub fn constant(&self) -> f64 {
        self.data[0]
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.depth != other.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: other.depth,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            dim: self.dim,
            depth: self.depth,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            depth: self.depth,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    /// ℓ¹ norm of level `k`.
    pub fn level_norm(&self, k: usize) -> f64 {
        self.level(k).iter().map(|x| x.abs()).sum()
    }

    /// ℓ¹ norm over all levels, including level 0.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Projection onto levels `0..=depth`.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::InsufficientDepth {
                required: depth,
                available: self.depth,
            });
        }
        Ok(Self {
            dim: self.dim,
            depth,
            data: self.data[..level_offset(self.dim, depth + 1)].to_vec(),
        })
    }

    /// Same coefficients with zero levels appended up to `depth`.
    pub fn extend(&self, depth: usize) -> Self {
        let mut s = Self::zeros(self.dim, depth.max(self.depth));
        s.data[..self.data.len()].copy_from_slice(&self.data);
        s
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        conc_mul(self, other)
    }

    /// `[a, b] = ab − ba`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        conc_mul(self, other)?.sub(&conc_mul(other, self)?)
    }
}

/// Concatenation product truncated at the common depth.
pub fn conc_mul(a: &TruncatedTensorSeries, b: &TruncatedTensorSeries) -> Result<TruncatedTensorSeries> {
    conc_mul_with(a, b, Execution::default())
}

/// Concatenation product with an explicit schedule.
///
/// Each output level is split into blocks sharing a first letter; blocks are
/// independent. Every entry accumulates its split terms in increasing prefix
/// length, so the result does not depend on `exec`.
pub fn conc_mul_with(
    a: &TruncatedTensorSeries,
    b: &TruncatedTensorSeries,
    exec: Execution,
) -> Result<TruncatedTensorSeries> {
    a.check_compatible(b)?;
    let d = a.dim;
    let mut out = TruncatedTensorSeries::zeros(d, a.depth);
    out.data[0] = a.data[0] * b.data[0];
    for n in 1..=a.depth {
        let block = d.pow(n as u32 - 1);
        let lv = out.level_mut(n);
        let exec = if lv.len() >= PAR_LEVEL_MIN {
            exec
        } else {
            Execution::Sequential
        };
        for_each_chunk_mut(lv, block, exec, |c, chunk| {
            convolve_block(a, b, n, c, chunk);
        });
    }
    Ok(out)
}

/// Entries of level `n` whose first letter is `c`.
fn convolve_block(
    a: &TruncatedTensorSeries,
    b: &TruncatedTensorSeries,
    n: usize,
    c: usize,
    chunk: &mut [f64],
) {
    let d = a.dim;
    let a0 = a.data[0];
    let bn = b.level(n);
    let len = chunk.len();
    let lo = c * len;
    for (o, &y) in chunk.iter_mut().zip(&bn[lo..lo + len]) {
        *o = a0 * y;
    }
    for k in 1..=n {
        let ak = a.level(k);
        let bk = b.level(n - k);
        let tail = bk.len();
        let first = c * d.pow(k as u32 - 1);
        let count = d.pow(k as u32 - 1);
        for (r, &x) in ak[first..first + count].iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let dst = &mut chunk[r * tail..(r + 1) * tail];
            for (o, &y) in dst.iter_mut().zip(bk) {
                *o += x * y;
            }
        }
    }
}

/// Unit-leading element of the truncated tensor algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(TruncatedTensorSeries);

impl GroupElement {
    pub fn new(series: TruncatedTensorSeries) -> Result<Self> {
        if series.constant() != 1.0 {
            return Err(Error::LeadingTerm {
                expected: 1.0,
                found: series.constant(),
            });
        }
        Ok(Self(series))
    }

    pub fn identity(dim: usize, depth: usize) -> Self {
        Self(TruncatedTensorSeries::unit(dim, depth))
    }

    pub fn series(&self) -> &TruncatedTensorSeries {
        &self.0
    }

    pub fn into_series(self) -> TruncatedTensorSeries {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        Ok(Self(conc_mul(&self.0, &other.0)?))
    }

    pub fn mul_with(&self, other: &Self, exec: Execution) -> Result<Self> {
        Ok(Self(conc_mul_with(&self.0, &other.0, exec)?))
    }

    pub fn inverse(&self) -> Self {
        Self(invert_unit(&self.0))
    }

    /// `self⁻¹ · other`.
    pub fn increment_to(&self, other: &Self) -> Result<Self> {
        self.inverse().mul(other)
    }

    pub fn truncate(&self, depth: usize) -> Result<Self> {
        Ok(Self(self.0.truncate(depth)?))
    }
}

impl From<GroupElement> for TruncatedTensorSeries {
    fn from(g: GroupElement) -> Self {
        g.0
    }
}

/// Inverse under truncated concatenation.
pub fn inverse(a: &TruncatedTensorSeries) -> Result<TruncatedTensorSeries> {
    if a.constant() != 1.0 {
        return Err(Error::LeadingTerm {
            expected: 1.0,
            found: a.constant(),
        });
    }
    Ok(invert_unit(a))
}

// b₀ = 1, b_n = −Σ_{i≥1} a_i b_{n−i}
fn invert_unit(a: &TruncatedTensorSeries) -> TruncatedTensorSeries {
    let d = a.dim;
    let mut b = TruncatedTensorSeries::unit(d, a.depth);
    for n in 1..=a.depth {
        let mut acc = vec![0.0; d.pow(n as u32)];
        for i in 1..=n {
            let ai = a.level(i);
            let bj = b.level(n - i);
            let tail = bj.len();
            for (r, &x) in ai.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, &y) in acc[r * tail..(r + 1) * tail].iter_mut().zip(bj) {
                    *o -= x * y;
                }
            }
        }
        b.level_mut(n).copy_from_slice(&acc);
    }
    b
}

/// Truncated exponential of a series with zero constant term.
pub fn exp(l: &TruncatedTensorSeries) -> Result<GroupElement> {
    if l.constant() != 0.0 {
        return Err(Error::LeadingTerm {
            expected: 0.0,
            found: l.constant(),
        });
    }
    // Horner: 1 + l(1 + l/2(1 + l/3(…)))
    let unit = TruncatedTensorSeries::unit(l.dim, l.depth);
    let mut r = unit.clone();
    for k in (1..=l.depth).rev() {
        r = conc_mul(l, &r)?.scale(1.0 / k as f64);
        r.data[0] += 1.0;
    }
    r.data[0] = 1.0;
    Ok(GroupElement(r))
}

/// Truncated logarithm of a unit-leading series.
pub fn log(a: &GroupElement) -> TruncatedTensorSeries {
    let mut x = a.0.clone();
    x.data[0] = 0.0;
    // log(1+x) = x(1 − x(1/2 − x(1/3 − …)))
    let n = a.depth().max(1);
    let mut t = TruncatedTensorSeries::unit(x.dim, x.depth).scale(1.0 / n as f64);
    for k in (1..n).rev() {
        let xt = conc_mul(&x, &t).expect("same shape");
        t = xt.scale(-1.0);
        t.data[0] += 1.0 / k as f64;
    }
    conc_mul(&x, &t).expect("same shape")
}

/// Largest violation of the character property `⟨a,u⧢v⟩ = ⟨a,u⟩⟨a,v⟩` over
/// word pairs with `|u|+|v| ≤ depth`, the empty word included.
pub fn group_like_defect(a: &TruncatedTensorSeries) -> f64 {
    let d = a.dim;
    let pairs: Vec<(usize, usize)> = (0..=a.depth)
        .flat_map(|n| (0..=n).map(move |k| (k, n - k)))
        .collect();
    let worst = map_indexed(pairs.len(), Execution::default(), |i| {
        let (ku, kv) = pairs[i];
        let nu = d.pow(ku as u32);
        let nv = d.pow(kv as u32);
        let mut m: f64 = 0.0;
        let mut u = vec![0u32; ku];
        let mut v = vec![0u32; kv];
        for iu in 0..nu {
            digits(iu, d, &mut u);
            let au = a.level(ku)[iu];
            for iv in 0..nv {
                digits(iv, d, &mut v);
                let lhs = shuffle_pairing(a, &u, &v);
                let rhs = au * a.level(kv)[iv];
                m = m.max((lhs - rhs).abs());
            }
        }
        m
    });
    worst.into_iter().fold(0.0, f64::max)
}

pub(crate) fn digits(mut idx: usize, d: usize, out: &mut [u32]) {
    for slot in out.iter_mut().rev() {
        *slot = (idx % d) as u32;
        idx /= d;
    }
}

/// `⟨a, u⧢v⟩` by enumerating interleavings.
fn shuffle_pairing(a: &TruncatedTensorSeries, u: &[u32], v: &[u32]) -> f64 {
    fn go(lv: &[f64], d: usize, u: &[u32], v: &[u32], idx: usize) -> f64 {
        match (u.split_first(), v.split_first()) {
            (None, None) => lv[idx],
            (Some((&x, ur)), None) => go(lv, d, ur, v, idx * d + x as usize),
            (None, Some((&y, vr))) => go(lv, d, u, vr, idx * d + y as usize),
            (Some((&x, ur)), Some((&y, vr))) => {
                go(lv, d, ur, v, idx * d + x as usize) + go(lv, d, u, vr, idx * d + y as usize)
            }
        }
    }
    go(a.level(u.len() + v.len()), a.dim, u, v, 0)
}

/// Random Lie element: a uniform vector at level 1 plus random right-nested
/// brackets of letters at each higher level. Level `k` has ℓ¹ norm at most
/// `scale^k`.
pub fn random_lie_element<R: Rng + ?Sized>(
    dim: usize,
    depth: usize,
    scale: f64,
    rng: &mut R,
) -> TruncatedTensorSeries {
    let mut out = TruncatedTensorSeries::zeros(dim, depth);
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n1: f64 = v.iter().map(|x: &f64| x.abs()).sum::<f64>().max(1e-300);
    out.level_mut(1)
        .iter_mut()
        .zip(&v)
        .for_each(|(o, x)| *o = scale * x / n1);
    for k in 2..=depth {
        for _ in 0..dim {
            let mut br = TruncatedTensorSeries::from_vector(&basis(dim, rng.gen_range(0..dim)), depth);
            for _ in 1..k {
                let e = TruncatedTensorSeries::from_vector(&basis(dim, rng.gen_range(0..dim)), depth);
                br = e.commutator(&br).expect("same shape");
            }
            let c = rng.gen_range(-1.0..1.0) * scale.powi(k as i32) / (dim as f64 * 2f64.powi(k as i32 - 1));
            out.axpy(c, &br).expect("same shape");
        }
    }
    out
}

fn basis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// Group-like element `exp(ℓ)` for a random Lie element `ℓ`.
pub fn random_group_like<R: Rng + ?Sized>(
    dim: usize,
    depth: usize,
    scale: f64,
    rng: &mut R,
) -> GroupElement {
    exp(&random_lie_element(dim, depth, scale, rng)).expect("zero constant term")
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl Serialize for TruncatedTensorSeries {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesJson {
            dim: self.dim,
            depth: self.depth,
            levels: self.levels(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TruncatedTensorSeries {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = SeriesJson::deserialize(de)?;
        if j.levels.len() != j.depth + 1 {
            return Err(serde::de::Error::custom("depth does not match level count"));
        }
        Self::from_levels(j.dim, j.levels).map_err(serde::de::Error::custom)
    }
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(ser)
    }
}
