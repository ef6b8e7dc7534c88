//! Piecewise-linear paths, their signatures, and sampled rough paths.
//!
//! Signatures are evaluated with Chen's identity: the signature of a line
//! segment with increment `v` is `exp(v)`, and concatenation of paths maps to
//! the tensor product of signatures.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::tensor::{exp, group_like_defect, log, GroupElement, TruncatedTensorSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPath("need at least two samples".into()));
        }
        if times.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                found: points.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidPath("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) || !times[i].is_finite() {
                return Err(Error::InvalidPath(format!("non-finite value in sample {i}")));
            }
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath(format!(
                "times must increase strictly: t[{}] = {} >= t[{}] = {}",
                i,
                times[i],
                i + 1,
                times[i + 1]
            )));
        }
        Ok(Self { times, points })
    }

    /// Samples `f` at `n + 1` equally spaced times on `[t0, t1]`.
    pub fn sample(f: impl Fn(f64) -> Vec<f64>, t0: f64, t1: f64, n: usize) -> Result<Self> {
        let n = n.max(1);
        let times: Vec<f64> = (0..=n)
            .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
            .collect();
        let points = times.iter().map(|&t| f(t)).collect();
        Self::new(times, points)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if !(s <= t && s >= self.start() && t <= self.end()) {
            return Err(Error::IntervalOutOfRange {
                start: s,
                end: t,
                min: self.start(),
                max: self.end(),
            });
        }
        Ok(())
    }

    /// Linear interpolation; times outside the range clamp to the endpoints.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.points[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.points[n - 1].clone();
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let lam = (t - t0) / (t1 - t0);
        self.points[i]
            .iter()
            .zip(&self.points[i + 1])
            .map(|(a, b)| a + lam * (b - a))
            .collect()
    }

    /// Sum of ℓ¹ norms of segment increments.
    pub fn total_variation(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()).sum::<f64>())
            .sum()
    }

    /// Same image traversed backwards over the same time range.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.start(), self.end());
        let times = self.times.iter().rev().map(|&t| a + b - t).collect();
        let points = self.points.iter().rev().cloned().collect();
        Self { times, points }
    }

    /// Breakpoints of `[s, t]`: the endpoints plus interior sample times.
    fn breakpoints(&self, s: f64, t: f64) -> Vec<(f64, Vec<f64>)> {
        let mut out = vec![(s, self.point_at(s))];
        for (i, &ti) in self.times.iter().enumerate() {
            if ti > s && ti < t {
                out.push((ti, self.points[i].clone()));
            }
        }
        if t > s {
            out.push((t, self.point_at(t)));
        }
        out
    }

    /// Reads `t,x1,...,xd` CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let dim = headers.len().saturating_sub(1);
        let header_ok = dim >= 1
            && &headers[0] == "t"
            && (1..=dim).all(|i| headers[i] == format!("x{i}"));
        if !header_ok {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header t,x1,...,xd, found {:?}", headers.iter().collect::<Vec<_>>()),
            });
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != dim + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", dim + 1, rec.len()),
                });
            }
            let mut vals = Vec::with_capacity(dim + 1);
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                vals.push(v);
            }
            if let Some(&prev) = times.last() {
                if vals[0] <= prev {
                    return Err(Error::Parse {
                        line,
                        message: format!("time {} does not exceed previous time {}", vals[0], prev),
                    });
                }
            }
            times.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(Error::Parse {
                line: times.len() + 1,
                message: "a path needs at least two samples".into(),
            });
        }
        Self::new(times, points)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 1..=self.dim() {
            s.push_str(&format!(",x{i}"));
        }
        s.push('\n');
        for (t, p) in self.times.iter().zip(&self.points) {
            s.push_str(&t.to_string());
            for x in p {
                s.push(',');
                s.push_str(&x.to_string());
            }
            s.push('\n');
        }
        s
    }
}

/// `exp(b − a)`, built level by level as `v^{⊗k}/k!`.
pub fn segment_signature(a: &[f64], b: &[f64], depth: usize) -> GroupElement {
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let d = v.len();
    let mut s = TruncatedTensorSeries::unit(d, depth);
    for k in 1..=depth {
        let prev = s.level(k - 1).to_vec();
        let inv_k = 1.0 / k as f64;
        let lv = s.level_mut(k);
        for (i, &p) in prev.iter().enumerate() {
            for (j, &x) in v.iter().enumerate() {
                lv[i * d + j] = p * x * inv_k;
            }
        }
    }
    GroupElement::new(s).expect("unit leading term")
}

/// Signature over the whole time range.
pub fn signature(path: &PiecewiseLinearPath, depth: usize) -> GroupElement {
    signature_on(path, depth, path.start(), path.end()).expect("full range")
}

/// Signature over `[s, t]`, splitting segments at non-sample endpoints.
pub fn signature_on(path: &PiecewiseLinearPath, depth: usize, s: f64, t: f64) -> Result<GroupElement> {
    signature_on_with(path, depth, s, t, Execution::default())
}

pub fn signature_on_with(
    path: &PiecewiseLinearPath,
    depth: usize,
    s: f64,
    t: f64,
    exec: Execution,
) -> Result<GroupElement> {
    path.check_interval(s, t)?;
    let bp = path.breakpoints(s, t);
    let segs = map_indexed(bp.len().saturating_sub(1), exec, |i| {
        segment_signature(&bp[i].1, &bp[i + 1].1, depth)
    });
    let mut acc = GroupElement::identity(path.dim(), depth);
    for g in &segs {
        acc = acc.mul(g)?;
    }
    Ok(acc)
}

/// Strictly ordered nested sums of increments on a uniform grid of `grid`
/// steps. First-order accurate above level 1; a test oracle only.
pub fn brute_force_iterated_integrals(
    path: &PiecewiseLinearPath,
    depth: usize,
    grid: usize,
) -> GroupElement {
    let grid = grid.max(1);
    let d = path.dim();
    let (a, b) = (path.start(), path.end());
    let mut levels: Vec<Vec<f64>> = (0..=depth).map(|k| vec![0.0; d.pow(k as u32)]).collect();
    levels[0][0] = 1.0;
    let mut prev = path.point_at(a);
    for j in 1..=grid {
        let cur = path.point_at(a + (b - a) * j as f64 / grid as f64);
        let delta: Vec<f64> = cur.iter().zip(&prev).map(|(x, y)| x - y).collect();
        for k in (1..=depth).rev() {
            let (lo, hi) = levels.split_at_mut(k);
            let src = &lo[k - 1];
            for (i, &p) in src.iter().enumerate() {
                for (l, &x) in delta.iter().enumerate() {
                    hi[0][i * d + l] += p * x;
                }
            }
        }
        prev = cur;
    }
    GroupElement::new(TruncatedTensorSeries::from_levels(d, levels).expect("shapes")).expect("unit")
}

/// A path in the truncated group, known at sample times.
#[derive(Clone, Debug)]
pub struct SampledRoughPath {
    times: Vec<f64>,
    elements: Vec<GroupElement>,
}

impl SampledRoughPath {
    pub fn new(times: Vec<f64>, elements: Vec<GroupElement>) -> Result<Self> {
        if times.len() < 2 || times.len() != elements.len() {
            return Err(Error::InvalidPath(
                "need matching times and elements, at least two of each".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("times must increase strictly".into()));
        }
        let (d, n) = (elements[0].dim(), elements[0].depth());
        for g in &elements {
            if g.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: g.dim(),
                });
            }
            if g.depth() != n {
                return Err(Error::DepthMismatch {
                    expected: n,
                    found: g.depth(),
                });
            }
        }
        Ok(Self { times, elements })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.elements[0].depth()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if !(s <= t && s >= self.start() && t <= self.end()) {
            return Err(Error::IntervalOutOfRange {
                start: s,
                end: t,
                min: self.start(),
                max: self.end(),
            });
        }
        Ok(())
    }

    /// Sample index of `t`, if `t` is a sample time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.total_cmp(&t)).ok()
    }

    /// `X_t`. Between samples, `X_{t_i} exp(λ log(X_{t_i}⁻¹ X_{t_{i+1}}))`,
    /// which is exact for lifts of piecewise-linear paths.
    pub fn element_at(&self, t: f64) -> Result<GroupElement> {
        self.check_interval(t, t)?;
        if let Some(i) = self.index_of(t) {
            return Ok(self.elements[i].clone());
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let lam = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let inc = self.elements[i].increment_to(&self.elements[i + 1])?;
        let step = exp(&log(&inc).scale(lam))?;
        self.elements[i].mul(&step)
    }

    /// `X_s⁻¹ X_t`.
    pub fn increment(&self, s: f64, t: f64) -> Result<GroupElement> {
        self.check_interval(s, t)?;
        self.element_at(s)?.increment_to(&self.element_at(t)?)
    }

    /// Level-1 trace `x_t`.
    pub fn trace_at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.element_at(t)?.level(1).to_vec())
    }

    /// Largest group-like defect over sample elements and consecutive
    /// increments.
    pub fn max_defect(&self) -> Result<f64> {
        let mut worst = group_like_defect(self.elements[0].series());
        for w in self.elements.windows(2) {
            worst = worst.max(group_like_defect(w[0].increment_to(&w[1])?.series()));
        }
        Ok(worst)
    }

    /// The path at a larger depth. Each increment `exp(ℓ)` keeps its Lie
    /// element `ℓ`, so the extension is the lift of the piecewise-geodesic
    /// path that [`Self::element_at`] interpolates.
    pub fn extend_depth(&self, depth: usize) -> Result<Self> {
        if depth <= self.depth() {
            let elements = self
                .elements
                .iter()
                .map(|g| g.truncate(depth))
                .collect::<Result<Vec<_>>>()?;
            return Self::new(self.times.clone(), elements);
        }
        let lift = |g: &GroupElement| exp(&log(g).extend(depth));
        let mut acc = lift(&self.elements[0])?;
        let mut elements = vec![acc.clone()];
        for w in self.elements.windows(2) {
            acc = acc.mul(&lift(&w[0].increment_to(&w[1])?)?)?;
            elements.push(acc.clone());
        }
        Self::new(self.times.clone(), elements)
    }

    /// Same path cut to `[s, t]`, with interpolated endpoints.
    pub fn restrict(&self, s: f64, t: f64) -> Result<Self> {
        self.check_interval(s, t)?;
        if s == t {
            return Err(Error::InvalidArgument("cannot restrict to a point".into()));
        }
        let mut times = vec![s];
        let mut elements = vec![self.element_at(s)?];
        for (i, &ti) in self.times.iter().enumerate() {
            if ti > s && ti < t {
                times.push(ti);
                elements.push(self.elements[i].clone());
            }
        }
        times.push(t);
        elements.push(self.element_at(t)?);
        Self::new(times, elements)
    }
}

/// `X_t = exp(x_{t₀}) S(x|_{[t₀,t]})` at the sample times of `path`.
pub fn lift_path(path: &PiecewiseLinearPath, depth: usize) -> SampledRoughPath {
    let d = path.dim();
    let zero = vec![0.0; d];
    let mut acc = segment_signature(&zero, &path.points[0], depth);
    let segs = map_indexed(path.times.len() - 1, Execution::default(), |i| {
        segment_signature(&path.points[i], &path.points[i + 1], depth)
    });
    let mut elements = Vec::with_capacity(path.times.len());
    elements.push(acc.clone());
    for g in &segs {
        acc = acc.mul(g).expect("same shape");
        elements.push(acc.clone());
    }
    SampledRoughPath::new(path.times.clone(), elements).expect("validated path")
}
