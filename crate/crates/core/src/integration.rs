//! Integration of one-forms along sampled rough paths, a scalar Young
//! baseline, and a geometric-rough-path checker.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{sum_indexed, Execution};
use crate::one_form::LipOneFormData;
use crate::sewing::{estimate_control, sew, SewOptions, SewingReport, StrongControl};
use crate::signature::SampledRoughPath;
use crate::tensor::{group_like_defect, p_variation_power, Control, GroupElement};

/// Group-like defect above which a sample is reported as a violation.
pub const GROUP_LIKE_TOL: f64 = 1e-8;
/// Samples used for the superadditivity check of the induced control.
const SUPERADDITIVITY_POINTS: usize = 48;

/// Integrate `lip` along `x` over `[interval.0, interval.1]`.
#[derive(Clone, Debug)]
pub struct RoughIntegralProblem {
    pub x: SampledRoughPath,
    pub lip: LipOneFormData,
    pub p: f64,
    pub interval: (f64, f64),
    pub out_depth: usize,
    pub sew: SewOptions,
    /// Estimated from `μ` when absent.
    pub control: Option<StrongControl>,
    /// When false, `γ ≤ p` is reported as a warning instead of an error.
    pub strict: bool,
}

impl RoughIntegralProblem {
    pub fn new(x: SampledRoughPath, lip: LipOneFormData, p: f64, interval: (f64, f64), out_depth: usize) -> Self {
        Self {
            x,
            lip,
            p,
            interval,
            out_depth,
            sew: SewOptions::default(),
            control: None,
            strict: true,
        }
    }

    /// `⌊p⌋`, the degree of the local Taylor forms.
    pub fn degree(&self) -> usize {
        self.p.floor() as usize
    }

    /// Depth of `X` needed for the lift at the output depth.
    pub fn lift_depth(&self) -> usize {
        self.out_depth * (self.degree() + 1)
    }

    /// Sewing exponent `(⌊p⌋ + 1) / p`.
    pub fn alpha(&self) -> f64 {
        (self.degree() + 1) as f64 / self.p
    }

    /// Checks the hypotheses. Returns warnings for soft violations.
    pub fn check(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Hypothesis(format!("p must be a finite real >= 1, got {}", self.p)));
        }
        if self.out_depth == 0 {
            return Err(Error::InvalidArgument("output depth must be at least 1".into()));
        }
        if self.x.depth() < self.degree() {
            return Err(Error::Hypothesis(format!(
                "path depth {} is below floor(p) = {}",
                self.x.depth(),
                self.degree()
            )));
        }
        if self.lip.dim_in() != self.x.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.x.dim(),
                found: self.lip.dim_in(),
            });
        }
        if self.lip.stack_len() < self.degree() + 1 {
            return Err(Error::InsufficientDepth {
                required: self.degree() + 1,
                available: self.lip.stack_len(),
            });
        }
        let (s, t) = self.interval;
        self.x.check_interval(s, t)?;
        if !(s < t) {
            return Err(Error::InvalidArgument(format!("integration needs S < T, got [{s}, {t}]")));
        }
        if !(self.lip.gamma() > self.p) {
            let msg = format!("gamma = {} does not exceed p = {}", self.lip.gamma(), self.p);
            if self.strict {
                return Err(Error::Hypothesis(msg));
            }
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoughIntegral {
    pub element: GroupElement,
    /// Level 1 of `element`, the integral in `U`.
    pub level1: Vec<f64>,
    pub report: SewingReport,
    pub warnings: Vec<String>,
}

/// Sews `μ(s,t) = F_q(X_s⁻¹X_t)` with `q` the degree-`⌊p⌋` Taylor model of
/// the form at `x_s`.
pub fn rough_integral(problem: &RoughIntegralProblem) -> Result<RoughIntegral> {
    let warnings = problem.check()?;
    let n = problem.degree();
    let depth = problem.lift_depth();
    let x = if problem.x.depth() < depth {
        problem.x.extend_depth(depth)?
    } else {
        problem.x.clone()
    };
    let lip = &problem.lip;
    let out = problem.out_depth;
    let e = lip.dim_out();
    let mu = |a: f64, b: f64| -> Result<GroupElement> {
        if a == b {
            return Ok(GroupElement::identity(e, out));
        }
        let xa = x.element_at(a)?;
        let xb = x.element_at(b)?;
        let q = lip.taylor_at(xa.level(1), n)?;
        q.lift(xa.increment_to(&xb)?.series(), out)
    };
    let (s, t) = problem.interval;
    let control = match problem.control {
        Some(c) => c,
        None => estimate_control(&mu, s, t, problem.alpha())?,
    };
    let sewn = sew(mu, control, s, t, problem.sew)?;
    let element = sewn.total().clone();
    Ok(RoughIntegral {
        level1: element.level(1).to_vec(),
        element,
        report: sewn.report().clone(),
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct YoungIntegral {
    pub value: f64,
    pub levels_used: usize,
    pub gaps: Vec<f64>,
    pub warning: Option<String>,
}

/// `lim Σ x(t_i)(y(t_{i+1}) − y(t_i))` over dyadic partitions of `[s, t]`.
///
/// Refinement stops once two successive sums differ by less than `opts.tol`.
pub fn young_integral<X, Y>(x: X, y: Y, s: f64, t: f64, p: f64, q: f64, opts: SewOptions) -> Result<YoungIntegral>
where
    X: Fn(f64) -> f64 + Sync + Send,
    Y: Fn(f64) -> f64 + Sync + Send,
{
    young_integral_with(x, y, s, t, p, q, opts, Execution::default())
}

#[allow(clippy::too_many_arguments)]
pub fn young_integral_with<X, Y>(
    x: X,
    y: Y,
    s: f64,
    t: f64,
    p: f64,
    q: f64,
    opts: SewOptions,
    exec: Execution,
) -> Result<YoungIntegral>
where
    X: Fn(f64) -> f64 + Sync + Send,
    Y: Fn(f64) -> f64 + Sync + Send,
{
    if !(s < t) {
        return Err(Error::InvalidArgument(format!("integration needs s < t, got [{s}, {t}]")));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidArgument(format!("variation exponents must be >= 1, got p = {p}, q = {q}")));
    }
    let warning = (1.0 / p + 1.0 / q <= 1.0).then(|| format!("1/p + 1/q = {} is not above 1", 1.0 / p + 1.0 / q));
    let sum = |level: usize| {
        let n = 1usize << level;
        let h = (t - s) / n as f64;
        let at = |i: usize| if i == n { t } else { s + h * i as f64 };
        sum_indexed(n, exec, |i| {
            let (a, b) = (at(i), at(i + 1));
            x(a) * (y(b) - y(a))
        })
    };
    let mut prev = sum(0);
    let mut gaps = Vec::new();
    for level in 1..=opts.max_level {
        let cur = sum(level);
        let gap = (cur - prev).abs();
        gaps.push(gap);
        prev = cur;
        if gap < opts.tol && level >= opts.min_level {
            return Ok(YoungIntegral {
                value: cur,
                levels_used: level,
                gaps,
                warning,
            });
        }
    }
    Err(Error::NotConverged(Box::new(SewingReport {
        levels_used: opts.max_level,
        final_gap: gaps.last().copied().unwrap_or(f64::NAN),
        gaps,
        cst_estimate: 0.0,
        admission_ratio: 0.0,
        control: None,
    })))
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricReport {
    pub p: f64,
    pub samples: usize,
    /// `‖X‖_{p-var}` over the samples.
    pub p_variation: f64,
    pub max_group_like_defect: f64,
    /// Largest `ω(s,u) + ω(u,t) − ω(s,t)` over checked triples.
    pub max_superadditivity_excess: f64,
    pub superadditivity_points: usize,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Sampled p-variation, superadditivity of the induced control, and
/// group-likeness of every sample and increment.
pub fn verify_geometric(x: &SampledRoughPath, p: f64) -> Result<GeometricReport> {
    let mut violations = Vec::new();
    let elements = x.elements();
    let p_var = p_variation_power(elements, p)?.powf(1.0 / p);

    let mut worst_defect: f64 = 0.0;
    for (i, g) in elements.iter().enumerate() {
        let d = group_like_defect(g.series());
        worst_defect = worst_defect.max(d);
        if d > GROUP_LIKE_TOL {
            violations.push(format!("sample {i} at t = {}: group-like defect {d:e}", x.times()[i]));
        }
    }
    for (i, w) in elements.windows(2).enumerate() {
        let d = group_like_defect(w[0].increment_to(&w[1])?.series());
        worst_defect = worst_defect.max(d);
        if d > GROUP_LIKE_TOL {
            violations.push(format!("increment {i}..{}: group-like defect {d:e}", i + 1));
        }
    }

    let n = elements.len();
    let m = n.min(SUPERADDITIVITY_POINTS);
    let idx: Vec<usize> = (0..m).map(|k| k * (n - 1) / (m - 1).max(1)).collect();
    let times: Vec<f64> = idx.iter().map(|&i| x.times()[i]).collect();
    let pts: Vec<GroupElement> = idx.iter().map(|&i| elements[i].clone()).collect();
    let omega = Control::p_variation(&times, &pts, p)?;
    let mut excess: f64 = 0.0;
    for a in 0..m {
        for b in a..m {
            for c in b..m {
                let (s, u, t) = (times[a], times[b], times[c]);
                let lhs = omega.eval(s, u) + omega.eval(u, t);
                let rhs = omega.eval(s, t);
                let ex = lhs - rhs;
                excess = excess.max(ex);
                if ex > 1e-9 * (1.0 + rhs) {
                    violations.push(format!("control not superadditive on ({s}, {u}, {t}): excess {ex:e}"));
                }
            }
        }
    }
    Ok(GeometricReport {
        p,
        samples: n,
        p_variation: p_var,
        max_group_like_defect: worst_defect,
        max_superadditivity_excess: excess,
        superadditivity_points: m,
        passed: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::one_form::PolynomialOneForm;
    use crate::signature::{lift_path, PiecewiseLinearPath};
    use crate::tensor::TruncatedTensorSeries;

    fn line(n: usize) -> SampledRoughPath {
        let path = PiecewiseLinearPath::sample(|t| vec![t], 0.0, 1.0, n).unwrap();
        lift_path(&path, 2)
    }

    fn identity_form() -> PolynomialOneForm {
        PolynomialOneForm::new(1, 1, vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn constant_form_integrates_to_increment() {
        let path = PiecewiseLinearPath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![0.3, 2.0]],
        )
        .unwrap();
        let a = PolynomialOneForm::constant(2, 1, vec![2.0, -1.0]).unwrap();
        let lip = LipOneFormData::from_polynomial(&a, 2.0);
        let prob = RoughIntegralProblem::new(lift_path(&path, 2), lip, 1.0, (0.0, 1.0), 2);
        let r = rough_integral(&prob).unwrap();
        assert!((r.level1[0] - (2.0 * 0.3 + 1.0 * -2.0)).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn identity_form_on_line() {
        let lip = LipOneFormData::from_polynomial(&identity_form(), 2.0);
        let prob = RoughIntegralProblem::new(line(4), lip, 1.0, (0.0, 1.0), 2);
        let r = rough_integral(&prob).unwrap();
        assert!((r.level1[0] - 0.5).abs() < 1e-12);
        assert!((r.element.level(2)[0] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn hypotheses() {
        let lip = LipOneFormData::from_polynomial(&identity_form(), 1.0);
        let mut prob = RoughIntegralProblem::new(line(4), lip, 1.0, (0.0, 1.0), 1);
        assert!(matches!(rough_integral(&prob), Err(Error::Hypothesis(_))));
        prob.strict = false;
        assert_eq!(rough_integral(&prob).unwrap().warnings.len(), 1);
        prob.p = 0.5;
        assert!(rough_integral(&prob).is_err());
        let stack: Vec<crate::one_form::StackFn> = vec![std::sync::Arc::new(|_: &[f64]| vec![1.0])];
        let c = LipOneFormData::new(1, 1, stack, 1.0, 3.0).unwrap();
        let short = RoughIntegralProblem::new(line(4), c, 2.5, (0.0, 1.0), 1);
        assert!(matches!(rough_integral(&short), Err(Error::InsufficientDepth { .. })));
    }

    #[test]
    fn young_examples() {
        let opts = SewOptions {
            tol: 5e-9,
            max_level: 30,
            min_level: 1,
        };
        let c = young_integral(|_| 3.0, |t| t * t, 0.0, 1.0, 1.0, 1.0, opts).unwrap();
        assert_eq!(c.value, 3.0);
        let r = young_integral(|t| t, |t| t, 0.0, 1.0, 1.0, 1.0, opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-8);
        assert!(r.warning.is_none());
        for w in r.gaps.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-6);
        }
        let rough = young_integral(|t| t, |t| t, 0.0, 1.0, 2.0, 2.0, opts).unwrap();
        assert!(rough.warning.is_some());
        let tight = SewOptions { max_level: 3, ..opts };
        assert!(matches!(
            young_integral(|t| t, |t| t, 0.0, 1.0, 1.0, 1.0, tight),
            Err(Error::NotConverged(_))
        ));
    }

    #[test]
    fn young_matches_rough_integral_in_one_dimension() {
        let lip = LipOneFormData::from_polynomial(&identity_form(), 2.0);
        let prob = RoughIntegralProblem::new(line(8), lip, 1.0, (0.0, 1.0), 1);
        let rough = rough_integral(&prob).unwrap().level1[0];
        let opts = SewOptions {
            tol: 5e-9,
            max_level: 30,
            min_level: 1,
        };
        let young = young_integral(|t| t, |t| t, 0.0, 1.0, 1.0, 1.0, opts).unwrap().value;
        assert!((rough - young).abs() < 1e-8);
    }

    #[test]
    fn geometric_checks() {
        let path = PiecewiseLinearPath::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 2.0], vec![-1.0, 2.5]],
        )
        .unwrap();
        let x = lift_path(&path, 3);
        let rep = verify_geometric(&x, 1.0).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
        assert!((rep.p_variation - path.total_variation()).abs() < 1e-12);

        let flat = PiecewiseLinearPath::new(vec![0.0, 1.0, 2.0], vec![vec![1.0]; 3]).unwrap();
        assert_eq!(verify_geometric(&lift_path(&flat, 2), 2.0).unwrap().p_variation, 0.0);

        let mut elements = x.elements().to_vec();
        let mut s: TruncatedTensorSeries = elements[2].series().clone();
        s.level_mut(2)[1] += 0.1;
        elements[2] = GroupElement::new(s).unwrap();
        let bad = SampledRoughPath::new(x.times().to_vec(), elements).unwrap();
        let rep = verify_geometric(&bad, 1.0).unwrap();
        assert!(!rep.passed);
        assert!(rep.violations.iter().any(|v| v.contains("group-like")));
    }
}
