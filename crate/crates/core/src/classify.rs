//! Spectral classification on the unit circle from radial m-function data
//! and transfer-matrix growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::coeffs::{CoefficientSource, Verblunsky};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::mfun::{geometric_schedule, radial_scan, Confidence, Extended, LimitEstimate, RadialTrace, TruncationSchedule};
use crate::recursion::{gz_solution, sqrt_branch, szego_matrix, transfer_log_norms, Side};
use crate::subnorm::jl_scale;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub r_schedule: Vec<f64>,
    pub truncation: TruncationSchedule,
    /// Band around the imaginary axis treated as purely imaginary.
    pub eps_re: f64,
    /// `Re F` above this counts as divergent.
    pub divergence: f64,
    /// Chordal distance below which the two half-line limits agree.
    pub match_tol: f64,
    /// Chordal distance above which the two limits are well separated.
    pub gap_separation: f64,
    pub transfer_n_max: usize,
    pub decay_n_max: usize,
    pub decay_ratio: f64,
    /// Multiplier applied to the whole-line function before the rules run.
    pub whole_scale: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            r_schedule: geometric_schedule(20),
            truncation: TruncationSchedule::default(),
            eps_re: 1e-3,
            divergence: 1e4,
            match_tol: 1e-3,
            gap_separation: 1e-2,
            transfer_n_max: 4096,
            decay_n_max: 512,
            decay_ratio: 1e-3,
            whole_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "AC")]
    Ac,
    Singular,
    PointCandidate,
    Gap,
    Undetermined,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Ac => "AC",
            Verdict::Singular => "Singular",
            Verdict::PointCandidate => "PointCandidate",
            Verdict::Gap => "Gap",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideBoundedness {
    Bounded { sup: f64 },
    Growing { rate: f64 },
    Inconclusive { sup: f64, rate: f64 },
}

impl SideBoundedness {
    pub fn is_bounded(&self) -> bool {
        matches!(self, SideBoundedness::Bounded { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferBoundedness {
    pub plus: SideBoundedness,
    pub minus: SideBoundedness,
    pub lyap_plus: f64,
    pub lyap_minus: f64,
}

const BOUNDED_SUP: f64 = 1e3;
const SLOPE_TOL: f64 = 2e-3;

fn side_growth(log_norms: &[f64]) -> (SideBoundedness, f64) {
    let n = log_norms.len();
    let half = n / 2;
    let xs: Vec<f64> = (half..n).map(|k| k as f64).collect();
    let ys = &log_norms[half..];
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let sup = log_norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let verdict = if sup < BOUNDED_SUP && slope < SLOPE_TOL {
        SideBoundedness::Bounded { sup }
    } else if slope >= SLOPE_TOL {
        SideBoundedness::Growing { rate: slope }
    } else {
        SideBoundedness::Inconclusive { sup, rate: slope }
    };
    (verdict, slope)
}

/// Growth of `||A(n, e^{i theta})||` for `0 <= n <= n_max` and
/// `-n_max <= n <= -1`, from log-scaled products.
pub fn bounded_transfer_check(source: &CoefficientSource, theta: f64, n_max: usize) -> Result<TransferBoundedness> {
    if n_max < 32 {
        return Err(Error::InvalidParameter { name: "n_max", reason: format!("{n_max} < 32") });
    }
    let z = C64::from_polar(1.0, theta);
    let (plus, lyap_plus) = side_growth(&transfer_log_norms(source, z, Side::Plus, n_max)?);
    let (minus, lyap_minus) = side_growth(&transfer_log_norms(source, z, Side::Minus, n_max)?);
    Ok(TransferBoundedness { plus, minus, lyap_plus, lyap_minus })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ellipticity {
    Elliptic { trace: f64 },
    Hyperbolic { trace: f64 },
    Parabolic { trace: f64 },
}

const PARABOLIC_TOL: f64 = 1e-9;

/// `t = tr(z^{-1/2} S(a, z)) = 2 cos(theta/2) / rho` for a constant source.
pub fn ellipticity_check(source: &CoefficientSource, theta: f64) -> Result<Ellipticity> {
    let alpha = source.as_constant().ok_or(Error::Unsupported("ellipticity_check"))?;
    let z = C64::from_polar(1.0, theta);
    let s = szego_matrix(&Verblunsky::new(alpha)?, z)?.m;
    let t = (s.trace() / sqrt_branch(z)).re;
    Ok(if (t.abs() - 2.0).abs() <= PARABOLIC_TOL {
        Ellipticity::Parabolic { trace: t }
    } else if t.abs() < 2.0 {
        Ellipticity::Elliptic { trace: t }
    } else {
        Ellipticity::Hyperbolic { trace: t }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugacyVerdict {
    Verified { residual: f64, power_bound: f64, trace_abs: f64 },
    Refuted { omega: f64, residual: f64, power_bound: f64, trace_abs: f64 },
}

const CONJUGACY_TOL: f64 = 1e-9;
const POWER_LIMIT: f64 = 1e6;

/// Checks `A_z(w) = B(T w) A0 B(w)^{-1}` on `w_k = k / samples` for the
/// cocycle `A_z(w) = z^{-1/2} S(f(w), z)` (constant `f`, or `f(w) =
/// coupling e^{2 pi i w}` with `T w = w + frequency`), and that the powers of
/// `A0` stay bounded up to `10^4`.
pub fn verify_conjugacy<B: Fn(f64) -> Mat2>(
    source: &CoefficientSource,
    theta: f64,
    b: B,
    a0: Mat2,
    samples: usize,
) -> Result<ConjugacyVerdict> {
    let z = C64::from_polar(1.0, theta);
    let zh = sqrt_branch(z).inv();
    let (f, shift): (Box<dyn Fn(f64) -> C64>, f64) = match source {
        CoefficientSource::QuasiPeriodic { coupling, frequency, .. } => {
            let c = *coupling;
            (Box::new(move |w: f64| C64::from_polar(c, TAU * w)), *frequency)
        }
        _ => {
            let a = source.as_constant().ok_or(Error::Unsupported("verify_conjugacy"))?;
            (Box::new(move |_| a), 0.0)
        }
    };
    let mut worst = (0.0, 0.0f64);
    for k in 0..samples.max(1) {
        let w = k as f64 / samples.max(1) as f64;
        let lhs = szego_matrix(&Verblunsky::new(f(w))?, z)?.m.scale(zh);
        let res = match b(w).inverse() {
            Some(bi) => (b((w + shift).rem_euclid(1.0)) * a0 * bi).sub(&lhs).max_abs(),
            None => f64::INFINITY,
        };
        if !(res <= worst.1) {
            worst = (w, res);
        }
    }
    let mut p = Mat2::identity();
    let mut power_bound: f64 = 1.0;
    for _ in 0..10_000 {
        p = p * a0;
        power_bound = power_bound.max(p.norm());
        if !(power_bound < POWER_LIMIT) {
            break;
        }
    }
    let trace_abs = a0.trace().norm();
    Ok(if worst.1 < CONJUGACY_TOL && power_bound < POWER_LIMIT {
        ConjugacyVerdict::Verified { residual: worst.1, power_bound, trace_abs }
    } else {
        ConjugacyVerdict::Refuted { omega: worst.0, residual: worst.1, power_bound, trace_abs }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub plus_ratio: f64,
    pub minus_ratio: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub f_plus: LimitEstimate,
    pub m_minus: LimitEstimate,
    pub f_lambda: LimitEstimate,
    /// `(r, Re F)` over the usable radial samples, after `whole_scale`.
    pub re_f_trend: Vec<(f64, f64)>,
    pub transfer: TransferBoundedness,
    pub jl_ratio_plus: Option<f64>,
    pub jl_ratio_minus: Option<f64>,
    pub decay: Option<DecayCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralClassification {
    pub theta: f64,
    pub verdict: Verdict,
    pub confidence: Confidence,
    pub coherence_violation: bool,
    pub evidence: Evidence,
}

impl SpectralClassification {
    /// `Re F` limit, `NaN` when unknown and `inf` when divergent.
    pub fn re_f_limit(&self) -> f64 {
        match self.evidence.f_lambda.value {
            Some(v) => v.scale(1.0).re(),
            None => f64::NAN,
        }
    }
}

fn worst(cs: &[Confidence]) -> Confidence {
    let rank = |c: &Confidence| match c {
        Confidence::Stabilized => 0,
        Confidence::Extrapolated => 1,
        Confidence::Oscillating => 2,
    };
    *cs.iter().max_by_key(|c| rank(c)).unwrap_or(&Confidence::Oscillating)
}

fn tail_ratio(sq: &[f64]) -> f64 {
    let total: f64 = sq.iter().sum();
    let tail: f64 = sq[sq.len() / 2..].iter().sum();
    if total > 0.0 {
        tail / total
    } else {
        f64::NAN
    }
}

fn boundary_vector(beta: Extended) -> [C64; 2] {
    let one = C64::new(1.0, 0.0);
    match beta {
        Extended::Finite(b) => [one + b, b - one],
        Extended::Infinite => [one, one],
    }
}

/// Propagates `p + beta u` from `n = 0` with `beta` the right limit on
/// `[0, N]` and the left limit on `[-N, -1]`; the window follows the
/// Lyapunov rate so rounding in the growing direction stays negligible.
fn decay_check(
    source: &CoefficientSource,
    theta: f64,
    f_plus: Extended,
    m_minus: Extended,
    transfer: &TransferBoundedness,
    n_max: usize,
) -> Result<DecayCheck> {
    let z = C64::from_polar(1.0, theta);
    let window = |rate: f64| {
        let n = if rate > 0.0 { (10.0 / rate).ceil() } else { f64::INFINITY };
        (n.min(n_max as f64) as usize).max(16)
    };
    let (n_plus, n_minus) = (window(transfer.lyap_plus), window(transfer.lyap_minus));
    let right = gz_solution(source, z, boundary_vector(f_plus), 0, n_plus)?;
    let left = gz_solution(source, z, boundary_vector(m_minus), n_minus, 0)?;
    let sq_r: Vec<f64> = right.values.iter().map(|v| v[0].norm_sqr()).collect();
    let mut sq_l: Vec<f64> = left.values[..n_minus].iter().map(|v| v[0].norm_sqr()).collect();
    sq_l.reverse();
    Ok(DecayCheck { plus_ratio: tail_ratio(&sq_r), minus_ratio: tail_ratio(&sq_l), n_plus, n_minus })
}

fn decide(params: &ClassifyParams, fp: Option<Extended>, mm: Option<Extended>, fl: Option<Extended>) -> Verdict {
    let eps = params.eps_re;
    let finite_re = |x: Option<Extended>| x.and_then(|v| v.finite()).map(|v| v.re);
    let ac_plus = finite_re(fp).is_some_and(|re| re > eps);
    let ac_minus = finite_re(mm).is_some_and(|re| -re > eps);
    let fl_re = finite_re(fl);
    if (ac_plus || ac_minus) && fl_re.is_some_and(|re| re > eps && re < params.divergence) {
        return Verdict::Ac;
    }
    let on_axis = |x: Option<Extended>| match x {
        Some(Extended::Infinite) => true,
        Some(Extended::Finite(v)) => v.re.abs() <= eps,
        None => false,
    };
    if let (Some(a), Some(b)) = (fp, mm) {
        if on_axis(fp) && on_axis(mm) {
            let sep = a.chordal(b);
            let fl_div = matches!(fl, Some(Extended::Infinite)) || fl_re.is_some_and(|re| re >= params.divergence);
            if sep <= params.match_tol && fl_div {
                return Verdict::Singular;
            }
            if sep >= params.gap_separation && fl_re.is_some_and(|re| re.abs() < eps) {
                return Verdict::Gap;
            }
        }
    }
    Verdict::Undetermined
}

/// Verdict at `e^{i theta}` from the radial limits of `F+`, `M-` and the
/// whole-line function, with transfer growth and JL ratios as evidence.
pub fn classify_point(source: &CoefficientSource, theta: f64, params: &ClassifyParams) -> Result<SpectralClassification> {
    let trace = radial_scan(source, theta, &params.r_schedule, &params.truncation)?;
    classify_trace(source, &trace, params)
}

/// Classification from an existing radial scan.
pub fn classify_trace(source: &CoefficientSource, trace: &RadialTrace, params: &ClassifyParams) -> Result<SpectralClassification> {
    let theta = trace.theta;
    let s = params.whole_scale;
    let transfer = bounded_transfer_check(source, theta, params.transfer_n_max)?;
    let lim = &trace.limits;
    let f_lambda = LimitEstimate { value: lim.f_lambda.value.map(|v| v.scale(s)), ..lim.f_lambda };
    let (fp, mm, fl) = (lim.f_plus.reliable(), lim.m_minus.reliable(), f_lambda.reliable());
    let mut verdict = decide(params, fp, mm, fl);

    let mut decay = None;
    if verdict == Verdict::Singular {
        let d = decay_check(source, theta, fp.unwrap(), mm.unwrap(), &transfer, params.decay_n_max)?;
        if d.plus_ratio < params.decay_ratio && d.minus_ratio < params.decay_ratio {
            verdict = Verdict::PointCandidate;
        }
        decay = Some(d);
    }
    let confidence = match verdict {
        Verdict::Ac => {
            let side = if fp.and_then(|v| v.finite()).is_some_and(|v| v.re > params.eps_re) { lim.f_plus } else { lim.m_minus };
            worst(&[side.confidence, f_lambda.confidence])
        }
        Verdict::Undetermined => Confidence::Oscillating,
        _ => worst(&[lim.f_plus.confidence, lim.m_minus.confidence, f_lambda.confidence]),
    };
    let usable: Vec<_> = trace.samples.iter().filter(|x| x.stabilized && !x.whole.near_pole).collect();
    let re_f_trend = usable.iter().map(|x| (x.r, x.whole.lambda.scale(s).re())).collect();
    let jl_at = |side| {
        let r = usable.last()?.r;
        jl_scale(source, C64::from_polar(1.0, theta), r, side, 0.0).ok().map(|j| j.ratio)
    };
    let coherence_violation = (transfer.plus.is_bounded() || transfer.minus.is_bounded())
        && matches!(verdict, Verdict::Singular | Verdict::PointCandidate);
    Ok(SpectralClassification {
        theta,
        verdict,
        confidence,
        coherence_violation,
        evidence: Evidence {
            f_plus: lim.f_plus,
            m_minus: lim.m_minus,
            f_lambda,
            re_f_trend,
            transfer,
            jl_ratio_plus: jl_at(Side::Plus),
            jl_ratio_minus: jl_at(Side::Minus),
            decay,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: Vec<SpectralClassification>,
    /// Angles where transfer boundedness and a singular verdict coexist.
    pub coherence_violations: Vec<f64>,
}

pub fn grid_angles(count: usize) -> Vec<f64> {
    (0..count).map(|j| TAU * j as f64 / count as f64).collect()
}

/// Classifies `theta_j = 2 pi j / count`, in order. `jobs` fixes the worker
/// count; results do not depend on it.
pub fn classify_grid(source: &CoefficientSource, count: usize, params: &ClassifyParams, jobs: Option<usize>) -> Result<GridReport> {
    classify_angles(source, &grid_angles(count), params, jobs)
}

pub fn classify_angles(source: &CoefficientSource, angles: &[f64], params: &ClassifyParams, jobs: Option<usize>) -> Result<GridReport> {
    if angles.is_empty() {
        return Err(Error::InvalidParameter { name: "theta_count", reason: "must be at least 1".into() });
    }
    source.validate()?;
    let run = || angles.par_iter().map(|&t| classify_point(source, t, params)).collect::<Result<Vec<_>>>();
    let points = match jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter { name: "jobs", reason: e.to_string() })?
            .install(run)?,
        None => run()?,
    };
    let coherence_violations = points.iter().filter(|p| p.coherence_violation).map(|p| p.theta).collect();
    Ok(GridReport { points, coherence_violations })
}

impl GridReport {
    pub const CSV_HEADER: &'static str = "theta,verdict,ReF_limit,lyap_plus,lyap_minus,confidence";

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.points {
            serde_json::to_writer(&mut w, p)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            let conf = serde_json::to_value(p.confidence)?;
            writeln!(
                w,
                "{:e},{},{:e},{:e},{:e},{}",
                p.theta,
                p.verdict.as_str(),
                p.re_f_limit(),
                p.evidence.transfer.lyap_plus,
                p.evidence.transfer.lyap_minus,
                conf.as_str().unwrap_or("")
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params() -> ClassifyParams {
        ClassifyParams { transfer_n_max: 1024, ..ClassifyParams::default() }
    }

    #[test]
    fn decision_table() {
        let p = params();
        let f = |re, im| Some(Extended::Finite(c(re, im)));
        assert_eq!(decide(&p, f(0.5, 0.1), f(-0.5, 0.2), f(1.0, 0.0)), Verdict::Ac);
        assert_eq!(decide(&p, Some(Extended::Infinite), f(0.0, 0.0), f(1e-5, 0.1)), Verdict::Gap);
        assert_eq!(decide(&p, Some(Extended::Infinite), Some(Extended::Infinite), Some(Extended::Infinite)), Verdict::Singular);
        assert_eq!(decide(&p, f(0.0, 0.3), f(0.0, 0.3), f(2e4, 0.0)), Verdict::Singular);
        assert_eq!(decide(&p, None, f(-0.5, 0.0), f(1.0, 0.0)), Verdict::Ac);
        assert_eq!(decide(&p, None, None, f(1.0, 0.0)), Verdict::Undetermined);
        assert_eq!(decide(&p, f(0.0, 0.3), f(0.0, 0.3), f(1e-5, 0.0)), Verdict::Undetermined);
    }

    #[test]
    fn free_is_bounded_with_unit_sup() {
        let t = bounded_transfer_check(&CoefficientSource::free(), 1.0, 256).unwrap();
        match t.plus {
            SideBoundedness::Bounded { sup } => assert!((sup - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(t.minus.is_bounded());
    }

    #[test]
    fn constant_half_transfer() {
        let s = CoefficientSource::constant(c(0.5, 0.0));
        let t = bounded_transfer_check(&s, 0.0, 1024).unwrap();
        match t.plus {
            SideBoundedness::Growing { rate } => assert!((rate - 3f64.sqrt().ln()).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
        assert!(bounded_transfer_check(&s, std::f64::consts::PI, 4096).unwrap().plus.is_bounded());
    }

    #[test]
    fn ellipticity_examples() {
        let free = CoefficientSource::free();
        assert!(matches!(ellipticity_check(&free, 0.0).unwrap(), Ellipticity::Parabolic { .. }));
        assert!(matches!(ellipticity_check(&free, 2.0).unwrap(), Ellipticity::Elliptic { .. }));
        let half = CoefficientSource::constant(c(0.5, 0.0));
        match ellipticity_check(&half, std::f64::consts::PI).unwrap() {
            Ellipticity::Elliptic { trace } => assert!(trace.abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ellipticity_check(&half, std::f64::consts::FRAC_PI_3).unwrap(), Ellipticity::Parabolic { .. }));
        let rnd = CoefficientSource::RandomIid { seed: 1, radius: 0.5 };
        assert_eq!(ellipticity_check(&rnd, 1.0), Err(Error::Unsupported("ellipticity_check")));
    }

    #[test]
    fn conjugacy_constant() {
        let a = c(0.5, 0.0);
        let s = CoefficientSource::constant(a);
        let theta = 2.5;
        let z = C64::from_polar(1.0, theta);
        let a0 = szego_matrix(&Verblunsky::new(a).unwrap(), z).unwrap().m.scale(sqrt_branch(z).inv());
        match verify_conjugacy(&s, theta, |_| Mat2::identity(), a0, 16).unwrap() {
            ConjugacyVerdict::Verified { residual, .. } => assert_eq!(residual, 0.0),
            other => panic!("{other:?}"),
        }
        let wrong = a0.scale(c(0.0, 1.0));
        assert!(matches!(verify_conjugacy(&s, theta, |_| Mat2::identity(), wrong, 16).unwrap(), ConjugacyVerdict::Refuted { .. }));
    }

    #[test]
    fn verdict_serializes_as_spec_names() {
        assert_eq!(serde_json::to_string(&Verdict::Ac).unwrap(), "\"AC\"");
        assert_eq!(serde_json::to_string(&Verdict::PointCandidate).unwrap(), "\"PointCandidate\"");
    }
}
