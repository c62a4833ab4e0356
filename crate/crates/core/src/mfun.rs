//! Carathéodory functions of the half-lines, the whole-line function built
//! from them, and radial scans toward the unit circle.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::coeffs::{CoefficientSource, Verblunsky};
use crate::error::{Error, Result};
use crate::operator::{build_extended, build_half_line_plus, spectral_measure, TruncatedOperator};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extended {
    Finite(C64),
    Infinite,
}

impl Extended {
    /// `num / den`, with `Infinite` for a vanishing denominator.
    pub fn ratio(num: C64, den: C64) -> Self {
        if den == ZERO && num != ZERO {
            Extended::Infinite
        } else {
            Extended::Finite(num / den)
        }
    }

    pub fn finite(self) -> Option<C64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Homogeneous coordinates `(v1, v2)` with `max(|v1|, |v2|) = 1`.
    pub fn homogeneous(self) -> (C64, C64) {
        match self {
            Extended::Infinite => (ONE, ZERO),
            Extended::Finite(v) if v.norm() <= 1.0 => (v, ONE),
            Extended::Finite(v) => (ONE, v.inv()),
        }
    }

    pub fn re(self) -> f64 {
        self.finite().map_or(f64::INFINITY, |v| v.re)
    }

    pub fn abs(self) -> f64 {
        self.finite().map_or(f64::INFINITY, |v| v.norm())
    }

    pub fn scale(self, s: f64) -> Self {
        match self {
            Extended::Finite(v) => Extended::Finite(v * s),
            Extended::Infinite => Extended::Infinite,
        }
    }

    /// Chordal distance on the Riemann sphere, in `[0, 1]`.
    pub fn chordal(self, other: Self) -> f64 {
        let (a1, a2) = self.homogeneous();
        let (b1, b2) = other.homogeneous();
        let na = (a1.norm_sqr() + a2.norm_sqr()).sqrt();
        let nb = (b1.norm_sqr() + b2.norm_sqr()).sqrt();
        (a1 * b2 - a2 * b1).norm() / (na * nb)
    }
}

fn require_in_disk(z: C64) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "z", reason: format!("|z| = {} is not < 1", z.norm()) })
    }
}

fn require_n(n: usize) -> Result<()> {
    if n >= 8 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "n", reason: format!("truncation {n} < 8") })
    }
}

/// `F+(z) = 1 + 2 z [(C+ - z)^{-1}]_{00}` on the `[0, n]` truncation with
/// cut phase 1, by a banded solve.
pub fn f_plus(source: &CoefficientSource, z: C64, n: usize) -> Result<C64> {
    require_in_disk(z)?;
    require_n(n)?;
    let op = build_half_line_plus(source, n, ONE)?;
    Ok(ONE + z * op.resolvent_diagonal(z, 0)? * 2.0)
}

/// Same quantity as [`f_plus`] from the dense eigen-decomposition.
pub fn f_plus_spectral(source: &CoefficientSource, z: C64, n: usize) -> Result<C64> {
    require_in_disk(z)?;
    require_n(n)?;
    let op = build_half_line_plus(source, n, ONE)?;
    Ok(spectral_measure(&op, &[0])?.borel(z))
}

/// `F-(z, -1) = -F~+(z, 0)` with `F~+` taken on the reflected source.
pub fn f_minus(source: &CoefficientSource, z: C64, n: usize) -> Result<C64> {
    Ok(-f_plus(&source.reflect(), z, n)?)
}

/// `M-` from `F-` and `a = alpha_{-1}`:
/// `[Re(1 - conj a) F- + i Im(1 + conj a)] / [i Im(1 - conj a) F- + Re(1 + conj a)]`.
pub fn m_minus_from(f_minus: Extended, alpha_m1: C64) -> Extended {
    let ab = alpha_m1.conj();
    let a = C64::new((ONE - ab).re, 0.0);
    let b = C64::new(0.0, (ONE + ab).im);
    let c = C64::new(0.0, (ONE - ab).im);
    let d = C64::new((ONE + ab).re, 0.0);
    let (f1, f2) = f_minus.homogeneous();
    Extended::ratio(a * f1 + b * f2, c * f1 + d * f2)
}

pub fn m_minus(source: &CoefficientSource, z: C64, n: usize) -> Result<Extended> {
    let fm = f_minus(source, z, n)?;
    Ok(m_minus_from(Extended::Finite(fm), source.alpha(-1)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WholeLineValue {
    /// The Green-diagonal expression; 1 for the free source.
    pub value: Extended,
    /// Borel transform of the sum of the spectral measures of `delta_0` and
    /// `delta_1`; equals `value + 1`.
    pub lambda: Extended,
    /// Chordal distance between `F+` and `M-`.
    pub separation: f64,
    pub near_pole: bool,
}

/// Below this chordal separation of `F+` and `M-` a sample is unusable.
pub const POLE_SEPARATION: f64 = 1e-12;

/// Whole-line function from the half-line data, evaluated in homogeneous
/// coordinates so that large or infinite `F+`, `M-` stay well conditioned.
pub fn f_whole_from(f_plus: Extended, m_minus: Extended, alpha0: &Verblunsky, z: C64) -> Result<WholeLineValue> {
    if z == ZERO {
        return Err(Error::ZeroSpectralParameter);
    }
    let (a0, z2) = (alpha0.alpha, z * z);
    let a = a0.conj() + z * 2.0 + a0 * z2;
    let b = a0 * z2 - a0.conj();
    let c = a0.conj() - z * 2.0 + a0 * z2;
    let (f1, f2) = f_plus.homogeneous();
    let (m1, m2) = m_minus.homogeneous();
    let num = a * f2 * m2 + b * (m1 * f2 + f1 * m2) + c * f1 * m1;
    let den = z * (alpha0.rho * alpha0.rho) * (f1 * m2 - m1 * f2);
    let separation = f_plus.chordal(m_minus);
    let value = match Extended::ratio(num, den) {
        Extended::Finite(v) => Extended::Finite(v - ONE),
        inf => inf,
    };
    let lambda = match value {
        Extended::Finite(v) => Extended::Finite(v + ONE),
        inf => inf,
    };
    Ok(WholeLineValue { value, lambda, separation, near_pole: separation < POLE_SEPARATION })
}

pub fn f_whole(source: &CoefficientSource, z: C64, n: usize) -> Result<WholeLineValue> {
    let fp = Extended::Finite(f_plus(source, z, n)?);
    let mm = m_minus(source, z, n)?;
    f_whole_from(fp, mm, &source.coefficient(0)?, z)
}

/// Window and cut phases of an extended truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n_min: i64,
    pub n_max: i64,
    pub phase_left: C64,
    pub phase_right: C64,
}

impl WindowSpec {
    /// `[-n-1, n]` with cuts `alpha_{-n-2} = -1`, `alpha_n = 1`: its two halves
    /// are exactly the truncations behind [`f_plus`] and [`f_minus`] at `n`.
    pub fn matched(n: usize) -> Self {
        Self { n_min: -(n as i64) - 1, n_max: n as i64, phase_left: -ONE, phase_right: ONE }
    }

    pub fn build(&self, source: &CoefficientSource) -> Result<TruncatedOperator> {
        build_extended(source, self.n_min, self.n_max, self.phase_left, self.phase_right)
    }
}

/// Borel transform of the spectral measures of `delta_0` and `delta_1` on an
/// extended truncation; total mass 2.
pub fn f_whole_oracle(source: &CoefficientSource, z: C64, window: &WindowSpec) -> Result<C64> {
    require_in_disk(z)?;
    Ok(spectral_measure(&window.build(source)?, &[0, 1])?.borel(z))
}

/// `M00 = 1 + (1 - F+)(1 + M-) / (F+ - M-)`, the Borel transform of the
/// `delta_0` spectral measure of the whole line.
pub fn m00_from(f_plus: Extended, m_minus: Extended) -> Extended {
    let (f1, f2) = f_plus.homogeneous();
    let (m1, m2) = m_minus.homogeneous();
    Extended::ratio(f2 * m2 - f1 * m1, f1 * m2 - m1 * f2)
}

pub fn m00(source: &CoefficientSource, z: C64, n: usize) -> Result<Extended> {
    let fp = Extended::Finite(f_plus(source, z, n)?);
    Ok(m00_from(fp, m_minus(source, z, n)?))
}

/// Borel transform of the `delta_0` spectral measure on an extended truncation.
pub fn m00_oracle(source: &CoefficientSource, z: C64, window: &WindowSpec) -> Result<C64> {
    require_in_disk(z)?;
    Ok(spectral_measure(&window.build(source)?, &[0])?.borel(z))
}

/// `F^w = (i sin w - F cos w) / (-cos w + i F sin w)`; the same map serves
/// `M-`. A vanishing denominator gives `Infinite`.
pub fn rotate_omega(value: Extended, omega: f64) -> Extended {
    let (c, s) = (C64::new(omega.cos(), 0.0), C64::new(0.0, omega.sin()));
    let (v1, v2) = value.homogeneous();
    Extended::ratio(s * v2 - c * v1, -c * v2 + s * v1)
}

/// Inverse of [`rotate_omega`].
pub fn unrotate_omega(value: Extended, omega: f64) -> Extended {
    let (c, s) = (C64::new(omega.cos(), 0.0), C64::new(0.0, omega.sin()));
    let (v1, v2) = value.homogeneous();
    Extended::ratio(c * v1 + s * v2, s * v1 + c * v2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSchedule {
    pub n_init: usize,
    pub n_max: usize,
    pub tol: f64,
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self { n_init: 64, n_max: 4096, tol: 1e-8 }
    }
}

impl TruncationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 8 {
            return Err(Error::InvalidParameter { name: "n_init", reason: format!("{} < 8", self.n_init) });
        }
        if self.n_max < self.n_init {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("{} < n_init = {}", self.n_max, self.n_init),
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", reason: format!("{} is not positive", self.tol) });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adapted {
    pub value: C64,
    pub n: usize,
    pub stabilized: bool,
    pub residual: f64,
}

/// Doubles `n` until two successive values agree to `tol` (relative once
/// the values exceed 1) or `n_max` is reached.
pub fn adapt<F: Fn(usize) -> Result<C64>>(f: F, sched: &TruncationSchedule) -> Result<Adapted> {
    let mut n = sched.n_init;
    let mut v = f(n)?;
    let mut residual = f64::INFINITY;
    while 2 * n <= sched.n_max {
        let v2 = f(2 * n)?;
        residual = (v2 - v).norm();
        n *= 2;
        v = v2;
        if residual < sched.tol * v.norm().max(1.0) {
            return Ok(Adapted { value: v, n, stabilized: true, residual });
        }
    }
    Ok(Adapted { value: v, n, stabilized: false, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Stabilized,
    Extrapolated,
    Oscillating,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: Option<Extended>,
    pub confidence: Confidence,
    pub used: usize,
    pub last_r: Option<f64>,
}

impl LimitEstimate {
    pub fn reliable(&self) -> Option<Extended> {
        match self.confidence {
            Confidence::Oscillating => None,
            _ => self.value,
        }
    }
}

const LIMIT_STAB_TOL: f64 = 1e-6;
const DIVERGENCE_FLOOR: f64 = 1e3;
const DIVERGENCE_RATIO: f64 = 1.5;
const CONTRACTION_MAX: f64 = 0.9;

/// Boundary value from samples ordered by increasing `r`: a settled tail,
/// geometric convergence (extrapolated), clean divergence, or nothing.
pub fn estimate_limit(points: &[(f64, Extended)]) -> LimitEstimate {
    let used = points.len();
    let last_r = points.last().map(|p| p.0);
    let est = |value, confidence| LimitEstimate { value, confidence, used, last_r };
    let Some(&(_, last)) = points.last() else {
        return est(None, Confidence::Oscillating);
    };
    let Extended::Finite(v) = last else {
        return est(Some(Extended::Infinite), Confidence::Stabilized);
    };
    let vals: Vec<C64> = points.iter().filter_map(|p| p.1.finite()).collect();
    let m = vals.len();
    if m < 2 || m != used {
        return est(Some(last), Confidence::Oscillating);
    }
    if m >= 3 {
        let a: Vec<f64> = vals[m - 3..].iter().map(|x| x.norm()).collect();
        if a[2] >= DIVERGENCE_FLOOR && a[1] >= DIVERGENCE_RATIO * a[0] && a[2] >= DIVERGENCE_RATIO * a[1] {
            return est(Some(Extended::Infinite), Confidence::Stabilized);
        }
    }
    let d_last = (vals[m - 1] - vals[m - 2]).norm();
    if d_last <= LIMIT_STAB_TOL * v.norm().max(1.0) {
        return est(Some(last), Confidence::Stabilized);
    }
    if m >= 3 {
        let d_prev = (vals[m - 2] - vals[m - 3]).norm();
        let q = d_last / d_prev;
        let steady = m < 4 || (vals[m - 3] - vals[m - 4]).norm() * CONTRACTION_MAX >= d_prev;
        if q < CONTRACTION_MAX && steady {
            let lim = v + (vals[m - 1] - vals[m - 2]) * (q / (1.0 - q));
            return est(Some(Extended::Finite(lim)), Confidence::Extrapolated);
        }
    }
    est(Some(last), Confidence::Oscillating)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub r: f64,
    pub f_plus: C64,
    pub f_minus: C64,
    pub m_minus: Extended,
    pub whole: WholeLineValue,
    pub n_plus: usize,
    pub n_minus: usize,
    pub stabilized: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialLimits {
    pub f_plus: LimitEstimate,
    pub f_minus: LimitEstimate,
    pub m_minus: LimitEstimate,
    pub f_whole: LimitEstimate,
    pub f_lambda: LimitEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTrace {
    pub theta: f64,
    pub samples: Vec<RadialSample>,
    pub limits: RadialLimits,
}

/// `r_k = 1 - 2^{-k}` for `k = 1..=k_max`.
pub fn geometric_schedule(k_max: u32) -> Vec<f64> {
    (1..=k_max).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect()
}

pub fn validate_r_schedule(r: &[f64]) -> Result<()> {
    let bad = |reason: String| Err(Error::InvalidParameter { name: "r_schedule", reason });
    if r.is_empty() {
        return bad("empty".into());
    }
    if r.iter().any(|x| !(0.0..1.0).contains(x)) {
        return bad("values must lie in [0, 1)".into());
    }
    if r.windows(2).any(|w| w[1] <= w[0]) {
        return bad("values must increase strictly".into());
    }
    Ok(())
}

/// Samples `F+`, `F-`, `M-` and the whole-line function at `z = r e^{i theta}`
/// with adaptive truncation. Divergence is recorded, never an error.
pub fn radial_scan(
    source: &CoefficientSource,
    theta: f64,
    r_schedule: &[f64],
    sched: &TruncationSchedule,
) -> Result<RadialTrace> {
    validate_r_schedule(r_schedule)?;
    sched.validate()?;
    let reflected = source.reflect();
    let alpha0 = source.coefficient(0)?;
    let alpha_m1 = source.alpha(-1)?;
    let mut samples = Vec::with_capacity(r_schedule.len());
    for &r in r_schedule {
        let z = C64::from_polar(r, theta);
        let fp = adapt(|n| f_plus(source, z, n), sched)?;
        let ft = adapt(|n| f_plus(&reflected, z, n), sched)?;
        let f_minus = -ft.value;
        let m_minus = m_minus_from(Extended::Finite(f_minus), alpha_m1);
        let whole = if r == 0.0 {
            // Removable point: F(0) = 1.
            WholeLineValue {
                value: Extended::Finite(ONE),
                lambda: Extended::Finite(C64::new(2.0, 0.0)),
                separation: Extended::Finite(fp.value).chordal(m_minus),
                near_pole: false,
            }
        } else {
            f_whole_from(Extended::Finite(fp.value), m_minus, &alpha0, z)?
        };
        samples.push(RadialSample {
            r,
            f_plus: fp.value,
            f_minus,
            m_minus,
            whole,
            n_plus: fp.n,
            n_minus: ft.n,
            stabilized: fp.stabilized && ft.stabilized,
        });
    }
    let usable: Vec<&RadialSample> = samples.iter().filter(|s| s.stabilized && !s.whole.near_pole).collect();
    let lim = |f: &dyn Fn(&RadialSample) -> Extended| {
        estimate_limit(&usable.iter().map(|s| (s.r, f(s))).collect::<Vec<_>>())
    };
    let limits = RadialLimits {
        f_plus: lim(&|s| Extended::Finite(s.f_plus)),
        f_minus: lim(&|s| Extended::Finite(s.f_minus)),
        m_minus: lim(&|s| s.m_minus),
        f_whole: lim(&|s| s.whole.value),
        f_lambda: lim(&|s| s.whole.lambda),
    };
    Ok(RadialTrace { theta, samples, limits })
}

fn fmt_parts(v: Extended) -> (String, String) {
    match v {
        Extended::Finite(c) => (format!("{:e}", c.re), format!("{:e}", c.im)),
        Extended::Infinite => ("inf".into(), "inf".into()),
    }
}

impl RadialTrace {
    pub const CSV_HEADER: &'static str =
        "theta,r,re_f,im_f,re_f_plus,im_f_plus,re_m_minus,im_m_minus,n_plus,n_minus,stabilized";

    /// One row per radius; `f` is the whole-line function (1 for the free
    /// source).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            let (fr, fi) = fmt_parts(s.whole.value);
            let (mr, mi) = fmt_parts(s.m_minus);
            writeln!(
                w,
                "{:e},{:e},{fr},{fi},{:e},{:e},{mr},{mi},{},{},{}",
                self.theta, s.r, s.f_plus.re, s.f_plus.im, s.n_plus, s.n_minus, s.stabilized
            )?;
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut w, &serde_json::json!({ "theta": self.theta, "sample": s }))?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "theta": self.theta, "limits": self.limits }))?;
        writeln!(w)
    }
}
