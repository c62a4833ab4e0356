//! Local norms, the Jitomirskaya-Last scale and subordinacy detection.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use crate::coeffs::CoefficientSource;
use crate::error::{Error, Result};
use crate::mfun::{adapt, estimate_limit, f_plus, validate_r_schedule, Extended, LimitEstimate, TruncationSchedule};
use crate::recursion::{gz_track, omega_weights, Side, SolutionKind, SolutionTrack};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalNorm {
    pub x: f64,
    pub value: f64,
}

/// `||a||_x` of one component of a track. Right side (`x > 0`):
/// `sum_{j=0}^{[x]} |a_j|^2 + (x - [x]) |a_{[x]+1}|^2`. Left side (`x < -1`):
/// `sum_{j=1}^{-c} |a_{-j}|^2 + (c - x) |a_{c-1}|^2` with `c = ceil(x)`.
pub fn local_norm(track: &SolutionTrack, component: usize, x: f64) -> Result<LocalNorm> {
    let at = |n: i64| track.try_get(n).map(|v| v[component].norm_sqr());
    let sq = if x > 0.0 {
        let k = x.floor();
        let mut s = 0.0;
        for j in 0..=k as i64 {
            s += at(j)?;
        }
        s + (x - k) * at(k as i64 + 1)?
    } else if x < -1.0 {
        let c = x.ceil();
        let mut s = 0.0;
        for j in 1..=(-c) as i64 {
            s += at(-j)?;
        }
        s + (c - x) * at(c as i64 - 1)?
    } else {
        return Err(Error::InvalidParameter { name: "x", reason: format!("{x} is in [-1, 0]") });
    };
    Ok(LocalNorm { x, value: sq.sqrt() })
}

/// Squared moduli ordered by distance from the boundary, with prefix sums.
struct NormProfile {
    sq: Vec<f64>,
    prefix: Vec<f64>,
}

impl NormProfile {
    fn new(sq: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(sq.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &sq {
            acc += v;
            prefix.push(acc);
        }
        Self { sq, prefix }
    }

    /// Squared norm at integer distance `k`.
    fn at_int(&self, k: usize) -> f64 {
        self.prefix[k + 1]
    }

    fn at(&self, y: f64) -> f64 {
        let k = y.floor() as usize;
        self.prefix[k + 1] + (y - k as f64) * self.sq[k + 1]
    }
}

fn omega_profiles(source: &CoefficientSource, z: C64, side: Side, omega: f64, len: usize) -> Result<(NormProfile, NormProfile)> {
    let steps = len - 1;
    let u = gz_track(source, z, side, SolutionKind::First, steps)?;
    let p = gz_track(source, z, side, SolutionKind::Second, steps)?;
    let combine = |kind: SolutionKind| -> Vec<f64> {
        let (a, b) = omega_weights(omega, kind);
        let mut v: Vec<f64> = u.values.iter().zip(&p.values).map(|(x, y)| (a * x[0] + b * y[0]).norm_sqr()).collect();
        if side == Side::Minus {
            v.reverse();
        }
        v
    };
    Ok((NormProfile::new(combine(SolutionKind::First)), NormProfile::new(combine(SolutionKind::Second))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JlOptions {
    pub initial_len: usize,
    pub max_len: usize,
}

impl Default for JlOptions {
    fn default() -> Self {
        Self { initial_len: 64, max_len: 1 << 22 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JlScale {
    pub z: C64,
    pub side: Side,
    pub omega: f64,
    pub r: f64,
    /// `x(r) > 0` on the right, `x(r) < -1` on the left.
    pub x: f64,
    pub residual: f64,
    pub u_norm: f64,
    pub p_norm: f64,
    /// `||p_w|| / ||u_w||` on the right and `||u_w|| / ||p_w||` on the left;
    /// both are comparable with the modulus of the half-line m-function.
    pub ratio: f64,
}

/// Solves `(1 - r) ||u_w||_x ||p_w||_x = sqrt 2`. The product of squared norms
/// is a quadratic in `x` between integers, so the root is bracketed on the
/// integer lattice and then taken in closed form.
pub fn jl_scale_with(source: &CoefficientSource, z: C64, r: f64, side: Side, omega: f64, opts: &JlOptions) -> Result<JlScale> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidParameter { name: "r", reason: format!("{r} not in [0, 1)") });
    }
    if (z.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter { name: "z", reason: "must lie on the unit circle".into() });
    }
    let target = SQRT_2 / (1.0 - r);
    let c2 = target * target;
    let mut len = opts.initial_len.max(4);
    loop {
        let (u, p) = omega_profiles(source, z, side, omega, len)?;
        let h = |k: usize| u.at_int(k) * p.at_int(k);
        if h(len - 2) >= c2 {
            // Smallest j with h(j) >= c2; h(0) = 1 < 2 <= c2.
            let (mut lo, mut hi) = (0usize, len - 2);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if h(mid) >= c2 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let k = lo;
            let (au, bu) = (u.at_int(k), u.sq[k + 1]);
            let (ap, bp) = (p.at_int(k), p.sq[k + 1]);
            let (qa, qb, qc) = (bu * bp, au * bp + ap * bu, au * ap - c2);
            let t = 2.0 * (-qc) / (qb + (qb * qb - 4.0 * qa * qc).sqrt());
            let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
            let y = k as f64 + t;
            let (un, pn) = (u.at(y).sqrt(), p.at(y).sqrt());
            let residual = ((1.0 - r) * un * pn - SQRT_2).abs();
            let (x, ratio) = match side {
                Side::Plus => (y, pn / un),
                Side::Minus => (-y - 1.0, un / pn),
            };
            return Ok(JlScale { z, side, omega, r, x, residual, u_norm: un, p_norm: pn, ratio });
        }
        if len >= opts.max_len {
            return Err(Error::ScaleUnbounded { x_max: (len - 2) as f64, product: (1.0 - r) * h(len - 2).sqrt() });
        }
        len = (2 * len).min(opts.max_len);
    }
}

pub fn jl_scale(source: &CoefficientSource, z: C64, r: f64, side: Side, omega: f64) -> Result<JlScale> {
    jl_scale_with(source, z, r, side, omega, &JlOptions::default())
}

/// Local-norm ratio of the two omega solutions at the scale `x(r)`; see
/// [`JlScale::ratio`] for the orientation on each side.
pub fn subordinacy_ratio(source: &CoefficientSource, z: C64, side: Side, omega: f64, r: f64) -> Result<f64> {
    Ok(jl_scale(source, z, r, side, omega)?.ratio)
}

/// JSON-lines diagnostics, one record per scale.
pub fn write_diagnostics<W: Write>(mut w: W, scales: &[JlScale], verdict: &SubordinacyVerdict) -> std::io::Result<()> {
    for s in scales {
        let rec = serde_json::json!({
            "z": [s.z.re, s.z.im],
            "side": s.side,
            "r": s.r,
            "x": s.x,
            "ratio": s.ratio,
            "verdict": verdict,
        });
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinacyVerdict {
    NoSubordinate,
    SubordinateAt { omega: f64 },
    PointCandidate,
    Undecided { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub eps_re: f64,
    pub truncation: TruncationSchedule,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { eps_re: 1e-3, truncation: TruncationSchedule::default() }
    }
}

/// Boundary parameter of a purely imaginary limit `i a`: `cot w = -a`.
pub fn omega_from_imaginary(a: f64) -> f64 {
    f64::atan2(1.0, -a)
}

/// Radial limit of the plus m-function of `source` (the reflected source
/// serves the left half-line).
pub fn half_line_limit(source: &CoefficientSource, theta: f64, r_schedule: &[f64], sched: &TruncationSchedule) -> Result<LimitEstimate> {
    validate_r_schedule(r_schedule)?;
    sched.validate()?;
    let mut pts = Vec::new();
    for &r in r_schedule {
        let z = C64::from_polar(r, theta);
        let a = adapt(|n| f_plus(source, z, n), sched)?;
        if a.stabilized {
            pts.push((r, Extended::Finite(a.value)));
        }
    }
    Ok(estimate_limit(&pts))
}

/// Reads subordinacy off the radial behaviour of the m-function: a limit
/// with positive real part means none, divergence means the `w = 0`
/// solution, a purely imaginary limit `-i cot w` means the `w` solution.
/// On the left, the reflected right half-line carries boundary parameter
/// `pi - w`.
pub fn detect_subordinate(
    source: &CoefficientSource,
    z: C64,
    side: Side,
    r_schedule: &[f64],
    params: &DetectParams,
) -> Result<SubordinacyVerdict> {
    let theta = z.arg();
    let src = match side {
        Side::Plus => source.clone(),
        Side::Minus => source.reflect(),
    };
    let limit = half_line_limit(&src, theta, r_schedule, &params.truncation)?;
    let map = |w: f64| match side {
        Side::Plus => w,
        Side::Minus => (PI - w).rem_euclid(PI),
    };
    let verdict = match limit.reliable() {
        None => SubordinacyVerdict::Undecided { reason: format!("m-function estimate not settled ({} samples)", limit.used) },
        Some(Extended::Infinite) => SubordinacyVerdict::SubordinateAt { omega: 0.0 },
        Some(Extended::Finite(v)) if v.re > params.eps_re => SubordinacyVerdict::NoSubordinate,
        Some(Extended::Finite(v)) if v.re.abs() <= params.eps_re => {
            SubordinacyVerdict::SubordinateAt { omega: map(omega_from_imaginary(v.im)) }
        }
        Some(Extended::Finite(v)) => SubordinacyVerdict::Undecided { reason: format!("limit {v} has negative real part") },
    };
    if verdict == SubordinacyVerdict::NoSubordinate {
        return Ok(verdict);
    }
    let r_last = *r_schedule.last().unwrap();
    match jl_scale(source, C64::from_polar(1.0, theta), r_last, side, 0.0) {
        Err(Error::ScaleUnbounded { .. }) => Ok(SubordinacyVerdict::PointCandidate),
        Err(e) => Err(e),
        Ok(_) => Ok(verdict),
    }
}
