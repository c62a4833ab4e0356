//! Szegő and GZ recursions, transfer products and solution tracks.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::coeffs::{CoefficientSource, Verblunsky};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: i64) -> Self {
        if n.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferKind {
    S,
    P,
    Q,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transfer2x2 {
    pub m: Mat2,
    pub kind: TransferKind,
}

fn require_interior(a: &Verblunsky, z: C64) -> Result<()> {
    if a.rho == 0.0 {
        return Err(Error::SingularCoefficient);
    }
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroSpectralParameter);
    }
    Ok(())
}

/// `S(a, z) = (1/rho) [[z, -conj a], [-a z, 1]]`.
pub fn szego_matrix(a: &Verblunsky, z: C64) -> Result<Transfer2x2> {
    require_interior(a, z)?;
    let one = C64::new(1.0, 0.0);
    let m = Mat2::new(z, -a.alpha.conj(), -a.alpha * z, one).scale(C64::new(1.0 / a.rho, 0.0));
    Ok(Transfer2x2 { m, kind: TransferKind::S })
}

/// `P(a, z)` for even parity, `Q(a)` for odd; both have determinant -1.
pub fn gz_matrix(a: &Verblunsky, z: C64, parity: Parity) -> Result<Transfer2x2> {
    require_interior(a, z)?;
    let one = C64::new(1.0, 0.0);
    let s = C64::new(1.0 / a.rho, 0.0);
    let (m, kind) = match parity {
        Parity::Even => (Mat2::new(-a.alpha, z.inv(), z, -a.alpha.conj()), TransferKind::P),
        Parity::Odd => (Mat2::new(-a.alpha.conj(), one, one, -a.alpha), TransferKind::Q),
    };
    Ok(Transfer2x2 { m: m.scale(s), kind })
}

fn coefficient_interior(source: &CoefficientSource, n: i64) -> Result<Verblunsky> {
    source.coefficient(n)
}

/// `A(n, z)`: `S(a_n)...S(a_0)` for `n >= 0`, and for `n <= -1` the product
/// `S(-conj a_{n-2}) S(-conj a_{n-1}) ... S(-conj a_{-2})` in that order.
pub fn transfer_product(source: &CoefficientSource, n: i64, z: C64) -> Result<Transfer2x2> {
    let mut m = Mat2::identity();
    if n >= 0 {
        for k in 0..=n {
            m = szego_matrix(&coefficient_interior(source, k)?, z)?.m * m;
        }
    } else {
        for k in (n - 2)..=-2 {
            let a = Verblunsky::new(-source.alpha(k)?.conj())?;
            m = m * szego_matrix(&a, z)?.m;
        }
    }
    Ok(Transfer2x2 { m, kind: TransferKind::Product })
}

/// `log ||A(n, z)||` for `n = 0..=n_max` (plus) or `n = -1, ..., -n_max`
/// (minus), accumulated with per-step renormalization.
pub fn transfer_log_norms(source: &CoefficientSource, z: C64, side: Side, n_max: usize) -> Result<Vec<f64>> {
    let (src, skip) = match side {
        Side::Plus => (source.clone(), 0),
        // A(-k) on the source is the reflected plus product of index k.
        Side::Minus => (source.reflect(), 1),
    };
    let mut m = Mat2::identity();
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(n_max + 1);
    for k in 0..=(n_max + skip) as i64 {
        m = szego_matrix(&src.coefficient(k)?, z)?.m * m;
        let nrm = m.norm();
        log_scale += nrm.ln();
        m = m.scale(C64::new(1.0 / nrm, 0.0));
        if k as usize >= skip {
            out.push(log_scale);
        }
    }
    if side == Side::Minus {
        out.truncate(n_max);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackFlavor {
    /// `(phi_n, phi*_n)`.
    PolyFirstKind,
    /// `(psi_n, -psi*_n)`, the vector the Szegő matrices act on.
    PolySecondKind,
    GzPlus,
    GzPlusSecond,
    GzMinus,
    GzMinusSecond,
    OmegaFirst,
    OmegaSecond,
}

/// Solution values on the index window `[start, start + values.len())`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionTrack {
    pub flavor: TrackFlavor,
    pub z: C64,
    pub omega: Option<f64>,
    pub start: i64,
    pub values: Vec<[C64; 2]>,
}

impl SolutionTrack {
    pub fn lo(&self) -> i64 {
        self.start
    }

    pub fn hi(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> Option<[C64; 2]> {
        let k = usize::try_from(n - self.start).ok()?;
        self.values.get(k).copied()
    }

    pub fn try_get(&self, n: i64) -> Result<[C64; 2]> {
        self.get(n).ok_or(Error::NeedsExtension { needed: n, lo: self.lo(), hi: self.hi() })
    }

    /// One row per index: `n, re0, im0, re1, im1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,re_0,im_0,re_1,im_1")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{:e},{:e},{:e},{:e}", self.start + k as i64, v[0].re, v[0].im, v[1].re, v[1].im)?;
        }
        Ok(())
    }
}

fn szego_track(
    source: &CoefficientSource,
    z: C64,
    n: usize,
    init: [C64; 2],
    flavor: TrackFlavor,
    omega: Option<f64>,
) -> Result<SolutionTrack> {
    let mut values = Vec::with_capacity(n + 1);
    let mut v = init;
    values.push(v);
    for k in 0..n as i64 {
        v = szego_matrix(&source.coefficient(k)?, z)?.m.apply(v);
        values.push(v);
    }
    Ok(SolutionTrack { flavor, z, omega, start: 0, values })
}

/// Szegő polynomials `phi_0..phi_n` (first kind) or `psi` (second kind)
/// evaluated at `z`.
pub fn polynomials(source: &CoefficientSource, z: C64, n: usize, kind: SolutionKind) -> Result<SolutionTrack> {
    let one = C64::new(1.0, 0.0);
    match kind {
        SolutionKind::First => szego_track(source, z, n, [one, one], TrackFlavor::PolyFirstKind, None),
        SolutionKind::Second => szego_track(source, z, n, [one, -one], TrackFlavor::PolySecondKind, None),
    }
}

fn gz_initial(side: Side, kind: SolutionKind) -> [C64; 2] {
    let (one, m_one) = (C64::new(1.0, 0.0), C64::new(-1.0, 0.0));
    match (side, kind) {
        (Side::Plus, SolutionKind::First) => [one, one],
        (Side::Plus, SolutionKind::Second) => [one, m_one],
        (Side::Minus, SolutionKind::First) => [m_one, one],
        (Side::Minus, SolutionKind::Second) => [one, one],
    }
}

fn gz_flavor(side: Side, kind: SolutionKind) -> TrackFlavor {
    match (side, kind) {
        (Side::Plus, SolutionKind::First) => TrackFlavor::GzPlus,
        (Side::Plus, SolutionKind::Second) => TrackFlavor::GzPlusSecond,
        (Side::Minus, SolutionKind::First) => TrackFlavor::GzMinus,
        (Side::Minus, SolutionKind::Second) => TrackFlavor::GzMinusSecond,
    }
}

fn gz_from(source: &CoefficientSource, z: C64, side: Side, n: usize, init: [C64; 2]) -> Result<(i64, Vec<[C64; 2]>)> {
    let mut values = Vec::with_capacity(n + 1);
    let mut v = init;
    values.push(v);
    match side {
        Side::Plus => {
            for k in 0..n as i64 {
                v = gz_matrix(&source.coefficient(k)?, z, Parity::of(k))?.m.apply(v);
                values.push(v);
            }
            Ok((0, values))
        }
        Side::Minus => {
            // T(k)^{-1} = T built from -conj(a_k) with the same parity.
            for k in (-(n as i64) - 1..=-2).rev() {
                let a = Verblunsky::new(-source.alpha(k)?.conj())?;
                v = gz_matrix(&a, z, Parity::of(k))?.m.apply(v);
                values.push(v);
            }
            values.reverse();
            Ok((-(n as i64) - 1, values))
        }
    }
}

/// GZ solution from `n0 = 0` (plus, indices `0..=n`) or `n0 = -1`
/// (minus, indices `-n-1..=-1`).
pub fn gz_track(source: &CoefficientSource, z: C64, side: Side, kind: SolutionKind, n: usize) -> Result<SolutionTrack> {
    let (start, values) = gz_from(source, z, side, n, gz_initial(side, kind))?;
    Ok(SolutionTrack { flavor: gz_flavor(side, kind), z, omega: None, start, values })
}

/// The GZ solution through `v0` at `n = 0`, propagated to `[-n_left, n_right]`.
pub fn gz_solution(source: &CoefficientSource, z: C64, v0: [C64; 2], n_left: usize, n_right: usize) -> Result<SolutionTrack> {
    let (_, right) = gz_from(source, z, Side::Plus, n_right, v0)?;
    let mut left = Vec::with_capacity(n_left + right.len());
    let mut v = v0;
    for k in (-(n_left as i64)..=-1).rev() {
        let a = Verblunsky::new(-source.alpha(k)?.conj())?;
        v = gz_matrix(&a, z, Parity::of(k))?.m.apply(v);
        left.push(v);
    }
    left.reverse();
    left.extend(right);
    Ok(SolutionTrack { flavor: TrackFlavor::GzPlus, z, omega: None, start: -(n_left as i64), values: left })
}

/// Boundary data of the omega family as combinations of the two
/// omega = 0 solutions: `(cos w, i sin w)` for the first, `(i sin w, cos w)`
/// for the second.
pub fn omega_weights(omega: f64, kind: SolutionKind) -> (C64, C64) {
    let (c, s) = (C64::new(omega.cos(), 0.0), C64::new(0.0, omega.sin()));
    match kind {
        SolutionKind::First => (c, s),
        SolutionKind::Second => (s, c),
    }
}

/// The omega boundary family. On the plus side the Szegő vectors start at
/// `(e^{iw}, e^{-iw})` resp. `(e^{iw}, -e^{-iw})`; on the minus side the GZ
/// solutions from `n0 = -1` are combined with the same weights.
pub fn omega_track(
    source: &CoefficientSource,
    z: C64,
    omega: f64,
    n: usize,
    side: Side,
    kind: SolutionKind,
) -> Result<SolutionTrack> {
    let flavor = match kind {
        SolutionKind::First => TrackFlavor::OmegaFirst,
        SolutionKind::Second => TrackFlavor::OmegaSecond,
    };
    let (a, b) = omega_weights(omega, kind);
    let init = |first: [C64; 2], second: [C64; 2]| [a * first[0] + b * second[0], a * first[1] + b * second[1]];
    match side {
        Side::Plus => {
            let one = C64::new(1.0, 0.0);
            let v0 = init([one, one], [one, -one]);
            szego_track(source, z, n, v0, flavor, Some(omega))
        }
        Side::Minus => {
            let v0 = init(gz_initial(side, SolutionKind::First), gz_initial(side, SolutionKind::Second));
            let (start, values) = gz_from(source, z, side, n, v0)?;
            Ok(SolutionTrack { flavor, z, omega: Some(omega), start, values })
        }
    }
}

/// The GZ pair at index `n >= 0` carried by a Szegő vector `(x, y)`:
/// `z^{-n/2} (x, y)` for even `n`, `(z^{-(n+1)/2} y, z^{-(n-1)/2} x)` for odd.
pub fn szego_to_gz(n: i64, z: C64, s: [C64; 2]) -> [C64; 2] {
    if n % 2 == 0 {
        let w = z.powi(-(n / 2) as i32);
        [w * s[0], w * s[1]]
    } else {
        [z.powi(-((n + 1) / 2) as i32) * s[1], z.powi(-((n - 1) / 2) as i32) * s[0]]
    }
}

/// Largest deviation between the plus GZ tracks and the Szegő tracks
/// mapped through [`szego_to_gz`], over both kinds and `0..=n_max`.
pub fn gz_szego_residual(source: &CoefficientSource, z: C64, n_max: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kind in [SolutionKind::First, SolutionKind::Second] {
        let poly = polynomials(source, z, n_max, kind)?;
        let gz = gz_track(source, z, Side::Plus, kind, n_max)?;
        for n in 0..=n_max as i64 {
            let want = szego_to_gz(n, z, poly.try_get(n)?);
            let got = gz.try_get(n)?;
            worst = worst.max((want[0] - got[0]).norm()).max((want[1] - got[1]).norm());
        }
    }
    Ok(worst)
}

/// `z^{1/2}` on the branch `arg z in [0, 2 pi)`.
pub fn sqrt_branch(z: C64) -> C64 {
    let arg = z.arg().rem_euclid(std::f64::consts::TAU);
    C64::from_polar(z.norm().sqrt(), arg / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn v(a: C64) -> Verblunsky {
        Verblunsky::new(a).unwrap()
    }

    #[test]
    fn szego_examples() {
        let z = C64::from_polar(1.0, 0.4);
        let s = szego_matrix(&v(c(0.0, 0.0)), z).unwrap().m;
        assert_eq!(s, Mat2::new(z, c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        let z = C64::from_polar(1.0, std::f64::consts::PI / 7.0);
        assert!((szego_matrix(&v(c(0.5, 0.0)), z).unwrap().m.det() - z).norm() < 1e-15);
        let a = c(0.0, 0.3);
        let rho = (1.0f64 - 0.09).sqrt();
        let out = szego_matrix(&v(a), c(1.0, 0.0)).unwrap().m.apply([c(1.0, 0.0), c(1.0, 0.0)]);
        assert!((out[0] - (c(1.0, 0.0) - a.conj()) / rho).norm() < 1e-15);
        assert!((out[1] - (c(1.0, 0.0) - a) / rho).norm() < 1e-15);
    }

    #[test]
    fn singular_inputs_rejected() {
        let b = Verblunsky::boundary(c(1.0, 0.0)).unwrap();
        assert_eq!(szego_matrix(&b, c(1.0, 0.0)), Err(Error::SingularCoefficient));
        assert_eq!(gz_matrix(&b, c(1.0, 0.0), Parity::Odd), Err(Error::SingularCoefficient));
        assert_eq!(szego_matrix(&v(c(0.1, 0.0)), c(0.0, 0.0)), Err(Error::ZeroSpectralParameter));
    }

    #[test]
    fn gz_examples() {
        let z = C64::from_polar(1.0, 1.1);
        let a = v(c(0.4, -0.2));
        for p in [Parity::Even, Parity::Odd] {
            assert!((gz_matrix(&a, z, p).unwrap().m.det() + 1.0).norm() < 1e-14);
        }
        let p0 = gz_matrix(&v(c(0.0, 0.0)), z, Parity::Even).unwrap().m;
        assert_eq!(p0, Mat2::new(c(0.0, 0.0), z.inv(), z, c(0.0, 0.0)));
        let q0 = gz_matrix(&v(c(0.0, 0.0)), z, Parity::Odd).unwrap().m;
        assert_eq!(q0, Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn gz_inverse_is_reflected_matrix() {
        let z = C64::from_polar(0.8, 2.0);
        let a = c(0.3, 0.5);
        for p in [Parity::Even, Parity::Odd] {
            let t = gz_matrix(&v(a), z, p).unwrap().m;
            let t_inv = gz_matrix(&v(-a.conj()), z, p).unwrap().m;
            assert!((t * t_inv).sub(&Mat2::identity()).max_abs() < 1e-14);
        }
    }

    #[test]
    fn free_polynomials() {
        let z = C64::from_polar(1.0, 0.7);
        let phi = polynomials(&CoefficientSource::free(), z, 12, SolutionKind::First).unwrap();
        let psi = polynomials(&CoefficientSource::free(), z, 12, SolutionKind::Second).unwrap();
        for n in 0..=12 {
            let zn = z.powi(n as i32);
            assert!((phi.values[n][0] - zn).norm() < 1e-14 && (phi.values[n][1] - 1.0).norm() < 1e-14);
            assert!((psi.values[n][0] - zn).norm() < 1e-14 && (psi.values[n][1] + 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn monic_first_step() {
        let a = c(0.2, -0.6);
        let z = c(0.3, 0.4);
        let s = CoefficientSource::constant(a);
        let phi = polynomials(&s, z, 1, SolutionKind::First).unwrap();
        let rho = v(a).rho;
        assert!((rho * phi.values[1][0] - (z - a.conj())).norm() < 1e-15);
    }

    #[test]
    fn free_gz_plus_even_entries_follow_phi_relations() {
        let z = C64::from_polar(1.0, 2.3);
        let t = gz_track(&CoefficientSource::free(), z, Side::Plus, SolutionKind::First, 20).unwrap();
        for n in (0..=20).step_by(2) {
            let w = z.powi(n / 2);
            let got = t.get(n as i64).unwrap();
            assert!((got[0] - w).norm() < 1e-14 && (got[1] - w.inv()).norm() < 1e-14);
        }
    }

    #[test]
    fn transfer_free_norm_one() {
        let z = C64::from_polar(1.0, 1.9);
        for n in [-7, -1, 0, 5, 40] {
            let a = transfer_product(&CoefficientSource::free(), n, z).unwrap().m;
            assert!((a.norm() - 1.0).abs() < 1e-14);
            assert!(a.0.iter().flatten().all(|x| x.norm() <= 1.0 + 1e-14));
        }
    }

    #[test]
    fn negative_product_is_reflected_product() {
        let s = CoefficientSource::RandomIid { seed: 11, radius: 0.8 };
        let z = C64::from_polar(1.0, 0.9);
        for n in [-1i64, -2, -5, -12] {
            let lhs = transfer_product(&s, n, z).unwrap().m;
            let rhs = transfer_product(&s.reflect(), -n, z).unwrap().m;
            assert!(lhs.sub(&rhs).max_abs() < 1e-12 * lhs.max_abs());
        }
    }

    #[test]
    fn log_norms_match_direct_products() {
        let s = CoefficientSource::RandomIid { seed: 5, radius: 0.7 };
        let z = C64::from_polar(1.0, 2.2);
        let plus = transfer_log_norms(&s, z, Side::Plus, 30).unwrap();
        let minus = transfer_log_norms(&s, z, Side::Minus, 30).unwrap();
        assert_eq!((plus.len(), minus.len()), (31, 30));
        for n in 0..=30 {
            let direct = transfer_product(&s, n, z).unwrap().m.norm().ln();
            assert!((plus[n as usize] - direct).abs() < 1e-12);
        }
        for k in 1..=30 {
            let direct = transfer_product(&s, -k, z).unwrap().m.norm().ln();
            assert!((minus[k as usize - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_half_grows_at_one() {
        let s = CoefficientSource::constant(c(0.5, 0.0));
        let l = transfer_log_norms(&s, c(1.0, 0.0), Side::Plus, 400).unwrap();
        let slope = (l[400] - l[100]) / 300.0;
        // Spectral radius of S(1/2, 1) is (1 + 1/2) / rho = sqrt(3).
        assert!((slope - 3f64.sqrt().ln()).abs() < 1e-6);
    }

    #[test]
    fn omega_zero_reproduces_polynomials() {
        let s = CoefficientSource::RandomIid { seed: 2, radius: 0.6 };
        let z = C64::from_polar(1.0, 0.3);
        for kind in [SolutionKind::First, SolutionKind::Second] {
            let p = polynomials(&s, z, 15, kind).unwrap();
            let o = omega_track(&s, z, 0.0, 15, Side::Plus, kind).unwrap();
            assert_eq!(p.values, o.values);
        }
    }

    #[test]
    fn omega_boundary_relation() {
        let w = std::f64::consts::FRAC_PI_3;
        let t = omega_track(&CoefficientSource::free(), c(0.0, 1.0), w, 3, Side::Plus, SolutionKind::First).unwrap();
        let e = C64::from_polar(1.0, w);
        let b = t.values[0][0] * e.conj() - t.values[0][1] * e;
        assert!(b.norm() < 1e-15);
    }

    #[test]
    fn omega_free_linearity() {
        let w = std::f64::consts::FRAC_PI_4;
        let z = C64::from_polar(1.0, 1.3);
        let t = omega_track(&CoefficientSource::free(), z, w, 2, Side::Plus, SolutionKind::First).unwrap();
        let e = C64::from_polar(1.0, w);
        assert!((t.values[2][0] - e * z * z).norm() < 1e-15);
        assert!((t.values[2][1] - e.conj()).norm() < 1e-15);
    }

    #[test]
    fn two_sided_solution_agrees_with_tracks() {
        let s = CoefficientSource::RandomIid { seed: 8, radius: 0.6 };
        let z = C64::from_polar(1.0, 0.5);
        let one = c(1.0, 0.0);
        let t = gz_solution(&s, z, [one, one], 6, 9).unwrap();
        let plus = gz_track(&s, z, Side::Plus, SolutionKind::First, 9).unwrap();
        assert_eq!((t.lo(), t.hi()), (-6, 9));
        for n in 0..=9 {
            assert_eq!(t.get(n), plus.get(n));
        }
        // Stepping forward again from n = -6 must land back on v0.
        let mut v = t.get(-6).unwrap();
        for k in -6..0 {
            v = gz_matrix(&s.coefficient(k).unwrap(), z, Parity::of(k)).unwrap().m.apply(v);
        }
        assert!((v[0] - one).norm() < 1e-12 && (v[1] - one).norm() < 1e-12);
    }

    #[test]
    fn minus_track_window() {
        let s = CoefficientSource::RandomIid { seed: 4, radius: 0.5 };
        let t = gz_track(&s, c(0.0, 1.0), Side::Minus, SolutionKind::First, 10).unwrap();
        assert_eq!((t.lo(), t.hi()), (-11, -1));
        assert_eq!(t.get(-1).unwrap(), [c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(t.get(0).is_none());
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let t = polynomials(&CoefficientSource::free(), c(0.0, 1.0), 3, SolutionKind::First).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("n,re_0"));
    }

    fn unit_z() -> impl Strategy<Value = C64> {
        (0.0..std::f64::consts::TAU).prop_map(|t| C64::from_polar(1.0, t))
    }

    fn disk() -> impl Strategy<Value = C64> {
        (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
    }

    proptest! {
        #[test]
        fn determinants(a in disk(), z in (0.1..3.0f64, 0.0..6.3f64).prop_map(|(r, t)| C64::from_polar(r, t))) {
            let a = v(a);
            prop_assert!((szego_matrix(&a, z).unwrap().m.det() - z).norm() < 1e-13 * z.norm().max(1.0));
            for p in [Parity::Even, Parity::Odd] {
                prop_assert!((gz_matrix(&a, z, p).unwrap().m.det() + 1.0).norm() < 1e-13);
            }
        }

        #[test]
        fn wronskian_is_two(seed in any::<u64>(), z in unit_z(), side in prop_oneof![Just(Side::Plus), Just(Side::Minus)]) {
            let s = CoefficientSource::RandomIid { seed, radius: 0.8 };
            let u = gz_track(&s, z, side, SolutionKind::First, 60).unwrap();
            let p = gz_track(&s, z, side, SolutionKind::Second, 60).unwrap();
            for (x, y) in u.values.iter().zip(&p.values) {
                let w = x[0] * y[1] - y[0] * x[1];
                prop_assert!((w.norm() - 2.0).abs() < 1e-9 * (x[0].norm() * y[1].norm()).max(1.0));
            }
        }

        #[test]
        fn unit_circle_determinant(seed in any::<u64>(), z in unit_z(), n in -40i64..40) {
            let s = CoefficientSource::RandomIid { seed, radius: 0.9 };
            let a = transfer_product(&s, n, z).unwrap().m;
            // rounding accumulates through the partial products, which can
            // be far larger than the final one
            let (lo, hi) = if n < 0 { (n, 0) } else { (0, n) };
            let peak = (lo..=hi)
                .map(|k| transfer_product(&s, k, z).unwrap().m.frobenius_sq())
                .fold(1.0, f64::max);
            let tol = 8.0 * f64::EPSILON * n.abs().max(1) as f64 * peak * a.frobenius_sq().max(1.0);
            prop_assert!((a.det().norm() - 1.0).abs() < tol);
        }

        #[test]
        fn minus_tracks_are_swapped_reflections(seed in any::<u64>(), z in unit_z()) {
            let s = CoefficientSource::RandomIid { seed, radius: 0.7 };
            let r = s.reflect();
            let um = gz_track(&s, z, Side::Minus, SolutionKind::First, 30).unwrap();
            let pm = gz_track(&s, z, Side::Minus, SolutionKind::Second, 30).unwrap();
            let ur = gz_track(&r, z, Side::Plus, SolutionKind::First, 30).unwrap();
            let pr = gz_track(&r, z, Side::Plus, SolutionKind::Second, 30).unwrap();
            for n in 0..=30i64 {
                let (a, b) = (um.get(-n - 1).unwrap(), pr.get(n).unwrap());
                let (c2, d) = (pm.get(-n - 1).unwrap(), ur.get(n).unwrap());
                for i in 0..2 {
                    prop_assert!((a[i] + b[i]).norm() < 1e-11 * b[i].norm().max(1.0));
                    prop_assert!((c2[i] - d[i]).norm() < 1e-11 * d[i].norm().max(1.0));
                }
            }
        }
    }
}
