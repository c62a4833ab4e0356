//! Embedded invariant suite behind the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::fmt;

use crate::coeffs::{CoefficientSource, Verblunsky};
use crate::mfun::{f_whole, f_whole_oracle, WindowSpec};
use crate::operator::{build_extended, build_half_line_plus, lm_factorize, ThetaBlock};
use crate::recursion::{gz_matrix, gz_szego_residual, gz_track, szego_matrix, Parity, Side, SolutionKind};
use crate::{Result, C64};

const SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Negates the upper-right entry of every Szegő matrix the suite builds.
    pub flip_szego_sign: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.residual < self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => write!(f, "{status} {:<22} error: {e}", self.name),
            None => write!(f, "{status} {:<22} residual {:.3e} < {:.0e}", self.name, self.residual, self.tolerance),
        }
    }
}

fn disk_point(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    C64::from_polar(radius * rng.random::<f64>().sqrt(), TAU * rng.random::<f64>())
}

fn unit_point(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, TAU * rng.random::<f64>())
}

fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> CheckResult {
    match f() {
        Ok(residual) => CheckResult { name, residual, tolerance, error: None },
        Err(e) => CheckResult { name, residual: f64::NAN, tolerance, error: Some(e.to_string()) },
    }
}

fn determinants(opts: SelftestOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = Verblunsky::new(disk_point(&mut rng, 0.95))?;
        let z = C64::from_polar(0.5 + rng.random::<f64>(), TAU * rng.random::<f64>());
        let mut s = szego_matrix(&a, z)?.m;
        if opts.flip_szego_sign {
            s.0[0][1] = -s.0[0][1];
        }
        let scale = s.frobenius_sq().max(1.0);
        worst = worst.max((s.det() - z).norm() / scale);
        for parity in [Parity::Even, Parity::Odd] {
            let g = gz_matrix(&a, z, parity)?.m;
            worst = worst.max((g.det() + 1.0).norm() / g.frobenius_sq().max(1.0));
        }
    }
    Ok(worst)
}

fn theta_unitary() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        worst = worst.max(ThetaBlock::new(&Verblunsky::new(disk_point(&mut rng, 0.999))?).unitarity_residual());
    }
    Ok(worst)
}

fn wronskian() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        // Absolute error scales like eps |u||q|; radius 0.3 keeps tracks below 1e4.
        let s = CoefficientSource::RandomIid { seed, radius: 0.3 };
        let z = unit_point(&mut rng);
        for side in [Side::Plus, Side::Minus] {
            let u = gz_track(&s, z, side, SolutionKind::First, 30)?;
            let p = gz_track(&s, z, side, SolutionKind::Second, 30)?;
            for (x, y) in u.values.iter().zip(&p.values) {
                worst = worst.max(((x[0] * y[1] - y[0] * x[1]).norm() - 2.0).abs());
            }
        }
    }
    Ok(worst)
}

fn gz_szego() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let s = CoefficientSource::RandomIid { seed, radius: 0.3 };
        worst = worst.max(gz_szego_residual(&s, unit_point(&mut rng), 30)?);
    }
    Ok(worst)
}

fn truncation_unitarity() -> Result<f64> {
    let s = CoefficientSource::RandomIid { seed: SEED, radius: 0.9 };
    let phase = C64::from_polar(1.0, 0.7);
    let ext = build_extended(&s, -128, 127, -phase, phase)?;
    let half = build_half_line_plus(&s, 255, phase)?;
    Ok(ext.unitarity_residual().max(half.unitarity_residual()))
}

fn lm_product() -> Result<f64> {
    let s = CoefficientSource::RandomIid { seed: SEED + 1, radius: 0.9 };
    let (l, m) = lm_factorize(&s, -64, 63, C64::new(-1.0, 0.0), C64::new(1.0, 0.0))?;
    let e = build_extended(&s, -64, 63, C64::new(-1.0, 0.0), C64::new(1.0, 0.0))?;
    Ok(l.matmul(&m).max_abs_diff(&e.matrix))
}

fn free_oracle() -> Result<f64> {
    let free = CoefficientSource::free();
    let z = C64::from_polar(0.5, 1.0);
    let f = f_whole(&free, z, 64)?.value.finite().unwrap_or(C64::new(f64::INFINITY, 0.0));
    let oracle = f_whole_oracle(&free, z, &WindowSpec::matched(64))?;
    // The oracle is the Borel transform of a mass-2 measure: F + 1.
    Ok((f - 1.0).norm().max((oracle - 2.0).norm()))
}

/// Runs every check; output order and content are fixed.
pub fn run(opts: SelftestOptions) -> Vec<CheckResult> {
    vec![
        check("determinants", 1e-13, || determinants(opts)),
        check("theta_unitary", 1e-13, theta_unitary),
        check("wronskian", 1e-11, wronskian),
        check("gz_szego_relations", 1e-10, gz_szego),
        check("truncation_unitarity", 1e-12, truncation_unitarity),
        check("lm_factorization", 1e-13, lm_product),
        check("free_case_oracle", 1e-10, free_oracle),
    ]
}
