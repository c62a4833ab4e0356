//! Verblunsky coefficient sources indexed over the integers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::C64;

/// Tolerance for accepting a boundary phase as unimodular.
const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verblunsky {
    pub alpha: C64,
    pub rho: f64,
}

impl Verblunsky {
    /// Interior coefficient, `|alpha| < 1`.
    pub fn new(alpha: C64) -> Result<Self> {
        let m2 = alpha.norm_sqr();
        if !(m2 < 1.0) {
            return Err(Error::NotInDisk { value: m2.sqrt() });
        }
        Ok(Self { alpha, rho: (1.0 - m2).sqrt() })
    }

    /// Decoupling coefficient on the unit circle; `rho` is exactly zero.
    pub fn boundary(phase: C64) -> Result<Self> {
        let m = phase.norm();
        if (m - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::NotUnimodular { modulus: m });
        }
        Ok(Self { alpha: phase, rho: 0.0 })
    }

    pub fn is_boundary(&self) -> bool {
        self.rho == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSource {
    /// `values[k]` is the coefficient at index `base + k`; nothing outside.
    Explicit { values: Vec<C64>, base: i64 },
    Constant { alpha: C64 },
    /// Area-uniform i.i.d. samples on the disk of radius `radius`.
    RandomIid { seed: u64, radius: f64 },
    /// `alpha_n = coupling * exp(2 pi i (n * frequency + phase))`.
    QuasiPeriodic { coupling: f64, frequency: f64, phase: f64 },
    /// An explicit window written over a background source.
    Perturbed {
        background: Box<CoefficientSource>,
        values: Vec<C64>,
        base: i64,
    },
    /// `alpha~_n = -conj(alpha_{-n-2})` of the inner source.
    Reflected { inner: Box<CoefficientSource> },
}

impl CoefficientSource {
    pub fn free() -> Self {
        Self::Constant { alpha: C64::new(0.0, 0.0) }
    }

    pub fn constant(alpha: C64) -> Self {
        Self::Constant { alpha }
    }

    /// Checks parameters once so that evaluation cannot fail later
    /// except for out-of-window explicit indices.
    pub fn validate(&self) -> Result<()> {
        let in_disk = |v: &C64| {
            if v.norm_sqr() < 1.0 {
                Ok(())
            } else {
                Err(Error::NotInDisk { value: v.norm() })
            }
        };
        match self {
            Self::Explicit { values, .. } => values.iter().try_for_each(in_disk),
            Self::Constant { alpha } => in_disk(alpha),
            Self::RandomIid { radius, .. } => {
                if (0.0..1.0).contains(radius) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "radius",
                        reason: format!("{radius} not in [0, 1)"),
                    })
                }
            }
            Self::QuasiPeriodic { coupling, frequency, phase } => {
                if !(0.0..1.0).contains(coupling) {
                    return Err(Error::InvalidParameter {
                        name: "coupling",
                        reason: format!("{coupling} not in [0, 1)"),
                    });
                }
                if !frequency.is_finite() || !phase.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "frequency",
                        reason: "frequency and phase must be finite".into(),
                    });
                }
                Ok(())
            }
            Self::Perturbed { background, values, .. } => {
                background.validate()?;
                values.iter().try_for_each(in_disk)
            }
            Self::Reflected { inner } => inner.validate(),
        }
    }

    pub fn alpha(&self, n: i64) -> Result<C64> {
        match self {
            Self::Explicit { values, base } => window_lookup(values, *base, n)
                .ok_or(Error::OutOfRange { index: n, lo: *base, hi: *base + values.len() as i64 - 1 }),
            Self::Constant { alpha } => Ok(*alpha),
            Self::RandomIid { seed, radius } => Ok(random_alpha(*seed, *radius, n)),
            Self::QuasiPeriodic { coupling, frequency, phase } => {
                let arg = TAU * (n as f64 * frequency + phase);
                Ok(C64::from_polar(*coupling, arg))
            }
            Self::Perturbed { background, values, base } => match window_lookup(values, *base, n) {
                Some(a) => Ok(a),
                None => background.alpha(n),
            },
            Self::Reflected { inner } => Ok(-inner.alpha(-n - 2)?.conj()),
        }
    }

    pub fn coefficient(&self, n: i64) -> Result<Verblunsky> {
        Verblunsky::new(self.alpha(n)?)
    }

    /// The source of `alpha~_n = -conj(alpha_{-n-2})`. Reflection is an
    /// involution; closed forms are kept where they exist.
    pub fn reflect(&self) -> Self {
        let flip = |values: &[C64], base: i64| {
            let len = values.len() as i64;
            let v: Vec<C64> = values.iter().rev().map(|a| -a.conj()).collect();
            (v, -base - len - 1)
        };
        match self {
            Self::Explicit { values, base } => {
                let (values, base) = flip(values, *base);
                Self::Explicit { values, base }
            }
            Self::Constant { alpha } => Self::Constant { alpha: -alpha.conj() },
            Self::QuasiPeriodic { coupling, frequency, phase } => Self::QuasiPeriodic {
                coupling: *coupling,
                frequency: *frequency,
                phase: (2.0 * frequency - phase + 0.5).rem_euclid(1.0),
            },
            Self::Perturbed { background, values, base } => {
                let (values, base) = flip(values, *base);
                Self::Perturbed { background: Box::new(background.reflect()), values, base }
            }
            Self::Reflected { inner } => (**inner).clone(),
            Self::RandomIid { .. } => Self::Reflected { inner: Box::new(self.clone()) },
        }
    }

    /// True when `alpha` does not depend on `n`.
    pub fn as_constant(&self) -> Option<C64> {
        match self {
            Self::Constant { alpha } => Some(*alpha),
            Self::Reflected { inner } => inner.as_constant().map(|a| -a.conj()),
            _ => None,
        }
    }
}

fn window_lookup(values: &[C64], base: i64, n: i64) -> Option<C64> {
    let k = n.checked_sub(base)?;
    usize::try_from(k).ok().and_then(|k| values.get(k).copied())
}

// Stateless: the stream id is the index, so any n is reachable in O(1).
fn random_alpha(seed: u64, radius: f64, n: i64) -> C64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let u: f64 = rng.random();
    let t: f64 = rng.random();
    C64::from_polar(radius * u.sqrt(), TAU * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_examples() {
        let v = CoefficientSource::free().coefficient(5).unwrap();
        assert_eq!((v.alpha, v.rho), (c(0.0, 0.0), 1.0));
        let v = CoefficientSource::constant(c(0.6, 0.0)).coefficient(-9).unwrap();
        assert!((v.rho - 0.8).abs() < 1e-15);
    }

    #[test]
    fn quasi_periodic_at_origin() {
        let beta = (5f64.sqrt() - 1.0) / 2.0;
        let s = CoefficientSource::QuasiPeriodic { coupling: 0.5, frequency: beta, phase: 0.0 };
        let v = s.coefficient(0).unwrap();
        assert!((v.alpha - c(0.5, 0.0)).norm() < 1e-15);
        assert!((v.rho - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_window_is_strict() {
        let s = CoefficientSource::Explicit { values: vec![c(0.1, 0.0), c(0.2, 0.0)], base: -1 };
        assert_eq!(s.alpha(0).unwrap(), c(0.2, 0.0));
        assert_eq!(s.alpha(1), Err(Error::OutOfRange { index: 1, lo: -1, hi: 0 }));
        assert!(s.alpha(-2).is_err());
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(CoefficientSource::free().reflect(), CoefficientSource::free());
        let s = CoefficientSource::constant(c(0.0, 0.5)).reflect();
        assert_eq!(s.alpha(3).unwrap(), c(0.0, 0.5));
        let s = CoefficientSource::Explicit { values: vec![c(0.3, 0.0)], base: -2 };
        assert_eq!(s.reflect().alpha(0).unwrap(), c(-0.3, 0.0));
    }

    #[test]
    fn boundary_requires_unit_modulus() {
        assert!(Verblunsky::boundary(c(0.0, 1.0)).unwrap().is_boundary());
        assert!(Verblunsky::boundary(c(0.9, 0.0)).is_err());
        assert!(Verblunsky::new(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn random_seeds_differ() {
        let a = CoefficientSource::RandomIid { seed: 1, radius: 0.9 };
        let b = CoefficientSource::RandomIid { seed: 2, radius: 0.9 };
        let same = (0..32).all(|n| a.alpha(n).unwrap() == b.alpha(n).unwrap());
        assert!(!same);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(CoefficientSource::RandomIid { seed: 0, radius: 1.0 }.validate().is_err());
        assert!(CoefficientSource::constant(c(0.8, 0.8)).validate().is_err());
        let q = CoefficientSource::QuasiPeriodic { coupling: 1.0, frequency: 0.3, phase: 0.0 };
        assert!(q.validate().is_err());
    }

    fn any_source() -> impl Strategy<Value = CoefficientSource> {
        prop_oneof![
            (0.0..0.99f64, 0.0..TAU).prop_map(|(r, t)| CoefficientSource::constant(C64::from_polar(r, t))),
            (any::<u64>(), 0.0..0.99f64).prop_map(|(seed, radius)| CoefficientSource::RandomIid { seed, radius }),
            (0.0..0.99f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(coupling, frequency, phase)| {
                CoefficientSource::QuasiPeriodic { coupling, frequency, phase }
            }),
        ]
    }

    proptest! {
        #[test]
        fn pythagorean_identity(s in any_source(), n in -10_000i64..10_000) {
            let v = s.coefficient(n).unwrap();
            prop_assert!((v.alpha.norm_sqr() + v.rho * v.rho - 1.0).abs() < 1e-15);
        }

        #[test]
        fn reflect_matches_index_arithmetic(s in any_source(), n in -500i64..500) {
            let direct = -s.alpha(-n - 2).unwrap().conj();
            let r = s.reflect().coefficient(n).unwrap();
            prop_assert!((r.alpha - direct).norm() < 1e-12);
            prop_assert!((r.rho - s.coefficient(-n - 2).unwrap().rho).abs() < 1e-12);
        }

        #[test]
        fn reflect_is_involution(s in any_source(), n in -500i64..500) {
            let rr = s.reflect().reflect();
            prop_assert!((rr.alpha(n).unwrap() - s.alpha(n).unwrap()).norm() < 1e-12);
        }

        #[test]
        fn explicit_reflection_window(vals in prop::collection::vec((-0.7..0.7f64, -0.7..0.7f64), 1..20), base in -30i64..30) {
            let values: Vec<C64> = vals.into_iter().map(|(a, b)| c(a, b)).collect();
            let s = CoefficientSource::Explicit { values: values.clone(), base };
            let r = s.reflect();
            for k in 0..values.len() as i64 {
                let n = -(base + k) - 2;
                prop_assert_eq!(r.alpha(n).unwrap(), -values[k as usize].conj());
            }
            prop_assert!(r.alpha(-base - 1).is_err());
            prop_assert!(r.alpha(-base - values.len() as i64 - 2).is_err());
        }

        #[test]
        fn random_is_pure(seed in any::<u64>(), n in any::<i64>()) {
            let s = CoefficientSource::RandomIid { seed, radius: 0.5 };
            let a = s.alpha(n).unwrap();
            prop_assert_eq!(a.re.to_bits(), s.alpha(n).unwrap().re.to_bits());
            prop_assert!(a.norm() < 0.5);
        }
    }
}
