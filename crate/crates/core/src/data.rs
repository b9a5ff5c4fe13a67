//! Seeded initial data `(u0, u1)`.

use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fourier::SpectralField;
use crate::groups::{ModeIndex, ModeSet};
use crate::scalar::Scalar;

/// Spectral shape of generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `u0` is the real part of one basis function, `u1 = 0`.
    SingleMode { mode: Vec<i64> },
    /// Independent Gaussian coefficients with variance `(1 + lambda^2)^{-r}`
    /// for both `u0` and `u1`.
    Random { decay_exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub seed: u64,
    #[serde(flatten)]
    pub profile: Profile,
    /// Target value of `||u0||_{H^1} + ||u1||_{L^2}`.
    pub amplitude: f64,
}

/// Random real field: Gaussian coefficients with variance
/// `(1 + lambda^2)^{-r}`, conjugate pairs tied together.
pub fn random_field<T: Scalar>(modes: &Arc<ModeSet<T>>, decay_exponent: f64, rng: &mut ChaCha8Rng) -> SpectralField<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut coeffs = vec![zero; modes.len()];
    for (i, m) in modes.modes().iter().enumerate() {
        let j = modes.conjugate_position(i);
        if j < i {
            coeffs[i] = coeffs[j].conj();
            continue;
        }
        let sd = (1.0 + m.eigenvalue_sq.as_f64()).powf(-0.5 * decay_exponent);
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if j == i { 0.0 } else { StandardNormal.sample(rng) };
        coeffs[i] = Complex::new(T::lit(sd * re), T::lit(sd * im));
    }
    SpectralField::from_coeffs(modes.clone(), coeffs).expect("conjugate pairs are tied")
}

/// Generates `(u0, u1)` on `modes` from `spec`, deterministically in the seed.
///
/// Nonzero profiles are scaled so that `||u0||_{H^1} + ||u1||_{L^2}` equals
/// the requested amplitude.
pub fn generate_data<T: Scalar>(spec: &DataSpec, modes: &Arc<ModeSet<T>>) -> Result<(SpectralField<T>, SpectralField<T>)> {
    if !(spec.amplitude >= 0.0 && spec.amplitude.is_finite()) {
        return Err(invalid("amplitude", format!("must be finite and nonnegative, got {}", spec.amplitude)));
    }
    let (u0, u1) = match &spec.profile {
        Profile::Zero => return Ok((SpectralField::zeros(modes.clone()), SpectralField::zeros(modes.clone()))),
        Profile::SingleMode { mode } => {
            let index = ModeIndex::from_components(modes.group(), mode)
                .ok_or_else(|| invalid("mode", format!("{mode:?} is not a mode of {}", modes.group())))?;
            let i = modes
                .position(&index)
                .ok_or_else(|| invalid("mode", format!("{index} lies outside truncation K={}", modes.truncation())))?;
            let j = modes.conjugate_position(i);
            let mut coeffs = vec![Complex::new(T::zero(), T::zero()); modes.len()];
            // Re(basis) = (e_k + e_{-k}) / 2
            if j == i {
                coeffs[i] = Complex::new(T::one(), T::zero());
            } else {
                coeffs[i] = Complex::new(T::lit(0.5), T::zero());
                coeffs[j] = Complex::new(T::lit(0.5), T::zero());
            }
            (SpectralField::from_coeffs(modes.clone(), coeffs)?, SpectralField::zeros(modes.clone()))
        }
        Profile::Random { decay_exponent } => {
            if !decay_exponent.is_finite() {
                return Err(invalid("decay_exponent", "must be finite"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let u0 = random_field(modes, *decay_exponent, &mut rng);
            let u1 = random_field(modes, *decay_exponent, &mut rng);
            (u0, u1)
        }
    };
    let norm = u0.h1_norm() + u1.plancherel_l2_norm();
    let s = T::lit(spec.amplitude) / norm;
    Ok((u0.scaled(s), u1.scaled(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{GroupKind, GroupSpec};

    fn modes(kind: GroupKind, k: u32) -> Arc<ModeSet<f64>> {
        Arc::new(ModeSet::new(GroupSpec::new(kind), k))
    }

    #[test]
    fn zero_profile() {
        let spec = DataSpec { seed: 1, profile: Profile::Zero, amplitude: 3.0 };
        let (a, b) = generate_data(&spec, &modes(GroupKind::TorusD2, 2)).unwrap();
        assert!(a.is_zero() && b.is_zero());
    }

    #[test]
    fn amplitude_is_exact() {
        for kind in GroupKind::ALL {
            for eps in [1e-3, 0.7, 25.0] {
                let spec = DataSpec {
                    seed: 9,
                    profile: Profile::Random { decay_exponent: 1.0 },
                    amplitude: eps,
                };
                let (a, b) = generate_data(&spec, &modes(kind, 3)).unwrap();
                let n = a.h1_norm() + b.plancherel_l2_norm();
                assert!((n - eps).abs() <= 1e-12 * eps, "{kind}: {n}");
            }
        }
    }

    #[test]
    fn seed_reproducibility() {
        let spec = DataSpec {
            seed: 42,
            profile: Profile::Random { decay_exponent: 2.0 },
            amplitude: 1.0,
        };
        let m = modes(GroupKind::TorusD3, 2);
        let x = generate_data(&spec, &m).unwrap();
        let y = generate_data(&spec, &m).unwrap();
        assert_eq!(x.0.coeffs(), y.0.coeffs());
        assert_eq!(x.1.coeffs(), y.1.coeffs());
        let other = DataSpec { seed: 43, ..spec };
        let z = generate_data(&other, &m).unwrap();
        assert_ne!(x.0.coeffs(), z.0.coeffs());
    }

    #[test]
    fn random_fields_are_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&modes(GroupKind::TorusD2, 3), 1.0, &mut rng);
        assert_eq!(f.realness_defect(), 0.0);
    }

    #[test]
    fn single_mode_profile() {
        let m = modes(GroupKind::TorusD1, 3);
        let spec = DataSpec {
            seed: 0,
            profile: Profile::SingleMode { mode: vec![2] },
            amplitude: 1.0,
        };
        let (u0, u1) = generate_data(&spec, &m).unwrap();
        assert!(u1.is_zero());
        let a = u0.coeff(&ModeIndex::Torus(vec![2])).unwrap();
        assert_eq!(a, u0.coeff(&ModeIndex::Torus(vec![-2])).unwrap());
        // cos(2x): L2 = 1/sqrt2, H1 seminorm = 2/sqrt2
        assert!((a.re - 0.5 / (3.0 / 2f64.sqrt())).abs() < 1e-15);
        let bad = DataSpec {
            profile: Profile::SingleMode { mode: vec![5] },
            ..spec
        };
        assert!(generate_data(&bad, &m).is_err());
    }
}
