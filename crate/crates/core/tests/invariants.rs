mod common;

use damped_kg::data::random_field;
use damped_kg::fourier::quadrature_l2_norm;
use damped_kg::gn::check_gn;
use damped_kg::groups::GroupKind;
use damped_kg::linear::{energy, evolve_homogeneous};
use damped_kg::{EvolutionParams, EvolutionState, Transform};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::modes;

fn group() -> impl Strategy<Value = (GroupKind, u32)> {
    prop_oneof![
        (Just(GroupKind::TorusD1), 0u32..10),
        (Just(GroupKind::TorusD2), 0u32..5),
        (Just(GroupKind::TorusD3), 0u32..3),
        (Just(GroupKind::SU2Central), 0u32..10),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plancherel_and_round_trip((kind, k) in group(), seed in any::<u64>(), r in 0.0f64..3.0) {
        let m = modes(kind, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&m, r, &mut rng);
        let t = Transform::with_oversample(m.clone(), 2).unwrap();
        let samples = t.synthesize(&f).unwrap();
        let spectral = f.plancherel_l2_norm();
        let quad = quadrature_l2_norm(&samples, t.grid());
        prop_assert!((spectral - quad).abs() <= 1e-12 * spectral.max(1e-300));
        let back = t.analyze(&samples).unwrap();
        let err = back.sub(&f).unwrap().plancherel_l2_norm();
        prop_assert!(err <= 1e-12 * spectral.max(1e-300));
    }

    #[test]
    fn transforms_are_linear((kind, k) in group(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let m = modes(kind, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&m, 1.0, &mut rng);
        let g = random_field(&m, 1.0, &mut rng);
        let t = Transform::with_oversample(m.clone(), 2).unwrap();
        let combo = f.scaled(a).add_scaled(b, &g).unwrap();
        let lhs = t.synthesize(&combo).unwrap();
        let sf = t.synthesize(&f).unwrap();
        let sg = t.synthesize(&g).unwrap();
        let scale = f.plancherel_l2_norm() + g.plancherel_l2_norm();
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * sf[i] + b * sg[i])).abs() <= 1e-12 * scale * 10.0);
        }
    }

    #[test]
    fn semigroup_and_dissipation(seed in any::<u64>(), b in 0.2f64..4.0, m_sq in 0.2f64..3.0, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let m = modes(GroupKind::TorusD2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = EvolutionState::initial(
            random_field(&m, 1.0, &mut rng),
            random_field(&m, 1.0, &mut rng),
            EvolutionParams::new(b, m_sq).unwrap(),
        ).unwrap();
        let one = evolve_homogeneous(&evolve_homogeneous(&s, t1).unwrap(), t2).unwrap();
        let both = evolve_homogeneous(&s, t1 + t2).unwrap();
        // relative per mode, against the mode's phase-space magnitude |u| + |u_t|
        for i in 0..m.len() {
            let err = (one.u.coeffs()[i] - both.u.coeffs()[i]).norm() + (one.ut.coeffs()[i] - both.ut.coeffs()[i]).norm();
            let size = both.u.coeffs()[i].norm() + both.ut.coeffs()[i].norm();
            prop_assert!(err <= 1e-12 * size, "mode {}: {:e} vs {:e}", i, err, size);
        }
        prop_assert!(energy(&both) <= energy(&evolve_homogeneous(&s, t1).unwrap()) * (1.0 + 1e-12));
        prop_assert!(both.u.realness_defect() <= 1e-14 * s.data_norm());
    }

    #[test]
    fn unexcited_modes_stay_zero(seed in any::<u64>(), t in 0.0f64..20.0) {
        let m = modes(GroupKind::TorusD3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_field(&m, 1.0, &mut rng);
        let keep: Vec<bool> = (0..m.len()).map(|i| m.modes()[i].eigenvalue_sq <= 1.0).collect();
        let coeffs: Vec<_> = f.coeffs().iter().zip(&keep).map(|(c, &k)| if k { *c } else { num_complex::Complex::new(0.0, 0.0) }).collect();
        f = damped_kg::SpectralField::from_coeffs(m.clone(), coeffs).unwrap();
        let s = EvolutionState::initial(f.clone(), f, EvolutionParams::new(1.0, 1.0).unwrap()).unwrap();
        let e = evolve_homogeneous(&s, t).unwrap();
        for (i, &k) in keep.iter().enumerate() {
            if !k {
                prop_assert_eq!(e.u.coeffs()[i].norm(), 0.0);
                prop_assert_eq!(e.ut.coeffs()[i].norm(), 0.0);
            }
        }
    }

    #[test]
    fn gn_ratio_is_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3, q in 2.0f64..6.0) {
        let m = modes(GroupKind::TorusD3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&m, 1.0, &mut rng);
        let t = Transform::with_oversample(m.clone(), 2).unwrap();
        let r1 = check_gn(std::slice::from_ref(&f), 3, q, &t).unwrap().max_ratio;
        let r2 = check_gn(&[f.scaled(c)], 3, q, &t).unwrap().max_ratio;
        prop_assert!((r1 - r2).abs() <= 1e-12 * r1);
    }
}
