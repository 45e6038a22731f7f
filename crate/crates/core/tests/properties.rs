use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use open_majorana::dissipator::{jump_operators, lindblad_rhs, rates, Coupling, NoiseConfig};
use open_majorana::experiments::format_f64;
use open_majorana::linalg::{min_eigenvalue, ComplexMatrix, I};
use open_majorana::model::{frame, ModelParams};
use open_majorana::spin::{build_spin, rotation_y};

fn random_density(seed: u64, d: usize) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..d * d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let b = ComplexMatrix::from_vec(d, d, data);
    let rho = b.matmul(&b.adjoint());
    rho.scale_real(1.0 / rho.trace().re)
}

fn coupling() -> impl Strategy<Value = Coupling> {
    prop_oneof![Just(Coupling::Jz), Just(Coupling::Jx)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angular_momentum_algebra(two_j in 1u32..=8) {
        let s = build_spin(f64::from(two_j) / 2.0).unwrap();
        let j = f64::from(two_j) / 2.0;
        let comm = &s.jx.commutator(&s.jy) - &s.jz.scale(I);
        prop_assert!(comm.max_abs() < 1e-12);
        let cas = &s.casimir() - &ComplexMatrix::identity(s.dim()).scale_real(j * (j + 1.0));
        prop_assert!(cas.max_abs() < 1e-11);
    }

    #[test]
    fn rotations_are_unitary_and_compose(two_j in 1u32..=8, a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let s = build_spin(f64::from(two_j) / 2.0).unwrap();
        let ra = rotation_y(&s, a).unwrap();
        let rb = rotation_y(&s, b).unwrap();
        let defect = &ra.adjoint().matmul(&ra) - &ComplexMatrix::identity(s.dim());
        prop_assert!(defect.max_abs() < 1e-12);
        let gap = &ra.matmul(&rb) - &rotation_y(&s, a + b).unwrap();
        prop_assert!(gap.max_abs() < 1e-11);
    }

    #[test]
    fn generator_is_trace_free_and_hermiticity_preserving(
        two_j in 1u32..=5,
        t in -250.0f64..250.0,
        gamma in 0.0f64..1.0,
        temperature in 0.001f64..20.0,
        ch in coupling(),
        seed in any::<u64>(),
    ) {
        let j = f64::from(two_j) / 2.0;
        let s = build_spin(j).unwrap();
        let p = ModelParams::figure(j);
        let rho = random_density(seed, s.dim());
        let out = lindblad_rhs(t, &rho, &p, &NoiseConfig::new(ch, gamma, temperature), &s).unwrap();
        prop_assert!(out.trace().norm() < 1e-10);
        prop_assert!(out.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn short_steps_keep_states_positive(
        two_j in 1u32..=4,
        t in -50.0f64..50.0,
        gamma in 0.0f64..1.0,
        ch in coupling(),
        seed in any::<u64>(),
    ) {
        // first-order step of a full-rank state stays a state
        let j = f64::from(two_j) / 2.0;
        let s = build_spin(j).unwrap();
        let p = ModelParams::figure(j);
        let rho = random_density(seed, s.dim());
        let lam = min_eigenvalue(&rho).unwrap();
        prop_assume!(lam > 1e-3);
        let out = lindblad_rhs(t, &rho, &p, &NoiseConfig::new(ch, gamma, 1.0), &s).unwrap();
        let h = 0.1 * lam / out.frobenius_norm().max(1e-300);
        let mut next = rho.clone();
        next.axpy(Complex64::new(h, 0.0), &out);
        prop_assert!(min_eigenvalue(&next).unwrap() > 0.0);
    }

    #[test]
    fn bands_reassemble_the_coupling(two_j in 1u32..=6, t in -250.0f64..250.0, ch in coupling()) {
        let j = f64::from(two_j) / 2.0;
        let s = build_spin(j).unwrap();
        let f = frame(t, &ModelParams::figure(j), &s).unwrap();
        let n = NoiseConfig { include_nu_zero: true, ..NoiseConfig::new(ch.clone(), 0.1, 1.0) };
        let terms = jump_operators(&f, &n, &s).unwrap();
        let diff = &terms.sum(s.dim()) - &ch.operator(&s).unwrap();
        prop_assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn rates_obey_detailed_balance(nu in 1i32..=5, omega in 0.1f64..30.0, temperature in 0.5f64..50.0) {
        let n = NoiseConfig::new(Coupling::Jx, 0.3, temperature);
        let down = rates(nu, omega, &n).unwrap();
        let up = rates(-nu, omega, &n).unwrap();
        let expected = (-f64::from(nu) * omega / temperature).exp();
        prop_assert!((up / down - expected).abs() <= 1e-12 * expected.max(1e-300) + 1e-15);
    }

    #[test]
    fn csv_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }
}
