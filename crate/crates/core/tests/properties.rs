use mindiss_core::channel::channel_fidelity_unitary_target;
use mindiss_core::linalg::{
    exp_i_hermitian, haar_unitary, kron, max_abs, partial_trace, random_density, random_hermitian,
    seeded_rng, trace_distance,
};
use mindiss_core::meanfield::{mu, MixGenerator, MuMethod, WeakCouplingFamily};
use mindiss_core::{BipartiteOperator, DensityMatrix, Side, C64};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_trace_is_linear((d_ir, d_uv) in dims(), seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let mut rng = seeded_rng(seed);
        let d = d_ir * d_uv;
        let x = random_hermitian(d, &mut rng);
        let y = random_hermitian(d, &mut rng);
        let combo = &x * C64::from(a) + &y * C64::from(b);
        let op = |m| BipartiteOperator::new(d_ir, d_uv, m).unwrap();
        for side in [Side::Ir, Side::Uv] {
            let lhs = partial_trace(&op(combo.clone()), side);
            let rhs = partial_trace(&op(x.clone()), side) * C64::from(a)
                + partial_trace(&op(y.clone()), side) * C64::from(b);
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn exp_is_a_one_parameter_group(d in 1usize..=5, seed in any::<u64>(), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let h = random_hermitian(d, &mut seeded_rng(seed));
        let lhs = exp_i_hermitian(&h, s).unwrap() * exp_i_hermitian(&h, t).unwrap();
        let rhs = exp_i_hermitian(&h, s + t).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn trace_distance_is_a_unitarily_invariant_metric(d in 1usize..=5, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let r = random_density(d, &mut rng);
        let s = random_density(d, &mut rng);
        let t = random_density(d, &mut rng);
        let v = haar_unitary(d, &mut rng);
        let rot = |x: &DensityMatrix| DensityMatrix::new(&v * x.matrix() * v.adjoint()).unwrap();
        let rs = trace_distance(&r, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&rs));
        prop_assert!((rs - trace_distance(&rot(&r), &rot(&s)).unwrap()).abs() < 1e-10);
        let rt = trace_distance(&r, &t).unwrap();
        let ts = trace_distance(&t, &s).unwrap();
        prop_assert!(rs <= rt + ts + 1e-12);
    }

    #[test]
    fn fidelity_is_invariant_under_left_ir_unitaries((d_ir, d_uv) in dims(), seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let u = BipartiteOperator::new(d_ir, d_uv, haar_unitary(d_ir * d_uv, &mut rng)).unwrap();
        let target = haar_unitary(d_ir, &mut rng);
        let w = haar_unitary(d_ir, &mut rng);
        let rho = random_density(d_uv, &mut rng);
        let f = channel_fidelity_unitary_target(&u, &rho, &target).unwrap().fidelity;
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
        let wu = u.left_mul_ir(&w).unwrap();
        let f2 = channel_fidelity_unitary_target(&wu, &rho, &(&w * &target)).unwrap().fidelity;
        prop_assert!((f - f2).abs() < 1e-10);
    }

    #[test]
    fn mu_ignores_identity_shifts((d_ir, d_uv) in (1usize..=3, 1usize..=3), seed in any::<u64>(), c in -5.0..5.0f64) {
        let mut rng = seeded_rng(seed);
        let h = BipartiteOperator::new(d_ir, d_uv, random_hermitian(d_ir * d_uv, &mut rng)).unwrap();
        let rho = random_density(d_uv, &mut rng);
        let gen = MixGenerator::new(h).unwrap();
        let m0 = mu(&gen, &rho, MuMethod::Direct).unwrap();
        let m1 = mu(&gen.shifted(c).unwrap(), &rho, MuMethod::Direct).unwrap();
        prop_assert!((m0 - m1).abs() < 1e-9);
        prop_assert!(m0 >= -1e-12);
    }

    #[test]
    fn product_families_have_unit_fidelity(seed in any::<u64>(), theta in -0.3..0.3f64) {
        let mut rng = seeded_rng(seed);
        let v_ir = haar_unitary(2, &mut rng);
        let v_uv = haar_unitary(2, &mut rng);
        let h = BipartiteOperator::new(2, 2, kron(&random_hermitian(2, &mut rng), &mindiss_core::linalg::identity(2))).unwrap();
        let fam = WeakCouplingFamily::exponential(v_ir.clone(), v_uv, h.clone()).unwrap();
        let rho = random_density(2, &mut rng);
        let h_ir = partial_trace(&h, Side::Uv) * C64::from(0.5);
        let target = v_ir * exp_i_hermitian(&h_ir, theta).unwrap();
        let f = channel_fidelity_unitary_target(&fam.unitary(theta).unwrap(), &rho, &target).unwrap().fidelity;
        prop_assert!((f - 1.0).abs() < 1e-10);
    }
}
