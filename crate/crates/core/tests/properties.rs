use gdu_core::{
    kme_inner, kme_norm_sq, mmd_sq, omega_l1, rkhs_cosine, Activation, DomainBasis, EmpiricalKme, GatingMode,
    GduLayer, KernelConfig, LayerShape, LearningMachine,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn points(max_n: usize, e: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(-3.0..3.0f64, n * e).prop_map(move |v| Array2::from_shape_vec((n, e), v).unwrap())
    })
}

fn kme(x: Array2<f64>, sigma: f64) -> EmpiricalKme<f64> {
    EmpiricalKme::new(x, KernelConfig::new(sigma).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_is_bounded(a in points(8, 3), b in points(8, 3), sigma in 0.2..3.0f64) {
        let c = rkhs_cosine(&kme(a, sigma), &kme(b, sigma)).unwrap();
        prop_assert!(c <= 1.0 + 1e-12);
        prop_assert!(c > 0.0);
    }

    #[test]
    fn mmd_root_is_a_metric(a in points(20, 2), b in points(20, 2), c in points(20, 2), sigma in 0.3..3.0f64) {
        let (a, b, c) = (kme(a, sigma), kme(b, sigma), kme(c, sigma));
        let d = |x: &EmpiricalKme<f64>, y: &EmpiricalKme<f64>| mmd_sq(x, y).unwrap().sqrt();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn mmd_expands_into_inner_products(a in points(6, 2), b in points(6, 2), sigma in 0.3..3.0f64) {
        let (a, b) = (kme(a, sigma), kme(b, sigma));
        let expanded = kme_norm_sq(&a).unwrap() - 2.0 * kme_inner(&a, &b).unwrap() + kme_norm_sq(&b).unwrap();
        prop_assert!((mmd_sq(&a, &b).unwrap() - expanded.max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn geometry_gates_lie_on_simplex(seed in 0u64..1000, kappa in 0.05..20.0f64, x in points(6, 3)) {
        for mode in [GatingMode::Cs, GatingMode::Mmd] {
            let layer = GduLayer::<f64>::init_layer(
                LayerShape { m: 4, n: 3, e: 3, c: 2 },
                seed,
                mode,
                KernelConfig::new(1.0).unwrap(),
                kappa,
                Activation::Identity,
            ).unwrap();
            let beta = layer.gate_rows(x.view()).unwrap();
            for row in beta.view().rows() {
                prop_assert!(row.iter().all(|&b| b > 0.0));
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
            prop_assert!((omega_l1(&beta) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_affine_in_each_machine(
        seed in 0u64..1000,
        t in -2.0..2.0f64,
        x in proptest::collection::vec(-2.0..2.0f64, 3),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = GduLayer::<f64>::init_layer(
            LayerShape { m: 3, n: 2, e: 3, c: 2 },
            seed,
            GatingMode::Projection,
            KernelConfig::new(1.0).unwrap(),
            1.0,
            Activation::Identity,
        ).unwrap();
        let f = LearningMachine::init(3, 2, Activation::Identity, &mut rng);
        let g = LearningMachine::init(3, 2, Activation::Identity, &mut rng);
        let mix = LearningMachine::new(
            &f.weights * t + &g.weights * (1.0 - t),
            &f.bias * t + &g.bias * (1.0 - t),
            Activation::Identity,
        ).unwrap();
        let with = |m: &LearningMachine<f64>| {
            let mut machines = base.machines().to_vec();
            machines[1] = m.clone();
            let bases: Vec<DomainBasis<f64>> = base.bases().to_vec();
            GduLayer::new(bases, machines, *base.kernel(), base.mode(), base.kappa()).unwrap()
        };
        let x = Array1::from(x);
        let out = |m: &LearningMachine<f64>| with(m).forward(x.view()).unwrap();
        let expected = out(&f) * t + out(&g) * (1.0 - t);
        for (a, b) in out(&mix).iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
