use proptest::prelude::*;

use lazylab::activation::{modified_softplus, scaled_silu};
use lazylab::gradflow::{self, rd_metrics};
use lazylab::gram::{normalized_gram, raw_gram_from_gradients};
use lazylab::io;
use lazylab::kernel::{self, QuadratureSettings};
use lazylab::lab::ExperimentConfig;
use lazylab::linalg::{self, Matrix};
use lazylab::network::{
    denormalize, forward, forward_normalized, generate_dataset, init_params, make_scaling, normalize, LabelLaw,
};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

fn gamma_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=3).prop_flat_map(|depth| prop::collection::vec(0.0f64..1.0, depth + 1))
}

fn symmetric_psd(n: usize, k: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, n * k).prop_map(move |v| {
        let x = Matrix::from_vec(n, k, v).unwrap();
        x.matmul(&x.transpose()).unwrap().scaled(scale)
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn normalize_round_trip(gamma in gamma_strategy(), m in 2usize..20, d in 2usize..6, seed in 0u64..1000) {
        let sc = make_scaling(gamma.len() - 1, m, d, &gamma).unwrap();
        let p = init_params(&sc, seed);
        let back = denormalize(&normalize(&p, &sc), &sc);
        for (a, b) in p.weights.iter().zip(&back.weights) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
            }
        }
        for (x, y) in p.output.iter().zip(&back.output) {
            prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
    }

    #[test]
    fn output_scales_with_kappa(gamma in gamma_strategy(), m in 2usize..24, seed in 0u64..1000) {
        let sc = make_scaling(gamma.len() - 1, m, 3, &gamma).unwrap();
        let p = init_params(&sc, seed);
        let np = normalize(&p, &sc);
        let data = generate_dataset(3, 3, 1.0, 0.01, LabelLaw::Uniform, seed).unwrap();
        for act in [scaled_silu(), modified_softplus()] {
            for x in &data.inputs {
                let f = forward(&p, x, &act).unwrap().output;
                let fbar = forward_normalized(&np, x, &sc, &act).unwrap().output;
                prop_assert!((f - sc.kappa * fbar).abs() <= 1e-9 * (1.0 + f.abs()));
            }
        }
    }

    #[test]
    fn gram_scaling_relation(gamma in gamma_strategy(), m in 2usize..16, seed in 0u64..1000) {
        let act = scaled_silu();
        let sc = make_scaling(gamma.len() - 1, m, 3, &gamma).unwrap();
        let p = init_params(&sc, seed);
        let data = generate_dataset(3, 3, 1.0, 0.01, LabelLaw::Sign, seed).unwrap();
        let raw = raw_gram_from_gradients(&p, &data, &act).unwrap();
        let norm = normalized_gram(&normalize(&p, &sc), &data, &sc, &act).unwrap();
        for ((g, gbar), w) in raw.iter().zip(&norm.normalized).zip(sc.gram_weights()) {
            for (a, b) in g.as_slice().iter().zip(gbar.as_slice()) {
                prop_assert!((w * b - a).abs() <= 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn gram_matrices_are_psd(m in 2usize..32, seed in 0u64..1000) {
        let act = scaled_silu();
        let sc = make_scaling(2, m, 4, &[0.5, 0.5, 0.0]).unwrap();
        let data = generate_dataset(5, 4, 1.0, 0.01, LabelLaw::Uniform, seed).unwrap();
        let g = normalized_gram(&normalize(&init_params(&sc, seed), &sc), &data, &sc, &act).unwrap();
        for (mat, lmin) in g.normalized.iter().zip(&g.min_eigs) {
            prop_assert!(mat.asymmetry() == 0.0);
            prop_assert!(*lmin >= -1e-10 * (1.0 + mat.max_abs()));
        }
    }

    #[test]
    fn normalized_hadamard_bound_holds(
        (a, b) in (2usize..=6, 0usize..3).prop_flat_map(|(n, extra)| {
            (symmetric_psd(n, n.saturating_sub(extra).max(1), 1.0), symmetric_psd(n, n + 2, 1.0))
        }),
        sa in 0.01f64..100.0,
        sb in 0.01f64..100.0,
    ) {
        let (a, b) = (a.scaled(sa), b.scaled(sb));
        prop_assume!(linalg::cholesky(&b).is_ok());
        let lmin = linalg::lambda_min(&linalg::hadamard(&a, &b).unwrap()).unwrap();
        let bound = linalg::hadamard_min_eig_bound_normalized(&a, &b).unwrap();
        prop_assert!(bound <= lmin + 1e-10 * (1.0 + lmin.abs()), "{bound} > {lmin}");
    }

    #[test]
    fn schur_product_is_psd(a in symmetric_psd(4, 2, 1.0), b in symmetric_psd(4, 3, 1.0)) {
        let h = linalg::hadamard(&a, &b).unwrap();
        prop_assert!(linalg::lambda_min(&h).unwrap() >= -1e-12);
    }

    #[test]
    fn eigen_decomposition_reconstructs(a in symmetric_psd(5, 5, 1.0), shift in -2.0f64..2.0) {
        let m = a.add(&Matrix::identity(5).scaled(shift)).unwrap();
        let e = linalg::symmetric_eigen(&m, linalg::DEFAULT_TOL).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let lambda = Matrix::diag(&e.values);
        let back = e.vectors.matmul(&lambda).unwrap().matmul(&e.vectors.transpose()).unwrap();
        prop_assert!(back.sub(&m).unwrap().max_abs() <= 1e-10 * (1.0 + m.max_abs()));
        let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
        prop_assert!(vtv.sub(&Matrix::identity(5)).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn datasets_satisfy_their_contract(n in 1usize..8, d in 2usize..8, c in 1.0f64..5.0, seed in 0u64..10_000) {
        let ds = generate_dataset(n, d, c, 0.01, LabelLaw::Uniform, seed).unwrap();
        prop_assert!(ds.validate(c, 0.01).is_ok());
        prop_assert!(ds.labels.iter().all(|y| y.abs() <= c));
        prop_assert_eq!(&ds, &generate_dataset(n, d, c, 0.01, LabelLaw::Uniform, seed).unwrap());
    }

    #[test]
    fn rd_is_zero_at_start_and_homogeneous(m in 2usize..16, seed in 0u64..1000, t in 0.0f64..3.0) {
        let sc = make_scaling(2, m, 3, &[0.5, 0.5, 0.0]).unwrap();
        let p0 = init_params(&sc, seed);
        prop_assert!(rd_metrics(&p0, &p0).unwrap().iter().all(|&v| v == 0.0));
        let mut p = p0.clone();
        p.output.iter_mut().for_each(|v| *v *= 1.0 + t);
        let rd = rd_metrics(&p, &p0).unwrap();
        prop_assert!((rd[2] - t).abs() <= 1e-12 * (1.0 + t));
        prop_assert!(rd[0] == 0.0 && rd[1] == 0.0);
    }

    #[test]
    fn loss_is_nonnegative_and_zero_at_interpolation(m in 2usize..16, seed in 0u64..1000) {
        let act = scaled_silu();
        let sc = make_scaling(1, m, 3, &[0.5, 0.0]).unwrap();
        let p = init_params(&sc, seed);
        let data = generate_dataset(4, 3, 1.0, 0.01, LabelLaw::Uniform, seed).unwrap();
        let (r, e) = gradflow::loss(&p, &data, &act).unwrap();
        prop_assert!(r >= 0.0);
        let fitted = lazylab::Dataset::new(
            data.inputs.clone(),
            data.labels.iter().zip(&e).map(|(y, ei)| y + ei).collect(),
        ).unwrap();
        prop_assert!(gradflow::loss(&p, &fitted, &act).unwrap().0 <= 1e-30);
    }

    #[test]
    fn quantiles_are_ordered(mut v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        v.sort_by(f64::total_cmp);
        let q1 = kernel::quantile(&v, 0.25);
        let q2 = kernel::quantile(&v, 0.5);
        let q3 = kernel::quantile(&v, 0.75);
        prop_assert!(v[0] <= q1 && q1 <= q2 && q2 <= q3 && q3 <= v[v.len() - 1]);
        prop_assert_eq!(q2, kernel::median(&v));
    }

    #[test]
    fn params_text_round_trip(gamma in gamma_strategy(), m in 1usize..8, seed in 0u64..1000) {
        let sc = make_scaling(gamma.len() - 1, m, 2, &gamma).unwrap();
        let p = init_params(&sc, seed);
        prop_assert_eq!(io::params_from_text(&io::params_to_text(&p)).unwrap(), p);
    }

    #[test]
    fn config_toml_round_trip(depth in 1usize..4, seeds in prop::collection::vec(0u64..100, 0..5), q in 2usize..200) {
        let cfg = ExperimentConfig {
            depth,
            gamma: vec![0.25; depth + 1],
            seeds,
            quad_order: q,
            ..ExperimentConfig::default()
        };
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn kernel_stack_is_symmetric_psd(n in 2usize..5, seed in 0u64..1000, eps in 0.01f64..3.0) {
        let data = generate_dataset(n, 4, 1.0, 0.05, LabelLaw::Uniform, seed).unwrap();
        let settings = QuadratureSettings { order: 40, confirm_tol: None };
        let ks = kernel::limiting_kernels_with_eps(&data, &[eps, eps], &scaled_silu(), &settings).unwrap();
        for m in ks.ktilde.iter().chain(&ks.itilde).chain(&ks.k) {
            prop_assert!(m.asymmetry() == 0.0);
            prop_assert!(m.diagonal().iter().all(|&v| v > 0.0));
            prop_assert!(linalg::lambda_min(m).unwrap() >= -1e-10);
        }
        prop_assert!(ks.lambda_s > 0.0);
    }
}
