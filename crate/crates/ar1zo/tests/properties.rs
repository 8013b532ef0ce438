//! Property-based invariants over random shapes and values.

mod common;

use ar1zo::linalg::{
    frobenius_sq, matmul, power_default_max_iter, power_default_tol, sample_gaussian,
    top_singular_pair, Matrix, Prng, Vector,
};
use ar1zo::lora::{
    flatten_atom, unflatten_atom, AtomView, InitScheme, LoraLayer, ScalingMode,
};
use ar1zo::oracles::{LinearOracle, NoiseChannel};
use ar1zo::zo::{AtomSchedule, Optimizer};
use proptest::prelude::*;

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(
        a in matrix_strategy(4, 6),
        b in matrix_strategy(6, 3),
        c in matrix_strategy(3, 5),
    ) {
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        let scale = frobenius_sq(&left).sqrt().max(1.0);
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn top_singular_value_bounded_by_frobenius(
        g in matrix_strategy(5, 7),
        seed in 0u64..1000,
    ) {
        prop_assume!(frobenius_sq(&g) > 1e-6);
        let mut rng = Prng::from_seed(seed);
        let pair = top_singular_pair(&g, power_default_tol(), power_default_max_iter(), &mut rng)
            .unwrap();
        let fro = frobenius_sq(&g);
        prop_assert!(pair.sigma1 * pair.sigma1 <= fro * (1.0 + 1e-9));
        // σ₁² also dominates the mean squared singular value.
        let n = 5.0f64.min(7.0);
        prop_assert!(pair.sigma1 * pair.sigma1 >= fro / n * (1.0 - 1e-9));
    }

    #[test]
    fn atom_flatten_round_trips(
        b in prop::collection::vec(-5.0..5.0f64, 9),
        a in prop::collection::vec(-5.0..5.0f64, 4),
        k in 0usize..8,
    ) {
        let view = AtomView {
            k,
            b_k: Vector::from(b),
            a_k: Vector::from(a),
        };
        let flat = flatten_atom(&view);
        let back = unflatten_atom(&flat, 9, 4, k).unwrap();
        prop_assert_eq!(back.k, view.k);
        prop_assert_eq!(back.b_k.data(), view.b_k.data());
        prop_assert_eq!(back.a_k.data(), view.a_k.data());
    }

    #[test]
    fn prng_fork_is_pure_and_reproducible(seed in any::<u64>(), key in any::<u64>()) {
        let parent = Prng::from_seed(seed);
        let mut c1 = parent.fork(key);
        let mut c2 = parent.fork(key);
        let before: Vec<u64> = (0..4).map(|_| c1.next_u64()).collect();
        let again: Vec<u64> = (0..4).map(|_| c2.next_u64()).collect();
        prop_assert_eq!(before, again);
        // Forking does not disturb the parent stream.
        let mut p1 = Prng::from_seed(seed);
        let mut p2 = Prng::from_seed(seed);
        let _ = p2.fork(key);
        prop_assert_eq!(p1.next_u64(), p2.next_u64());
    }

    #[test]
    fn two_point_estimate_restores_layer(seed in 0u64..500, r in 1usize..6) {
        let d = 7usize;
        let mut rng = Prng::from_seed(seed);
        let layer = LoraLayer::init(
            Matrix::zeros(d, d),
            r,
            16.0,
            ScalingMode::TopologyAware,
            InitScheme::UnitNormAtoms,
            &mut rng,
        ).unwrap();
        let before_b = layer.b_factor().data().to_vec();
        let before_a = layer.a_factor().data().to_vec();

        let mut c = Matrix::zeros(d, d);
        for v in c.data_mut() {
            *v = rng.gaussian();
        }
        let oracle = LinearOracle::new(c);
        let mut opt = Optimizer::new(
            layer,
            AtomSchedule::Cyclic { r },
            1e-3,
            1e-4,
            NoiseChannel::new(1e-4, rng.fork(1)).unwrap(),
            rng.fork(2),
        ).unwrap();
        let z = sample_gaussian(&mut rng, 2 * d);
        let est = opt.two_point_estimate(&oracle, r - 1, &z).unwrap();
        prop_assert!(est.numerator.is_finite());
        prop_assert_eq!(opt.evaluations(), 2);
        prop_assert_eq!(opt.layer().b_factor().data(), &before_b[..]);
        prop_assert_eq!(opt.layer().a_factor().data(), &before_a[..]);
    }

    #[test]
    fn scaling_modes_agree_on_gamma_identity(r in 1usize..65, alpha in 0.5..64.0f64) {
        use ar1zo::lora::{effective_gamma, gamma_over_r};
        for mode in [
            ScalingMode::Canonical,
            ScalingMode::SqrtRank,
            ScalingMode::TopologyAware,
            ScalingMode::BlockAware(1),
            ScalingMode::BlockAware(r),
        ] {
            let g = effective_gamma(mode, alpha, r).unwrap();
            let gr = gamma_over_r(mode, alpha, r).unwrap();
            prop_assert!((g / r as f64 - gr).abs() <= 1e-12 * gr.abs().max(1.0));
        }
    }
}
