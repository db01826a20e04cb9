//! Property tests for the kernel and domain-type invariants.

use fastgw::dense::{dense_distance_matrix, naive_triple_product};
use fastgw::multiply::{
    apply_distance_1d, apply_lower, apply_upper, triple_product_1d, BinomialTable,
};
use fastgw::plan::entropy_of;
use fastgw::sinkhorn::sinkhorn;
use fastgw::{DiscreteMeasure, Grid, Grid1d};

use ndarray::Array2;
use proptest::prelude::*;

fn weights_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..max_len)
}

fn signal_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..max_len)
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_lower_is_linear(
        x in signal_strategy(64),
        z_seed in signal_strategy(64),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        k in 1u32..=3,
    ) {
        let n = x.len();
        let z: Vec<f64> = z_seed.iter().cycle().take(n).copied().collect();
        let combo: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| a * xi + b * zi).collect();
        let lhs = apply_lower(&combo, k).unwrap();
        let lx = apply_lower(&x, k).unwrap();
        let lz = apply_lower(&z, k).unwrap();
        let scale: f64 = lhs.iter().map(|v| v.abs()).fold(1e-30, f64::max);
        for i in 0..n {
            let rhs = a * lx[i] + b * lz[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-13 * scale.max(rhs.abs()),
                "entry {i}: {} vs {}", lhs[i], rhs);
        }
    }

    #[test]
    fn apply_upper_is_bitwise_mirror(x in signal_strategy(80), k in 1u32..=3) {
        let got = apply_upper(&x, k).unwrap();
        let mut rev = x.clone();
        rev.reverse();
        let mut want = apply_lower(&rev, k).unwrap();
        want.reverse();
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(g.to_bits(), w.to_bits());
        }
    }

    #[test]
    fn distance_operator_is_symmetric(
        x in signal_strategy(48),
        z_seed in signal_strategy(48),
        k in 1u32..=3,
    ) {
        let n = x.len();
        let z: Vec<f64> = z_seed.iter().cycle().take(n).copied().collect();
        let g = Grid1d::new(n, 0.37, k).unwrap();
        let dx = apply_distance_1d(&x, &g, None).unwrap();
        let dz = apply_distance_1d(&z, &g, None).unwrap();
        let lhs: f64 = x.iter().zip(&dz).map(|(a, b)| a * b).sum();
        let rhs: f64 = z.iter().zip(&dx).map(|(a, b)| a * b).sum();
        let scale = lhs.abs().max(rhs.abs()).max(1e-30);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn fast_multiply_matches_dense_oracle(
        x in signal_strategy(96),
        k in 1u32..=3,
        h in 0.01f64..2.0,
    ) {
        let n = x.len();
        let g = Grid1d::new(n, h, k).unwrap();
        let got = apply_distance_1d(&x, &g, None).unwrap();
        let d = dense_distance_matrix(&Grid::Line(g), false).unwrap();
        let want: Vec<f64> = d
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
        prop_assert!(num / den <= 1e-12, "rel err {}", num / den);
    }

    #[test]
    fn triple_product_matches_naive(
        seed in 0u64..1000,
        m in 2usize..40,
        n in 2usize..40,
        k in 1u32..=2,
    ) {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gx = Grid1d::new(m, 1.0, k).unwrap();
        let gy = Grid1d::new(n, 0.5, k).unwrap();
        let plan = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
        let fast = triple_product_1d(&plan, &gx, &gy).unwrap();
        let naive = naive_triple_product(&plan, &Grid::Line(gx), &Grid::Line(gy), false).unwrap();
        let num = fastgw::plan::frobenius_diff(&fast, &naive);
        let den: f64 = naive.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
        prop_assert!(num / den <= 1e-12, "rel err {}", num / den);
    }

    #[test]
    fn entropy_is_permutation_invariant(values in prop::collection::vec(0.0f64..1.0, 4..40)) {
        let n = values.len();
        let a = Array2::from_shape_vec((1, n), values.clone()).unwrap();
        let mut shuffled = values.clone();
        // deterministic rotation-style permutation
        shuffled.rotate_left(n / 3 + 1);
        let b = Array2::from_shape_vec((1, n), shuffled).unwrap();
        let ha = entropy_of(&a).unwrap();
        let hb = entropy_of(&b).unwrap();
        prop_assert!((ha - hb).abs() <= 1e-12 * ha.abs().max(1.0));
    }

    #[test]
    fn measure_validation_is_idempotent(w in weights_strategy(50)) {
        let w = normalized(w);
        let g = Grid1d::new(w.len(), 1.0, 1).unwrap();
        let m = DiscreteMeasure::new(w, g).unwrap();
        let again = fastgw::validate_measure(m.clone()).unwrap();
        prop_assert_eq!(m.weights().to_vec(), again.weights().to_vec());
    }

    #[test]
    fn binomial_table_satisfies_pascal(order in 2usize..30) {
        let t: BinomialTable<f64> = BinomialTable::new(order);
        for r in 2..=order {
            prop_assert_eq!(t.entry(r, 1), 1.0);
            prop_assert_eq!(t.entry(r, r), 1.0);
            for s in 2..r {
                prop_assert_eq!(t.entry(r, s), t.entry(r - 1, s - 1) + t.entry(r - 1, s));
            }
        }
    }

    #[test]
    fn sinkhorn_plans_have_unit_mass_and_feasible_marginals(
        uw in weights_strategy(24),
        vw in weights_strategy(24),
        seed in 0u64..100,
    ) {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let uw = normalized(uw);
        let vw = normalized(vw);
        let (m, n) = (uw.len(), vw.len());
        let u = DiscreteMeasure::new(uw, Grid1d::new(m, 1.0, 1).unwrap()).unwrap();
        let v = DiscreteMeasure::new(vw, Grid1d::new(n, 1.0, 1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
        let (plan, run) = sinkhorn(&cost, &u, &v, 0.1, 10_000, 1e-9, true).unwrap();
        prop_assert!(run.converged);
        prop_assert!(plan.marginal_violation() <= 1e-9);
        prop_assert!((plan.total_mass() - 1.0).abs() <= 1e-9);
        prop_assert!(plan.values().iter().all(|g| *g > 0.0));
    }
}
