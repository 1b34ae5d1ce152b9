mod common;

use common::*;
use gcnsbm::mc::{chunked_sums, make_pool, sample_mc};
use gcnsbm::potentials::{argmax_out, argmax_w, prox_loss};
use gcnsbm::simulator::gcn_forward;
use gcnsbm::state_evolution::{solve_with_samples, SolveConfig};
use gcnsbm::{DataParams, GcnParams, LossKind};
use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn loss_strategy() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::Quadratic), Just(LossKind::Logistic), Just(LossKind::Hinge)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn prox_matches_grid_search(
        loss in loss_strategy(),
        pos in any::<bool>(),
        mean in -4.0f64..4.0,
        var in 0.01f64..5.0,
    ) {
        let y = if pos { 1.0 } else { -1.0 };
        let h = prox_loss(loss, y, mean, var, true).unwrap();
        let (coarse, refined) = prox_oracle(loss, y, mean, var, h);
        prop_assert!((h - coarse).abs() <= 1e-2, "{h} vs grid {coarse}");
        prop_assert!((h - refined).abs() <= 1e-5, "{h} vs refined {refined}");
        prop_assert_eq!(prox_loss(loss, y, mean, var, false).unwrap(), mean);
    }

    #[test]
    fn prox_is_odd_in_the_label(loss in loss_strategy(), mean in -4.0f64..4.0, var in 0.01f64..5.0) {
        let a = prox_loss(loss, 1.0, mean, var, true).unwrap();
        let b = prox_loss(loss, -1.0, -mean, var, true).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn argmax_w_is_stationary(r in 1e-3f64..1e3, vhat in 0.0f64..10.0, field in -10.0f64..10.0) {
        let w = argmax_w(r, vhat, field).unwrap();
        prop_assert!((-(r + vhat) * w + field).abs() <= 1e-12 * field.abs().max(1.0));
    }

    #[test]
    fn output_channel_matches_grid_search(seed in any::<u64>(), loss in loss_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = random_out_input(&mut rng);
        let (h, s) = argmax_out(&input, loss).unwrap();
        let ((hc, _), (hr, sr)) = out_oracle(&input, loss, h, s);
        prop_assert!((h - hc).abs() <= 1e-2, "{h} vs grid {hc}");
        prop_assert!((h - hr).abs() <= 1e-5 && (s - sr).abs() <= 1e-5, "({h}, {s}) vs ({hr}, {sr})");
    }

    #[test]
    fn forward_matches_dense_product(seed in any::<u64>(), c in -2.0f64..2.0, sym in any::<bool>()) {
        let mut ds = tiny_dataset(8, 4, seed);
        ds.symmetrized = sym;
        let w = Array1::from_shape_fn(4, |i| (i as f64 + 0.5) * (seed % 7) as f64 - 1.0);
        let h = gcn_forward(&ds, w.view(), c);
        let d = dense_forward(&ds, &w, c);
        for (a, b) in h.iter().zip(&d) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn forward_edge_cases() {
    let ds = tiny_dataset(8, 4, 1);
    assert!(gcn_forward(&ds, Array1::zeros(4).view(), 1.0).iter().all(|&v| v == 0.0));
    let mut zero = ds.clone();
    if let gcnsbm::simulator::Adjacency::GaussianEquivalent { lambda, noise, .. } = &mut zero.adjacency {
        *lambda = 0.0;
        noise.fill(0.0);
    }
    let w = Array1::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    let h = gcn_forward(&zero, w.view(), 1.0);
    let expect = zero.features.dot(&w) / 8f64.sqrt();
    for (a, b) in h.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-14);
    }
}

#[test]
fn monte_carlo_is_bitwise_deterministic_across_workers() {
    let mc = sample_mc(40_000, 11);
    assert_eq!(mc, sample_mc(40_000, 11));
    let f = |r: std::ops::Range<usize>, acc: &mut [f64; 2]| {
        for i in r {
            acc[0] += mc.xi[i] * mc.zeta[i];
            acc[1] += mc.chi[i].sin();
        }
    };
    let one = chunked_sums::<2, _>(mc.len(), None, f);
    for w in [2, 3, 8] {
        let pool = make_pool(w);
        assert_eq!(one, chunked_sums::<2, _>(mc.len(), pool.as_ref(), f));
    }
    let dp = DataParams::csbm(4.0, 1.0, 1.0, 0.3);
    let gp = GcnParams::new(LossKind::Logistic, 1.0, 1.0);
    let mc = sample_mc(20_000, 3);
    let base = SolveConfig {
        mc_count: 20_000,
        max_iter: 30,
        ..SolveConfig::default()
    };
    let a = solve_with_samples(&dp, &gp, &base, &mc).unwrap();
    let b = solve_with_samples(&dp, &gp, &SolveConfig { workers: 5, ..base }, &mc).unwrap();
    assert_eq!(a.theta.to_array().map(f64::to_bits), b.theta.to_array().map(f64::to_bits));
}
