use proptest::collection::vec;
use proptest::prelude::*;

use csbsd::detection::{build_weights, detect_states};
use csbsd::estimation::{mmse_on_support, objective_gradient};
use csbsd::model::{self, SparseSignal};
use csbsd::{ConvMode, DiscreteDensity, PriorParams, SensingGraph, ValueGrid};

const N_D: usize = 32;

fn grid() -> ValueGrid {
    ValueGrid::for_signal(N_D, 1.0).unwrap()
}

fn density() -> impl Strategy<Value = DiscreteDensity> {
    vec(0.0..1.0f64, N_D).prop_filter_map("all-zero weights", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| DiscreteDensity::from_mass(grid(), w.iter().map(|v| v / total).collect()).unwrap())
    })
}

fn max_abs(a: &DiscreteDensity, b: &DiscreteDensity) -> f64 {
    a.mass().iter().zip(b.mass()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dense_matvec(graph: &SensingGraph, x: &[f64]) -> Vec<f64> {
    graph
        .to_dense()
        .iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Graph plus a matching signal vector.
fn graph_and_signal(max_n: usize) -> impl Strategy<Value = (SensingGraph, Vec<f64>)> {
    (1usize..=max_n, 1usize..=max_n, 1usize..=4, any::<u64>()).prop_flat_map(|(n, m, l, seed)| {
        let l = l.min(m);
        let graph = SensingGraph::generate(n, m, l, seed).unwrap();
        (Just(graph), vec(-10.0..10.0f64, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_conserves_mass(a in density(), b in density()) {
        for mode in [ConvMode::Circular, ConvMode::Linear] {
            let c = a.convolve(&b, mode).unwrap();
            prop_assert!((c.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_convolution_commutes_and_associates(a in density(), b in density(), c in density()) {
        let ab = a.convolve_fft(&b).unwrap();
        prop_assert!(max_abs(&ab, &b.convolve_fft(&a).unwrap()) < 1e-10);
        let left = ab.convolve_fft(&c).unwrap();
        let right = a.convolve_fft(&b.convolve_fft(&c).unwrap()).unwrap();
        prop_assert!(max_abs(&left, &right) < 1e-10);
        let many = DiscreteDensity::convolve_fft_many(&[&a, &b, &c]).unwrap();
        prop_assert!(max_abs(&many, &left) < 1e-10);
    }

    #[test]
    fn mirror_distributes_over_convolution(a in density(), b in density()) {
        let lhs = a.convolve_fft(&b).unwrap().mirror();
        let rhs = a.mirror().convolve_fft(&b.mirror()).unwrap();
        prop_assert!(max_abs(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn mar_is_scale_invariant(x in vec(-50.0..50.0f64, 1..40), c in prop_oneof![-100.0..-1e-3f64, 1e-3..100.0f64]) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let (a, b) = (model::mar(&x).unwrap(), model::mar(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn mse_is_permutation_invariant(pairs in vec((-5.0..5.0f64, -5.0..5.0f64), 2..40), seed in any::<u64>()) {
        let (est, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(truth.iter().any(|v| *v != 0.0));
        let mut order: Vec<usize> = (0..truth.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = model::derive_seed(s, &[i as u64]);
            order.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let pe: Vec<f64> = order.iter().map(|&i| est[i]).collect();
        let pt: Vec<f64> = order.iter().map(|&i| truth[i]).collect();
        let (a, b) = (model::mse(&est, &truth).unwrap(), model::mse(&pe, &pt).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn matvec_matches_dense((graph, x) in graph_and_signal(32)) {
        prop_assert!(rel_err(&graph.matvec(&x).unwrap(), &dense_matvec(&graph, &x)) < 1e-12);
        let y: Vec<f64> = (0..graph.m()).map(|j| j as f64 - 3.5).collect();
        let dense = graph.to_dense();
        let back: Vec<f64> = (0..graph.n()).map(|i| (0..graph.m()).map(|j| dense[j][i] * y[j]).sum()).collect();
        prop_assert!(rel_err(&graph.matvec_transpose(&y).unwrap(), &back) < 1e-12);
    }

    #[test]
    fn columns_have_weight_and_energy_l(n in 1usize..64, m in 4usize..64, l in 1usize..=4, seed in any::<u64>()) {
        let graph = SensingGraph::generate(n, m, l, seed).unwrap();
        prop_assert!(graph.is_regular());
        let dense = graph.to_dense();
        for i in 0..n {
            prop_assert_eq!(graph.col_edges(i).len(), l);
            let energy: f64 = dense.iter().map(|row| row[i] * row[i]).sum();
            prop_assert_eq!(energy, l as f64);
        }
    }

    #[test]
    fn submatrix_matches_masked_matvec((graph, x) in graph_and_signal(12), mask in any::<u16>()) {
        let states: Vec<bool> = (0..graph.n()).map(|i| mask >> i & 1 == 1).collect();
        prop_assume!(states.iter().any(|s| *s));
        let sub = graph.submatrix_on_support(&states).unwrap();
        let x_supp: Vec<f64> = sub.columns.iter().map(|&i| x[i]).collect();
        let masked: Vec<f64> = x.iter().zip(&states).map(|(v, s)| if *s { *v } else { 0.0 }).collect();
        prop_assert!(rel_err(&sub.graph.matvec(&x_supp).unwrap(), &graph.matvec(&masked).unwrap()) < 1e-12);
    }

    #[test]
    fn snr_round_trip(target in 0.0..60.0f64, seed in any::<u64>()) {
        let graph = SensingGraph::generate(64, 32, 4, seed).unwrap();
        let mut values = vec![0.0; 64];
        values[(seed % 64) as usize] = 3.0;
        values[((seed >> 8) % 64) as usize] -= 1.25;
        let signal = SparseSignal::from_values(values);
        let sigma = model::sigma_for_target_snr(&graph, &signal, target).unwrap();
        prop_assert!((model::snr_db(&graph, &signal, sigma).unwrap() - target).abs() < 0.01);
    }

    #[test]
    fn sense_matches_dense_oracle(seed in any::<u64>(), sigma in 0.0..3.0f64) {
        let prior = PriorParams::new(0.2, 5.0, sigma).unwrap();
        let grid = ValueGrid::for_signal(64, 5.0).unwrap();
        let graph = SensingGraph::generate(40, 20, 3, seed).unwrap();
        let signal = model::generate_signal(40, &prior, &grid, seed ^ 1);
        let meas = model::sense(&signal, &graph, sigma, seed ^ 2).unwrap();
        let clean: Vec<f64> = meas.z.iter().zip(&meas.noise).map(|(z, n)| z - n).collect();
        prop_assert!(rel_err(&clean, &dense_matvec(&graph, &signal.values)) < 1e-12);
    }

    #[test]
    fn estimator_is_linear_in_z(
        seed in any::<u64>(),
        z1 in vec(-20.0..20.0f64, 16),
        z2 in vec(-20.0..20.0f64, 16),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let graph = SensingGraph::generate(6, 16, 4, seed).unwrap();
        let prior = PriorParams::new(0.1, 4.0, 0.7).unwrap();
        let mix: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| alpha * a + beta * b).collect();
        let x1 = mmse_on_support(&graph, &z1, &prior).unwrap();
        let x2 = mmse_on_support(&graph, &z2, &prior).unwrap();
        let combined: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(rel_err(&mmse_on_support(&graph, &mix, &prior).unwrap(), &combined) < 1e-10);
    }

    #[test]
    fn estimator_shrinks_least_squares(seed in any::<u64>(), z in vec(-20.0..20.0f64, 24), sigma_n in 0.1..5.0f64) {
        let graph = SensingGraph::generate(5, 24, 4, seed).unwrap();
        let ridge = mmse_on_support(&graph, &z, &PriorParams::new(0.1, 3.0, sigma_n).unwrap()).unwrap();
        let ls = mmse_on_support(&graph, &z, &PriorParams::new(0.1, 3.0, 0.0).unwrap()).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm(&ridge) <= norm(&ls) * (1.0 + 1e-12));
    }

    #[test]
    fn estimator_recovers_noiseless_signal(seed in any::<u64>(), x in vec(-10.0..10.0f64, 5)) {
        let graph = SensingGraph::generate(5, 24, 4, seed).unwrap();
        let dense = graph.to_dense();
        // Full column rank is needed for exact recovery.
        let rank = {
            let m = nalgebra::DMatrix::from_fn(24, 5, |r, c| dense[r][c]);
            m.rank(1e-9)
        };
        prop_assume!(rank == 5);
        let z = graph.matvec(&x).unwrap();
        let prior = PriorParams::new(0.1, 10.0, 1e-8).unwrap();
        let est = mmse_on_support(&graph, &z, &prior).unwrap();
        prop_assert!(rel_err(&est, &x) < 1e-5);
        let grad = objective_gradient(&graph, &z, &prior, &est).unwrap();
        let scale = 1.0 / prior.sigma_n().powi(2);
        prop_assert!(grad.iter().all(|g| (g / scale).abs() < 1e-8));
    }

    #[test]
    fn estimator_gradient_vanishes(seed in any::<u64>(), z in vec(-30.0..30.0f64, 20), sigma_n in 0.2..3.0f64) {
        let graph = SensingGraph::generate(8, 20, 3, seed).unwrap();
        let prior = PriorParams::new(0.1, 10.0, sigma_n).unwrap();
        let est = mmse_on_support(&graph, &z, &prior).unwrap();
        let grad = objective_gradient(&graph, &z, &prior, &est).unwrap();
        prop_assert!(grad.iter().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn detection_ignores_posterior_scale(posts in vec(density(), 1..8), scale in 1e-6..1e6f64) {
        let prior = PriorParams::new(0.05, 1.0, 0.1).unwrap();
        let weights = build_weights(&grid(), &prior).unwrap();
        let scaled: Vec<DiscreteDensity> = posts
            .iter()
            .map(|p| DiscreteDensity::from_mass(grid(), p.mass().iter().map(|m| m * scale).collect()).unwrap())
            .collect();
        prop_assert_eq!(
            detect_states(&posts, &weights).unwrap().states,
            detect_states(&scaled, &weights).unwrap().states
        );
    }
}

#[test]
fn estimator_permutation_equivariance() {
    use csbsd::sensing::Edge;
    let graph = SensingGraph::generate(6, 18, 4, 11).unwrap();
    let perm = [3usize, 0, 5, 1, 4, 2];
    let edges: Vec<Edge> = graph
        .edges()
        .iter()
        .map(|e| Edge {
            row: e.row,
            col: perm.iter().position(|&p| p == e.col).unwrap(),
            sign: e.sign,
        })
        .collect();
    let permuted = SensingGraph::from_edges(6, 18, edges).unwrap();
    let z: Vec<f64> = (0..18).map(|j| ((j * 7) % 11) as f64 - 5.0).collect();
    let prior = PriorParams::new(0.1, 5.0, 0.8).unwrap();
    let a = mmse_on_support(&graph, &z, &prior).unwrap();
    let b = mmse_on_support(&permuted, &z, &prior).unwrap();
    for (k, &p) in perm.iter().enumerate() {
        assert!((b[k] - a[p]).abs() < 1e-10);
    }
}

#[test]
fn sign_balance() {
    let graph = SensingGraph::generate(2500, 500, 4, 3).unwrap();
    let total = graph.edges().len() as f64;
    let plus = graph.edges().iter().filter(|e| e.sign > 0).count() as f64;
    let sd = (0.25 / total).sqrt();
    assert!((plus / total - 0.5).abs() < 3.0 * sd);
}

#[test]
fn prior_spike_dominates_at_half_sparsity() {
    let prior = PriorParams::new(0.5, 1.0, 0.1).unwrap();
    let d = DiscreteDensity::spike_slab_prior(grid(), &prior).unwrap();
    let zero = grid().zero_index();
    let spike = d.mass()[zero];
    assert!(d.mass().iter().enumerate().all(|(k, m)| k == zero || *m < spike));
}
