//! Convergence analysis checked against independent oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfl_core::alloc::{min_delay_power, optimal_power};
use wfl_core::bound::{
    asymptotic_gap, convergence_factor, curvature, empirical_gap, fit_zeta, pooled_hessian, theorem1_bound,
    worst_case_missing, worst_edge_per, CurvatureEstimate, Participation,
};
use wfl_core::fl::{generate_regression_data, optimal_model, run_training, RegressionTask};
use wfl_core::{AllocationDecision, EdgeWeightMatrix, FadingExpectation, LinkModel, ModelVector, NetworkParams, UserProfile};

fn table_dataset(seed: u64) -> wfl_core::Dataset {
    let counts: Vec<usize> = (0..15).map(|i| [12, 10, 8, 4, 2][i % 5]).collect();
    generate_regression_data(&mut ChaCha8Rng::seed_from_u64(seed), &counts, &RegressionTask::default())
}

/// Extreme eigenvalues of a symmetric 2×2 matrix by power iteration on `H`
/// and on `tr(H)·I - H`.
fn power_iteration(h: [[f64; 2]; 2]) -> (f64, f64) {
    let top = |m: [[f64; 2]; 2]| {
        let mut v = [1.0, 0.3];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
            lambda = (v[0] * w[0] + v[1] * w[1]) / (v[0] * v[0] + v[1] * v[1]);
            v = [w[0] / n, w[1] / n];
        }
        lambda
    };
    let l = top(h);
    let tr = h[0][0] + h[1][1];
    (l, tr - l)
}

#[test]
fn curvature_matches_power_iteration() {
    for seed in 0..5 {
        let data = table_dataset(seed);
        let h = pooled_hessian(&data);
        let (l, mu) = power_iteration([[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]]);
        let c = curvature(&data).unwrap();
        assert!((c.lipschitz_l - l).abs() < 1e-8);
        assert!((c.strong_convexity_mu - mu).abs() < 1e-8);
    }
}

#[test]
fn mixed_factor_by_hand() {
    let c = CurvatureEstimate { lipschitz_l: 1.5, strong_convexity_mu: 0.25 };
    let p = Participation { selection: vec![true, true], per: vec![0.1, 0.2], sample_counts: vec![12, 10] };
    // S = 1.2 + 2.0 = 3.2; A = 1 - 1/6 + 4 · 0.25 · 0.4 · 3.2 / (1.5 · 22).
    let expected = 1.0 - 0.25 / 1.5 + 4.0 * 0.25 * 0.4 * 3.2 / (1.5 * 22.0);
    assert!((convergence_factor(&p, &c, 0.4) - expected).abs() < 1e-15);
}

#[test]
fn zeta_fit_holds_at_every_sample_of_every_visited_model() {
    let data = table_dataset(11);
    let c = curvature(&data).unwrap();
    let mut d = AllocationDecision::empty(15);
    for i in 0..10 {
        d.selection[i] = true;
        d.rb[i] = Some(i);
        d.per[i] = 0.05 * (i % 3) as f64;
    }
    let run = run_training(&data, &d, c.step_size(), 100, ModelVector(vec![3.0, -4.0]), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let points: Vec<ModelVector> = run.models().cloned().collect();
    let part = Participation::from_decision(&d, &data.sample_counts());
    let fit = fit_zeta(&data, &points, &part).unwrap();
    // Independent scan with hand-written gradients.
    let n = data.total_samples() as f64;
    for g in &points {
        let mut full = [0.0, 0.0];
        for (x, y) in data.pooled() {
            let r = g.0[0] * x[0] + g.0[1] * x[1] - y;
            full[0] += r * x[0] / n;
            full[1] += r * x[1] / n;
        }
        let full_sq = full[0] * full[0] + full[1] * full[1];
        for (x, y) in data.pooled() {
            let r = g.0[0] * x[0] + g.0[1] * x[1] - y;
            let sq = r * r * (x[0] * x[0] + x[1] * x[1]);
            assert!(sq <= fit.zeta1 + fit.zeta2 * full_sq + 1e-9 * sq.max(1.0));
        }
    }
    // With ζ2 forced to zero, ζ1 is the largest squared sample gradient.
    let free = Participation::error_free(&data.sample_counts());
    let fit0 = fit_zeta(&data, &points, &free).unwrap();
    let max_sq = points
        .iter()
        .flat_map(|g| data.pooled().map(move |(x, y)| {
            let r = g.0[0] * x[0] + g.0[1] * x[1] - y;
            r * r * (x[0] * x[0] + x[1] * x[1])
        }))
        .fold(0.0f64, f64::max);
    assert!(fit0.zeta2 > 0.0 || (fit0.zeta1 - max_sq).abs() < 1e-9 * max_sq);
}

#[test]
fn empirical_gap_trivial_cases() {
    let data = table_dataset(3);
    let opt = optimal_model(&data).unwrap();
    let c = curvature(&data).unwrap();
    let mut d = AllocationDecision::empty(15);
    d.selection.fill(true);
    d.rb = (0..15).map(Some).collect();
    let run = run_training(&data, &d, c.step_size(), 10, ModelVector::zeros(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let gap = empirical_gap(std::slice::from_ref(&run), &opt, &data).unwrap();
    let f_star = wfl_core::fl::global_loss(&data, &opt).unwrap();
    for (g, l) in gap.iter().zip(run.losses()) {
        assert_eq!(*g, l - f_star);
    }
    d.per.fill(1.0);
    let stuck = run_training(&data, &d, c.step_size(), 10, ModelVector::zeros(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let gap = empirical_gap(&[stuck.clone(), stuck], &opt, &data).unwrap();
    assert!(gap.iter().all(|&g| g == gap[0]));
}

fn params() -> impl Strategy<Value = (Vec<usize>, Vec<bool>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|u| {
        (
            prop::collection::vec(1usize..13, u),
            prop::collection::vec(any::<bool>(), u),
            prop::collection::vec(0.0f64..1.0, u),
        )
    })
}

proptest! {
    #[test]
    fn gap_grows_with_loss_and_shrinks_with_selection(
        (k, a, q) in params(),
        user in 0usize..8,
        bump in 0.0f64..0.5,
        zeta1 in 0.0f64..10.0,
        zeta2 in 0.0f64..0.25,
    ) {
        let user = user % k.len();
        let c = CurvatureEstimate { lipschitz_l: 1.3, strong_convexity_mu: 0.07 };
        let base = Participation { selection: a.clone(), per: q.clone(), sample_counts: k.clone() };
        let Ok(g0) = asymptotic_gap(&base, &c, zeta1, zeta2) else { return Ok(()) };
        let mut worse = base.clone();
        worse.per[user] = (worse.per[user] + bump).min(1.0);
        if let Ok(g1) = asymptotic_gap(&worse, &c, zeta1, zeta2) {
            prop_assert!(g1 >= g0 * (1.0 - 1e-12));
        }
        let mut more = base.clone();
        more.selection[user] = true;
        let g2 = asymptotic_gap(&more, &c, zeta1, zeta2).unwrap();
        prop_assert!(g2 <= g0 * (1.0 + 1e-12) + 1e-300);
        let a_f = convergence_factor(&base, &c, zeta2);
        prop_assert!((theorem1_bound(1_000_000, a_f, zeta1, &c, &base, 5.0) - g0).abs() <= 1e-9 * g0.max(1e-3));
    }
}

/// Worst `Σ K_i ρ_i` over maximum-cardinality matchings by exhaustive search.
fn brute_worst(per: &[Option<f64>], k: &[usize], r: usize) -> f64 {
    fn go(i: usize, per: &[Option<f64>], k: &[usize], r: usize, used: &mut Vec<bool>, count: usize, w: f64, best: &mut (usize, f64)) {
        if i == k.len() {
            if count > best.0 || (count == best.0 && w > best.1) {
                *best = (count, w);
            }
            return;
        }
        go(i + 1, per, k, r, used, count, w + k[i] as f64, best);
        for n in 0..r {
            if let (false, Some(q)) = (used[n], per[i * r + n]) {
                used[n] = true;
                go(i + 1, per, k, r, used, count + 1, w + k[i] as f64 * q, best);
                used[n] = false;
            }
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    go(0, per, k, r, &mut vec![false; r], 0, 0.0, &mut best);
    best.1
}

#[test]
fn worst_case_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..60 {
        let u = rng.random_range(1..=6);
        let r = rng.random_range(1..=6);
        let mut params = NetworkParams::reference(r);
        params.uplink_interference_w = (0..r).map(|_| 10f64.powf(rng.random_range(-9.0..-6.3))).collect();
        let link = LinkModel::new(params, &FadingExpectation::default()).unwrap();
        let users: Vec<UserProfile> = (0..u)
            .map(|i| UserProfile::reference(500.0 * rng.random::<f64>().sqrt(), [12, 10, 8, 4, 2][i % 5]))
            .collect();
        let m = EdgeWeightMatrix::build(&link, &users);
        let per = worst_edge_per(&link, &users, &m);
        // Worst PER sits at the lowest delay-feasible power.
        for (idx, q) in per.iter().enumerate() {
            if let Some(q) = q {
                let (i, n) = (idx / r, idx % r);
                let p_star = optimal_power(&link, &users[i], n).power_w;
                let p_min = min_delay_power(&link, &users[i], n, p_star).unwrap();
                assert!(*q >= link.packet_error_rate(&users[i], n, p_star));
                assert!(link.round_delay(&users[i], n, p_min) <= 0.5);
            }
        }
        let w = worst_case_missing(&link, &users, &m);
        let b = brute_worst(&per, m.sample_counts(), r);
        assert!((w.weight - b).abs() < 1e-9, "hungarian {} vs exhaustive {b}", w.weight);
    }
}
