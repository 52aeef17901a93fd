//! Joint user selection, RB assignment and transmit power.
//!
//! For a fixed RB the packet error rate only falls with power while energy
//! only rises, so each (user, RB) edge has a single best power: the largest
//! one the energy budget allows. With powers fixed per edge, the remaining
//! problem is a min-weight bipartite matching between users and RBs with
//! weights `K_i (q_in - 1)` on edges that meet the delay and energy budgets.

mod baselines;
mod brute;
pub mod hungarian;

pub use baselines::{baseline_min_sum_per, baseline_optselect_randomrb, baseline_random_all};
pub use brute::{brute_force_assign, BRUTE_FORCE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::phy::{LinkModel, UserProfile};

const BISECTION_MAX_ITERS: usize = 200;
const ENERGY_TOLERANCE_J: f64 = 1e-9;

/// Result of the per-edge power search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolution {
    pub power_w: f64,
    /// False when no positive power meets the energy budget.
    pub feasible_energy: bool,
}

/// Largest power in `(0, P_max]` whose round energy stays within `γ_E`.
///
/// Energy is strictly increasing in power, so the answer is `P_max` when the
/// budget does not bind and otherwise the root of `e(P) = γ_E`, found by
/// bisection. The returned power always satisfies `e(P) <= γ_E`.
pub fn optimal_power(link: &LinkModel, user: &UserProfile, rb: usize) -> PowerSolution {
    let params = link.params();
    let budget = params.energy_budget_j;
    let p_max = params.max_user_power_w;
    let infeasible = PowerSolution {
        power_w: 0.0,
        feasible_energy: false,
    };
    if user.training_energy_j() >= budget {
        return infeasible;
    }
    let energy = |p: f64| link.user_energy(user, rb, p);
    if energy(p_max) <= budget {
        return PowerSolution {
            power_w: p_max,
            feasible_energy: true,
        };
    }
    // e(P) tends to a positive limit as P -> 0; below it nothing is feasible.
    let mut lo = p_max * 1e-12;
    if energy(lo) > budget {
        return infeasible;
    }
    let mut hi = p_max;
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if energy(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        // Keep going past the energy tolerance until the bracket collapses, so
        // no feasible power is left above the returned one.
        if budget - energy(lo) <= ENERGY_TOLERANCE_J && (hi - lo) <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    PowerSolution {
        power_w: lo,
        feasible_energy: true,
    }
}

/// Smallest power in `(0, ceiling]` meeting the round-delay budget, if any.
pub fn min_delay_power(
    link: &LinkModel,
    user: &UserProfile,
    rb: usize,
    ceiling: f64,
) -> Option<f64> {
    let budget = link.params().delay_budget_s;
    let meets = |p: f64| link.round_delay(user, rb, p) <= budget;
    if ceiling <= 0.0 || !meets(ceiling) {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = ceiling;
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Everything known about one (user, RB) edge at its optimal power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvaluation {
    pub power_w: f64,
    pub per: f64,
    pub delay_s: f64,
    pub energy_j: f64,
    /// Delay and energy budgets both hold at `power_w`.
    pub feasible: bool,
}

pub fn evaluate_edge(link: &LinkModel, user: &UserProfile, rb: usize) -> EdgeEvaluation {
    let power = optimal_power(link, user, rb);
    if !power.feasible_energy {
        return EdgeEvaluation {
            power_w: 0.0,
            per: 1.0,
            delay_s: f64::INFINITY,
            energy_j: f64::INFINITY,
            feasible: false,
        };
    }
    let p = power.power_w;
    let delay_s = link.round_delay(user, rb, p);
    let energy_j = link.user_energy(user, rb, p);
    let params = link.params();
    EdgeEvaluation {
        power_w: p,
        per: link.packet_error_rate(user, rb, p),
        delay_s,
        energy_j,
        feasible: delay_s <= params.delay_budget_s && energy_j <= params.energy_budget_j,
    }
}

/// `ψ_in = K_i (q_in - 1)` when the edge is feasible at its optimal power, else 0.
pub fn edge_weight(link: &LinkModel, user: &UserProfile, rb: usize) -> f64 {
    let edge = evaluate_edge(link, user, rb);
    weight_of(&edge, user.sample_count)
}

fn weight_of(edge: &EdgeEvaluation, sample_count: usize) -> f64 {
    if edge.feasible {
        sample_count as f64 * (edge.per - 1.0)
    } else {
        0.0
    }
}

/// Dense U×R table of edge weights and the per-edge evaluations behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    users: usize,
    rbs: usize,
    sample_counts: Vec<usize>,
    weights: Vec<f64>,
    edges: Vec<EdgeEvaluation>,
}

impl EdgeWeightMatrix {
    /// Evaluates every edge. Rows are computed in parallel; output order is fixed.
    pub fn build(link: &LinkModel, users: &[UserProfile]) -> Self {
        use rayon::prelude::*;
        let rbs = link.params().rb_count;
        let edges: Vec<EdgeEvaluation> = users
            .par_iter()
            .flat_map_iter(|user| (0..rbs).map(move |rb| evaluate_edge(link, user, rb)))
            .collect();
        let sample_counts: Vec<usize> = users.iter().map(|u| u.sample_count).collect();
        let weights = edges
            .iter()
            .enumerate()
            .map(|(k, e)| weight_of(e, sample_counts[k / rbs]))
            .collect();
        Self {
            users: users.len(),
            rbs,
            sample_counts,
            weights,
            edges,
        }
    }

    /// Matrix from raw weights (each row one user). Negative entries are feasible
    /// edges with `q = 1 + ψ/K`; zeros are disabled edges.
    pub fn from_weights(weights: &[Vec<f64>], sample_counts: &[usize]) -> Self {
        assert_eq!(weights.len(), sample_counts.len());
        let rbs = weights.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(weights.len() * rbs);
        let mut edges = Vec::with_capacity(weights.len() * rbs);
        for (row, &k) in weights.iter().zip(sample_counts) {
            assert_eq!(row.len(), rbs, "ragged weight matrix");
            for &w in row {
                assert!(w <= 0.0, "edge weights must be <= 0");
                flat.push(w);
                edges.push(EdgeEvaluation {
                    power_w: 0.0,
                    per: (1.0 + w / k as f64).clamp(0.0, 1.0),
                    delay_s: 0.0,
                    energy_j: 0.0,
                    feasible: w < 0.0,
                });
            }
        }
        Self {
            users: weights.len(),
            rbs,
            sample_counts: sample_counts.to_vec(),
            weights: flat,
            edges,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn rbs(&self) -> usize {
        self.rbs
    }

    pub fn sample_counts(&self) -> &[usize] {
        &self.sample_counts
    }

    pub fn weight(&self, user: usize, rb: usize) -> f64 {
        self.weights[user * self.rbs + rb]
    }

    pub fn edge(&self, user: usize, rb: usize) -> &EdgeEvaluation {
        &self.edges[user * self.rbs + rb]
    }

    pub fn feasible(&self, user: usize, rb: usize) -> bool {
        self.edge(user, rb).feasible
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_samples(&self) -> usize {
        self.sample_counts.iter().sum()
    }

    /// Decision for a matching given as `user -> RB`. Users on weight-0 edges are
    /// reported unselected; the objective is `Σ K_i + Σ ψ` over the kept edges.
    pub fn decision_from_matching(&self, matching: &[Option<usize>]) -> AllocationDecision {
        assert_eq!(matching.len(), self.users);
        let mut decision = AllocationDecision::empty(self.users);
        let mut objective = self.total_samples() as f64;
        for (i, rb) in matching.iter().enumerate() {
            let Some(n) = *rb else { continue };
            let w = self.weight(i, n);
            if w >= 0.0 {
                continue;
            }
            let edge = self.edge(i, n);
            decision.assign(i, n, edge.power_w, edge.per, edge.delay_s, edge.energy_j);
            objective += w;
        }
        decision.objective = objective;
        decision
    }
}

/// User selection, RB assignment and powers, with the per-user link figures they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub selection: Vec<bool>,
    pub rb: Vec<Option<usize>>,
    pub power_w: Vec<f64>,
    /// `q_i`; zero for unselected users.
    pub per: Vec<f64>,
    pub delay_s: Vec<f64>,
    pub energy_j: Vec<f64>,
    /// `Σ K_i (1 - a_i + a_i q_i)`.
    pub objective: f64,
}

impl AllocationDecision {
    pub fn empty(users: usize) -> Self {
        Self {
            selection: vec![false; users],
            rb: vec![None; users],
            power_w: vec![0.0; users],
            per: vec![0.0; users],
            delay_s: vec![0.0; users],
            energy_j: vec![0.0; users],
            objective: 0.0,
        }
    }

    pub(crate) fn assign(&mut self, user: usize, rb: usize, power: f64, per: f64, delay: f64, energy: f64) {
        self.selection[user] = true;
        self.rb[user] = Some(rb);
        self.power_w[user] = power;
        self.per[user] = per;
        self.delay_s[user] = delay;
        self.energy_j[user] = energy;
    }

    pub fn users(&self) -> usize {
        self.selection.len()
    }

    pub fn selected_count(&self) -> usize {
        self.selection.iter().filter(|&&a| a).count()
    }

    /// The 0/1 matrix `r_{i,n}`.
    pub fn rb_matrix(&self, rb_count: usize) -> Vec<Vec<u8>> {
        self.rb
            .iter()
            .map(|rb| {
                let mut row = vec![0u8; rb_count];
                if let Some(n) = rb {
                    row[*n] = 1;
                }
                row
            })
            .collect()
    }

    /// Recomputes `Σ K_i (1 - a_i + a_i q_i)` from the stored figures.
    pub fn recompute_objective(&self, sample_counts: &[usize]) -> f64 {
        self.selection
            .iter()
            .zip(&self.per)
            .zip(sample_counts)
            .map(|((&a, &q), &k)| if a { k as f64 * q } else { k as f64 })
            .sum()
    }

    /// Structural constraints: one RB per selected user, each RB used at most
    /// once, `0 <= P <= P_max`.
    pub fn check_structure(&self, rb_count: usize, max_power_w: f64) -> Result<(), String> {
        let mut used = vec![false; rb_count];
        for i in 0..self.users() {
            match (self.selection[i], self.rb[i]) {
                (true, Some(n)) => {
                    if n >= rb_count {
                        return Err(format!("user {i} holds RB {n} >= R = {rb_count}"));
                    }
                    if used[n] {
                        return Err(format!("RB {n} assigned twice"));
                    }
                    used[n] = true;
                }
                (false, None) => {}
                (a, rb) => return Err(format!("user {i}: selection {a} inconsistent with RB {rb:?}")),
            }
            let p = self.power_w[i];
            if !(0.0..=max_power_w).contains(&p) {
                return Err(format!("user {i}: power {p} outside [0, {max_power_w}]"));
            }
            if !(0.0..=1.0).contains(&self.per[i]) {
                return Err(format!("user {i}: PER {} outside [0, 1]", self.per[i]));
            }
        }
        Ok(())
    }

    /// Re-evaluates delay and energy at the returned powers and checks both budgets.
    pub fn verify(&self, link: &LinkModel, users: &[UserProfile]) -> Result<(), String> {
        let params = link.params();
        self.check_structure(params.rb_count, params.max_user_power_w)?;
        for (i, user) in users.iter().enumerate() {
            let Some(n) = self.rb[i] else { continue };
            let p = self.power_w[i];
            let delay = link.round_delay(user, n, p);
            if delay > params.delay_budget_s {
                return Err(format!("user {i} on RB {n}: delay {delay} s over budget"));
            }
            let energy = link.user_energy(user, n, p);
            if energy > params.energy_budget_j {
                return Err(format!("user {i} on RB {n}: energy {energy} J over budget"));
            }
        }
        Ok(())
    }
}

/// Proposed allocation: Hungarian matching on the edge weights.
pub fn hungarian_assign(matrix: &EdgeWeightMatrix) -> AllocationDecision {
    hungarian_assign_counted(matrix).0
}

/// As [`hungarian_assign`], also returning the solver's relaxation count.
pub fn hungarian_assign_counted(matrix: &EdgeWeightMatrix) -> (AllocationDecision, u64) {
    let solution = hungarian::solve(matrix.weights(), matrix.users(), matrix.rbs());
    (matrix.decision_from_matching(&solution.row_to_col), solution.iterations)
}
