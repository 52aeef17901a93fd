//! Reference allocators the proposed matching is compared against.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{hungarian, min_delay_power, AllocationDecision, EdgeWeightMatrix};
use crate::phy::{LinkModel, UserProfile};

/// Baseline (b): wireless-agnostic FL. Draws `min(U, R)` users and a random RB
/// for each, then a power uniformly from the edge's feasible interval
/// `[P_delay, P*]`. Users whose drawn edge cannot meet the budgets stay idle.
pub fn baseline_random_all<R: Rng + ?Sized>(
    rng: &mut R,
    link: &LinkModel,
    users: &[UserProfile],
    matrix: &EdgeWeightMatrix,
) -> AllocationDecision {
    let (u, r) = (matrix.users(), matrix.rbs());
    let mut user_order: Vec<usize> = (0..u).collect();
    user_order.shuffle(rng);
    let mut rb_order: Vec<usize> = (0..r).collect();
    rb_order.shuffle(rng);

    let mut decision = AllocationDecision::empty(u);
    for (&i, &n) in user_order.iter().zip(&rb_order) {
        let edge = matrix.edge(i, n);
        if !edge.feasible {
            continue;
        }
        let p_star = edge.power_w;
        let p_floor = min_delay_power(link, &users[i], n, p_star).unwrap_or(p_star);
        let p = if p_floor < p_star {
            rng.random_range(p_floor..=p_star)
        } else {
            p_star
        };
        let user = &users[i];
        decision.assign(
            i,
            n,
            p,
            link.packet_error_rate(user, n, p),
            link.round_delay(user, n, p),
            link.user_energy(user, n, p),
        );
    }
    decision.objective = objective_in_user_order(&decision, matrix.sample_counts());
    decision
}

/// Baseline (a): FL-aware selection over a random RB order. Users are visited
/// by descending `K_i`; each is offered the next unused RB of a random
/// permutation and keeps it if that edge is feasible at its optimal power.
pub fn baseline_optselect_randomrb<R: Rng + ?Sized>(
    rng: &mut R,
    matrix: &EdgeWeightMatrix,
) -> AllocationDecision {
    let mut rb_queue: Vec<usize> = (0..matrix.rbs()).collect();
    rb_queue.shuffle(rng);
    let mut next = 0;

    let mut by_size: Vec<usize> = (0..matrix.users()).collect();
    by_size.sort_by_key(|&i| std::cmp::Reverse(matrix.sample_counts()[i]));

    let mut matching = vec![None; matrix.users()];
    for i in by_size {
        let Some(&n) = rb_queue.get(next) else { break };
        if matrix.weight(i, n) < 0.0 {
            matching[i] = Some(n);
            next += 1;
        }
    }
    matrix.decision_from_matching(&matching)
}

/// Baseline (c): minimizes the unweighted sum of packet error rates. Edge
/// weights are `q_in - 1` on feasible edges (so serving a user always helps)
/// and 0 elsewhere; powers are the per-edge optima.
pub fn baseline_min_sum_per(matrix: &EdgeWeightMatrix) -> AllocationDecision {
    let (u, r) = (matrix.users(), matrix.rbs());
    let costs: Vec<f64> = (0..u * r)
        .map(|k| {
            let edge = matrix.edge(k / r, k % r);
            if edge.feasible {
                edge.per - 1.0
            } else {
                0.0
            }
        })
        .collect();
    let solution = hungarian::solve(&costs, u, r);
    matrix.decision_from_matching(&solution.row_to_col)
}

fn objective_in_user_order(decision: &AllocationDecision, sample_counts: &[usize]) -> f64 {
    let mut total = sample_counts.iter().sum::<usize>() as f64;
    for i in 0..decision.users() {
        if decision.selection[i] {
            total += sample_counts[i] as f64 * (decision.per[i] - 1.0);
        }
    }
    total
}
