//! Self-test battery run against a config's first topology.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Algorithm, ExperimentConfig, Topology};
use crate::alloc::{brute_force_assign, hungarian_assign, EdgeWeightMatrix};
use crate::bound::{convergence_factor, curvature, worst_case_missing, Participation};
use crate::error::Result;
use crate::fl::{global_loss, optimal_model, run_training, ModelVector};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, result: std::result::Result<String, String>) -> CheckOutcome {
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Runs every check; an `Err` means the topology could not be built at all.
pub fn validate_config(config: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    config.validate()?;
    let topo = Topology::build(config, config.seeds[0])?;
    let mut out = Vec::new();

    out.push(check("allocations satisfy budgets", {
        let mut res = Ok(String::new());
        for a in Algorithm::ALL {
            if let Err(e) = topo.allocate(a).0.verify(&topo.link, &topo.users) {
                res = Err(format!("{a}: {e}"));
                break;
            }
        }
        res.map(|_| format!("{} allocators", Algorithm::ALL.len()))
    }));

    out.push(check("proposed objective is minimal", {
        let best = topo.allocate(Algorithm::Proposed).0.objective;
        Algorithm::ALL[1..]
            .iter()
            .map(|&a| (a, topo.allocate(a).0.objective))
            .find(|&(_, obj)| obj < best - 1e-9)
            .map_or(Ok(format!("objective {best}")), |(a, obj)| Err(format!("{a} reaches {obj} < {best}")))
    }));

    out.push(check("hungarian matches exhaustive search", {
        let mut rng = stream_rng(config.seeds[0], Stream::Validation);
        let mut res = Ok("50 random 5x4 instances".to_string());
        for _ in 0..50 {
            let w: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..4).map(|_| if rng.random_bool(0.3) { 0.0 } else { -rng.random::<f64>() * 12.0 }).collect())
                .collect();
            let m = EdgeWeightMatrix::from_weights(&w, &[12, 10, 8, 4, 2]);
            let (h, b) = (hungarian_assign(&m).objective, brute_force_assign(&m)?.objective);
            if h != b {
                res = Err(format!("hungarian {h} vs exhaustive {b}"));
                break;
            }
        }
        res
    }));

    out.push(check("energy increases and PER decreases with power", {
        let pmax = topo.link.params().max_user_power_w;
        let mut res = Ok(String::new());
        'outer: for (i, user) in topo.users.iter().enumerate() {
            for n in 0..topo.link.params().rb_count {
                let mut prev: Option<(f64, f64)> = None;
                for k in 1..=50 {
                    let p = pmax * k as f64 / 50.0;
                    let (e, q) = (topo.link.user_energy(user, n, p), topo.link.packet_error_rate(user, n, p));
                    if let Some((pe, pq)) = prev {
                        if !(e > pe) || q > pq {
                            res = Err(format!("user {i} RB {n} at P = {p}"));
                            break 'outer;
                        }
                    }
                    prev = Some((e, q));
                }
            }
        }
        res.map(|_| format!("{} edges x 50 powers", topo.users.len() * topo.link.params().rb_count))
    }));

    out.push(check("zeta2 threshold keeps the factor below one", {
        let worst = worst_case_missing(&topo.link, &topo.users, &topo.matrix);
        let part = Participation::from_decision(&topo.allocate(Algorithm::Proposed).0, topo.sample_counts());
        let curv = curvature(&topo.dataset)?;
        let t = worst.zeta2_threshold();
        let zeta2 = if t.is_finite() { t * (1.0 - 1e-9) } else { 1e6 };
        let a = convergence_factor(&part, &curv, zeta2);
        if a < 1.0 {
            Ok(format!("threshold {t}, A = {a}"))
        } else {
            Err(format!("threshold {t} but A = {a}"))
        }
    }));

    out.push(check("error-free training contracts at 1 - mu/L", {
        let curv = curvature(&topo.dataset)?;
        let opt = optimal_model(&topo.dataset)?;
        let f_star = global_loss(&topo.dataset, &opt)?;
        let mut all = topo.allocate(Algorithm::Proposed).0;
        all.selection.fill(true);
        all.per.fill(0.0);
        let run = run_training(
            &topo.dataset,
            &all,
            curv.step_size(),
            50,
            ModelVector::zeros(topo.dataset.dim()),
            &mut stream_rng(0, Stream::Validation),
        )?;
        let rate = curv.error_free_factor();
        let gaps: Vec<f64> = run.losses().iter().map(|l| l - f_star).collect();
        gaps.windows(2)
            .position(|w| w[0] > 1e-14 && w[1] / w[0] > rate + 1e-10)
            .map_or(Ok(format!("rate {rate}")), |t| Err(format!("step {t}: ratio above {rate}")))
    }));

    out.push(check("training is deterministic", {
        let d = topo.allocate(Algorithm::Proposed).0;
        let lr = topo.learning_rate(config.training.learning_rate)?;
        let go = || {
            run_training(
                &topo.dataset,
                &d,
                lr,
                config.training.rounds,
                ModelVector::zeros(topo.dataset.dim()),
                &mut stream_rng(topo.seed, Stream::Delivery),
            )
        };
        if go()? == go()? {
            Ok(format!("{} rounds", config.training.rounds))
        } else {
            Err("two runs differ".into())
        }
    }));

    Ok(out)
}
