//! Analytical convergence results and their empirical counterparts.
//!
//! For the convex regression task the global loss satisfies
//! `μ I ⪯ ∇²F ⪯ L I`, and per-sample gradients obey
//! `‖∇f(g, x, y)‖² ≤ ζ1 + ζ2 ‖∇F(g)‖²`. With `λ = 1/L` the expected excess
//! loss then contracts as
//!
//! ```text
//! E[F(g_{t+1}) - F*] ≤ A · E[F(g_t) - F*] + (2 ζ1 / (L K)) · S
//! A = 1 - μ/L + (4 μ ζ2 / (L K)) · S,   S = Σ K_i (1 - a_i + a_i q_i)
//! ```
//!
//! `S` is the data-weighted share of uploads that are missing, either because
//! the user was not scheduled or because its packet was lost.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::alloc::{hungarian, min_delay_power, AllocationDecision, EdgeWeightMatrix};
use crate::error::{Error, Result};
use crate::fl::{global_gradient, global_loss, local_loss_and_gradient, optimal_model, Dataset, ModelVector, TrainingRun};
use crate::phy::{LinkModel, UserProfile};

/// Relative tolerance under which `1 - A` is treated as zero.
const UNIT_FACTOR_TOL: f64 = 1e-12;

/// Extreme eigenvalues of the pooled Hessian `(1/K) Σ x xᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEstimate {
    pub lipschitz_l: f64,
    pub strong_convexity_mu: f64,
}

impl CurvatureEstimate {
    /// Learning rate `1/L`.
    pub fn step_size(&self) -> f64 {
        1.0 / self.lipschitz_l
    }

    /// Error-free contraction factor `1 - μ/L`.
    pub fn error_free_factor(&self) -> f64 {
        1.0 - self.strong_convexity_mu / self.lipschitz_l
    }
}

pub fn pooled_hessian(dataset: &Dataset) -> DMatrix<f64> {
    let dim = dataset.dim();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (x, _) in dataset.pooled() {
        for r in 0..dim {
            for c in 0..dim {
                h[(r, c)] += x[r] * x[c];
            }
        }
    }
    h / dataset.total_samples() as f64
}

/// `L` and `μ` by symmetric eigendecomposition of the pooled Hessian.
pub fn curvature(dataset: &Dataset) -> Result<CurvatureEstimate> {
    let eig = SymmetricEigen::new(pooled_hessian(dataset)).eigenvalues;
    let l = eig.max();
    let mu = eig.min();
    // Eigenvalues of a singular Gram matrix come out at rounding level, not zero.
    if !(mu > l * 1e-12) {
        return Err(Error::NotStronglyConvex { mu });
    }
    Ok(CurvatureEstimate {
        lipschitz_l: l,
        strong_convexity_mu: mu,
    })
}

/// Who uploads and how reliably: `a_i`, `q_i` and `K_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participation {
    pub selection: Vec<bool>,
    pub per: Vec<f64>,
    pub sample_counts: Vec<usize>,
}

impl Participation {
    pub fn from_decision(decision: &AllocationDecision, sample_counts: &[usize]) -> Self {
        Self {
            selection: decision.selection.clone(),
            per: decision.per.clone(),
            sample_counts: sample_counts.to_vec(),
        }
    }

    /// Every user selected, no packet ever lost.
    pub fn error_free(sample_counts: &[usize]) -> Self {
        Self {
            selection: vec![true; sample_counts.len()],
            per: vec![0.0; sample_counts.len()],
            sample_counts: sample_counts.to_vec(),
        }
    }

    pub fn total_samples(&self) -> usize {
        self.sample_counts.iter().sum()
    }

    /// `S = Σ K_i (1 - a_i + a_i q_i)`.
    pub fn missing_weight(&self) -> f64 {
        self.sample_counts
            .iter()
            .zip(&self.selection)
            .zip(&self.per)
            .map(|((&k, &a), &q)| k as f64 * if a { q } else { 1.0 })
            .sum()
    }

    /// `S / K`.
    pub fn missing_fraction(&self) -> f64 {
        self.missing_weight() / self.total_samples() as f64
    }
}

/// `A = 1 - μ/L + 4 μ ζ2 S / (L K)`.
pub fn convergence_factor(part: &Participation, curv: &CurvatureEstimate, zeta2: f64) -> f64 {
    let ratio = curv.strong_convexity_mu / curv.lipschitz_l;
    1.0 - ratio + 4.0 * ratio * zeta2 * part.missing_fraction()
}

/// Per-step additive term `2 ζ1 S / (L K)`.
fn drift(part: &Participation, curv: &CurvatureEstimate, zeta1: f64) -> f64 {
    2.0 * zeta1 * part.missing_fraction() / curv.lipschitz_l
}

/// Whether `A` is close enough to 1 that the geometric sum degenerates to `t`.
pub fn is_degenerate(factor: f64) -> bool {
    (1.0 - factor).abs() < UNIT_FACTOR_TOL
}

/// `A^t · gap0 + 2 ζ1 S / (L K) · (1 - A^t) / (1 - A)`, with `t · 2 ζ1 S / (L K)`
/// for the sum when `A = 1`.
pub fn theorem1_bound(
    t: usize,
    factor: f64,
    zeta1: f64,
    curv: &CurvatureEstimate,
    part: &Participation,
    initial_gap: f64,
) -> f64 {
    let c = drift(part, curv, zeta1);
    let at = factor.powi(t as i32);
    let sum = if is_degenerate(factor) {
        t as f64
    } else {
        (1.0 - at) / (1.0 - factor)
    };
    at * initial_gap + c * sum
}

/// Error-free bound `(1 - μ/L)^t · gap0`.
pub fn lemma1_bound(t: usize, curv: &CurvatureEstimate, initial_gap: f64) -> f64 {
    curv.error_free_factor().powi(t as i32) * initial_gap
}

/// Limit of [`theorem1_bound`] as `t → ∞`:
/// `(2 ζ1 S / (L K)) / (μ/L - 4 μ ζ2 S / (L K))`.
pub fn asymptotic_gap(part: &Participation, curv: &CurvatureEstimate, zeta1: f64, zeta2: f64) -> Result<f64> {
    let factor = convergence_factor(part, curv, zeta2);
    let denom = 1.0 - factor;
    if !(denom > 0.0) {
        return Err(Error::NoConvergence { factor });
    }
    Ok(drift(part, curv, zeta1) / denom)
}

/// Fitted constants of the gradient-growth condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundFit {
    pub zeta1: f64,
    pub zeta2: f64,
    /// Number of (model, sample) pairs the condition was checked on.
    pub samples_used: usize,
}

/// Largest per-sample squared gradient and the squared global gradient at one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientProbe {
    pub max_sample_sq: f64,
    pub global_sq: f64,
}

pub fn probe_gradients(dataset: &Dataset, model: &ModelVector) -> Result<GradientProbe> {
    let mut max_sample_sq = 0.0f64;
    for (x, y) in dataset.pooled() {
        let residual = model.dot(x) - y;
        let sq: f64 = x.iter().map(|xj| (residual * xj).powi(2)).sum();
        max_sample_sq = max_sample_sq.max(sq);
    }
    Ok(GradientProbe {
        max_sample_sq,
        global_sq: global_gradient(dataset, model)?.norm_sq(),
    })
}

/// Number of geometric ζ2 candidates besides zero.
const ZETA2_GRID: usize = 200;

/// Fits `(ζ1, ζ2)` so that `‖∇f‖² ≤ ζ1 + ζ2 ‖∇F‖²` holds at every sample of
/// every visited model.
///
/// For each ζ2 on a grid (zero plus geometric values up to the smaller of the
/// largest useful ratio `max ‖∇f‖² / ‖∇F‖²` and the convergence limit
/// `K / (4 S)`), the smallest valid ζ1 is taken. The returned pair minimizes
/// the asymptotic gap for `part`; ties go to the smaller ζ2.
pub fn fit_zeta(dataset: &Dataset, trajectory: &[ModelVector], part: &Participation) -> Result<GradientBoundFit> {
    if trajectory.len() < 2 {
        return Err(Error::Domain(format!(
            "zeta fit needs at least 2 trajectory points, got {}",
            trajectory.len()
        )));
    }
    let probes = trajectory
        .iter()
        .map(|g| probe_gradients(dataset, g))
        .collect::<Result<Vec<_>>>()?;
    let samples_used = probes.len() * dataset.total_samples();
    Ok(fit_zeta_from_probes(&probes, part, samples_used))
}

pub(crate) fn fit_zeta_from_probes(probes: &[GradientProbe], part: &Participation, samples_used: usize) -> GradientBoundFit {
    let zeta1_for = |zeta2: f64| {
        probes
            .iter()
            .map(|p| p.max_sample_sq - zeta2 * p.global_sq)
            .fold(0.0f64, f64::max)
    };
    let ratio_cap = probes
        .iter()
        .filter(|p| p.global_sq > 0.0)
        .map(|p| p.max_sample_sq / p.global_sq)
        .fold(0.0f64, f64::max);
    let s_frac = part.missing_fraction();
    let conv_cap = if s_frac > 0.0 { 1.0 / (4.0 * s_frac) } else { f64::INFINITY };
    // Stay strictly inside the convergent region.
    let hi = ratio_cap.min(conv_cap * (1.0 - 1e-6));

    let mut candidates = vec![0.0];
    if hi > 0.0 {
        let lo = hi * 1e-8;
        let step = (hi / lo).powf(1.0 / (ZETA2_GRID - 1) as f64);
        candidates.extend((0..ZETA2_GRID).map(|k| lo * step.powi(k as i32)));
        *candidates.last_mut().unwrap() = hi;
    }

    // Any positive curvature gives the same argmin: the gap scales as
    // ζ1 S / (1 - 4 ζ2 S / K) up to a constant factor.
    let score = |zeta1: f64, zeta2: f64| {
        let denom = 1.0 - 4.0 * zeta2 * s_frac;
        zeta1 * s_frac / denom
    };
    let mut best = GradientBoundFit {
        zeta1: zeta1_for(0.0),
        zeta2: 0.0,
        samples_used,
    };
    let mut best_score = score(best.zeta1, 0.0);
    for &zeta2 in &candidates[1..] {
        let zeta1 = zeta1_for(zeta2);
        let s = score(zeta1, zeta2);
        if s < best_score || (s == best_score && zeta1 < best.zeta1) {
            best = GradientBoundFit { zeta1, zeta2, samples_used };
            best_score = s;
        }
    }
    best
}

/// Checks the fitted condition at every sample of every given model, using
/// per-sample gradients from the training code. Returns the worst violation
/// `‖∇f‖² - ζ1 - ζ2 ‖∇F‖²` (non-positive when the fit holds).
pub fn max_violation(dataset: &Dataset, trajectory: &[ModelVector], fit: &GradientBoundFit) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for g in trajectory {
        let global_sq = global_gradient(dataset, g)?.norm_sq();
        for user in dataset.users() {
            for (x, y) in user.samples() {
                let single = crate::fl::UserData::new(x.len(), x.to_vec(), vec![y])?;
                let sq = local_loss_and_gradient(g, &single)?.1.norm_sq();
                worst = worst.max(sq - fit.zeta1 - fit.zeta2 * global_sq);
            }
        }
    }
    Ok(worst)
}

/// Per-step mean of `F(g_t) - F(g*)` over runs; index `t = 0..=T`.
pub fn empirical_gap(runs: &[TrainingRun], optimum: &ModelVector, dataset: &Dataset) -> Result<Vec<f64>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Domain("empirical gap needs at least one run".into()))?;
    let f_star = global_loss(dataset, optimum)?;
    let steps = first.rounds.len() + 1;
    let mut mean = vec![0.0; steps];
    for run in runs {
        let losses = run.losses();
        if losses.len() != steps {
            return Err(Error::DimensionMismatch {
                expected: steps,
                actual: losses.len(),
            });
        }
        for (m, l) in mean.iter_mut().zip(losses) {
            *m += l - f_star;
        }
    }
    let n = runs.len() as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// Convergence bound evaluated along a run, with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub curvature: CurvatureEstimate,
    pub fit: GradientBoundFit,
    pub participation: Participation,
    pub factor: f64,
    pub initial_gap: f64,
    /// Bound on the expected excess loss at `t = 0..=T`.
    pub per_step_bound: Vec<f64>,
    /// `None` when `A >= 1`.
    pub asymptotic_gap: Option<f64>,
    /// `A` was within rounding of 1 and the linear form was used.
    pub degenerate: bool,
}

impl BoundSeries {
    pub fn new(
        curvature: CurvatureEstimate,
        fit: GradientBoundFit,
        participation: Participation,
        initial_gap: f64,
        steps: usize,
    ) -> Self {
        let factor = convergence_factor(&participation, &curvature, fit.zeta2);
        let per_step_bound = (0..=steps)
            .map(|t| theorem1_bound(t, factor, fit.zeta1, &curvature, &participation, initial_gap))
            .collect();
        let asymptotic_gap = asymptotic_gap(&participation, &curvature, fit.zeta1, fit.zeta2).ok();
        Self {
            curvature,
            fit,
            factor,
            initial_gap,
            per_step_bound,
            asymptotic_gap,
            degenerate: is_degenerate(factor),
            participation,
        }
    }
}

/// Bound for a set of seeded runs sharing one dataset and allocation: measures
/// curvature, fits ζ on every visited model and evaluates the series.
pub fn bound_for_runs(dataset: &Dataset, part: &Participation, runs: &[TrainingRun]) -> Result<BoundSeries> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Domain("bound needs at least one run".into()))?;
    let curv = curvature(dataset)?;
    let optimum = optimal_model(dataset)?;
    let f_star = global_loss(dataset, &optimum)?;
    let points: Vec<ModelVector> = runs.iter().flat_map(|r| r.models().cloned()).collect();
    let fit = fit_zeta(dataset, &points, part)?;
    let initial_gap = first.initial_loss - f_star;
    Ok(BoundSeries::new(curv, fit, part.clone(), initial_gap, first.rounds.len()))
}

/// Worst data-weighted missing share over scheduling policies that serve as
/// many users as the topology allows.
///
/// Each served user transmits at the lowest power that still meets the delay
/// budget, where its packet error rate is largest; unserved users count fully.
/// The maximum is taken over all maximum-cardinality matchings of feasible
/// edges. Any allocation that minimizes `S` (the proposed one) has
/// `S ≤ weight`, so `ζ2 < K / (4 · weight)` keeps its `A < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseMissing {
    pub weight: f64,
    pub total_samples: usize,
    pub matched: usize,
}

impl WorstCaseMissing {
    /// `K / (4 W)`; infinite when nothing can go missing.
    pub fn zeta2_threshold(&self) -> f64 {
        if self.weight <= 0.0 {
            f64::INFINITY
        } else {
            self.total_samples as f64 / (4.0 * self.weight)
        }
    }
}

/// Packet error rate of each feasible edge at its minimum delay-feasible power;
/// `None` for infeasible edges. Row-major `users × rbs`.
pub fn worst_edge_per(link: &LinkModel, users: &[UserProfile], matrix: &EdgeWeightMatrix) -> Vec<Option<f64>> {
    let r = matrix.rbs();
    (0..matrix.users() * r)
        .map(|k| {
            let (i, n) = (k / r, k % r);
            let edge = matrix.edge(i, n);
            if !edge.feasible {
                return None;
            }
            let p = min_delay_power(link, &users[i], n, edge.power_w).unwrap_or(edge.power_w);
            Some(link.packet_error_rate(&users[i], n, p))
        })
        .collect()
}

pub fn worst_case_missing(link: &LinkModel, users: &[UserProfile], matrix: &EdgeWeightMatrix) -> WorstCaseMissing {
    worst_case_missing_from(&worst_edge_per(link, users, matrix), matrix.sample_counts(), matrix.rbs())
}

/// [`worst_case_missing`] from a precomputed worst-PER table.
pub fn worst_case_missing_from(per: &[Option<f64>], sample_counts: &[usize], rbs: usize) -> WorstCaseMissing {
    let users = sample_counts.len();
    let total: usize = sample_counts.iter().sum();
    // A feasible edge is worth more than any difference in served weight, so
    // the matching first maximizes cardinality, then minimizes Σ K_i (1 - q_i).
    let big = 2.0 * total as f64 + 1.0;
    let costs: Vec<f64> = per
        .iter()
        .enumerate()
        .map(|(k, q)| q.map_or(0.0, |q| sample_counts[k / rbs] as f64 * (1.0 - q) - big))
        .collect();
    let solution = hungarian::solve(&costs, users, rbs);
    let mut weight = total as f64;
    let mut matched = 0;
    for (i, col) in solution.row_to_col.iter().enumerate() {
        if let Some(q) = col.and_then(|n| per[i * rbs + n]) {
            weight -= sample_counts[i] as f64 * (1.0 - q);
            matched += 1;
        }
    }
    WorstCaseMissing {
        weight: weight.max(0.0),
        total_samples: total,
        matched,
    }
}

/// `0 < ζ2 < K / (4 W)`.
pub fn zeta2_feasible(zeta2: f64, worst: &WorstCaseMissing) -> bool {
    zeta2 > 0.0 && zeta2 < worst.zeta2_threshold()
}
