//! Experiment orchestration: topology generation, allocation, training,
//! sweeps and persistence.
//!
//! Every random quantity comes from a ChaCha stream keyed by `(seed, purpose)`,
//! so a `(config, seed)` pair fixes the output bit for bit no matter how many
//! threads run the cells.

mod config;
mod export;
mod validate;

pub use config::{load_config, Algorithm, ExperimentConfig, LearningRate, NetworkConfig, OutputConfig, TrainingConfig, UsersConfig};
pub use export::{export_csv, import_csv, write_bound_csv, write_manifest, write_sweep_csv, CsvRow, Manifest, CSV_HEADER};
pub use validate::{validate_config, CheckOutcome};

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::{
    baseline_min_sum_per, baseline_optselect_randomrb, baseline_random_all, hungarian_assign_counted, AllocationDecision,
    EdgeWeightMatrix,
};
use crate::bound::{bound_for_runs, empirical_gap, BoundSeries, CurvatureEstimate, Participation};
use crate::error::Result;
use crate::fl::{generate_regression_data, global_loss, optimal_model, run_training, Dataset, ModelVector, TrainingRun};
use crate::phy::{LinkModel, UserProfile};
use crate::rng::{stream_rng, substream_rng, Stream};

/// Distances of `count` users dropped uniformly over a disc of `radius`
/// around the base station: `d = r √u` with `u ∈ (0, 1]`.
pub fn place_users<R: Rng + ?Sized>(rng: &mut R, count: usize, radius: f64) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            radius * u.sqrt()
        })
        .collect()
}

/// Everything a seed fixes before any allocator runs.
#[derive(Debug, Clone)]
pub struct Topology {
    pub seed: u64,
    pub users: Vec<UserProfile>,
    pub link: LinkModel,
    pub matrix: EdgeWeightMatrix,
    pub dataset: Dataset,
}

impl Topology {
    pub fn build(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let uc = &config.users;
        let distances = match &uc.distances_m {
            Some(d) => d.clone(),
            None => place_users(&mut stream_rng(seed, Stream::Topology), uc.count, uc.radius_m),
        };
        let users: Vec<UserProfile> = distances.iter().enumerate().map(|(i, &d)| uc.profile(i, d)).collect();
        let link = LinkModel::new(config.network.params(), &config.fading)?;
        let matrix = EdgeWeightMatrix::build(&link, &users);
        let counts: Vec<usize> = users.iter().map(|u| u.sample_count).collect();
        let dataset = generate_regression_data(&mut stream_rng(seed, Stream::Data), &counts, &config.task);
        Ok(Self {
            seed,
            users,
            link,
            matrix,
            dataset,
        })
    }

    pub fn sample_counts(&self) -> &[usize] {
        self.matrix.sample_counts()
    }

    /// Runs one allocator. The solver iteration count is reported for the
    /// proposed allocator only.
    pub fn allocate(&self, algorithm: Algorithm) -> (AllocationDecision, Option<u64>) {
        let mut rng = substream_rng(self.seed, Stream::Baseline, algorithm as u64);
        match algorithm {
            Algorithm::Proposed => {
                let (d, it) = hungarian_assign_counted(&self.matrix);
                (d, Some(it))
            }
            Algorithm::BaselineA => (baseline_optselect_randomrb(&mut rng, &self.matrix), None),
            Algorithm::BaselineB => (baseline_random_all(&mut rng, &self.link, &self.users, &self.matrix), None),
            Algorithm::BaselineC => (baseline_min_sum_per(&self.matrix), None),
        }
    }

    pub fn learning_rate(&self, policy: LearningRate) -> Result<f64> {
        Ok(match policy {
            LearningRate::OneOverL => crate::bound::curvature(&self.dataset)?.step_size(),
            LearningRate::Fixed(l) => l,
        })
    }
}

fn initial_model(config: &ExperimentConfig, dim: usize) -> ModelVector {
    config
        .training
        .initial_model
        .clone()
        .map_or_else(|| ModelVector::zeros(dim), ModelVector)
}

/// Result of one (algorithm, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub sample_counts: Vec<usize>,
    pub decision: AllocationDecision,
    /// `F(g_t)` for `t = 0..=T`.
    pub losses: Vec<f64>,
    /// `F(g*)` on the same data.
    pub optimal_loss: f64,
    pub bound: Option<Vec<f64>>,
    pub hungarian_iterations: Option<u64>,
    pub wall_clock_s: f64,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("a run has at least the initial loss")
    }

    /// `F(g_T) - F(g*)`.
    pub fn final_excess_loss(&self) -> f64 {
        self.final_loss() - self.optimal_loss
    }

    /// Hex prefix of the SHA-256 of the allocation (RB and power per user).
    pub fn allocation_digest(&self) -> String {
        allocation_digest(&self.decision)
    }
}

pub fn allocation_digest(decision: &AllocationDecision) -> String {
    let mut h = Sha256::new();
    for (rb, p) in decision.rb.iter().zip(&decision.power_w) {
        match rb {
            Some(n) => h.update((*n as u64 + 1).to_le_bytes()),
            None => h.update(0u64.to_le_bytes()),
        }
        h.update(p.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn run_cell(config: &ExperimentConfig, topo: &Topology, algorithm: Algorithm) -> Result<RunRecord> {
    let start = Instant::now();
    let (decision, iterations) = topo.allocate(algorithm);
    let lr = topo.learning_rate(config.training.learning_rate)?;
    let run = run_training(
        &topo.dataset,
        &decision,
        lr,
        config.training.rounds,
        initial_model(config, topo.dataset.dim()),
        &mut stream_rng(topo.seed, Stream::Delivery),
    )?;
    let bound = if config.output.bound {
        let part = Participation::from_decision(&decision, topo.sample_counts());
        Some(bound_for_runs(&topo.dataset, &part, std::slice::from_ref(&run))?.per_step_bound)
    } else {
        None
    };
    Ok(RunRecord {
        algorithm,
        seed: topo.seed,
        sample_counts: topo.sample_counts().to_vec(),
        decision,
        losses: run.losses(),
        optimal_loss: global_loss(&topo.dataset, &optimal_model(&topo.dataset)?)?,
        bound,
        hungarian_iterations: iterations,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every (seed, algorithm) cell. Records come back seed-major, algorithms
/// in config order, whatever order the cells finished in.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let topo = Topology::build(config, seed)?;
            config
                .algorithms
                .iter()
                .map(|&a| run_cell(config, &topo, a))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    UserCount,
    RbCount,
    SamplesPerUser,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::UserCount => "user_count",
            SweepAxis::RbCount => "rb_count",
            SweepAxis::SamplesPerUser => "samples_per_user",
        }
    }

    /// Copy of `config` with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: usize) -> ExperimentConfig {
        let mut c = config.clone();
        match self {
            SweepAxis::UserCount => {
                c.users.count = value;
                c.users.distances_m = None;
            }
            SweepAxis::RbCount => c.network.rb_count = value,
            SweepAxis::SamplesPerUser => c.users.sample_counts = vec![value],
        }
        c
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std: var.sqrt(), n }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub algorithm: Algorithm,
    pub final_loss: Summary,
    /// `F(g_T) - F(g*)`; free of the data-noise floor that `final_loss` carries.
    pub final_excess_loss: Summary,
    /// Solver work of the proposed allocator; user-count sweeps only.
    pub iterations: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Runs the experiment once per axis value and aggregates final losses over seeds.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[usize]) -> Result<SweepTable> {
    if values.is_empty() || values.contains(&0) {
        return Err(crate::error::Error::invalid("sweep.values", "must be non-empty and positive"));
    }
    let mut rows = Vec::new();
    for &value in values {
        let records = run_experiment(&axis.apply(config, value))?;
        for &algorithm in &config.algorithms {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == algorithm).collect();
            let losses: Vec<f64> = mine.iter().map(|r| r.final_loss()).collect();
            let excess: Vec<f64> = mine.iter().map(|r| r.final_excess_loss()).collect();
            let iterations = (axis == SweepAxis::UserCount && algorithm == Algorithm::Proposed).then(|| {
                let it: Vec<f64> = mine.iter().filter_map(|r| r.hungarian_iterations).map(|i| i as f64).collect();
                Summary::of(&it)
            });
            rows.push(SweepRow {
                value,
                algorithm,
                final_loss: Summary::of(&losses),
                final_excess_loss: Summary::of(&excess),
                iterations,
            });
        }
    }
    Ok(SweepTable { axis, rows })
}

/// Convergence bound against the seed-averaged simulation for one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub series: BoundSeries,
    /// Mean `F(g_t) - F(g*)` over the delivery seeds, `t = 0..=T`.
    pub empirical_gap: Vec<f64>,
    /// Steps where the empirical gap exceeds the bound.
    pub violations: Vec<usize>,
}

/// Whether an empirical gap is above its bound by more than rounding. At
/// `t = 0` both sides are the same quantity computed along different paths.
pub fn exceeds_bound(gap: f64, bound: f64) -> bool {
    gap > bound + 1e-12 * bound.abs().max(f64::MIN_POSITIVE)
}

/// Trains `runs` times on the first seed's topology with independent packet
/// outcomes, fits the gradient constants on every visited model and compares.
pub fn bound_report(config: &ExperimentConfig, algorithm: Algorithm, runs: usize) -> Result<BoundReport> {
    config.validate()?;
    let seed = config.seeds[0];
    let topo = Topology::build(config, seed)?;
    let (decision, _) = topo.allocate(algorithm);
    let lr = topo.learning_rate(config.training.learning_rate)?;
    let g0 = initial_model(config, topo.dataset.dim());
    let trajectories = (0..runs as u64)
        .into_par_iter()
        .map(|k| {
            run_training(
                &topo.dataset,
                &decision,
                lr,
                config.training.rounds,
                g0.clone(),
                &mut substream_rng(seed, Stream::Delivery, k),
            )
        })
        .collect::<Result<Vec<TrainingRun>>>()?;
    let part = Participation::from_decision(&decision, topo.sample_counts());
    let series = bound_for_runs(&topo.dataset, &part, &trajectories)?;
    let gap = empirical_gap(&trajectories, &optimal_model(&topo.dataset)?, &topo.dataset)?;
    let violations = gap
        .iter()
        .zip(&series.per_step_bound)
        .enumerate()
        .filter(|(_, (&g, &b))| exceeds_bound(g, b))
        .map(|(t, _)| t)
        .collect();
    Ok(BoundReport {
        seed,
        algorithm,
        runs,
        series,
        empirical_gap: gap,
        violations,
    })
}

/// Curvature of a seed's dataset; used by reports.
pub fn seed_curvature(config: &ExperimentConfig, seed: u64) -> Result<CurvatureEstimate> {
    crate::bound::curvature(&Topology::build(config, seed)?.dataset)
}
