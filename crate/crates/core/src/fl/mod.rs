//! Federated training with lossy uplinks.
//!
//! Each round the base station broadcasts the global model, every selected
//! user takes one full-batch gradient step on its own data, and the uploads
//! that survive the channel are averaged with weights `K_i`. Lost uploads are
//! dropped; if nothing arrives the global model is kept as is.

mod data;

pub use data::{generate_regression_data, Dataset, RegressionTask, UserData};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::AllocationDecision;
use crate::error::{Error, Result};

/// Dense model parameters (`w_i` or `g`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelVector(pub Vec<f64>);

impl ModelVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `F_i(w) = Σ_k ½ (x_kᵀ w - y_k)²` and its gradient.
pub fn local_loss_and_gradient(model: &ModelVector, data: &UserData) -> Result<(f64, ModelVector)> {
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: model.dim(),
        });
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.dim()];
    for (x, y) in data.samples() {
        let residual = model.dot(x) - y;
        loss += 0.5 * residual * residual;
        for (g, xj) in grad.iter_mut().zip(x) {
            *g += residual * xj;
        }
    }
    Ok((loss, ModelVector(grad)))
}

/// One full-batch step from the broadcast model: `w = g - (λ / K_i) ∇F_i(g)`.
pub fn local_update(global: &ModelVector, data: &UserData, learning_rate: f64) -> Result<ModelVector> {
    let (_, grad) = local_loss_and_gradient(global, data)?;
    if data.is_empty() {
        return Ok(global.clone());
    }
    let scale = learning_rate / data.len() as f64;
    Ok(ModelVector(
        global.0.iter().zip(&grad.0).map(|(g, d)| g - scale * d).collect(),
    ))
}

/// Draws the CRC outcome of each upload: delivered with probability `1 - q_i`
/// for selected users, never for the rest.
pub fn transmit<R: Rng + ?Sized>(selection: &[bool], per: &[f64], rng: &mut R) -> Vec<bool> {
    selection
        .iter()
        .zip(per)
        .map(|(&selected, &q)| {
            // Always draw so the stream position does not depend on the selection.
            let draw: f64 = rng.random();
            selected && draw >= q
        })
        .collect()
}

/// `g = Σ K_i w_i / Σ K_i` over delivered uploads; `previous` when nothing arrived.
pub fn aggregate(
    locals: &[ModelVector],
    delivered: &[bool],
    sample_counts: &[usize],
    previous: &ModelVector,
) -> ModelVector {
    let mut sum = vec![0.0; previous.dim()];
    let mut weight = 0.0;
    for ((w, &ok), &k) in locals.iter().zip(delivered).zip(sample_counts) {
        if !ok {
            continue;
        }
        let k = k as f64;
        weight += k;
        for (s, wj) in sum.iter_mut().zip(&w.0) {
            *s += k * wj;
        }
    }
    if weight == 0.0 {
        return previous.clone();
    }
    ModelVector(sum.into_iter().map(|s| s / weight).collect())
}

/// `F(g) = (1/K) Σ_i F_i(g)` over every user's data, selected or not.
pub fn global_loss(dataset: &Dataset, model: &ModelVector) -> Result<f64> {
    let mut total = 0.0;
    for user in dataset.users() {
        total += local_loss_and_gradient(model, user)?.0;
    }
    Ok(total / dataset.total_samples() as f64)
}

/// `∇F(g)`.
pub fn global_gradient(dataset: &Dataset, model: &ModelVector) -> Result<ModelVector> {
    let mut grad = vec![0.0; model.dim()];
    for user in dataset.users() {
        let (_, g) = local_loss_and_gradient(model, user)?;
        grad.iter_mut().zip(&g.0).for_each(|(a, b)| *a += b);
    }
    let k = dataset.total_samples() as f64;
    Ok(ModelVector(grad.into_iter().map(|g| g / k).collect()))
}

/// Pooled least-squares minimizer `g*` from the normal equations
/// `(Σ x xᵀ) g = Σ x y`.
pub fn optimal_model(dataset: &Dataset) -> Result<ModelVector> {
    let dim = dataset.dim();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for (x, y) in dataset.pooled() {
        let x = nalgebra::DVector::from_column_slice(x);
        gram.ger(1.0, &x, &x, 1.0);
        rhs.axpy(y, &x, 1.0);
    }
    let chol = gram.clone().cholesky().ok_or(Error::NotStronglyConvex { mu: 0.0 })?;
    Ok(ModelVector(chol.solve(&rhs).iter().copied().collect()))
}

/// State after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// 1-based round index `t`; `global` is `g_t`.
    pub step: usize,
    pub delivered: Vec<bool>,
    pub global: ModelVector,
    pub loss: f64,
}

/// Full trajectory of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub initial: ModelVector,
    pub initial_loss: f64,
    pub rounds: Vec<RoundOutcome>,
}

impl TrainingRun {
    /// `F(g_0), F(g_1), …, F(g_T)`.
    pub fn losses(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss)
            .chain(self.rounds.iter().map(|r| r.loss))
            .collect()
    }

    /// `g_0, g_1, …, g_T`.
    pub fn models(&self) -> impl Iterator<Item = &ModelVector> {
        std::iter::once(&self.initial).chain(self.rounds.iter().map(|r| &r.global))
    }

    pub fn final_loss(&self) -> f64 {
        self.rounds.last().map_or(self.initial_loss, |r| r.loss)
    }
}

/// Runs `rounds` rounds of broadcast → local step → lossy upload → aggregation.
pub fn run_training<R: Rng + ?Sized>(
    dataset: &Dataset,
    decision: &AllocationDecision,
    learning_rate: f64,
    rounds: usize,
    initial: ModelVector,
    rng: &mut R,
) -> Result<TrainingRun> {
    if decision.users() != dataset.users().len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.users().len(),
            actual: decision.users(),
        });
    }
    let sample_counts = dataset.sample_counts();
    let initial_loss = global_loss(dataset, &initial)?;
    let mut global = initial.clone();
    let mut outcomes = Vec::with_capacity(rounds);
    for step in 1..=rounds {
        let locals = dataset
            .users()
            .iter()
            .zip(&decision.selection)
            .map(|(data, &selected)| {
                if selected {
                    local_update(&global, data, learning_rate)
                } else {
                    Ok(global.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let delivered = transmit(&decision.selection, &decision.per, rng);
        global = aggregate(&locals, &delivered, &sample_counts, &global);
        let loss = global_loss(dataset, &global)?;
        if !loss.is_finite() || !global.is_finite() {
            return Err(Error::Diverged { round: step, loss });
        }
        outcomes.push(RoundOutcome {
            step,
            delivered,
            global: global.clone(),
            loss,
        });
    }
    Ok(TrainingRun {
        initial,
        initial_loss,
        rounds: outcomes,
    })
}
