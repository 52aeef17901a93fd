//! Synthetic per-user regression data.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = slope·x + intercept + noise·n` with `x ~ U[0, 1]` and `n ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionTask {
    pub slope: f64,
    pub intercept: f64,
    pub noise: f64,
}

impl Default for RegressionTask {
    fn default() -> Self {
        Self {
            slope: -2.0,
            intercept: 1.0,
            noise: 0.4,
        }
    }
}

/// One user's samples. Features are stored row-major, `dim` values per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserData {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl UserData {
    pub fn new(dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if features.len() != dim * targets.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * targets.len(),
                actual: features.len(),
            });
        }
        Ok(Self { dim, features, targets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `(x_k, y_k)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.chunks_exact(self.dim).zip(self.targets.iter().copied())
    }
}

/// Data of every user, in user order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    users: Vec<UserData>,
}

impl Dataset {
    pub fn new(users: Vec<UserData>) -> Result<Self> {
        let dim = users.first().map_or(1, UserData::dim);
        if let Some(bad) = users.iter().find(|u| u.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim(),
            });
        }
        if users.iter().all(UserData::is_empty) {
            return Err(Error::invalid("samples_per_user", "at least one sample is required"));
        }
        Ok(Self { users })
    }

    pub fn users(&self) -> &[UserData] {
        &self.users
    }

    pub fn dim(&self) -> usize {
        self.users[0].dim()
    }

    pub fn sample_counts(&self) -> Vec<usize> {
        self.users.iter().map(UserData::len).collect()
    }

    /// `K = Σ K_i`.
    pub fn total_samples(&self) -> usize {
        self.users.iter().map(UserData::len).sum()
    }

    /// Every sample of every user, in user order.
    pub fn pooled(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.users.iter().flat_map(UserData::samples)
    }
}

/// Draws `K_i` samples per user; features are `[x, 1]` so the model learns
/// slope and intercept. Samples are drawn user by user, `x` then `n`.
///
/// # Panics
///
/// If every count is zero.
pub fn generate_regression_data<R: Rng + ?Sized>(
    rng: &mut R,
    sample_counts: &[usize],
    task: &RegressionTask,
) -> Dataset {
    let users = sample_counts
        .iter()
        .map(|&k| {
            let mut features = Vec::with_capacity(2 * k);
            let mut targets = Vec::with_capacity(k);
            for _ in 0..k {
                let x: f64 = rng.random();
                let n: f64 = rng.sample(StandardNormal);
                features.extend([x, 1.0]);
                targets.push(task.slope * x + task.intercept + task.noise * n);
            }
            UserData { dim: 2, features, targets }
        })
        .collect();
    Dataset::new(users).expect("sample counts must not all be zero")
}
