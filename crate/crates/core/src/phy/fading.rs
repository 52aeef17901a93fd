//! Expectations over Rayleigh fading.
//!
//! The fading power `o` is exponential with mean `σ`. Every link quantity is an
//! expectation `E[φ(o)]`, which we approximate by a weighted point set
//! `Σ w_j φ(σ u_j)` over unit-mean abscissae `u_j`.
//!
//! The production rule is Gauss–Legendre in the log-fading coordinate
//! `s = ln u`, where the unit exponential has density `exp(s - e^s)`. The
//! packet-error integrand `1 - exp(-c/u)` has a boundary layer of width `c`
//! near `u = 0`, which can be many orders of magnitude narrower than the first
//! Gauss–Laguerre node; in log coordinates it is a unit-width sigmoid and is
//! resolved uniformly for any `c`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper limits of the log-fading coordinate. The unit exponential
/// puts mass below `e^-40` of about `4e-18` and above 45 of about `3e-20`.
const LOG_FADING_LO: f64 = -40.0;
const LOG_FADING_HI: f64 = 3.806_662_489_770_32; // ln 45

pub const MIN_POINTS: usize = 16;
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMethod {
    /// Fixed-node deterministic quadrature.
    #[default]
    Quadrature,
    /// Seeded, stratified inverse-CDF sampling.
    MonteCarlo,
    /// Fading power fixed at its mean; collapses every expectation to its integrand.
    PointMass,
}

/// How `E_h(·)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingExpectation {
    #[serde(default)]
    pub method: FadingMethod,
    #[serde(default = "default_nodes")]
    pub node_or_sample_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

impl Default for FadingExpectation {
    fn default() -> Self {
        Self::quadrature(DEFAULT_NODES)
    }
}

impl FadingExpectation {
    pub fn quadrature(nodes: usize) -> Self {
        Self {
            method: FadingMethod::Quadrature,
            node_or_sample_count: nodes,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: FadingMethod::MonteCarlo,
            node_or_sample_count: samples,
            seed,
        }
    }

    pub fn point_mass() -> Self {
        Self {
            method: FadingMethod::PointMass,
            node_or_sample_count: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method != FadingMethod::PointMass && self.node_or_sample_count < MIN_POINTS {
            return Err(Error::invalid(
                "fading.node_or_sample_count",
                format!("must be >= {MIN_POINTS}"),
            ));
        }
        Ok(())
    }

    /// Builds the point set this expectation evaluates with.
    pub fn rule(&self) -> Result<FadingRule> {
        self.validate()?;
        Ok(match self.method {
            FadingMethod::Quadrature => FadingRule::log_legendre(self.node_or_sample_count),
            FadingMethod::MonteCarlo => {
                FadingRule::stratified_samples(self.node_or_sample_count, self.seed)
            }
            FadingMethod::PointMass => FadingRule {
                abscissae: vec![1.0],
                weights: vec![1.0],
            },
        })
    }
}

/// Weighted unit-mean fading values; `Σ weights = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRule {
    abscissae: Vec<f64>,
    weights: Vec<f64>,
}

impl FadingRule {
    fn log_legendre(nodes: usize) -> Self {
        let (x, w) = gauss_legendre(nodes);
        let half = 0.5 * (LOG_FADING_HI - LOG_FADING_LO);
        let mid = 0.5 * (LOG_FADING_HI + LOG_FADING_LO);
        let mut abscissae = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        for (xi, wi) in x.iter().zip(&w) {
            let s = mid + half * xi;
            let u = s.exp();
            abscissae.push(u);
            weights.push(wi * half * (s - u).exp());
        }
        let mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= mass);
        Self { abscissae, weights }
    }

    fn stratified_samples(samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = samples as f64;
        let abscissae = (0..samples)
            .map(|k| {
                let v = (k as f64 + rng.random::<f64>()) / n;
                // Inverse CDF of the unit exponential; v < 1 always.
                -(-v).ln_1p()
            })
            .collect();
        Self {
            abscissae,
            weights: vec![1.0 / n; samples],
        }
    }

    /// `E[φ(σ U)]` for unit-exponential `U`.
    pub fn expect(&self, scale: f64, mut phi: impl FnMut(f64) -> f64) -> f64 {
        self.abscissae
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * phi(scale * u))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
