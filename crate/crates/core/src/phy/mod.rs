//! Link-level model of the uplink/downlink: channel gain, expected rates,
//! delays, packet error rates and per-round user energy.
//!
//! All quantities are in linear SI units. Every function here is a pure
//! function of its arguments.

mod fading;

pub use fading::{gauss_legendre, FadingExpectation, FadingMethod, FadingRule, DEFAULT_NODES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power spectral density from dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Cell-wide radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub rb_count: usize,
    pub rb_bandwidth_hz: f64,
    pub downlink_bandwidth_hz: f64,
    pub noise_density_w_per_hz: f64,
    pub bs_power_w: f64,
    pub max_user_power_w: f64,
    /// Waterfall threshold `m`, linear.
    pub waterfall_threshold: f64,
    /// Other-cell interference on each uplink RB; length `rb_count`.
    pub uplink_interference_w: Vec<f64>,
    pub downlink_interference_w: f64,
    pub delay_budget_s: f64,
    pub energy_budget_j: f64,
    pub pathloss_exponent: f64,
}

impl NetworkParams {
    /// Default cell with `rb_count` RBs and the default interference profile.
    pub fn reference(rb_count: usize) -> Self {
        Self {
            rb_count,
            rb_bandwidth_hz: 1e6,
            downlink_bandwidth_hz: 20e6,
            noise_density_w_per_hz: dbm_to_watts(-174.0),
            bs_power_w: 1.0,
            max_user_power_w: 0.01,
            waterfall_threshold: 0.023,
            uplink_interference_w: InterferenceProfile::default().materialize(rb_count),
            downlink_interference_w: 1e-7,
            delay_budget_s: 0.5,
            energy_budget_j: 0.003,
            pathloss_exponent: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("downlink_bandwidth_hz", self.downlink_bandwidth_hz),
            ("noise_density", self.noise_density_w_per_hz),
            ("bs_power_w", self.bs_power_w),
            ("max_user_power_w", self.max_user_power_w),
            ("waterfall_threshold", self.waterfall_threshold),
            ("delay_budget_s", self.delay_budget_s),
            ("energy_budget_j", self.energy_budget_j),
            ("pathloss_exponent", self.pathloss_exponent),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    format!("network.{key}"),
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if self.rb_count == 0 {
            return Err(Error::invalid("network.rb_count", "must be >= 1"));
        }
        if self.uplink_interference_w.len() != self.rb_count {
            return Err(Error::invalid(
                "network.uplink_interference",
                format!(
                    "needs one entry per RB ({}), got {}",
                    self.rb_count,
                    self.uplink_interference_w.len()
                ),
            ));
        }
        if self
            .uplink_interference_w
            .iter()
            .chain(std::iter::once(&self.downlink_interference_w))
            .any(|i| !(i.is_finite() && *i >= 0.0))
        {
            return Err(Error::invalid(
                "network.uplink_interference",
                "interference must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Interference-plus-noise power on uplink RB `rb`.
    pub fn uplink_noise_w(&self, rb: usize) -> f64 {
        self.uplink_interference_w[rb] + self.rb_bandwidth_hz * self.noise_density_w_per_hz
    }

    pub fn downlink_noise_w(&self) -> f64 {
        self.downlink_interference_w + self.downlink_bandwidth_hz * self.noise_density_w_per_hz
    }
}

/// Static per-RB uplink interference, expanded to a vector once the RB count is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterferenceProfile {
    Uniform { watts: f64 },
    /// Geometric ramp from `min_w` on RB 0 to `max_w` on the last RB.
    LogSpaced { min_w: f64, max_w: f64 },
    Explicit { watts: Vec<f64> },
}

impl Default for InterferenceProfile {
    fn default() -> Self {
        InterferenceProfile::LogSpaced {
            min_w: 1e-9,
            max_w: 3e-7,
        }
    }
}

impl InterferenceProfile {
    pub fn materialize(&self, rb_count: usize) -> Vec<f64> {
        match self {
            InterferenceProfile::Uniform { watts } => vec![*watts; rb_count],
            InterferenceProfile::LogSpaced { min_w, max_w } => {
                if rb_count == 1 {
                    return vec![*min_w];
                }
                let ratio = max_w / min_w;
                (0..rb_count)
                    .map(|n| min_w * ratio.powf(n as f64 / (rb_count - 1) as f64))
                    .collect()
            }
            InterferenceProfile::Explicit { watts } => watts.clone(),
        }
    }
}

/// One device: geometry, data volume and compute constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub distance_m: f64,
    /// Mean of the exponential fading power.
    pub fading_scale: f64,
    pub sample_count: usize,
    pub cpu_cycles_per_bit: f64,
    pub cpu_freq_hz: f64,
    pub energy_coeff: f64,
    /// Bits in one model; the same for uplink and downlink.
    pub payload_bits: f64,
}

impl UserProfile {
    /// Reference device at `distance_m` holding `sample_count` samples.
    pub fn reference(distance_m: f64, sample_count: usize) -> Self {
        Self {
            distance_m,
            fading_scale: 1.0,
            sample_count,
            cpu_cycles_per_bit: 40.0,
            cpu_freq_hz: 1e9,
            energy_coeff: 1e-27,
            payload_bits: 5e4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance_m", self.distance_m),
            ("fading_scale", self.fading_scale),
            ("cpu_cycles_per_bit", self.cpu_cycles_per_bit),
            ("cpu_freq_hz", self.cpu_freq_hz),
            ("energy_coeff", self.energy_coeff),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    format!("users.{key}"),
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if self.sample_count == 0 {
            return Err(Error::invalid("users.sample_counts", "must be >= 1"));
        }
        if !(self.payload_bits.is_finite() && self.payload_bits >= 0.0) {
            return Err(Error::invalid("users.payload_bits", "must be >= 0"));
        }
        Ok(())
    }

    /// Local computation energy `ς ω ϑ² Z`.
    pub fn training_energy_j(&self) -> f64 {
        self.energy_coeff * self.cpu_cycles_per_bit * self.cpu_freq_hz.powi(2) * self.payload_bits
    }
}

/// `h = o · d^-α`.
pub fn channel_gain(user: &UserProfile, fading_draw: f64, pathloss_exponent: f64) -> Result<f64> {
    if !(user.distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be > 0, got {}",
            user.distance_m
        )));
    }
    if !(fading_draw > 0.0) {
        return Err(Error::Domain(format!(
            "fading draw must be > 0, got {fading_draw}"
        )));
    }
    Ok(fading_draw * user.distance_m.powf(-pathloss_exponent))
}

/// Link evaluator: network parameters bound to a prepared fading rule.
#[derive(Debug, Clone)]
pub struct LinkModel {
    params: NetworkParams,
    rule: FadingRule,
}

impl LinkModel {
    pub fn new(params: NetworkParams, fading: &FadingExpectation) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            rule: fading.rule()?,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    fn mean_gain(&self, user: &UserProfile) -> f64 {
        user.fading_scale * user.distance_m.powf(-self.params.pathloss_exponent)
    }

    fn check_rb(&self, rb: usize) {
        assert!(
            rb < self.params.rb_count,
            "RB index {rb} out of range (R = {})",
            self.params.rb_count
        );
    }

    /// `B^U · E[log2(1 + P h / (I_n + B^U N0))]` in bit/s.
    pub fn expected_uplink_rate(&self, user: &UserProfile, rb: usize, power_w: f64) -> f64 {
        self.check_rb(rb);
        debug_assert!(power_w >= 0.0);
        if power_w <= 0.0 {
            return 0.0;
        }
        let snr_per_unit_fading = power_w / self.params.uplink_noise_w(rb);
        self.params.rb_bandwidth_hz * self.expected_log2_1p(user, snr_per_unit_fading)
    }

    /// `B^D · E[log2(1 + P_B h / (I^D + B^D N0))]` in bit/s.
    pub fn expected_downlink_rate(&self, user: &UserProfile) -> f64 {
        if self.params.bs_power_w <= 0.0 {
            return 0.0;
        }
        let snr_per_unit_fading = self.params.bs_power_w / self.params.downlink_noise_w();
        self.params.downlink_bandwidth_hz * self.expected_log2_1p(user, snr_per_unit_fading)
    }

    fn expected_log2_1p(&self, user: &UserProfile, snr_per_unit_gain: f64) -> f64 {
        let scale = snr_per_unit_gain * self.mean_gain(user);
        self.rule.expect(scale, f64::ln_1p) / std::f64::consts::LN_2
    }

    /// Seconds to send one model upstream; infinite when the rate is zero.
    pub fn uplink_delay(&self, user: &UserProfile, rb: usize, power_w: f64) -> f64 {
        delay(user.payload_bits, self.expected_uplink_rate(user, rb, power_w))
    }

    pub fn downlink_delay(&self, user: &UserProfile) -> f64 {
        delay(user.payload_bits, self.expected_downlink_rate(user))
    }

    /// `E[1 - exp(-m (I_n + B^U N0) / (P h))]`, clamped to [0, 1]. Exactly 1 at zero power.
    pub fn packet_error_rate(&self, user: &UserProfile, rb: usize, power_w: f64) -> f64 {
        self.check_rb(rb);
        if power_w <= 0.0 {
            return 1.0;
        }
        // exponent = m / (snr · u) with snr the mean received SNR.
        let mean_snr = power_w * self.mean_gain(user) / self.params.uplink_noise_w(rb);
        let m = self.params.waterfall_threshold;
        let q = self.rule.expect(mean_snr, |snr| -(-m / snr).exp_m1());
        q.clamp(0.0, 1.0)
    }

    /// Training plus transmit energy, `ς ω ϑ² Z + P · l^U`.
    ///
    /// At zero power with a non-empty payload the transmission never completes,
    /// so the energy is reported as infinite.
    pub fn user_energy(&self, user: &UserProfile, rb: usize, power_w: f64) -> f64 {
        let training = user.training_energy_j();
        if user.payload_bits == 0.0 {
            return training;
        }
        if power_w <= 0.0 {
            return f64::INFINITY;
        }
        training + power_w * self.uplink_delay(user, rb, power_w)
    }

    /// Uplink plus downlink delay at `power_w`.
    pub fn round_delay(&self, user: &UserProfile, rb: usize, power_w: f64) -> f64 {
        self.uplink_delay(user, rb, power_w) + self.downlink_delay(user)
    }
}

fn delay(bits: f64, rate: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}
