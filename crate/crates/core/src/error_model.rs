//! Per-spin systematic error realizations.
//!
//! Each spin sees a static detuning `B` (Gaussian, rms `b`), a pulse angle
//! error `ε` and an axis tilt `n_z`. The two pulse errors come from a
//! quadratic profile over the sample: with a latent position `u` uniform on
//! `[−1, 1]`, an error of amplitude `a0` is `a0 (1 − 3u²)`, which lies in
//! `[−2 a0, a0]` for `a0 > 0` (and the mirrored range for `a0 < 0`).
//!
//! Realizations are drawn from a counter-based stream keyed by
//! `(seed, index)`, so realization `i` is the same no matter how the
//! ensemble is split across workers.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Free-electron gyromagnetic ratio, rad·s⁻¹·G⁻¹ (2π × 2.8025 MHz/G).
pub const GAMMA_E: f64 = 2.0 * PI * 2.8025e6;

/// How the angle error and the axis tilt of one spin relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeErrorCoupling {
    /// `ε` and `n_z` are both functions of the same sample position.
    #[default]
    SharedPosition,
    /// `ε` and `n_z` use independent latent positions.
    Independent,
}

impl std::str::FromStr for EdgeErrorCoupling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "shared" | "shared-position" => Ok(Self::SharedPosition),
            "independent" => Ok(Self::Independent),
            other => Err(format!("unknown coupling `{other}` (shared | independent)")),
        }
    }
}

impl std::fmt::Display for EdgeErrorCoupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SharedPosition => "shared",
            Self::Independent => "independent",
        })
    }
}

/// Distribution widths, constants and timing for one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorParameters {
    /// Gaussian detuning rms, Gauss.
    pub b: f64,
    /// Angle-error amplitude, radians.
    pub epsilon0: f64,
    /// Axis-tilt amplitude (dimensionless, may be negative).
    pub n0: f64,
    /// In-plane axis error of the nominal π_Y pulse (constant).
    pub m_x: f64,
    /// In-plane axis error of the nominal π_X pulse (constant).
    pub n_y: f64,
    /// In-plane axis components of a directly applied π_Z pulse (constant).
    pub p_x: f64,
    pub p_y: f64,
    /// rad·s⁻¹·G⁻¹
    pub gamma_e: f64,
    /// Inter-pulse delay, seconds.
    pub tau: f64,
    /// Pulse duration, seconds (only the finite-pulse model uses it).
    pub t_p: f64,
    pub coupling: EdgeErrorCoupling,
}

impl Default for ErrorParameters {
    fn default() -> Self {
        Self::reference()
    }
}

impl ErrorParameters {
    /// Si:P experiment values: τ = 11 μs, b = 50 mG, ε₀ = 0.3, n₀ = −0.12,
    /// t_p = 0.18 μs, no in-plane axis errors.
    pub fn reference() -> Self {
        Self {
            b: 0.050,
            epsilon0: 0.3,
            n0: -0.12,
            m_x: 0.0,
            n_y: 0.0,
            p_x: 0.0,
            p_y: 0.0,
            gamma_e: GAMMA_E,
            tau: 11e-6,
            t_p: 0.18e-6,
            coupling: EdgeErrorCoupling::default(),
        }
    }

    /// All pulse errors and the detuning switched off.
    pub fn ideal() -> Self {
        Self {
            b: 0.0,
            epsilon0: 0.0,
            n0: 0.0,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(invalid("b", format!("must be finite and >= 0, got {}", self.b)));
        }
        for (name, v) in [
            ("epsilon0", self.epsilon0),
            ("n0", self.n0),
            ("m_x", self.m_x),
            ("n_y", self.n_y),
            ("p_x", self.p_x),
            ("p_y", self.p_y),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if !(self.gamma_e.is_finite() && self.gamma_e > 0.0) {
            return Err(invalid("gamma_e", format!("must be > 0, got {}", self.gamma_e)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau", format!("must be > 0, got {}", self.tau)));
        }
        if !(self.t_p.is_finite() && self.t_p > 0.0 && self.t_p < self.tau) {
            return Err(invalid(
                "t_p",
                format!("must satisfy 0 < t_p < tau, got {}", self.t_p),
            ));
        }
        // the largest axis tilt must still leave a normalizable axis
        let nz_max = 2.0 * self.n0.abs();
        if self.n_y.powi(2) + nz_max.powi(2) >= 1.0 || self.m_x.powi(2) + nz_max.powi(2) >= 1.0 {
            return Err(invalid("n0", "axis errors too large to normalize the pulse axis"));
        }
        if self.p_x.powi(2) + self.p_y.powi(2) >= 1.0 {
            return Err(invalid("p_x", "direct π_Z axis errors too large"));
        }
        Ok(())
    }
}

/// The systematic errors seen by one spin, fixed for its whole evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ErrorRealization {
    /// Static detuning field along z, Gauss.
    pub detuning: f64,
    pub epsilon_x: f64,
    pub epsilon_y: f64,
    /// Angle error of a directly applied π_Z pulse.
    pub epsilon_z: f64,
    /// Axis of the nominal π_X pulse is `(√(1−n_y²−n_z²), n_y, n_z)`.
    pub n_y: f64,
    pub n_z: f64,
    /// Axis of the nominal π_Y pulse is `(m_x, √(1−m_x²−m_z²), m_z)`.
    pub m_x: f64,
    pub m_z: f64,
    /// Axis of a direct π_Z pulse is `(p_x, p_y, √(1−p_x²−p_y²))`.
    pub p_x: f64,
    pub p_y: f64,
}

impl ErrorRealization {
    /// Ideal pulses, no detuning.
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Same detuning, every pulse error multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            detuning: self.detuning,
            epsilon_x: s * self.epsilon_x,
            epsilon_y: s * self.epsilon_y,
            epsilon_z: s * self.epsilon_z,
            n_y: s * self.n_y,
            n_z: s * self.n_z,
            m_x: s * self.m_x,
            m_z: s * self.m_z,
            p_x: s * self.p_x,
            p_y: s * self.p_y,
        }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }
}

/// Detuning draw: Gaussian, mean 0, standard deviation `b`.
pub fn sample_detuning<R: Rng + ?Sized>(params: &ErrorParameters, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    params.b * z
}

/// Latent sample position, uniform on `[−1, 1]`.
pub fn sample_position<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// Quadratic-profile error at latent position `u`.
#[inline]
pub fn edge_error_at(amplitude: f64, u: f64) -> f64 {
    amplitude * (1.0 - 3.0 * u * u)
}

/// Draws `a0 (1 − 3u²)` with `u` uniform on `[−1, 1]`.
pub fn sample_edge_error<R: Rng + ?Sized>(amplitude: f64, rng: &mut R) -> f64 {
    edge_error_at(amplitude, sample_position(rng))
}

/// The counter-based stream for realization `index`.
pub fn realization_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the errors for one spin from `rng`.
///
/// The stream is always consumed in the same order (detuning, angle
/// position, tilt position) whatever the coupling, so switching the
/// coupling leaves `B` and `ε` of every spin unchanged.
pub fn draw_realization<R: Rng + ?Sized>(params: &ErrorParameters, rng: &mut R) -> ErrorRealization {
    let detuning = sample_detuning(params, rng);
    let u_angle = sample_position(rng);
    let u_tilt = sample_position(rng);
    let u_tilt = match params.coupling {
        EdgeErrorCoupling::SharedPosition => u_angle,
        EdgeErrorCoupling::Independent => u_tilt,
    };
    let epsilon = edge_error_at(params.epsilon0, u_angle);
    let n_z = edge_error_at(params.n0, u_tilt);
    ErrorRealization {
        detuning,
        epsilon_x: epsilon,
        epsilon_y: epsilon,
        epsilon_z: epsilon,
        n_y: params.n_y,
        n_z,
        m_x: params.m_x,
        m_z: n_z,
        p_x: params.p_x,
        p_y: params.p_y,
    }
}

/// Realization `index` of the ensemble identified by `seed`.
pub fn realization(params: &ErrorParameters, seed: u64, index: u64) -> ErrorRealization {
    draw_realization(params, &mut realization_stream(seed, index))
}
