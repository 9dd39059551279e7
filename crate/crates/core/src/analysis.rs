//! Numerical checks of the first-order effective-rotation formulas.
//!
//! Every analytic prediction here is a truncation at first order in the
//! pulse errors, so it is checked as an order-of-error statement: the
//! discrepancy between the exact cycle propagator and the prediction is
//! measured while all pulse errors are scaled by `s ∈ {1, 1/2, 1/4, 1/8}`,
//! and the ratio of successive discrepancies must approach `2^p` for an
//! `O(s^p)` residual.
//!
//! Rotations are compared through their rotation vectors (angle × axis,
//! angle folded into `[0, π]`), i.e. on the SO(3) image, which makes every
//! comparison insensitive to the global phase.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::error_model::ErrorRealization;
use crate::rotation::Rotation;
use crate::sequence::{build_cdd, build_pdd, build_pdd_half, build_sdd, PulseProgram, Variant};
use crate::simulator::cycle_propagator;
use crate::vector::{self, Vec3};

/// Error scales used by the convergence sweeps.
pub const SWEEP: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Relative half-width of the accepted window around `2^p`; for `p = 2`
/// this is `[3.4, 4.6]`.
pub const RATIO_WINDOW: f64 = 0.15;

/// A predicted effective rotation `δθ` about `axis` per cycle (modulo 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub axis: Vec3,
    pub delta_theta: f64,
}

impl Prediction {
    pub fn rotation_vector(&self) -> Vec3 {
        vector::scale(self.axis, self.delta_theta)
    }
}

/// XY PDD: axis `(0, 0, −1)`, `δθ = 4 (m_x + n_y)`, independent of `B`.
pub fn predict_xy_pdd(real: &ErrorRealization) -> Prediction {
    Prediction {
        axis: [0.0, 0.0, -1.0],
        delta_theta: 4.0 * (real.m_x + real.n_y),
    }
}

/// XZ PDD: axis `(0, −1, 0)`. With π_Z realized as π_X π_Y,
/// `δθ = 2[−ε_y + ε_x sin φ_d + 2 n_z (1 − cos φ_d)]`; with a direct π_Z
/// pulse whose axis has in-plane component `p_x`,
/// `δθ = 2[−2 p_x + ε_x sin φ_d − 2 n_z cos φ_d]`.
pub fn predict_xz_pdd(real: &ErrorRealization, phi_d: f64, direct_z: bool) -> Prediction {
    let (s, c) = phi_d.sin_cos();
    let delta_theta = if direct_z {
        2.0 * (-2.0 * real.p_x + real.epsilon_x * s - 2.0 * real.n_z * c)
    } else {
        2.0 * (-real.epsilon_y + real.epsilon_x * s + 2.0 * real.n_z * (1.0 - c))
    };
    Prediction {
        axis: [0.0, -1.0, 0.0],
        delta_theta,
    }
}

/// Half-period XY prediction: rotation by `π + 2(m_x + n_y)` about `a'`.
pub fn predict_xy_half(real: &ErrorRealization, phi_d: f64) -> Prediction {
    let (s, c) = phi_d.sin_cos();
    let axis = [
        -real.epsilon_y / 2.0 + real.n_z * c - real.epsilon_x / 2.0 * s,
        real.m_z - real.epsilon_x / 2.0 * c - real.n_z * s,
        -1.0,
    ];
    Prediction {
        axis,
        delta_theta: std::f64::consts::PI + 2.0 * (real.m_x + real.n_y),
    }
}

/// Phase accumulated during one delay, `φ_d = γe B τ`.
pub fn delay_phase(real: &ErrorRealization, gamma_e: f64, tau: f64) -> f64 {
    gamma_e * real.detuning * tau
}

/// Extracted vs predicted effective rotation of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRotationReport {
    pub extracted_axis: Vec3,
    /// Residual angle, signed by the orientation of the extracted axis
    /// relative to the predicted one.
    pub extracted_delta_theta: f64,
    pub predicted_axis: Vec3,
    pub predicted_delta_theta: f64,
    /// `|δθ_extracted − δθ_predicted|`
    pub angle_discrepancy: f64,
    /// Norm of the difference of the two rotation vectors.
    pub vector_discrepancy: f64,
}

pub fn effective_rotation_report(cycle: &Rotation, prediction: &Prediction) -> EffectiveRotationReport {
    let aa = cycle.axis_angle();
    let sign = if vector::dot(aa.axis, prediction.axis) < 0.0 { -1.0 } else { 1.0 };
    let extracted_delta_theta = sign * aa.angle;
    let extracted = aa.rotation_vector();
    EffectiveRotationReport {
        extracted_axis: aa.axis,
        extracted_delta_theta,
        predicted_axis: prediction.axis,
        predicted_delta_theta: prediction.delta_theta,
        angle_discrepancy: (extracted_delta_theta - prediction.delta_theta).abs(),
        vector_discrepancy: vector::norm(vector::sub(extracted, prediction.rotation_vector())),
    }
}

/// Outcome of an error-scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub expected_order: u32,
    pub scales: Vec<f64>,
    pub discrepancies: Vec<f64>,
    /// `discrepancy(s) / discrepancy(s/2)` for successive scales.
    pub ratios: Vec<f64>,
    /// When set, faster convergence than `expected_order` also passes.
    pub at_least: bool,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Accepted range of halving ratios for an `O(s^order)` residual.
pub fn ratio_window(order: u32) -> (f64, f64) {
    let r = 2f64.powi(order as i32);
    (r * (1.0 - RATIO_WINDOW), r * (1.0 + RATIO_WINDOW))
}

/// Evaluates `discrepancy` on [`SWEEP`] and checks that every halving
/// ratio lies in [`ratio_window`]`(expected_order)`.
pub fn convergence_sweep(
    label: impl Into<String>,
    expected_order: u32,
    discrepancy: impl FnMut(f64) -> Result<f64>,
) -> Result<ConvergenceReport> {
    sweep(label.into(), expected_order, false, discrepancy)
}

/// Like [`convergence_sweep`] but only the lower end of the window is
/// enforced: the residual is `O(s^expected_order)` or smaller.
pub fn convergence_sweep_at_least(
    label: impl Into<String>,
    expected_order: u32,
    discrepancy: impl FnMut(f64) -> Result<f64>,
) -> Result<ConvergenceReport> {
    sweep(label.into(), expected_order, true, discrepancy)
}

fn sweep(
    label: String,
    expected_order: u32,
    at_least: bool,
    mut discrepancy: impl FnMut(f64) -> Result<f64>,
) -> Result<ConvergenceReport> {
    let scales = SWEEP.to_vec();
    let discrepancies = scales.iter().map(|&s| discrepancy(s)).collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = discrepancies.windows(2).map(|w| w[0] / w[1]).collect();
    let (lo, hi) = ratio_window(expected_order);
    let passed = ratios
        .iter()
        .all(|&r| r.is_finite() && r >= lo && (at_least || r <= hi));
    Ok(ConvergenceReport {
        label,
        expected_order,
        scales,
        discrepancies,
        ratios,
        at_least,
        passed,
    })
}

/// First-order formula to check against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstOrderFormula {
    XyPdd,
    /// XZ PDD with π_Z realized as π_X π_Y.
    XzPddSubstituted,
    /// XZ PDD with a direct, imperfect π_Z pulse.
    XzPddDirect,
}

impl FirstOrderFormula {
    pub fn program(self, tau: f64) -> Result<PulseProgram> {
        Ok(match self {
            FirstOrderFormula::XyPdd => build_pdd(Variant::Xy, tau)?,
            FirstOrderFormula::XzPddSubstituted => build_pdd(Variant::Xz, tau)?.with_z_substitution(),
            FirstOrderFormula::XzPddDirect => build_pdd(Variant::Xz, tau)?,
        })
    }

    pub fn predict(self, real: &ErrorRealization, phi_d: f64) -> Prediction {
        match self {
            FirstOrderFormula::XyPdd => predict_xy_pdd(real),
            FirstOrderFormula::XzPddSubstituted => predict_xz_pdd(real, phi_d, false),
            FirstOrderFormula::XzPddDirect => predict_xz_pdd(real, phi_d, true),
        }
    }
}

/// Checks that the exact cycle propagator of `formula`'s program differs
/// from the first-order prediction by `O(s²)` when all pulse errors of
/// `real` are scaled by `s`.
pub fn verify_first_order(
    formula: FirstOrderFormula,
    real: &ErrorRealization,
    gamma_e: f64,
    tau: f64,
) -> Result<ConvergenceReport> {
    let prog = formula.program(tau)?;
    let phi_d = delay_phase(real, gamma_e, tau);
    convergence_sweep(format!("{formula:?} phi_d={phi_d:.4}"), 2, |s| {
        let r = real.scaled(s);
        let u = cycle_propagator(&prog, &r, gamma_e)?;
        Ok(effective_rotation_report(&u, &formula.predict(&r, phi_d)).vector_discrepancy)
    })
}

/// Half- versus full-period structure of XY PDD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriodReport {
    /// Transverse (x, y) deviation of the half-period axis from −z: `O(s)`.
    pub half_axis: ConvergenceReport,
    /// Transverse part of the full-period rotation vector: `O(s²)` or smaller.
    pub full_transverse: ConvergenceReport,
    /// `max |U_half² − U_full|` over the sweep (phase-insensitive distance).
    pub square_mismatch: f64,
}

pub fn verify_half_period(real: &ErrorRealization, gamma_e: f64, tau: f64) -> Result<HalfPeriodReport> {
    let half = build_pdd_half(Variant::Xy, tau)?;
    let full = build_pdd(Variant::Xy, tau)?;
    let mut mismatch: f64 = 0.0;
    let half_axis = convergence_sweep("xy half-period axis", 1, |s| {
        let r = real.scaled(s);
        let u_half = cycle_propagator(&half, &r, gamma_e)?;
        let u_full = cycle_propagator(&full, &r, gamma_e)?;
        mismatch = mismatch.max(u_half.then(&u_half).distance(&u_full));
        let aa = u_half.axis_angle();
        let axis = if aa.axis[2] > 0.0 { vector::scale(aa.axis, -1.0) } else { aa.axis };
        Ok(axis[0].hypot(axis[1]))
    })?;
    let full_transverse = convergence_sweep_at_least("xy full-period transverse rotation", 2, |s| {
        let u = cycle_propagator(&full, &real.scaled(s), gamma_e)?;
        let v = u.axis_angle().rotation_vector();
        Ok(v[0].hypot(v[1]))
    })?;
    Ok(HalfPeriodReport {
        half_axis,
        full_transverse,
        square_mismatch: mismatch,
    })
}

/// Pairwise distances between CDD cycle propagators of successive levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CddInvarianceReport {
    pub variant: Variant,
    pub levels: Vec<u32>,
    /// `distances[i][j]`: distance between levels `levels[i]` and `levels[j]`.
    pub distances: Vec<Vec<f64>>,
    pub max_distance: f64,
}

/// Cycle propagators of CDD levels `levels` for one realization. For XZ,
/// `level1_at_zero_detuning` evaluates level 1 at `B = 0` (the form to
/// which the higher levels are equal to first order).
pub fn cdd_propagators(
    variant: Variant,
    levels: &[u32],
    real: &ErrorRealization,
    gamma_e: f64,
    tau: f64,
    level1_at_zero_detuning: bool,
) -> Result<Vec<Rotation>> {
    levels
        .iter()
        .map(|&n| {
            let prog = build_cdd(variant, n, tau, true)?;
            let r = if n == 1 && level1_at_zero_detuning {
                real.with_detuning(0.0)
            } else {
                *real
            };
            cycle_propagator(&prog, &r, gamma_e)
        })
        .collect()
}

pub fn verify_cdd_invariance(
    variant: Variant,
    levels: &[u32],
    real: &ErrorRealization,
    gamma_e: f64,
    tau: f64,
) -> Result<CddInvarianceReport> {
    let props = cdd_propagators(variant, levels, real, gamma_e, tau, variant == Variant::Xz)?;
    let distances: Vec<Vec<f64>> = props
        .iter()
        .map(|a| props.iter().map(|b| a.distance(b)).collect())
        .collect();
    let max_distance = distances.iter().flatten().fold(0.0f64, |m, &d| m.max(d));
    Ok(CddInvarianceReport {
        variant,
        levels: levels.to_vec(),
        distances,
        max_distance,
    })
}

/// Scaling of the largest pairwise distance between CDD levels.
/// `level1_at_zero_detuning` selects the XZ comparison form. With
/// `expected_order == 1` the order must match exactly (the distance is
/// genuinely first order); otherwise it is a lower bound.
pub fn cdd_invariance_sweep(
    variant: Variant,
    levels: &[u32],
    real: &ErrorRealization,
    gamma_e: f64,
    tau: f64,
    level1_at_zero_detuning: bool,
    expected_order: u32,
) -> Result<ConvergenceReport> {
    let label = format!("{variant} cdd levels {levels:?}");
    let at_least = expected_order > 1;
    sweep(label, expected_order, at_least, |s| {
        let props = cdd_propagators(variant, levels, &real.scaled(s), gamma_e, tau, level1_at_zero_detuning)?;
        let mut max: f64 = 0.0;
        for (i, a) in props.iter().enumerate() {
            for b in &props[i + 1..] {
                max = max.max(a.distance(b));
            }
        }
        Ok(max)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSddReport {
    pub epsilon_y: f64,
    /// Rotation vector of the reduced-SDD cycle.
    pub reduced_rotation: Vec3,
    /// Expected rotation vector `(0, −2ε_y, 0)`, from `U = −1 − iε_y σ_y`.
    pub predicted_rotation: Vec3,
    pub reduced_discrepancy: f64,
    pub full_residual_angle: f64,
}

/// Reduced versus full XY SDD at `m_x = n_y = n_z = 0`, `B = 0`: the
/// reduced cycle is `−1 − iε_y σ_y`, a rotation by `2ε_y` about `−y`,
/// while the full cycle is the identity to first order.
pub fn verify_reduced_sdd(real: &ErrorRealization, gamma_e: f64, tau: f64) -> Result<ReducedSddReport> {
    let r = ErrorRealization {
        m_x: 0.0,
        n_y: 0.0,
        n_z: 0.0,
        m_z: 0.0,
        detuning: 0.0,
        ..*real
    };
    let reduced = cycle_propagator(&build_sdd(tau, true)?, &r, gamma_e)?;
    let full = cycle_propagator(&build_sdd(tau, false)?, &r, gamma_e)?;
    let reduced_rotation = reduced.axis_angle().rotation_vector();
    let predicted_rotation = [0.0, -2.0 * r.epsilon_y, 0.0];
    Ok(ReducedSddReport {
        epsilon_y: r.epsilon_y,
        reduced_rotation,
        predicted_rotation,
        reduced_discrepancy: vector::norm(vector::sub(reduced_rotation, predicted_rotation)),
        full_residual_angle: full.residual_angle(),
    })
}

/// Residual angle of the full XY-SDD cycle under the error sweep.
pub fn sdd_residual_sweep(real: &ErrorRealization, gamma_e: f64, tau: f64, expected_order: u32) -> Result<ConvergenceReport> {
    let prog = build_sdd(tau, false)?;
    convergence_sweep("xy-sdd residual", expected_order, |s| {
        Ok(cycle_propagator(&prog, &real.scaled(s), gamma_e)?.residual_angle())
    })
}
