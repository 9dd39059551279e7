//! Mean-field Bloch dynamics of the whole ensemble with radiation damping
//! and finite-duration square-wave pulses.
//!
//! Every spin precesses as `dm_i/dt = Ω_i × m_i + ω_r(𝓜) × m_i`, where
//! `Ω_i = γe (B_i ẑ + drive_i)` is the spin's own field (detuning plus, during
//! a pulse, the drive along its perturbed axis) and
//! `ω_r = γe B_r = (−𝓜_y, 𝓜_x, 0)/τ_r` is the damping field shared through
//! the net magnetization `𝓜 = (1/M) Σ m_i`. The sense of precession is the
//! one used by the instantaneous-pulse simulator, and with it the damping
//! field drives `𝓜` back toward the equilibrium `−z`.
//!
//! Segments without damping are applied as one exact rotation per spin.
//! Segments with damping use a Lawson (integrating-factor) RK4 step: the
//! per-spin linear part is propagated exactly, the shared nonlinear term by
//! classical RK4, so the step is limited by `τ_r` rather than by the Rabi
//! or detuning frequencies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::error_model::{realization, ErrorParameters, ErrorRealization};
use crate::rotation::Rotation;
use crate::sequence::{build_cdd, PulseAxis, PulseProgram, Instruction, Variant};
use crate::simulator::{mean_and_stderr, perturbed_axis, with_workers, EnsembleConfig, InitialState};
use crate::vector::{self, Mat3, Vec3};

/// Largest accepted deviation of any `|m_i|` from its initial value.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Default step inside pulses, as a fraction of `t_p`.
pub const PULSE_STEPS_PER_TP: f64 = 100.0;

/// Default step inside delays, seconds.
pub const DEFAULT_DELAY_DT: f64 = 20e-9;

const PAR_MIN_LEN: usize = 256;

/// Which parts of the evolution feel the damping field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum RdCase {
    /// No damping (`τ_r = ∞`).
    A,
    /// Damping only during the delays between pulses.
    B,
    /// Damping throughout.
    C,
}

impl RdCase {
    pub const ALL: [RdCase; 3] = [RdCase::A, RdCase::B, RdCase::C];
}

impl fmt::Display for RdCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RdCase::A => "A",
            RdCase::B => "B",
            RdCase::C => "C",
        })
    }
}

impl FromStr for RdCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(RdCase::A),
            "B" => Ok(RdCase::B),
            "C" => Ok(RdCase::C),
            other => Err(invalid("rd_case", format!("expected A, B or C, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdParameters {
    /// Damping time constant, seconds; `f64::INFINITY` disables damping.
    pub tau_r: f64,
    /// π-pulse duration, seconds.
    pub t_p: f64,
    /// Mean drive amplitude, Gauss.
    pub b_p_mean: f64,
    pub rd_during_pulses: bool,
    pub rd_during_delays: bool,
    /// Step inside pulses.
    pub dt: f64,
    /// Step inside delays.
    pub delay_dt: f64,
}

impl RdParameters {
    /// Damping on throughout, `B̄_p = π/(γe t_p)` and default steps.
    pub fn new(tau_r: f64, t_p: f64, gamma_e: f64) -> Self {
        Self {
            tau_r,
            t_p,
            b_p_mean: PI / (gamma_e * t_p),
            rd_during_pulses: true,
            rd_during_delays: true,
            dt: t_p / PULSE_STEPS_PER_TP,
            delay_dt: DEFAULT_DELAY_DT,
        }
    }

    /// `τ_r = 2 μs`, `t_p = 0.18 μs`.
    pub fn reference(gamma_e: f64) -> Self {
        Self::new(2e-6, 0.18e-6, gamma_e)
    }

    /// Copy with the damping flags (and for case A, `τ_r`) set for `case`.
    pub fn for_case(&self, case: RdCase) -> Self {
        let mut p = *self;
        match case {
            RdCase::A => {
                p.tau_r = f64::INFINITY;
                p.rd_during_pulses = false;
                p.rd_during_delays = false;
            }
            RdCase::B => {
                p.rd_during_pulses = false;
                p.rd_during_delays = true;
            }
            RdCase::C => {
                p.rd_during_pulses = true;
                p.rd_during_delays = true;
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_r > 0.0) {
            return Err(invalid("tau_r", "must be > 0 or infinite"));
        }
        if !(self.t_p > 0.0 && self.t_p.is_finite()) {
            return Err(invalid("t_p", "must be finite and > 0"));
        }
        if !(self.b_p_mean > 0.0 && self.b_p_mean.is_finite()) {
            return Err(invalid("b_p", "must be finite and > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_p / 50.0) {
            return Err(invalid("rd_dt", format!("must be in (0, t_p/50], got {:e}", self.dt)));
        }
        if !(self.delay_dt > 0.0 && self.delay_dt.is_finite()) {
            return Err(invalid("rd_delay_dt", "must be finite and > 0"));
        }
        Ok(())
    }

    fn damping_active(&self, kind: SegmentKind) -> bool {
        self.tau_r.is_finite()
            && match kind {
                SegmentKind::Free => self.rd_during_delays,
                SegmentKind::Drive(_) => self.rd_during_pulses,
            }
    }
}

/// `γe B_r = (−𝓜_y, 𝓜_x, 0)/τ_r`, in rad/s.
pub fn rd_angular_velocity(m: Vec3, tau_r: f64) -> Vec3 {
    if tau_r.is_infinite() {
        return [0.0; 3];
    }
    [-m[1] / tau_r, m[0] / tau_r, 0.0]
}

/// Damping field in Gauss.
pub fn rd_field(m: Vec3, tau_r: f64, gamma_e: f64) -> Vec3 {
    vector::scale(rd_angular_velocity(m, tau_r), 1.0 / gamma_e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Free,
    Drive(PulseAxis),
}

/// Piece of a finite-duration schedule with a constant field per spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

/// Replaces every pulse by a square-wave drive lasting `t_p·angle/π`. A run
/// of adjacent pulses takes its total duration from the end of the delay
/// that precedes it, so the cycle period is unchanged.
pub fn expand_schedule(prog: &PulseProgram, t_p: f64) -> Result<Vec<Segment>> {
    let mut out: Vec<Segment> = Vec::with_capacity(prog.instructions().len());
    let mut pending: Vec<Segment> = Vec::new();
    let flush = |out: &mut Vec<Segment>, pending: &mut Vec<Segment>| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let need: f64 = pending.iter().map(|s| s.duration).sum();
        match out.last_mut() {
            Some(Segment { kind: SegmentKind::Free, duration }) if *duration > need => {
                *duration -= need;
            }
            _ => {
                return Err(invalid(
                    "t_p",
                    format!("pulses totalling {need:e} s need a longer preceding delay"),
                ))
            }
        }
        out.append(pending);
        Ok(())
    };
    for ins in prog.instructions() {
        match *ins {
            Instruction::Delay(d) => {
                flush(&mut out, &mut pending)?;
                out.push(Segment { kind: SegmentKind::Free, duration: d });
            }
            Instruction::Pulse { axis: PulseAxis::Z, .. } => {
                return Err(invalid(
                    "sequence",
                    "direct Z pulses have no finite drive; use Z-substitution",
                ))
            }
            Instruction::Pulse { axis, angle } => pending.push(Segment {
                kind: SegmentKind::Drive(axis),
                duration: t_p * angle / PI,
            }),
        }
    }
    flush(&mut out, &mut pending)?;
    Ok(out)
}

/// Spins of the ensemble together with their error draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBlochState {
    pub spins: Vec<Vec3>,
    pub errors: Vec<ErrorRealization>,
}

impl EnsembleBlochState {
    pub fn uniform(errors: Vec<ErrorRealization>, m: Vec3) -> Self {
        Self {
            spins: vec![m; errors.len()],
            errors,
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// `𝓜 = (1/M) Σ m_i`, reduced in a fixed order.
    pub fn net_magnetization(&self) -> Vec3 {
        mean(&self.spins, |v| *v)
    }
}

fn mean<T>(items: &[T], f: impl Fn(&T) -> Vec3 + Copy) -> Vec3 {
    vector::scale(vector::pairwise_sum_vec3_by(items, f), 1.0 / items.len() as f64)
}

/// Net magnetization at the end of every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub magnetization: Vec<Vec3>,
    pub max_norm_drift: f64,
}

fn spin_omega(kind: SegmentKind, real: &ErrorRealization, rd: &RdParameters, gamma_e: f64) -> Result<Vec3> {
    let free = [0.0, 0.0, gamma_e * real.detuning];
    Ok(match kind {
        SegmentKind::Free => free,
        SegmentKind::Drive(axis) => {
            let (dir, eps) = perturbed_axis(axis, real)?;
            vector::axpy(free, gamma_e * rd.b_p_mean + eps / rd.t_p, dir)
        }
    })
}

#[derive(Clone, Copy, Default)]
struct Slot {
    y: Vec3,
    half: Mat3,
    full: Mat3,
    k1: Vec3,
    acc: Vec3,
    stage: Vec3,
}

fn rotation_matrix(omega: Vec3, t: f64) -> Mat3 {
    Rotation::from_rotation_vector(vector::scale(omega, t)).matrix()
}

/// Integrates the ensemble through `segments`. Results do not depend on
/// `workers`: spins are updated independently and every mean is reduced
/// in a fixed order.
pub fn integrate_ensemble(
    state: &mut EnsembleBlochState,
    segments: &[Segment],
    rd: &RdParameters,
    gamma_e: f64,
    workers: usize,
) -> Result<Trajectory> {
    rd.validate()?;
    if state.is_empty() {
        return Err(invalid("ensemble", "ensemble size must be >= 1"));
    }
    if workers == 0 {
        return Err(invalid("workers", "worker count must be >= 1"));
    }
    with_workers(workers, || integrate_inner(state, segments, rd, gamma_e))
}

fn integrate_inner(
    state: &mut EnsembleBlochState,
    segments: &[Segment],
    rd: &RdParameters,
    gamma_e: f64,
) -> Result<Trajectory> {
    let initial_norms: Vec<f64> = state.spins.iter().map(|m| vector::norm(*m)).collect();
    let mut slots: Vec<Slot> = state.spins.iter().map(|&y| Slot { y, ..Default::default() }).collect();
    let mut traj = Trajectory {
        times: Vec::with_capacity(segments.len()),
        magnetization: Vec::with_capacity(segments.len()),
        max_norm_drift: 0.0,
    };
    let mut t = 0.0;
    for seg in segments {
        let omegas = state
            .errors
            .par_iter()
            .map(|r| spin_omega(seg.kind, r, rd, gamma_e))
            .collect::<Result<Vec<_>>>()?;
        if rd.damping_active(seg.kind) {
            let h_max = match seg.kind {
                SegmentKind::Free => rd.delay_dt,
                SegmentKind::Drive(_) => rd.dt,
            };
            let steps = (seg.duration / h_max - 1e-9).ceil().max(1.0) as usize;
            let h = seg.duration / steps as f64;
            slots.par_iter_mut().zip(&omegas).with_min_len(PAR_MIN_LEN).for_each(|(s, &w)| {
                s.half = rotation_matrix(w, h / 2.0);
                s.full = rotation_matrix(w, h);
            });
            let mut m = mean(&slots, |s| s.y);
            for _ in 0..steps {
                m = lawson_rk4_step(&mut slots, m, h, rd.tau_r);
            }
            t += seg.duration;
            let (spin, drift) = max_drift(&slots, &initial_norms);
            traj.max_norm_drift = traj.max_norm_drift.max(drift);
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::NormDrift {
                    spin,
                    drift,
                    time: t,
                    limit: NORM_DRIFT_LIMIT,
                });
            }
        } else {
            slots.par_iter_mut().zip(&omegas).with_min_len(PAR_MIN_LEN).for_each(|(s, &w)| {
                s.y = Rotation::from_rotation_vector(vector::scale(w, seg.duration)).rotate(s.y);
            });
            t += seg.duration;
        }
        traj.times.push(t);
        traj.magnetization.push(mean(&slots, |s| s.y));
    }
    for (m, s) in state.spins.iter_mut().zip(&slots) {
        *m = s.y;
    }
    Ok(traj)
}

/// One Lawson RK4 step. `m` is the net magnetization of the current state;
/// the return value is that of the new state.
fn lawson_rk4_step(slots: &mut [Slot], m: Vec3, h: f64, tau_r: f64) -> Vec3 {
    use vector::{axpy, cross, mat_vec};
    let w1 = rd_angular_velocity(m, tau_r);
    slots.par_iter_mut().with_min_len(PAR_MIN_LEN).for_each(|s| {
        s.k1 = cross(w1, s.y);
        s.stage = mat_vec(&s.half, axpy(s.y, h / 2.0, s.k1));
        s.acc = mat_vec(&s.full, s.k1);
    });
    let w2 = rd_angular_velocity(mean(slots, |s| s.stage), tau_r);
    slots.par_iter_mut().with_min_len(PAR_MIN_LEN).for_each(|s| {
        let k2 = cross(w2, s.stage);
        s.acc = axpy(s.acc, 2.0, mat_vec(&s.half, k2));
        s.stage = axpy(mat_vec(&s.half, s.y), h / 2.0, k2);
    });
    let w3 = rd_angular_velocity(mean(slots, |s| s.stage), tau_r);
    slots.par_iter_mut().with_min_len(PAR_MIN_LEN).for_each(|s| {
        let ek3 = mat_vec(&s.half, cross(w3, s.stage));
        s.acc = axpy(s.acc, 2.0, ek3);
        s.stage = axpy(mat_vec(&s.full, s.y), h, ek3);
    });
    let w4 = rd_angular_velocity(mean(slots, |s| s.stage), tau_r);
    slots.par_iter_mut().with_min_len(PAR_MIN_LEN).for_each(|s| {
        let k4 = cross(w4, s.stage);
        s.y = axpy(mat_vec(&s.full, s.y), h / 6.0, vector::add(s.acc, k4));
    });
    mean(slots, |s| s.y)
}

fn max_drift(slots: &[Slot], initial: &[f64]) -> (usize, f64) {
    slots
        .iter()
        .zip(initial)
        .map(|(s, n0)| (vector::norm(s.y) - n0).abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdOutcome {
    pub fidelity: f64,
    pub stderr: f64,
    pub max_norm_drift: f64,
}

/// Fidelity of `initial` (`+z` or `−z`) after one XY CDD level-`level`
/// cycle. All spins start at equilibrium `−z`; for `+z` a finite,
/// imperfect π_X preparation pulse is applied first.
pub fn run_rd_experiment(
    params: &ErrorParameters,
    rd: &RdParameters,
    level: u32,
    case: RdCase,
    initial: InitialState,
    ensemble: &EnsembleConfig,
) -> Result<RdOutcome> {
    params.validate()?;
    ensemble.validate()?;
    let target = match initial {
        InitialState::PlusZ => 1.0,
        InitialState::MinusZ => -1.0,
        other => return Err(invalid("initial_state", format!("damping runs need +z or -z, got {other}"))),
    };
    let rd = rd.for_case(case);
    let mut segments = Vec::new();
    if target > 0.0 {
        segments.push(Segment {
            kind: SegmentKind::Drive(PulseAxis::X),
            duration: rd.t_p,
        });
    }
    segments.extend(expand_schedule(&build_cdd(Variant::Xy, level, params.tau, true)?, rd.t_p)?);
    let errors: Vec<ErrorRealization> = (0..ensemble.size as u64)
        .map(|i| realization(params, ensemble.seed, i))
        .collect();
    let mut state = EnsembleBlochState::uniform(errors, [0.0, 0.0, -1.0]);
    let traj = integrate_ensemble(&mut state, &segments, &rd, params.gamma_e, ensemble.workers)?;
    let f: Vec<f64> = state.spins.iter().map(|m| target * m[2]).collect();
    let sum = vector::pairwise_sum(&f);
    let sum_sq = vector::pairwise_sum(&f.iter().map(|v| v * v).collect::<Vec<_>>());
    let (fidelity, stderr) = mean_and_stderr(sum, sum_sq, f.len());
    Ok(RdOutcome {
        fidelity,
        stderr,
        max_norm_drift: traj.max_norm_drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdTableRow {
    pub level: u32,
    pub case: RdCase,
    pub f_plus_z: f64,
    pub f_minus_z: f64,
    pub stderr_plus_z: f64,
    pub stderr_minus_z: f64,
}

/// Both initial states for every (level, case) pair, ordered by level then case.
pub fn run_rd_table(
    params: &ErrorParameters,
    rd: &RdParameters,
    levels: &[u32],
    cases: &[RdCase],
    ensemble: &EnsembleConfig,
) -> Result<Vec<RdTableRow>> {
    let mut rows = Vec::with_capacity(levels.len() * cases.len());
    for &level in levels {
        for &case in cases {
            let plus = run_rd_experiment(params, rd, level, case, InitialState::PlusZ, ensemble)?;
            let minus = run_rd_experiment(params, rd, level, case, InitialState::MinusZ, ensemble)?;
            rows.push(RdTableRow {
                level,
                case,
                f_plus_z: plus.fidelity,
                f_minus_z: minus.fidelity,
                stderr_plus_z: plus.stderr,
                stderr_minus_z: minus.stderr,
            });
        }
    }
    Ok(rows)
}
