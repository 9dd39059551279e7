//! Stroboscopic propagation of spins through pulse programs, single-spin
//! and ensemble-averaged fidelities.
//!
//! Fidelity is the Bloch-vector overlap between the initial state and the
//! state after `k` cycles, `F = n₀ · n_k`, which equals `2 Tr[ρ(t) S^α]`
//! for a pure initial state along `α`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::error_model::{realization, ErrorParameters, ErrorRealization};
use crate::rotation::{Rotation, RotationProduct, SpinState};
use crate::sequence::{Instruction, PulseAxis, PulseProgram};
use crate::vector::{self, Vec3};

/// Realizations per work item. Fixed so that partition boundaries, and
/// with them every floating-point sum, do not depend on the worker count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum InitialState {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "+z")]
    PlusZ,
    #[serde(rename = "-z")]
    MinusZ,
}

impl InitialState {
    pub const XYZ: [InitialState; 3] = [InitialState::X, InitialState::Y, InitialState::Z];

    pub fn bloch(self) -> Vec3 {
        match self {
            InitialState::X => vector::X_HAT,
            InitialState::Y => vector::Y_HAT,
            InitialState::Z | InitialState::PlusZ => vector::Z_HAT,
            InitialState::MinusZ => [0.0, 0.0, -1.0],
        }
    }

    pub fn spin_state(self) -> SpinState {
        SpinState::new(self.bloch()).expect("unit vector")
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialState::X => "x",
            InitialState::Y => "y",
            InitialState::Z => "z",
            InitialState::PlusZ => "+z",
            InitialState::MinusZ => "-z",
        })
    }
}

impl FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "x" => Ok(InitialState::X),
            "y" => Ok(InitialState::Y),
            "z" => Ok(InitialState::Z),
            "+z" => Ok(InitialState::PlusZ),
            "-z" => Ok(InitialState::MinusZ),
            other => Err(format!("unknown initial state `{other}`")),
        }
    }
}

/// Ensemble-averaged fidelity for one (sequence, state, cycle or level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub sequence: String,
    pub initial_state: InitialState,
    /// Cycle count `N`, or the concatenation level for CDD runs.
    pub index: u64,
    pub fidelity: f64,
    /// Monte Carlo standard error of `fidelity`.
    pub stderr: f64,
    pub ensemble_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub size: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: 10_000,
            seed: 1,
            workers: 1,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(invalid("ensemble", "ensemble size must be >= 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "worker count must be >= 1"));
        }
        Ok(())
    }
}

fn unit_axis(a: f64, b: f64) -> Result<f64> {
    let rest = 1.0 - a * a - b * b;
    if rest > 0.0 {
        Ok(rest.sqrt())
    } else {
        Err(Error::AxisNormalization((a * a + b * b).sqrt()))
    }
}

/// The actual rotation performed by a nominal pulse on a spin with the
/// given errors. The angle error is taken in proportion to the nominal
/// angle (a π/2 pulse gets half of `ε`).
pub fn pulse_rotation(axis: PulseAxis, angle: f64, real: &ErrorRealization) -> Result<Rotation> {
    let (dir, eps) = perturbed_axis(axis, real)?;
    let error = eps * angle / PI;
    if (angle - PI).abs() < 1e-15 {
        Ok(Rotation::pi_pulse(dir, error))
    } else {
        Rotation::from_axis_angle(dir, angle + error)
    }
}

/// Actual rotation axis of a nominal pulse and its π-pulse angle error.
pub fn perturbed_axis(axis: PulseAxis, real: &ErrorRealization) -> Result<(Vec3, f64)> {
    Ok(match axis {
        PulseAxis::X => {
            let nx = unit_axis(real.n_y, real.n_z)?;
            ([nx, real.n_y, real.n_z], real.epsilon_x)
        }
        PulseAxis::Y => {
            let my = unit_axis(real.m_x, real.m_z)?;
            ([real.m_x, my, real.m_z], real.epsilon_y)
        }
        PulseAxis::Z => {
            let pz = unit_axis(real.p_x, real.p_y)?;
            ([real.p_x, real.p_y, pz], real.epsilon_z)
        }
    })
}

/// Free precession about z by `γe B t`.
pub fn free_rotation(duration: f64, real: &ErrorRealization, gamma_e: f64) -> Rotation {
    Rotation::about_z(gamma_e * real.detuning * duration)
}

pub fn instruction_rotation(ins: &Instruction, real: &ErrorRealization, gamma_e: f64) -> Result<Rotation> {
    match ins {
        Instruction::Delay(d) => Ok(free_rotation(*d, real, gamma_e)),
        Instruction::Pulse { axis, angle } => pulse_rotation(*axis, *angle, real),
    }
}

/// Propagator of one full cycle, instructions composed in temporal order.
pub fn cycle_propagator(prog: &PulseProgram, real: &ErrorRealization, gamma_e: f64) -> Result<Rotation> {
    let mut product = RotationProduct::new();
    for ins in prog.instructions() {
        product.push(&instruction_rotation(ins, real, gamma_e)?);
    }
    Ok(product.finish())
}

/// Single-spin fidelity after each of `cycles` repetitions of the cycle.
pub fn run_fidelity(
    prog: &PulseProgram,
    initial: &SpinState,
    real: &ErrorRealization,
    gamma_e: f64,
    cycles: usize,
) -> Result<Vec<f64>> {
    let m = cycle_propagator(prog, real, gamma_e)?.matrix();
    let start = initial.bloch();
    let mut v = start;
    Ok((0..cycles)
        .map(|_| {
            v = vector::mat_vec(&m, v);
            vector::dot(start, v)
        })
        .collect())
}

/// Per-chunk running sums of fidelity and its square: `[state][cycle]`.
struct ChunkSums {
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
}

impl ChunkSums {
    fn zeros(states: usize, cycles: usize) -> Self {
        Self {
            sum: vec![vec![0.0; cycles]; states],
            sum_sq: vec![vec![0.0; cycles]; states],
        }
    }

    fn merge(mut self, other: &ChunkSums) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

fn pairwise_merge(chunks: &[ChunkSums], states: usize, cycles: usize) -> ChunkSums {
    match chunks.len() {
        0 => ChunkSums::zeros(states, cycles),
        1 => ChunkSums::zeros(states, cycles).merge(&chunks[0]),
        n => {
            let mid = n / 2;
            pairwise_merge(&chunks[..mid], states, cycles).merge(&pairwise_merge(&chunks[mid..], states, cycles))
        }
    }
}

pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub(crate) fn mean_and_stderr(sum: f64, sum_sq: f64, m: usize) -> (f64, f64) {
    let n = m as f64;
    let mean = sum / n;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Ensemble fidelities for several initial states after each of `cycles`
/// cycles. Records are ordered by state, then cycle (1-based index).
pub fn run_ensemble_states(
    prog: &PulseProgram,
    states: &[InitialState],
    params: &ErrorParameters,
    ensemble: &EnsembleConfig,
    cycles: usize,
) -> Result<Vec<FidelityRecord>> {
    params.validate()?;
    ensemble.validate()?;
    if cycles == 0 {
        return Err(invalid("cycles", "need at least one cycle"));
    }
    let m = ensemble.size;
    let n_chunks = m.div_ceil(CHUNK);
    let gamma_e = params.gamma_e;
    let starts: Vec<Vec3> = states.iter().map(|s| s.bloch()).collect();

    let chunks: Result<Vec<ChunkSums>> = with_workers(ensemble.workers, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = ChunkSums::zeros(states.len(), cycles);
                for i in (c * CHUNK)..((c + 1) * CHUNK).min(m) {
                    let real = realization(params, ensemble.seed, i as u64);
                    let u = cycle_propagator(prog, &real, gamma_e)?.matrix();
                    for (s, &start) in starts.iter().enumerate() {
                        let mut v = start;
                        for k in 0..cycles {
                            v = vector::mat_vec(&u, v);
                            let f = vector::dot(start, v);
                            acc.sum[s][k] += f;
                            acc.sum_sq[s][k] += f * f;
                        }
                    }
                }
                Ok(acc)
            })
            .collect()
    });
    let total = pairwise_merge(&chunks?, states.len(), cycles);

    let mut out = Vec::with_capacity(states.len() * cycles);
    for (s, state) in states.iter().enumerate() {
        for k in 0..cycles {
            let (fidelity, stderr) = mean_and_stderr(total.sum[s][k], total.sum_sq[s][k], m);
            out.push(FidelityRecord {
                sequence: prog.label().to_string(),
                initial_state: *state,
                index: k as u64 + 1,
                fidelity,
                stderr,
                ensemble_size: m,
            });
        }
    }
    Ok(out)
}

/// Ensemble fidelity of one initial state after each of `cycles` cycles.
pub fn run_ensemble(
    prog: &PulseProgram,
    initial: InitialState,
    params: &ErrorParameters,
    ensemble: &EnsembleConfig,
    cycles: usize,
) -> Result<Vec<FidelityRecord>> {
    run_ensemble_states(prog, &[initial], params, ensemble, cycles)
}

/// Long-time fidelity limit `⟨a_α²⟩`: the mean squared projection of the
/// initial state on each spin's effective cycle axis. Returns the mean and
/// its standard error. A spin whose cycle is the identity keeps every
/// state and contributes 1.
pub fn saturation_estimate(
    prog: &PulseProgram,
    initial: InitialState,
    params: &ErrorParameters,
    ensemble: &EnsembleConfig,
) -> Result<(f64, f64)> {
    params.validate()?;
    ensemble.validate()?;
    let m = ensemble.size;
    let start = initial.bloch();
    let n_chunks = m.div_ceil(CHUNK);
    let sums: Result<Vec<[f64; 2]>> = with_workers(ensemble.workers, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = [0.0; 2];
                for i in (c * CHUNK)..((c + 1) * CHUNK).min(m) {
                    let real = realization(params, ensemble.seed, i as u64);
                    let aa = cycle_propagator(prog, &real, params.gamma_e)?.axis_angle();
                    let a2 = if aa.degenerate {
                        1.0
                    } else {
                        vector::dot(aa.axis, start).powi(2)
                    };
                    acc[0] += a2;
                    acc[1] += a2 * a2;
                }
                Ok(acc)
            })
            .collect()
    });
    let sums = sums?;
    let s: Vec<f64> = sums.iter().map(|a| a[0]).collect();
    let s2: Vec<f64> = sums.iter().map(|a| a[1]).collect();
    Ok(mean_and_stderr(
        vector::pairwise_sum(&s),
        vector::pairwise_sum(&s2),
        m,
    ))
}
