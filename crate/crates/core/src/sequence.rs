//! Pulse programs for periodic, symmetrized and concatenated decoupling.
//!
//! A program is one cycle of a sequence, written in temporal order. Pulses
//! are instantaneous markers here; adjacent pulses (the SDD midpoint, the
//! interleaving pulses of CDD) follow each other with no delay in between.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_CDD_LEVEL: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Y,
    Z,
}

impl fmt::Display for PulseAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseAxis::X => "X",
            PulseAxis::Y => "Y",
            PulseAxis::Z => "Z",
        })
    }
}

impl FromStr for PulseAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(PulseAxis::X),
            "Y" | "y" => Ok(PulseAxis::Y),
            "Z" | "z" => Ok(PulseAxis::Z),
            other => Err(format!("unknown pulse axis `{other}`")),
        }
    }
}

/// Which pair of pulse axes a two-axis sequence alternates between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "XY")]
    Xy,
    #[serde(rename = "XZ")]
    Xz,
}

impl Variant {
    fn second_axis(self) -> PulseAxis {
        match self {
            Variant::Xy => PulseAxis::Y,
            Variant::Xz => PulseAxis::Z,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Xy => "XY",
            Variant::Xz => "XZ",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "XY" => Ok(Variant::Xy),
            "XZ" => Ok(Variant::Xz),
            other => Err(format!("unknown variant `{other}` (XY | XZ)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    /// Free evolution for the given number of seconds.
    Delay(f64),
    /// Nominal rotation by `angle` about `axis`.
    Pulse { axis: PulseAxis, angle: f64 },
}

impl Instruction {
    pub fn delay(duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid("tau", format!("delay must be > 0, got {duration}")));
        }
        Ok(Instruction::Delay(duration))
    }

    pub fn pulse(axis: PulseAxis, angle: f64) -> Result<Self> {
        let allowed = [PI, PI / 2.0];
        if !allowed.iter().any(|a| (a - angle).abs() < 1e-12) {
            return Err(invalid("angle", format!("nominal angle must be π or π/2, got {angle}")));
        }
        Ok(Instruction::Pulse { axis, angle })
    }

    pub const fn pi(axis: PulseAxis) -> Self {
        Instruction::Pulse { axis, angle: PI }
    }

    pub fn is_pulse(&self) -> bool {
        matches!(self, Instruction::Pulse { .. })
    }
}

/// One cycle of a decoupling sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    label: String,
    instructions: Vec<Instruction>,
}

impl PulseProgram {
    pub fn new(label: impl Into<String>, instructions: Vec<Instruction>) -> Self {
        Self {
            label: label.into(),
            instructions,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Total free-evolution time of one cycle (pulses take no time).
    pub fn cycle_span(&self) -> f64 {
        self.instructions
            .iter()
            .map(|i| match i {
                Instruction::Delay(d) => *d,
                Instruction::Pulse { .. } => 0.0,
            })
            .sum()
    }

    pub fn delay_count(&self) -> usize {
        self.instructions.iter().filter(|i| !i.is_pulse()).count()
    }

    pub fn pulse_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.is_pulse()).count()
    }

    /// Pulse axes in temporal order.
    pub fn pulse_axes(&self) -> Vec<PulseAxis> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Pulse { axis, .. } => Some(*axis),
                Instruction::Delay(_) => None,
            })
            .collect()
    }

    /// Replaces every π_Z by the temporal pair π_X, π_Y.
    pub fn with_z_substitution(&self) -> Self {
        let mut out = Vec::with_capacity(self.instructions.len() * 3 / 2);
        for ins in &self.instructions {
            match ins {
                Instruction::Pulse {
                    axis: PulseAxis::Z,
                    angle,
                } => {
                    out.push(Instruction::Pulse {
                        axis: PulseAxis::X,
                        angle: *angle,
                    });
                    out.push(Instruction::Pulse {
                        axis: PulseAxis::Y,
                        angle: *angle,
                    });
                }
                other => out.push(*other),
            }
        }
        Self::new(format!("{}/zsub", self.label), out)
    }

    /// Line-oriented text form: an optional `# label` header followed by
    /// `D <seconds>` and `P <axis> <angle>` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.label);
        for ins in &self.instructions {
            match ins {
                Instruction::Delay(d) => s.push_str(&format!("D {d:e}\n")),
                Instruction::Pulse { axis, angle } => s.push_str(&format!("P {axis} {angle}\n")),
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut label = String::new();
        let mut instructions = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |reason: String| Error::ProgramParse { line: n + 1, reason };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if instructions.is_empty() && label.is_empty() {
                    label = rest.trim().to_string();
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let ins = match fields.as_slice() {
                ["D", d] => {
                    let d: f64 = d.parse().map_err(|e| parse_err(format!("{e}")))?;
                    Instruction::delay(d).map_err(|e| parse_err(e.to_string()))?
                }
                ["P", axis, angle] => {
                    let axis: PulseAxis = axis.parse().map_err(parse_err)?;
                    let angle: f64 = angle.parse().map_err(|e| parse_err(format!("{e}")))?;
                    Instruction::pulse(axis, angle).map_err(|e| parse_err(e.to_string()))?
                }
                _ => return Err(parse_err(format!("unrecognized instruction `{line}`"))),
            };
            instructions.push(ins);
        }
        Ok(Self::new(label, instructions))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(invalid("tau", format!("must be > 0, got {tau}")))
    }
}

fn pdd_instructions(variant: Variant, tau: f64) -> Vec<Instruction> {
    let d = Instruction::Delay(tau);
    let a = Instruction::pi(PulseAxis::X);
    let b = Instruction::pi(variant.second_axis());
    vec![d, a, d, b, d, a, d, b]
}

/// `d−π_X−d−π_Y−d−π_X−d−π_Y` (XY) or `d−π_X−d−π_Z−d−π_X−d−π_Z` (XZ).
pub fn build_pdd(variant: Variant, tau: f64) -> Result<PulseProgram> {
    check_tau(tau)?;
    let label = match variant {
        Variant::Xy => "xy-pdd",
        Variant::Xz => "xz-pdd",
    };
    Ok(PulseProgram::new(label, pdd_instructions(variant, tau)))
}

/// The repeating half of a PDD cycle, `d−π_X−d−π_Y` (or `d−π_X−d−π_Z`).
pub fn build_pdd_half(variant: Variant, tau: f64) -> Result<PulseProgram> {
    check_tau(tau)?;
    let mut ins = pdd_instructions(variant, tau);
    ins.truncate(4);
    let label = match variant {
        Variant::Xy => "xy-pdd-half",
        Variant::Xz => "xz-pdd-half",
    };
    Ok(PulseProgram::new(label, ins))
}

/// Symmetrized XY sequence
/// `d−X−d−Y−d−X−d−Y−Y−d−X−d−Y−d−X−d`; with `reduced` the adjacent
/// π_Y pair in the middle is dropped, leaving two delays back to back.
pub fn build_sdd(tau: f64, reduced: bool) -> Result<PulseProgram> {
    check_tau(tau)?;
    let d = Instruction::Delay(tau);
    let x = Instruction::pi(PulseAxis::X);
    let y = Instruction::pi(PulseAxis::Y);
    let mut ins = vec![d, x, d, y, d, x, d];
    if !reduced {
        ins.extend([y, y]);
    }
    ins.extend([d, x, d, y, d, x, d]);
    let label = if reduced { "xy-sdd-reduced" } else { "xy-sdd" };
    Ok(PulseProgram::new(label, ins))
}

fn cdd_instructions(variant: Variant, level: u32, tau: f64) -> Vec<Instruction> {
    if level == 1 {
        return pdd_instructions(variant, tau);
    }
    let inner = cdd_instructions(variant, level - 1, tau);
    let a = Instruction::pi(PulseAxis::X);
    let b = Instruction::pi(variant.second_axis());
    let mut out = Vec::with_capacity(4 * inner.len() + 4);
    for p in [a, b, a, b] {
        out.extend_from_slice(&inner);
        out.push(p);
    }
    out
}

/// Level-`n` concatenated sequence
/// `CDD_{n−1}−π_X−CDD_{n−1}−π_Y−CDD_{n−1}−π_X−CDD_{n−1}−π_Y`, with
/// `CDD_1` = PDD. With `z_substitution` every π_Z becomes π_X π_Y.
pub fn build_cdd(
    variant: Variant,
    level: u32,
    tau: f64,
    z_substitution: bool,
) -> Result<PulseProgram> {
    if !(1..=MAX_CDD_LEVEL).contains(&level) {
        return Err(Error::LevelOutOfRange(level));
    }
    check_tau(tau)?;
    let prefix = match variant {
        Variant::Xy => "xy",
        Variant::Xz => "xz",
    };
    let prog = PulseProgram::new(
        format!("{prefix}-cdd{level}"),
        cdd_instructions(variant, level, tau),
    );
    Ok(if z_substitution && variant == Variant::Xz {
        prog.with_z_substitution()
    } else {
        prog
    })
}

/// `n_pulses` repetitions of `d−π_X`.
pub fn build_cpmg(n_pulses: usize, tau: f64) -> Result<PulseProgram> {
    check_tau(tau)?;
    if n_pulses == 0 {
        return Err(invalid("cycles", "CPMG needs at least one pulse"));
    }
    let mut ins = Vec::with_capacity(2 * n_pulses);
    for _ in 0..n_pulses {
        ins.push(Instruction::Delay(tau));
        ins.push(Instruction::pi(PulseAxis::X));
    }
    Ok(PulseProgram::new(format!("cpmg-{n_pulses}"), ins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use PulseAxis::*;

    const TAU: f64 = 11e-6;

    #[test]
    fn xy_pdd_layout() {
        let p = build_pdd(Variant::Xy, TAU).unwrap();
        let d = Instruction::Delay(TAU);
        assert_eq!(
            p.instructions(),
            &[d, Instruction::pi(X), d, Instruction::pi(Y), d, Instruction::pi(X), d, Instruction::pi(Y)]
        );
        assert!((p.cycle_span() - 44e-6).abs() < 1e-18);
    }

    #[test]
    fn xz_pdd_axes() {
        let p = build_pdd(Variant::Xz, TAU).unwrap();
        assert_eq!(p.pulse_axes(), vec![X, Z, X, Z]);
    }

    #[test]
    fn sdd_counts() {
        let full = build_sdd(TAU, false).unwrap();
        assert_eq!(full.instructions().len(), 16);
        assert_eq!(full.pulse_count(), 8);
        assert_eq!(full.delay_count(), 8);
        assert_eq!(full.pulse_axes(), vec![X, Y, X, Y, Y, X, Y, X]);
        let reduced = build_sdd(TAU, true).unwrap();
        assert_eq!(reduced.pulse_count(), 6);
        assert_eq!(reduced.delay_count(), 8);
    }

    #[test]
    fn cdd_counts() {
        for (n, pulses, delays) in [(1, 4, 4), (2, 20, 16), (3, 84, 64), (4, 340, 256)] {
            let p = build_cdd(Variant::Xy, n, TAU, false).unwrap();
            assert_eq!(p.pulse_count(), pulses, "level {n}");
            assert_eq!(p.delay_count(), delays, "level {n}");
            assert_eq!(p.pulse_count(), (4usize.pow(n + 1) - 4) / 3);
        }
    }

    #[test]
    fn cdd_level_one_is_pdd() {
        for v in [Variant::Xy, Variant::Xz] {
            assert_eq!(
                build_cdd(v, 1, TAU, false).unwrap().instructions(),
                build_pdd(v, TAU).unwrap().instructions()
            );
        }
    }

    #[test]
    fn cdd_level_bounds() {
        assert_eq!(build_cdd(Variant::Xy, 0, TAU, false), Err(Error::LevelOutOfRange(0)));
        assert_eq!(build_cdd(Variant::Xy, 9, TAU, false), Err(Error::LevelOutOfRange(9)));
        assert!(build_cdd(Variant::Xy, 8, TAU, false).is_ok());
    }

    #[test]
    fn z_substitution_replaces_each_z_by_x_then_y() {
        let p = build_cdd(Variant::Xz, 2, TAU, true).unwrap();
        assert!(!p.pulse_axes().contains(&Z));
        // 20 pulses, 10 of which were π_Z
        assert_eq!(p.pulse_count(), 30);
        let pdd = build_pdd(Variant::Xz, TAU).unwrap().with_z_substitution();
        assert_eq!(pdd.pulse_axes(), vec![X, X, Y, X, X, Y]);
        // XY variant is untouched by the flag
        assert_eq!(
            build_cdd(Variant::Xy, 2, TAU, true).unwrap(),
            build_cdd(Variant::Xy, 2, TAU, false).unwrap()
        );
    }

    #[test]
    fn cpmg_alternates() {
        let p = build_cpmg(3, TAU).unwrap();
        assert_eq!(p.delay_count(), 3);
        assert_eq!(p.pulse_axes(), vec![X, X, X]);
        assert!(build_cpmg(0, TAU).is_err());
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(build_pdd(Variant::Xy, 0.0).is_err());
        assert!(build_sdd(-1.0, false).is_err());
        assert!(build_cdd(Variant::Xy, 2, f64::NAN, false).is_err());
    }

    #[test]
    fn text_format_lines() {
        let p = build_pdd(Variant::Xy, TAU).unwrap();
        let text = p.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# xy-pdd");
        assert_eq!(lines[1], "D 1.1e-5");
        assert_eq!(lines[2], "P X 3.141592653589793");
        assert_eq!(PulseProgram::from_text(&text).unwrap(), p);
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = PulseProgram::from_text("D 1e-6\nQ 3\n").unwrap_err();
        assert!(matches!(err, Error::ProgramParse { line: 2, .. }));
        let err = PulseProgram::from_text("P X 1.0\n").unwrap_err();
        assert!(matches!(err, Error::ProgramParse { line: 1, .. }));
        let err = PulseProgram::from_text("D -1\n").unwrap_err();
        assert!(matches!(err, Error::ProgramParse { line: 1, .. }));
    }
}
