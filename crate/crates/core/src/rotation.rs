//! Spin-1/2 rotations.
//!
//! A [`Rotation`] is an SU(2) element stored as a unit quaternion
//! `(w, x, y, z)`. It stands for the propagator
//!
//! ```text
//!     U = w·1 − i (x σx + y σy + z σz) = exp[−i θ (S·a)],
//! ```
//!
//! so a rotation by `θ` about the unit axis `a` has `w = cos(θ/2)` and
//! `(x, y, z) = sin(θ/2)·a`. Rotations are active and right-handed: on the
//! Bloch sphere, `Rotation::about_z(φ)` takes `(1, 0, 0)` to
//! `(cos φ, sin φ, 0)`, the same sense as free precession under
//! `H = γe B Sz` with `φ = γe B t`.
//!
//! Composition order is temporal throughout the crate: `a.then(b)` applies
//! `a` first, then `b`, i.e. the propagator `U_b U_a`.
//!
//! `q` and `−q` are the same physical rotation (they differ by a global
//! phase of −1). Every observable here, Bloch vectors and the distances in
//! [`Rotation::distance`], ignores that sign.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{self, Mat3, Vec3};

/// Below this value of `|sin(θ/2)|` the rotation axis is reported as degenerate.
pub const AXIS_DEGENERACY: f64 = 1e-9;

/// Number of compositions after which [`RotationProduct`] renormalizes.
pub const RENORMALIZE_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

/// Canonical axis-angle decomposition with the angle folded into `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
    /// Set when the angle is (numerically) zero; `axis` is then arbitrary.
    pub degenerate: bool,
}

impl AxisAngle {
    /// `angle · axis`, the zero vector for a degenerate rotation.
    pub fn rotation_vector(&self) -> Vec3 {
        if self.degenerate {
            [0.0; 3]
        } else {
            vector::scale(self.axis, self.angle)
        }
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Rotation by `angle` about `axis`; the axis is normalized here.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let n = vector::norm(axis);
        if !(n.is_finite() && n > 0.0) || !angle.is_finite() {
            return Err(Error::InvalidAxis(axis));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / n;
        Ok(Self {
            w: c,
            x: axis[0] * k,
            y: axis[1] * k,
            z: axis[2] * k,
        })
    }

    /// Rotation by `π + error` about the unit vector `axis`. The half-angle
    /// functions are expanded around π so that an ideal pulse (`error == 0`)
    /// has an exactly zero scalar part.
    pub fn pi_pulse(axis: Vec3, error: f64) -> Self {
        let (s, c) = (0.5 * error).sin_cos();
        Self {
            w: -s,
            x: axis[0] * c,
            y: axis[1] * c,
            z: axis[2] * c,
        }
    }

    /// Rotation with rotation vector `v` (angle `|v|` about `v/|v|`).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = vector::norm(v);
        if angle == 0.0 {
            return Self::IDENTITY;
        }
        Self::from_axis_angle(v, angle).unwrap_or(Self::IDENTITY)
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self { w: c, x: s, y: 0.0, z: 0.0 }
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self { w: c, x: 0.0, y: s, z: 0.0 }
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self { w: c, x: 0.0, y: 0.0, z: s }
    }

    /// Builds a rotation from raw quaternion components, normalizing them.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidAxis([q[1], q[2], q[3]]));
        }
        Ok(Self {
            w: q[0] / n,
            x: q[1] / n,
            y: q[2] / n,
            z: q[3] / n,
        })
    }

    /// `[w, x, y, z]`
    pub fn quaternion(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// The same rotation with the opposite SU(2) sign.
    pub fn negated(&self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Applies `self` first and `next` second.
    #[inline]
    pub fn then(&self, next: &Rotation) -> Rotation {
        let (a, b, c, d) = (next.w, next.x, next.y, next.z);
        let (e, f, g, h) = (self.w, self.x, self.y, self.z);
        Rotation {
            w: a * e - b * f - c * g - d * h,
            x: a * f + b * e + c * h - d * g,
            y: a * g - b * h + c * e + d * f,
            z: a * h + b * g - c * f + d * e,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn quaternion_norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.quaternion_norm();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Canonical axis and angle, angle in `[0, π]`.
    pub fn axis_angle(&self) -> AxisAngle {
        // fold the double cover so that w >= 0, i.e. angle <= π
        let sign = if self.w < 0.0 { -1.0 } else { 1.0 };
        let v = [sign * self.x, sign * self.y, sign * self.z];
        let s = vector::norm(v);
        let angle = 2.0 * s.atan2(sign * self.w);
        if s < AXIS_DEGENERACY {
            AxisAngle {
                axis: vector::Z_HAT,
                angle,
                degenerate: true,
            }
        } else {
            AxisAngle {
                axis: vector::scale(v, 1.0 / s),
                angle,
                degenerate: false,
            }
        }
    }

    /// Angle in `[0, π]` by which this rotation moves the Bloch sphere, i.e.
    /// its distance from the identity in SO(3).
    pub fn residual_angle(&self) -> f64 {
        let s = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * s.atan2(self.w.abs())
    }

    /// Phase-insensitive distance: the residual angle of `self⁻¹ · other`.
    /// `d(U, −U) = 0`.
    pub fn distance(&self, other: &Rotation) -> f64 {
        self.inverse().then(other).residual_angle()
    }

    /// Equality up to global phase.
    pub fn approx_eq(&self, other: &Rotation, tol: f64) -> bool {
        let q = self.quaternion();
        let p = other.quaternion();
        let minus: f64 = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let plus: f64 = q.iter().zip(&p).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        minus.min(plus) <= tol
    }

    /// The SO(3) matrix acting on Bloch vectors.
    pub fn matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w (u × v) + 2 u × (u × v)
        let u = [self.x, self.y, self.z];
        let t = vector::scale(vector::cross(u, v), 2.0);
        vector::add(vector::axpy(v, self.w, t), vector::cross(u, t))
    }

    pub fn apply(&self, state: &SpinState) -> SpinState {
        SpinState(self.rotate(state.0))
    }

    /// `self` applied `n` times in a row (n = 0 gives the identity).
    pub fn pow(&self, n: u64) -> Rotation {
        let mut product = RotationProduct::new();
        for _ in 0..n {
            product.push(self);
        }
        product.finish()
    }
}

/// Applies `first`, then `second`.
pub fn compose(first: &Rotation, second: &Rotation) -> Rotation {
    first.then(second)
}

/// Temporal-order accumulator for long products. Renormalizes the
/// quaternion every [`RENORMALIZE_EVERY`] factors to bound rounding drift.
#[derive(Debug, Clone, Copy)]
pub struct RotationProduct {
    total: Rotation,
    since_normalize: usize,
}

impl Default for RotationProduct {
    fn default() -> Self {
        Self::new()
    }
}

impl RotationProduct {
    pub fn new() -> Self {
        Self {
            total: Rotation::IDENTITY,
            since_normalize: 0,
        }
    }

    pub fn push(&mut self, next: &Rotation) {
        self.total = self.total.then(next);
        self.since_normalize += 1;
        if self.since_normalize >= RENORMALIZE_EVERY {
            self.total = self.total.normalized();
            self.since_normalize = 0;
        }
    }

    pub fn current(&self) -> Rotation {
        self.total
    }

    pub fn finish(self) -> Rotation {
        self.total.normalized()
    }
}

/// A spin-1/2 state as a Bloch vector; pure states have unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState(Vec3);

impl SpinState {
    pub const PLUS_X: SpinState = SpinState(vector::X_HAT);
    pub const PLUS_Y: SpinState = SpinState(vector::Y_HAT);
    pub const PLUS_Z: SpinState = SpinState(vector::Z_HAT);
    pub const MINUS_Z: SpinState = SpinState([0.0, 0.0, -1.0]);

    pub fn new(bloch: Vec3) -> Result<Self> {
        let n = vector::norm(bloch);
        if !n.is_finite() || n > 1.0 + 1e-12 {
            return Err(crate::error::invalid(
                "bloch",
                format!("Bloch vector norm {n} exceeds 1"),
            ));
        }
        Ok(Self(bloch))
    }

    pub fn bloch(&self) -> Vec3 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        vector::norm(self.0)
    }

    /// Overlap `2 Tr[ρ σ_n / 2]`-style projection of this state on `other`.
    pub fn overlap(&self, other: &SpinState) -> f64 {
        vector::dot(self.0, other.0)
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}
