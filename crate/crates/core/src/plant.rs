//! Physical parameters and nonlinear equations of motion of the planar
//! two-wheeled inverted pendulum.
//!
//! The plant is a rod hinged on a wheel axle. Generalized coordinates are
//! the wheel translation `x` (rolling without slipping, `x = R·θ_w`) and the
//! rod tilt `θ` measured from the upright position. The motor torque `T`
//! drives the wheel and, through the gear coupling, applies `−K·T` to the rod:
//!
//! ```text
//! k1·ẍ + k2·cosθ·θ̈ = T + k6·sinθ·θ̇²
//! k3·cosθ·ẍ + k4·θ̈ = k5·sinθ − K·T
//! ```

use crate::error::{Error, Result};
use crate::numerics::{solve_linear_2x2, Mat2, Vec4};

/// Physical parameters plus the torque coupling constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegwayParams {
    /// Rod mass `m` (kg).
    pub rod_mass: f64,
    /// Wheel mass `M` (kg).
    pub wheel_mass: f64,
    /// Rod inertia `I_r` (kg·m²).
    pub rod_inertia: f64,
    /// Wheel inertia `I_w` (kg·m²).
    pub wheel_inertia: f64,
    /// Rod lever arm `l` (m).
    pub rod_length: f64,
    /// Wheel radius `R` (m).
    pub wheel_radius: f64,
    /// Gravitational acceleration `g` (m/s²).
    pub gravity: f64,
    /// Torque coupling `K`: the rod receives `−K·T` when the wheel gets `T`.
    pub coupling: f64,
}

impl Default for SegwayParams {
    fn default() -> Self {
        SegwayParams {
            rod_mass: 2.0,
            wheel_mass: 3.5,
            rod_inertia: 0.02667,
            wheel_inertia: 0.004375,
            rod_length: 0.2,
            wheel_radius: 0.05,
            gravity: 9.81,
            coupling: 6.0,
        }
    }
}

impl SegwayParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.rod_mass),
            ("M", self.wheel_mass),
            ("l", self.rod_length),
            ("R", self.wheel_radius),
            ("g", self.gravity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("I_r", self.rod_inertia),
            ("I_w", self.wheel_inertia),
            ("K", self.coupling),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Lumped coefficients of the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    /// `k1·k4 − k2·k3`, the determinant of the upright mass matrix.
    pub delta: f64,
}

/// Computes `k1..k6` and `Δ` from the physical parameters.
///
/// `k6` is the centrifugal coefficient `m·l·R` (same as `k2`), which is what
/// the Lagrangian of the rolling rod produces.
pub fn derive_constants(p: &SegwayParams) -> SystemConstants {
    let (m, big_m, r, l) = (p.rod_mass, p.wheel_mass, p.wheel_radius, p.rod_length);
    let k1 = (big_m + m) * r + p.wheel_inertia / r;
    let k2 = m * l * r;
    let k3 = m * l;
    let k4 = p.rod_inertia + m * l * l;
    let k5 = m * l * p.gravity;
    let k6 = m * l * r;
    SystemConstants {
        k1,
        k2,
        k3,
        k4,
        k5,
        k6,
        delta: k1 * k4 - k2 * k3,
    }
}

impl SystemConstants {
    /// Mass matrix `[[k1, k2·cosθ], [k3·cosθ, k4]]`.
    pub fn mass_matrix(&self, theta: f64) -> Mat2 {
        let c = theta.cos();
        Mat2([[self.k1, self.k2 * c], [self.k3 * c, self.k4]])
    }
}

/// Plant state in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    /// Wheel position (m).
    pub x: f64,
    /// Wheel velocity (m/s).
    pub v: f64,
    /// Rod tilt from vertical (rad).
    pub theta: f64,
    /// Tilt rate (rad/s).
    pub omega: f64,
}

impl State {
    pub fn new(x: f64, v: f64, theta: f64, omega: f64) -> State {
        State { x, v, theta, omega }
    }

    pub fn to_vec(self) -> Vec4 {
        Vec4([self.x, self.v, self.theta, self.omega])
    }

    pub fn from_vec(v: Vec4) -> State {
        State::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.x, self.v, self.theta, self.omega]
    }

    pub fn from_array(a: [f64; 4]) -> State {
        State::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().is_finite()
    }
}

/// Solves the nonlinear equations of motion for `(ẍ, θ̈)`.
///
/// `det M(θ) = k1·k4 − k2·k3·cos²θ ≥ Δ > 0`, so the solve cannot fail for
/// valid constants.
pub fn accelerations(c: &SystemConstants, coupling: f64, s: &State, torque: f64) -> (f64, f64) {
    let (sin, _) = s.theta.sin_cos();
    let rhs = [
        torque + c.k6 * sin * s.omega * s.omega,
        c.k5 * sin - coupling * torque,
    ];
    let [xdd, thdd] = solve_linear_2x2(&c.mass_matrix(s.theta), rhs)
        .expect("mass matrix determinant is bounded below by delta");
    (xdd, thdd)
}

/// Wheel acceleration when the rider holds the rod at a fixed tilt.
///
/// With `θ̇ ≡ 0` and `θ̈ ≡ 0` the first equation reduces to `k1·ẍ = T`.
pub fn clamped_acceleration(c: &SystemConstants, _theta_hold: f64, torque: f64) -> f64 {
    torque / c.k1
}

/// Total mechanical energy, potential referenced to `k5` at the upright.
///
/// Includes the wheel/rod coupling term `k3·cosθ·ẋ·θ̇`, so its rate of
/// change equals the input power `T·(ẋ/R − K·θ̇)`.
pub fn mechanical_energy(c: &SystemConstants, wheel_radius: f64, s: &State) -> f64 {
    let cos = s.theta.cos();
    0.5 * (c.k1 / wheel_radius) * s.v * s.v
        + c.k3 * cos * s.v * s.omega
        + 0.5 * c.k4 * s.omega * s.omega
        + c.k5 * cos
}

/// Power delivered by the motor torque.
pub fn input_power(coupling: f64, wheel_radius: f64, s: &State, torque: f64) -> f64 {
    torque * (s.v / wheel_radius - coupling * s.omega)
}
