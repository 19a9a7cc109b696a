//! Two-mode runtime controller.
//!
//! While the rider holds the rod (`HoldTilt`) the wheel velocity is driven to
//! a target set by the tilt. When the rod is released (`FreeStop`) the full
//! state is driven to rest at a stopping point proportional to the release
//! velocity.

use std::fmt;

use crate::error::{Error, Result};
use crate::linearization::PlantSource;
use crate::numerics::Vec4;
use crate::plant::{SegwayParams, State};
use crate::synthesis::GainVector;

/// Saturation speed of the tilt-to-velocity map (m/s).
pub const MAX_SPEED: f64 = 7.0;
/// Slope of the tilt-to-velocity map (1/rad).
pub const TILT_GAIN: f64 = 2.5;
/// Stopping distance per unit release velocity (s).
pub const STOP_DISTANCE_PER_SPEED: f64 = 3.2;

/// Commanded cruise velocity for a held tilt, `7·tanh(2.5·θ)`.
pub fn velocity_calibration(theta_i: f64) -> f64 {
    MAX_SPEED * (TILT_GAIN * theta_i).tanh()
}

/// Distance travelled after release, `3.2·v`.
pub fn stopping_distance(v_release: f64) -> f64 {
    STOP_DISTANCE_PER_SPEED * v_release
}

/// Which plant equations a scenario integrates after release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Nonlinear,
    Linear,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Nonlinear => "nonlinear",
            Model::Linear => "linear",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nonlinear" => Ok(Model::Nonlinear),
            "linear" => Ok(Model::Linear),
            other => Err(format!("unknown model '{other}' (expected nonlinear|linear)")),
        }
    }
}

/// One closed-loop run: hold `theta_i` for `t_hold` seconds, then release.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Physical parameters; used by the derived plant and the clamped hold phase.
    pub params: SegwayParams,
    pub theta_i: f64,
    pub t_hold: f64,
    pub plant_source: PlantSource,
    pub model: Model,
    pub gains_mode1: GainVector,
    pub gains_mode2: GainVector,
    pub dt: f64,
    pub t_max: f64,
    pub torque_limit: Option<f64>,
    /// End the run as soon as the settling predicate holds.
    pub stop_on_settle: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: SegwayParams::default(),
            theta_i: std::f64::consts::PI / 12.0,
            t_hold: 3.0,
            plant_source: PlantSource::PaperNumeric,
            model: Model::Linear,
            gains_mode1: GainVector::paper_mode1(),
            gains_mode2: GainVector::paper_mode2(),
            dt: 1e-3,
            t_max: 30.0,
            torque_limit: None,
            stop_on_settle: true,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.theta_i.is_finite() && self.theta_i.abs() < std::f64::consts::FRAC_PI_2) {
            return bad(format!("theta_i must satisfy |theta_i| < pi/2, got {}", self.theta_i));
        }
        if !(self.t_hold.is_finite() && self.t_hold >= 0.0) {
            return bad(format!("t_hold must be >= 0, got {}", self.t_hold));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad(format!("dt must be in (0, 0.01], got {}", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max > self.t_hold) {
            return bad(format!(
                "t_max must exceed t_hold ({}), got {}",
                self.t_hold, self.t_max
            ));
        }
        if let Some(l) = self.torque_limit {
            if !(l.is_finite() && l > 0.0) {
                return bad(format!("torque_limit must be > 0, got {l}"));
            }
        }
        if !self.gains_mode1.is_finite() || !self.gains_mode2.is_finite() {
            return bad("gains must be finite".into());
        }
        Ok(())
    }

    /// Velocity-error gain used while holding: magnitude of mode-1 `Kd_x`.
    ///
    /// The clamped plant `ẍ = T/k1` needs a positive gain to converge.
    pub fn hold_velocity_gain(&self) -> f64 {
        self.gains_mode1.kd_x.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    HoldTilt,
    FreeStop,
    Settled,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::HoldTilt => "hold",
            Mode::FreeStop => "free",
            Mode::Settled => "settled",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// State at the moment the rider lets go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Release {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub mode: Mode,
    pub v_des: f64,
    /// Stopping point; meaningful once `FreeStop` is entered.
    pub x_target: f64,
    pub release: Option<Release>,
}

impl ControllerState {
    pub fn new(scenario: &Scenario) -> ControllerState {
        ControllerState {
            mode: Mode::HoldTilt,
            v_des: velocity_calibration(scenario.theta_i),
            x_target: 0.0,
            release: None,
        }
    }

    /// Full desired state for the current mode.
    pub fn desired_state(&self) -> State {
        match self.mode {
            Mode::HoldTilt => State::new(0.0, self.v_des, 0.0, 0.0),
            Mode::FreeStop | Mode::Settled => State::new(self.x_target, 0.0, 0.0, 0.0),
        }
    }

    /// Advances the mode machine.
    ///
    /// Hold → free on the first step with `t ≥ t_hold`; free → settled when
    /// `settled` (the caller's settling predicate) reports true.
    pub fn step(&self, t: f64, s: &State, scenario: &Scenario, settled: bool) -> ControllerState {
        let mut next = *self;
        match self.mode {
            Mode::HoldTilt => {
                if t + 1e-9 * scenario.dt >= scenario.t_hold {
                    next.mode = Mode::FreeStop;
                    next.release = Some(Release { t, x: s.x, v: s.v });
                    next.x_target = s.x + stopping_distance(s.v);
                }
            }
            Mode::FreeStop => {
                if settled {
                    next.mode = Mode::Settled;
                }
            }
            Mode::Settled => {}
        }
        next
    }
}

/// Torque command and whether it hit the limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueCommand {
    pub torque: f64,
    pub saturated: bool,
}

/// Feedback torque for the current mode.
///
/// Holding: `|Kd_x|·(v_des − v)`, the tilt terms vanish because the rider
/// pins the rod. Free / settled: `gains_mode2·(x_target − x, −v, −θ, −θ̇)`.
pub fn control_torque(cs: &ControllerState, s: &State, scenario: &Scenario) -> TorqueCommand {
    let raw = match cs.mode {
        Mode::HoldTilt => scenario.hold_velocity_gain() * (cs.v_des - s.v),
        Mode::FreeStop | Mode::Settled => {
            let err: Vec4 = cs.desired_state().to_vec() - s.to_vec();
            scenario.gains_mode2.apply(&err)
        }
    };
    match scenario.torque_limit {
        Some(lim) if raw.abs() > lim => TorqueCommand {
            torque: raw.clamp(-lim, lim),
            saturated: true,
        },
        _ => TorqueCommand {
            torque: raw,
            saturated: false,
        },
    }
}
