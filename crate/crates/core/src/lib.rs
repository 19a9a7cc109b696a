//! Planar two-wheeled inverted pendulum toolkit.
//!
//! Nonlinear dynamics, small-angle linearization, transfer-function and
//! controllability analysis, pole placement through the controllable
//! canonical form, and simulation of a two-mode (hold tilt, then release and
//! stop) state-feedback controller.

pub mod cli;
pub mod control;
pub mod error;
pub mod linearization;
pub mod numerics;
pub mod plant;
pub mod simulate;
pub mod synthesis;

pub use control::{
    control_torque, stopping_distance, velocity_calibration, ControllerState, Mode, Model,
    Scenario,
};
pub use error::{Error, Result};
pub use linearization::{
    classify_stability, linearize, paper_numeric_plant, transfer_functions, PlantSource,
    StateSpace, TransferFunction,
};
pub use numerics::{Mat4, RealPolynomial, Vec4};
pub use plant::{derive_constants, SegwayParams, State, SystemConstants};
pub use simulate::{run_open_loop, run_scenario, PlantVariant, Trajectory};
pub use synthesis::{place_poles, DesiredPoles, GainVector, PolePlacementResult};
