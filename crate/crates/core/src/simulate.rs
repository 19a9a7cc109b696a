//! Fixed-step RK4 simulation of the plant variants, scenario execution and
//! step-response metrics.

use std::f64::consts::FRAC_PI_2;

use crate::control::{control_torque, ControllerState, Mode, Model, Release, Scenario};
use crate::error::{Error, Result};
use crate::linearization::{linearize, paper_numeric_plant, PlantSource, StateSpace};
use crate::plant::{accelerations, clamped_acceleration, derive_constants, State, SystemConstants};

/// Any state component beyond this magnitude ends a run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// How long all signals must stay in band before a run counts as settled (s).
pub const SETTLE_HOLD: f64 = 1.0;
/// Relative settling band, as a fraction of the commanded change.
pub const SETTLE_FRACTION: f64 = 0.02;

/// Sample flag: torque was clamped to the limit.
pub const FLAG_SATURATED: u8 = 1;
/// Sample flag: the run stopped here because the state diverged.
pub const FLAG_DIVERGED: u8 = 2;

/// One classical Runge–Kutta step of `ẏ = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: F, t: f64, y: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let axpy = |a: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        std::array::from_fn(|i| a[i] + h * k[i])
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt));
    let k4 = f(t + dt, &axpy(y, &k3, dt));
    let out: [f64; N] =
        std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if [k1, k2, k3, k4, out].iter().flatten().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { t: t + dt })
    }
}

/// Plant equations the integrator can advance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantVariant {
    /// Full nonlinear equations of motion.
    Nonlinear {
        constants: SystemConstants,
        coupling: f64,
    },
    /// Linear state-space model.
    Linear(StateSpace),
    /// Rider holds the rod at a fixed tilt; only the wheel moves.
    Clamped {
        constants: SystemConstants,
        theta_hold: f64,
    },
}

impl PlantVariant {
    pub fn derivative(&self, s: &State, torque: f64) -> [f64; 4] {
        match self {
            PlantVariant::Nonlinear {
                constants,
                coupling,
            } => {
                let (xdd, thdd) = accelerations(constants, *coupling, s, torque);
                [s.v, xdd, s.omega, thdd]
            }
            PlantVariant::Linear(ss) => ss.derivative(&s.to_vec(), torque).0,
            PlantVariant::Clamped {
                constants,
                theta_hold,
            } => [s.v, clamped_acceleration(constants, *theta_hold, torque), 0.0, 0.0],
        }
    }

    /// The tilt guard only applies where the equations are valid for any
    /// angle; the linear model is checked against the magnitude guard alone.
    fn diverged(&self, s: &State) -> bool {
        let blown = s.as_array().iter().any(|v| v.abs() > DIVERGENCE_LIMIT);
        let fallen = matches!(self, PlantVariant::Nonlinear { .. }) && s.theta.abs() > FRAC_PI_2;
        blown || fallen
    }
}

/// Advances the state by one step with the torque held constant.
pub fn rk4_state(plant: &PlantVariant, s: &State, t: f64, dt: f64, torque: f64) -> Result<State> {
    let y = rk4_step(
        |_, y: &[f64; 4]| plant.derivative(&State::from_array(*y), torque),
        t,
        &s.as_array(),
        dt,
    )?;
    Ok(State::from_array(y))
}

/// Linear model for a plant source.
pub fn linear_model(source: PlantSource, constants: &SystemConstants, coupling: f64) -> StateSpace {
    match source {
        PlantSource::DerivedFromParams => linearize(constants, coupling),
        PlantSource::PaperNumeric => paper_numeric_plant(),
    }
}

/// Plant used after release.
///
/// The nonlinear equations always come from the physical parameters; the
/// plant source only selects between linear models.
pub fn free_plant(scenario: &Scenario) -> PlantVariant {
    let constants = derive_constants(&scenario.params);
    let coupling = scenario.params.coupling;
    match scenario.model {
        Model::Nonlinear => PlantVariant::Nonlinear {
            constants,
            coupling,
        },
        Model::Linear => PlantVariant::Linear(linear_model(
            scenario.plant_source,
            &constants,
            coupling,
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub torque: f64,
    /// Controller mode, `None` for open-loop runs.
    pub mode: Option<Mode>,
    pub flags: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub source: PlantSource,
    pub model: Model,
    pub dt: f64,
    /// Present for closed-loop runs.
    pub scenario: Option<Scenario>,
    /// Constant torque of an open-loop run.
    pub step_torque: Option<f64>,
    pub diverged: bool,
}

/// Time-ordered samples on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn signal(&self, sig: Signal) -> Vec<f64> {
        self.samples.iter().map(|s| sig.get(&s.state)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Open-loop step response from the upright rest state.
///
/// Runs stop early, with [`FLAG_DIVERGED`] on the last sample, when the
/// state leaves the divergence guards.
pub fn run_open_loop(
    plant: &PlantVariant,
    source: PlantSource,
    step_torque: f64,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_max > 0, got dt={dt}, t_max={t_max}"
        )));
    }
    let model = match plant {
        PlantVariant::Linear(_) => Model::Linear,
        _ => Model::Nonlinear,
    };
    let steps = (t_max / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut s = State::default();
    let mut diverged = false;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let flags = if plant.diverged(&s) { FLAG_DIVERGED } else { 0 };
        samples.push(Sample {
            t,
            state: s,
            torque: step_torque,
            mode: None,
            flags,
        });
        if flags != 0 {
            diverged = true;
            break;
        }
        if i == steps {
            break;
        }
        match rk4_state(plant, &s, t, dt, step_torque) {
            Ok(next) => s = next,
            Err(_) => {
                samples.last_mut().unwrap().flags |= FLAG_DIVERGED;
                diverged = true;
                break;
            }
        }
    }
    Ok(Trajectory {
        samples,
        meta: TrajectoryMeta {
            source,
            model,
            dt,
            scenario: None,
            step_torque: Some(step_torque),
            diverged,
        },
    })
}

/// State component selector for metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    X,
    V,
    Theta,
    Omega,
}

impl Signal {
    pub const ALL: [Signal; 4] = [Signal::X, Signal::V, Signal::Theta, Signal::Omega];

    pub fn get(&self, s: &State) -> f64 {
        match self {
            Signal::X => s.x,
            Signal::V => s.v,
            Signal::Theta => s.theta,
            Signal::Omega => s.omega,
        }
    }

    /// Absolute floor of the settling band.
    pub fn band_floor(&self) -> f64 {
        match self {
            Signal::X => 0.05,
            Signal::V => 0.05,
            Signal::Theta => 0.01,
            Signal::Omega => 0.01,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Signal::X => "x",
            Signal::V => "v",
            Signal::Theta => "theta",
            Signal::Omega => "omega",
        }
    }
}

/// Step-response figures of merit. Times are relative to the first sample
/// of the analysed segment; undefined quantities are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseMetrics {
    /// 10 % → 90 % traversal time of the commanded change.
    pub rise_time: Option<f64>,
    /// Start of the final interval spent within the band around the target.
    pub settling_time: Option<f64>,
    /// Largest excursion past the target, as a fraction of the change.
    pub overshoot: Option<f64>,
    pub steady_state_error: f64,
    pub settled: bool,
}

fn settle_band(initial: f64, target: f64, floor: f64) -> f64 {
    (SETTLE_FRACTION * (target - initial).abs()).max(floor)
}

/// Metrics of one signal over a trajectory segment.
pub fn compute_metrics(samples: &[Sample], signal: Signal, target: f64) -> Result<ResponseMetrics> {
    compute_metrics_with_floor(samples, signal, target, signal.band_floor())
}

pub fn compute_metrics_with_floor(
    samples: &[Sample],
    signal: Signal,
    target: f64,
    floor: f64,
) -> Result<ResponseMetrics> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("metrics need at least one sample".into()))?;
    let t0 = first.t;
    let y: Vec<f64> = samples.iter().map(|s| signal.get(&s.state)).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.t - t0).collect();
    let y0 = y[0];
    let change = target - y0;
    let traverses = change.abs() > 1e-12;

    let crossing = |level: f64| -> Option<f64> {
        let frac = |v: f64| (v - y0) / change;
        (1..y.len()).find_map(|i| {
            let (a, b) = (frac(y[i - 1]), frac(y[i]));
            (b >= level).then(|| {
                if a >= level || b == a {
                    t[i]
                } else {
                    t[i - 1] + (level - a) / (b - a) * (t[i] - t[i - 1])
                }
            })
        })
    };
    let rise_time = if traverses {
        match (crossing(0.1), crossing(0.9)) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    } else {
        None
    };
    let overshoot = traverses.then(|| {
        y.iter()
            .map(|v| (v - target) * change.signum() / change.abs())
            .fold(0.0_f64, f64::max)
    });

    let band = settle_band(y0, target, floor);
    let settling_time = match y.iter().rposition(|v| (v - target).abs() > band) {
        None => Some(0.0),
        Some(i) if i + 1 < y.len() => Some(t[i + 1]),
        Some(_) => None,
    };
    Ok(ResponseMetrics {
        rise_time,
        settling_time,
        overshoot,
        steady_state_error: (y[y.len() - 1] - target).abs(),
        settled: settling_time.is_some(),
    })
}

/// Tracks whether all four signals have stayed in band long enough.
#[derive(Debug, Clone)]
struct SettleTracker {
    target: [f64; 4],
    band: [f64; 4],
    in_band_since: Option<f64>,
}

impl SettleTracker {
    fn new(initial: &State, target: &State) -> SettleTracker {
        let (i, g) = (initial.as_array(), target.as_array());
        SettleTracker {
            target: g,
            band: std::array::from_fn(|k| settle_band(i[k], g[k], Signal::ALL[k].band_floor())),
            in_band_since: None,
        }
    }

    fn update(&mut self, t: f64, s: &State, dt: f64) -> bool {
        let v = s.as_array();
        let inside = (0..4).all(|k| (v[k] - self.target[k]).abs() <= self.band[k]);
        if !inside {
            self.in_band_since = None;
            return false;
        }
        let since = *self.in_band_since.get_or_insert(t);
        t - since >= SETTLE_HOLD - 1e-6 * dt
    }
}

/// Result of a closed-loop scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub trajectory: Trajectory,
    pub release: Option<Release>,
    pub v_des: f64,
    pub x_target: Option<f64>,
    /// Velocity tracking during the hold phase.
    pub hold_metrics: Option<ResponseMetrics>,
    /// `x`, `v`, `θ`, `θ̇` after release, toward `(x_target, 0, 0, 0)`.
    pub free_metrics: Option<[ResponseMetrics; 4]>,
    /// Settling predicate fired before `t_max`.
    pub settled: bool,
    /// Start of the final all-in-band interval, measured from `t = 0`.
    pub settling_time: Option<f64>,
    pub diverged: bool,
}

impl ScenarioOutcome {
    /// `t_max` was reached without the settling predicate firing.
    pub fn not_settled(&self) -> bool {
        !self.settled
    }
}

/// Runs hold-then-release.
///
/// The hold phase integrates the clamped plant under the velocity law; from
/// the first grid point at or after `t_hold` the free plant runs under the
/// stopping law, starting from `(x, v, θ_i, 0)`.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    let constants = derive_constants(&scenario.params);
    let hold_plant = PlantVariant::Clamped {
        constants,
        theta_hold: scenario.theta_i,
    };
    let free = free_plant(scenario);
    let dt = scenario.dt;
    let steps = (scenario.t_max / dt).round() as usize;

    let mut cs = ControllerState::new(scenario);
    let mut s = State::new(0.0, 0.0, scenario.theta_i, 0.0);
    let mut tracker: Option<SettleTracker> = None;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut diverged = false;
    let mut settled_at: Option<f64> = None;

    for i in 0..=steps {
        let t = i as f64 * dt;
        let was_holding = cs.mode == Mode::HoldTilt;
        // Settling is evaluated on the current sample before the mode machine
        // runs, so a release sample can itself start an in-band interval.
        let settled_now = match tracker.as_mut() {
            Some(tr) => tr.update(t, &s, dt),
            None => false,
        };
        cs = cs.step(t, &s, scenario, settled_now);
        if was_holding && cs.mode == Mode::FreeStop {
            let mut tr = SettleTracker::new(&s, &cs.desired_state());
            tr.update(t, &s, dt);
            tracker = Some(tr);
        }
        if cs.mode == Mode::Settled && settled_at.is_none() {
            settled_at = tracker.as_ref().and_then(|tr| tr.in_band_since);
        }

        let cmd = control_torque(&cs, &s, scenario);
        let plant = if cs.mode == Mode::HoldTilt {
            &hold_plant
        } else {
            &free
        };
        let mut flags = if cmd.saturated { FLAG_SATURATED } else { 0 };
        if plant.diverged(&s) {
            flags |= FLAG_DIVERGED;
        }
        samples.push(Sample {
            t,
            state: s,
            torque: cmd.torque,
            mode: Some(cs.mode),
            flags,
        });
        if flags & FLAG_DIVERGED != 0 {
            diverged = true;
            break;
        }
        if i == steps || (cs.mode == Mode::Settled && scenario.stop_on_settle) {
            break;
        }
        s = match rk4_state(plant, &s, t, dt, cmd.torque) {
            Ok(next) => next,
            Err(_) => {
                samples.last_mut().unwrap().flags |= FLAG_DIVERGED;
                diverged = true;
                break;
            }
        };
    }

    let trajectory = Trajectory {
        samples,
        meta: TrajectoryMeta {
            source: scenario.plant_source,
            model: scenario.model,
            dt,
            scenario: Some(scenario.clone()),
            step_torque: None,
            diverged,
        },
    };

    let split = trajectory
        .samples
        .iter()
        .position(|s| s.mode != Some(Mode::HoldTilt))
        .unwrap_or(trajectory.samples.len());
    let hold = &trajectory.samples[..split];
    let hold_metrics = if hold.is_empty() {
        None
    } else {
        Some(compute_metrics(hold, Signal::V, cs.v_des)?)
    };
    let free_part = &trajectory.samples[split..];
    let free_metrics = if free_part.is_empty() {
        None
    } else {
        let goal = cs.desired_state();
        let mut out = Vec::with_capacity(4);
        for sig in Signal::ALL {
            out.push(compute_metrics(free_part, sig, sig.get(&goal))?);
        }
        Some([out[0], out[1], out[2], out[3]])
    };
    let settled = settled_at.is_some();
    let settling_time = match (settled_at, &free_metrics, cs.release) {
        (Some(t), _, _) => Some(t),
        (None, Some(m), Some(rel)) if !diverged => m
            .iter()
            .map(|m| m.settling_time)
            .try_fold(0.0_f64, |acc, t| t.map(|t| acc.max(t)))
            .map(|t| rel.t + t),
        _ => None,
    };

    Ok(ScenarioOutcome {
        release: cs.release,
        v_des: cs.v_des,
        x_target: cs.release.map(|_| cs.x_target),
        hold_metrics,
        free_metrics,
        settled,
        settling_time,
        diverged,
        trajectory,
    })
}
