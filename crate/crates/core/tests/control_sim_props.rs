use std::f64::consts::PI;

use proptest::prelude::*;
use segway_core::control::{control_torque, velocity_calibration, ControllerState, MAX_SPEED};
use segway_core::simulate::Signal;
use segway_core::synthesis::{mode2_desired, verify_closed_loop};
use segway_core::{paper_numeric_plant, run_scenario, GainVector, Mode, Scenario, State};

fn reference_run() -> Scenario {
    Scenario::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn calibration_odd_increasing_bounded(a in -1.5707..1.5707f64, b in -1.5707..1.5707f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(velocity_calibration(lo) < velocity_calibration(hi));
        prop_assert_eq!(velocity_calibration(-a), -velocity_calibration(a));
        prop_assert!(velocity_calibration(a).abs() < MAX_SPEED);
    }

    #[test]
    fn torque_continuous_within_mode(
        x in -20.0..20.0f64, v in -5.0..5.0f64, th in -1.0..1.0f64, w in -3.0..3.0f64,
        d in prop::array::uniform4(-1.0..1.0f64),
        free in any::<bool>(),
    ) {
        let sc = reference_run();
        let mut cs = ControllerState::new(&sc);
        if free {
            cs = cs.step(sc.t_hold, &State::new(x, v, 0.0, 0.0), &sc, false);
            prop_assert_eq!(cs.mode, Mode::FreeStop);
        }
        let s = State::new(x, v, th, w);
        let base = control_torque(&cs, &s, &sc).torque;
        let gain_bound: f64 = sc.gains_mode1.as_array().iter().chain(sc.gains_mode2.as_array().iter()).map(|g| g.abs()).sum();
        for h in [1e-3, 1e-6, 1e-9] {
            let t = State::new(x + h * d[0], v + h * d[1], th + h * d[2], w + h * d[3]);
            let diff = (control_torque(&cs, &t, &sc).torque - base).abs();
            prop_assert!(diff <= gain_bound * h * (1.0 + 1e-9));
        }
    }
}

#[test]
fn mode2_closed_loop_stable_and_converges() {
    let report = verify_closed_loop(&paper_numeric_plant(), &GainVector::paper_mode2()).unwrap();
    assert!(report.stable);
    let out = run_scenario(&Scenario { stop_on_settle: false, ..reference_run() }).unwrap();
    let last = out.trajectory.last();
    let target = out.x_target.unwrap();
    assert!((last.state.x - target).abs() < 1e-3, "{} vs {target}", last.state.x);
    assert!(last.state.v.abs() < 1e-3 && last.state.theta.abs() < 1e-3 && last.state.omega.abs() < 1e-3);
}

#[test]
fn each_transition_fires_once() {
    for theta_i in [0.0, PI / 12.0, -PI / 8.0] {
        let out = run_scenario(&Scenario { theta_i, ..reference_run() }).unwrap();
        let modes: Vec<Mode> = out.trajectory.samples.iter().map(|s| s.mode.unwrap()).collect();
        let switches: Vec<(Mode, Mode)> = modes
            .windows(2)
            .filter(|w| w[0] != w[1])
            .map(|w| (w[0], w[1]))
            .collect();
        assert_eq!(
            switches,
            vec![(Mode::HoldTilt, Mode::FreeStop), (Mode::FreeStop, Mode::Settled)],
            "theta_i = {theta_i}"
        );
    }
}

#[test]
fn runs_are_bit_identical() {
    for sc in [reference_run(), Scenario { model: segway_core::Model::Nonlinear, theta_i: PI / 6.0, ..reference_run() }] {
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.trajectory.samples, b.trajectory.samples);
    }
}

#[test]
fn halving_dt_moves_final_position_by_under_a_micron() {
    let run = |dt: f64| {
        let out = run_scenario(&Scenario { dt, stop_on_settle: false, ..reference_run() }).unwrap();
        out.trajectory.last().state.x
    };
    let (coarse, fine) = (run(1e-3), run(5e-4));
    assert!((coarse - fine).abs() <= 1e-6, "{coarse} vs {fine}");
}

/// With the torque held over each step, the hold-phase controller is itself
/// discretized at `dt`, so the final position converges at first order.
#[test]
fn final_position_converges_at_first_order() {
    let run = |dt: f64| {
        let out = run_scenario(&Scenario { dt, stop_on_settle: false, ..reference_run() }).unwrap();
        out.trajectory.last().state.x
    };
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn mode2_error_decays_at_slowest_pole_rate() {
    let slowest = segway_core::numerics::poly_roots(&mode2_desired().polynomial().unwrap())
        .unwrap()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let out = run_scenario(&Scenario { stop_on_settle: false, ..reference_run() }).unwrap();
    let rel = out.release.unwrap();
    let target = out.x_target.unwrap();
    let (ts, logs): (Vec<f64>, Vec<f64>) = out
        .trajectory
        .samples
        .iter()
        .filter(|s| s.t >= rel.t + 4.0 && s.t <= rel.t + 10.0)
        .map(|s| {
            let e = State::new(s.state.x - target, s.state.v, s.state.theta, s.state.omega);
            let norm = e.as_array().iter().map(|v| v * v).sum::<f64>().sqrt();
            (s.t, norm.ln())
        })
        .unzip();
    let n = ts.len() as f64;
    let (mt, ml) = (ts.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum::<f64>()
        / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    assert!(
        (slope - slowest).abs() <= 0.2 * slowest.abs(),
        "slope {slope}, slowest pole {slowest}"
    );
}

#[test]
fn hold_phase_tracks_calibrated_speed() {
    let sc = Scenario { t_hold: 20.0, t_max: 25.0, ..reference_run() };
    let out = run_scenario(&sc).unwrap();
    let v = out.trajectory.signal(Signal::V);
    let held = &v[..(sc.t_hold / sc.dt) as usize];
    assert!((held.last().unwrap() - out.v_des).abs() <= 0.01 * out.v_des);
    assert!(held.windows(2).all(|w| w[1] >= w[0]));
}
