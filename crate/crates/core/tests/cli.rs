use std::process::{Command, Output};

use proptest::prelude::*;
use segway_core::cli::{format_g9, parse_trajectory_csv, trajectory_csv, CSV_HEADER};
use segway_core::simulate::{Sample, TrajectoryMeta, FLAG_DIVERGED};
use segway_core::{Mode, Model, PlantSource, State, Trajectory};

fn segway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segway"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_paper_plant() {
    let o = segway(&["analyze", "--plant", "paper"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for header in [
        "== parameters ==",
        "== constants ==",
        "== state space ==",
        "== transfer functions ==",
        "== controllability ==",
        "== stability ==",
        "== derived vs paper-numeric ==",
        "== notes ==",
    ] {
        assert!(s.contains(header), "missing {header}");
    }
    assert!(s.contains("-2.5966") && s.contains("2.5966"));
    assert!(s.contains("-2.0622") && s.contains("2.0622"));
    assert!(s.contains("2.5 m/s"));
}

#[test]
fn analyze_derived_is_controllable_and_unstable() {
    for extra in [&[][..], &["--param", "m=0.001"][..]] {
        let mut args = vec!["analyze", "--plant", "derived"];
        args.extend_from_slice(extra);
        let o = segway(&args);
        assert_eq!(o.status.code(), Some(0));
        let s = stdout(&o);
        assert!(s.contains("rank = 4"));
        assert!(s.contains("verdict: unstable"));
    }
}

#[test]
fn gains_csv_mode2() {
    let o = segway(&["gains", "--plant", "paper", "--kcanon", "9,30,38,15", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    let g: Vec<f64> = rows[0][..4].iter().map(|v| v.parse().unwrap()).collect();
    let want = [-0.4839, -1.6129, -13.7056, -7.5347];
    for (a, b) in g.iter().zip(want) {
        assert!((a - b).abs() < 1e-3, "{g:?}");
    }
}

#[test]
fn gains_for_open_loop_polynomial_are_zero() {
    let o = segway(&["gains", "--plant", "paper", "--char", "1,0,-6.7425,0,0", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    for v in &rows[0][..4] {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-12, "{v}");
    }
}

#[test]
fn gains_uncontrollable_exits_2() {
    // With no gear coupling and a vanishing rod, torque cannot reach the tilt.
    let o = segway(&[
        "gains", "--plant", "derived", "--param", "m=1e-12", "--param", "K=0", "--kcanon", "1,2,3,4",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gains_verification_failure_exits_2() {
    let o = segway(&["gains", "--plant", "paper", "--char", "1,1e300,1e300,1e300,1e300"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = segway(&["simulate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    assert!(report.contains("settled = true"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let samples = parse_trajectory_csv(&text).unwrap();
    assert!(samples.iter().any(|s| s.mode == Some(Mode::FreeStop)));
}

#[test]
fn simulate_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# zero tilt\ntheta_i = 0\nt_hold = 1\nt_max = 3\n").unwrap();
    let o = segway(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let samples = parse_trajectory_csv(&stdout(&o)).unwrap();
    assert!(samples.len() > 10);
    for s in samples {
        assert_eq!(s.state.as_array(), [0.0; 4]);
        assert_eq!(s.torque, 0.0);
    }
}

#[test]
fn not_settled_still_exits_0() {
    let o = segway(&["simulate", "--param", "t_max=5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NotSettled"));
}

#[test]
fn openloop_nonlinear_diverges() {
    let o = segway(&["openloop", "--model", "nonlinear", "--torque", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let samples = parse_trajectory_csv(&stdout(&o)).unwrap();
    assert_eq!(samples.last().unwrap().flags & FLAG_DIVERGED, FLAG_DIVERGED);
}

#[test]
fn openloop_zero_torque_stays_at_rest() {
    let o = segway(&["openloop", "--torque", "0", "--param", "t_max=2"]);
    assert_eq!(o.status.code(), Some(0));
    for s in parse_trajectory_csv(&stdout(&o)).unwrap() {
        assert_eq!(s.state.as_array(), [0.0; 4]);
        assert_eq!(s.flags, 0);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(segway(&[]).status.code(), Some(1));
    assert_eq!(segway(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(segway(&["--help"]).status.code(), Some(0));
    assert_eq!(segway(&["--version"]).status.code(), Some(0));
    assert_eq!(segway(&["gains"]).status.code(), Some(1));
    assert_eq!(segway(&["gains", "--kcanon", "1,2"]).status.code(), Some(1));
    assert_eq!(segway(&["gains", "--format", "xml", "--kcanon", "1,2,3,4"]).status.code(), Some(1));
    assert_eq!(segway(&["analyze", "--param", "nope=1"]).status.code(), Some(3));
    assert_eq!(segway(&["analyze", "--param", "R=0"]).status.code(), Some(3));
    assert_eq!(segway(&["analyze", "--plant", "fancy"]).status.code(), Some(3));
    assert_eq!(segway(&["simulate", "--config", "/nonexistent/x.cfg"]).status.code(), Some(3));
    assert_eq!(segway(&["simulate", "--param", "theta_i=2"]).status.code(), Some(3));
}

fn sample_strategy() -> impl Strategy<Value = Sample> {
    let num = prop_oneof![
        -1e6..1e6f64,
        -1e-3..1e-3f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
    ];
    (
        0.0..100.0f64,
        [num.clone(), num.clone(), num.clone(), num.clone(), num],
        prop::option::of(prop_oneof![
            Just(Mode::HoldTilt),
            Just(Mode::FreeStop),
            Just(Mode::Settled)
        ]),
        0u8..4,
    )
        .prop_map(|(t, v, mode, flags)| Sample {
            t,
            state: State::new(v[0], v[1], v[2], v[3]),
            torque: v[4],
            mode,
            flags,
        })
}

fn round9(v: f64) -> f64 {
    format_g9(v).parse().unwrap()
}

proptest! {
    #[test]
    fn csv_round_trip(samples in prop::collection::vec(sample_strategy(), 0..40)) {
        // Samples are first reduced to 9 significant digits, as every
        // trajectory written by the CLI is; after that the text is lossless.
        let samples: Vec<Sample> = samples
            .into_iter()
            .map(|s| Sample {
                t: round9(s.t),
                state: State::from_array(s.state.as_array().map(round9)),
                torque: round9(s.torque),
                ..s
            })
            .collect();
        let traj = Trajectory {
            samples: samples.clone(),
            meta: TrajectoryMeta {
                source: PlantSource::PaperNumeric,
                model: Model::Linear,
                dt: 1e-3,
                scenario: None,
                step_torque: None,
                diverged: false,
            },
        };
        let text = trajectory_csv(&traj);
        let back = parse_trajectory_csv(&text).unwrap();
        prop_assert_eq!(&back, &samples);
        prop_assert_eq!(trajectory_csv(&Trajectory { samples: back, meta: traj.meta.clone() }), text);
    }

    #[test]
    fn g9_is_within_nine_digits(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = format_g9(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-9 * v.abs());
    }
}
