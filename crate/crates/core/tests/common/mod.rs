#![allow(dead_code)]

use proptest::prelude::*;
use segway_core::SegwayParams;

/// Physically valid parameter sets spanning a few orders of magnitude.
pub fn params() -> impl Strategy<Value = SegwayParams> {
    (
        (0.05..20.0f64, 0.1..30.0f64, 0.0..0.5f64, 0.0..0.05f64),
        (0.02..1.5f64, 0.01..0.5f64, 1.0..25.0f64, 0.0..12.0f64),
    )
        .prop_map(|((m, big_m, ir, iw), (l, r, g, k))| SegwayParams {
            rod_mass: m,
            wheel_mass: big_m,
            rod_inertia: ir,
            wheel_inertia: iw,
            rod_length: l,
            wheel_radius: r,
            gravity: g,
            coupling: k,
        })
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
