mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use segway_core::linearization::{linearize, PlantSource, StateSpace};
use segway_core::numerics::{characteristic_polynomial, rank, Mat4, RealPolynomial, RANK_TOL};
use segway_core::synthesis::{
    canonical_form, controllability_matrix, place_poles, place_poles_pair, DesiredPoles,
};
use segway_core::{derive_constants, Error, SegwayParams};

/// Four stable poles: two reals and a conjugate pair, or two pairs.
fn stable_poles() -> impl Strategy<Value = Vec<Complex64>> {
    (
        prop::array::uniform4(-10.0..-0.1f64),
        prop::array::uniform2(0.05..5.0f64),
        any::<bool>(),
    )
        .prop_map(|(re, im, two_pairs)| {
            let mut v = vec![
                Complex64::new(re[0], im[0]),
                Complex64::new(re[0], -im[0]),
            ];
            if two_pairs {
                v.push(Complex64::new(re[1], im[1]));
                v.push(Complex64::new(re[1], -im[1]));
            } else {
                v.push(Complex64::new(re[2], 0.0));
                v.push(Complex64::new(re[3], 0.0));
            }
            v
        })
}

fn closed_loop(ss: &StateSpace, gains: [f64; 4]) -> Mat4 {
    let mut m = *ss.a();
    for i in 0..4 {
        for j in 0..4 {
            m.0[i][j] -= ss.b()[i] * gains[j];
        }
    }
    m
}

fn coeffs(p: &RealPolynomial) -> Vec<f64> {
    (0..5).map(|k| p.coeff(k)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn placement_is_sound(p in common::params(), poles in stable_poles()) {
        let p = SegwayParams { coupling: 6.0, ..p };
        let ss = linearize(&derive_constants(&p), p.coupling);
        let desired = DesiredPoles::Roots(poles);
        let want = desired.polynomial().unwrap();
        let res = place_poles(&ss, &desired).unwrap();
        let got = characteristic_polynomial(&closed_loop(&ss, res.gains.as_array()));
        let err = common::max_rel_diff(&coeffs(&got), &coeffs(&want));
        prop_assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn open_loop_polynomial_gives_zero_gains(p in common::params()) {
        let ss = linearize(&derive_constants(&p), p.coupling);
        let open = characteristic_polynomial(ss.a());
        let res = place_poles(&ss, &DesiredPoles::Polynomial(open)).unwrap();
        let scale = 1.0 + res.gains.as_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for g in res.gains.as_array() {
            prop_assert!(g.abs() <= 1e-9 * scale, "{}", res.gains);
        }
    }

    #[test]
    fn canonical_pair_returns_k_canon(
        p in common::params(),
        k_canon in prop::array::uniform4(-50.0..50.0f64),
    ) {
        let ss = linearize(&derive_constants(&p), p.coupling);
        let open = characteristic_polynomial(ss.a());
        let (ac, bc) = canonical_form(&open).unwrap();
        let res = place_poles_pair(&ac, &bc, &DesiredPoles::from_kcanon(&open, k_canon));
        // Far-from-stable targets can still fail verification; the gains
        // are what matter here.
        let gains = match res {
            Ok(r) => r.gains.as_array(),
            Err(Error::VerificationFailed { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for (g, k) in gains.iter().zip(k_canon) {
            prop_assert!((g - k).abs() <= 1e-9 * (1.0 + k.abs()), "{gains:?} vs {k_canon:?}");
        }
    }

    #[test]
    fn uncontrollable_iff_rank_deficient(
        entries in prop::array::uniform4(prop_oneof![Just(0.0), -20.0..20.0f64]),
    ) {
        let [a23, a43, b2, b4] = entries;
        let ss = StateSpace::from_entries(a23, a43, b2, b4, PlantSource::PaperNumeric);
        let full = rank(&controllability_matrix(&ss), RANK_TOL) == 4;
        let desired = DesiredPoles::Polynomial(RealPolynomial::from_descending(&[1.0, 4.0, 6.0, 4.0, 1.0]));
        match place_poles(&ss, &desired) {
            Err(Error::Uncontrollable { .. }) => prop_assert!(!full),
            _ => prop_assert!(full),
        }
    }
}
