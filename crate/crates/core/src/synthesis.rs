//! Controllability and pole placement through the controllable canonical
//! form.
//!
//! Feedback convention: `u = gains·(desired − state)`, i.e. `u = −gains·x`
//! when regulating to the origin, so the closed loop is `A − B·gains`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linearization::{PlantSource, StateSpace, STABILITY_TOL};
use crate::numerics::{
    characteristic_polynomial, faddeev_leverrier, invert_4x4, poly_roots, rank, Mat4,
    RealPolynomial, Vec4, RANK_TOL,
};

/// Largest accepted distance between a desired pole and the nearest achieved one.
pub const MAX_POLE_ERROR: f64 = 1e-6;

/// State-feedback gains `[Kp_x, Kd_x, Kp_t, Kd_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainVector {
    pub kp_x: f64,
    pub kd_x: f64,
    pub kp_t: f64,
    pub kd_t: f64,
}

impl GainVector {
    pub const ZERO: GainVector = GainVector {
        kp_x: 0.0,
        kd_x: 0.0,
        kp_t: 0.0,
        kd_t: 0.0,
    };

    pub fn new(kp_x: f64, kd_x: f64, kp_t: f64, kd_t: f64) -> GainVector {
        GainVector {
            kp_x,
            kd_x,
            kp_t,
            kd_t,
        }
    }

    /// Published mode-1 (hold tilt) gains.
    pub fn paper_mode1() -> GainVector {
        GainVector::new(0.0, -0.8064, -21.5634, -38.7861)
    }

    /// Published mode-2 (free stop) gains.
    pub fn paper_mode2() -> GainVector {
        GainVector::new(-0.4839, -1.6129, -13.7056, -7.5347)
    }

    pub fn to_vec(self) -> Vec4 {
        Vec4(self.as_array())
    }

    pub fn from_vec(v: Vec4) -> GainVector {
        GainVector::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.kp_x, self.kd_x, self.kp_t, self.kd_t]
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().is_finite()
    }

    /// Torque for the given error vector `desired − state`.
    pub fn apply(&self, error: &Vec4) -> f64 {
        self.to_vec().dot(error)
    }
}

impl fmt::Display for GainVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.4}, {:.4}, {:.4}, {:.4}]",
            self.kp_x, self.kd_x, self.kp_t, self.kd_t
        )
    }
}

/// Columns `[B, AB, A²B, A³B]`.
pub fn controllability_pair(a: &Mat4, b: &Vec4) -> Mat4 {
    let c0 = *b;
    let c1 = a.mul_vec(&c0);
    let c2 = a.mul_vec(&c1);
    let c3 = a.mul_vec(&c2);
    Mat4::from_columns([c0, c1, c2, c3])
}

pub fn controllability_matrix(ss: &StateSpace) -> Mat4 {
    controllability_pair(ss.a(), ss.b())
}

/// Companion pair for a monic quartic `s⁴ + a1·s³ + a2·s² + a3·s + a4`:
/// ones on the superdiagonal, last row `[−a4, −a3, −a2, −a1]`, `B = e4`.
pub fn canonical_form(char_poly: &RealPolynomial) -> Result<(Mat4, Vec4)> {
    check_monic_quartic(char_poly)?;
    let mut a = Mat4::ZERO;
    for i in 0..3 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..4 {
        a[(3, j)] = -char_poly.coeff(j);
    }
    Ok((a, Vec4([0.0, 0.0, 0.0, 1.0])))
}

fn check_monic_quartic(p: &RealPolynomial) -> Result<()> {
    if p.degree() != 4 || (p.leading() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "expected a monic degree-4 polynomial, got {p}"
        )));
    }
    Ok(())
}

/// Closed-loop target, either as pole locations or as a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum DesiredPoles {
    /// Four poles; complex ones must come in conjugate pairs.
    Roots(Vec<Complex64>),
    /// Monic quartic characteristic polynomial.
    Polynomial(RealPolynomial),
}

impl DesiredPoles {
    pub fn polynomial(&self) -> Result<RealPolynomial> {
        match self {
            DesiredPoles::Roots(r) => {
                if r.len() != 4 {
                    return Err(Error::InvalidArgument(format!(
                        "expected 4 desired poles, got {}",
                        r.len()
                    )));
                }
                for z in r.iter().filter(|z| z.im != 0.0) {
                    let tol = 1e-9 * (1.0 + z.norm());
                    if !r.iter().any(|w| (w - z.conj()).norm() <= tol) {
                        return Err(Error::InvalidArgument(format!(
                            "pole {z} has no conjugate partner"
                        )));
                    }
                }
                Ok(RealPolynomial::from_roots(r))
            }
            DesiredPoles::Polynomial(p) => {
                check_monic_quartic(p)?;
                Ok(p.clone())
            }
        }
    }

    /// Desired polynomial from canonical gains: `α = k_canon + a` coefficientwise.
    pub fn from_kcanon(open_loop_char: &RealPolynomial, k_canon: [f64; 4]) -> DesiredPoles {
        let asc: Vec<f64> = (0..4)
            .map(|j| open_loop_char.coeff(j) + k_canon[j])
            .chain(std::iter::once(1.0))
            .collect();
        DesiredPoles::Polynomial(RealPolynomial::new(asc))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolePlacementResult {
    /// Gains in canonical coordinates, `[α4−a4, α3−a3, α2−a2, α1−a1]`.
    pub k_canon: [f64; 4],
    pub gains: GainVector,
    pub desired_char: RealPolynomial,
    pub achieved_poles: Vec<Complex64>,
    pub max_pole_error: f64,
}

/// Pole placement on an arbitrary single-input pair `(A, B)`.
///
/// Gains in canonical coordinates come from matching coefficients of the
/// desired and open-loop polynomials; they are mapped back with
/// `K = K_canon·C_canon·C_plant⁻¹` and checked by an eigenvalue computation.
pub fn place_poles_pair(a: &Mat4, b: &Vec4, desired: &DesiredPoles) -> Result<PolePlacementResult> {
    let cz = controllability_pair(a, b);
    let r = rank(&cz, RANK_TOL);
    if r < 4 {
        return Err(Error::Uncontrollable { rank: r });
    }
    let cz_inv = invert_4x4(&cz).map_err(|_| Error::Uncontrollable { rank: r })?;

    let open = characteristic_polynomial(a);
    let target = desired.polynomial()?;
    let k_canon: [f64; 4] = std::array::from_fn(|j| target.coeff(j) - open.coeff(j));

    let (ac, bc) = canonical_form(&open)?;
    let cx = controllability_pair(&ac, &bc);
    let gains = Vec4(k_canon).mul_mat(&(cx * cz_inv));

    let achieved_poles = poly_roots(&closed_loop_polynomial(a, b, &gains))?;
    let desired_roots = match desired {
        DesiredPoles::Roots(r) => r.clone(),
        DesiredPoles::Polynomial(p) => poly_roots(p)?,
    };
    let max_pole_error = desired_roots
        .iter()
        .map(|d| {
            achieved_poles
                .iter()
                .map(|p| (p - d).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0_f64, f64::max);
    if !(max_pole_error <= MAX_POLE_ERROR) {
        return Err(Error::VerificationFailed { max_pole_error });
    }
    Ok(PolePlacementResult {
        k_canon,
        gains: GainVector::from_vec(gains),
        desired_char: target,
        achieved_poles,
        max_pole_error,
    })
}

/// `det(sI − A + B·gains)` by the matrix determinant lemma,
/// `char(A) + Σ_k s^(3−k)·gains·N_k·B`.
///
/// Working from the adjugate of `sI − A` avoids forming `A − B·gains`,
/// whose entries can be orders of magnitude larger than those of `A` and
/// cost most of the digits of an eigenvalue computation.
pub fn closed_loop_polynomial(a: &Mat4, b: &Vec4, gains: &Vec4) -> RealPolynomial {
    let (open, n) = faddeev_leverrier(a);
    let asc: Vec<f64> = (0..=4)
        .map(|j| {
            let fb = if j < 4 { gains.dot(&n[3 - j].mul_vec(b)) } else { 0.0 };
            open.coeff(j) + fb
        })
        .collect();
    RealPolynomial::new(asc)
}

pub fn place_poles(ss: &StateSpace, desired: &DesiredPoles) -> Result<PolePlacementResult> {
    place_poles_pair(ss.a(), ss.b(), desired)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    pub poles: Vec<Complex64>,
    /// All poles strictly in the left half-plane.
    pub stable: bool,
    /// No pole in the right half-plane but some on the imaginary axis.
    pub marginal: bool,
    pub char_poly: RealPolynomial,
}

/// Pole check of `A − B·gains`.
pub fn verify_closed_loop(ss: &StateSpace, gains: &GainVector) -> Result<ClosedLoopReport> {
    let char_poly = closed_loop_polynomial(ss.a(), ss.b(), &gains.to_vec());
    let poles = poly_roots(&char_poly)?;
    let stable = poles.iter().all(|p| p.re < -STABILITY_TOL);
    let marginal = !stable && poles.iter().all(|p| p.re <= STABILITY_TOL);
    Ok(ClosedLoopReport {
        poles,
        stable,
        marginal,
        char_poly,
    })
}

/// Desired characteristic polynomial for hold-tilt velocity control:
/// `s⁴ + 110s³ + 54.2575s² + 15s`.
pub fn mode1_desired() -> DesiredPoles {
    DesiredPoles::Polynomial(RealPolynomial::from_descending(&[1.0, 110.0, 54.2575, 15.0, 0.0]))
}

/// Canonical gains of the tuned free-stop controller.
pub const MODE2_KCANON: [f64; 4] = [9.0, 30.0, 38.0, 15.0];

/// Desired polynomial of the free-stop controller on the published plant,
/// `s⁴ + 15s³ + 31.2575s² + 30s + 9`.
pub fn mode2_desired() -> DesiredPoles {
    DesiredPoles::Polynomial(RealPolynomial::from_descending(&[1.0, 15.0, 31.2575, 30.0, 9.0]))
}

/// Hold-tilt and free-stop gains for a plant source.
///
/// The published model uses the printed gain vectors. A model derived from
/// parameters gets gains placed at the same two desired polynomials.
pub fn design_mode_gains(ss: &StateSpace) -> Result<(GainVector, GainVector)> {
    match ss.source() {
        PlantSource::PaperNumeric => {
            Ok((GainVector::paper_mode1(), GainVector::paper_mode2()))
        }
        PlantSource::DerivedFromParams => Ok((
            place_poles(ss, &mode1_desired())?.gains,
            place_poles(ss, &mode2_desired())?.gains,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::{linearize, paper_numeric_plant};
    use crate::numerics::damping_ratio;
    use crate::plant::{derive_constants, SegwayParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn paper_controllability_matrix() {
        let cz = controllability_matrix(&paper_numeric_plant());
        let want = [
            [0.0, 4.3735, 0.0, 10.8885],
            [4.3735, 0.0, 10.8885, 0.0],
            [0.0, -2.9270, 0.0, -19.7354],
            [-2.9270, 0.0, -19.7354, 0.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(cz[(i, j)], want[i][j], epsilon = 5e-4);
            }
        }
    }

    #[test]
    fn zero_input_is_uncontrollable() {
        let p = paper_numeric_plant();
        let ss = StateSpace::from_entries(p.a23(), p.a43(), 0.0, 0.0, p.source());
        let cz = controllability_matrix(&ss);
        assert_eq!(cz, Mat4::ZERO);
        assert_eq!(rank(&cz, RANK_TOL), 0);
        assert!(matches!(
            place_poles(&ss, &mode2_desired()),
            Err(Error::Uncontrollable { rank: 0 })
        ));
    }

    #[test]
    fn derived_plant_is_controllable() {
        let ss = linearize(&derive_constants(&SegwayParams::default()), 6.0);
        assert_eq!(rank(&controllability_matrix(&ss), RANK_TOL), 4);
    }

    #[test]
    fn canonical_forms() {
        let (a, b) = canonical_form(&RealPolynomial::from_descending(&[1.0, 0.0, -6.7425, 0.0, 0.0]))
            .unwrap();
        assert_eq!(a.row(3).0, [-0.0, -0.0, 6.7425, -0.0]);
        assert_eq!(b.0, [0.0, 0.0, 0.0, 1.0]);

        let (a, _) = canonical_form(&RealPolynomial::from_descending(&[1.0, 0.0, 0.0, 0.0, 0.0]))
            .unwrap();
        let shift = a * a * a * a;
        assert_eq!(shift, Mat4::ZERO);

        let p = RealPolynomial::from_descending(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (a, _) = canonical_form(&p).unwrap();
        assert_eq!(a.row(3).0, [-5.0, -4.0, -3.0, -2.0]);
        assert_eq!(characteristic_polynomial(&a), p);

        assert!(canonical_form(&RealPolynomial::from_descending(&[2.0, 0.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn mode1_gains() {
        let r = place_poles(&paper_numeric_plant(), &mode1_desired()).unwrap();
        let want_kc = [0.0, 15.0, 54.2575 + 6.7425, 110.0];
        for (k, w) in r.k_canon.iter().zip(want_kc) {
            assert_abs_diff_eq!(*k, w, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(r.gains.kp_x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.gains.kd_x, -0.8064, epsilon = 1e-3);
        assert_abs_diff_eq!(r.gains.kd_t, -38.7861, epsilon = 1e-3);
        // Only kp_t departs from the published vector: the canonical
        // transform gives -20.8405 where -21.5634 was printed.
        assert_abs_diff_eq!(r.gains.kp_t, -20.8405, epsilon = 1e-3);
        assert!(r.max_pole_error <= MAX_POLE_ERROR);
    }

    #[test]
    fn mode2_gains_from_kcanon() {
        let ss = paper_numeric_plant();
        let open = characteristic_polynomial(ss.a());
        let desired = DesiredPoles::from_kcanon(&open, MODE2_KCANON);
        let p = desired.polynomial().unwrap();
        for (got, want) in p.coeffs().iter().zip([9.0, 30.0, 31.2575, 15.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let r = place_poles(&ss, &desired).unwrap();
        let want = GainVector::paper_mode2().as_array();
        for (g, w) in r.gains.as_array().iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-3);
        }
    }

    #[test]
    fn placing_at_open_loop_gives_zero_gains() {
        let ss = paper_numeric_plant();
        let open = characteristic_polynomial(ss.a());
        let r = place_poles(&ss, &DesiredPoles::Polynomial(open)).unwrap();
        for g in r.gains.as_array() {
            assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn roots_entry_point_matches_polynomial() {
        let ss = paper_numeric_plant();
        let roots = vec![
            Complex64::new(-1.0, 0.5),
            Complex64::new(-1.0, -0.5),
            Complex64::new(-2.0, 0.0),
            Complex64::new(-3.0, 0.0),
        ];
        let a = place_poles(&ss, &DesiredPoles::Roots(roots.clone())).unwrap();
        let b = place_poles(
            &ss,
            &DesiredPoles::Polynomial(RealPolynomial::from_roots(&roots)),
        )
        .unwrap();
        for (x, y) in a.gains.as_array().iter().zip(b.gains.as_array()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
        let unpaired = vec![Complex64::new(-1.0, 0.5); 4];
        assert!(place_poles(&ss, &DesiredPoles::Roots(unpaired)).is_err());
    }

    #[test]
    fn closed_loop_checks() {
        let ss = paper_numeric_plant();
        let open = verify_closed_loop(&ss, &GainVector::ZERO).unwrap();
        assert!(!open.stable);
        assert_abs_diff_eq!(open.poles[3].re, 2.5966, epsilon = 1e-4);

        let m2 = verify_closed_loop(&ss, &GainVector::paper_mode2()).unwrap();
        assert!(m2.stable);
        assert!(m2.poles.iter().all(|p| p.re < 0.0));

        let g1 = place_poles(&ss, &mode1_desired()).unwrap().gains;
        let m1 = verify_closed_loop(&ss, &g1).unwrap();
        assert!(!m1.stable && m1.marginal);
        assert_abs_diff_eq!(m1.poles[0].re, -109.5058, epsilon = 0.11);
        let pair = m1.poles.iter().find(|p| p.im > 0.0).unwrap();
        assert_abs_diff_eq!(damping_ratio(*pair), 0.667, epsilon = 0.005);
    }
}
