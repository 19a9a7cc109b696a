//! Small-angle state-space model, transfer functions and open-loop poles.
//!
//! State ordering is `(x, ẋ, θ, θ̇)`. Every linear model here has the form
//!
//! ```text
//!     | 0 1  0  0 |        | 0  |
//! A = | 0 0 a23 0 |    B = | b2 |
//!     | 0 0  0  1 |        | 0  |
//!     | 0 0 a43 0 |        | b4 |
//! ```
//!
//! with `C = I` and `D = 0`.

use std::fmt;

use num_complex::Complex64;

use crate::error::Result;
use crate::numerics::{faddeev_leverrier, poly_roots, Mat4, RealPolynomial, Vec4};
use crate::plant::SystemConstants;

/// Real-part threshold separating stable, marginal and unstable poles.
pub const STABILITY_TOL: f64 = 1e-9;

/// Where a linear model's numbers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlantSource {
    /// Linearized from the physical parameters.
    DerivedFromParams,
    /// The published numeric model: `a23 = −3.72`, `a43 = 6.7425`,
    /// `b2 = 4.3735`, `b4 = −2.927`.
    PaperNumeric,
}

impl PlantSource {
    pub fn name(&self) -> &'static str {
        match self {
            PlantSource::DerivedFromParams => "derived",
            PlantSource::PaperNumeric => "paper",
        }
    }
}

impl fmt::Display for PlantSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlantSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "derived" => Ok(PlantSource::DerivedFromParams),
            "paper" => Ok(PlantSource::PaperNumeric),
            other => Err(format!("unknown plant source '{other}' (expected derived|paper)")),
        }
    }
}

/// Linear state-space model `ẋ = A·x + B·u`, `y = C·x + D·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace {
    a: Mat4,
    b: Vec4,
    source: PlantSource,
}

impl StateSpace {
    /// Builds the structured model from its four free entries.
    pub fn from_entries(a23: f64, a43: f64, b2: f64, b4: f64, source: PlantSource) -> StateSpace {
        let mut a = Mat4::ZERO;
        a[(0, 1)] = 1.0;
        a[(1, 2)] = a23;
        a[(2, 3)] = 1.0;
        a[(3, 2)] = a43;
        StateSpace {
            a,
            b: Vec4([0.0, b2, 0.0, b4]),
            source,
        }
    }

    pub fn a(&self) -> &Mat4 {
        &self.a
    }

    pub fn b(&self) -> &Vec4 {
        &self.b
    }

    pub fn c(&self) -> Mat4 {
        Mat4::identity()
    }

    pub fn d(&self) -> Vec4 {
        Vec4::ZERO
    }

    pub fn source(&self) -> PlantSource {
        self.source
    }

    pub fn a23(&self) -> f64 {
        self.a[(1, 2)]
    }

    pub fn a43(&self) -> f64 {
        self.a[(3, 2)]
    }

    pub fn b2(&self) -> f64 {
        self.b[1]
    }

    pub fn b4(&self) -> f64 {
        self.b[3]
    }

    /// `A·x + B·u`.
    pub fn derivative(&self, x: &Vec4, u: f64) -> Vec4 {
        self.a.mul_vec(x) + self.b.scale(u)
    }
}

/// Linearizes the equations of motion about the upright equilibrium.
///
/// Solving `k1·ẍ + k2·θ̈ = T`, `k3·ẍ + k4·θ̈ = k5·θ − K·T` for the
/// accelerations gives `a23 = −k2·k5/Δ`, `a43 = k1·k5/Δ`,
/// `b2 = (K·k2 + k4)/Δ` and `b4 = −(K·k1 + k3)/Δ`.
pub fn linearize(c: &SystemConstants, coupling: f64) -> StateSpace {
    let d = c.delta;
    StateSpace::from_entries(
        -c.k2 * c.k5 / d,
        c.k1 * c.k5 / d,
        (coupling * c.k2 + c.k4) / d,
        -(coupling * c.k1 + c.k3) / d,
        PlantSource::DerivedFromParams,
    )
}

/// The published numeric model, recovered from its controllability matrix.
///
/// `b2`, `b4` are the first column; `a23 = 10.8885/b4` and
/// `a43 = −19.7354/b4` come from the third column.
pub fn paper_numeric_plant() -> StateSpace {
    StateSpace::from_entries(-3.7200, 6.7425, 4.3735, -2.9270, PlantSource::PaperNumeric)
}

/// Output of a transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfLabel {
    /// `X(s)/T(s)`
    G1,
    /// `Ẋ(s)/T(s)`
    G2,
    /// `Θ(s)/T(s)`
    G3,
    /// `Θ̇(s)/T(s)`
    G4,
}

impl TfLabel {
    pub const ALL: [TfLabel; 4] = [TfLabel::G1, TfLabel::G2, TfLabel::G3, TfLabel::G4];

    pub fn describe(&self) -> &'static str {
        match self {
            TfLabel::G1 => "G1 = x/T",
            TfLabel::G2 => "G2 = xdot/T",
            TfLabel::G3 => "G3 = theta/T",
            TfLabel::G4 => "G4 = thetadot/T",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub label: TfLabel,
    pub numerator: RealPolynomial,
    pub denominator: RealPolynomial,
}

impl TransferFunction {
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.numerator.degree() == 0 {
            return Ok(Vec::new());
        }
        poly_roots(&self.numerator)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        poly_roots(&self.denominator)
    }
}

/// All four transfer functions, one per measured state.
///
/// Computed as the rows of `(sI − A)⁻¹·B` with the adjugate from the
/// Faddeev–LeVerrier recursion. All share the monic denominator
/// `det(sI − A) = s⁴ − a43·s²`; nothing is cancelled.
pub fn transfer_functions(ss: &StateSpace) -> [TransferFunction; 4] {
    let (den, n) = faddeev_leverrier(ss.a());
    let nb: Vec<Vec4> = n.iter().map(|nk| nk.mul_vec(ss.b())).collect();
    TfLabel::ALL.map(|label| {
        let row = label as usize;
        // adj(sI - A) = sum_k s^(3-k) N_k
        let asc: Vec<f64> = (0..4).map(|p| nb[3 - p][row]).collect();
        TransferFunction {
            label,
            numerator: RealPolynomial::new(asc),
            denominator: den.clone(),
        }
    })
}

/// Open-loop pole/zero summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub poles: Vec<Complex64>,
    /// Zeros of G1..G4 in order.
    pub zeros: Vec<Vec<Complex64>>,
    /// Any pole with real part above [`STABILITY_TOL`].
    pub unstable: bool,
    /// Not unstable, but some pole sits on the imaginary axis.
    pub marginal: bool,
    /// Per transfer function, zeros that coincide with poles (reported, not cancelled).
    pub cancellations: Vec<Vec<Complex64>>,
}

pub fn classify_stability(ss: &StateSpace) -> Result<StabilityReport> {
    let tfs = transfer_functions(ss);
    let poles = tfs[0].poles()?;
    let mut zeros = Vec::with_capacity(4);
    let mut cancellations = Vec::with_capacity(4);
    for tf in &tfs {
        let z = tf.zeros()?;
        cancellations.push(common_roots(&z, &poles));
        zeros.push(z);
    }
    let unstable = poles.iter().any(|p| p.re > STABILITY_TOL);
    let marginal = !unstable && poles.iter().any(|p| p.re.abs() <= STABILITY_TOL);
    Ok(StabilityReport {
        poles,
        zeros,
        unstable,
        marginal,
        cancellations,
    })
}

fn common_roots(zeros: &[Complex64], poles: &[Complex64]) -> Vec<Complex64> {
    let mut used = vec![false; poles.len()];
    let mut out = Vec::new();
    for z in zeros {
        let tol = 1e-6 * (1.0 + z.norm());
        if let Some(j) = (0..poles.len()).find(|&j| !used[j] && (poles[j] - z).norm() <= tol) {
            used[j] = true;
            out.push(*z);
        }
    }
    out
}
