//! Python bindings: parameters, linear analysis, pole placement and
//! scenario simulation.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use segway_core::linearization::{classify_stability, transfer_functions};
use segway_core::numerics::RealPolynomial;
use segway_core::simulate::{
    linear_model, run_open_loop as core_open_loop, PlantVariant, ResponseMetrics, Signal,
    Trajectory,
};
use segway_core::synthesis::{
    controllability_matrix, design_mode_gains, place_poles as core_place, verify_closed_loop,
};
use segway_core::{
    derive_constants, paper_numeric_plant, run_scenario as core_run, DesiredPoles, Error,
    GainVector, Model, PlantSource, Scenario, SegwayParams,
};

create_exception!(segway, SegwayError, PyException);
create_exception!(segway, UncontrollableError, SegwayError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Uncontrollable { .. } => UncontrollableError::new_err(e.to_string()),
        Error::InvalidParams(_) | Error::InvalidScenario(_) | Error::InvalidArgument(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => SegwayError::new_err(e.to_string()),
    }
}

fn parse_source(s: &str) -> PyResult<PlantSource> {
    s.parse().map_err(PyValueError::new_err)
}

fn parse_model(s: &str) -> PyResult<Model> {
    s.parse().map_err(PyValueError::new_err)
}

fn gains4(v: Option<Vec<f64>>, name: &str) -> PyResult<Option<GainVector>> {
    match v.as_deref() {
        None => Ok(None),
        Some(&[a, b, c, d]) => Ok(Some(GainVector::new(a, b, c, d))),
        Some(other) => Err(PyValueError::new_err(format!(
            "{name}: expected 4 gains, got {}",
            other.len()
        ))),
    }
}

/// Physical parameters (SI units) plus the torque coupling `K`.
#[pyclass(name = "SegwayParams", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: SegwayParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (m=None, M=None, I_r=None, I_w=None, l=None, R=None, g=None, K=None))]
    #[allow(non_snake_case, clippy::too_many_arguments)]
    fn new(
        m: Option<f64>,
        M: Option<f64>,
        I_r: Option<f64>,
        I_w: Option<f64>,
        l: Option<f64>,
        R: Option<f64>,
        g: Option<f64>,
        K: Option<f64>,
    ) -> PyResult<Self> {
        let d = SegwayParams::default();
        let p = SegwayParams {
            rod_mass: m.unwrap_or(d.rod_mass),
            wheel_mass: M.unwrap_or(d.wheel_mass),
            rod_inertia: I_r.unwrap_or(d.rod_inertia),
            wheel_inertia: I_w.unwrap_or(d.wheel_inertia),
            rod_length: l.unwrap_or(d.rod_length),
            wheel_radius: R.unwrap_or(d.wheel_radius),
            gravity: g.unwrap_or(d.gravity),
            coupling: K.unwrap_or(d.coupling),
        };
        p.validate().map_err(to_py)?;
        Ok(PyParams { inner: p })
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.rod_mass
    }
    #[getter(M)]
    #[allow(non_snake_case)]
    fn big_m(&self) -> f64 {
        self.inner.wheel_mass
    }
    #[getter]
    #[allow(non_snake_case)]
    fn I_r(&self) -> f64 {
        self.inner.rod_inertia
    }
    #[getter]
    #[allow(non_snake_case)]
    fn I_w(&self) -> f64 {
        self.inner.wheel_inertia
    }
    #[getter]
    fn l(&self) -> f64 {
        self.inner.rod_length
    }
    #[getter(R)]
    fn radius(&self) -> f64 {
        self.inner.wheel_radius
    }
    #[getter]
    fn g(&self) -> f64 {
        self.inner.gravity
    }
    #[getter(K)]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }

    /// `{k1..k6, delta}`.
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = derive_constants(&self.inner);
        let d = PyDict::new(py);
        for (k, v) in [
            ("k1", c.k1),
            ("k2", c.k2),
            ("k3", c.k3),
            ("k4", c.k4),
            ("k5", c.k5),
            ("k6", c.k6),
            ("delta", c.delta),
        ] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SegwayParams(m={}, M={}, I_r={}, I_w={}, l={}, R={}, g={}, K={})",
            p.rod_mass,
            p.wheel_mass,
            p.rod_inertia,
            p.wheel_inertia,
            p.rod_length,
            p.wheel_radius,
            p.gravity,
            p.coupling
        )
    }
}

/// Linear model `ẋ = A x + B T` with all states measured.
#[pyclass(name = "StateSpace", from_py_object)]
#[derive(Clone)]
struct PyStateSpace {
    inner: segway_core::StateSpace,
}

#[pymethods]
impl PyStateSpace {
    /// Model for a plant source: "derived" (from `params`) or "paper".
    #[new]
    #[pyo3(signature = (source="derived", params=None))]
    fn new(source: &str, params: Option<PyParams>) -> PyResult<Self> {
        let p = params.map(|p| p.inner).unwrap_or_default();
        let inner = linear_model(parse_source(source)?, &derive_constants(&p), p.coupling);
        Ok(PyStateSpace { inner })
    }

    #[staticmethod]
    fn paper() -> Self {
        PyStateSpace {
            inner: paper_numeric_plant(),
        }
    }

    #[getter]
    fn source(&self) -> &'static str {
        self.inner.source().name()
    }
    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.inner.a().0.iter().map(|r| r.to_vec()).collect()
    }
    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().0.to_vec()
    }
    /// `(a23, a43, b2, b4)`.
    #[getter]
    fn entries(&self) -> (f64, f64, f64, f64) {
        let s = &self.inner;
        (s.a23(), s.a43(), s.b2(), s.b4())
    }

    fn controllability_matrix(&self) -> Vec<Vec<f64>> {
        controllability_matrix(&self.inner)
            .0
            .iter()
            .map(|r| r.to_vec())
            .collect()
    }

    /// List of `{label, numerator, denominator, zeros}`; coefficients are
    /// in ascending powers of `s`.
    fn transfer_functions<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        transfer_functions(&self.inner)
            .iter()
            .map(|tf| {
                let d = PyDict::new(py);
                d.set_item("label", format!("{:?}", tf.label))?;
                d.set_item("numerator", tf.numerator.coeffs().to_vec())?;
                d.set_item("denominator", tf.denominator.coeffs().to_vec())?;
                d.set_item("zeros", tf.zeros().map_err(to_py)?)?;
                Ok(d)
            })
            .collect()
    }

    /// `{poles, unstable, marginal}` of the open loop.
    fn stability<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = classify_stability(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("poles", r.poles)?;
        d.set_item("unstable", r.unstable)?;
        d.set_item("marginal", r.marginal)?;
        Ok(d)
    }

    /// Closed-loop poles of `A − B·gains`.
    fn closed_loop_poles(&self, gains: Vec<f64>) -> PyResult<Vec<Complex64>> {
        let g = gains4(Some(gains), "gains")?.unwrap();
        Ok(verify_closed_loop(&self.inner, &g).map_err(to_py)?.poles)
    }

    fn __repr__(&self) -> String {
        let (a23, a43, b2, b4) = self.entries();
        format!(
            "StateSpace(source={}, a23={a23:.4}, a43={a43:.4}, b2={b2:.4}, b4={b4:.4})",
            self.source()
        )
    }
}

/// Pole placement. Give exactly one of `poles` (complex list), `char`
/// (monic quartic, highest power first) or `kcanon` (constant term first).
#[pyfunction]
#[pyo3(signature = (ss, poles=None, char=None, kcanon=None))]
fn place_poles<'py>(
    py: Python<'py>,
    ss: &PyStateSpace,
    poles: Option<Vec<Complex64>>,
    char: Option<Vec<f64>>,
    kcanon: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let desired = match (poles, char, kcanon) {
        (Some(p), None, None) => DesiredPoles::Roots(p),
        (None, Some(c), None) => DesiredPoles::Polynomial(RealPolynomial::from_descending(&c)),
        (None, None, Some(k)) => {
            let k: [f64; 4] = k
                .try_into()
                .map_err(|_| PyValueError::new_err("kcanon needs 4 values"))?;
            let open = segway_core::numerics::characteristic_polynomial(ss.inner.a());
            DesiredPoles::from_kcanon(&open, k)
        }
        _ => {
            return Err(PyValueError::new_err(
                "give exactly one of poles, char, kcanon",
            ))
        }
    };
    let r = core_place(&ss.inner, &desired).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k_canon", r.k_canon.to_vec())?;
    d.set_item("gains", r.gains.as_array().to_vec())?;
    d.set_item("desired_char", r.desired_char.coeffs().to_vec())?;
    d.set_item("achieved_poles", r.achieved_poles)?;
    d.set_item("max_pole_error", r.max_pole_error)?;
    Ok(d)
}

/// Default `(mode1, mode2)` gains for a model.
#[pyfunction]
fn default_gains(ss: &PyStateSpace) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (a, b) = design_mode_gains(&ss.inner).map_err(to_py)?;
    Ok((a.as_array().to_vec(), b.as_array().to_vec()))
}

fn trajectory_dict<'py>(py: Python<'py>, t: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", t.times())?;
    for sig in Signal::ALL {
        d.set_item(sig.name(), t.signal(sig))?;
    }
    d.set_item(
        "torque",
        t.samples.iter().map(|s| s.torque).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "mode",
        t.samples
            .iter()
            .map(|s| s.mode.map(|m| m.name()).unwrap_or("open"))
            .collect::<Vec<_>>(),
    )?;
    d.set_item("flag", t.samples.iter().map(|s| s.flags).collect::<Vec<_>>())?;
    d.set_item("diverged", t.meta.diverged)?;
    Ok(d)
}

fn metrics_dict<'py>(py: Python<'py>, m: &ResponseMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rise_time", m.rise_time)?;
    d.set_item("settling_time", m.settling_time)?;
    d.set_item("overshoot", m.overshoot)?;
    d.set_item("steady_state_error", m.steady_state_error)?;
    d.set_item("settled", m.settled)?;
    Ok(d)
}

/// Two-mode scenario: hold the tilt until `t_hold`, then release and stop.
///
/// Returns the trajectory columns plus release point, target and metrics.
#[pyfunction]
#[pyo3(signature = (
    theta_i=std::f64::consts::PI / 12.0, t_hold=3.0, plant="paper", model="linear",
    params=None, gains_mode1=None, gains_mode2=None, dt=1e-3, t_max=30.0,
    torque_limit=None, stop_on_settle=true
))]
#[allow(clippy::too_many_arguments)]
fn run_scenario<'py>(
    py: Python<'py>,
    theta_i: f64,
    t_hold: f64,
    plant: &str,
    model: &str,
    params: Option<PyParams>,
    gains_mode1: Option<Vec<f64>>,
    gains_mode2: Option<Vec<f64>>,
    dt: f64,
    t_max: f64,
    torque_limit: Option<f64>,
    stop_on_settle: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    params.validate().map_err(to_py)?;
    let source = parse_source(plant)?;
    let ss = linear_model(source, &derive_constants(&params), params.coupling);
    let (d1, d2) = design_mode_gains(&ss).map_err(to_py)?;
    let sc = Scenario {
        params,
        theta_i,
        t_hold,
        plant_source: source,
        model: parse_model(model)?,
        gains_mode1: gains4(gains_mode1, "gains_mode1")?.unwrap_or(d1),
        gains_mode2: gains4(gains_mode2, "gains_mode2")?.unwrap_or(d2),
        dt,
        t_max,
        torque_limit,
        stop_on_settle,
    };
    let out = py.detach(|| core_run(&sc)).map_err(to_py)?;
    let d = trajectory_dict(py, &out.trajectory)?;
    d.set_item("v_des", out.v_des)?;
    d.set_item("release", out.release.map(|r| (r.t, r.x, r.v)))?;
    d.set_item("x_target", out.x_target)?;
    d.set_item("settled", out.settled)?;
    d.set_item("settling_time", out.settling_time)?;
    if let Some(m) = &out.hold_metrics {
        d.set_item("hold_metrics", metrics_dict(py, m)?)?;
    }
    if let Some(ms) = &out.free_metrics {
        let f = PyDict::new(py);
        for (sig, m) in Signal::ALL.iter().zip(ms) {
            f.set_item(sig.name(), metrics_dict(py, m)?)?;
        }
        d.set_item("free_metrics", f)?;
    }
    Ok(d)
}

/// Open-loop step response from the upright rest state.
#[pyfunction]
#[pyo3(signature = (torque=1.0, model="nonlinear", plant="derived", params=None, t_max=30.0, dt=1e-3))]
fn run_open_loop<'py>(
    py: Python<'py>,
    torque: f64,
    model: &str,
    plant: &str,
    params: Option<PyParams>,
    t_max: f64,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    params.validate().map_err(to_py)?;
    let source = parse_source(plant)?;
    let constants = derive_constants(&params);
    let variant = match parse_model(model)? {
        Model::Linear => PlantVariant::Linear(linear_model(source, &constants, params.coupling)),
        Model::Nonlinear => PlantVariant::Nonlinear {
            constants,
            coupling: params.coupling,
        },
    };
    let traj = py
        .detach(|| core_open_loop(&variant, source, torque, t_max, dt))
        .map_err(to_py)?;
    trajectory_dict(py, &traj)
}

#[pymodule]
fn segway(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyStateSpace>()?;
    m.add_function(wrap_pyfunction!(place_poles, m)?)?;
    m.add_function(wrap_pyfunction!(default_gains, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_open_loop, m)?)?;
    m.add("SegwayError", m.py().get_type::<SegwayError>())?;
    m.add("UncontrollableError", m.py().get_type::<UncontrollableError>())?;
    Ok(())
}
