//! Python access to the simulator: scenes, traces, kinematics and the
//! experiment protocols. Reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use softhand::experiments::{self, ExperimentReport};
use softhand::kinematics::{chain_pose, moment_arms as arms, route_length_in};
use softhand::render::{render_frame, RenderStyle};
use softhand::scene::{parse_scene, serialize_scene};
use softhand::solver::{self, SimError, SimState};
use softhand::{FingerId, TendonSide};

fn sim_err(e: SimError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn finger_id(name: &str) -> PyResult<FingerId> {
    FingerId::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown finger `{name}`")))
}

fn side(name: &str) -> PyResult<TendonSide> {
    match name {
        "flexor" => Ok(TendonSide::Flexor),
        "extensor" => Ok(TendonSide::Extensor),
        _ => Err(PyValueError::new_err(format!("unknown tendon side `{name}` (flexor, extensor)"))),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ExperimentReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    let scalars = PyDict::new(py);
    for s in &r.scalars {
        scalars.set_item(&s.name, s.value)?;
    }
    d.set_item("scalars", scalars)?;
    let criteria = PyDict::new(py);
    for c in &r.criteria {
        criteria.set_item(&c.name, c.pass)?;
    }
    d.set_item("criteria", criteria)?;
    d.set_item("passed", r.passed())?;
    d.set_item("notes", r.notes.clone())?;
    d.set_item("fingerprint", &r.fingerprint)?;
    Ok(d)
}

fn report_list<'py>(py: Python<'py>, reports: &[ExperimentReport]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    reports.iter().map(|r| report_dict(py, r)).collect()
}

/// A simulation scene: hand, objects, control schedule and settings.
#[pyclass(name = "Scene", module = "softhand_py")]
struct PyScene {
    inner: softhand::scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Default hand, no objects, no commands.
    #[new]
    fn new() -> Self {
        Self {
            inner: Default::default(),
        }
    }

    /// Parse a scene document; raises ValueError with line-numbered diagnostics.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_scene(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Canonical text form.
    fn to_text(&self) -> String {
        serialize_scene(&self.inner)
    }

    /// Hand-model invariant violations, empty when the model is sound.
    fn validate(&self) -> Vec<String> {
        softhand::validate(&self.inner.hand)
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect()
    }

    #[getter]
    fn object_names(&self) -> Vec<String> {
        self.inner.objects.iter().map(|o| o.name.clone()).collect()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.sim.dt
    }

    #[setter]
    fn set_dt(&mut self, dt: f64) -> PyResult<()> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(PyValueError::new_err("dt must be > 0"));
        }
        self.inner.sim.dt = dt;
        Ok(())
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.sim.t_end
    }

    #[setter]
    fn set_t_end(&mut self, t: f64) {
        self.inner.sim.t_end = t;
    }

    /// Run to the scene's stop condition. A run that fails to settle when
    /// asked to still returns its trace, with `equilibrium` false.
    fn simulate(&self) -> PyResult<Trace> {
        let trace = match solver::simulate(&self.inner) {
            Ok(t) => t,
            Err(SimError::EquilibriumNotReached { trace, .. }) => *trace,
            Err(e) => return Err(sim_err(e)),
        };
        Ok(Trace {
            scene: self.inner.clone(),
            trace,
        })
    }

    /// SVG of the initial state.
    fn render_initial(&self) -> String {
        render_frame(&SimState::initial(&self.inner), &self.inner, &RenderStyle::default())
    }

    fn __repr__(&self) -> String {
        format!("Scene(objects={}, t_end={})", self.inner.objects.len(), self.inner.sim.t_end)
    }
}

/// Recorded states of one run.
#[pyclass(module = "softhand_py")]
struct Trace {
    scene: softhand::scene::Scene,
    trace: solver::Trace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn equilibrium(&self) -> bool {
        self.trace.equilibrium
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.trace.states.iter().map(|s| s.t).collect()
    }

    /// Joint angles per recorded state (12 per row, rad).
    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        self.trace.states.iter().map(|s| s.q.clone()).collect()
    }

    #[getter]
    fn final_q(&self) -> Vec<f64> {
        self.trace.final_state.q.clone()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.trace.final_state.residual
    }

    /// Peak clutch and motor torques and lowest tendon tension over every step.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.trace.stats;
        let d = PyDict::new(py);
        d.set_item("steps", s.steps)?;
        d.set_item("max_clutch_torque", s.max_clutch_torque)?;
        d.set_item("max_motor_torque", s.max_motor_torque)?;
        d.set_item("min_tension", s.min_tension)?;
        Ok(d)
    }

    /// Grasp quality of `object` in the final state.
    #[pyo3(signature = (object = 0, tol = experiments::GRASP_TOL))]
    fn grasp_quality<'py>(&self, py: Python<'py>, object: usize, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        if object >= self.scene.objects.len() {
            return Err(PyValueError::new_err(format!("no object {object}")));
        }
        let g = solver::grasp_quality(&self.trace.final_state, &self.scene, object, tol);
        let d = PyDict::new(py);
        d.set_item("stable", g.stable)?;
        d.set_item("force_residual", g.force_residual)?;
        d.set_item("torque_residual", g.torque_residual)?;
        d.set_item("contact_count", g.contact_count)?;
        d.set_item("min_cone_margin", g.min_cone_margin)?;
        Ok(d)
    }

    fn csv(&self) -> String {
        experiments::trace_csv(&self.trace.states, &self.scene)
    }

    /// SVG of a recorded state; negative indices count from the end.
    #[pyo3(signature = (index = -1))]
    fn render(&self, index: isize) -> PyResult<String> {
        let n = self.trace.states.len() as isize;
        let i = if index < 0 { n + index } else { index };
        if !(0..n).contains(&i) {
            return Err(PyValueError::new_err(format!("state {index} out of range ({n} recorded)")));
        }
        Ok(render_frame(&self.trace.states[i as usize], &self.scene, &RenderStyle::default()))
    }

    fn __len__(&self) -> usize {
        self.trace.states.len()
    }
}

/// Palm-frame fingertip position (mm) of a default-hand finger.
#[pyfunction]
fn fingertip(finger: &str, q: [f64; 3]) -> PyResult<(f64, f64)> {
    let hand = softhand::build_default_hand();
    let f = hand.finger(finger_id(finger)?);
    let p = chain_pose(f, &q).fingertip(f);
    Ok((p.x, p.y))
}

/// Tendon path length (mm) of a default-hand route.
#[pyfunction]
fn path_length(finger: &str, tendon: &str, q: [f64; 3]) -> PyResult<f64> {
    let hand = softhand::build_default_hand();
    let id = finger_id(finger)?;
    let route = &hand.routes[hand.route_for(id, side(tendon)?).expect("every finger has both tendons")];
    Ok(route_length_in(route, &chain_pose(hand.finger(id), &q)))
}

/// Moment arms (mm, + flexes) of a default-hand route.
#[pyfunction]
fn moment_arms(finger: &str, tendon: &str, q: [f64; 3]) -> PyResult<[f64; 3]> {
    let hand = softhand::build_default_hand();
    let id = finger_id(finger)?;
    let route = &hand.routes[hand.route_for(id, side(tendon)?).expect("every finger has both tendons")];
    Ok(arms(route, hand.finger(id), &q))
}

/// Torque passed by a clutch for a given demand: `(transmitted, slipping)`.
#[pyfunction]
fn clutch_transmit(demand: f64, limit: f64) -> (f64, bool) {
    softhand::drive::clutch_transmit(demand, limit)
}

/// The seven hardware-test analogues plus the comparison summary.
#[pyfunction]
fn run_table1(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let reports = experiments::run_table1(&Default::default()).map_err(sim_err)?;
    report_list(py, &reports)
}

/// The nine-object grasp suite plus its summary.
#[pyfunction]
fn run_grasp_suite(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let reports = experiments::run_grasp_suite(&experiments::default_grasp_objects(), &Default::default());
    report_list(py, &reports)
}

/// Whole-hand close with `finger` blocked at `fraction` of its range.
#[pyfunction]
#[pyo3(signature = (finger, fraction = 0.5))]
fn run_blocked_finger<'py>(py: Python<'py>, finger: Option<&str>, fraction: f64) -> PyResult<Bound<'py, PyDict>> {
    let id = finger.map(finger_id).transpose()?;
    let r = experiments::run_blocked_finger(id, [fraction; 3], &Default::default()).map_err(sim_err)?;
    report_dict(py, &r)
}

/// Reopening delay for each injected extensor slack (mm).
#[pyfunction]
#[pyo3(signature = (sweep = experiments::SLACK_SWEEP.to_vec()))]
fn run_slack_demo(py: Python<'_>, sweep: Vec<f64>) -> PyResult<Bound<'_, PyDict>> {
    let r = experiments::run_slack_demo(&sweep, &Default::default()).map_err(sim_err)?;
    report_dict(py, &r)
}

/// Fit the motor no-load speed to the single-finger close time:
/// `(speed rad/s, close time s)`.
#[pyfunction]
fn calibrate() -> PyResult<(f64, f64)> {
    experiments::calibrate(&Default::default()).map_err(sim_err)
}

#[pymodule]
pub fn softhand_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(fingertip, m)?)?;
    m.add_function(wrap_pyfunction!(path_length, m)?)?;
    m.add_function(wrap_pyfunction!(moment_arms, m)?)?;
    m.add_function(wrap_pyfunction!(clutch_transmit, m)?)?;
    m.add_function(wrap_pyfunction!(run_table1, m)?)?;
    m.add_function(wrap_pyfunction!(run_grasp_suite, m)?)?;
    m.add_function(wrap_pyfunction!(run_blocked_finger, m)?)?;
    m.add_function(wrap_pyfunction!(run_slack_demo, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add("FINGERS", FingerId::ALL.iter().map(|f| f.name()).collect::<Vec<_>>())?;
    Ok(())
}
