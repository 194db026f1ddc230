use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<T>(f: impl FnOnce(&Bound<'_, PyModule>) -> PyResult<T>) -> T {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        use softhand_py::softhand_py;
        pyo3::append_to_inittab!(softhand_py);
        Python::initialize();
    });
    Python::attach(|py| {
        let m = py.import("softhand_py").expect("module imports");
        f(&m).unwrap_or_else(|e| panic!("{e}"))
    })
}

#[test]
fn kinematics_match_the_core_crate() {
    with_module(|m| {
        let (x, y): (f64, f64) = m.getattr("fingertip")?.call1(("index", [0.0, 0.0, 0.0]))?.extract()?;
        let hand = softhand::build_default_hand();
        let f = hand.finger(softhand::FingerId::Index);
        let want = softhand::kinematics::chain_pose(f, &[0.0; 3]).fingertip(f);
        assert_eq!((x, y), (want.x, want.y));
        let arms: [f64; 3] = m.getattr("moment_arms")?.call1(("thumb", "flexor", [0.3, 0.2, 0.1]))?.extract()?;
        assert!(arms.iter().all(|a| *a > 0.0));
        Ok(())
    });
}

#[test]
fn bad_names_raise_value_error() {
    with_module(|m| {
        let err = m.getattr("fingertip")?.call1(("ring", [0.0, 0.0, 0.0])).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        let err = m.getattr("moment_arms")?.call1(("index", "lateral", [0.0, 0.0, 0.0])).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        Ok(())
    });
}

#[test]
fn scenes_parse_simulate_and_render() {
    with_module(|m| {
        let scene = m.getattr("Scene")?.call_method1("parse", ("sim { t_end 0.05; }\n",))?;
        let text: String = scene.call_method0("to_text")?.extract()?;
        assert!(text.contains("t_end 0.05"));
        let trace = scene.call_method0("simulate")?;
        let times: Vec<f64> = trace.getattr("times")?.extract()?;
        assert_eq!(times.first(), Some(&0.0));
        let svg: String = trace.call_method0("render")?.extract()?;
        assert!(svg.starts_with("<svg"));
        let stats = trace.call_method0("stats")?;
        let stats = stats.cast::<PyDict>()?;
        let clutch: f64 = stats.get_item("max_clutch_torque")?.unwrap().extract()?;
        assert!(clutch <= 0.05);
        assert!(m.getattr("Scene")?.call_method1("parse", ("sim { dt -1; }",)).is_err());
        Ok(())
    });
}

#[test]
fn slack_report_is_a_dict() {
    with_module(|m| {
        let r = m.getattr("run_slack_demo")?.call1((vec![0.0, 20.0],))?;
        let r = r.cast::<PyDict>()?;
        let passed: bool = r.get_item("passed")?.unwrap().extract()?;
        assert!(passed);
        Ok(())
    });
}
