use softhand::contact::{ContactPoint, ContactSource};
use softhand::render::{render_frame, RenderStyle, EXTENSOR_COLOR, FLEXOR_COLOR};
use softhand::scene::Scene;
use softhand::solver::SimState;
use softhand::{FingerId, Vec2};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn count(svg: &str, needle: &str) -> usize {
    svg.matches(needle).count()
}

#[test]
fn open_hand_draws_every_phalanx_and_tendon() {
    let scene = Scene::default();
    let svg = render_frame(&SimState::initial(&scene), &scene, &RenderStyle::default());
    assert!(svg.starts_with("<svg "));
    assert!(svg.ends_with("</svg>\n"));
    assert_eq!(count(&svg, "class=\"phalanx\""), 16);
    assert_eq!(count(&svg, "class=\"tendon flexor\""), 4);
    assert_eq!(count(&svg, "class=\"tendon extensor\""), 4);
    assert_eq!(count(&svg, FLEXOR_COLOR), 4);
    assert_eq!(count(&svg, EXTENSOR_COLOR), 4);
    assert_eq!(count(&svg, "class=\"contact\""), 0);
}

#[test]
fn one_contact_one_marker() {
    let scene = Scene::default();
    let mut st = SimState::initial(&scene);
    st.contacts.push(ContactPoint {
        position: Vec2::new(-40.0, 80.0),
        normal: Vec2::new(-1.0, 0.0),
        depth: 0.2,
        normal_force: 2.0,
        tangent_force: 0.5,
        mu: 0.9,
        source: ContactSource::Phalanx {
            finger: FingerId::Index,
            phalanx: 2,
        },
        object: 0,
        stick: 0.0,
    });
    let svg = render_frame(&st, &scene, &RenderStyle::default());
    assert_eq!(count(&svg, "class=\"contact\""), 1);
    assert_eq!(count(&svg, "class=\"force\""), 1);
}

#[test]
fn rendering_is_byte_stable() {
    let scene = Scene::default();
    let mut st = SimState::initial(&scene);
    st.q.iter_mut().enumerate().for_each(|(i, q)| *q = 0.1 * i as f64);
    let style = RenderStyle::default();
    assert_eq!(render_frame(&st, &scene, &style), render_frame(&st, &scene, &style));
}

#[test]
fn hiding_tendons_drops_the_polylines() {
    let scene = Scene::default();
    let style = RenderStyle {
        tendons: false,
        ..RenderStyle::default()
    };
    let svg = render_frame(&SimState::initial(&scene), &scene, &style);
    assert_eq!(count(&svg, "<polyline"), 0);
}

fn softhand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softhand")).args(args).output().expect("spawn softhand")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_the_default_scene() {
    let out = softhand(&["validate", path(&fixture("empty.shs"))]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_scene_exits_2_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.shs");
    std::fs::write(&bad, "sim { dt 0.001; }\nobject ball { circle 30; mass -1; }\n").unwrap();
    let out = softhand(&["run", path(&bad), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('2'), "{err}");
    assert!(err.contains("mass"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(softhand(&["bogus"]).status.code(), Some(2));
    assert_eq!(softhand(&["blocked", "--finger", "ring"]).status.code(), Some(2));
    assert_eq!(softhand(&["blocked", "--finger", "index", "--fraction", "2"]).status.code(), Some(2));
}

#[test]
fn missing_scene_exits_1() {
    let out = softhand(&["validate", "/nonexistent/scene.shs"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_a_trace_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = softhand(&["run", path(&fixture("free_close.shs")), "--out", path(dir.path()), "--frames", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("t,q_thumb_mcp,"));
    for i in 0..3 {
        assert!(dir.path().join(format!("frame_{i:03}.svg")).exists());
    }
}

#[test]
fn table1_prints_the_hardware_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = softhand(&["table1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    let hardware: Vec<f64> = lines[1..8].iter().map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(hardware, [0.84, 0.97, 5.0, 6.0, 1.8, 0.98, 1.12]);
    assert!(dir.path().join("reports.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("a1.svg").exists());
}

#[test]
fn slack_command_reports_each_delay() {
    let out = softhand(&["slack", "--sweep", "0,20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("delay_0mm") && text.contains("delay_20mm"));
}
