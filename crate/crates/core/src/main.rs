use clap::{Parser, Subcommand};
use softhand::experiments::{
    default_grasp_objects, reports_csv, reports_manifest, run_blocked_finger, run_grasp_suite, run_slack_demo,
    run_table1, table1_text, trace_csv, ExperimentReport, HALF_BLOCK, SLACK_SWEEP,
};
use softhand::render::{render_frame, RenderStyle};
use softhand::scene::{parse_scene, Scene};
use softhand::solver::{simulate, SimError};
use softhand::FingerId;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Planar quasi-static simulator of a tendon-driven underactuated hand.
#[derive(Parser)]
#[command(name = "softhand", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a scene file.
    Validate { scene: PathBuf },
    /// Simulate a scene; writes trace.csv and SVG frames.
    Run {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Time step override (s).
        #[arg(long)]
        dt: Option<f64>,
        /// End time override (s).
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Number of evenly spaced SVG frames.
        #[arg(long, default_value_t = 5)]
        frames: usize,
    },
    /// Reproduce the seven single-finger and whole-hand hardware tests.
    Table1 {
        #[arg(long)]
        out: PathBuf,
    },
    /// Grasp the nine-object suite.
    Grasps {
        #[arg(long)]
        out: PathBuf,
    },
    /// Close the hand with one finger rigidly blocked.
    Blocked {
        #[arg(long)]
        finger: String,
        /// Block position as a fraction of each joint's flexion range.
        #[arg(long, default_value_t = HALF_BLOCK[0])]
        fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reopening delay against injected extensor slack.
    Slack {
        /// Comma-separated slack values (mm).
        #[arg(long, value_delimiter = ',', default_values_t = SLACK_SWEEP)]
        sweep: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Sim(_) => 1,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })
}

/// Writes an SVG per snapshot, then `reports.csv` and `manifest.json`.
fn write_reports(out: &Path, reports: &mut [ExperimentReport]) -> Result<(), CliError> {
    prepare(out)?;
    let style = RenderStyle::default();
    for r in reports.iter_mut() {
        let mut files = Vec::new();
        for snap in &r.snapshots {
            let file = format!("{}.svg", snap.label);
            write(&out.join(&file), &render_frame(&snap.state, &snap.scene, &style))?;
            files.push(file);
        }
        r.traces.extend(files);
    }
    write(&out.join("reports.csv"), &reports_csv(reports))?;
    write(&out.join("manifest.json"), &reports_manifest(reports))
}

fn load_scene(path: &Path) -> Result<Scene, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scene(&text).map_err(|e| CliError::Usage(format!("{}:\n{e}", path.display())))
}

fn verdict(reports: &[ExperimentReport]) -> ExitCode {
    for r in reports {
        for c in r.criteria.iter().filter(|c| !c.pass) {
            eprintln!("FAIL {}.{}", r.name, c.name);
        }
        for s in r.scalars.iter().filter(|s| s.pass == Some(false)) {
            eprintln!("FAIL {}.{} = {} {}", r.name, s.name, s.value, s.unit);
        }
    }
    if reports.iter().all(|r| r.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let base = Scene::default();
    match cli.command {
        Command::Validate { scene } => {
            load_scene(&scene)?;
            println!("{}: ok", scene.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            scene,
            out,
            dt,
            t_end,
            frames,
        } => {
            let mut s = load_scene(&scene)?;
            if let Some(dt) = dt {
                if dt.is_nan() || dt <= 0.0 {
                    return Err(CliError::Usage("--dt must be > 0".into()));
                }
                s.sim.dt = dt;
            }
            if let Some(t) = t_end {
                s.sim.t_end = t;
            }
            let (trace, settled) = match simulate(&s) {
                Ok(trace) => (trace, true),
                Err(SimError::EquilibriumNotReached { trace, .. }) => (*trace, false),
                Err(e) => return Err(e.into()),
            };
            prepare(&out)?;
            write(&out.join("trace.csv"), &trace_csv(&trace.states, &s))?;
            let style = RenderStyle::default();
            let n = trace.states.len();
            let picks: Vec<usize> = match frames {
                0 => Vec::new(),
                1 => vec![n - 1],
                k => {
                    let mut v: Vec<usize> = (0..k).map(|i| i * (n - 1) / (k - 1)).collect();
                    v.dedup();
                    v
                }
            };
            for (i, &idx) in picks.iter().enumerate() {
                write(&out.join(format!("frame_{i:03}.svg")), &render_frame(&trace.states[idx], &s, &style))?;
            }
            println!(
                "{} steps, t = {} s, residual = {:.3e}, equilibrium: {}",
                trace.stats.steps, trace.final_state.t, trace.final_state.residual, trace.equilibrium
            );
            if settled {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("FAIL equilibrium not reached");
                Ok(ExitCode::from(1))
            }
        }
        Command::Table1 { out } => {
            let mut reports = run_table1(&base)?;
            print!("{}", table1_text(reports.last().expect("summary report")));
            write_reports(&out, &mut reports)?;
            Ok(verdict(&reports[reports.len() - 1..]))
        }
        Command::Grasps { out } => {
            let mut reports = run_grasp_suite(&default_grasp_objects(), &base);
            for r in &reports {
                let stable = r.criteria.iter().find(|c| c.name == "stable").map(|c| c.pass);
                if let Some(stable) = stable {
                    println!("{:<20} {}", r.name, if stable { "stable" } else { "not stable" });
                }
            }
            let summary = reports.last().expect("summary report");
            println!(
                "stable {} of {}, distinct postures {}",
                summary.value("stable").unwrap_or(0.0),
                summary.value("objects").unwrap_or(0.0),
                summary.value("distinct_postures").unwrap_or(0.0)
            );
            write_reports(&out, &mut reports)?;
            Ok(verdict(&reports[reports.len() - 1..]))
        }
        Command::Blocked { finger, fraction, out } => {
            let id = FingerId::from_name(&finger)
                .ok_or_else(|| CliError::Usage(format!("unknown finger `{finger}` (thumb, index, middle, pinkie)")))?;
            if !(0.0..=1.0).contains(&fraction) {
                return Err(CliError::Usage("--fraction must lie in [0, 1]".into()));
            }
            let mut reports = vec![run_blocked_finger(Some(id), [fraction; 3], &base)?];
            for s in &reports[0].scalars {
                println!("{:<24} {} {}", s.name, s.value, s.unit);
            }
            if let Some(out) = out {
                write_reports(&out, &mut reports)?;
            }
            Ok(verdict(&reports))
        }
        Command::Slack { sweep, out } => {
            let mut reports = vec![run_slack_demo(&sweep, &base)?];
            for s in &reports[0].scalars {
                println!("{:<24} {} {}", s.name, s.value, s.unit);
            }
            if let Some(out) = out {
                write_reports(&out, &mut reports)?;
            }
            Ok(verdict(&reports))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
