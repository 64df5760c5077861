//! Command implementations shared by the binary and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use occmpc_core::geometry::Point2;
use occmpc_core::prediction;
use occmpc_core::safety::{self, SafetyVerdict};
use occmpc_core::sim::{self, Clock, Comparison, SimError, SimLog, StdClock};

use crate::export::{self, ExportError};
use crate::scenario::{self, Scenario, ScenarioError};
use crate::svg::{self, PlotData, PlotKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSAFE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Ordering(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Sim(SimError::Mpc(_)) | AppError::Ordering(_) => EXIT_UNSAFE,
            _ => EXIT_INPUT,
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub cycles: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(n) = self.cycles {
            sc.sim.cycles = n;
        }
        if let (Some(seed), Some(d)) = (self.seed, sc.sim.disturbance.as_mut()) {
            d.seed = seed;
        }
    }
}

pub fn load(path: &Path, ov: Overrides) -> Result<Scenario, AppError> {
    let mut sc = scenario::load(path)?;
    ov.apply(&mut sc);
    Ok(sc)
}

/// Safety assessment of the initial scene only.
pub fn check(sc: &Scenario) -> Result<SafetyVerdict, SimError> {
    let occ = prediction::occupancy_schedule_with(&sc.scene, sc.sim.hidden, &sc.sim.prediction)?;
    let dir = Point2::new(sc.scene.ego.pose.heading.cos(), sc.scene.ego.pose.heading.sin());
    Ok(safety::assess(&sc.scene.ego, &occ, dir, &sc.sim.safety)?)
}

pub fn verdict_text(v: &SafetyVerdict, speed: f64) -> String {
    format!(
        "verdict={} speed={:.3} min_gap={:.3} stopping_distance={:.3} margin={:.3} required_speed={:.3} binding_step={}\n",
        if v.guaranteed { "safe" } else { "unsafe" },
        speed,
        v.min_gap,
        v.stopping_distance,
        v.margin,
        v.required_speed,
        v.binding_step.map_or("none".to_string(), |k| k.to_string()),
    )
}

pub fn run(sc: &Scenario) -> Result<SimLog, SimError> {
    sim::run_closed_loop(&sc.scene, &sc.sim, &mut StdClock::default() as &mut dyn Clock)
}

/// Cycles whose plan failed or was over-constrained.
pub fn failed_cycles(log: &SimLog) -> usize {
    log.cycles.iter().filter(|c| c.issue.is_some()).count()
}

pub fn run_summary(name: &str, log: &SimLog) -> String {
    let peak = log
        .states()
        .iter()
        .map(|x| log.reference_y + x.e)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_ms = if log.cycles.is_empty() {
        0.0
    } else {
        log.cycles.iter().map(|c| c.planning_ms).sum::<f64>() / log.cycles.len() as f64
    };
    format!(
        "{name}: cycles={} termination={:?} final_station={:.3} final_speed={:.3} peak_y={:.3} total_slack_cost={:.6} failed_cycles={} mean_planning_ms={:.2}\n",
        log.cycles.len(),
        log.termination,
        log.final_station,
        log.final_speed,
        peak,
        log.total_slack_cost(),
        failed_cycles(log),
        mean_ms,
    )
}

fn write(path: &Path, contents: &str) -> Result<(), AppError> {
    fs::write(path, contents).map_err(|e| AppError::Io(path.to_path_buf(), e))
}

fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::Io(dir.to_path_buf(), e))
}

/// Writes `<stem>.csv`, `<stem>_plan.csv`, `<stem>_directives.txt` and the
/// two plots into `dir`. Returns the written paths.
pub fn write_outputs(log: &SimLog, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, AppError> {
    ensure_dir(dir)?;
    let files = [
        (format!("{stem}.csv"), export::rows_to_string(&export::cycle_rows(log))),
        (
            format!("{stem}_plan.csv"),
            export::rows_to_string(&export::first_plan_rows(log)),
        ),
        (format!("{stem}_directives.txt"), export::directive_text(log)),
        (
            format!("{stem}_trajectory.svg"),
            svg::emit_plot(log, PlotKind::Trajectory),
        ),
        (format!("{stem}_slack.svg"), svg::emit_plot(log, PlotKind::Slack)),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write(&p, &text)?;
        out.push(p);
    }
    Ok(out)
}

/// Runs two scenarios concurrently.
pub fn run_pair(a: &Scenario, b: &Scenario) -> Result<(SimLog, SimLog), SimError> {
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run(a));
        let rb = run(b);
        (ha.join().expect("simulation thread panicked"), rb)
    });
    Ok((ra?, rb?))
}

pub fn comparison_text(c: &Comparison, name_a: &str, name_b: &str) -> String {
    let (fa, fb) = c.first_contact();
    let fmt = |f: Option<usize>| f.map_or("none".to_string(), |k| k.to_string());
    format!(
        "total_slack_cost {name_a}={:.6} {name_b}={:.6}\nfirst_contact_cycle {name_a}={} {name_b}={}\nmax_abs_diff={:.6}\n{name_b}_exceeds_{name_a}={}\n",
        c.total_a,
        c.total_b,
        fmt(fa),
        fmt(fb),
        c.max_abs_diff,
        c.b_exceeds_a()
    )
}

/// Per-cycle slack cost of both runs side by side.
pub fn comparison_csv(c: &Comparison, dt: f64) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cycle", "t", "slack_cost_a", "slack_cost_b"])
        .expect("writing to memory");
    for (i, (a, b)) in c.series_a.iter().zip(&c.series_b).enumerate() {
        w.write_record([i.to_string(), format!("{}", i as f64 * dt), format!("{a}"), format!("{b}")])
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV output is ASCII")
}

/// Renders a plot from an exported CSV file.
pub fn plot_csv(path: &Path, kind: PlotKind, reference_y: f64) -> Result<String, AppError> {
    let f = fs::File::open(path).map_err(|e| AppError::Io(path.to_path_buf(), e))?;
    let rows = export::read_rows(f)?;
    Ok(svg::render(&PlotData::from_rows(&rows, kind, reference_y)))
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write(path, contents)
}
