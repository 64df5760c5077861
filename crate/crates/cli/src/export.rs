//! CSV output of simulation logs and plans.

use std::io::{Read, Write};

use occmpc_core::mpc::Trajectory;
use occmpc_core::sim::SimLog;

pub const HEADER: [&str; 9] = [
    "t",
    "x_station",
    "e",
    "dpsi",
    "beta",
    "omega",
    "delta_f",
    "epsilon",
    "slack_cost",
];

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x_station: f64,
    pub e: f64,
    pub dpsi: f64,
    pub beta: f64,
    pub omega: f64,
    pub delta_f: f64,
    pub epsilon: f64,
    pub slack_cost: f64,
}

impl Row {
    fn fields(&self) -> [f64; 9] {
        [
            self.t,
            self.x_station,
            self.e,
            self.dpsi,
            self.beta,
            self.omega,
            self.delta_f,
            self.epsilon,
            self.slack_cost,
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad header, expected {}", HEADER.join(","))]
    Header,
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
}

/// One row per cycle: the state at the start of the cycle, the applied
/// input and the slack of that cycle's plan.
pub fn cycle_rows(log: &SimLog) -> Vec<Row> {
    log.cycles
        .iter()
        .map(|c| Row {
            t: c.t,
            x_station: c.station,
            e: c.state.e,
            dpsi: c.state.dpsi,
            beta: c.state.beta,
            omega: c.state.omega,
            delta_f: c.applied.delta_f,
            epsilon: c.slack,
            slack_cost: c.slack_cost,
        })
        .collect()
}

/// One row per horizon step of a plan. The last state has no input and
/// is written with zero steering and slack.
pub fn plan_rows(plan: &Trajectory, t0: f64, station0: f64, speed: f64) -> Vec<Row> {
    plan.states
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let t = k as f64 * plan.dt;
            Row {
                t: t0 + t,
                x_station: station0 + speed * t,
                e: x.e,
                dpsi: x.dpsi,
                beta: x.beta,
                omega: x.omega,
                delta_f: plan.inputs.get(k).map_or(0.0, |u| u.delta_f),
                epsilon: plan.slack.get(k).copied().unwrap_or(0.0),
                slack_cost: plan.slack_cost.get(k).copied().unwrap_or(0.0),
            }
        })
        .collect()
}

/// Rows of the first cycle's plan, empty if there was none.
pub fn first_plan_rows(log: &SimLog) -> Vec<Row> {
    log.cycles
        .first()
        .and_then(|c| c.plan.as_ref().map(|p| plan_rows(p, c.t, c.station, c.speed)))
        .unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.fields().iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<Row>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        return Err(ExportError::Header);
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 9];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field.trim().parse().map_err(|_| ExportError::Row {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
        }
        rows.push(Row {
            t: v[0],
            x_station: v[1],
            e: v[2],
            dpsi: v[3],
            beta: v[4],
            omega: v[5],
            delta_f: v[6],
            epsilon: v[7],
            slack_cost: v[8],
        });
    }
    Ok(rows)
}

/// Directive log, one line per cycle.
pub fn directive_text(log: &SimLog) -> String {
    let mut s = log.directive_log().join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}
