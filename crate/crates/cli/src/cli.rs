//! Argument parsing and command dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use occmpc_core::sim;

use crate::app::{self, AppError, Overrides, EXIT_INPUT, EXIT_OK, EXIT_UNSAFE};
use crate::svg::PlotKind;

#[derive(Debug, Parser)]
#[command(name = "occmpc", version, about = "Occlusion-aware MPC trajectory planning simulator")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Override the number of simulation cycles.
    #[arg(long, global = true)]
    pub cycles: Option<usize>,
    /// Seed of the state disturbance, if the scenario enables one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a closed-loop simulation and write CSV, directive log and plots.
    Run { scenario: PathBuf },
    /// Run two scenarios and compare their slack cost.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Fail unless run B accumulates more slack cost than run A.
        #[arg(long)]
        expect_b_exceeds_a: bool,
    },
    /// Safety assessment of the initial scene only.
    Check { scenario: PathBuf },
    /// Plot an exported CSV log.
    Plot {
        log: PathBuf,
        #[arg(long, default_value = "trajectory")]
        kind: PlotKind,
        /// Lateral offset added to `e`.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        reference_y: f64,
    },
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(args, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: &Args, out: &mut dyn Write) -> Result<i32, AppError> {
    let ov = Overrides {
        cycles: args.cycles,
        seed: args.seed,
    };
    let io = |e| AppError::Io(PathBuf::from("<stdout>"), e);
    match &args.command {
        Command::Check { scenario } => {
            let sc = app::load(scenario, ov)?;
            let v = app::check(&sc)?;
            out.write_all(app::verdict_text(&v, sc.scene.ego.speed).as_bytes())
                .map_err(io)?;
            Ok(if v.guaranteed { EXIT_OK } else { EXIT_UNSAFE })
        }
        Command::Run { scenario } => {
            let sc = app::load(scenario, ov)?;
            let log = app::run(&sc)?;
            let name = app::stem(scenario);
            app::write_outputs(&log, &args.out, &name)?;
            out.write_all(app::run_summary(&name, &log).as_bytes()).map_err(io)?;
            Ok(if app::failed_cycles(&log) > 0 { EXIT_UNSAFE } else { EXIT_OK })
        }
        Command::Compare {
            a,
            b,
            expect_b_exceeds_a,
        } => {
            let sa = app::load(a, ov)?;
            let sb = app::load(b, ov)?;
            let (la, lb) = app::run_pair(&sa, &sb)?;
            let (na, nb) = (app::stem(a), app::stem(b));
            app::write_outputs(&la, &args.out, &na)?;
            app::write_outputs(&lb, &args.out, &nb)?;
            let c = sim::compare_runs(&la, &lb)?;
            app::write_file(
                &args.out.join(format!("compare_{na}_{nb}.csv")),
                &app::comparison_csv(&c, la.dt),
            )?;
            let text = format!(
                "{}{}{}",
                app::run_summary(&na, &la),
                app::run_summary(&nb, &lb),
                app::comparison_text(&c, &na, &nb)
            );
            out.write_all(text.as_bytes()).map_err(io)?;
            let failed = app::failed_cycles(&la) + app::failed_cycles(&lb);
            if *expect_b_exceeds_a && !c.b_exceeds_a() {
                return Err(AppError::Ordering(format!(
                    "expected {nb} to exceed {na} in total slack cost"
                )));
            }
            Ok(if failed > 0 { EXIT_UNSAFE } else { EXIT_OK })
        }
        Command::Plot { log, kind, reference_y } => {
            let svg = app::plot_csv(log, *kind, *reference_y)?;
            let path = args.out.join(format!("{}_{}.svg", app::stem(log), kind.name()));
            app::write_file(&path, &svg)?;
            writeln!(out, "{}", path.display()).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv` and runs; usage errors map to the input-error exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Args::try_parse_from(argv) {
        Ok(args) => execute(&args, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_INPUT
            } else {
                // --help and --version
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            }
        }
    }
}
