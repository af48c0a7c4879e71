use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isac_beam::experiments::{
    angle_sets, emit_plot_script, run_scenario, sweep_antennas, sweep_distance, validate_solution, write_angle_sets,
    write_antenna_sweep, write_distance_sweep, write_scenario_outputs, ExperimentKind, ExperimentSpec,
};
use isac_beam::formulation::{build_relaxed, RelaxedSpec};
use isac_beam::io::write_atomic;
use isac_beam::irm::IrmParams;
use isac_beam::metrics::{format_dbm, FeasibilityTolerances};
use isac_beam::scene::{build_desired_pattern, Scenario};
use isac_beam::sdp::write_dump;
use isac_beam::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "isac-beam", version, about = "Minimum-power ISAC beamforming")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file for `solve`, experiment file for the sweeps.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[arg(short, long, global = true, default_value = "out")]
    out: PathBuf,
    /// Concurrent runs in a sweep.
    #[arg(short, long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true)]
    gap_tol: Option<f64>,
    #[arg(long, global = true)]
    feas_tol: Option<f64>,
    /// Interior-point iteration cap per solve.
    #[arg(long, global = true)]
    max_solver_iterations: Option<usize>,
    /// Cap on penalized re-solves.
    #[arg(long, global = true)]
    max_irm_iterations: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and write its record and beampatterns.
    Solve {
        /// Also write the relaxed problem in text dump form.
        #[arg(long)]
        dump_problem: bool,
    },
    SweepAntennas,
    SweepDistance,
    AngleSets,
    /// Re-check every constraint of a saved run record.
    Validate {
        record: PathBuf,
    },
    /// Write a plotting script for the given CSV files.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "plot.py")]
        script: String,
    },
}

enum Failure {
    Code(u8, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::AmbiguousPattern(_) => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::NumericalFailure(_) | Error::RankOneViolation { .. } => EXIT_NONCONVERGENCE,
        Error::DimensionMismatch(_) | Error::Io(_) | Error::Json(_) => EXIT_VALIDATION,
    }
}

impl Global {
    fn params(&self) -> Result<IrmParams, Failure> {
        let mut p = IrmParams::default();
        if let Some(v) = self.gap_tol {
            p.solver.gap_tol = v;
        }
        if let Some(v) = self.feas_tol {
            p.solver.feas_tol = v;
        }
        if let Some(v) = self.max_solver_iterations {
            p.solver.max_iterations = v;
        }
        if let Some(v) = self.max_irm_iterations {
            p.max_iterations = v;
        }
        p.validate().map_err(|e| Failure::Code(EXIT_CONFIG, e.to_string()))?;
        Ok(p)
    }

    fn config(&self) -> Result<&Path, Failure> {
        self.config.as_deref().ok_or_else(|| Failure::Code(EXIT_CONFIG, "--config is required".into()))
    }

    fn experiment(&self, kind: ExperimentKind) -> Result<(ExperimentSpec, Scenario, PathBuf), Failure> {
        let (spec, scenario) = ExperimentSpec::load(self.config()?)?;
        if spec.kind != kind {
            return Err(Failure::Code(EXIT_CONFIG, format!("expected a {kind:?} experiment, found {:?}", spec.kind)));
        }
        let out = spec.output_dir.clone().unwrap_or_else(|| self.out.clone());
        Ok((spec, scenario, out))
    }

    fn tolerances(&self) -> FeasibilityTolerances {
        let mut t = FeasibilityTolerances::default();
        if let Some(v) = self.feas_tol {
            t.pattern_absolute = v;
        }
        t
    }
}

/// A scenario file, or a `single`/`decomposition` experiment naming one.
fn load_scenario(path: &Path) -> Result<(Scenario, Option<PathBuf>), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Code(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
    if let Ok(spec) = ExperimentSpec::from_toml_str(&text) {
        if !matches!(spec.kind, ExperimentKind::Single | ExperimentKind::Decomposition) {
            return Err(Failure::Code(EXIT_CONFIG, format!("solve cannot run a {:?} experiment", spec.kind)));
        }
        let (_, scenario) = ExperimentSpec::load(path)?;
        return Ok((scenario, spec.output_dir));
    }
    Ok((Scenario::from_toml_str(&text)?, None))
}

fn solve(g: &Global, dump_problem: bool) -> Result<(), Failure> {
    let (scenario, out) = load_scenario(g.config()?)?;
    let out = out.unwrap_or_else(|| g.out.clone());
    let params = g.params()?;
    if dump_problem {
        let pattern = build_desired_pattern(&scenario)?;
        let (relaxed, _) = build_relaxed(&RelaxedSpec::from_scenario(&scenario, &pattern, &params.formulation)?)?;
        write_atomic(&out.join("relaxation.dump"), write_dump(&relaxed).as_bytes())?;
    }
    let run = run_scenario(&scenario, &params)?;
    let files = write_scenario_outputs(&run, &out, "solution")?;
    let s = &run.record.summary;
    println!("relaxation power: {} dBm", format_dbm(s.sdr_power_mw));
    println!("final power:      {} dBm", format_dbm(s.final_power_mw));
    println!("iterations:       {}", s.iterations);
    println!("record:           {}", files.record.display());
    if !s.converged {
        return Err(Failure::Code(EXIT_NONCONVERGENCE, s.message.clone()));
    }
    Ok(())
}

fn report_rows(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { dump_problem } => solve(g, *dump_problem),
        Command::SweepAntennas => {
            let (spec, base, out) = g.experiment(ExperimentKind::AntennaSweep)?;
            let sweep = sweep_antennas(&base, &spec.antennas, &g.params()?, g.workers)?;
            report_rows(&write_antenna_sweep(&sweep, &out)?);
            Ok(())
        }
        Command::SweepDistance => {
            let (spec, base, out) = g.experiment(ExperimentKind::DistanceSweep)?;
            let sweep = sweep_distance(
                &base,
                &spec.distances_m,
                &spec.beam_widths_deg,
                spec.fixed_distance_m,
                &g.params()?,
                g.workers,
            )?;
            report_rows(&write_distance_sweep(&sweep, &out)?);
            Ok(())
        }
        Command::AngleSets => {
            let (spec, base, out) = g.experiment(ExperimentKind::AngleSets)?;
            let sets = angle_sets(&base, &spec.angle_sets, &g.params()?, g.workers)?;
            report_rows(&write_angle_sets(&sets, &out)?);
            Ok(())
        }
        Command::Validate { record } => {
            let report = validate_solution(record, &g.tolerances())?;
            print!("{}", report.render());
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Code(EXIT_VALIDATION, "constraint check failed".into()))
            }
        }
        Command::Plot { csv, script } => {
            let path = g.out.join(script);
            emit_plot_script(csv, &path).map_err(|e| match e {
                Error::Config(m) => Failure::Code(EXIT_VALIDATION, m),
                other => Failure::Lib(other),
            })?;
            report_rows(&path);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Code(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
