//! The `stlsynth` command line.
//!
//! Exit codes: 0 success, 1 no satisfying plan (infeasible, undecided, or
//! violated in closed loop), 2 usage or input error, 3 I/O or file format
//! error. Logs go to standard error; results go to files.

pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lti::{
    building_defaults, builtin_model, default_order_bound, generate_data, read_schedule_csv, read_signal_csv,
    read_trajectory_csv, write_signal_csv, write_trajectory_csv, Disturbance, InputBox, Signal, StateSpaceModel,
    Trajectory,
};
use crate::milp::{export_lp, CostKind, EncodingParams};
use crate::scenarios::{Scenario, ScenarioName};
use crate::solver::SolverParams;
use crate::stl::{parse_with_schedules, Schedule, Schedules, StlFormula};
use crate::synthesis::{
    self, ClosedLoop, SynthesisConfig, SynthesisResult, SynthesisStatus, Verdict, DEFAULT_INIT_TOL,
};

use self::plot::{spec_band, PlotData};
use self::report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSATISFIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stlsynth", version, about = "Data-driven synthesis of inputs satisfying STL specifications")]
struct Cli {
    /// TOML file with `[milp]` and `[solver]` tables overriding the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a built-in system under uniform random inputs.
    Generate(GenerateArgs),
    /// Compute inputs from measured data.
    Synthesize(SynthesizeArgs),
    /// Check given inputs against a built-in system.
    Verify(VerifyArgs),
    /// Rerun one of the shipped case studies.
    Reproduce(ReproduceArgs),
    /// Write the synthesis program as a CPLEX LP file without solving it.
    ExportLp(ExportLpArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Input bounds `lo,hi` for every channel; defaults to the system's box.
    #[arg(long = "box", allow_hyphen_values = true)]
    input_box: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostArg {
    UNorm,
    YNorm,
    Mixed,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Measured trajectory, `t,u1..,[d1..,]y1..`.
    #[arg(long)]
    data: PathBuf,
    /// File holding the formula.
    #[arg(long)]
    spec: PathBuf,
    /// Initialization window in the trajectory format.
    #[arg(long)]
    init: PathBuf,
    /// Initialization length; defaults to the rows of `--init`.
    #[arg(long)]
    tini: Option<usize>,
    /// Upper bound on the system order; defaults to `--tini`.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_enum, default_value_t = CostArg::UNorm)]
    cost: CostArg,
    /// Input weights of the mixed cost, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Output weights of the mixed cost, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Input bounds `lo,hi`; defaults to the range seen in the data.
    #[arg(long = "box", allow_hyphen_values = true)]
    input_box: Option<String>,
    /// Known future disturbance, `t,d1..`, at least L+1 rows.
    #[arg(long)]
    disturbance: Option<PathBuf>,
    /// Named schedule used by the formula, `name=path`.
    #[arg(long = "schedule")]
    schedules: Vec<String>,
    /// Plan length minus one; at least the formula horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Built-in system to check the plan against in closed loop.
    #[arg(long)]
    verify_model: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write `plot.svg`.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct ExportLpArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    init: PathBuf,
    /// Inputs to apply, `t,u1..`.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long = "schedule")]
    schedules: Vec<String>,
    #[arg(long)]
    disturbance: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_INIT_TOL)]
    init_tol: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Scenario1,
    Scenario2,
    Hvac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    UNorm,
    YNorm,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = NormArg::UNorm)]
    cost: NormArg,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = crate::scenarios::DEFAULT_SEED)]
    seed: u64,
    /// Data length; defaults to the scenario's.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    export_lp: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    milp: EncodingParams,
    solver: SolverParams,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Format { .. } => EXIT_IO,
        Error::Numerical(_) => EXIT_UNSATISFIED,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Synthesize(a) => synthesize(a, &config),
        Command::ExportLp(a) => export(a, &config),
        Command::Verify(a) => verify(a),
        Command::Reproduce(a) => reproduce(a, &config),
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = fs::read_to_string(path)?;
    let cfg: ConfigFile =
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {}", path.display(), e.message())))?;
    cfg.milp.validate()?;
    cfg.solver.validate()?;
    Ok(cfg)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().map_err(|_| Error::invalid(format!("{what}: `{v}` is not a number")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::invalid(format!("{what}: non-finite value")))
            }
        })
        .collect()
}

fn parse_box(s: &str, dim: usize) -> Result<InputBox> {
    match parse_list(s, "--box")?.as_slice() {
        [lo, hi] => InputBox::uniform(dim, *lo, *hi),
        _ => Err(Error::invalid(format!("--box takes `lo,hi`, got `{s}`"))),
    }
}

fn model_for(name: &str) -> Result<(StateSpaceModel, usize)> {
    let model = builtin_model(name)?;
    Ok((model, default_order_bound(name).unwrap_or(1)))
}

fn load_schedules(specs: &[String]) -> Result<Schedules> {
    let mut out = Schedules::new();
    for s in specs {
        let (name, path) =
            s.split_once('=').ok_or_else(|| Error::invalid(format!("--schedule takes `name=path`, got `{s}`")))?;
        let values = read_schedule_csv(path)?;
        if out.insert(name.to_string(), Schedule::new(name, values)).is_some() {
            return Err(Error::invalid(format!("schedule `{name}` given twice")));
        }
    }
    Ok(out)
}

fn load_spec(path: &Path, n_y: usize, schedules: &Schedules) -> Result<(String, StlFormula)> {
    let text = fs::read_to_string(path)?;
    let src = text.trim().to_string();
    let phi = parse_with_schedules(&src, n_y, schedules)?;
    Ok((src, phi))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn generate(a: &GenerateArgs) -> Result<i32> {
    let model = builtin_model(&a.system)?;
    let (input_box, disturbance) = match a.system.as_str() {
        "building" => {
            let defaults = building_defaults()?;
            (defaults.input_box, Some(Disturbance::Random(defaults.data_disturbance_box)))
        }
        _ => (InputBox::uniform(model.n_u(), -2.0, 2.0)?, None),
    };
    let input_box = match &a.input_box {
        Some(s) => parse_box(s, model.n_u())?,
        None => input_box,
    };
    let data = generate_data(&model, a.steps, &input_box, a.seed, disturbance.as_ref())?;
    write_trajectory_csv(&a.out, &data)?;
    log::info!("wrote {} samples of `{}` to {}", data.len(), a.system, a.out.display());
    Ok(EXIT_OK)
}

/// Everything a data-driven run needs, read from the problem flags.
struct Loaded {
    data: Trajectory,
    w_ini: Trajectory,
    spec: String,
    phi: StlFormula,
    d_future: Option<Signal>,
    cfg: SynthesisConfig,
}

fn load_problem(a: &ProblemArgs, config: &ConfigFile) -> Result<Loaded> {
    let data = read_trajectory_csv(&a.data)?;
    let w_ini = read_trajectory_csv(&a.init)?;
    if (w_ini.n_u(), w_ini.n_y(), w_ini.n_d()) != (data.n_u(), data.n_y(), data.n_d()) {
        return Err(Error::dim("initialization and data have different channels"));
    }
    let t_ini = a.tini.unwrap_or(w_ini.len());
    if t_ini != w_ini.len() {
        return Err(Error::dim(format!("--tini {t_ini} but the initialization has {} samples", w_ini.len())));
    }
    let schedules = load_schedules(&a.schedules)?;
    let (spec, phi) = load_spec(&a.spec, data.n_y(), &schedules)?;
    let input_box = match &a.input_box {
        Some(s) => parse_box(s, data.n_u())?,
        None => observed_box(&data.u)?,
    };
    let cost = match a.cost {
        CostArg::UNorm | CostArg::YNorm if a.r.is_some() || a.q.is_some() => {
            return Err(Error::invalid("--r and --q apply to --cost mixed only"));
        }
        CostArg::UNorm => CostKind::InputNorm,
        CostArg::YNorm => CostKind::OutputNorm,
        CostArg::Mixed => {
            let weights = |s: &Option<String>, n: usize, what: &str| -> Result<Vec<f64>> {
                match s {
                    Some(s) => parse_list(s, what),
                    None => Ok(vec![1.0; n]),
                }
            };
            CostKind::Mixed { r: weights(&a.r, data.n_u(), "--r")?, q: weights(&a.q, data.n_y(), "--q")? }
        }
    };
    let mut cfg = SynthesisConfig::new(a.order.unwrap_or(t_ini), input_box);
    cfg.t_ini = t_ini;
    cfg.cost = cost;
    cfg.horizon = a.horizon;
    cfg.encoding = config.milp.clone();
    cfg.solver = config.solver.clone();
    let len = a.horizon.unwrap_or_else(|| synthesis::compute_l(&phi)) + 1;
    let d_future = match (&a.disturbance, data.n_d()) {
        (None, 0) => None,
        (Some(_), 0) => return Err(Error::invalid("--disturbance given but the data has no disturbance channels")),
        (None, _) => return Err(Error::invalid("the data has disturbance channels: --disturbance is required")),
        (Some(p), n_d) => {
            let d = read_signal_csv(p)?;
            if d.dim() != n_d {
                return Err(Error::dim(format!("disturbance has {} channels, data has {n_d}", d.dim())));
            }
            if d.len() < len {
                return Err(Error::InsufficientData { needed: len, got: d.len() });
            }
            Some(d.slice(0, len))
        }
    };
    Ok(Loaded { data, w_ini, spec, phi, d_future, cfg })
}

/// The per-channel range of the recorded inputs.
fn observed_box(u: &Signal) -> Result<InputBox> {
    let (lo, hi) = (0..u.dim())
        .map(|c| {
            let ch = u.channel(c);
            (ch.iter().copied().fold(f64::INFINITY, f64::min), ch.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .unzip();
    InputBox::new(lo, hi)
}

fn export(a: &ExportLpArgs, config: &ConfigFile) -> Result<i32> {
    let l = load_problem(&a.problem, config)?;
    let prepared = synthesis::prepare(&l.data, &l.w_ini, l.d_future.as_ref(), &l.phi, &l.cfg)?;
    export_lp(&prepared.problem, &a.out)?;
    log::info!("wrote {} to {}", describe_size(&prepared.problem), a.out.display());
    Ok(EXIT_OK)
}

fn describe_size(p: &crate::milp::MilpProblem) -> String {
    format!("{} variables ({} binary), {} constraints", p.n_vars(), p.binaries().len(), p.constraints.len())
}

fn synthesize(a: &SynthesizeArgs, config: &ConfigFile) -> Result<i32> {
    let l = load_problem(&a.problem, config)?;
    let verify_model = a.verify_model.as_deref().map(model_for).transpose()?.map(|(m, _)| m);
    ensure_dir(&a.out_dir)?;
    if let Some(path) = &a.export_lp {
        let prepared = synthesis::prepare(&l.data, &l.w_ini, l.d_future.as_ref(), &l.phi, &l.cfg)?;
        export_lp(&prepared.problem, path)?;
    }
    let res = synthesis::synthesize_with_disturbance(&l.data, &l.w_ini, l.d_future.as_ref(), &l.phi, &l.cfg)?;
    let closed = match (&verify_model, &res.plan) {
        (Some(model), Some(plan)) => Some(synthesis::verify_closed_loop(
            model,
            &res.w_ini,
            &plan.u_opt,
            l.d_future.as_ref(),
            &l.phi,
            DEFAULT_INIT_TOL,
        )?),
        _ => None,
    };
    let report =
        Report::new("synthesize", &l.spec, res.horizon, l.cfg.t_ini).with_synthesis(&res, &l.cfg.cost, &l.cfg.encoding);
    let plot = PlotData { band: spec_band(&l.phi), ..PlotData::default() };
    write_bundle(&a.out_dir, report, &res, closed.as_ref(), plot, a.svg)
}

/// Writes the result files and returns the exit code for the outcome.
fn write_bundle(
    dir: &Path,
    report: Report,
    res: &SynthesisResult,
    closed: Option<&ClosedLoop>,
    mut plot: PlotData,
    svg: bool,
) -> Result<i32> {
    let report = match closed {
        Some(cl) => report.with_closed_loop(cl, Some(res)),
        None => report,
    };
    write_trajectory_csv(dir.join("w_ini.csv"), &res.w_ini)?;
    if let Some(p) = &res.plan {
        write_signal_csv(dir.join("u_opt.csv"), "u", &p.u_opt)?;
        write_signal_csv(dir.join("y_pred.csv"), "y", &p.y_pred)?;
        plot.u = Some(p.u_opt.clone());
        plot.y_pred = Some(p.y_pred.clone());
    }
    if let Some(cl) = closed {
        write_signal_csv(dir.join("y_closed_loop.csv"), "y", &cl.y)?;
        plot.y_true = Some(cl.y.clone());
    }
    if res.plan.is_some() {
        plot.write_csv(&dir.join("plot.csv"))?;
        if svg {
            plot.write_svg(&dir.join("plot.svg"))?;
        }
    }
    report.write(&dir.join("report.json"))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    eprintln!(
        "status {:?}{}, objective {}, verdict {}, {} nodes in {:.2} s",
        res.status,
        if res.optimal || res.status != SynthesisStatus::Feasible { "" } else { " (not proven optimal)" },
        fmt_opt(report.objective),
        report.verdict.unwrap_or("-"),
        res.stats.nodes,
        res.stats.elapsed_secs
    );
    let satisfied = res.is_feasible() && closed.map_or(true, |cl| cl.verdict == Verdict::Satisfied);
    Ok(if satisfied { EXIT_OK } else { EXIT_UNSATISFIED })
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let (model, _) = model_for(&a.system)?;
    let w_ini = read_trajectory_csv(&a.init)?;
    let u = read_signal_csv(&a.inputs)?;
    let schedules = load_schedules(&a.schedules)?;
    let (spec, phi) = load_spec(&a.spec, model.n_y(), &schedules)?;
    let d = a.disturbance.as_ref().map(read_signal_csv).transpose()?;
    if !(a.init_tol >= 0.0) {
        return Err(Error::invalid("--init-tol must be nonnegative"));
    }
    let cl = synthesis::verify_closed_loop(&model, &w_ini, &u, d.as_ref(), &phi, a.init_tol)?;
    ensure_dir(&a.out_dir)?;
    write_signal_csv(a.out_dir.join("y_closed_loop.csv"), "y", &cl.y)?;
    let report = Report::new("verify", &spec, u.len() - 1, w_ini.len()).with_closed_loop(&cl, None);
    report.write(&a.out_dir.join("report.json"))?;
    eprintln!(
        "verdict {}{}",
        report.verdict.unwrap_or("-"),
        report.t_fail.map_or(String::new(), |t| format!(" at t = {t}"))
    );
    Ok(if cl.verdict == Verdict::Satisfied { EXIT_OK } else { EXIT_UNSATISFIED })
}

fn reproduce(a: &ReproduceArgs, config: &ConfigFile) -> Result<i32> {
    let name = match a.scenario {
        ScenarioArg::Scenario1 => ScenarioName::Scenario1,
        ScenarioArg::Scenario2 => ScenarioName::Scenario2,
        ScenarioArg::Hvac => ScenarioName::Hvac,
    };
    let cost = match a.cost {
        NormArg::UNorm => CostKind::InputNorm,
        NormArg::YNorm => CostKind::OutputNorm,
    };
    let mut sc = Scenario::build(name, a.seed, a.steps)?.with_cost(cost);
    sc.config.encoding = config.milp.clone();
    sc.config.solver = config.solver.clone();
    ensure_dir(&a.out_dir)?;
    write_trajectory_csv(a.out_dir.join("data.csv"), &sc.data)?;
    if let Some(path) = &a.export_lp {
        let prepared = synthesis::prepare(&sc.data, &sc.w_ini, sc.d_future.as_ref(), &sc.phi, &sc.config)?;
        export_lp(&prepared.problem, path)?;
    }
    let res = sc.synthesize()?;
    let closed = sc.verify(&res)?;
    let mut report = Report::new("reproduce", &sc.spec, res.horizon, sc.config.t_ini).with_synthesis(
        &res,
        &sc.config.cost,
        &sc.config.encoding,
    );
    report.scenario = Some(name.as_str().to_string());
    let hvac = name == ScenarioName::Hvac;
    let plot = PlotData {
        band: spec_band(&sc.phi),
        t_ref: if hvac { sc.reference(res.horizon + 1) } else { None },
        celsius: hvac,
        ..PlotData::default()
    };
    write_bundle(&a.out_dir, report, &res, closed.as_ref(), plot, a.svg)
}

#[cfg(test)]
mod tests;
