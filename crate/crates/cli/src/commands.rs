use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpb_core::continuous::{self, SimulationLimit};
use cpb_core::discrete;
use cpb_core::numeric::derive_seed;
use cpb_core::timescale::{self, TimeScale};
use cpb_core::verify::{self, Engine, Model, Observed, SweepConfig, Witness};
use cpb_core::{ChangePointLaw, ContinuousLaw, CpbError, RateUnits, Regime};
use rayon::prelude::*;

use crate::config::{HistorySpec, ModelConfig};
use crate::{fmt_num, CliError};

#[derive(Debug, Parser)]
#[command(name = "cpb", version, about = "Change-point birth processes: posteriors, simulation, checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior change-point probability and intensity for the configured history.
    Posterior(PosteriorArgs),
    /// Simulate paths of the configured model.
    Simulate(SimulateArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Apply a count-driven time change to the configured rates and history.
    Transform(TransformArgs),
    /// Compare discretised and continuous posteriors over a list of grid sizes.
    Converge(ConvergeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Continuous,
    Discrete,
    Oracle,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Continuous => Engine::Continuous,
            EngineArg::Discrete => Engine::Discrete,
            EngineArg::Oracle => Engine::DiscreteOracle,
        }
    }
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Grid size used to discretise a continuous model for the discrete engines.
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation window; defaults to the history horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub max_arrivals: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorem1,
    Counterexample,
    Identities,
    Convergence,
    Timescale,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub instances: Option<usize>,
    /// Speeds used by the timescale suite's distribution checks.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Write every witness as a JSON array.
    #[arg(long)]
    pub witness_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("clock").required(true).args(["gammas", "regularize"])))]
pub struct TransformArgs {
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Speeds that make the rate differences strictly increasing.
    #[arg(long)]
    pub regularize: bool,
    /// Transformed config; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of original and mapped history times.
    #[arg(long)]
    pub map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<u32>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Posterior(a) => posterior(&a, stdout),
        Command::Simulate(a) => simulate(&a, stdout),
        Command::Verify(a) => verify(&a, stdout, stderr),
        Command::Transform(a) => transform(&a, stdout, stderr),
        Command::Converge(a) => converge(&a, stdout),
    }
}

fn load(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ModelConfig::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn scenario(path: &Path) -> String {
    path.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned())
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| match path {
        Some(p) => CliError::Io(format!("{}: {e}", p.display())),
        None => CliError::Io(e.to_string()),
    }
}

fn csv_err(path: Option<&Path>) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| match path {
        Some(p) => CliError::Io(format!("{}: {e}", p.display())),
        None => CliError::Io(e.to_string()),
    }
}

/// CSV writer on `--out` when given, else on `stdout`.
fn csv_sink<'a>(out: Option<&Path>, stdout: &'a mut dyn Write) -> Result<csv::Writer<Box<dyn Write + 'a>>, CliError> {
    let w: Box<dyn Write + 'a> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(Some(p)))?)),
        None => Box::new(stdout),
    };
    Ok(csv::WriterBuilder::new().flexible(false).from_writer(w))
}

/// Model and history for `engine`, discretising a continuous model on the
/// `1/m` grid when a discrete engine is asked for.
fn engine_inputs(cfg: &ModelConfig, engine: Engine, m: Option<u32>) -> Result<(Model, Observed), CliError> {
    match (engine, cfg.is_discrete(), m) {
        (Engine::Continuous, false, _) => Ok((
            Model::Continuous(cfg.continuous_model()?),
            Observed::Continuous(cfg.continuous_history()?),
        )),
        (Engine::Continuous, true, _) => Err(CliError::Precondition(
            "the continuous engine needs a continuous change-point law".into(),
        )),
        (_, true, None) => Ok((
            Model::Discrete(cfg.discrete_model()?),
            Observed::Discrete(cfg.discrete_history()?),
        )),
        (_, true, Some(_)) => Err(CliError::Precondition("--m applies to continuous laws only".into())),
        (_, false, None) => Err(CliError::Precondition(format!(
            "engine {} needs --m to discretize a continuous model",
            engine.name()
        ))),
        (_, false, Some(m)) => {
            let dm = continuous::discretize(&cfg.continuous_model()?, m)?;
            let h = cfg.continuous_history()?;
            let dh = continuous::snap_history(&h, m).ok_or_else(|| {
                CliError::Precondition(format!("the history does not fit the 1/{m} grid: arrivals share a slot"))
            })?;
            Ok((Model::Discrete(dm), Observed::Discrete(dh)))
        }
    }
}

fn default_engine(cfg: &ModelConfig) -> Engine {
    if cfg.is_discrete() {
        Engine::Discrete
    } else {
        Engine::Continuous
    }
}

pub fn posterior(a: &PosteriorArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(&a.config)?;
    let engine = a.engine.map_or_else(|| default_engine(&cfg), Engine::from);
    let (model, h) = engine_inputs(&cfg, engine, a.m)?;
    let r = verify::evaluate(&model, &h, engine)?;
    let mut w = csv_sink(None, stdout)?;
    w.write_record(["scenario", "engine", "prob_before", "prob_after", "intensity"])
        .map_err(csv_err(None))?;
    w.write_record([
        scenario(&a.config),
        engine.name().into(),
        fmt_num(r.prob_before),
        fmt_num(r.prob_after),
        fmt_num(r.intensity),
    ])
    .map_err(csv_err(None))?;
    w.flush().map_err(io_err(None))
}

fn slot_count(x: f64, what: &str) -> Result<usize, CliError> {
    if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(CliError::Precondition(format!("{what} {x} is not a slot count")))
    }
}

pub fn simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(&a.config)?;
    let paths = a.paths.or(cfg.run.paths).unwrap_or(1);
    let seed = a.seed.or(cfg.run.seed).unwrap_or(0);
    let horizon = match (a.horizon, &cfg.history) {
        (Some(h), _) => h,
        (None, Some(HistorySpec { horizon, .. })) => *horizon,
        (None, None) => return Err(CliError::Parse("set [history] horizon or pass --horizon".into())),
    };
    let max_arrivals = a.max_arrivals.or(cfg.run.max_arrivals);

    // (change time, arrival times) per path
    let rows: Vec<(String, Vec<String>)> = if cfg.is_discrete() {
        let model = cfg.discrete_model()?;
        let n = slot_count(horizon, "horizon")?;
        (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let p = discrete::sample_discrete_path(&model, n, derive_seed(seed, i));
                let slots = p.arrival_slots.iter().take(max_arrivals.unwrap_or(usize::MAX));
                (p.change_slot.to_string(), slots.map(usize::to_string).collect())
            })
            .collect()
    } else {
        let model = cfg.continuous_model()?;
        let limit = SimulationLimit { horizon, max_arrivals };
        (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let p = continuous::sample_path(&model, limit, derive_seed(seed, i))?;
                Ok((fmt_num(p.change_time), p.arrival_times.iter().map(|&t| fmt_num(t)).collect()))
            })
            .collect::<Result<_, CpbError>>()?
    };

    let out = a.out.as_deref();
    let mut w = csv_sink(out, stdout)?;
    w.write_record(["path_id", "change_time", "arrival_index", "arrival_time"])
        .map_err(csv_err(out))?;
    for (id, (change, arrivals)) in rows.iter().enumerate() {
        let id = id.to_string();
        if arrivals.is_empty() {
            w.write_record([id.as_str(), change, "", ""]).map_err(csv_err(out))?;
        }
        for (k, t) in arrivals.iter().enumerate() {
            let k = (k + 1).to_string();
            w.write_record([id.as_str(), change, &k, t]).map_err(csv_err(out))?;
        }
    }
    w.flush().map_err(io_err(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub engine: String,
    pub quantity: String,
    pub value: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        }
    }
}

#[derive(Default)]
struct Report {
    rows: Vec<ReportRow>,
    witnesses: Vec<Witness>,
}

impl Report {
    fn push(&mut self, scenario: &str, engine: &str, quantity: &str, value: String, status: Status, detail: String) {
        self.rows.push(ReportRow {
            scenario: scenario.into(),
            engine: engine.into(),
            quantity: quantity.into(),
            value,
            status,
            detail,
        });
    }

    fn num(&mut self, scenario: &str, engine: &str, quantity: &str, value: f64, status: Status) {
        self.push(scenario, engine, quantity, fmt_num(value), status, String::new());
    }

    fn count(&mut self, scenario: &str, engine: &str, quantity: &str, value: usize, status: Status) {
        self.push(scenario, engine, quantity, value.to_string(), status, String::new());
    }

    fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.status == Status::Fail).count()
    }
}

pub fn verify(a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(&a.config)?;
    let seed = a.seed.or(cfg.run.seed).unwrap_or(0);
    let instances = a.instances.or(cfg.run.instances);
    let report = match a.suite {
        Suite::Theorem1 => suite_theorem1(&cfg, a, seed, instances)?,
        Suite::Counterexample => suite_counterexample(&cfg)?,
        Suite::Identities => suite_identities(&cfg, seed, instances)?,
        Suite::Convergence => suite_convergence(&cfg, seed, instances)?,
        Suite::Timescale => suite_timescale(&cfg, a, seed, instances)?,
    };

    let out = a.out.as_deref();
    {
        let mut w = csv_sink(out, stdout)?;
        w.write_record(["scenario", "engine", "quantity", "value", "status", "detail"])
            .map_err(csv_err(out))?;
        for r in &report.rows {
            w.write_record([&r.scenario, &r.engine, &r.quantity, &r.value, r.status.as_str(), &r.detail])
                .map_err(csv_err(out))?;
        }
        w.flush().map_err(io_err(out))?;
    }
    if let Some(p) = &a.witness_out {
        let file = File::create(p).map_err(io_err(Some(p)))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &report.witnesses)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    let failed = report.failed();
    if failed == 0 {
        return Ok(());
    }
    for w in report.witnesses.iter().take(10) {
        let json = serde_json::to_string(w).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(stderr, "witness: {json}").map_err(io_err(None))?;
    }
    Err(CliError::SuiteFailed(format!("{failed} failing row(s)")))
}

fn fixed_model(cfg: &ModelConfig, engine: Engine, m: Option<u32>) -> Result<Option<Model>, CliError> {
    if cfg.rates.is_none() || cfg.changepoint.is_none() {
        return Ok(None);
    }
    let model = match (engine, cfg.is_discrete(), m) {
        (Engine::Continuous, _, _) => Model::Continuous(cfg.continuous_model()?),
        (_, true, _) => Model::Discrete(cfg.discrete_model()?),
        (_, false, Some(m)) => Model::Discrete(continuous::discretize(&cfg.continuous_model()?, m)?),
        (_, false, None) => {
            return Err(CliError::Precondition(format!(
                "engine {} needs --m to discretize a continuous model",
                engine.name()
            )))
        }
    };
    Ok(Some(model))
}

fn suite_theorem1(cfg: &ModelConfig, a: &VerifyArgs, seed: u64, instances: Option<usize>) -> Result<Report, CliError> {
    let engine = a.engine.map_or_else(|| default_engine(cfg), Engine::from);
    let mut sc = SweepConfig::new(engine, instances.unwrap_or(1000), seed);
    if let Some(t) = cfg.run.tolerance {
        sc.tolerance = t;
    }
    if let Some(k) = cfg.run.max_arrivals {
        sc.max_arrivals = k;
    }
    sc.model = fixed_model(cfg, engine, a.m)?;
    let r = verify::theorem1_sweep(&sc)?;

    let (s, e) = ("theorem1", engine.name());
    let mut rep = Report::default();
    rep.count(s, e, "pairs", r.pairs, Status::Info);
    rep.count(s, e, "equal_pairs", r.equal_pairs, Status::Info);
    rep.count(s, e, "violations", r.violations.len(), Status::of(r.passed()));
    rep.num(s, e, "min_margin", r.min_margin, Status::Info);
    rep.num(s, e, "max_margin", r.max_margin, Status::Info);
    rep.num(s, e, "min_intensity_margin", r.min_intensity_margin, Status::Info);
    for (i, w) in r.violations.iter().enumerate() {
        let quantity = match w.quantity {
            verify::Quantity::PosteriorSurvival => "posterior_gap",
            verify::Quantity::Intensity => "intensity_gap",
        };
        rep.push(&format!("theorem1/violation-{i}"), e, quantity, fmt_num(w.gap()), Status::Info, w.note.clone());
    }
    rep.witnesses = r.violations;
    Ok(rep)
}

fn suite_counterexample(cfg: &ModelConfig) -> Result<Report, CliError> {
    let big_m = cfg.run.big_m.unwrap_or(100.0);
    let law = match &cfg.changepoint {
        Some(ChangePointLaw::Continuous(l)) => l.clone(),
        Some(ChangePointLaw::Discrete(_)) => {
            return Err(CliError::Precondition("the added-arrival search needs a continuous law".into()))
        }
        None => ContinuousLaw::exponential(1.0)?,
    };
    let (s, e) = ("counterexample", "continuous");
    let mut rep = Report::default();
    match verify::counterexample_added_arrival_with(law.clone(), big_m) {
        Ok(r) => {
            rep.push(
                s,
                e,
                "intensity_drop",
                fmt_num(r.margin),
                Status::Pass,
                format!(
                    "t = {}; t1 = {}; same arrival count: {}",
                    fmt_num(r.t),
                    fmt_num(r.t1),
                    r.theorem_applies
                ),
            );
            rep.witnesses.push(r.witness);
        }
        Err(CpbError::SearchFailure(msg)) => {
            let model = verify::added_arrival_model(law, big_m)?;
            let best = verify::added_arrival_search(&model)?;
            rep.push(s, e, "intensity_drop", fmt_num(best.margin), Status::Fail, msg);
            rep.push(
                s,
                e,
                "posterior_reversal",
                fmt_num(best.posterior_gap),
                Status::Info,
                "largest rise of P(U>t) caused by the arrival".into(),
            );
        }
        Err(other) => return Err(other.into()),
    }
    Ok(rep)
}

fn suite_identities(cfg: &ModelConfig, seed: u64, instances: Option<usize>) -> Result<Report, CliError> {
    let shifts = instances.unwrap_or(1000);
    let ids = verify::identity_sweep(shifts, seed, 12)?;
    let r5 = verify::remark5_sweep(shifts.saturating_mul(100), derive_seed(seed, 1))?;
    let (s, e) = ("identities", "discrete");
    let mut rep = Report::default();
    rep.count(s, e, "shifts", ids.shifts, Status::Info);
    rep.num(s, e, "max_rel_error", ids.max_rel_error, Status::of(ids.max_rel_error <= 1e-12));
    rep.count(s, e, "identity_failures", ids.failures.len(), Status::of(ids.failures.is_empty()));
    rep.count(
        s,
        e,
        "ratio_condition_failures",
        ids.ratio_condition_failures,
        Status::of(ids.ratio_condition_failures == 0),
    );
    rep.count(s, e, "posterior_increases", ids.posterior_increases, Status::of(ids.posterior_increases == 0));
    rep.count("identities/constants", e, "draws", r5.draws, Status::Info);
    rep.count("identities/constants", e, "failures", r5.failures, Status::of(r5.failures == 0));

    // measured ratios for the configured model along its own history
    if cfg.is_discrete() && cfg.rates.is_some() && cfg.history.is_some() {
        let model = cfg.discrete_model()?;
        let h = cfg.discrete_history()?;
        for l in 1..=h.count() {
            if !h.can_shift(l)? {
                continue;
            }
            let r = discrete::verify_shift_identities(&model, &h, l)?;
            let sc = format!("identities/shift-{l}");
            let st = Status::of(r.holds);
            let pairs = [
                ("alpha", r.alpha, r.expected.alpha),
                ("gamma_b", Some(r.gamma_b), r.expected.gamma),
                ("gamma_c", Some(r.gamma_c), r.expected.gamma),
                ("delta", Some(r.delta), r.expected.delta),
            ];
            for (q, measured, expected) in pairs {
                if let Some(v) = measured {
                    rep.push(&sc, e, q, fmt_num(v), st, format!("expected {}", fmt_num(expected)));
                }
            }
        }
    }
    Ok(rep)
}

fn suite_convergence(cfg: &ModelConfig, seed: u64, instances: Option<usize>) -> Result<Report, CliError> {
    let m_list = cfg.run.m_list.clone().unwrap_or_else(|| vec![64, 128, 256, 512]);
    let e = "discrete";
    let mut rep = Report::default();
    if cfg.rates.is_some() && cfg.changepoint.is_some() && cfg.history.is_some() {
        let rows = continuous::convergence_study(&cfg.continuous_model()?, &cfg.continuous_history()?, &m_list)?;
        let errs: Vec<f64> = rows.iter().filter_map(|r| r.error).collect();
        for r in &rows {
            let sc = format!("convergence/m-{}", r.m);
            match r.error {
                Some(err) => rep.num(&sc, e, "error", err, Status::Info),
                None => rep.push(&sc, e, "error", String::new(), Status::Info, r.note.clone().unwrap_or_default()),
            }
        }
        let shrinks = errs.len() >= 2 && errs[errs.len() - 1] < errs[0];
        let detail = if errs.len() < 2 {
            "fewer than two admissible grid sizes".to_string()
        } else {
            String::new()
        };
        let last = errs.last().copied().unwrap_or(f64::NAN);
        rep.push("convergence", e, "final_error", fmt_num(last), Status::of(shrinks), detail);
        return Ok(rep);
    }
    let runs = verify::convergence_sweep(instances.unwrap_or(10), seed, &m_list)?;
    for (i, run) in runs.iter().enumerate() {
        let sc = format!("convergence/instance-{i}");
        for r in &run.rows {
            if let Some(err) = r.error {
                rep.num(&sc, e, &format!("error_m{}", r.m), err, Status::Info);
            }
        }
        for (j, &ratio) in run.ratios.iter().enumerate() {
            let ok = (1.5..=2.5).contains(&ratio);
            rep.num(&sc, e, &format!("ratio_{j}"), ratio, Status::of(ok));
        }
    }
    Ok(rep)
}

fn suite_timescale(cfg: &ModelConfig, a: &VerifyArgs, seed: u64, instances: Option<usize>) -> Result<Report, CliError> {
    let n = instances.unwrap_or(1000);
    let e = "continuous";
    let mut rep = Report::default();
    let sc = verify::interarrival_scaling_check(n, seed)?;
    rep.num("timescale/interarrivals", e, "max_error", sc.max_error, Status::of(sc.max_error <= 1e-12));
    let inv = verify::constant_scale_invariance_check(n, derive_seed(seed, 1))?;
    rep.num("timescale/constant-clock", e, "max_diff", inv.max_diff, Status::of(inv.max_diff <= 1e-9));
    let reg = verify::regularized_catania_check(n, derive_seed(seed, 2))?;
    rep.count(
        "timescale/regularizer",
        e,
        "catania_failures",
        reg.catania_failures,
        Status::of(reg.catania_failures == 0),
    );

    if let Some(rates) = cfg.rates.as_ref().filter(|r| r.units() == RateUnits::PerTime) {
        let scale = TimeScale::new(a.gammas.clone().unwrap_or_else(|| vec![0.5, 2.0]))?;
        let paths = n.max(200);
        let mut outcomes = Vec::new();
        for (regime, name, tag) in [(Regime::Before, "before", 3), (Regime::After, "after", 4)] {
            let alpha = 0.01;
            let ks = verify::degenerate_ks_check(rates, &scale, regime, paths, derive_seed(seed, tag), alpha)?;
            outcomes.extend(ks.into_iter().enumerate().map(|(k, ks)| (name, k + 1, ks)));
        }
        // Bonferroni over all arrival indices of both regimes
        let crit_scale = outcomes.len() as f64;
        for (name, k, ks) in &outcomes {
            let crit = verify::ks_critical_value(ks.n, 0.01 / crit_scale);
            rep.push(
                &format!("timescale/ks-{name}-{k}"),
                e,
                "ks_statistic",
                fmt_num(ks.statistic),
                Status::of(ks.statistic <= crit),
                format!("critical {}", fmt_num(crit)),
            );
        }
    }
    Ok(rep)
}

fn read_rates(cfg: &ModelConfig) -> Result<&cpb_core::RateSchedule, CliError> {
    let rates = cfg.rates()?;
    if rates.units() != RateUnits::PerTime {
        return Err(CliError::Precondition("time changes apply to per-time rates".into()));
    }
    Ok(rates)
}

pub fn transform(a: &TransformArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(&a.config)?;
    let rates = read_rates(&cfg)?;
    let scale = match &a.gammas {
        Some(g) => TimeScale::new(g.clone())?,
        None => {
            let c = timescale::default_regularizer(rates);
            let (scale, rep) = timescale::regularized_conditions(rates, &c)?;
            writeln!(stderr, "regularized: catania = {}", rep.catania).map_err(io_err(None))?;
            scale
        }
    };
    let gammas: Vec<String> = scale.gammas().iter().map(|&g| fmt_num(g)).collect();
    writeln!(stderr, "gammas = {}", gammas.join(", ")).map_err(io_err(None))?;

    let mut out_cfg = cfg.clone();
    out_cfg.rates = Some(timescale::transform_rates(&scale, rates)?);
    let mut note = None;
    out_cfg.changepoint = match (&cfg.changepoint, scale.constant_value()) {
        (Some(ChangePointLaw::Continuous(law)), Some(g0)) => Some(ChangePointLaw::Continuous(law.time_scaled(g0))),
        (None, _) => None,
        (Some(_), _) => {
            note = Some("# the change-point law does not carry over: the clock depends on the path\n");
            None
        }
    };
    let mapped = match &cfg.history {
        Some(spec) => {
            let h = cfg.continuous_history()?;
            let th = timescale::transform_history(&scale, &h)?;
            out_cfg.history = Some(HistorySpec {
                arrivals: th.arrivals().to_vec(),
                horizon: th.horizon(),
                line: spec.line,
            });
            Some((h, th))
        }
        None => None,
    };

    let mut text = out_cfg.render();
    if let Some(n) = note {
        text.insert_str(0, n);
    }
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(io_err(Some(p)))?,
        None => stdout.write_all(text.as_bytes()).map_err(io_err(None))?,
    }

    if let (Some(p), Some((h, th))) = (&a.map, &mapped) {
        let mut w = csv_sink(Some(p), stdout)?;
        let err = csv_err(Some(p));
        w.write_record(["event", "original", "mapped"]).map_err(&err)?;
        for (i, (x, y)) in h.arrivals().iter().zip(th.arrivals()).enumerate() {
            w.write_record([(i + 1).to_string(), fmt_num(*x), fmt_num(*y)]).map_err(&err)?;
        }
        w.write_record(["horizon".into(), fmt_num(h.horizon()), fmt_num(th.horizon())])
            .map_err(&err)?;
        w.flush().map_err(io_err(Some(p)))?;
    }
    Ok(())
}

pub fn converge(a: &ConvergeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(&a.config)?;
    let m_list = a
        .m_list
        .clone()
        .or_else(|| cfg.run.m_list.clone())
        .unwrap_or_else(|| vec![64, 128, 256, 512]);
    if m_list.contains(&0) {
        return Err(CliError::Precondition("grid sizes must be positive".into()));
    }
    let rows = continuous::convergence_study(&cfg.continuous_model()?, &cfg.continuous_history()?, &m_list)?;
    let out = a.out.as_deref();
    let mut w = csv_sink(out, stdout)?;
    w.write_record(["m", "discrete_posterior", "continuous_posterior", "error", "status"])
        .map_err(csv_err(out))?;
    for r in rows {
        let status = match &r.note {
            None => "ok".to_string(),
            Some(n) => format!("inadmissible: {n}"),
        };
        w.write_record([
            r.m.to_string(),
            r.discrete.map(fmt_num).unwrap_or_default(),
            fmt_num(r.continuous),
            r.error.map(fmt_num).unwrap_or_default(),
            status,
        ])
        .map_err(csv_err(out))?;
    }
    w.flush().map_err(io_err(out))
}
