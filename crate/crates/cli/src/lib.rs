//! Command-line front end: `analyze`, `plot-data` and `simulate`.
//!
//! Every CSV this crate writes begins with `#` comment lines echoing the
//! command and its resolved configuration, followed by the header row.
//! Numbers are written in shortest round-trip form, so repeated runs with
//! the same flags produce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cfslope::data::{load_dataset_filtered, FilterSpec, LoadReport, VariableRoles};
use cfslope::eif::{self, Estimand, EstimationSpec, SlopeEstimate};
use cfslope::inference::{self, stars, StFormulation, TestName, TestResult};
use cfslope::nuisance::{Backend, BinaryOutcomeLink, CensorRule, ModelSpec};
use cfslope::simulation::{
    generate, oracle_truth, run_experiment, DgpConfig, DgpKind, ExperimentConfig, ExperimentReport,
    GeneratedSample, Misspecification, Target,
};
use cfslope::Dataset;

pub const DEFAULT_GRID: usize = 101;

#[derive(Debug, Parser)]
#[command(name = "cfslope", version, about = "Counterfactual slope analyses and simulation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate slopes and test statistics on a CSV file.
    Analyze(AnalyzeArgs),
    /// Write fitted regression lines of the slope estimands over a G grid.
    PlotData(PlotArgs),
    /// Run a Monte Carlo experiment on a synthetic DGP.
    Simulate(SimulateArgs),
    /// Write one synthetic sample, with its potential outcomes, to CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Analysis {
    Ge,
    St,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StFormulationArg {
    LogitMain,
    LinearAlt,
    ConditionalAlt,
}

impl From<StFormulationArg> for StFormulation {
    fn from(v: StFormulationArg) -> Self {
        match v {
            StFormulationArg::LogitMain => StFormulation::LogitMain,
            StFormulationArg::LinearAlt => StFormulation::LinearAlt,
            StFormulationArg::ConditionalAlt => StFormulation::ConditionalAlt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BackendArg {
    Parametric,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BinaryLinkArg {
    Logistic,
    LinearClamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MisspecArg {
    None,
    WrongPropensity,
    WrongOutcome,
    BothWrong,
}

impl From<MisspecArg> for Misspecification {
    fn from(v: MisspecArg) -> Self {
        match v {
            MisspecArg::None => Misspecification::None,
            MisspecArg::WrongPropensity => Misspecification::WrongPropensity,
            MisspecArg::WrongOutcome => Misspecification::WrongOutcome,
            MisspecArg::BothWrong => Misspecification::BothWrong,
        }
    }
}

/// Nuisance model options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "parametric")]
    pub backend: BackendArg,
    /// Cross-fit the nuisances over two folds (required with the neural backend).
    #[arg(long)]
    pub cross_fit: bool,
    /// Drop the squared G term from the parametric designs.
    #[arg(long)]
    pub no_g_squared: bool,
    #[arg(long, value_delimiter = ',', default_value = "0,2,5")]
    pub nn_hidden: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1")]
    pub nn_decay: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 5000)]
    pub nn_max_iter: usize,
    #[arg(long, value_enum, default_value = "logistic")]
    pub binary_link: BinaryLinkArg,
    /// Fixed censor bounds `lo,hi` for tau; default uses the in-range sample extremes.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub tau_bounds: Option<Vec<f64>>,
}

impl ModelArgs {
    pub fn estimation_spec(&self, seed: u64) -> Result<EstimationSpec> {
        if self.backend == BackendArg::Neural && !self.cross_fit {
            bail!("configuration error: the neural backend requires --cross-fit");
        }
        let model = ModelSpec {
            backend: match self.backend {
                BackendArg::Parametric => Backend::Parametric,
                BackendArg::Neural => Backend::Neural,
            },
            include_g_squared: !self.no_g_squared,
            nn_hidden_sizes: self.nn_hidden.clone(),
            nn_decay_grid: self.nn_decay.clone(),
            cv_folds: self.cv_folds,
            nn_max_iter: self.nn_max_iter,
            binary_outcome_link: match self.binary_link {
                BinaryLinkArg::Logistic => BinaryOutcomeLink::Logistic,
                BinaryLinkArg::LinearClamped => BinaryOutcomeLink::LinearClamped,
            },
            seed,
        };
        let censor = match &self.tau_bounds {
            Some(b) => CensorRule::fixed(Some(b[0]), Some(b[1])),
            None => CensorRule::sample_range(),
        };
        let spec = EstimationSpec {
            model,
            cross_fit: self.cross_fit,
            seed,
            censor,
            ..EstimationSpec::default()
        };
        spec.validate().context("checking the estimation settings")?;
        Ok(spec)
    }

    fn config_lines(&self) -> Vec<String> {
        vec![
            format!("backend={:?}", self.backend).to_lowercase(),
            format!("cross_fit={}", self.cross_fit),
            format!("include_g_squared={}", !self.no_g_squared),
            format!("nn_hidden={}", join(&self.nn_hidden)),
            format!("nn_decay={}", join(&self.nn_decay)),
            format!("cv_folds={}", self.cv_folds),
            format!("nn_max_iter={}", self.nn_max_iter),
            format!("binary_link={:?}", self.binary_link).to_lowercase(),
            format!(
                "tau_bounds={}",
                self.tau_bounds.as_ref().map_or("sample_range".to_string(), |b| join(b))
            ),
        ]
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub y: String,
    #[arg(long)]
    pub d: String,
    #[arg(long)]
    pub g: String,
    /// Prior transition column (required by the conditional ST formulation).
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long, value_enum)]
    pub analysis: Analysis,
    #[arg(long, value_enum)]
    pub st_formulation: Option<StFormulationArg>,
    #[arg(long)]
    pub trim_col: Option<String>,
    #[arg(long)]
    pub trim_min: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub analyze: AnalyzeArgs,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub dgp: String,
    /// Sample sizes; several values run a grid.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub misspec: MisspecArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Estimands or test statistics to track; defaults depend on the DGP.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also compute Monte Carlo oracle truths with this many draws.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub dgp: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => analyze(&a).map(|_| ()),
        Command::PlotData(p) => plot_data(&p),
        Command::Simulate(s) => simulate(&s).map(|_| ()),
        Command::Generate(g) => generate_csv(&g),
    }
}

/// Writes a plain CSV (no comment lines) with the observed columns followed
/// by `y0`, `y1` and `true_propensity`.
pub fn generate_csv(args: &GenerateArgs) -> Result<()> {
    let kind: DgpKind = args.dgp.parse()?;
    let sample = generate(&DgpConfig::new(kind, args.n, args.seed)).context("generating the sample")?;
    write_sample(&sample, &args.out)
}

pub fn write_sample(sample: &GeneratedSample, path: &Path) -> Result<()> {
    let data = &sample.dataset;
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend(data.covariate_names().iter().cloned());
    if data.p().is_some() {
        header.push("p".into());
    }
    header.extend(["y0".to_string(), "y1".to_string(), "true_propensity".to_string()]);
    let mut w = csv_writer(path, &[])?;
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![num(data.y()[i]), num(data.d()[i])];
        for j in 0..data.k() {
            row.push(num(data.covariate(j)[i]));
        }
        if let Some(p) = data.p() {
            row.push(num(p[i]));
        }
        row.extend([num(sample.y0[i]), num(sample.y1[i]), num(sample.true_propensity[i])]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "NA".into()
    }
}

/// A CSV writer that emits `#` comment lines before the header row.
fn csv_writer(path: &Path, comments: &[String]) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn write_log(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

impl AnalyzeArgs {
    fn formulation(&self) -> Result<Option<StFormulation>> {
        match (self.analysis, self.st_formulation) {
            (Analysis::Ge, Some(_)) => {
                bail!("configuration error: --st-formulation is only valid with --analysis st")
            }
            (Analysis::Ge, None) => Ok(None),
            (Analysis::St, f) => {
                let f: StFormulation = f.unwrap_or(StFormulationArg::LogitMain).into();
                if f == StFormulation::ConditionalAlt && self.p.is_none() {
                    bail!("configuration error: the conditional_alt ST formulation requires --p");
                }
                Ok(Some(f))
            }
        }
    }

    fn filter(&self) -> Result<FilterSpec> {
        match (&self.trim_col, self.trim_min) {
            (Some(c), Some(m)) => Ok(FilterSpec::trim(c.clone(), m)),
            (None, None) => Ok(FilterSpec::none()),
            _ => bail!("configuration error: --trim-col and --trim-min must be given together"),
        }
    }

    fn roles(&self) -> VariableRoles {
        let x: Vec<&str> = self.x.iter().map(String::as_str).collect();
        let roles = VariableRoles::new(&self.y, &self.d, &self.g, &x);
        match &self.p {
            Some(p) => roles.with_prior_transition(p.clone()),
            None => roles,
        }
    }

    pub fn config_lines(&self, command: &str) -> Vec<String> {
        let mut lines = vec![
            format!("command={command}"),
            format!("input={}", self.input.display()),
            format!("y={}", self.y),
            format!("d={}", self.d),
            format!("g={}", self.g),
            format!("p={}", self.p.as_deref().unwrap_or("")),
            format!("x={}", self.x.join(",")),
            format!("analysis={:?}", self.analysis).to_lowercase(),
            format!(
                "st_formulation={}",
                self.st_formulation
                    .map(|f| StFormulation::from(f).label())
                    .unwrap_or("")
            ),
            format!("trim_col={}", self.trim_col.as_deref().unwrap_or("")),
            format!("trim_min={}", self.trim_min.map(|v| v.to_string()).unwrap_or_default()),
            format!("seed={}", self.seed),
        ];
        lines.extend(self.model.config_lines());
        lines
    }
}

/// The slope estimands and statistics of one analysis.
pub fn analysis_plan(analysis: Analysis, formulation: Option<StFormulation>) -> (Vec<Estimand>, Vec<TestName>) {
    let tests: Vec<TestName> = match (analysis, formulation) {
        (Analysis::Ge, _) => vec![TestName::GeDescriptive, TestName::GeSelectionFree],
        (Analysis::St, f) => {
            let (a, b) = f.unwrap_or(StFormulation::LogitMain).tests();
            vec![a, b]
        }
    };
    let mut slopes = Vec::new();
    for t in &tests {
        let (a, b) = t.components();
        for e in [a, b] {
            if !slopes.contains(&e) {
                slopes.push(e);
            }
        }
    }
    (slopes, tests)
}

/// Results of an `analyze` run.
pub struct Analyzed {
    pub data: Dataset,
    pub report: LoadReport,
    pub slopes: Vec<SlopeEstimate>,
    pub tests: Vec<TestResult>,
    pub spec: EstimationSpec,
    pub log: Vec<String>,
}

fn run_analysis(args: &AnalyzeArgs, command: &str) -> Result<Analyzed> {
    let formulation = args.formulation()?;
    let spec = args.model.estimation_spec(args.seed)?;
    let (data, report) = load_dataset_filtered(&args.input, &args.roles(), &args.filter()?)
        .with_context(|| format!("loading {}", args.input.display()))?;
    if args.analysis == Analysis::St && !data.binary_outcome() {
        bail!("configuration error: ST analyses require a binary outcome");
    }
    let (plan, test_names) = analysis_plan(args.analysis, formulation);
    let mut slopes = Vec::new();
    for e in plan {
        let s = eif::estimate(&data, e, &spec).with_context(|| format!("estimating {e}"))?;
        slopes.push(s);
    }
    let find = |e: Estimand| slopes.iter().find(|s| s.estimand == e).expect("planned slope");
    let mut tests = Vec::new();
    for t in test_names {
        let (a, b) = t.components();
        tests.push(inference::contrast(t, find(a), find(b)).with_context(|| format!("forming {t}"))?);
    }

    let mut log = vec!["# config".to_string()];
    log.extend(args.config_lines(command));
    log.push(format!(
        "estimation_spec={}",
        serde_json::to_string(&spec).context("serializing the estimation spec")?
    ));
    log.push("# data".into());
    log.extend(report.summary_lines());
    log.push(format!("analysis rows: {}", data.n()));
    log.push("# nuisance diagnostics".into());
    for s in &slopes {
        for nu in &s.diagnostics.nuisances {
            let d = &nu.diagnostics;
            log.push(format!(
                "{} / {}: converged={} iterations={} max_abs_score={} clamped={} censored={}",
                s.estimand, nu.name, d.converged, d.iterations, num(d.max_abs_score), nu.n_clamped, nu.n_censored
            ));
            for (h, dec) in &nu.hyperparameters {
                log.push(format!("{} / {}: selected hidden={h} decay={dec}", s.estimand, nu.name));
            }
            for note in &d.notes {
                log.push(format!("{} / {}: {note}", s.estimand, nu.name));
            }
            if let Some(c) = &nu.coefficients {
                let coefs: Vec<String> = c.iter().map(|(n, v)| format!("{n}={}", num(*v))).collect();
                log.push(format!("{} / {}: coefficients {}", s.estimand, nu.name, coefs.join(" ")));
            }
        }
        for w in &s.diagnostics.warnings {
            log.push(format!("warning: {} / {w}", s.estimand));
        }
    }
    Ok(Analyzed {
        data,
        report,
        slopes,
        tests,
        spec,
        log,
    })
}

fn header_comments(config: &[String]) -> Vec<String> {
    let mut c = vec![format!("cfslope {}", env!("CARGO_PKG_VERSION"))];
    c.extend(config.iter().cloned());
    c
}

/// Runs `analyze`, writing `estimates.csv`, `tests.csv` and `run.log`.
pub fn analyze(args: &AnalyzeArgs) -> Result<Analyzed> {
    let result = run_analysis(args, "analyze")?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let comments = header_comments(&args.config_lines("analyze"));

    let mut w = csv_writer(&args.out.join("estimates.csv"), &comments)?;
    w.write_record(["estimand", "point", "se", "ci_low", "ci_high", "p", "n"])?;
    for s in &result.slopes {
        w.write_record([
            s.estimand.label(),
            num(s.point),
            num(s.se),
            num(s.ci_low),
            num(s.ci_high),
            num(s.p_value),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;

    let mut tc = comments.clone();
    tc.push("stars: * p<0.05, ** p<0.01, *** p<0.001 (two-sided)".into());
    let mut w = csv_writer(&args.out.join("tests.csv"), &tc)?;
    w.write_record(["test", "point", "se", "ci_low", "ci_high", "p", "p_upper", "stars", "n"])?;
    for t in &result.tests {
        w.write_record([
            t.name.label().to_string(),
            num(t.point),
            num(t.se),
            num(t.ci_low),
            num(t.ci_high),
            num(t.p_value),
            num(t.p_upper),
            stars(t.p_value).to_string(),
            t.n.to_string(),
        ])?;
    }
    w.flush()?;
    write_log(&args.out.join("run.log"), &result.log)?;
    Ok(result)
}

/// Plot series of an analysis: label and slope estimand.
pub fn plot_series(analysis: Analysis, formulation: Option<StFormulation>) -> Vec<(&'static str, Estimand)> {
    match analysis {
        Analysis::Ge => vec![
            ("Y|G,D=1", Estimand::LinearFactual(1)),
            ("Y|G,D=0", Estimand::LinearFactual(0)),
            ("Y1|G", Estimand::LinearCf(1)),
            ("Y0|G", Estimand::LinearCf(0)),
        ],
        Analysis::St => {
            let (desc, sf) = formulation.unwrap_or(StFormulation::LogitMain).tests();
            let (dg, fac) = desc.components();
            let (_, cf) = sf.components();
            vec![("D|G", dg), ("Y|G,D=1", fac), ("Y1|G", cf)]
        }
    }
}

/// Runs `plot-data`, writing `lines.csv` (plus the `analyze` outputs).
pub fn plot_data(args: &PlotArgs) -> Result<()> {
    if args.grid < 2 {
        bail!("configuration error: --grid must be at least 2");
    }
    let a = &args.analyze;
    let result = run_analysis(a, "plot-data")?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let formulation = a.formulation()?;
    let g = result.data.g();
    let (lo, hi) = g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let step = (hi - lo) / (args.grid - 1) as f64;
    let mut config = a.config_lines("plot-data");
    config.push(format!("grid={}", args.grid));
    let mut w = csv_writer(&a.out.join("lines.csv"), &header_comments(&config))?;
    w.write_record(["series", "g", "value", "se"])?;
    let p1 = if result.slopes.iter().any(|s| s.estimand.given_p1()) {
        Some(result.data.given_prior_transition().context("selecting prior-transition rows")?)
    } else {
        None
    };
    for (label, e) in plot_series(a.analysis, formulation) {
        let s = result
            .slopes
            .iter()
            .find(|s| s.estimand == e)
            .expect("series slope was estimated");
        let pop_g = if e.given_p1() {
            p1.as_ref().expect("prior-transition population").g()
        } else {
            g
        };
        for k in 0..args.grid {
            let gv = if k == args.grid - 1 { hi } else { lo + step * k as f64 };
            let (fit, se) = s.line_at(pop_g, gv);
            w.write_record([label.to_string(), num(gv), num(fit), num(se)])?;
        }
    }
    w.flush()?;
    let mut log = result.log.clone();
    log.push(format!("grid={} over [{}, {}]", args.grid, num(lo), num(hi)));
    write_log(&a.out.join("run.log"), &log)?;
    Ok(())
}

/// Targets tracked by default for each DGP kind.
pub fn default_targets(kind: DgpKind) -> Vec<Target> {
    use Estimand as E;
    match kind {
        DgpKind::AContinuous
        | DgpKind::NullGe
        | DgpKind::Randomized
        | DgpKind::ColliderSelection => vec![
            Target::Slope(E::LinearCf(1)),
            Target::Slope(E::LinearCf(0)),
            Target::Slope(E::LinearFactual(1)),
            Target::Slope(E::LinearFactual(0)),
            Target::Test(TestName::GeDescriptive),
            Target::Test(TestName::GeSelectionFree),
        ],
        DgpKind::BBinary | DgpKind::NullSt | DgpKind::LogitLinear => vec![
            Target::Slope(E::LogitCf(1)),
            Target::Slope(E::LogitFactual(1)),
            Target::Slope(E::LogitDg),
            Target::Test(TestName::StDescriptive),
            Target::Test(TestName::StSelectionFree),
            Target::Test(TestName::StLinearDescriptive),
            Target::Test(TestName::StLinearSelectionFree),
        ],
        DgpKind::CSequential => vec![
            Target::Slope(E::LogitCfGivenP1),
            Target::Slope(E::LogitDgGivenP1),
            Target::Test(TestName::StCondDescriptive),
            Target::Test(TestName::StCondSelectionFree),
            Target::Test(TestName::StLinearDescriptive),
            Target::Test(TestName::StLinearSelectionFree),
        ],
    }
}

impl SimulateArgs {
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let kind: DgpKind = self.dgp.parse()?;
        if self.n.is_empty() {
            bail!("configuration error: --n needs at least one sample size");
        }
        let targets = if self.targets.is_empty() {
            default_targets(kind)
        } else {
            self.targets
                .iter()
                .map(|t| t.parse::<Target>())
                .collect::<cfslope::Result<Vec<_>>>()?
        };
        let mut cfg = ExperimentConfig::new(DgpConfig::new(kind, self.n[0], self.seed), targets, self.reps);
        cfg.n_grid = self.n.clone();
        cfg.misspecification = self.misspec.into();
        cfg.estimation = self.model.estimation_spec(self.seed)?;
        cfg.jobs = self.jobs;
        cfg.alpha = self.alpha;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn config_lines(&self) -> Vec<String> {
        let mut lines = vec![
            "command=simulate".to_string(),
            format!("dgp={}", self.dgp),
            format!("n={}", join(&self.n)),
            format!("reps={}", self.reps),
            format!("misspec={}", Misspecification::from(self.misspec).label()),
            format!("master_seed={}", self.seed),
            format!("targets={}", self.targets.join(",")),
            format!("alpha={}", self.alpha),
            format!("mc_draws={}", self.mc_draws.map(|m| m.to_string()).unwrap_or_default()),
        ];
        lines.extend(self.model.config_lines());
        lines
    }
}

/// Runs `simulate`, writing `replications.csv`, `summary.csv` and `run.log`
/// (plus `oracle.csv` when `--mc-draws` is given). `--jobs` does not affect
/// any output.
pub fn simulate(args: &SimulateArgs) -> Result<ExperimentReport> {
    let cfg = args.experiment_config()?;
    let report = run_experiment(&cfg).context("running the experiment")?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut config = args.config_lines();
    config.push(format!(
        "dgp_params={}",
        serde_json::to_string(&cfg.dgp.params).context("serializing the DGP")?
    ));
    let comments = header_comments(&config);

    let mut w = csv_writer(&args.out.join("replications.csv"), &comments)?;
    w.write_record([
        "n", "rep", "seed", "estimand", "estimate", "se", "ci_low", "ci_high", "p", "truth", "covered",
        "rejected", "error",
    ])?;
    for r in &report.replications {
        w.write_record([
            r.n.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.target.clone(),
            num(r.estimate),
            num(r.se),
            num(r.ci_low),
            num(r.ci_high),
            num(r.p_value),
            num(r.truth),
            u8::from(r.covered).to_string(),
            u8::from(r.rejected).to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&args.out.join("summary.csv"), &comments)?;
    w.write_record([
        "n", "estimand", "truth", "mean_est", "bias", "emp_sd", "mean_se", "coverage", "rejection_rate",
        "reps", "failures",
    ])?;
    for s in &report.summary {
        w.write_record([
            s.n.to_string(),
            s.target.clone(),
            num(s.truth),
            num(s.mean_estimate),
            num(s.bias),
            num(s.empirical_sd),
            num(s.mean_se),
            num(s.coverage),
            num(s.rejection_rate),
            s.replications.to_string(),
            s.failures.to_string(),
        ])?;
    }
    w.flush()?;

    if let Some(m) = args.mc_draws {
        let mut w = csv_writer(&args.out.join("oracle.csv"), &comments)?;
        w.write_record(["estimand", "analytic", "mc_value", "mc_se", "mc_draws"])?;
        for t in &cfg.targets {
            if let Target::Slope(e) = t {
                let o = oracle_truth(&cfg.dgp, *e, m).with_context(|| format!("oracle for {e}"))?;
                w.write_record([e.label(), num(o.analytic), num(o.value), num(o.mc_se), m.to_string()])?;
            }
        }
        w.flush()?;
    }

    let mut log = vec!["# config".to_string()];
    log.extend(config);
    log.push(format!(
        "estimation_spec={}",
        serde_json::to_string(&cfg.estimation).context("serializing the estimation spec")?
    ));
    log.push("# truths".into());
    for (t, v) in &report.truths {
        log.push(format!("{t}={}", num(*v)));
    }
    log.push("# failures".into());
    for r in report.replications.iter().filter(|r| r.error.is_some()) {
        log.push(format!(
            "n={} rep={} seed={} {}: {}",
            r.n,
            r.replication,
            r.seed,
            r.target,
            r.error.as_deref().unwrap_or("")
        ));
    }
    write_log(&args.out.join("run.log"), &log)?;
    Ok(report)
}
