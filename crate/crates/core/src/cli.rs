//! Command-line front end: sweeps, Monte Carlo runs and table emission.
//!
//! Angles are degrees on the command line and in every output column; all
//! library calls take radians. Outputs are CSV or JSON, each carrying a
//! metadata block (schema version, parameters, seed, conventions).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::contextuality::{
    decompose_consolidated, p_d_alternative, pusey_from_counts, PhiConvention, PuseyRecord,
};
use crate::counting::{
    derive_seed, simulate_counts, weak_value_from_counts, AcquisitionConfig, CountRecord,
    DEFAULT_DURATION, DEFAULT_KAPPA_UNCERTAINTY, DEFAULT_RATE,
};
use crate::error::Error;
use crate::estimation::{
    build_calibration, cramer_rao_variance_model, estimate_theta, parse_baseline,
    propagate_variance, table1_pipeline, BaselineRow, CalibrationCurve, ModelParams,
    DEFAULT_BASELINE, TABLE_THETAS_MINUS, TABLE_THETAS_PLUS,
};
use crate::imperfections::{
    GateModel, ImperfectionParams, SignalResponse, TRANSMISSION_CONVENTION, VISIBILITY_MODEL,
};
use crate::qstate::{PureQubit, Sign, Strength};
use crate::weak::{
    fisher_ps_closed_form, fisher_ps_definition, is_anomalous, postselection_probability,
    quantum_fisher_information, weak_value_curve, weak_value_slope,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Default output directory when `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "POSTSELECT_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Inner {
        context: String,
        #[source]
        source: Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn inner(context: impl Into<String>) -> impl FnOnce(Error) -> CliError {
    let context = context.into();
    move |source| CliError::Inner { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "postselect", version, about = "Postselected qubit measurements: weak values, Fisher information, non-contextuality, estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// σ_w(θ) for one or both postselections.
    SweepWeakValue(SweepArgs),
    /// I_0 and I_1 over θ.
    SweepPusey(SweepArgs),
    /// Postselected Fisher information, quantum Fisher information and budget over θ.
    SweepFisher(SweepArgs),
    /// Poissonian coincidence counts over θ.
    SimulateCounts(SweepArgs),
    /// Invert measured postselected values (or counts) to θ.
    Estimate(EstimateArgs),
    /// Simulated θ-estimation table with Cramér-Rao comparison.
    Table1(TableArgs),
    /// Decompose the consolidated postselection operator S.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Postselect {
    Plus,
    Minus,
    Both,
}

impl Postselect {
    fn signs(self) -> Vec<Sign> {
        match self {
            Postselect::Plus => vec![Sign::Plus],
            Postselect::Minus => vec![Sign::Minus],
            Postselect::Both => Sign::BOTH.to_vec(),
        }
    }
}

impl FromStr for Postselect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhiSource {
    Prepared,
    CountModel,
}

impl FromStr for PhiSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl From<PhiSource> for PhiConvention {
    fn from(p: PhiSource) -> Self {
        match p {
            PhiSource::Prepared => PhiConvention::Prepared,
            PhiSource::CountModel => PhiConvention::CountModel,
        }
    }
}

/// Flags shared by every subcommand. Each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Key-value config file (`key = value`); command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measurement strength κ.
    #[arg(long, conflicts_with = "mu")]
    pub kappa: Option<f64>,
    /// Meter angle μ in degrees (κ = sin 4μ), 0 ≤ μ ≤ 22.5.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_enum)]
    pub postselect: Option<Postselect>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; defaults to $POSTSELECT_OUTPUT_DIR/<command>.<ext> or stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Two-photon interference visibility; enables the imperfect gate model.
    #[arg(long)]
    pub visibility: Option<f64>,
    /// PPBS intensity transmission for H.
    #[arg(long = "t-h")]
    pub t_h: Option<f64>,
    /// PPBS intensity transmission for V.
    #[arg(long = "t-v")]
    pub t_v: Option<f64>,
    /// Mean total coincidences per second.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Acquisition window per point, seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Root RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// One-sigma uncertainty on κ.
    #[arg(long)]
    pub kappa_uncertainty: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub theta_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta_end: Option<f64>,
    #[arg(long)]
    pub theta_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Evaluate from simulated counts and add error columns.
    #[arg(long)]
    pub simulate: bool,
    /// How p_φ is obtained for the non-contextuality functional.
    #[arg(long, value_enum)]
    pub p_phi: Option<PhiSource>,
    /// Fold the κ uncertainty into simulated error columns of sweep-pusey.
    #[arg(long)]
    pub include_kappa_error: bool,
    /// Acquisitions per grid point (simulate-counts).
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSON output of simulate-counts or sweep-weak-value.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// A single measured postselected value.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "input")]
    pub sigma_measured: Option<f64>,
    /// Variance of --sigma-measured.
    #[arg(long, requires = "sigma_measured")]
    pub sigma_variance: Option<f64>,
    /// Monotone branch start, degrees.
    #[arg(long, allow_negative_numbers = true, requires = "branch_end")]
    pub branch_start: Option<f64>,
    /// Monotone branch end, degrees.
    #[arg(long, allow_negative_numbers = true, requires = "branch_start")]
    pub branch_end: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated θ values in degrees (default: reference rows).
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    /// Repetitions per row.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Baseline CSV (postselect,theta_deg,variance_theta_deg2,sigma_cr_deg2).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Postselection state |+⟩ or |−⟩.
    #[arg(long, value_enum, conflicts_with = "phi_angle")]
    pub phi: Option<Postselect>,
    /// Real postselection state cos α|0⟩ + sin α|1⟩, α in degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub phi_angle: Option<f64>,
}

/// `key = value` lines; `#` starts a comment; `-` and `_` are equivalent in keys.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("config {key} = {v:?}: {e}"))))
            .transpose()
    }
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// Fully resolved shared settings.
#[derive(Debug, Clone)]
struct Settings {
    strength: Option<Strength>,
    postselect: Option<Postselect>,
    format: Option<Format>,
    output: Option<PathBuf>,
    gate: GateModel,
    acquisition: AcquisitionConfig,
    metadata: Map<String, Value>,
}

impl Settings {
    fn resolve(c: &CommonArgs) -> Result<(Self, ConfigFile), CliError> {
        let cfg = match &c.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let kappa: Option<f64> = pick(c.kappa, &cfg, "kappa")?;
        let mu: Option<f64> = pick(c.mu, &cfg, "mu")?;
        // a flag overrides the config file even across kappa/mu
        let (kappa, mu) = match (c.kappa, c.mu) {
            (Some(_), None) => (kappa, None),
            (None, Some(_)) => (None, mu),
            _ => (kappa, mu),
        };
        let mut metadata = Map::new();
        let strength = match (kappa, mu) {
            (Some(_), Some(_)) => return Err(CliError::Config("give exactly one of kappa or mu".into())),
            (Some(k), None) => {
                metadata.insert("kappa".into(), json!(k));
                Some(Strength::new(k).map_err(|e| CliError::Config(e.to_string()))?)
            }
            (None, Some(m)) => {
                if !(0.0..=22.5).contains(&m) {
                    return Err(CliError::Config(format!("mu = {m} deg outside [0, 22.5]")));
                }
                let s = Strength::from_meter_angle(m.to_radians()).map_err(|e| CliError::Config(e.to_string()))?;
                metadata.insert("mu_deg".into(), json!(m));
                metadata.insert("kappa".into(), json!(round12(s.kappa())));
                Some(s)
            }
            (None, None) => None,
        };

        let visibility: Option<f64> = pick(c.visibility, &cfg, "visibility")?;
        let t_h: Option<f64> = pick(c.t_h, &cfg, "t_h")?;
        let t_v: Option<f64> = pick(c.t_v, &cfg, "t_v")?;
        let gate = if visibility.is_some() || t_h.is_some() || t_v.is_some() {
            let ideal = ImperfectionParams::ideal();
            let p = ImperfectionParams::new(
                visibility.unwrap_or(ideal.visibility),
                t_h.unwrap_or(ideal.t_h),
                t_v.unwrap_or(ideal.t_v),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            GateModel::Imperfect(p)
        } else {
            GateModel::Ideal
        };
        metadata.insert("gate".into(), serde_json::to_value(gate).expect("gate serializes"));

        let acquisition = AcquisitionConfig {
            rate: pick(c.rate, &cfg, "rate")?.unwrap_or(DEFAULT_RATE),
            duration: pick(c.duration, &cfg, "duration")?.unwrap_or(DEFAULT_DURATION),
            seed: pick(c.seed, &cfg, "seed")?.unwrap_or(0),
            kappa_uncertainty: pick(c.kappa_uncertainty, &cfg, "kappa_uncertainty")?
                .unwrap_or(DEFAULT_KAPPA_UNCERTAINTY),
        };
        acquisition.validate().map_err(|e| CliError::Config(e.to_string()))?;

        Ok((
            Self {
                strength,
                postselect: pick(c.postselect, &cfg, "postselect")?,
                format: pick(c.format, &cfg, "format")?,
                output: pick(c.output.clone(), &cfg, "output")?,
                gate,
                acquisition,
                metadata,
            },
            cfg,
        ))
    }

    fn strength(&self) -> Result<Strength, CliError> {
        self.strength
            .ok_or_else(|| CliError::Config("one of --kappa or --mu is required".into()))
    }

    fn add_acquisition_metadata(&mut self) {
        self.metadata.insert(
            "acquisition".into(),
            serde_json::to_value(self.acquisition).expect("acquisition serializes"),
        );
        self.metadata.insert("seed".into(), json!(self.acquisition.seed));
    }
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    start: f64,
    end: f64,
    step: f64,
}

impl Grid {
    fn resolve(g: &GridArgs, cfg: &ConfigFile) -> Result<Self, CliError> {
        let grid = Grid {
            start: pick(g.theta_start, cfg, "theta_start")?.unwrap_or(0.0),
            end: pick(g.theta_end, cfg, "theta_end")?.unwrap_or(90.0),
            step: pick(g.theta_step, cfg, "theta_step")?.unwrap_or(0.5),
        };
        if !(grid.step > 0.0) {
            return Err(CliError::Config(format!("theta_step = {} must be positive", grid.step)));
        }
        if !(grid.start < grid.end) {
            return Err(CliError::Config(format!(
                "theta_start = {} must be below theta_end = {}",
                grid.start, grid.end
            )));
        }
        Ok(grid)
    }

    /// Points in degrees, end included when it falls on the grid.
    fn points(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn metadata(&self) -> Value {
        json!({ "theta_start_deg": self.start, "theta_end_deg": self.end, "theta_step_deg": self.step })
    }
}

/// One output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

/// Round to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(v) => format!("{}", round12(*v)),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if !v.is_finite() => Value::Null,
            Cell::Num(v) => json!(round12(*v)),
            Cell::Int(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Null => Value::Null,
        }
    }
}

/// A rectangular result set plus its metadata.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Map<String, Value>,
}

impl Table {
    fn new(columns: Vec<String>, metadata: Map<String, Value>) -> Self {
        Self { columns, rows: Vec::new(), metadata }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let shown = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(out, "# {k}: {shown}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.clone(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let doc = json!({
            "metadata": Value::Object(self.metadata.clone()),
            "columns": self.columns,
            "records": records,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Table, warnings, and the format and destination a command resolved.
type Built = (Table, Vec<String>, Option<Format>, Option<PathBuf>);

/// What a run produced.
#[derive(Debug)]
pub struct RunReport {
    pub table: Table,
    pub format: Format,
    /// `None` when written to stdout.
    pub path: Option<PathBuf>,
    /// Grid points where a quantity is undefined (reported as empty cells).
    pub warnings: Vec<String>,
}

fn base_metadata(command: &str, settings: &Settings) -> Map<String, Value> {
    let mut m = settings.metadata.clone();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("generator".into(), json!(concat!("postselect ", env!("CARGO_PKG_VERSION"))));
    m.insert("visibility_model".into(), json!(VISIBILITY_MODEL));
    m.insert("transmission_convention".into(), json!(TRANSMISSION_CONVENTION));
    m.insert("timestamp".into(), json!(timestamp()));
    m
}

/// UTC run time, or `SOURCE_DATE_EPOCH` when set so reruns are byte-identical.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Domain singularities become empty cells; anything else aborts the run.
fn undefined_point(e: &Error) -> bool {
    matches!(
        e,
        Error::ZeroPostselection(_)
            | Error::OrthogonalPostselection(_)
            | Error::DegenerateConditional { .. }
            | Error::SaturatedWeakValue(_)
            | Error::FlatCurve(_)
            | Error::EmptyChannel
            | Error::OutOfRange { .. }
    )
}

struct Collector {
    warnings: Vec<String>,
}

impl Collector {
    fn take<T>(&mut self, r: crate::Result<T>, theta_deg: f64, what: &str) -> Result<Option<T>, CliError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if undefined_point(&e) => {
                self.warnings.push(format!("theta_deg={} {what}: {e}", round12(theta_deg)));
                Ok(None)
            }
            Err(e) => Err(CliError::Inner {
                context: format!("theta_deg={} {what}", round12(theta_deg)),
                source: e,
            }),
        }
    }
}

fn signs_label(signs: &[Sign]) -> Value {
    json!(signs.iter().map(|s| s.label()).collect::<Vec<_>>())
}

fn point_acquisition(acq: &AcquisitionConfig, index: usize) -> AcquisitionConfig {
    acq.with_seed(derive_seed(acq.seed, index as u64))
}

fn sweep_weak_value(a: &SweepArgs) -> Result<Built, CliError> {
    let (mut st, cfg) = Settings::resolve(&a.common)?;
    let grid = Grid::resolve(&a.grid, &cfg)?;
    let s = st.strength()?;
    if s.kappa() == 0.0 {
        return Err(CliError::Config("weak values need kappa > 0".into()));
    }
    let signs = st.postselect.unwrap_or(Postselect::Both).signs();
    let simulate = a.simulate || cfg.get::<bool>("simulate")?.unwrap_or(false);
    if simulate {
        st.add_acquisition_metadata();
    }
    let mut meta = base_metadata("sweep-weak-value", &st);
    meta.insert("grid".into(), grid.metadata());
    meta.insert("postselect".into(), signs_label(&signs));
    meta.insert("source".into(), json!(if simulate { "simulated-counts" } else { "model" }));

    let mut cols = vec!["theta_deg".to_string()];
    for sg in &signs {
        cols.push(format!("sigma_w_{}", sg.label()));
        if simulate {
            cols.push(format!("sigma_w_{}_err", sg.label()));
        }
    }
    for sg in &signs {
        cols.push(format!("anomalous_{}", sg.label()));
    }
    let response = SignalResponse::new(s, &st.gate).map_err(inner("model"))?;
    let mut table = Table::new(cols, meta);
    let mut col = Collector { warnings: Vec::new() };
    for (i, th) in grid.points().into_iter().enumerate() {
        let t = th.to_radians();
        let mut row = vec![Cell::Num(th)];
        let mut flags = Vec::new();
        let counts = if simulate {
            let probs = response.record(t).map_err(inner(format!("theta_deg={th}")))?;
            Some(simulate_counts(&probs, &point_acquisition(&st.acquisition, i)).map_err(inner(format!("theta_deg={th}")))?)
        } else {
            None
        };
        for &sg in &signs {
            let value = match &counts {
                Some(rec) => {
                    let w = col.take(weak_value_from_counts(rec, s.kappa(), sg), th, sg.label())?;
                    row.push(w.map(|w| w.sigma_w).into());
                    row.push(w.map(|w| w.variance.sqrt()).into());
                    w.map(|w| w.sigma_w)
                }
                None => {
                    let r = match st.gate {
                        GateModel::Ideal => weak_value_curve(t, s, sg),
                        GateModel::Imperfect(_) => response.weak_value(t, sg),
                    };
                    let w = col.take(r, th, sg.label())?;
                    row.push(w.into());
                    w
                }
            };
            flags.push(value.map(is_anomalous));
        }
        row.extend(flags.into_iter().map(Cell::from));
        table.push(row);
    }
    Ok((table, col.warnings, st.format, st.output))
}

fn sweep_pusey(a: &SweepArgs) -> Result<Built, CliError> {
    let (mut st, cfg) = Settings::resolve(&a.common)?;
    let grid = Grid::resolve(&a.grid, &cfg)?;
    let s = st.strength()?;
    let signs = st.postselect.unwrap_or(Postselect::Both).signs();
    let convention: PhiConvention = pick(a.p_phi, &cfg, "p_phi")?.unwrap_or(PhiSource::Prepared).into();
    let simulate = a.simulate || cfg.get::<bool>("simulate")?.unwrap_or(false);
    let include_kappa = a.include_kappa_error || cfg.get::<bool>("include_kappa_error")?.unwrap_or(false);
    if simulate {
        st.add_acquisition_metadata();
    }
    let mut meta = base_metadata("sweep-pusey", &st);
    meta.insert("grid".into(), grid.metadata());
    meta.insert("postselect".into(), signs_label(&signs));
    meta.insert("p_phi_convention".into(), json!(convention.label()));
    meta.insert("p_d".into(), json!(round12(1.0 - s.coherence())));
    meta.insert("source".into(), json!(if simulate { "simulated-counts" } else { "model" }));
    if simulate {
        meta.insert("error_terms".into(), json!(if include_kappa { "poisson+kappa" } else { "poisson" }));
    }

    let mut cols = vec!["theta_deg".to_string()];
    for sg in &signs {
        cols.push(format!("i0_{}", sg.label()));
        cols.push(format!("i1_{}", sg.label()));
        if simulate {
            cols.push(format!("i0_{}_err", sg.label()));
            cols.push(format!("i1_{}_err", sg.label()));
        }
    }
    let response = SignalResponse::new(s, &st.gate).map_err(inner("model"))?;
    let mut table = Table::new(cols, meta);
    let mut col = Collector { warnings: Vec::new() };
    for (i, th) in grid.points().into_iter().enumerate() {
        let t = th.to_radians();
        let probs = response.record(t).map_err(inner(format!("theta_deg={th}")))?;
        let counts = if simulate {
            Some(simulate_counts(&probs, &point_acquisition(&st.acquisition, i)).map_err(inner(format!("theta_deg={th}")))?)
        } else {
            None
        };
        let mut row = vec![Cell::Num(th)];
        for &sg in &signs {
            match &counts {
                Some(rec) => {
                    let r = pusey_from_counts(rec, s, sg, convention, probs.p_phi(sg), include_kappa);
                    let c = col.take(r, th, sg.label())?;
                    row.push(c.map(|c| c.i0).into());
                    row.push(c.map(|c| c.i1).into());
                    row.push(c.map(|c| c.var_i0.sqrt()).into());
                    row.push(c.map(|c| c.var_i1.sqrt()).into());
                }
                None => {
                    let p_phi = match convention {
                        PhiConvention::Prepared => Ok(probs.p_phi(sg)),
                        PhiConvention::CountModel => {
                            crate::contextuality::p_phi_from_postselection(probs.postselection(sg), s)
                        }
                    };
                    let r = p_phi.and_then(|p| PuseyRecord::from_probabilities(probs.p0(sg), probs.p1(sg), p, s));
                    let rec = col.take(r, th, sg.label())?;
                    row.push(rec.map(|r| r.i0).into());
                    row.push(rec.map(|r| r.i1).into());
                }
            }
        }
        table.push(row);
    }
    Ok((table, col.warnings, st.format, st.output))
}

fn sweep_fisher(a: &SweepArgs) -> Result<Built, CliError> {
    let (st, cfg) = Settings::resolve(&a.common)?;
    let grid = Grid::resolve(&a.grid, &cfg)?;
    let s = st.strength()?;
    if s.kappa() == 0.0 {
        return Err(CliError::Config("Fisher information of postselected values needs kappa > 0".into()));
    }
    let signs = st.postselect.unwrap_or(Postselect::Both).signs();
    let mut meta = base_metadata("sweep-fisher", &st);
    meta.insert("grid".into(), grid.metadata());
    meta.insert("postselect".into(), signs_label(&signs));
    meta.insert("units".into(), json!("rad^-2"));

    let mut cols = vec!["theta_deg".to_string(), "q".to_string()];
    for sg in &signs {
        let l = sg.label();
        cols.extend([
            format!("f_ps_{l}"),
            format!("f_ps_closed_{l}"),
            format!("postselection_{l}"),
            format!("budget_{l}"),
        ]);
    }
    let response = SignalResponse::new(s, &st.gate).map_err(inner("model"))?;
    let mut table = Table::new(cols, meta);
    let mut col = Collector { warnings: Vec::new() };
    for th in grid.points() {
        let t = th.to_radians();
        let mut row = vec![Cell::Num(th), Cell::Num(quantum_fisher_information(t))];
        for &sg in &signs {
            let (f, closed, ps) = match st.gate {
                GateModel::Ideal => {
                    let f = fisher_ps_definition(t, s, sg);
                    let closed = weak_value_curve(t, s, sg)
                        .and_then(|w| fisher_ps_closed_form(w, weak_value_slope(t, s, sg)?, s));
                    (f, closed, Ok(postselection_probability(t, s, sg)))
                }
                GateModel::Imperfect(_) => {
                    let f = response.fisher_ps(t, sg);
                    let closed = response
                        .weak_value(t, sg)
                        .and_then(|w| fisher_ps_closed_form(w, response.weak_value_slope(t, sg)?, s));
                    (f, closed, response.conditional(t, sg).map(|c| c.postselection))
                }
            };
            let f = col.take(f, th, &format!("{} f_ps", sg.label()))?;
            let closed = col.take(closed, th, &format!("{} f_ps_closed", sg.label()))?;
            let ps = col.take(ps, th, &format!("{} postselection", sg.label()))?;
            row.push(f.into());
            row.push(closed.into());
            row.push(ps.into());
            row.push(f.zip(ps).map(|(f, p)| f * p).into());
        }
        table.push(row);
    }
    Ok((table, col.warnings, st.format, st.output))
}

fn simulate_counts_cmd(a: &SweepArgs) -> Result<Built, CliError> {
    let (mut st, cfg) = Settings::resolve(&a.common)?;
    let grid = Grid::resolve(&a.grid, &cfg)?;
    let s = st.strength()?;
    let repetitions: usize = pick(a.repetitions, &cfg, "repetitions")?.unwrap_or(1);
    if repetitions == 0 {
        return Err(CliError::Config("repetitions must be at least 1".into()));
    }
    st.add_acquisition_metadata();
    let mut meta = base_metadata("simulate-counts", &st);
    meta.insert("grid".into(), grid.metadata());
    meta.insert("repetitions".into(), json!(repetitions));
    meta.insert("seed_rule".into(), json!("splitmix64(root, point*repetitions + repetition)"));

    let cols: Vec<String> = [
        "theta_deg", "repetition", "seed", "n_mm", "n_mp", "n_pm", "n_pp",
        "sigma_w_minus", "sigma_w_minus_var", "sigma_w_plus", "sigma_w_plus_var",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let response = SignalResponse::new(s, &st.gate).map_err(inner("model"))?;
    let mut table = Table::new(cols, meta);
    let mut col = Collector { warnings: Vec::new() };
    for (i, th) in grid.points().into_iter().enumerate() {
        let probs = response.record(th.to_radians()).map_err(inner(format!("theta_deg={th}")))?;
        for r in 0..repetitions {
            let acq = point_acquisition(&st.acquisition, i * repetitions + r);
            let rec = simulate_counts(&probs, &acq).map_err(inner(format!("theta_deg={th}")))?;
            let mut row = vec![
                Cell::Num(th),
                Cell::Int(r as u64),
                Cell::Int(acq.seed),
                Cell::Int(rec.n_mm),
                Cell::Int(rec.n_mp),
                Cell::Int(rec.n_pm),
                Cell::Int(rec.n_pp),
            ];
            for sg in [Sign::Minus, Sign::Plus] {
                let w = if s.kappa() > 0.0 {
                    col.take(weak_value_from_counts(&rec, s.kappa(), sg), th, sg.label())?
                } else {
                    None
                };
                row.push(w.map(|w| w.sigma_w).into());
                row.push(w.map(|w| w.variance).into());
            }
            table.push(row);
        }
    }
    Ok((table, col.warnings, st.format, st.output))
}

/// One measured input for `estimate`.
#[derive(Debug, Clone, Copy)]
struct Measured {
    theta_deg: Option<f64>,
    sign: Sign,
    sigma: f64,
    variance: Option<f64>,
    m_ps: Option<u64>,
}

fn read_measurements(path: &Path, s: Strength, acq: &AcquisitionConfig, signs: &[Sign]) -> Result<Vec<Measured>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: not JSON: {e}", path.display())))?;
    let records = doc
        .get("records")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Config(format!("{}: missing records array", path.display())))?;
    let kappa_unc = doc
        .pointer("/metadata/acquisition/kappa_uncertainty")
        .and_then(Value::as_f64)
        .unwrap_or(acq.kappa_uncertainty);
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let theta_deg = r.get("theta_deg").and_then(Value::as_f64);
        let count = |k: &str| r.get(k).and_then(Value::as_u64);
        if let (Some(n_mm), Some(n_mp), Some(n_pm), Some(n_pp)) =
            (count("n_mm"), count("n_mp"), count("n_pm"), count("n_pp"))
        {
            let rec = CountRecord {
                n_mm,
                n_mp,
                n_pm,
                n_pp,
                config: AcquisitionConfig { kappa_uncertainty: kappa_unc, ..*acq },
            };
            for &sg in signs {
                match weak_value_from_counts(&rec, s.kappa(), sg) {
                    Ok(w) => out.push(Measured {
                        theta_deg,
                        sign: sg,
                        sigma: w.sigma_w,
                        variance: Some(w.variance),
                        m_ps: Some(w.m_ps),
                    }),
                    Err(e) => {
                        return Err(CliError::Inner { context: format!("record {i}"), source: e });
                    }
                }
            }
            continue;
        }
        for &sg in signs {
            let key = format!("sigma_w_{}", sg.label());
            let Some(sigma) = r.get(&key).and_then(Value::as_f64) else {
                continue;
            };
            let variance = r
                .get(format!("{key}_var"))
                .and_then(Value::as_f64)
                .or_else(|| r.get(format!("{key}_err")).and_then(Value::as_f64).map(|e| e * e));
            out.push(Measured { theta_deg, sign: sg, sigma, variance, m_ps: None });
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: no usable measurements", path.display())));
    }
    Ok(out)
}

fn estimate_cmd(a: &EstimateArgs) -> Result<Built, CliError> {
    let (st, _cfg) = Settings::resolve(&a.common)?;
    let s = st.strength()?;
    if s.kappa() == 0.0 {
        return Err(CliError::Config("estimation needs kappa > 0".into()));
    }
    let signs = st.postselect.unwrap_or(Postselect::Both).signs();
    let branch = a.branch_start.zip(a.branch_end);
    let measured = match (&a.input, a.sigma_measured) {
        (Some(p), None) => read_measurements(p, s, &st.acquisition, &signs)?,
        (None, Some(sigma)) => {
            if signs.len() != 1 {
                return Err(CliError::Config("--sigma-measured needs --postselect plus or minus".into()));
            }
            vec![Measured { theta_deg: None, sign: signs[0], sigma, variance: a.sigma_variance, m_ps: None }]
        }
        _ => return Err(CliError::Config("give exactly one of --input or --sigma-measured".into())),
    };

    let mut meta = base_metadata("estimate", &st);
    meta.insert("postselect".into(), signs_label(&signs));
    meta.insert(
        "branch_rule".into(),
        json!(match branch {
            Some(_) => "explicit",
            None => "monotone branch containing the record's nominal theta",
        }),
    );
    if let Some((b0, b1)) = branch {
        meta.insert("branch_deg".into(), json!([b0, b1]));
    }
    if let Some(p) = &a.input {
        meta.insert("input".into(), json!(p.display().to_string()));
    }

    let cols: Vec<String> = [
        "theta_deg", "postselect", "sigma_w", "sigma_w_var", "theta_hat_deg",
        "variance_theta_deg2", "sigma_cr_deg2", "m_ps",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut curves: BTreeMap<&'static str, CalibrationCurve> = BTreeMap::new();
    for &sg in &signs {
        let model = ModelParams { kappa: s.kappa(), postselect_sign: sg, gate: st.gate };
        let (lo, hi) = match branch {
            Some((b0, b1)) => (b0.min(0.0), b1.max(90.0)),
            None => (0.0, 90.0),
        };
        let c = build_calibration(model, (lo.to_radians(), hi.to_radians()), 0.25f64.to_radians())
            .map_err(inner("calibration"))?;
        curves.insert(sg.label(), c);
    }

    let mut table = Table::new(cols, meta);
    let mut col = Collector { warnings: Vec::new() };
    for m in measured {
        let curve = &curves[m.sign.label()];
        let where_ = m.theta_deg.unwrap_or(f64::NAN);
        let br = match branch {
            Some((b0, b1)) => (b0.to_radians(), b1.to_radians()),
            None => {
                let nominal = m.theta_deg.ok_or_else(|| {
                    CliError::Config("record has no theta_deg; give --branch-start/--branch-end".into())
                })?;
                let b = curve.branch_containing(nominal.to_radians()).ok_or_else(|| {
                    CliError::Config(format!("theta_deg={nominal} outside calibration range"))
                })?;
                (b.start, b.end)
            }
        };
        let th = col.take(estimate_theta(curve, m.sigma, br), where_, m.sign.label())?;
        let var = match (th, m.variance) {
            (Some(t), Some(v)) => col.take(propagate_variance(curve, t, v), where_, m.sign.label())?,
            _ => None,
        };
        let cr = match (th, m.m_ps) {
            (Some(t), Some(n)) => col.take(cramer_rao_variance_model(curve, t, n as f64), where_, m.sign.label())?,
            _ => None,
        };
        table.push(vec![
            m.theta_deg.into(),
            m.sign.label().into(),
            m.sigma.into(),
            m.variance.into(),
            th.map(f64::to_degrees).into(),
            var.into(),
            cr.into(),
            m.m_ps.into(),
        ]);
    }
    Ok((table, col.warnings, st.format, st.output))
}

fn table1_cmd(a: &TableArgs) -> Result<Built, CliError> {
    let (mut st, cfg) = Settings::resolve(&a.common)?;
    let s = match st.strength {
        Some(s) => s,
        None => Strength::new(0.335).expect("valid"),
    };
    st.metadata.insert("kappa".into(), json!(round12(s.kappa())));
    let signs = st.postselect.unwrap_or(Postselect::Both).signs();
    let repetitions: usize = pick(a.repetitions, &cfg, "repetitions")?.unwrap_or(200);
    if repetitions == 0 {
        return Err(CliError::Config("repetitions must be at least 1".into()));
    }
    let thetas: Option<Vec<f64>> = match &a.thetas {
        Some(t) => Some(t.clone()),
        None => cfg
            .values
            .get("thetas")
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Config(format!("thetas: {e}"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?,
    };
    let baseline_path: Option<PathBuf> = pick(a.baseline.clone(), &cfg, "baseline")?;
    let baseline: Vec<BaselineRow> = match &baseline_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_baseline(&text).map_err(CliError::Config)?
        }
        None => parse_baseline(DEFAULT_BASELINE).map_err(CliError::Config)?,
    };

    st.add_acquisition_metadata();
    let mut meta = base_metadata("table1", &st);
    meta.insert("repetitions".into(), json!(repetitions));
    meta.insert("postselect".into(), signs_label(&signs));
    meta.insert(
        "baseline".into(),
        json!(baseline_path.map_or("built-in reference values".to_string(), |p| p.display().to_string())),
    );
    meta.insert("units".into(), json!("theta: deg; variances: deg^2; f_ps: rad^-2"));
    meta.insert(
        "conventions".into(),
        json!("variance_theta: mean propagated delta-method variance; sigma_cr: mean 1/(F_ps(theta_hat) M_ps) with realized M_ps"),
    );

    let cols: Vec<String> = [
        "postselect", "theta_deg", "theta_hat_deg", "variance_theta_deg2", "empirical_variance_deg2",
        "sigma_cr_deg2", "f_ps", "m_ps", "postselection_fraction", "budget_lhs", "budget_ok",
        "failures", "baseline_variance_theta_deg2", "baseline_sigma_cr_deg2", "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut table = Table::new(cols, meta);
    let mut warnings = Vec::new();
    for (k, &sg) in signs.iter().enumerate() {
        let list = thetas.clone().unwrap_or_else(|| match sg {
            Sign::Minus => TABLE_THETAS_MINUS.to_vec(),
            Sign::Plus => TABLE_THETAS_PLUS.to_vec(),
        });
        let model = ModelParams { kappa: s.kappa(), postselect_sign: sg, gate: st.gate };
        let acq = st.acquisition.with_seed(derive_seed(st.acquisition.seed, k as u64));
        let rad: Vec<f64> = list.iter().map(|d| d.to_radians()).collect();
        let rows = table1_pipeline(&rad, model, &acq, repetitions).map_err(inner(format!("table1 {}", sg.label())))?;
        for (row, &theta_deg) in rows.iter().zip(&list) {
            let base = baseline
                .iter()
                .find(|b| b.postselect_sign == sg && (b.theta_deg - theta_deg).abs() < 1e-9);
            let mut cells = vec![Cell::from(sg.label()), Cell::Num(theta_deg)];
            match &row.result {
                Ok(e) => {
                    if !e.budget_ok {
                        warnings.push(format!("theta_deg={theta_deg} {}: information budget exceeded", sg.label()));
                    }
                    cells.extend([
                        Cell::Num(e.theta_hat_deg),
                        Cell::Num(e.variance_theta),
                        e.empirical_variance.into(),
                        Cell::Num(e.sigma_cr),
                        Cell::Num(e.f_ps),
                        Cell::Num(e.m_ps),
                        Cell::Num(e.postselection_fraction),
                        Cell::Num(e.budget_lhs),
                        Cell::Bool(e.budget_ok),
                        Cell::Int(e.failures as u64),
                    ]);
                }
                Err(_) => cells.extend(std::iter::repeat_n(Cell::Null, 10)),
            }
            cells.push(base.map(|b| b.variance_theta).into());
            cells.push(base.map(|b| b.sigma_cr).into());
            match &row.result {
                Ok(_) => cells.push(Cell::Null),
                Err(msg) => {
                    warnings.push(format!("theta_deg={theta_deg} {}: {msg}", sg.label()));
                    cells.push(Cell::Text(msg.replace(',', ";")));
                }
            }
            table.push(cells);
        }
    }
    Ok((table, warnings, st.format, st.output))
}

fn decompose_cmd(a: &DecomposeArgs) -> Result<Built, CliError> {
    let (st, cfg) = Settings::resolve(&a.common)?;
    let s = st.strength()?;
    let phi_sign: Option<Postselect> = pick(a.phi, &cfg, "phi")?;
    let phi_angle: Option<f64> = pick(a.phi_angle, &cfg, "phi_angle")?;
    let (phi, label) = match (phi_sign, phi_angle) {
        (Some(_), Some(_)) => return Err(CliError::Config("give one of --phi or --phi-angle".into())),
        (Some(Postselect::Plus), None) => (PureQubit::plus(), "plus".to_string()),
        (Some(Postselect::Minus), None) => (PureQubit::minus(), "minus".to_string()),
        (Some(Postselect::Both), None) => return Err(CliError::Config("--phi takes plus or minus".into())),
        (None, Some(al)) => (PureQubit::from_polarization(al.to_radians()), format!("angle {al} deg")),
        (None, None) => return Err(CliError::Config("one of --phi or --phi-angle is required".into())),
    };
    let d = decompose_consolidated(&phi, s);
    let mut meta = base_metadata("decompose", &st);
    meta.insert("phi".into(), json!(label));
    meta.insert(
        "note".into(),
        json!("p_d = 1 - sqrt(1 - kappa^2) reproduces S exactly; p_d_alternative = 1 - 2 sqrt(1 - kappa^2) is reported for comparison"),
    );
    let cols: Vec<String> = [
        "kappa", "p_d", "s00", "s01_re", "s01_im", "s11", "e_d00", "e_d01_re", "e_d01_im", "e_d11",
        "e_d_eig_min", "e_d_eig_max", "residual", "p_d_alternative", "p_d_alternative_is_probability",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let [lo, hi] = d.e_d_eigenvalues();
    let alt = p_d_alternative(s);
    let mut table = Table::new(cols, meta);
    table.push(vec![
        Cell::Num(s.kappa()),
        Cell::Num(d.p_d),
        Cell::Num(d.s_matrix[(0, 0)].re),
        Cell::Num(d.s_matrix[(0, 1)].re),
        Cell::Num(d.s_matrix[(0, 1)].im),
        Cell::Num(d.s_matrix[(1, 1)].re),
        Cell::Num(d.e_d[(0, 0)].re),
        Cell::Num(d.e_d[(0, 1)].re),
        Cell::Num(d.e_d[(0, 1)].im),
        Cell::Num(d.e_d[(1, 1)].re),
        Cell::Num(lo),
        Cell::Num(hi),
        Cell::Num(d.residual(&phi)),
        Cell::Num(alt),
        Cell::Bool((0.0..=1.0).contains(&alt)),
    ]);
    let format = st.format.or(Some(Format::Json));
    Ok((table, Vec::new(), format, st.output))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SweepWeakValue(_) => "sweep-weak-value",
        Command::SweepPusey(_) => "sweep-pusey",
        Command::SweepFisher(_) => "sweep-fisher",
        Command::SimulateCounts(_) => "simulate-counts",
        Command::Estimate(_) => "estimate",
        Command::Table1(_) => "table1",
        Command::Decompose(_) => "decompose",
    }
}

/// Build the result table for a command without writing it.
pub fn build(cli: &Cli) -> Result<(Table, Vec<String>, Format, Option<PathBuf>), CliError> {
    let (table, warnings, format, output) = match &cli.command {
        Command::SweepWeakValue(a) => sweep_weak_value(a)?,
        Command::SweepPusey(a) => sweep_pusey(a)?,
        Command::SweepFisher(a) => sweep_fisher(a)?,
        Command::SimulateCounts(a) => simulate_counts_cmd(a)?,
        Command::Estimate(a) => estimate_cmd(a)?,
        Command::Table1(a) => table1_cmd(a)?,
        Command::Decompose(a) => decompose_cmd(a)?,
    };
    Ok((table, warnings, format.unwrap_or(Format::Csv), output))
}

/// Run a command and write its output file (or stdout).
pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let (table, warnings, format, output) = build(cli)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = output.or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{}.{ext}", command_name(&cli.command))))
    });
    let text = table.render(format);
    match &path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::Io { path: p.clone(), source: e })?;
            }
            std::fs::write(p, text).map_err(|e| CliError::Io { path: p.clone(), source: e })?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e })?;
        }
    }
    Ok(RunReport { table, format, path, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("postselect").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn round12_examples() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(format!("{}", round12(2.0 / 3.0)), "0.666666666667");
        assert_eq!(round12(0.0), 0.0);
    }

    #[test]
    fn config_file_parsing() {
        let c = ConfigFile::parse("# comment\nkappa = 0.335\ntheta-step=0.25 # inline\n\n").unwrap();
        assert_eq!(c.get::<f64>("kappa").unwrap(), Some(0.335));
        assert_eq!(c.get::<f64>("theta_step").unwrap(), Some(0.25));
        assert!(ConfigFile::parse("kappa 0.3").is_err());
        assert!(c.get::<u64>("kappa").is_err());
    }

    #[test]
    fn grid_points_include_end() {
        let g = Grid { start: 0.0, end: 90.0, step: 0.5 };
        let p = g.points();
        assert_eq!(p.len(), 181);
        assert_eq!(*p.last().unwrap(), 90.0);
        let g = Grid { start: 0.0, end: 1.0, step: 0.3 };
        assert_eq!(g.points().len(), 4);
    }

    #[test]
    fn rejects_bad_grid_and_strength() {
        let cli = parse(&["sweep-weak-value", "--kappa", "0.3", "--theta-start", "10", "--theta-end", "5"]);
        assert!(matches!(build(&cli), Err(CliError::Config(_))));
        let cli = parse(&["sweep-weak-value", "--kappa", "0.3", "--theta-step", "0"]);
        assert!(matches!(build(&cli), Err(CliError::Config(_))));
        let cli = parse(&["sweep-weak-value", "--theta-step", "1"]);
        assert!(matches!(build(&cli), Err(CliError::Config(_))));
        let cli = parse(&["sweep-weak-value", "--kappa", "1.5"]);
        assert!(matches!(build(&cli), Err(CliError::Config(_))));
        let cli = parse(&["sweep-weak-value", "--mu", "30"]);
        assert!(matches!(build(&cli), Err(CliError::Config(_))));
        assert!(Cli::try_parse_from(["postselect", "sweep-weak-value", "--kappa", "0.3", "--mu", "2"]).is_err());
    }

    #[test]
    fn mu_sets_kappa() {
        let mu = 0.335f64.asin().to_degrees() / 4.0;
        let cli = parse(&["sweep-weak-value", "--mu", &mu.to_string(), "--theta-end", "1", "--theta-step", "1"]);
        let (t, ..) = build(&cli).unwrap();
        assert_eq!(t.metadata["kappa"], json!(0.335));
    }

    #[test]
    fn undefined_points_become_empty_cells() {
        let cli = parse(&["sweep-pusey", "--kappa", "0.335", "--theta-start", "22", "--theta-end", "23"]);
        let (t, warnings, ..) = build(&cli).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("theta_deg=22.5"));
        let row = &t.rows[1];
        assert_eq!(row[1], Cell::Null);
    }
}
