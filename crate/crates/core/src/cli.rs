//! Command-line front end.
//!
//! A run is described by a flat `key = value` configuration. Values come from
//! built-in defaults, then an optional `--config` file, then command-line
//! flags (flags win). Unknown keys are rejected before any computation, and
//! the fully resolved configuration is embedded in every output file so a run
//! can be reproduced byte for byte.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coexistence::{
    log_sweep, required_guard_band, secondary_capacity_curve, write_capacity_csv, write_guard_csv,
    CapacityScenario, GuardBandResult,
};
use crate::interference::{evm_interference_table, EvmConfig, InterferenceTable, Model, SyncModel};
use crate::psd::{psd_interference_table, subcarrier_psd, truncated_psd, PsdConfig, Taper};
use crate::waveform::{WaveformKind, WaveformSpec};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Everything a subcommand needs, fully resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub subcarriers: usize,
    /// `None` means `M/8`.
    pub cp_len: Option<usize>,
    pub overlap: usize,
    pub victim: WaveformKind,
    pub aggressor: WaveformKind,
    pub model: Model,
    pub sync: SyncModel,
    pub l_max: usize,
    /// Monte Carlo trials of the receiver simulation.
    pub trials: usize,
    /// Independent bursts averaged by the PSD estimator.
    pub psd_trials: usize,
    pub measured_symbols: usize,
    pub seed: u64,
    /// PSD segment length in units of `M`.
    pub segment_factor: usize,
    pub taper: Taper,
    /// Cut the PSD source through the victim's receive windows.
    pub truncate: bool,
    pub constraints_db: Vec<f64>,
    pub secondaries: Vec<WaveformKind>,
    pub incumbent_width: usize,
    pub secondary_width: usize,
    pub ceiling: usize,
    pub n_total: usize,
    pub incumbent_start: usize,
    pub incumbent_end: usize,
    pub p_total: f64,
    pub snr_db: f64,
    pub gain: f64,
    pub ith_min: f64,
    pub ith_max: f64,
    pub ith_points: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            subcarriers: 256,
            cp_len: None,
            overlap: 4,
            victim: WaveformKind::CpOfdm,
            aggressor: WaveformKind::OqamPhydyas,
            model: Model::Evm,
            sync: SyncModel::UniformOffset,
            l_max: 20,
            trials: 2000,
            psd_trials: 200,
            measured_symbols: 8,
            seed: 1,
            segment_factor: 16,
            taper: Taper::BlackmanHarris,
            truncate: false,
            constraints_db: (2..=10).map(|i| -5.0 * i as f64).collect(),
            secondaries: vec![WaveformKind::CpOfdm, WaveformKind::OqamPhydyas],
            incumbent_width: 20,
            secondary_width: 20,
            ceiling: crate::coexistence::DEFAULT_GUARD_CEILING,
            n_total: 60,
            incumbent_start: 20,
            incumbent_end: 40,
            p_total: 1.0,
            snr_db: 10.0,
            gain: 1.0,
            ith_min: 1e-4,
            ith_max: 1.0,
            ith_points: 13,
            format: Format::Csv,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("invalid value '{value}' for '{key}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for '{key}': expected true or false"))),
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ScenarioConfig {
    /// Every accepted key.
    pub const KEYS: &'static [&'static str] = &[
        "aggressor",
        "ceiling",
        "constraints_db",
        "cp_len",
        "format",
        "gain",
        "incumbent_end",
        "incumbent_start",
        "incumbent_width",
        "ith_max",
        "ith_min",
        "ith_points",
        "l_max",
        "measured_symbols",
        "model",
        "n_total",
        "out",
        "overlap",
        "p_total",
        "psd_trials",
        "secondaries",
        "secondary_width",
        "seed",
        "segment_factor",
        "snr_db",
        "subcarriers",
        "sync",
        "taper",
        "trials",
        "truncate",
        "victim",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "aggressor" => self.aggressor = parse(key, value)?,
            "ceiling" => self.ceiling = parse(key, value)?,
            "constraints_db" => self.constraints_db = parse_list(key, value)?,
            "cp_len" => self.cp_len = Some(parse(key, value)?),
            "format" => self.format = value.parse()?,
            "gain" => self.gain = parse(key, value)?,
            "incumbent_end" => self.incumbent_end = parse(key, value)?,
            "incumbent_start" => self.incumbent_start = parse(key, value)?,
            "incumbent_width" => self.incumbent_width = parse(key, value)?,
            "ith_max" => self.ith_max = parse(key, value)?,
            "ith_min" => self.ith_min = parse(key, value)?,
            "ith_points" => self.ith_points = parse(key, value)?,
            "l_max" => self.l_max = parse(key, value)?,
            "measured_symbols" => self.measured_symbols = parse(key, value)?,
            "model" => self.model = parse(key, value)?,
            "n_total" => self.n_total = parse(key, value)?,
            "out" => self.out = (!value.is_empty() && value != "-").then(|| PathBuf::from(value)),
            "overlap" => self.overlap = parse(key, value)?,
            "p_total" => self.p_total = parse(key, value)?,
            "psd_trials" => self.psd_trials = parse(key, value)?,
            "secondaries" => self.secondaries = parse_list(key, value)?,
            "secondary_width" => self.secondary_width = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "segment_factor" => self.segment_factor = parse(key, value)?,
            "snr_db" => self.snr_db = parse(key, value)?,
            "subcarriers" => self.subcarriers = parse(key, value)?,
            "sync" => self.sync = parse(key, value)?,
            "taper" => self.taper = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "truncate" => self.truncate = parse_bool(key, value)?,
            "victim" => self.victim = parse(key, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown configuration key '{key}' (valid keys: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// ignored; a key may appear only once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ScenarioConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn spec(&self, kind: WaveformKind) -> Result<WaveformSpec> {
        match kind {
            WaveformKind::CpOfdm => {
                WaveformSpec::cp_ofdm(self.subcarriers, self.cp_len.unwrap_or(self.subcarriers / 8))
            }
            WaveformKind::OqamPhydyas => WaveformSpec::oqam(self.subcarriers, self.overlap),
        }
        .map_err(|e| Error::Config(e.message()))
    }

    pub fn evm_config(&self) -> EvmConfig {
        EvmConfig {
            l_max: self.l_max,
            trials: self.trials,
            sync: self.sync,
            seed: self.seed,
            measured_symbols: self.measured_symbols,
            symbol_power: 1.0,
        }
    }

    pub fn psd_config(&self) -> PsdConfig {
        PsdConfig {
            segment_len: self.segment_factor * self.subcarriers,
            taper: self.taper,
            ..PsdConfig::for_subcarriers(self.subcarriers)
        }
    }

    pub fn scenario(&self) -> CapacityScenario {
        CapacityScenario {
            n_total: self.n_total,
            incumbent: self.incumbent_start..self.incumbent_end,
            p_total: self.p_total,
            snr_db: self.snr_db,
            gain: self.gain,
        }
    }

    pub fn ith_sweep(&self) -> Vec<f64> {
        log_sweep(self.ith_min, self.ith_max, self.ith_points)
    }

    /// Checks every module precondition that can be checked up front.
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        self.spec(self.victim)?;
        self.spec(self.aggressor)?;
        for &s in &self.secondaries {
            self.spec(s)?;
        }
        if self.l_max == 0 || self.l_max >= self.subcarriers / 2 {
            return cfg(format!("l_max must be in 1..{}, got {}", self.subcarriers / 2, self.l_max));
        }
        if self.trials < 2 || self.psd_trials == 0 {
            return cfg("trials must be at least 2 and psd_trials at least 1".into());
        }
        if self.measured_symbols == 0 {
            return cfg("measured_symbols must be positive".into());
        }
        if self.segment_factor < 2 || !self.segment_factor.is_multiple_of(2) {
            return cfg(format!("segment_factor must be an even number >= 2, got {}", self.segment_factor));
        }
        if (self.l_max as f64 + 0.5) > self.subcarriers as f64 / 2.0 - 1.0 / self.segment_factor as f64 {
            return cfg(format!("l_max={} exceeds the PSD frequency span", self.l_max));
        }
        if self.constraints_db.is_empty() || self.constraints_db.iter().any(|c| !c.is_finite()) {
            return cfg("constraints_db must be a non-empty list of finite values".into());
        }
        if self.secondaries.is_empty() {
            return cfg("secondaries must list at least one waveform".into());
        }
        if self.incumbent_width == 0 || self.secondary_width == 0 {
            return cfg("incumbent_width and secondary_width must be positive".into());
        }
        if !(self.incumbent_start < self.incumbent_end && self.incumbent_end <= self.n_total) {
            return cfg(format!(
                "incumbent {}..{} must be a non-empty range inside 0..{}",
                self.incumbent_start, self.incumbent_end, self.n_total
            ));
        }
        if self.incumbent_end - self.incumbent_start == self.n_total {
            return cfg("the incumbent leaves no subcarrier for the secondary".into());
        }
        if !(self.p_total.is_finite() && self.p_total > 0.0) {
            return cfg(format!("p_total must be positive, got {}", self.p_total));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) || !self.snr_db.is_finite() {
            return cfg("gain must be positive and snr_db finite".into());
        }
        if !(self.ith_min > 0.0 && self.ith_min <= self.ith_max && self.ith_max.is_finite()) || self.ith_points == 0 {
            return cfg("ith sweep needs 0 < ith_min <= ith_max and ith_points >= 1".into());
        }
        Ok(())
    }

    /// Canonical `key = value` rendering of every key that affects results,
    /// sorted. The output path is left out so a rerun into another file is
    /// byte-identical.
    pub fn resolved(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("aggressor", self.aggressor.to_string());
        m.insert("ceiling", self.ceiling.to_string());
        m.insert("constraints_db", join(&self.constraints_db));
        m.insert("cp_len", self.cp_len.unwrap_or(self.subcarriers / 8).to_string());
        m.insert("format", self.format.to_string());
        m.insert("gain", self.gain.to_string());
        m.insert("incumbent_end", self.incumbent_end.to_string());
        m.insert("incumbent_start", self.incumbent_start.to_string());
        m.insert("incumbent_width", self.incumbent_width.to_string());
        m.insert("ith_max", self.ith_max.to_string());
        m.insert("ith_min", self.ith_min.to_string());
        m.insert("ith_points", self.ith_points.to_string());
        m.insert("l_max", self.l_max.to_string());
        m.insert("measured_symbols", self.measured_symbols.to_string());
        m.insert("model", self.model.to_string());
        m.insert("n_total", self.n_total.to_string());
        m.insert("overlap", self.overlap.to_string());
        m.insert("p_total", self.p_total.to_string());
        m.insert("psd_trials", self.psd_trials.to_string());
        m.insert("secondaries", join(&self.secondaries));
        m.insert("secondary_width", self.secondary_width.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("segment_factor", self.segment_factor.to_string());
        m.insert("snr_db", self.snr_db.to_string());
        m.insert("subcarriers", self.subcarriers.to_string());
        m.insert("sync", self.sync.to_string());
        m.insert("taper", self.taper.to_string());
        m.insert("trials", self.trials.to_string());
        m.insert("truncate", self.truncate.to_string());
        m.insert("victim", self.victim.to_string());
        m
    }

    /// Header block shared by every output file.
    pub fn metadata(&self, command: &str) -> Vec<(String, String)> {
        let mut meta = vec![
            ("tool".to_string(), format!("coexsim {VERSION}")),
            ("command".to_string(), command.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        meta.extend(self.resolved().into_iter().map(|(k, v)| ("config".to_string(), format!("{k} = {v}"))));
        meta
    }
}

#[derive(Serialize)]
struct JsonMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: BTreeMap<&'static str, String>,
}

#[derive(Serialize)]
struct JsonDocument<'a, T: Serialize> {
    metadata: JsonMetadata<'a>,
    warnings: Vec<String>,
    data: T,
}

fn json_bytes<T: Serialize>(config: &ScenarioConfig, command: &str, warnings: Vec<String>, data: T) -> Result<Vec<u8>> {
    let doc = JsonDocument {
        metadata: JsonMetadata {
            tool: "coexsim",
            version: VERSION,
            command,
            seed: config.seed,
            config: config.resolved(),
        },
        warnings,
        data,
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

/// Interference table selected by `model`, `victim` and `aggressor`.
pub fn cmd_table(config: &ScenarioConfig) -> Result<Vec<u8>> {
    let victim = config.spec(config.victim)?;
    let aggressor = config.spec(config.aggressor)?;
    let table = build_table(config, config.model, &victim, &aggressor)?;
    match config.format {
        Format::Csv => {
            let mut out = Vec::new();
            table.write_csv(&mut out, &config.metadata("table"))?;
            Ok(out)
        }
        Format::Json => json_bytes(config, "table", table.warnings.clone(), &table),
    }
}

fn build_table(
    config: &ScenarioConfig,
    model: Model,
    victim: &WaveformSpec,
    aggressor: &WaveformSpec,
) -> Result<InterferenceTable> {
    match model {
        Model::Evm => evm_interference_table(victim, aggressor, &config.evm_config()),
        Model::Psd => {
            let psd = subcarrier_psd(aggressor, &config.psd_config(), config.psd_trials, config.seed)?;
            psd_interference_table(&psd, config.l_max)
        }
    }
}

/// PSD of one `aggressor` subcarrier, optionally truncated by the victim's
/// receive windows.
pub fn cmd_psd(config: &ScenarioConfig) -> Result<Vec<u8>> {
    let aggressor = config.spec(config.aggressor)?;
    let psd_cfg = config.psd_config();
    let psd = if config.truncate {
        let victim = config.spec(config.victim)?;
        truncated_psd(&aggressor, &victim, &psd_cfg, config.psd_trials, config.seed, config.sync)?
    } else {
        subcarrier_psd(&aggressor, &psd_cfg, config.psd_trials, config.seed)?
    };
    match config.format {
        Format::Csv => {
            let mut out = Vec::new();
            psd.write_csv(&mut out, &config.metadata("psd"))?;
            Ok(out)
        }
        Format::Json => json_bytes(config, "psd", Vec::new(), &psd),
    }
}

/// Tables for each secondary waveform under both models, PSD first.
fn secondary_tables(config: &ScenarioConfig) -> Result<Vec<InterferenceTable>> {
    let victim = config.spec(config.victim)?;
    let mut tables = Vec::new();
    for model in [Model::Psd, Model::Evm] {
        for &kind in &config.secondaries {
            tables.push(build_table(config, model, &victim, &config.spec(kind)?)?);
        }
    }
    Ok(tables)
}

/// Required guard band over the constraint sweep.
pub fn cmd_guardband(config: &ScenarioConfig) -> Result<Vec<u8>> {
    let tables = secondary_tables(config)?;
    let mut results: Vec<GuardBandResult> = Vec::new();
    for &c in &config.constraints_db {
        for t in &tables {
            results.push(required_guard_band(
                t,
                config.incumbent_width,
                config.secondary_width,
                c,
                config.ceiling,
            )?);
        }
    }
    let warnings: Vec<String> = tables.iter().flat_map(|t| t.warnings.iter().cloned()).collect();
    match config.format {
        Format::Csv => {
            let mut meta = config.metadata("guardband");
            meta.extend(warnings.into_iter().map(|w| ("warning".to_string(), w)));
            let mut out = Vec::new();
            write_guard_csv(&results, &mut out, &meta)?;
            Ok(out)
        }
        Format::Json => json_bytes(config, "guardband", warnings, &results),
    }
}

/// Secondary capacity versus interference threshold.
pub fn cmd_allocate(config: &ScenarioConfig) -> Result<Vec<u8>> {
    let tables = secondary_tables(config)?;
    let refs: Vec<&InterferenceTable> = tables.iter().collect();
    let scenario = config.scenario();
    let curves = secondary_capacity_curve(&scenario, &refs, &config.ith_sweep())?;
    let warnings: Vec<String> = tables.iter().flat_map(|t| t.warnings.iter().cloned()).collect();
    match config.format {
        Format::Csv => {
            let mut meta = config.metadata("allocate");
            meta.push(("noise_power".to_string(), format!("{:e}", scenario.noise_power())));
            meta.extend(warnings.into_iter().map(|w| ("warning".to_string(), w)));
            let mut out = Vec::new();
            write_capacity_csv(&curves, &mut out, &meta)?;
            Ok(out)
        }
        Format::Json => json_bytes(config, "allocate", warnings, &curves),
    }
}

#[derive(Parser, Debug)]
#[command(name = "coexsim", version, about = "Filter-bank / CP-OFDM coexistence simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials (PSD bursts for `psd`).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Any configuration key, e.g. `--set subcarriers=128`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct WaveformArgs {
    #[arg(long)]
    pub victim: Option<String>,
    #[arg(long)]
    pub aggressor: Option<String>,
    /// evm or psd.
    #[arg(long)]
    pub model: Option<String>,
    /// uniform-offset or aligned.
    #[arg(long)]
    pub sync: Option<String>,
    #[arg(long = "lmax")]
    pub l_max: Option<usize>,
    #[arg(long = "subcarriers", short = 'm')]
    pub subcarriers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Interference table I(l).
    Table {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        waveform: WaveformArgs,
    },
    /// Power spectral density of one aggressor subcarrier.
    Psd {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        waveform: WaveformArgs,
        /// Pass the signal through the victim's CP-OFDM receive windows.
        #[arg(long)]
        truncate: bool,
    },
    /// Required guard band versus interference constraint.
    Guardband {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        waveform: WaveformArgs,
        /// Comma-separated constraints in dB.
        #[arg(long, allow_hyphen_values = true)]
        constraints: Option<String>,
    },
    /// Secondary capacity versus interference threshold.
    Allocate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        waveform: WaveformArgs,
        #[arg(long)]
        ith_min: Option<f64>,
        #[arg(long)]
        ith_max: Option<f64>,
        #[arg(long)]
        ith_points: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Table { .. } => "table",
            Command::Psd { .. } => "psd",
            Command::Guardband { .. } => "guardband",
            Command::Allocate { .. } => "allocate",
        }
    }

    fn parts(&self) -> (&CommonArgs, &WaveformArgs) {
        match self {
            Command::Table { common, waveform }
            | Command::Psd { common, waveform, .. }
            | Command::Guardband { common, waveform, .. }
            | Command::Allocate { common, waveform, .. } => (common, waveform),
        }
    }

    /// Flag overrides as `(key, value)` pairs, applied after the file.
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let (common, wf) = self.parts();
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        };
        push("subcarriers", wf.subcarriers.map(|v| v.to_string()));
        push("victim", wf.victim.clone());
        push("aggressor", wf.aggressor.clone());
        push("model", wf.model.clone());
        push("sync", wf.sync.clone());
        push("l_max", wf.l_max.map(|v| v.to_string()));
        push("seed", common.seed.map(|v| v.to_string()));
        let trials_key = if matches!(self, Command::Psd { .. }) { "psd_trials" } else { "trials" };
        push(trials_key, common.trials.map(|v| v.to_string()));
        push("format", common.format.map(|f| f.to_string()));
        push("out", common.out.as_ref().map(|p| p.display().to_string()));
        match self {
            Command::Psd { truncate: true, .. } => push("truncate", Some("true".into())),
            Command::Guardband { constraints, .. } => push("constraints_db", constraints.clone()),
            Command::Allocate {
                ith_min,
                ith_max,
                ith_points,
                ..
            } => {
                push("ith_min", ith_min.map(|v| v.to_string()));
                push("ith_max", ith_max.map(|v| v.to_string()));
                push("ith_points", ith_points.map(|v| v.to_string()));
            }
            _ => {}
        }
        for s in &common.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let (common, _) = self.parts();
        let mut config = ScenarioConfig::default();
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        for (k, v) in self.overrides()? {
            config.set(&k, &v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Runs a parsed command and writes its output.
pub fn execute(command: &Command) -> Result<()> {
    let config = command.resolve()?;
    let bytes = match command {
        Command::Table { .. } => cmd_table(&config)?,
        Command::Psd { .. } => cmd_psd(&config)?,
        Command::Guardband { .. } => cmd_guardband(&config)?,
        Command::Allocate { .. } => cmd_allocate(&config)?,
    };
    match &config.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape(_) | Error::Input(_) | Error::Range(_) => 2,
        Error::Numerical(_) => 3,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
    }
}

/// Entry point of the `coexsim` binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("coexsim {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
