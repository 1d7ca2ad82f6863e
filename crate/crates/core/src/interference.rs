//! Interference tables `I(l)` and their aggregation over spectrum allocations.
//!
//! An EVM table is measured by running the victim's own receiver on a signal
//! that contains a single active aggressor subcarrier. The victim transmits
//! nothing, so everything it demodulates is interference `η`. Averaging
//! `|η_m|²` over steady-state symbols and over trials gives the mean
//! interference injected at spectral distance `l = q - m`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::trial_rng;
use crate::waveform::{
    cp_ofdm_demodulate, modulate, oqam_demodulate, phydyas_prototype, PrototypeFilter,
    SampleBuffer, SymbolGrid, WaveformKind, WaveformSpec,
};
use crate::{to_db, Error, Result};

/// How an interference value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Integral of the aggressor's transmit PSD over the victim band.
    Psd,
    /// Mean squared error after the victim's demodulator.
    Evm,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Psd => "psd",
            Model::Evm => "evm",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psd" => Ok(Model::Psd),
            "evm" => Ok(Model::Evm),
            other => Err(Error::Config(format!("unknown model `{other}` (expected psd or evm)"))),
        }
    }
}

/// Timing relation between the aggressor burst and the victim's frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncModel {
    /// Victim windows start on the aggressor's symbol grid.
    Aligned,
    /// Victim frame delayed by an integer offset drawn uniformly in
    /// `[0, victim symbol period)` for every trial.
    UniformOffset,
}

impl SyncModel {
    pub fn as_str(self) -> &'static str {
        match self {
            SyncModel::Aligned => "aligned",
            SyncModel::UniformOffset => "uniform-offset",
        }
    }
}

impl fmt::Display for SyncModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyncModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aligned" | "sync" => Ok(SyncModel::Aligned),
            "uniform-offset" | "uniform" | "async" => Ok(SyncModel::UniformOffset),
            other => Err(Error::Config(format!(
                "unknown sync model `{other}` (expected aligned or uniform-offset)"
            ))),
        }
    }
}

/// Behaviour of [`InterferenceTable::value`] beyond `l_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tail {
    /// Distances beyond the table are a range error.
    Disabled,
    /// `I(l) = coeff · |l|^(-exponent)`, fitted separately on each side.
    PowerLaw {
        coeff_neg: f64,
        exponent_neg: f64,
        coeff_pos: f64,
        exponent_pos: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub l: i64,
    /// Linear interference power for unit aggressor symbol power.
    pub value: f64,
    /// Monte Carlo standard error of `value`, when measured.
    pub stderr: Option<f64>,
}

impl TableEntry {
    pub fn db(&self) -> f64 {
        to_db(self.value)
    }

    /// Upper half-width of the one-standard-error band, in dB.
    pub fn stderr_db(&self) -> Option<f64> {
        self.stderr.map(|se| to_db((self.value + se) / self.value))
    }
}

/// Mean interference `I(l)` for `l ∈ [-l_max, l_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceTable {
    pub model: Model,
    /// Receiver the values were measured after; `None` for transmit-PSD tables.
    pub victim: Option<WaveformSpec>,
    pub aggressor: Option<WaveformSpec>,
    pub sync: Option<SyncModel>,
    pub l_max: usize,
    /// Sorted by `l`, one per distance.
    pub entries: Vec<TableEntry>,
    pub trials: usize,
    pub seed: Option<u64>,
    /// Steady-state victim symbols averaged per trial.
    pub measured_symbols: usize,
    /// Aggressor symbol variance used for the measurement; entries are raw
    /// powers, so they equal the normalized table when this is one.
    pub symbol_power: f64,
    /// Mean aggressor energy inside one victim receive window (EVM tables).
    pub captured_power: Option<f64>,
    pub tail: Tail,
    pub warnings: Vec<String>,
}

/// Trial budget below which a table is flagged as low confidence.
pub const MIN_CONFIDENT_TRIALS: usize = 1000;

/// Tail fits use the last ten distances on each side.
const TAIL_FIT_SPAN: usize = 10;

impl InterferenceTable {
    /// Table from raw entries; fits the tail law appropriate for `model`.
    pub fn from_entries(model: Model, entries: Vec<TableEntry>) -> Result<Self> {
        let l_max = entries.iter().map(|e| e.l.unsigned_abs() as usize).max().unwrap_or(0);
        let mut entries = entries;
        entries.sort_by_key(|e| e.l);
        let expected: Vec<i64> = (-(l_max as i64)..=l_max as i64).collect();
        if entries.iter().map(|e| e.l).ne(expected.iter().copied()) {
            return Err(Error::Input(
                "table entries must cover every distance in [-l_max, l_max] once".into(),
            ));
        }
        if let Some(e) = entries.iter().find(|e| !(e.value >= 0.0 && e.value.is_finite())) {
            return Err(Error::Numerical(format!("invalid table value at l={}: {}", e.l, e.value)));
        }
        let mut table = InterferenceTable {
            model,
            victim: None,
            aggressor: None,
            sync: None,
            l_max,
            entries,
            trials: 0,
            seed: None,
            measured_symbols: 0,
            symbol_power: 1.0,
            captured_power: None,
            tail: Tail::Disabled,
            warnings: Vec::new(),
        };
        table.tail = table.fit_tail();
        Ok(table)
    }

    /// Fits the tail: `c/l²` for EVM tables, a free power law for PSD tables.
    pub fn fit_tail(&self) -> Tail {
        let fixed = match self.model {
            Model::Evm => Some(2.0),
            Model::Psd => None,
        };
        let (coeff_neg, exponent_neg) = self.fit_side(-1, fixed);
        let (coeff_pos, exponent_pos) = self.fit_side(1, fixed);
        Tail::PowerLaw {
            coeff_neg,
            exponent_neg,
            coeff_pos,
            exponent_pos,
        }
    }

    fn fit_side(&self, sign: i64, fixed_exponent: Option<f64>) -> (f64, f64) {
        let lo = self.l_max.saturating_sub(TAIL_FIT_SPAN - 1).max(1);
        let pts: Vec<(f64, f64)> = (lo..=self.l_max)
            .filter_map(|l| {
                let v = self.entry(sign * l as i64)?.value;
                (v > 0.0).then(|| ((l as f64).ln(), v.ln()))
            })
            .collect();
        if pts.is_empty() {
            return (0.0, fixed_exponent.unwrap_or(2.0));
        }
        let n = pts.len() as f64;
        let exponent = match fixed_exponent {
            Some(e) => e,
            None if pts.len() < 2 => 2.0,
            None => {
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                // Never extrapolate a growing tail.
                (-sxy / sxx).max(0.0)
            }
        };
        let log_c = pts.iter().map(|(lx, ly)| ly + exponent * lx).sum::<f64>() / n;
        (log_c.exp(), exponent)
    }

    pub fn without_extrapolation(mut self) -> Self {
        self.tail = Tail::Disabled;
        self
    }

    pub fn entry(&self, l: i64) -> Option<&TableEntry> {
        if l.unsigned_abs() as usize > self.l_max {
            return None;
        }
        self.entries.get((l + self.l_max as i64) as usize)
    }

    /// `I(l)`, extrapolated past `l_max` according to [`Tail`].
    pub fn value(&self, l: i64) -> Result<f64> {
        if let Some(e) = self.entry(l) {
            return Ok(e.value);
        }
        match self.tail {
            Tail::Disabled => Err(Error::Range(format!(
                "distance {l} beyond table l_max={} and extrapolation is disabled",
                self.l_max
            ))),
            Tail::PowerLaw {
                coeff_neg,
                exponent_neg,
                coeff_pos,
                exponent_pos,
            } => {
                let d = l.unsigned_abs() as f64;
                Ok(if l < 0 {
                    coeff_neg * d.powf(-exponent_neg)
                } else {
                    coeff_pos * d.powf(-exponent_pos)
                })
            }
        }
    }

    pub fn value_db(&self, l: i64) -> Result<f64> {
        self.value(l).map(to_db)
    }

    pub fn label(&self) -> String {
        let agg = self.aggressor.map(|a| a.kind.to_string()).unwrap_or_else(|| "?".into());
        let vic = self
            .victim
            .map(|v| v.kind.to_string())
            .unwrap_or_else(|| "transmit-psd".into());
        format!("{}:{}->{}", self.model, agg, vic)
    }

    /// Writes `l, I_linear, I_db, stderr_db` with `#`-prefixed metadata lines
    /// before the header.
    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "# table: {}", self.label())?;
        writeln!(out, "# trials: {}", self.trials)?;
        if let Some(seed) = self.seed {
            writeln!(out, "# seed: {seed}")?;
        }
        if let Some(sync) = self.sync {
            writeln!(out, "# sync: {sync}")?;
        }
        writeln!(out, "# normalization: unit aggressor symbol power, victim symbol power 1")?;
        for w in &self.warnings {
            writeln!(out, "# warning: {w}")?;
        }
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record(["l", "I_linear", "I_db", "stderr_db"])?;
        for e in &self.entries {
            wtr.write_record([
                e.l.to_string(),
                format!("{:e}", e.value),
                format!("{:.6}", e.db()),
                e.stderr_db().map(|s| format!("{s:.6}")).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Disjoint incumbent and secondary subcarrier sets within a band.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumAllocation {
    pub n_total: usize,
    pub incumbent: BTreeSet<usize>,
    pub secondary: BTreeSet<usize>,
}

impl SpectrumAllocation {
    pub fn new(
        n_total: usize,
        incumbent: impl IntoIterator<Item = usize>,
        secondary: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let incumbent: BTreeSet<usize> = incumbent.into_iter().collect();
        let secondary: BTreeSet<usize> = secondary.into_iter().collect();
        if let Some(&i) = incumbent.iter().chain(secondary.iter()).find(|&&i| i >= n_total) {
            return Err(Error::Input(format!("subcarrier {i} outside band 0..{n_total}")));
        }
        if let Some(i) = incumbent.intersection(&secondary).next() {
            return Err(Error::Input(format!("subcarrier {i} assigned to both users")));
        }
        Ok(SpectrumAllocation {
            n_total,
            incumbent,
            secondary,
        })
    }

    /// Incumbent block `[0, incumbent_width)`, then `guard` empty subcarriers,
    /// then the secondary block.
    pub fn with_guard(incumbent_width: usize, guard: usize, secondary_width: usize) -> Self {
        let start = incumbent_width + guard;
        SpectrumAllocation {
            n_total: start + secondary_width,
            incumbent: (0..incumbent_width).collect(),
            secondary: (start..start + secondary_width).collect(),
        }
    }

    /// Incumbent on `incumbent`, secondary on every other subcarrier.
    pub fn complement(n_total: usize, incumbent: std::ops::Range<usize>) -> Result<Self> {
        let secondary: Vec<usize> = (0..n_total).filter(|i| !incumbent.contains(i)).collect();
        Self::new(n_total, incumbent, secondary)
    }
}

/// Which user of a [`SpectrumAllocation`] is the victim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    SecondaryToIncumbent,
    IncumbentToSecondary,
}

impl Direction {
    fn sets<'a>(&self, alloc: &'a SpectrumAllocation) -> (&'a BTreeSet<usize>, &'a BTreeSet<usize>) {
        match self {
            Direction::SecondaryToIncumbent => (&alloc.incumbent, &alloc.secondary),
            Direction::IncumbentToSecondary => (&alloc.secondary, &alloc.incumbent),
        }
    }
}

/// `I_tot = σ_d² Σ_{m ∈ victim, q ∈ aggressor} I(q - m)`.
pub fn total_interference(
    table: &InterferenceTable,
    alloc: &SpectrumAllocation,
    direction: Direction,
    sigma_d2: f64,
) -> Result<f64> {
    let (victims, _) = direction.sets(alloc);
    let mut total = 0.0;
    for &m in victims {
        total += per_subcarrier_variance(table, alloc, m, direction)?;
    }
    Ok(sigma_d2 * total)
}

/// Variance of the Gaussian approximation of `η_m`, `Σ_{q ∈ aggressor} I(q - m)`.
pub fn per_subcarrier_variance(
    table: &InterferenceTable,
    alloc: &SpectrumAllocation,
    m: usize,
    direction: Direction,
) -> Result<f64> {
    let (_, aggressors) = direction.sets(alloc);
    aggressors
        .iter()
        .map(|&q| table.value(q as i64 - m as i64))
        .sum()
}

/// Timing layout shared by every trial of a table measurement.
///
/// The victim frame has `guard + measured + guard` slots. A slot is one
/// CP-OFDM symbol, or one half-symbol for an OQAM victim. The aggressor burst
/// starts at time zero, at least two pulse lengths before the frame, and runs
/// at least two pulse lengths past it, so every measured window sees a
/// steady-state aggressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasurementPlan {
    pub victim: WaveformSpec,
    pub aggressor: WaveformSpec,
    pub guard_slots: usize,
    pub measured_slots: usize,
    /// Victim frame start for a zero timing offset.
    pub frame_base: usize,
    /// Aggressor pulses (symbols or half-symbols) in the burst.
    pub aggressor_pulses: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MeasurementPlan {
    pub fn new(victim: WaveformSpec, aggressor: WaveformSpec, measured: usize) -> Result<Self> {
        victim.validate()?;
        aggressor.validate()?;
        if victim.subcarriers != aggressor.subcarriers {
            return Err(Error::Config(format!(
                "victim and aggressor must share the subcarrier grid ({} vs {})",
                victim.subcarriers, aggressor.subcarriers
            )));
        }
        if measured == 0 {
            return Err(Error::Config("at least one measured symbol is required".into()));
        }
        let k = victim.overlap.max(aggressor.overlap);
        let guard_slots = match victim.kind {
            WaveformKind::CpOfdm => k,
            WaveformKind::OqamPhydyas => 2 * k,
        };
        let grid = victim.symbol_period() / gcd(victim.symbol_period(), aggressor.pulse_spacing())
            * aggressor.pulse_spacing();
        let lead = 2 * aggressor.pulse_len();
        let frame_base = lead.div_ceil(grid) * grid;
        let mut plan = MeasurementPlan {
            victim,
            aggressor,
            guard_slots,
            measured_slots: measured,
            frame_base,
            aggressor_pulses: 0,
        };
        let frame_end = frame_base + victim.symbol_period() + plan.frame_len();
        plan.aggressor_pulses = (frame_end + lead).div_ceil(aggressor.pulse_spacing()) + 1;
        Ok(plan)
    }

    pub fn total_slots(&self) -> usize {
        self.measured_slots + 2 * self.guard_slots
    }

    pub fn slot_period(&self) -> usize {
        match self.victim.kind {
            WaveformKind::CpOfdm => self.victim.symbol_period(),
            WaveformKind::OqamPhydyas => self.victim.subcarriers / 2,
        }
    }

    /// Span of the victim frame in samples.
    pub fn frame_len(&self) -> usize {
        match self.victim.kind {
            WaveformKind::CpOfdm => self.total_slots() * self.victim.symbol_period(),
            WaveformKind::OqamPhydyas => {
                (self.total_slots() - 1) * self.slot_period() + self.victim.pulse_len()
            }
        }
    }

    /// Range of timing offsets drawn under [`SyncModel::UniformOffset`].
    pub fn offset_period(&self) -> usize {
        self.victim.symbol_period()
    }

    pub fn measured(&self) -> std::ops::Range<usize> {
        self.guard_slots..self.guard_slots + self.measured_slots
    }

    /// First sample of the victim frame for timing offset `tau`.
    pub fn frame_start(&self, tau: usize) -> isize {
        (self.frame_base + tau) as isize
    }

    /// First sample the receiver looks at in `slot` (after CP removal for
    /// CP-OFDM, first tap of the matched filter for OQAM).
    pub fn window_start(&self, tau: usize, slot: usize) -> isize {
        let cp = match self.victim.kind {
            WaveformKind::CpOfdm => self.victim.cp_len,
            WaveformKind::OqamPhydyas => 0,
        };
        self.frame_start(tau) + (slot * self.slot_period() + cp) as isize
    }

    fn draw_offset<R: Rng>(&self, sync: SyncModel, rng: &mut R) -> usize {
        match sync {
            SyncModel::Aligned => 0,
            SyncModel::UniformOffset => rng.gen_range(0..self.offset_period()),
        }
    }
}

/// Demodulates the victim frame described by `plan`, returning `η` per
/// `(slot, bin)` for the measured slots.
fn victim_outputs(
    plan: &MeasurementPlan,
    victim_proto: Option<&PrototypeFilter>,
    buf: &SampleBuffer,
    tau: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let grid = match plan.victim.kind {
        WaveformKind::CpOfdm => {
            cp_ofdm_demodulate(buf, &plan.victim, plan.frame_start(tau), plan.total_slots())?
        }
        WaveformKind::OqamPhydyas => oqam_demodulate(
            buf,
            &plan.victim,
            victim_proto.expect("OQAM victim needs its prototype"),
            plan.frame_start(tau),
            plan.total_slots(),
        )?,
    };
    Ok(plan.measured().map(|n| grid.column(n).to_vec()).collect())
}

/// Victim-side normalization: an OQAM victim rates each real half-symbol
/// against its per-dimension power of one half.
fn victim_scale(victim: &WaveformSpec) -> f64 {
    match victim.kind {
        WaveformKind::CpOfdm => 1.0,
        WaveformKind::OqamPhydyas => 2.0,
    }
}

/// Draws a single-subcarrier aggressor burst for `plan`.
fn aggressor_burst<R: Rng>(
    plan: &MeasurementPlan,
    proto: Option<&PrototypeFilter>,
    subcarrier: usize,
    symbol_power: f64,
    rng: &mut R,
) -> Result<SampleBuffer> {
    let m = plan.aggressor.subcarriers;
    let grid = match plan.aggressor.kind {
        WaveformKind::CpOfdm => {
            SymbolGrid::random_qpsk(m, plan.aggressor_pulses, [subcarrier], symbol_power, rng)?
        }
        WaveformKind::OqamPhydyas => {
            SymbolGrid::random_oqam(m, plan.aggressor_pulses, [subcarrier], symbol_power, rng)?
        }
    };
    modulate(&grid, &plan.aggressor, proto)
}

/// Parameters of [`evm_interference_table`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvmConfig {
    pub l_max: usize,
    pub trials: usize,
    pub sync: SyncModel,
    pub seed: u64,
    /// Steady-state victim slots averaged per trial.
    pub measured_symbols: usize,
    /// Aggressor symbol variance `σ_d²`.
    pub symbol_power: f64,
}

impl Default for EvmConfig {
    fn default() -> Self {
        EvmConfig {
            l_max: 20,
            trials: 2000,
            sync: SyncModel::UniformOffset,
            seed: 1,
            measured_symbols: 8,
            symbol_power: 1.0,
        }
    }
}

const TRIAL_CHUNK: usize = 32;

/// Per-bin sums accumulated over a block of trials.
#[derive(Clone)]
struct BinStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    window_energy: f64,
}

impl BinStats {
    fn new(bins: usize) -> Self {
        BinStats {
            sum: vec![0.0; bins],
            sum_sq: vec![0.0; bins],
            window_energy: 0.0,
        }
    }

    fn merge(mut self, other: &BinStats) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.window_energy += other.window_energy;
        self
    }
}

/// Measures `I(l)` by Monte Carlo simulation of the victim receiver.
///
/// The aggressor occupies subcarrier 0, so victim bin `m` sees distance
/// `l = -m (mod M)`. Each trial contributes the average of `|η_m|²` over the
/// measured symbols; entries are means over trials with their standard errors.
/// Trials run in parallel and are reduced in a fixed order.
pub fn evm_interference_table(
    victim: &WaveformSpec,
    aggressor: &WaveformSpec,
    config: &EvmConfig,
) -> Result<InterferenceTable> {
    let plan = MeasurementPlan::new(*victim, *aggressor, config.measured_symbols)?;
    let m = victim.subcarriers;
    if config.l_max == 0 || config.l_max >= m / 2 {
        return Err(Error::Config(format!(
            "l_max must be in 1..{} for {m} subcarriers, got {}",
            m / 2,
            config.l_max
        )));
    }
    if config.trials < 2 {
        return Err(Error::Config("at least two trials are required".into()));
    }
    if !(config.symbol_power.is_finite() && config.symbol_power > 0.0) {
        return Err(Error::Config(format!("invalid symbol power {}", config.symbol_power)));
    }
    let agg_proto = match aggressor.kind {
        WaveformKind::OqamPhydyas => Some(phydyas_prototype(m, aggressor.overlap)?),
        WaveformKind::CpOfdm => None,
    };
    let vic_proto = match victim.kind {
        WaveformKind::OqamPhydyas => Some(phydyas_prototype(m, victim.overlap)?),
        WaveformKind::CpOfdm => None,
    };
    let scale = victim_scale(victim);
    let measured = config.measured_symbols as f64;

    let run_trial = |trial: usize, stats: &mut BinStats| -> Result<()> {
        let mut rng = trial_rng(config.seed, trial as u64);
        let tau = plan.draw_offset(config.sync, &mut rng);
        let buf = aggressor_burst(&plan, agg_proto.as_ref(), 0, config.symbol_power, &mut rng)?;
        let outputs = victim_outputs(&plan, vic_proto.as_ref(), &buf, tau)?;
        let mut per_bin = vec![0.0; m];
        for slot in &outputs {
            for (acc, eta) in per_bin.iter_mut().zip(slot) {
                *acc += scale * eta.norm_sqr() / measured;
            }
        }
        for (bin, v) in per_bin.iter().enumerate() {
            stats.sum[bin] += v;
            stats.sum_sq[bin] += v * v;
        }
        for slot in plan.measured() {
            let start = plan.window_start(tau, slot);
            let len = match victim.kind {
                WaveformKind::CpOfdm => m,
                WaveformKind::OqamPhydyas => victim.pulse_len(),
            };
            stats.window_energy += buf.window(start, len).iter().map(|s| s.norm_sqr()).sum::<f64>()
                / measured;
        }
        Ok(())
    };

    let chunks: Vec<Result<BinStats>> = (0..config.trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut stats = BinStats::new(m);
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(config.trials) {
                run_trial(trial, &mut stats)?;
            }
            Ok(stats)
        })
        .collect();
    let mut total = BinStats::new(m);
    for chunk in chunks {
        total = total.merge(&chunk?);
    }

    let n = config.trials as f64;
    let entries = (-(config.l_max as i64)..=config.l_max as i64)
        .map(|l| {
            let bin = (-l).rem_euclid(m as i64) as usize;
            let mean = total.sum[bin] / n;
            let var = ((total.sum_sq[bin] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            TableEntry {
                l,
                value: mean,
                stderr: Some((var / n).sqrt()),
            }
        })
        .collect();
    let mut table = InterferenceTable::from_entries(Model::Evm, entries)?;
    table.victim = Some(*victim);
    table.aggressor = Some(*aggressor);
    table.sync = Some(config.sync);
    table.trials = config.trials;
    table.seed = Some(config.seed);
    table.measured_symbols = config.measured_symbols;
    table.symbol_power = config.symbol_power;
    table.captured_power = Some(total.window_energy / n);
    if config.trials < MIN_CONFIDENT_TRIALS {
        table.warnings.push(format!(
            "low confidence: {} trials (< {MIN_CONFIDENT_TRIALS}); see stderr_db",
            config.trials
        ));
    }
    Ok(table)
}

/// Parameters of [`interference_autocorrelation`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationConfig {
    /// Consecutive victim symbols observed per trial (at least `2K`).
    pub symbols: usize,
    pub trials: usize,
    pub seed: u64,
    pub sync: SyncModel,
    /// Distances `-l_max..=l_max` are reported.
    pub l_max: usize,
}

/// Normalized autocorrelation `ρ_l(Δn)` of `η_m[n]` across victim symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub max_lag: usize,
    pub trials: usize,
    /// Victim symbols observed per trial.
    pub symbols: usize,
    /// `(l, [ρ(0), ρ(1), ..., ρ(max_lag)])`.
    pub per_distance: Vec<(i64, Vec<Complex64>)>,
}

impl Autocorrelation {
    pub fn at(&self, l: i64) -> Option<&[Complex64]> {
        self.per_distance.iter().find(|(d, _)| *d == l).map(|(_, r)| r.as_slice())
    }

    /// Three standard deviations of the estimate for a white sequence, using
    /// the pair count of the largest lag.
    pub fn white_band(&self) -> f64 {
        let pairs = self.trials * (self.symbols - self.max_lag);
        3.0 / (pairs as f64).sqrt()
    }
}

/// Interference power below this level (relative to unit symbol power) is
/// floating-point residue, not interference.
const NUMERICAL_ZERO: f64 = 1e-20;

/// Estimates the correlation of the interference between victim symbols.
///
/// `ρ_l(Δn) = mean(η[n+Δn] η*[n]) / mean(|η[n]|²)`, pooled over all trials;
/// `ρ(0) = 1` by construction, and distances with no interference power
/// (numerically zero) report `ρ(Δn) = 0` for `Δn ≥ 1`.
pub fn interference_autocorrelation(
    victim: &WaveformSpec,
    aggressor: &WaveformSpec,
    config: &AutocorrelationConfig,
) -> Result<Autocorrelation> {
    let k = victim.overlap.max(aggressor.overlap);
    if config.symbols < 2 * k {
        return Err(Error::Config(format!(
            "need at least 2K = {} symbols, got {}",
            2 * k,
            config.symbols
        )));
    }
    if config.trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let m = victim.subcarriers;
    if config.l_max >= m / 2 {
        return Err(Error::Config(format!("l_max must be below {}", m / 2)));
    }
    let plan = MeasurementPlan::new(*victim, *aggressor, config.symbols)?;
    let agg_proto = match aggressor.kind {
        WaveformKind::OqamPhydyas => Some(phydyas_prototype(m, aggressor.overlap)?),
        WaveformKind::CpOfdm => None,
    };
    let vic_proto = match victim.kind {
        WaveformKind::OqamPhydyas => Some(phydyas_prototype(m, victim.overlap)?),
        WaveformKind::CpOfdm => None,
    };
    let max_lag = config.symbols / 2;
    let ls: Vec<i64> = (-(config.l_max as i64)..=config.l_max as i64).collect();
    let bins: Vec<usize> = ls.iter().map(|l| (-l).rem_euclid(m as i64) as usize).collect();

    // acc[d][lag]: Σ η[n+lag] η*[n] over trials and n.
    let trial_acc = |trial: usize| -> Result<Vec<Vec<Complex64>>> {
        let mut rng = trial_rng(config.seed, trial as u64);
        let tau = plan.draw_offset(config.sync, &mut rng);
        let buf = aggressor_burst(&plan, agg_proto.as_ref(), 0, 1.0, &mut rng)?;
        let out = victim_outputs(&plan, vic_proto.as_ref(), &buf, tau)?;
        Ok(bins
            .iter()
            .map(|&b| {
                (0..=max_lag)
                    .map(|lag| {
                        (0..out.len() - lag)
                            .map(|n| out[n + lag][b] * out[n][b].conj())
                            .sum::<Complex64>()
                    })
                    .collect()
            })
            .collect())
    };
    let per_trial: Vec<Result<Vec<Vec<Complex64>>>> =
        (0..config.trials).into_par_iter().map(trial_acc).collect();
    let mut acc = vec![vec![Complex64::new(0.0, 0.0); max_lag + 1]; bins.len()];
    for t in per_trial {
        for (a, v) in acc.iter_mut().zip(t?) {
            for (x, y) in a.iter_mut().zip(v) {
                *x += y;
            }
        }
    }
    let n_sym = config.symbols as f64;
    let per_distance = ls
        .iter()
        .zip(acc)
        .map(|(&l, a)| {
            let power = a[0].re / n_sym;
            let rho = (0..=max_lag)
                .map(|lag| {
                    if lag == 0 {
                        Complex64::new(1.0, 0.0)
                    } else if power <= NUMERICAL_ZERO {
                        Complex64::new(0.0, 0.0)
                    } else {
                        a[lag] / (n_sym - lag as f64) / power
                    }
                })
                .collect();
            (l, rho)
        })
        .collect();
    Ok(Autocorrelation {
        max_lag,
        trials: config.trials,
        symbols: config.symbols,
        per_distance,
    })
}
