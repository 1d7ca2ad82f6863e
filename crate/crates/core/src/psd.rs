//! Averaged-periodogram PSD estimation and the transmit-PSD interference model.
//!
//! Densities are expressed per unit subcarrier spacing: for a buffer with `M`
//! samples per symbol period, `∫ Φ(f) df` over the band equals `M` times the
//! mean per-sample power. A single unit-power subcarrier therefore integrates
//! to one, matching the unit-symbol-power normalization of the tables.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::interference::{InterferenceTable, Model, SyncModel, TableEntry};
use crate::rng::trial_rng;
use crate::waveform::{modulate, phydyas_prototype, SampleBuffer, SymbolGrid, WaveformKind, WaveformSpec};
use crate::{to_db, Error, Result};

/// Segment taper applied before each periodogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    Rectangular,
    Hann,
    /// 4-term Blackman-Harris, ~92 dB side lobes.
    BlackmanHarris,
}

impl Taper {
    pub fn as_str(self) -> &'static str {
        match self {
            Taper::Rectangular => "rectangular",
            Taper::Hann => "hann",
            Taper::BlackmanHarris => "blackman-harris",
        }
    }

    fn coefficients(self, len: usize) -> Vec<f64> {
        let n = len as f64;
        (0..len)
            .map(|k| {
                let x = 2.0 * PI * k as f64 / n;
                match self {
                    Taper::Rectangular => 1.0,
                    Taper::Hann => 0.5 - 0.5 * x.cos(),
                    Taper::BlackmanHarris => {
                        0.35875 - 0.48829 * x.cos() + 0.14128 * (2.0 * x).cos()
                            - 0.01168 * (3.0 * x).cos()
                    }
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Taper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Taper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Taper::Rectangular),
            "hann" => Ok(Taper::Hann),
            "blackman-harris" | "bh" => Ok(Taper::BlackmanHarris),
            _ => Err(Error::Config(format!(
                "unknown taper '{s}' (expected rectangular, hann or blackman-harris)"
            ))),
        }
    }
}

/// Estimator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdConfig {
    /// Samples per symbol period, fixing the frequency unit.
    pub subcarriers: usize,
    pub segment_len: usize,
    pub overlap_frac: f64,
    /// Upper bound on averaged segments per buffer; `None` uses all of them.
    pub max_segments: Option<usize>,
    pub taper: Taper,
}

impl PsdConfig {
    /// Blackman-Harris segments of `16·M` samples (`4·K·M` for `K = 4`) with
    /// 50% overlap, giving a resolution of `ΔF/16`.
    pub fn for_subcarriers(subcarriers: usize) -> Self {
        PsdConfig {
            subcarriers,
            segment_len: 16 * subcarriers,
            overlap_frac: 0.5,
            max_segments: None,
            taper: Taper::BlackmanHarris,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdMeta {
    pub config: PsdConfig,
    /// Segments averaged per trial.
    pub segments: usize,
    pub trials: usize,
    pub seed: Option<u64>,
    /// Signal the estimate describes, when generated internally.
    pub source: Option<WaveformSpec>,
    /// Receiver whose windows truncated the signal, if any.
    pub truncated_by: Option<WaveformSpec>,
    pub sync: Option<SyncModel>,
}

/// Power spectral density on an ascending grid `[-M/2, M/2)` in units of ΔF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: PsdMeta,
}

impl PsdEstimate {
    /// Grid spacing in units of ΔF.
    pub fn resolution(&self) -> f64 {
        self.meta.config.subcarriers as f64 / self.meta.config.segment_len as f64
    }

    /// Rectangle-rule integral over the whole (periodic) grid.
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution()
    }

    /// Index of the grid point closest to `f`.
    pub fn index_of(&self, f: f64) -> usize {
        let i = ((f - self.freqs[0]) / self.resolution()).round();
        (i.max(0.0) as usize).min(self.freqs.len() - 1)
    }

    pub fn value_at(&self, f: f64) -> f64 {
        self.values[self.index_of(f)]
    }

    /// Mean density over `[f - width/2, f + width/2]`.
    pub fn smoothed_at(&self, f: f64, width: f64) -> f64 {
        let lo = self.index_of(f - width / 2.0);
        let hi = self.index_of(f + width / 2.0);
        self.values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    }

    pub fn peak_freq(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        self.freqs[i]
    }

    /// Writes `freq_over_dF, psd_linear, psd_db` with `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let c = &self.meta.config;
        writeln!(
            out,
            "# estimator: averaged periodogram, taper={}, segment_len={}, overlap={}, segments={}, trials={}",
            c.taper, c.segment_len, c.overlap_frac, self.meta.segments, self.meta.trials
        )?;
        writeln!(out, "# normalization: integral over f/dF equals power in unit-symbol subcarriers")?;
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record(["freq_over_dF", "psd_linear", "psd_db"])?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            wtr.write_record([format!("{f}"), format!("{v:e}"), format!("{:.6}", to_db(*v))])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn validate_config(config: &PsdConfig) -> Result<()> {
    if config.segment_len == 0 || config.subcarriers == 0 {
        return Err(Error::Config("segment length and subcarrier count must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.overlap_frac) {
        return Err(Error::Config(format!(
            "overlap fraction must be in [0, 1), got {}",
            config.overlap_frac
        )));
    }
    Ok(())
}

/// Averaged periodogram of one buffer: the raw segment-averaged density in
/// cycles/sample units, FFT order, plus the number of segments used.
fn periodogram(samples: &[Complex64], config: &PsdConfig) -> Result<(Vec<f64>, usize)> {
    let n = config.segment_len;
    if samples.len() < n {
        return Err(Error::Input(format!(
            "buffer of {} samples is shorter than one segment ({n})",
            samples.len()
        )));
    }
    let hop = ((n as f64) * (1.0 - config.overlap_frac)).round().max(1.0) as usize;
    let mut count = (samples.len() - n) / hop + 1;
    if let Some(max) = config.max_segments {
        count = count.min(max.max(1));
    }
    let taper = config.taper.coefficients(n);
    let u: f64 = taper.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut seg = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..count {
        let start = s * hop;
        for (k, out) in seg.iter_mut().enumerate() {
            *out = samples[start + k] * taper[k];
        }
        fft.process(&mut seg);
        for (a, x) in acc.iter_mut().zip(&seg) {
            *a += x.norm_sqr();
        }
    }
    let norm = 1.0 / (u * count as f64);
    acc.iter_mut().for_each(|a| *a *= norm);
    Ok((acc, count))
}

/// Rearranges FFT-ordered densities onto the ascending ΔF grid.
fn to_estimate(raw: Vec<f64>, config: &PsdConfig, segments: usize, trials: usize) -> PsdEstimate {
    let n = raw.len();
    let res = config.subcarriers as f64 / n as f64;
    let half = n / 2;
    let mut freqs = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let bin = (i + n - half) % n;
        freqs.push((i as f64 - half as f64) * res);
        values.push(raw[bin]);
    }
    PsdEstimate {
        freqs,
        values,
        meta: PsdMeta {
            config: *config,
            segments,
            trials,
            seed: None,
            source: None,
            truncated_by: None,
            sync: None,
        },
    }
}

/// Averaged-periodogram estimate of the buffer's PSD.
pub fn estimate_psd(buf: &SampleBuffer, config: &PsdConfig) -> Result<PsdEstimate> {
    validate_config(config)?;
    let (raw, segments) = periodogram(buf.samples(), config)?;
    Ok(to_estimate(raw, config, segments, 1))
}

/// Averages per-trial estimates of the sequences produced by `make`.
fn averaged_estimate<F>(config: &PsdConfig, trials: usize, make: F) -> Result<PsdEstimate>
where
    F: Fn(usize) -> Result<Vec<Complex64>> + Sync,
{
    validate_config(config)?;
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let parts: Vec<Result<(Vec<f64>, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| periodogram(&make(t)?, config))
        .collect();
    let mut acc = vec![0.0; config.segment_len];
    let mut segments = 0;
    for p in parts {
        let (raw, count) = p?;
        for (a, r) in acc.iter_mut().zip(raw) {
            *a += r;
        }
        segments = count;
    }
    acc.iter_mut().for_each(|a| *a /= trials as f64);
    Ok(to_estimate(acc, config, segments, trials))
}

/// Segments per trial used by [`subcarrier_psd`] and [`truncated_psd`].
pub const SEGMENTS_PER_TRIAL: usize = 8;

struct Burst {
    buf: SampleBuffer,
    /// First steady-state sample.
    start: usize,
}

/// Random single-subcarrier burst (subcarrier 0, unit symbol power) whose
/// steady-state part spans at least `needed` samples.
fn single_subcarrier_burst(spec: &WaveformSpec, needed: usize, seed: u64, trial: usize) -> Result<Burst> {
    let mut rng = trial_rng(seed, trial as u64);
    let m = spec.subcarriers;
    let edge = spec.pulse_len();
    let pulses = (needed + 2 * edge).div_ceil(spec.pulse_spacing()) + 1;
    let grid = match spec.kind {
        WaveformKind::CpOfdm => SymbolGrid::random_qpsk(m, pulses, [0], 1.0, &mut rng)?,
        WaveformKind::OqamPhydyas => SymbolGrid::random_oqam(m, pulses, [0], 1.0, &mut rng)?,
    };
    let proto = match spec.kind {
        WaveformKind::OqamPhydyas => Some(phydyas_prototype(m, spec.overlap)?),
        WaveformKind::CpOfdm => None,
    };
    let buf = modulate(&grid, spec, proto.as_ref())?;
    Ok(Burst { buf, start: edge })
}

fn steady_len(config: &PsdConfig) -> usize {
    let hop = ((config.segment_len as f64) * (1.0 - config.overlap_frac)).round().max(1.0) as usize;
    config.segment_len + (SEGMENTS_PER_TRIAL - 1) * hop
}

/// PSD of one active unit-power aggressor subcarrier centred at `f = 0`,
/// estimated on the steady-state part of `trials` random bursts.
pub fn subcarrier_psd(spec: &WaveformSpec, config: &PsdConfig, trials: usize, seed: u64) -> Result<PsdEstimate> {
    spec.validate()?;
    let needed = steady_len(config);
    let mut est = averaged_estimate(config, trials, |t| {
        let burst = single_subcarrier_burst(spec, needed, seed, t)?;
        Ok(burst.buf.samples()[burst.start..burst.start + needed].to_vec())
    })?;
    est.meta.seed = Some(seed);
    est.meta.source = Some(*spec);
    Ok(est)
}

/// PSD of a single aggressor subcarrier after the victim's CP-OFDM receive
/// windowing: the `M`-sample windows the victim feeds to its FFT are cut out
/// of the aggressor signal and concatenated before estimation.
pub fn truncated_psd(
    aggressor: &WaveformSpec,
    victim: &WaveformSpec,
    config: &PsdConfig,
    trials: usize,
    seed: u64,
    sync: SyncModel,
) -> Result<PsdEstimate> {
    aggressor.validate()?;
    victim.validate()?;
    if victim.kind != WaveformKind::CpOfdm {
        return Err(Error::Config("truncation is defined for CP-OFDM victims".into()));
    }
    if victim.subcarriers != aggressor.subcarriers {
        return Err(Error::Config("victim and aggressor must share the subcarrier grid".into()));
    }
    let m = victim.subcarriers;
    let period = victim.symbol_period();
    let needed = steady_len(config);
    let windows = needed.div_ceil(m);
    // Room for the offset and the victim's cyclic prefixes.
    let span = (windows + 3) * period;
    let mut est = averaged_estimate(config, trials, |t| {
        let burst = single_subcarrier_burst(aggressor, span, seed, t)?;
        // The offset stream is separate from the symbol stream of the trial.
        let tau = match sync {
            SyncModel::Aligned => 0,
            SyncModel::UniformOffset => {
                use rand::Rng;
                trial_rng(seed ^ 0x5eed_0ff5e7, t as u64).gen_range(0..period)
            }
        };
        // Align the victim frame to the aggressor's pulse grid when synchronized.
        let grid = aggressor.pulse_spacing();
        let base = burst.start.div_ceil(grid) * grid + tau;
        let mut out = Vec::with_capacity(windows * m);
        for w in 0..windows {
            let start = (base + w * period + victim.cp_len) as isize;
            out.extend(burst.buf.window(start - burst.buf.origin() as isize, m));
        }
        out.truncate(needed);
        Ok(out)
    })?;
    est.meta.seed = Some(seed);
    est.meta.source = Some(*aggressor);
    est.meta.truncated_by = Some(*victim);
    est.meta.sync = Some(sync);
    Ok(est)
}

/// Band power `∫_{c-1/2}^{c+1/2} Φ(f) df` by the trapezoidal rule, summing
/// mirrored samples pairwise so symmetric inputs give bit-identical results
/// for `c` and `-c`.
fn band_power(psd: &PsdEstimate, center_idx: usize, half_bins: usize) -> f64 {
    let v = &psd.values;
    let mut acc = 0.0;
    for j in (1..=half_bins).rev() {
        let w = if j == half_bins { 0.5 } else { 1.0 };
        acc += w * (v[center_idx + j] + v[center_idx - j]);
    }
    (acc + v[center_idx]) * psd.resolution()
}

/// Transmit-PSD interference table: `I_PSD(l) = ∫_{l-1/2}^{l+1/2} Φ(f) df`
/// for `l ∈ [-l_max, l_max]`, where `Φ` is the PSD of one aggressor subcarrier
/// centred at zero.
pub fn psd_interference_table(psd: &PsdEstimate, l_max: usize) -> Result<InterferenceTable> {
    let m = psd.meta.config.subcarriers;
    let n = psd.meta.config.segment_len;
    if !n.is_multiple_of(2 * m) {
        return Err(Error::Range(format!(
            "grid resolution ΔF·{m}/{n} does not place samples on subcarrier band edges"
        )));
    }
    let bins_per_df = n / m;
    let half_bins = bins_per_df / 2;
    if (l_max as f64 + 0.5) > (m as f64 / 2.0) - psd.resolution() {
        return Err(Error::Range(format!(
            "PSD covers |f| < {}·ΔF, table up to l_max={l_max} needs ±{}·ΔF",
            m / 2,
            l_max as f64 + 0.5
        )));
    }
    let zero = n / 2;
    let entries = (-(l_max as i64)..=l_max as i64)
        .map(|l| {
            let center = (zero as i64 + l * bins_per_df as i64) as usize;
            TableEntry {
                l,
                value: band_power(psd, center, half_bins),
                stderr: None,
            }
        })
        .collect();
    let mut table = InterferenceTable::from_entries(Model::Psd, entries)?;
    table.aggressor = psd.meta.source;
    table.victim = psd.meta.truncated_by;
    table.sync = psd.meta.sync;
    table.trials = psd.meta.trials;
    table.seed = psd.meta.seed;
    Ok(table)
}
