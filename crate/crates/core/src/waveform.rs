//! CP-OFDM and OFDM/OQAM (PHYDYAS) baseband transceivers.
//!
//! Time is measured in samples with `M` samples per multicarrier symbol
//! period `T`, so one subcarrier spacing is `1/M` cycles per sample. Both
//! waveforms use the unitary DFT convention: a unit-power symbol on one
//! subcarrier yields a per-sample power of `1/M`, and `M` active subcarriers
//! yield unit per-sample power.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multicarrier waveform family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformKind {
    CpOfdm,
    OqamPhydyas,
}

impl WaveformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WaveformKind::CpOfdm => "cp-ofdm",
            WaveformKind::OqamPhydyas => "oqam",
        }
    }
}

impl fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp-ofdm" | "cpofdm" | "ofdm" => Ok(WaveformKind::CpOfdm),
            "oqam" | "oqam-phydyas" | "fbmc" | "phydyas" => Ok(WaveformKind::OqamPhydyas),
            other => Err(Error::Config(format!(
                "unknown waveform `{other}` (expected cp-ofdm or oqam)"
            ))),
        }
    }
}

/// Physical-layer parameters of one user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    /// Number of subcarriers `M` (also the FFT size and samples per `T`).
    pub subcarriers: usize,
    /// Cyclic-prefix length in samples. Always zero for OQAM.
    pub cp_len: usize,
    /// Overlapping factor `K` of the prototype filter. Always one for CP-OFDM.
    pub overlap: usize,
}

/// Overlapping factors with tabulated PHYDYAS coefficients.
pub const SUPPORTED_OVERLAP: [usize; 3] = [2, 3, 4];

fn check_subcarriers(m: usize) -> Result<()> {
    if m < 8 || !m.is_power_of_two() {
        return Err(Error::Config(format!(
            "subcarrier count must be a power of two >= 8, got {m}"
        )));
    }
    Ok(())
}

fn check_overlap(k: usize) -> Result<()> {
    if !SUPPORTED_OVERLAP.contains(&k) {
        return Err(Error::Config(format!(
            "unsupported overlapping factor K={k}; valid values are {SUPPORTED_OVERLAP:?}"
        )));
    }
    Ok(())
}

impl WaveformSpec {
    pub fn cp_ofdm(subcarriers: usize, cp_len: usize) -> Result<Self> {
        let spec = WaveformSpec {
            kind: WaveformKind::CpOfdm,
            subcarriers,
            cp_len,
            overlap: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// CP-OFDM with the default cyclic prefix of `M/8` samples.
    pub fn cp_ofdm_default(subcarriers: usize) -> Result<Self> {
        Self::cp_ofdm(subcarriers, subcarriers / 8)
    }

    pub fn oqam(subcarriers: usize, overlap: usize) -> Result<Self> {
        let spec = WaveformSpec {
            kind: WaveformKind::OqamPhydyas,
            subcarriers,
            cp_len: 0,
            overlap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_subcarriers(self.subcarriers)?;
        match self.kind {
            WaveformKind::CpOfdm => {
                if self.cp_len >= self.subcarriers {
                    return Err(Error::Config(format!(
                        "cyclic prefix ({}) must be shorter than the symbol ({})",
                        self.cp_len, self.subcarriers
                    )));
                }
                if self.overlap != 1 {
                    return Err(Error::Config("CP-OFDM has no overlapping factor".into()));
                }
            }
            WaveformKind::OqamPhydyas => {
                check_overlap(self.overlap)?;
                if self.cp_len != 0 {
                    return Err(Error::Config("OQAM carries no cyclic prefix".into()));
                }
            }
        }
        Ok(())
    }

    /// Samples between the starts of consecutive complex symbols.
    pub fn symbol_period(&self) -> usize {
        match self.kind {
            WaveformKind::CpOfdm => self.subcarriers + self.cp_len,
            WaveformKind::OqamPhydyas => self.subcarriers,
        }
    }

    /// Spacing of the transmit pulse grid: one CP-OFDM symbol, or one OQAM
    /// half-symbol (`M/2`).
    pub fn pulse_spacing(&self) -> usize {
        match self.kind {
            WaveformKind::CpOfdm => self.subcarriers + self.cp_len,
            WaveformKind::OqamPhydyas => self.subcarriers / 2,
        }
    }

    /// Length in samples of a single transmit pulse.
    pub fn pulse_len(&self) -> usize {
        match self.kind {
            WaveformKind::CpOfdm => self.subcarriers + self.cp_len,
            WaveformKind::OqamPhydyas => self.overlap * self.subcarriers,
        }
    }

    pub fn id(&self) -> String {
        match self.kind {
            WaveformKind::CpOfdm => format!("cp-ofdm(M={},cp={})", self.subcarriers, self.cp_len),
            WaveformKind::OqamPhydyas => {
                format!("oqam-phydyas(M={},K={})", self.subcarriers, self.overlap)
            }
        }
    }
}

impl fmt::Display for WaveformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Real, linear-phase prototype filter of length `K·M` with unit energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeFilter {
    pub taps: Vec<f64>,
    /// Factor applied to the raw cosine-sum taps to reach unit energy.
    pub energy_norm: f64,
    pub subcarriers: usize,
    pub overlap: usize,
}

impl PrototypeFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Midpoint of the taps, `(K·M - 1)/2`, used as the phase reference.
    pub fn center(&self) -> f64 {
        (self.taps.len() as f64 - 1.0) / 2.0
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

/// Frequency-domain coefficients `P_1 .. P_{K-1}` of the PHYDYAS filter
/// (`P_0 = 1`).
pub fn phydyas_coefficients(overlap: usize) -> Result<Vec<f64>> {
    check_overlap(overlap)?;
    Ok(match overlap {
        2 => vec![std::f64::consts::FRAC_1_SQRT_2],
        3 => vec![0.911438, 0.411438],
        _ => vec![0.971960, std::f64::consts::FRAC_1_SQRT_2, 0.235147],
    })
}

/// Builds the PHYDYAS prototype for `M` subcarriers and overlapping factor `K`.
///
/// The taps are sampled at half-integer offsets from the filter start so that
/// the sequence of exactly `K·M` samples is symmetric about its midpoint.
pub fn phydyas_prototype(subcarriers: usize, overlap: usize) -> Result<PrototypeFilter> {
    check_subcarriers(subcarriers)?;
    let coeffs = phydyas_coefficients(overlap)?;
    let len = overlap * subcarriers;
    let raw: Vec<f64> = (0..len)
        .map(|k| {
            let x = (k as f64 + 0.5) / len as f64;
            1.0 + coeffs
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let p_idx = (i + 1) as f64;
                    let sign = if (i + 1) % 2 == 1 { -1.0 } else { 1.0 };
                    2.0 * sign * p * (2.0 * PI * p_idx * x).cos()
                })
                .sum::<f64>()
        })
        .collect();
    let energy: f64 = raw.iter().map(|t| t * t).sum();
    let energy_norm = 1.0 / energy.sqrt();
    Ok(PrototypeFilter {
        taps: raw.into_iter().map(|t| t * energy_norm).collect(),
        energy_norm,
        subcarriers,
        overlap,
    })
}

/// Symbols indexed by `(subcarrier, time)`.
///
/// For CP-OFDM the time axis counts complex symbols; for OQAM it counts real
/// half-symbols at twice the symbol rate. Entries outside the active set are
/// always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolGrid {
    subcarriers: usize,
    symbols: usize,
    data: Vec<Complex64>,
    active: BTreeSet<usize>,
    sigma_d2: f64,
}

impl SymbolGrid {
    pub fn new(
        subcarriers: usize,
        symbols: usize,
        active: impl IntoIterator<Item = usize>,
        sigma_d2: f64,
    ) -> Result<Self> {
        let active: BTreeSet<usize> = active.into_iter().collect();
        if let Some(&bad) = active.iter().find(|&&m| m >= subcarriers) {
            return Err(Error::Shape(format!(
                "active subcarrier {bad} outside 0..{subcarriers}"
            )));
        }
        if !(sigma_d2.is_finite() && sigma_d2 >= 0.0) {
            return Err(Error::Input(format!("invalid symbol variance {sigma_d2}")));
        }
        Ok(SymbolGrid {
            subcarriers,
            symbols,
            data: vec![Complex64::new(0.0, 0.0); subcarriers * symbols],
            active,
            sigma_d2,
        })
    }

    /// Grid with every subcarrier active, e.g. receiver output.
    pub fn full(subcarriers: usize, symbols: usize) -> Self {
        Self::new(subcarriers, symbols, 0..subcarriers, 1.0).expect("full grid is valid")
    }

    /// I.i.d. QPSK symbols of power `sigma_d2` on the active subcarriers.
    pub fn random_qpsk<R: Rng + ?Sized>(
        subcarriers: usize,
        symbols: usize,
        active: impl IntoIterator<Item = usize>,
        sigma_d2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut grid = Self::new(subcarriers, symbols, active, sigma_d2)?;
        let amp = (sigma_d2 / 2.0).sqrt();
        let act: Vec<usize> = grid.active.iter().copied().collect();
        for n in 0..symbols {
            for &m in &act {
                let re = if rng.gen::<bool>() { amp } else { -amp };
                let im = if rng.gen::<bool>() { amp } else { -amp };
                grid.data[n * subcarriers + m] = Complex64::new(re, im);
            }
        }
        Ok(grid)
    }

    /// I.i.d. real half-symbols `±sqrt(sigma_d2/2)`: OQAM transport of a QPSK
    /// stream with complex symbol power `sigma_d2`.
    pub fn random_oqam<R: Rng + ?Sized>(
        subcarriers: usize,
        half_symbols: usize,
        active: impl IntoIterator<Item = usize>,
        sigma_d2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut grid = Self::new(subcarriers, half_symbols, active, sigma_d2)?;
        let amp = (sigma_d2 / 2.0).sqrt();
        let act: Vec<usize> = grid.active.iter().copied().collect();
        for n in 0..half_symbols {
            for &m in &act {
                let re = if rng.gen::<bool>() { amp } else { -amp };
                grid.data[n * subcarriers + m] = Complex64::new(re, 0.0);
            }
        }
        Ok(grid)
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    pub fn sigma_d2(&self) -> f64 {
        self.sigma_d2
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[n * self.subcarriers + m]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) -> Result<()> {
        if m >= self.subcarriers || n >= self.symbols {
            return Err(Error::Shape(format!(
                "index ({m}, {n}) outside {}x{} grid",
                self.subcarriers, self.symbols
            )));
        }
        if !self.active.contains(&m) && value != Complex64::new(0.0, 0.0) {
            return Err(Error::Input(format!("subcarrier {m} is not active")));
        }
        self.data[n * self.subcarriers + m] = value;
        Ok(())
    }

    /// All subcarriers of time index `n`.
    pub fn column(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.subcarriers..(n + 1) * self.subcarriers]
    }

    fn column_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.data[n * self.subcarriers..(n + 1) * self.subcarriers]
    }

    /// Multiplies every symbol by `a`; the variance scales by `a²`.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|d| *d *= a);
        out.sigma_d2 *= a * a;
        out
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|d| d.im == 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|d| d.norm_sqr()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.data.iter()
    }
}

/// Complex baseband samples with the index of time zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<Complex64>,
    origin: usize,
}

impl SampleBuffer {
    pub fn new(samples: Vec<Complex64>, origin: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("sample buffer is empty".into()));
        }
        if origin > samples.len() {
            return Err(Error::Input(format!(
                "origin {origin} beyond buffer of {} samples",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Input("sample buffer contains non-finite values".into()));
        }
        Ok(SampleBuffer { samples, origin })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], 0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample at time `t` relative to the origin; zero outside the buffer.
    pub fn at(&self, t: isize) -> Complex64 {
        let idx = t + self.origin as isize;
        if idx < 0 || idx as usize >= self.samples.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[idx as usize]
        }
    }

    /// Copies `len` samples starting at time `start`, zero-padding outside.
    pub fn window(&self, start: isize, len: usize) -> Vec<Complex64> {
        (0..len as isize).map(|k| self.at(start + k)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.samples.len() as f64
    }

    pub fn scaled(&self, a: f64) -> Self {
        SampleBuffer {
            samples: self.samples.iter().map(|s| s * a).collect(),
            origin: self.origin,
        }
    }

    /// Sample-wise sum; the result spans the union of both extents.
    pub fn superpose(&self, other: &SampleBuffer) -> SampleBuffer {
        let start = -(self.origin.max(other.origin) as isize);
        let end = ((self.samples.len() - self.origin) as isize)
            .max((other.samples.len() - other.origin) as isize);
        let samples = (start..end).map(|t| self.at(t) + other.at(t)).collect();
        SampleBuffer {
            samples,
            origin: (-start) as usize,
        }
    }
}

fn check_grid(grid: &SymbolGrid, spec: &WaveformSpec, kind: WaveformKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "{} modulator called with a {} spec",
            kind,
            spec.kind
        )));
    }
    if grid.subcarriers() != spec.subcarriers {
        return Err(Error::Shape(format!(
            "grid has {} subcarriers, waveform expects {}",
            grid.subcarriers(),
            spec.subcarriers
        )));
    }
    if grid.symbols() == 0 {
        return Err(Error::Shape("grid has no symbols".into()));
    }
    Ok(())
}

/// CP-OFDM synthesis: unitary inverse DFT per symbol, then the last `cp_len`
/// samples are prepended. Sample 0 is the first CP sample of symbol 0.
pub fn cp_ofdm_modulate(grid: &SymbolGrid, spec: &WaveformSpec) -> Result<SampleBuffer> {
    check_grid(grid, spec, WaveformKind::CpOfdm)?;
    let m = spec.subcarriers;
    let cp = spec.cp_len;
    let scale = 1.0 / (m as f64).sqrt();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(m);
    let mut out = Vec::with_capacity(grid.symbols() * (m + cp));
    let mut body = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..grid.symbols() {
        body.copy_from_slice(grid.column(n));
        ifft.process(&mut body);
        body.iter_mut().for_each(|s| *s *= scale);
        out.extend_from_slice(&body[m - cp..]);
        out.extend_from_slice(&body);
    }
    SampleBuffer::new(out, 0)
}

/// CP-OFDM reception: for each symbol, skip `cp_len` samples starting at
/// `window_start + n·(M + cp_len)` and apply a unitary DFT to the next `M`
/// samples. Nothing outside those windows influences the output; samples
/// beyond the buffer count as zero.
pub fn cp_ofdm_demodulate(
    buf: &SampleBuffer,
    spec: &WaveformSpec,
    window_start: isize,
    n_symbols: usize,
) -> Result<SymbolGrid> {
    spec.validate()?;
    if spec.kind != WaveformKind::CpOfdm {
        return Err(Error::Config("CP-OFDM demodulator needs a CP-OFDM spec".into()));
    }
    let m = spec.subcarriers;
    let period = spec.symbol_period() as isize;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let scale = 1.0 / (m as f64).sqrt();
    let mut grid = SymbolGrid::full(m, n_symbols);
    for n in 0..n_symbols {
        let start = window_start + n as isize * period + spec.cp_len as isize;
        let col = grid.column_mut(n);
        for (k, c) in col.iter_mut().enumerate() {
            *c = buf.at(start + k as isize);
        }
        fft.process(col);
        col.iter_mut().for_each(|s| *s *= scale);
    }
    Ok(grid)
}

/// Phase applied to half-symbol `n` on subcarrier `m`, `j^(m+n)`.
fn oqam_phase(m: usize, n: usize) -> Complex64 {
    match (m + n) % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn check_proto(spec: &WaveformSpec, proto: &PrototypeFilter) -> Result<()> {
    if proto.len() != spec.overlap * spec.subcarriers {
        return Err(Error::Shape(format!(
            "prototype has {} taps, waveform expects K·M = {}",
            proto.len(),
            spec.overlap * spec.subcarriers
        )));
    }
    Ok(())
}

/// OFDM/OQAM synthesis.
///
/// Half-symbol `n` on subcarrier `m` is transmitted on the pulse
/// `j^(m+n) g[k - nM/2] exp(j2π m (k - nM/2 - c)/M)`, where `c` is the
/// prototype midpoint. Output length is `(N-1)·M/2 + K·M` for `N` half-symbols.
pub fn oqam_modulate(
    grid: &SymbolGrid,
    spec: &WaveformSpec,
    proto: &PrototypeFilter,
) -> Result<SampleBuffer> {
    check_grid(grid, spec, WaveformKind::OqamPhydyas)?;
    check_proto(spec, proto)?;
    if !grid.is_real() {
        return Err(Error::Input(
            "OQAM carries real half-symbols; grid has complex entries".into(),
        ));
    }
    let m = spec.subcarriers;
    let half = m / 2;
    let len = proto.len();
    let center = proto.center();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(m);
    let n_half = grid.symbols();
    let mut out = vec![Complex64::new(0.0, 0.0); (n_half - 1) * half + len];
    let center_phase: Vec<Complex64> = (0..m)
        .map(|sc| Complex64::from_polar(1.0, -2.0 * PI * sc as f64 * center / m as f64))
        .collect();
    let active: Vec<usize> = grid.active().iter().copied().collect();
    let mut block = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..n_half {
        let col = grid.column(n);
        block.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        let mut any = false;
        for &sc in &active {
            let a = col[sc].re;
            if a != 0.0 {
                block[sc] = oqam_phase(sc, n) * center_phase[sc] * a;
                any = true;
            }
        }
        if !any {
            continue;
        }
        ifft.process(&mut block);
        let base = n * half;
        for (k, g) in proto.taps.iter().enumerate() {
            out[base + k] += block[k % m] * *g;
        }
    }
    SampleBuffer::new(out, 0)
}

/// OFDM/OQAM matched-filter analysis bank.
///
/// Correlates the buffer with every pulse of [`oqam_modulate`] whose first
/// sample sits at `start + n·M/2`, `n = 0..n_half`, and returns the real part
/// after removing `j^(m+n)`.
pub fn oqam_demodulate(
    buf: &SampleBuffer,
    spec: &WaveformSpec,
    proto: &PrototypeFilter,
    start: isize,
    n_half: usize,
) -> Result<SymbolGrid> {
    spec.validate()?;
    if spec.kind != WaveformKind::OqamPhydyas {
        return Err(Error::Config("OQAM demodulator needs an OQAM spec".into()));
    }
    check_proto(spec, proto)?;
    let m = spec.subcarriers;
    let half = (m / 2) as isize;
    let center = proto.center();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let center_phase: Vec<Complex64> = (0..m)
        .map(|sc| Complex64::from_polar(1.0, 2.0 * PI * sc as f64 * center / m as f64))
        .collect();
    let mut grid = SymbolGrid::full(m, n_half);
    let mut folded = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..n_half {
        folded.iter_mut().for_each(|f| *f = Complex64::new(0.0, 0.0));
        let base = start + n as isize * half;
        for (k, g) in proto.taps.iter().enumerate() {
            folded[k % m] += buf.at(base + k as isize) * *g;
        }
        fft.process(&mut folded);
        let col = grid.column_mut(n);
        for sc in 0..m {
            let v = folded[sc] * center_phase[sc] * oqam_phase(sc, n).conj();
            col[sc] = Complex64::new(v.re, 0.0);
        }
    }
    Ok(grid)
}

/// Modulates `grid` with the transmitter matching `spec`.
pub fn modulate(
    grid: &SymbolGrid,
    spec: &WaveformSpec,
    proto: Option<&PrototypeFilter>,
) -> Result<SampleBuffer> {
    match spec.kind {
        WaveformKind::CpOfdm => cp_ofdm_modulate(grid, spec),
        WaveformKind::OqamPhydyas => {
            let owned;
            let proto = match proto {
                Some(p) => p,
                None => {
                    owned = phydyas_prototype(spec.subcarriers, spec.overlap)?;
                    &owned
                }
            };
            oqam_modulate(grid, spec, proto)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn prototype_length_and_symmetry() {
        let p = phydyas_prototype(64, 4).unwrap();
        assert_eq!(p.taps.len(), 256);
        let n = p.taps.len();
        let asym = (0..n)
            .map(|k| (p.taps[k] - p.taps[n - 1 - k]).abs())
            .fold(0.0, f64::max);
        assert!(asym < 1e-12, "asymmetry {asym}");
        assert!((p.energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prototype_uses_tabulated_coefficients() {
        let coeffs = phydyas_coefficients(4).unwrap();
        assert_eq!(coeffs[0], 0.971960);
        assert_eq!(coeffs[2], 0.235147);
        // Raw peak value 1 + 2ΣP_p is reached at the midpoint.
        let p = phydyas_prototype(64, 4).unwrap();
        let peak = p.taps.iter().cloned().fold(f64::MIN, f64::max) / p.energy_norm;
        let expected = 1.0 + 2.0 * coeffs.iter().sum::<f64>();
        assert!((peak - expected).abs() < 1e-3);
        // The filter vanishes at both ends.
        assert!(p.taps[0].abs() < 1e-3 * p.taps[128]);
    }

    #[test]
    fn unsupported_overlap_names_valid_set() {
        let err = phydyas_prototype(64, 5).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("[2, 3, 4]"), "{msg}");
        assert!(WaveformSpec::oqam(64, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(WaveformSpec::cp_ofdm(48, 4).is_err());
        assert!(WaveformSpec::cp_ofdm(4, 0).is_err());
        assert!(WaveformSpec::cp_ofdm(64, 64).is_err());
        assert_eq!(WaveformSpec::cp_ofdm_default(64).unwrap().cp_len, 8);
        assert_eq!(WaveformSpec::oqam(64, 4).unwrap().pulse_len(), 256);
    }

    #[test]
    fn dc_subcarrier_is_constant() {
        let spec = WaveformSpec::cp_ofdm(64, 0).unwrap();
        let mut grid = SymbolGrid::new(64, 1, [0], 1.0).unwrap();
        grid.set(0, 0, c(1.0, 0.0)).unwrap();
        let buf = cp_ofdm_modulate(&grid, &spec).unwrap();
        assert_eq!(buf.len(), 64);
        for s in buf.samples() {
            assert!((s - c(0.125, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_prefix_copies_tail() {
        let spec = WaveformSpec::cp_ofdm(64, 16).unwrap();
        let mut rng = trial_rng(1, 0);
        let grid = SymbolGrid::random_qpsk(64, 1, 0..64, 1.0, &mut rng).unwrap();
        let buf = cp_ofdm_modulate(&grid, &spec).unwrap();
        assert_eq!(buf.len(), 80);
        let s = buf.samples();
        for k in 0..16 {
            assert_eq!(s[k], s[64 + k]);
        }
    }

    #[test]
    fn cp_ofdm_round_trip() {
        let spec = WaveformSpec::cp_ofdm_default(64).unwrap();
        let mut rng = trial_rng(2, 0);
        let grid = SymbolGrid::random_qpsk(64, 5, 0..64, 1.0, &mut rng).unwrap();
        let buf = cp_ofdm_modulate(&grid, &spec).unwrap();
        let out = cp_ofdm_demodulate(&buf, &spec, 0, 5).unwrap();
        for (a, b) in grid.iter().zip(out.iter()) {
            assert!((a - b).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn zero_buffer_demodulates_to_zero() {
        let spec = WaveformSpec::cp_ofdm_default(64).unwrap();
        let buf = SampleBuffer::zeros(500).unwrap();
        let out = cp_ofdm_demodulate(&buf, &spec, 0, 4).unwrap();
        assert_eq!(out.energy(), 0.0);
        let ospec = WaveformSpec::oqam(64, 4).unwrap();
        let proto = phydyas_prototype(64, 4).unwrap();
        let out = oqam_demodulate(&buf, &ospec, &proto, 0, 4).unwrap();
        assert_eq!(out.energy(), 0.0);
    }

    #[test]
    fn grid_dimension_mismatch_is_shape_error() {
        let spec = WaveformSpec::cp_ofdm_default(64).unwrap();
        let grid = SymbolGrid::new(32, 1, [0], 1.0).unwrap();
        assert!(matches!(cp_ofdm_modulate(&grid, &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn oqam_rejects_complex_entries() {
        let spec = WaveformSpec::oqam(64, 4).unwrap();
        let proto = phydyas_prototype(64, 4).unwrap();
        let mut grid = SymbolGrid::new(64, 2, [3], 1.0).unwrap();
        grid.set(3, 1, c(0.5, 0.5)).unwrap();
        assert!(matches!(oqam_modulate(&grid, &spec, &proto), Err(Error::Input(_))));
    }

    #[test]
    fn oqam_single_pulse_is_modulated_prototype() {
        let spec = WaveformSpec::oqam(64, 4).unwrap();
        let proto = phydyas_prototype(64, 4).unwrap();
        let mut grid = SymbolGrid::new(64, 1, [5], 1.0).unwrap();
        grid.set(5, 0, c(1.0, 0.0)).unwrap();
        let buf = oqam_modulate(&grid, &spec, &proto).unwrap();
        assert_eq!(buf.len(), 256);
        let center = proto.center();
        for (k, s) in buf.samples().iter().enumerate() {
            let expected = oqam_phase(5, 0)
                * Complex64::from_polar(proto.taps[k], 2.0 * PI * 5.0 * (k as f64 - center) / 64.0);
            assert!((s - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn oqam_round_trip_near_perfect() {
        let spec = WaveformSpec::oqam(64, 4).unwrap();
        let proto = phydyas_prototype(64, 4).unwrap();
        let mut rng = trial_rng(3, 0);
        let n_half = 40;
        let grid = SymbolGrid::random_oqam(64, n_half, 0..64, 1.0, &mut rng).unwrap();
        let buf = oqam_modulate(&grid, &spec, &proto).unwrap();
        let out = oqam_demodulate(&buf, &spec, &proto, 0, n_half).unwrap();
        let mut err = 0.0;
        let mut count = 0.0;
        // Interior half-symbols only: the burst edges lack neighbours, which
        // does not affect reconstruction but keeps the comparison uniform.
        for n in 8..n_half - 8 {
            for m in 0..64 {
                err += (grid.get(m, n) - out.get(m, n)).norm_sqr();
                count += 1.0;
            }
        }
        let err_db = crate::to_db(err / count / 0.5);
        assert!(err_db < -50.0, "reconstruction error {err_db} dB");
    }

    #[test]
    fn superpose_aligns_on_origin() {
        let a = SampleBuffer::new(vec![c(1.0, 0.0); 4], 0).unwrap();
        let b = SampleBuffer::new(vec![c(0.0, 1.0); 4], 2).unwrap();
        let s = a.superpose(&b);
        assert_eq!(s.origin(), 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s.at(-2), c(0.0, 1.0));
        assert_eq!(s.at(0), c(1.0, 1.0));
        assert_eq!(s.at(3), c(1.0, 0.0));
    }
}
