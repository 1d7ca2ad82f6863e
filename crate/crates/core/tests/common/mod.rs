//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the crate's modulators, estimators or solvers; the
//! formulas are written out directly so the tests compare two separate
//! implementations.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

use coexsim::interference::{MeasurementPlan, SyncModel};
use coexsim::waveform::{WaveformKind, WaveformSpec};
use num_complex::Complex64;

/// PHYDYAS taps from the tabulated frequency coefficients, unit energy.
pub fn phydyas_taps(m: usize, k: usize) -> Vec<f64> {
    let coeffs: &[f64] = match k {
        2 => &[std::f64::consts::FRAC_1_SQRT_2],
        3 => &[0.911438, 0.411438],
        4 => &[0.971960, std::f64::consts::FRAC_1_SQRT_2, 0.235147],
        _ => panic!("unsupported overlap {k}"),
    };
    let len = k * m;
    let raw: Vec<f64> = (0..len)
        .map(|i| {
            let mut h = 1.0;
            for (p, c) in coeffs.iter().enumerate() {
                let p = p as f64 + 1.0;
                h += 2.0 * (-1f64).powf(p) * c * (2.0 * PI * p * (i as f64 + 0.5) / len as f64).cos();
            }
            h
        })
        .collect();
    let e = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.into_iter().map(|x| x / e).collect()
}

fn j_pow(n: i64) -> Complex64 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][n.rem_euclid(4) as usize]
}

/// One aggressor pulse on subcarrier 0: support start (absolute sample),
/// samples, and the variance of the symbol it carries.
struct Pulse {
    start: i64,
    samples: Vec<Complex64>,
    variance: f64,
    real_symbol: bool,
}

fn aggressor_pulse(spec: &WaveformSpec, taps: &[f64], p: i64) -> Pulse {
    let m = spec.subcarriers;
    match spec.kind {
        WaveformKind::CpOfdm => Pulse {
            start: p * (m + spec.cp_len) as i64,
            samples: vec![Complex64::new(1.0 / (m as f64).sqrt(), 0.0); m + spec.cp_len],
            variance: 1.0,
            real_symbol: false,
        },
        WaveformKind::OqamPhydyas => Pulse {
            start: p * (m / 2) as i64,
            samples: taps.iter().map(|g| j_pow(p) * *g).collect(),
            variance: 0.5,
            real_symbol: true,
        },
    }
}

/// Receive filter of victim bin `bin` for a window whose first sample is
/// `start`; the demodulated value is `Σ r[t] conj(filter[t - start])`.
fn victim_filter(spec: &WaveformSpec, taps: &[f64], bin: usize, slot: usize) -> Vec<Complex64> {
    let m = spec.subcarriers;
    match spec.kind {
        WaveformKind::CpOfdm => (0..m)
            .map(|k| Complex64::from_polar(1.0 / (m as f64).sqrt(), 2.0 * PI * (bin * k) as f64 / m as f64))
            .collect(),
        WaveformKind::OqamPhydyas => {
            let c = (taps.len() as f64 - 1.0) / 2.0;
            taps.iter()
                .enumerate()
                .map(|(k, g)| {
                    j_pow((bin + slot) as i64)
                        * Complex64::from_polar(*g, 2.0 * PI * bin as f64 * (k as f64 - c) / m as f64)
                })
                .collect()
        }
    }
}

/// `E|η|²` at each distance in `ls`, from summed squared projections of every
/// aggressor pulse onto the victim's receive filters, averaged over every
/// timing offset the sync model allows and over the measured slots.
///
/// Uses the same frame geometry as the Monte Carlo measurement. A CP-OFDM
/// victim takes `|η|²`; an OQAM victim takes `2·(Re η)²`.
pub fn projection_oracle(
    victim: &WaveformSpec,
    aggressor: &WaveformSpec,
    sync: SyncModel,
    measured: usize,
    ls: &[i64],
) -> Vec<f64> {
    let m = victim.subcarriers;
    let plan = MeasurementPlan::new(*victim, *aggressor, measured).unwrap();
    let taps = |s: &WaveformSpec| match s.kind {
        WaveformKind::OqamPhydyas => phydyas_taps(m, s.overlap),
        WaveformKind::CpOfdm => Vec::new(),
    };
    let agg_taps = taps(aggressor);
    let vic_taps = taps(victim);
    let offsets: Vec<usize> = match sync {
        SyncModel::Aligned => vec![0],
        SyncModel::UniformOffset => (0..victim.symbol_period()).collect(),
    };
    let pulse_len = aggressor.pulse_len() as i64;
    let spacing = aggressor.pulse_spacing() as i64;
    let mut out = Vec::with_capacity(ls.len());
    for &l in ls {
        let bin = (-l).rem_euclid(m as i64) as usize;
        let mut acc = 0.0;
        for slot in plan.measured() {
            let filter = victim_filter(victim, &vic_taps, bin, slot);
            let flen = filter.len() as i64;
            for &tau in &offsets {
                let w = plan.window_start(tau, slot) as i64;
                let p_lo = (w - pulse_len).div_euclid(spacing);
                let p_hi = (w + flen).div_euclid(spacing) + 1;
                for p in p_lo..=p_hi {
                    let pulse = aggressor_pulse(aggressor, &agg_taps, p);
                    let mut c = Complex64::new(0.0, 0.0);
                    for (i, f) in filter.iter().enumerate() {
                        let t = w + i as i64 - pulse.start;
                        if t >= 0 && (t as usize) < pulse.samples.len() {
                            c += pulse.samples[t as usize] * f.conj();
                        }
                    }
                    acc += match victim.kind {
                        WaveformKind::CpOfdm => pulse.variance * c.norm_sqr(),
                        WaveformKind::OqamPhydyas if pulse.real_symbol => 2.0 * pulse.variance * c.re * c.re,
                        // Circular complex symbol: E[Re(d c)²] = σ²|c|²/2.
                        WaveformKind::OqamPhydyas => pulse.variance * c.norm_sqr(),
                    };
                }
            }
        }
        out.push(acc / (offsets.len() * measured) as f64);
    }
    out
}

/// Analytic density of one unit-power CP-OFDM subcarrier at `f` (units of
/// ΔF): rectangular pulse of `M + cp` samples and amplitude `1/√M`.
pub fn cp_ofdm_density(m: usize, cp: usize, f: f64) -> f64 {
    let l = (m + cp) as f64;
    let nu = f / m as f64;
    let s = (PI * nu).sin();
    let dirichlet2 = if s.abs() < 1e-15 { l * l } else { ((PI * nu * l).sin() / s).powi(2) };
    dirichlet2 / (m as f64 * l)
}

/// Analytic density of one unit-power OQAM subcarrier: `|G(ν)|²/M` with `G`
/// the DTFT of the unit-energy prototype.
pub fn oqam_density(taps: &[f64], m: usize, f: f64) -> f64 {
    let nu = f / m as f64;
    let g: Complex64 = taps
        .iter()
        .enumerate()
        .map(|(k, h)| Complex64::from_polar(*h, -2.0 * PI * nu * k as f64))
        .sum();
    g.norm_sqr() / m as f64
}

/// Simpson integral of `density` over `[a, b]`.
pub fn integrate(density: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let n = steps + steps % 2;
    let h = (b - a) / n as f64;
    let mut s = density(a) + density(b);
    for i in 1..n {
        s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn capacity(gains: &[f64], noise: &[f64], p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, pk)| (1.0 + pk * gains[k] / noise[k]).log2())
        .sum()
}

/// Grid search for four subcarriers. Three powers run over a lattice of
/// resolution `step·P_total`; the objective increases in every power, so the
/// fourth takes the largest value both constraints leave. Each of the four
/// subcarriers takes the continuous role in turn, so an optimum with a single
/// interference-limited subcarrier is not rounded down to the lattice. A
/// coarse pass over the simplex is refined by a full-resolution pass around
/// its best point.
pub fn grid_search_4(gains: &[f64], noise: &[f64], weights: &[f64], p_total: f64, i_th: f64, step: f64) -> f64 {
    assert_eq!(gains.len(), 4);
    let mut overall = f64::MIN;
    for free in 0..4 {
        let fixed: Vec<usize> = (0..4).filter(|&k| k != free).collect();
        let eval = |p: [f64; 3]| -> Option<f64> {
            let spent: f64 = p.iter().sum();
            let used: f64 = p.iter().zip(&fixed).map(|(x, &k)| x * weights[k]).sum();
            if spent > p_total + 1e-12 || used > i_th * (1.0 + 1e-12) {
                return None;
            }
            let room = if weights[free] > 0.0 { (i_th - used) / weights[free] } else { f64::INFINITY };
            let mut all = [0.0; 4];
            for (x, &k) in p.iter().zip(&fixed) {
                all[k] = *x;
            }
            all[free] = (p_total - spent).min(room).max(0.0);
            Some(capacity(gains, noise, &all))
        };
        let search = |lo: [f64; 3], hi: [f64; 3], h: f64| -> (f64, [f64; 3]) {
            let mut best = (f64::MIN, [0.0; 3]);
            let n = |i: usize| ((hi[i] - lo[i]) / h).round() as usize;
            for a in 0..=n(0) {
                for b in 0..=n(1) {
                    for c in 0..=n(2) {
                        let p = [lo[0] + a as f64 * h, lo[1] + b as f64 * h, lo[2] + c as f64 * h];
                        if let Some(v) = eval(p) {
                            if v > best.0 {
                                best = (v, p);
                            }
                        }
                    }
                }
            }
            best
        };
        let h = step * p_total;
        let coarse = 20.0 * h;
        let (_, centre) = search([0.0; 3], [p_total; 3], coarse);
        // Snap the refinement window to the fine lattice.
        let lo = centre.map(|c| ((c - coarse).max(0.0) / h).round() * h);
        let hi = centre.map(|c| ((c + coarse).min(p_total) / h).round() * h);
        overall = overall.max(search(lo, hi, h).0);
    }
    overall
}

/// Lagrangian dual `max_{p ≥ 0} L(p, λ, μ)`, each coordinate maximized by
/// golden-section search on its concave one-dimensional term.
pub fn dual_bound(gains: &[f64], noise: &[f64], weights: &[f64], p_total: f64, i_th: f64, lambda: f64, mu: f64) -> f64 {
    let mut total = lambda * p_total + if i_th.is_finite() { mu * i_th } else { 0.0 };
    for k in 0..gains.len() {
        let price = lambda + mu * weights[k];
        let term = |p: f64| (1.0 + p * gains[k] / noise[k]).log2() - price * p;
        // The maximizer cannot exceed the level 1/(ln2·price).
        let mut hi = 1.0 / (LN_2 * price);
        let mut lo = 0.0;
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if term(a) < term(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        total += term(0.5 * (lo + hi)).max(term(0.0));
    }
    total
}
