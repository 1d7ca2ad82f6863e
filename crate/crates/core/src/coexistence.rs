//! Guard-band sizing and interference-constrained power allocation.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::interference::{total_interference, Direction, InterferenceTable, Model, SpectrumAllocation};
use crate::waveform::WaveformSpec;
use crate::{from_db, to_db, Error, Result};

/// Smallest guard meeting an interference constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardBandResult {
    pub constraint_db: f64,
    /// `None` when the constraint cannot be met below `ceiling`.
    pub guard: Option<usize>,
    pub ceiling: usize,
    pub model: Model,
    pub secondary: Option<WaveformSpec>,
    pub incumbent_width: usize,
    pub secondary_width: usize,
    /// Interference level reached at `guard`, in dB.
    pub interference_db: Option<f64>,
}

impl GuardBandResult {
    pub fn is_satisfiable(&self) -> bool {
        self.guard.is_some()
    }
}

/// Interference per incumbent subcarrier, relative to its unit symbol power,
/// with `guard` empty subcarriers between the two blocks.
pub fn guard_interference(
    table: &InterferenceTable,
    incumbent_width: usize,
    secondary_width: usize,
    guard: usize,
) -> Result<f64> {
    let alloc = SpectrumAllocation::with_guard(incumbent_width, guard, secondary_width);
    Ok(total_interference(table, &alloc, Direction::SecondaryToIncumbent, 1.0)? / incumbent_width as f64)
}

/// Default upper bound on the guard-band search.
pub const DEFAULT_GUARD_CEILING: usize = 10_000;

/// Smallest `g ≥ 0` such that the incumbent block suffers at most
/// `constraint_db` of interference per subcarrier.
///
/// The incumbent occupies `[0, incumbent_width)` and the secondary the
/// `secondary_width` subcarriers after the guard. Interference is
/// non-increasing in `g`, so an exponential search brackets the answer and a
/// binary search pins it.
pub fn required_guard_band(
    table: &InterferenceTable,
    incumbent_width: usize,
    secondary_width: usize,
    constraint_db: f64,
    ceiling: usize,
) -> Result<GuardBandResult> {
    if incumbent_width == 0 || secondary_width == 0 {
        return Err(Error::Config("both blocks need at least one subcarrier".into()));
    }
    if !constraint_db.is_finite() {
        return Err(Error::Config(format!("invalid constraint {constraint_db} dB")));
    }
    let limit = from_db(constraint_db);
    let level = |g: usize| guard_interference(table, incumbent_width, secondary_width, g);
    let mut result = GuardBandResult {
        constraint_db,
        guard: None,
        ceiling,
        model: table.model,
        secondary: table.aggressor,
        incumbent_width,
        secondary_width,
        interference_db: None,
    };

    let found = if level(0)? <= limit {
        Some(0)
    } else {
        // `lo` always violates, `hi` satisfies once the bracket exists.
        let mut lo = 0;
        let mut hi = 1;
        loop {
            if hi >= ceiling {
                hi = ceiling;
                break;
            }
            if level(hi)? <= limit {
                break;
            }
            lo = hi;
            hi *= 2;
        }
        if level(hi)? > limit {
            None
        } else {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if level(mid)? <= limit {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    if let Some(g) = found {
        result.guard = Some(g);
        result.interference_db = Some(to_db(level(g)?));
    }
    Ok(result)
}

/// Which constraints hold with equality at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    TotalPower,
    Interference,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocationResult {
    /// Transmit power per secondary subcarrier (W).
    pub powers: Vec<f64>,
    /// `Σ log2(1 + p_k g_k / σ_k²)` in bit/s/Hz.
    pub capacity: f64,
    pub binding: Binding,
    /// Multiplier of the total-power constraint.
    pub lambda: f64,
    /// Multiplier of the interference constraint.
    pub mu: f64,
    pub power_sum: f64,
    /// `Σ w_k p_k`.
    pub interference: f64,
}

/// Inputs of the two-constraint water-filling problem.
#[derive(Clone, Copy, Debug)]
pub struct PowerProblem<'a> {
    pub gains: &'a [f64],
    pub noise: &'a [f64],
    pub weights: &'a [f64],
    pub p_total: f64,
    pub i_th: f64,
}

const BISECTION_STEPS: usize = 60;

impl PowerProblem<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 {
            return Err(Error::Input("no subcarriers to allocate".into()));
        }
        if self.noise.len() != n || self.weights.len() != n {
            return Err(Error::Shape(format!(
                "gains ({n}), noise ({}) and weights ({}) must have the same length",
                self.noise.len(),
                self.weights.len()
            )));
        }
        if self.gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Input("channel gains must be positive".into()));
        }
        if self.noise.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Input("noise powers must be positive".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("interference weights must be non-negative".into()));
        }
        if !(self.p_total.is_finite() && self.p_total > 0.0) {
            return Err(Error::Input(format!("total power must be positive, got {}", self.p_total)));
        }
        if self.i_th.is_nan() || self.i_th <= 0.0 {
            return Err(Error::Input(format!("interference threshold must be positive, got {}", self.i_th)));
        }
        Ok(())
    }

    /// Power on subcarrier `k` for multipliers `(λ, μ)`:
    /// `[1/(ln2 (λ + μ w_k)) - σ_k²/g_k]⁺`.
    fn power(&self, k: usize, lambda: f64, mu: f64) -> f64 {
        let price = lambda + mu * self.weights[k];
        if price <= 0.0 {
            return f64::INFINITY;
        }
        (1.0 / (std::f64::consts::LN_2 * price) - self.noise[k] / self.gains[k]).max(0.0)
    }

    fn powers(&self, lambda: f64, mu: f64) -> Vec<f64> {
        (0..self.gains.len()).map(|k| self.power(k, lambda, mu)).collect()
    }

    fn power_sum(&self, lambda: f64, mu: f64) -> f64 {
        (0..self.gains.len()).map(|k| self.power(k, lambda, mu)).sum()
    }

    fn interference(&self, powers: &[f64]) -> f64 {
        powers
            .iter()
            .zip(self.weights)
            .map(|(p, w)| if *w == 0.0 { 0.0 } else { p * w })
            .sum()
    }

    pub fn capacity(&self, powers: &[f64]) -> f64 {
        powers
            .iter()
            .enumerate()
            .map(|(k, p)| (1.0 + p * self.gains[k] / self.noise[k]).log2())
            .sum()
    }

    /// Smallest `λ ≥ 0` keeping the total power within budget for fixed `μ`.
    fn power_multiplier(&self, mu: f64) -> f64 {
        if self.power_sum(0.0, mu) <= self.p_total {
            return 0.0;
        }
        let over = |lambda: f64| self.power_sum(lambda, mu) > self.p_total;
        bracket_and_bisect(over)
    }

    /// Total interference at the optimum of the power-only subproblem for `μ`.
    fn interference_at(&self, mu: f64) -> f64 {
        let lambda = self.power_multiplier(mu);
        self.interference(&self.powers(lambda, mu))
    }
}

/// Finds the boundary of a monotone predicate `violates(x)` (true below the
/// boundary, false above) on `x > 0`: doubling/halving from one until the
/// predicate flips, then bisection. Returns the satisfying endpoint.
fn bracket_and_bisect(violates: impl Fn(f64) -> bool) -> f64 {
    let mut hi = 1.0;
    let mut lo;
    if violates(hi) {
        lo = hi;
        while violates(hi) {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        lo = hi / 2.0;
        while !violates(lo) && lo > f64::MIN_POSITIVE {
            hi = lo;
            lo /= 2.0;
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if violates(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Maximizes `Σ log2(1 + p_k g_k/σ_k²)` subject to `Σ p_k ≤ P_total`,
/// `Σ w_k p_k ≤ I_th` and `p_k ≥ 0`.
///
/// The optimum has water-filling form with price `λ + μ w_k`. The power
/// multiplier `λ(μ)` is found by bisection for each `μ`, and `μ` itself by an
/// outer bisection on the interference constraint. `i_th` may be infinite.
pub fn allocate_power(
    gains: &[f64],
    noise: &[f64],
    weights: &[f64],
    p_total: f64,
    i_th: f64,
) -> Result<PowerAllocationResult> {
    let problem = PowerProblem {
        gains,
        noise,
        weights,
        p_total,
        i_th,
    };
    problem.validate()?;

    let tolerance = 1e-9;
    let mut mu = 0.0;
    let mut lambda = problem.power_multiplier(0.0);
    let unconstrained = problem.powers(lambda, 0.0);
    if problem.interference(&unconstrained) > i_th {
        mu = bracket_and_bisect(|mu| problem.interference_at(mu) > i_th);
        lambda = problem.power_multiplier(mu);
    }
    let powers = problem.powers(lambda, mu);
    if powers.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("water-filling produced non-finite powers".into()));
    }
    let power_sum: f64 = powers.iter().sum();
    let interference = problem.interference(&powers);
    let power_tight = lambda > 0.0 || (p_total - power_sum).abs() <= tolerance * p_total;
    let interference_tight = mu > 0.0;
    let binding = match (power_tight, interference_tight) {
        (true, true) => Binding::Both,
        (false, true) => Binding::Interference,
        _ => Binding::TotalPower,
    };
    Ok(PowerAllocationResult {
        capacity: problem.capacity(&powers),
        powers,
        binding,
        lambda,
        mu,
        power_sum,
        interference,
    })
}

/// Largest relative violation of the KKT conditions by `result`.
///
/// Covers stationarity on active subcarriers, the `p_k = 0` optimality
/// condition, primal feasibility and complementary slackness.
pub fn kkt_residual(
    result: &PowerAllocationResult,
    gains: &[f64],
    noise: &[f64],
    weights: &[f64],
    p_total: f64,
    i_th: f64,
) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let mut worst: f64 = 0.0;
    for (k, &p) in result.powers.iter().enumerate() {
        let price = result.lambda + result.mu * weights[k];
        let marginal = gains[k] / ((noise[k] + p * gains[k]) * ln2);
        let r = if p > 0.0 {
            (marginal - price).abs() / price.max(marginal)
        } else {
            ((marginal - price) / marginal).max(0.0)
        };
        worst = worst.max(r);
        worst = worst.max((-p).max(0.0));
    }
    worst = worst.max(((result.power_sum - p_total) / p_total).max(0.0));
    if i_th.is_finite() {
        worst = worst.max(((result.interference - i_th) / i_th).max(0.0));
        if result.mu > 0.0 {
            worst = worst.max(((i_th - result.interference) / i_th).abs());
        }
    }
    if result.lambda > 0.0 {
        worst = worst.max(((p_total - result.power_sum) / p_total).abs());
    }
    worst
}

/// The two-sided allocation scenario: incumbent in the middle of the band,
/// secondary on both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityScenario {
    pub n_total: usize,
    pub incumbent: Range<usize>,
    pub p_total: f64,
    /// Per-subcarrier SNR when `p_total` is spread evenly over the secondary.
    pub snr_db: f64,
    pub gain: f64,
}

impl Default for CapacityScenario {
    fn default() -> Self {
        CapacityScenario {
            n_total: 60,
            incumbent: 20..40,
            p_total: 1.0,
            snr_db: 10.0,
            gain: 1.0,
        }
    }
}

impl CapacityScenario {
    pub fn allocation(&self) -> Result<SpectrumAllocation> {
        SpectrumAllocation::complement(self.n_total, self.incumbent.clone())
    }

    pub fn noise_power(&self) -> f64 {
        let n_sec = self.n_total - self.incumbent.len();
        self.p_total / n_sec as f64 * self.gain / from_db(self.snr_db)
    }
}

/// Interference injected onto the whole incumbent block per unit power on
/// each secondary subcarrier.
pub fn interference_weights(table: &InterferenceTable, alloc: &SpectrumAllocation) -> Result<Vec<f64>> {
    alloc
        .secondary
        .iter()
        .map(|&k| {
            let single = SpectrumAllocation::new(alloc.n_total, alloc.incumbent.iter().copied(), [k])?;
            total_interference(table, &single, Direction::SecondaryToIncumbent, 1.0)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub i_th: f64,
    pub capacity: f64,
    pub power_sum: f64,
    pub interference: f64,
    pub binding: Binding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityCurve {
    pub model: Model,
    pub secondary: Option<WaveformSpec>,
    pub points: Vec<CapacityPoint>,
}

impl CapacityCurve {
    pub fn label(&self) -> String {
        let s = self.secondary.map(|s| s.kind.to_string()).unwrap_or_else(|| "?".into());
        format!("{s}/{}", self.model)
    }
}

/// Secondary capacity versus tolerated interference, one curve per table.
pub fn secondary_capacity_curve(
    scenario: &CapacityScenario,
    tables: &[&InterferenceTable],
    i_th: &[f64],
) -> Result<Vec<CapacityCurve>> {
    let alloc = scenario.allocation()?;
    let n = alloc.secondary.len();
    let gains = vec![scenario.gain; n];
    let noise = vec![scenario.noise_power(); n];
    tables
        .iter()
        .map(|table| {
            let weights = interference_weights(table, &alloc)?;
            let points = i_th
                .iter()
                .map(|&th| {
                    let r = allocate_power(&gains, &noise, &weights, scenario.p_total, th)?;
                    Ok(CapacityPoint {
                        i_th: th,
                        capacity: r.capacity,
                        power_sum: r.power_sum,
                        interference: r.interference,
                        binding: r.binding,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CapacityCurve {
                model: table.model,
                secondary: table.aggressor,
                points,
            })
        })
        .collect()
}

/// Logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_sweep(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

pub fn write_guard_csv<W: Write>(
    results: &[GuardBandResult],
    mut out: W,
    metadata: &[(String, String)],
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "# interference_db: per incumbent subcarrier, relative to its symbol power")?;
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    wtr.write_record(["constraint_db", "secondary", "model", "guard", "interference_db"])?;
    for r in results {
        wtr.write_record([
            format!("{}", r.constraint_db),
            r.secondary.map(|s| s.kind.to_string()).unwrap_or_default(),
            r.model.to_string(),
            r.guard.map(|g| g.to_string()).unwrap_or_else(|| "unsatisfiable".into()),
            r.interference_db.map(|d| format!("{d:.6}")).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_capacity_csv<W: Write>(
    curves: &[CapacityCurve],
    mut out: W,
    metadata: &[(String, String)],
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    wtr.write_record(["i_th", "secondary", "model", "capacity", "power_sum", "interference", "binding"])?;
    for c in curves {
        let s = c.secondary.map(|s| s.kind.to_string()).unwrap_or_default();
        for p in &c.points {
            wtr.write_record([
                format!("{:e}", p.i_th),
                s.clone(),
                c.model.to_string(),
                format!("{:.9}", p.capacity),
                format!("{:.12}", p.power_sum),
                format!("{:e}", p.interference),
                serde_json::to_value(p.binding)?.as_str().unwrap_or_default().to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
