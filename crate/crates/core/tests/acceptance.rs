//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Numerology: M = 256, K = 4, CP = M/8, l_max = 20, 2000 Monte Carlo trials.

mod common;

use std::process::Command;
use std::sync::OnceLock;

use coexsim::coexistence::*;
use coexsim::interference::*;
use coexsim::psd::*;
use coexsim::rng::trial_rng;
use coexsim::waveform::*;
use coexsim::{to_db, Result};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};

const M: usize = 256;
const L_MAX: usize = 20;
const TRIALS: usize = 2000;
const SEED: u64 = 1;
const PSD_TRIALS: usize = 200;

fn ofdm() -> WaveformSpec {
    WaveformSpec::cp_ofdm_default(M).unwrap()
}

fn oqam() -> WaveformSpec {
    WaveformSpec::oqam(M, 4).unwrap()
}

fn evm_config(sync: SyncModel) -> EvmConfig {
    EvmConfig {
        l_max: L_MAX,
        trials: TRIALS,
        sync,
        seed: SEED,
        ..EvmConfig::default()
    }
}

struct Tables {
    /// EVM tables at the CP-OFDM receiver: [aggressor][sync].
    evm_ofdm_async: InterferenceTable,
    evm_ofdm_aligned: InterferenceTable,
    evm_oqam_async: InterferenceTable,
    evm_oqam_aligned: InterferenceTable,
    psd_ofdm: InterferenceTable,
    psd_oqam: InterferenceTable,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let evm = |a: &WaveformSpec, s| evm_interference_table(&ofdm(), a, &evm_config(s)).unwrap();
        let cfg = PsdConfig::for_subcarriers(M);
        let psd = |a: &WaveformSpec| psd_interference_table(&subcarrier_psd(a, &cfg, PSD_TRIALS, SEED).unwrap(), L_MAX).unwrap();
        Tables {
            evm_ofdm_async: evm(&ofdm(), SyncModel::UniformOffset),
            evm_ofdm_aligned: evm(&ofdm(), SyncModel::Aligned),
            evm_oqam_async: evm(&oqam(), SyncModel::UniformOffset),
            evm_oqam_aligned: evm(&oqam(), SyncModel::Aligned),
            psd_ofdm: psd(&ofdm()),
            psd_oqam: psd(&oqam()),
        }
    })
}

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Synchronized CP-OFDM users on disjoint random subcarrier sets.
fn orthogonality() -> Outcome {
    let spec = ofdm();
    let mut runner = TestRunner::new(Config {
        cases: 64,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(f64::MIN);
    let strategy = (any::<u64>(), prop::collection::vec(any::<bool>(), M), 1usize..4);
    let result = runner.run(&strategy, |(seed, mask, symbols)| {
        let aggressor: Vec<usize> = (0..M).filter(|&k| mask[k]).collect();
        let victim: Vec<usize> = (0..M).filter(|&k| !mask[k]).collect();
        prop_assume!(!aggressor.is_empty() && !victim.is_empty());
        let mut rng = trial_rng(seed, 0);
        let grid = SymbolGrid::random_qpsk(M, symbols, aggressor, 1.0, &mut rng).unwrap();
        let buf = cp_ofdm_modulate(&grid, &spec).unwrap();
        let out = cp_ofdm_demodulate(&buf, &spec, 0, symbols).unwrap();
        for n in 0..symbols {
            for &k in &victim {
                let db = to_db(out.get(k, n).norm_sqr().max(1e-300));
                worst.set(worst.get().max(db));
                prop_assert!(db < -100.0, "bin {} symbol {}: {} dB", k, n, db);
            }
        }
        Ok(())
    });
    let t = &tables().evm_ofdm_aligned;
    let table_worst = t.entries.iter().filter(|e| e.l != 0).map(|e| to_db(e.value.max(1e-300))).fold(f64::MIN, f64::max);
    let detail = format!(
        "worst disjoint-set leakage {:.1} dB over 64 random allocations; aligned table max {:.1} dB at l != 0",
        worst.get(),
        table_worst
    );
    check(result.is_ok() && table_worst < -100.0, match result {
        Ok(()) => detail,
        Err(e) => format!("{detail}; {e}"),
    })
}

fn oracle_equivalence() -> Outcome {
    let t = tables();
    let ls: Vec<i64> = (-10..=10).collect();
    let mut worst_z: f64 = 0.0;
    let mut failures = Vec::new();
    for (agg, sync, table) in [
        (ofdm(), SyncModel::Aligned, &t.evm_ofdm_aligned),
        (ofdm(), SyncModel::UniformOffset, &t.evm_ofdm_async),
        (oqam(), SyncModel::Aligned, &t.evm_oqam_aligned),
        (oqam(), SyncModel::UniformOffset, &t.evm_oqam_async),
    ] {
        let oracle = common::projection_oracle(&ofdm(), &agg, sync, table.measured_symbols, &ls);
        for (l, want) in ls.iter().zip(&oracle) {
            let e = table.entry(*l).unwrap();
            let se = e.stderr.unwrap();
            let diff = (e.value - want).abs();
            // Rounding floor for entries whose standard error is exactly zero.
            if diff > 3.0 * se + 1e-12 {
                failures.push(format!("{}/{} l={l}: {:e} vs {:e} (se {:e})", agg.kind, sync, e.value, want, se));
            }
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("84 entries within 3 SE (max |z| = {worst_z:.2})")
        } else {
            failures.join("; ")
        },
    )
}

fn model_gap() -> Outcome {
    let t = tables();
    let mut min_gap = f64::MAX;
    let mut max_dev: f64 = 0.0;
    for l in 3..=L_MAX as i64 {
        for d in [l, -l] {
            min_gap = min_gap.min(t.evm_oqam_async.value_db(d).unwrap() - t.psd_oqam.value_db(d).unwrap());
            if l > 4 {
                max_dev = max_dev.max((t.evm_oqam_async.value_db(d).unwrap() - t.evm_ofdm_async.value_db(d).unwrap()).abs());
            }
        }
    }
    check(
        min_gap > 20.0 && max_dev < 5.0,
        format!("min EVM-PSD gap {min_gap:.1} dB (> 20); max |EVM_oqam - EVM_ofdm| at |l|>4 {max_dev:.2} dB (< 5)"),
    )
}

fn truncation() -> Outcome {
    let cfg = PsdConfig::for_subcarriers(M);
    let raw = subcarrier_psd(&oqam(), &cfg, PSD_TRIALS, SEED).unwrap();
    let cut = truncated_psd(&oqam(), &ofdm(), &cfg, PSD_TRIALS, SEED, SyncModel::UniformOffset).unwrap();
    let lift = |f: f64| to_db(cut.smoothed_at(f, 1.0)) - to_db(raw.smoothed_at(f, 1.0));
    let (pos, neg) = (lift(5.0), lift(-5.0));
    check(pos > 25.0 && neg > 25.0, format!("side-lobe rise at +5 dF {pos:.1} dB, at -5 dF {neg:.1} dB (> 25)"))
}

fn guard_bands() -> Outcome {
    let t = tables();
    let g = |table: &InterferenceTable, db: f64| required_guard_band(table, 20, 20, db, DEFAULT_GUARD_CEILING).unwrap().guard;
    let g_ofdm = g(&t.evm_ofdm_async, -50.0);
    let g_oqam = g(&t.evm_oqam_async, -50.0);
    let (Some(a), Some(b)) = (g_ofdm, g_oqam) else {
        return Err(format!("unsatisfiable: cp-ofdm {g_ofdm:?}, oqam {g_oqam:?}"));
    };
    let gain = 100.0 * (a as f64 - b as f64) / a as f64;
    let psd_max = (10..=50)
        .map(|c| g(&t.psd_oqam, -(c as f64)).unwrap_or(usize::MAX))
        .max()
        .unwrap();
    check(
        (366..=448).contains(&a) && (271..=331).contains(&b) && (gain - 26.0).abs() <= 8.0 && psd_max <= 3,
        format!("EVM g: cp-ofdm {a} [366,448], oqam {b} [271,331]; gain {gain:.1}% (26 +/- 8); PSD oqam max g {psd_max} (<= 3) over -10..-50 dB"),
    )
}

fn power_allocation() -> Outcome {
    let t = tables();
    let scenario = CapacityScenario::default();
    let sweep = log_sweep(1e-4, 1.0, 13);
    let curves = secondary_capacity_curve(
        &scenario,
        &[&t.psd_ofdm, &t.psd_oqam, &t.evm_ofdm_async, &t.evm_oqam_async],
        &sweep,
    )
    .unwrap();
    let monotone = curves
        .iter()
        .all(|c| c.points.windows(2).all(|w| w[1].capacity >= w[0].capacity * (1.0 - 1e-9)));
    let psd_ratio = curves[1].points[0].capacity / curves[0].points[0].capacity;
    let evm_dev = curves[2]
        .points
        .iter()
        .zip(&curves[3].points)
        .map(|(a, b)| (b.capacity - a.capacity).abs() / a.capacity.max(b.capacity))
        .fold(0.0, f64::max);
    let mut parts = Vec::new();
    parts.push(format!("(a) monotone: {}", if monotone { "yes" } else { "no" }));
    parts.push(format!("(b) PSD oqam/cp-ofdm at I_th=1e-4: {psd_ratio:.2} (>= 1.5)"));
    parts.push(format!("(c) EVM max relative capacity gap {:.1}% (< 10%)", 100.0 * evm_dev));
    check(monotone && psd_ratio >= 1.5 && evm_dev < 0.10, parts.join("; "))
}

fn coloredness() -> Outcome {
    let run = |agg: WaveformSpec, sync| {
        let cfg = AutocorrelationConfig {
            symbols: 16,
            trials: 400,
            seed: SEED,
            sync,
            l_max: 10,
        };
        interference_autocorrelation(&ofdm(), &agg, &cfg).unwrap()
    };
    let colored = run(oqam(), SyncModel::UniformOffset);
    let rho1 = (1..=10).map(|l| colored.at(l).unwrap()[1].norm()).fold(f64::MAX, f64::min);
    let white = run(ofdm(), SyncModel::Aligned);
    let band = white.white_band();
    let worst = white
        .per_distance
        .iter()
        .flat_map(|(_, r)| r[1..].iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    check(
        rho1 > 0.1 && worst < band,
        format!("OQAM min |rho(1)| over l=1..10 {rho1:.3} (> 0.1); aligned CP-OFDM max |rho| {worst:.4} (< {band:.4})"),
    )
}

fn solver() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let mut worst_kkt: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let gains: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..2.0)).collect();
        let noise: Vec<f64> = (0..4).map(|_| rng.gen_range(0.01..0.5)).collect();
        let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let p_total = 1.0;
        let i_th = rng.gen_range(0.01..0.5) * weights.iter().sum::<f64>() / 4.0;
        let r = allocate_power(&gains, &noise, &weights, p_total, i_th).unwrap();
        worst_kkt = worst_kkt.max(kkt_residual(&r, &gains, &noise, &weights, p_total, i_th));
        let brute = common::grid_search_4(&gains, &noise, &weights, p_total, i_th, 1e-3);
        worst_gap = worst_gap.max((r.capacity - brute).abs() / brute);
    }
    check(
        worst_kkt < 1e-6 && worst_gap < 0.01,
        format!("100 instances: max KKT residual {worst_kkt:.1e} (< 1e-6), max gap to grid search {:.3}% (< 1%)", 100.0 * worst_gap),
    )
}

fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_coexsim");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 5] = [
        &["table", "--seed", "7"],
        &["table", "--model", "psd", "--seed", "7"],
        &["psd", "--truncate", "--seed", "7"],
        &["guardband", "-m", "64", "--seed", "7", "--trials", "500"],
        &["allocate", "-m", "64", "--seed", "7", "--trials", "500"],
    ];
    let mut bytes = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{i}-{rep}.csv"));
            let status = Command::new(bin)
                .args(*args)
                .arg("--out")
                .arg(&out)
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("{args:?} exited with {status}"));
            }
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{args:?}: outputs differ"));
        }
        bytes += outputs[0].len();
    }
    Ok(format!("5 commands run twice, byte-identical ({bytes} bytes each pass)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> Result<()> {
    let criteria: [Criterion; 9] = [
        ("orthogonality baseline", orthogonality),
        ("oracle equivalence", oracle_equivalence),
        ("model gap", model_gap),
        ("truncated PSD", truncation),
        ("guard bands", guard_bands),
        ("power allocation", power_allocation),
        ("coloredness", coloredness),
        ("solver correctness", solver),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {} ({name}): PASS [{secs:.1}s] {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
    Ok(())
}
