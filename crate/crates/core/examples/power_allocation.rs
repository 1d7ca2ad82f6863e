//! Interference-constrained water-filling on a toy channel, then the secondary
//! capacity curve for one EVM table.

use coexsim::coexistence::{
    allocate_power, kkt_residual, log_sweep, secondary_capacity_curve, CapacityScenario,
};
use coexsim::interference::{evm_interference_table, EvmConfig};
use coexsim::waveform::WaveformSpec;

fn main() -> coexsim::Result<()> {
    // Four subcarriers; the ones closest to the incumbent are expensive.
    let gains = [1.0, 0.8, 1.2, 0.5];
    let noise = [0.1; 4];
    let weights = [0.4, 0.1, 0.01, 0.001];
    for i_th in [f64::INFINITY, 0.05, 0.005] {
        let r = allocate_power(&gains, &noise, &weights, 1.0, i_th)?;
        let kkt = kkt_residual(&r, &gains, &noise, &weights, 1.0, i_th);
        println!(
            "I_th={i_th:<6} C={:.4} p={:.3?} binding={:?} kkt={kkt:.1e}",
            r.capacity, r.powers, r.binding
        );
    }

    let m = 64;
    let victim = WaveformSpec::cp_ofdm_default(m)?;
    let oqam = WaveformSpec::oqam(m, 4)?;
    let table = evm_interference_table(&victim, &oqam, &EvmConfig { trials: 1000, ..EvmConfig::default() })?;
    let curves = secondary_capacity_curve(&CapacityScenario::default(), &[&table], &log_sweep(1e-4, 1.0, 5))?;
    for p in &curves[0].points {
        println!("{} I_th={:.0e} C={:.2} bit/s/Hz ({:?})", curves[0].label(), p.i_th, p.capacity, p.binding);
    }
    Ok(())
}
