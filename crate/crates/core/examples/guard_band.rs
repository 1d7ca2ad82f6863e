//! Guard band a 20-subcarrier secondary needs next to a 20-subcarrier
//! incumbent, for a range of per-subcarrier interference limits.

use coexsim::coexistence::{required_guard_band, write_guard_csv, DEFAULT_GUARD_CEILING};
use coexsim::interference::{evm_interference_table, EvmConfig};
use coexsim::psd::{psd_interference_table, subcarrier_psd, PsdConfig};
use coexsim::waveform::WaveformSpec;

fn main() -> coexsim::Result<()> {
    let m = 128;
    let victim = WaveformSpec::cp_ofdm_default(m)?;
    let evm = EvmConfig { l_max: 20, trials: 1000, ..EvmConfig::default() };

    let mut tables = Vec::new();
    for s in [victim, WaveformSpec::oqam(m, 4)?] {
        let psd = subcarrier_psd(&s, &PsdConfig::for_subcarriers(m), 100, 1)?;
        tables.push(psd_interference_table(&psd, evm.l_max)?);
        tables.push(evm_interference_table(&victim, &s, &evm)?);
    }

    let mut results = Vec::new();
    for constraint_db in [-20.0, -30.0, -40.0] {
        for t in &tables {
            results.push(required_guard_band(t, 20, 20, constraint_db, DEFAULT_GUARD_CEILING)?);
        }
    }
    write_guard_csv(&results, std::io::stdout().lock(), &[])
}
