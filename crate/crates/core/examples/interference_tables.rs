//! PSD-based versus EVM-based interference tables for both secondaries, seen
//! by a CP-OFDM incumbent. The PSD model credits OQAM with tens of dB of extra
//! isolation; after the incumbent's FFT most of that advantage is gone.

use coexsim::interference::{evm_interference_table, EvmConfig, SyncModel};
use coexsim::psd::{psd_interference_table, subcarrier_psd, PsdConfig};
use coexsim::waveform::WaveformSpec;

fn main() -> coexsim::Result<()> {
    let m = 64;
    let l_max = 10;
    let victim = WaveformSpec::cp_ofdm_default(m)?;
    let secondaries = [victim, WaveformSpec::oqam(m, 4)?];

    let evm = EvmConfig {
        l_max,
        trials: 1000,
        sync: SyncModel::UniformOffset,
        ..EvmConfig::default()
    };

    let mut tables = Vec::new();
    for s in &secondaries {
        let psd = subcarrier_psd(s, &PsdConfig::for_subcarriers(m), 100, 1)?;
        tables.push(psd_interference_table(&psd, l_max)?);
        tables.push(evm_interference_table(&victim, s, &evm)?);
    }

    print!("{:>3}", "l");
    for t in &tables {
        print!(" {:>16}", t.label());
    }
    println!();
    for l in 0..=l_max as i64 {
        print!("{l:>3}");
        for t in &tables {
            print!(" {:>16.1}", t.value_db(l)?);
        }
        println!();
    }
    Ok(())
}
