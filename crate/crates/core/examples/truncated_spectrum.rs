//! Transmit PSD of one OQAM subcarrier versus the spectrum a CP-OFDM receiver
//! actually sees after cutting `M`-sample windows out of it.
//!
//! The steep PHYDYAS roll-off disappears once the signal is truncated: the
//! rectangular receive window spreads energy back into far subcarriers.
//!
//! ```text
//! cargo run --release --example truncated_spectrum -- [out.csv]
//! ```

use coexsim::interference::SyncModel;
use coexsim::psd::{subcarrier_psd, truncated_psd, PsdConfig};
use coexsim::to_db;
use coexsim::waveform::WaveformSpec;

fn main() -> coexsim::Result<()> {
    let m = 64;
    let oqam = WaveformSpec::oqam(m, 4)?;
    let ofdm = WaveformSpec::cp_ofdm_default(m)?;
    let cfg = PsdConfig::for_subcarriers(m);

    let raw = subcarrier_psd(&oqam, &cfg, 100, 1)?;
    let cut = truncated_psd(&oqam, &ofdm, &cfg, 100, 1, SyncModel::UniformOffset)?;

    println!("{:>6} {:>12} {:>12}", "f/dF", "raw dB", "truncated dB");
    for f in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0] {
        println!(
            "{f:>6.1} {:>12.1} {:>12.1}",
            to_db(raw.smoothed_at(f, 1.0)),
            to_db(cut.smoothed_at(f, 1.0))
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        cut.write_csv(std::fs::File::create(&path)?, &[])?;
        println!("wrote {path}");
    }
    Ok(())
}
