//! Correlation of the interference across consecutive incumbent symbols.
//!
//! OQAM overlaps `K` symbol periods, so its interference is colored; CP-OFDM
//! aggressors are white under a fixed offset because each FFT window sees a
//! single, independent symbol pair.

use coexsim::interference::{interference_autocorrelation, AutocorrelationConfig, SyncModel};
use coexsim::waveform::WaveformSpec;

fn main() -> coexsim::Result<()> {
    let m = 64;
    let victim = WaveformSpec::cp_ofdm_default(m)?;
    for aggressor in [victim, WaveformSpec::oqam(m, 4)?] {
        let ac = interference_autocorrelation(
            &victim,
            &aggressor,
            &AutocorrelationConfig { symbols: 16, trials: 400, seed: 3, sync: SyncModel::Aligned, l_max: 3 },
        )?;
        println!("{} (white band ±{:.3})", aggressor.kind, ac.white_band());
        for l in 1..=3 {
            let rho: Vec<String> = ac.at(l).unwrap().iter().take(5).map(|z| format!("{:.3}", z.norm())).collect();
            println!("  l={l}  |rho| = {}", rho.join(" "));
        }
    }
    Ok(())
}
