//! Modulate and demodulate random data with both waveforms and report the
//! reconstruction error. OQAM is only orthogonal in the real domain, so the
//! demodulator keeps the real part after undoing the `j^(m+n)` phase.

use coexsim::rng::trial_rng;
use coexsim::waveform::*;
use coexsim::to_db;

fn error_db(sent: &SymbolGrid, got: &SymbolGrid) -> f64 {
    let err: f64 = sent.iter().zip(got.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    to_db(err / sent.energy())
}

fn main() -> coexsim::Result<()> {
    let m = 64;
    let mut rng = trial_rng(7, 0);

    let ofdm = WaveformSpec::cp_ofdm_default(m)?;
    let tx = SymbolGrid::random_qpsk(m, 10, 0..m, 1.0, &mut rng)?;
    let buf = cp_ofdm_modulate(&tx, &ofdm)?;
    let rx = cp_ofdm_demodulate(&buf, &ofdm, 0, 10)?;
    println!("cp-ofdm  M={m} cp={}  error {:.1} dB", ofdm.cp_len, error_db(&tx, &rx));

    let oqam = WaveformSpec::oqam(m, 4)?;
    let proto = phydyas_prototype(m, 4)?;
    let tx = SymbolGrid::random_oqam(m, 40, 0..m, 1.0, &mut rng)?;
    let buf = oqam_modulate(&tx, &oqam, &proto)?;
    let rx = oqam_demodulate(&buf, &oqam, &proto, 0, 40)?;
    // PHYDYAS is nearly, not exactly, perfect reconstruction.
    println!("oqam     M={m} K=4       error {:.1} dB", error_db(&tx, &rx));
    Ok(())
}
