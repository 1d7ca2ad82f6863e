//! Prints the PHYDYAS prototype for a small filter bank and checks the two
//! properties the modulator relies on: unit energy and linear phase.

use coexsim::waveform::{phydyas_coefficients, phydyas_prototype};

fn main() -> coexsim::Result<()> {
    let (m, k) = (16, 4);
    let proto = phydyas_prototype(m, k)?;
    println!("P_k (K={k}): 1, {:?}", phydyas_coefficients(k)?);
    println!("length {} energy {:.12}", proto.len(), proto.energy());

    let n = proto.len();
    let asym = (0..n)
        .map(|i| (proto.taps[i] - proto.taps[n - 1 - i]).abs())
        .fold(0.0, f64::max);
    println!("max |g[k] - g[KM-1-k]| = {asym:.2e}");

    // One symbol period per row.
    for row in proto.taps.chunks(m) {
        let line: Vec<String> = row.iter().map(|t| format!("{t:+.4}")).collect();
        println!("{}", line.join(" "));
    }
    Ok(())
}
