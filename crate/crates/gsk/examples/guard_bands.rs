//! Calibrates the two-level consensus quantizer for two initial-error
//! targets across the SNR grid and prints the accepted band, the mismatch
//! it achieves, and how much of the raw sample stream survives.

use gsk::consensus::calibrate_guard_bands;

fn main() {
    println!(
        "{:>7} {:>9} {:>9} {:>14} {:>10}",
        "snr_db", "target", "guard_q", "achieved", "kept"
    );
    for &target in &[1e-1, 1e-2] {
        for &snr_db in &[10.0, 15.0, 20.0, 25.0, 30.0] {
            match calibrate_guard_bands(target, snr_db, None, 4, 50_000, 2024) {
                Ok(cal) => println!(
                    "{snr_db:>7} {target:>9.0e} {:>9.2} {:>14.5} {:>9.2}%",
                    cal.quantizer.q_plus(),
                    cal.achieved_mismatch,
                    100.0 * cal.consensus_fraction
                ),
                Err(e) => println!("{snr_db:>7} {target:>9.0e} {e}"),
            }
        }
        println!();
    }
}
