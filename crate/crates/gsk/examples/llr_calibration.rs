//! Checks that computed LLRs mean what they claim, for both node roles:
//! samples are binned by predicted LLR, and within each bin the empirical
//! log-odds of node-1's bit should land near the mean prediction.
//!
//! Bins whose predicted odds are steeper than the sample count can resolve
//! (the clamped tails) cannot estimate log-odds at all; for those the
//! check degrades to counting wrong bits, which the prediction says
//! should be absent.

use gsk::harness::{reciprocal_llr_stream, v_decoding_llr_stream, BitLlr};
use gsk::{ExperimentConfig, GuardBandQuantizer};

fn report(role: &str, stream: &[BitLlr]) {
    println!("{role}: {} (bit, llr) pairs at 20 dB", stream.len());
    let width = 0.5;
    // Bin on the predicted LLR. The grid and bands are symmetric under
    // negation, so a pair (bit, -x) folds onto (1 - bit, +x); folding
    // doubles the occupancy without conditioning on the outcome.
    let mut bins: std::collections::BTreeMap<i64, (u64, u64, f64)> = Default::default();
    for &(bit, llr) in stream {
        let (bit, llr) = if llr < 0.0 {
            (1 - bit, -llr)
        } else {
            (bit, llr)
        };
        let e = bins.entry((llr / width).floor() as i64).or_default();
        if bit == 0 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
        e.2 += llr;
    }
    println!(
        "{:>15} {:>9} {:>10} {:>7}",
        "mean_predicted", "samples", "observed", "gap"
    );
    for (_, (n0, n1, sum)) in bins {
        let n = n0 + n1;
        if n < 500 {
            continue;
        }
        let predicted = sum / n as f64;
        // Below ~10 expected wrong bits the log-odds estimator is
        // meaningless; report the raw count against its prediction.
        let expected_wrong = n as f64 / (1.0 + predicted.exp());
        if expected_wrong >= 10.0 {
            let observed = ((n0 as f64 + 0.5) / (n1 as f64 + 0.5)).ln();
            let gap = (observed - predicted).abs();
            println!("{predicted:>15.3} {n:>9} {observed:>10.3} {gap:>7.3}");
        } else {
            println!(
                "{predicted:>15.3} {n:>9}   {n1} wrong bits seen, {expected_wrong:.2} predicted"
            );
        }
    }
    println!();
}

fn main() -> gsk::Result<()> {
    let cfg = ExperimentConfig {
        snr_db: vec![20.0],
        reproducible: true,
        ..ExperimentConfig::default()
    };
    // An open band keeps every sample, the densest and least favorable
    // regime for calibration claims.
    let q = GuardBandQuantizer::symmetric(0.0)?;
    report(
        "reciprocal role",
        &reciprocal_llr_stream(&cfg, 20.0, &q, 100_000)?,
    );
    report(
        "decoding role",
        &v_decoding_llr_stream(&cfg, 20.0, &q, 100_000)?,
    );
    Ok(())
}
