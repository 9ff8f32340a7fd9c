//! Audits what the phase-4 broadcast reveals, in both regimes.
//!
//! With uniformly distributed quantized channels the ring sum is a
//! one-time pad: each single channel stays invisible while the pair is
//! fully determined given one of them. Raw Rayleigh fading concentrates
//! the quantizer output on the inner grid points, and that skew leaks;
//! the exact enumerator under the Gaussian-induced prior predicts how
//! much, and the Monte Carlo estimate confirms it.

use gsk::harness::run_leakage_experiment;
use gsk::ExperimentConfig;

fn main() -> gsk::Result<()> {
    let cfg = ExperimentConfig {
        snr_db: vec![20.0],
        n_blocks: 100_000,
        reproducible: true,
        ..ExperimentConfig::default()
    };
    let table = run_leakage_experiment(&cfg)?;

    println!("broadcast leakage at 20 dB, m = 4 (bits):\n");
    println!(
        "{:>22} {:>14} {:>14} {:>10}",
        "mode", "I(C_h12; W)", "I(C_h13; W)", "joint"
    );
    for mode in [
        "exact_uniform",
        "exact_channel_prior",
        "empirical",
        "empirical_uniform",
    ] {
        let get = |metric: &str| {
            table
                .rows
                .iter()
                .find(|r| r.mode == mode && r.metric == metric)
                .map(|r| r.value)
        };
        let joint = get("mi_joint").map_or("-".into(), |v| format!("{v:.4}"));
        println!(
            "{mode:>22} {:>14.4} {:>14.4} {joint:>10}",
            get("mi_single_12").unwrap(),
            get("mi_single_13").unwrap()
        );
    }
    let floor = table
        .rows
        .iter()
        .find(|r| r.mode == "empirical_uniform" && r.metric == "bias_floor_12")
        .unwrap()
        .value;
    println!("\nestimator bias floor (shuffled controls): {floor:.5}");
    println!("uniform-CSR rounds sit at the floor; raw rounds match the skew prediction");
    Ok(())
}
