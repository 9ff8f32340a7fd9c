//! Compares the fixed single-channel key-rate against the opportunistic
//! two-channel rate across the SNR grid, at the initial-error target where
//! the second channel pays off most.

use gsk::harness::run_keyrate_experiment;
use gsk::ExperimentConfig;

fn main() -> gsk::Result<()> {
    let cfg = ExperimentConfig {
        target_ier: 1e-2,
        n_blocks: 50_000,
        reproducible: true,
        ..ExperimentConfig::default()
    };
    let table = run_keyrate_experiment(&cfg)?;

    println!(
        "{:>7} {:>9} {:>12} {:>14} {:>7}",
        "snr_db", "guard_q", "fixed_h12", "opportunistic", "gain"
    );
    for &snr in &cfg.snr_db {
        let get = |mode: &str, metric: &str| {
            table
                .rows
                .iter()
                .find(|r| r.snr_db == snr && r.mode == mode && r.metric == metric)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let fixed = get("fixed_h12", "key_rate");
        let opp = get("opportunistic", "key_rate");
        println!(
            "{snr:>7} {:>9.2} {fixed:>12.5} {opp:>14.5} {:>6.2}x",
            get("calibration", "guard_q"),
            opp / fixed
        );
    }
    Ok(())
}
