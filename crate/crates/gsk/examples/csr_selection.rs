//! On coherence blocks where both channels pass consensus, the reference
//! node must pick one of them as the key source. This compares the
//! likelihood rule (model the other nodes' error probabilities, keep the
//! safer channel) against the channel-strength heuristic (keep the weaker
//! channel so the broadcast decodes through the stronger one).

use gsk::harness::run_selection_experiment;
use gsk::ExperimentConfig;

fn main() -> gsk::Result<()> {
    let cfg = ExperimentConfig {
        snr_db: vec![20.0, 25.0, 30.0],
        target_ier: 1e-1,
        n_blocks: 100_000,
        reproducible: true,
        ..ExperimentConfig::default()
    };
    let table = run_selection_experiment(&cfg)?;

    println!(
        "{:>7} {:>12} {:>14} {:>14}",
        "snr_db", "v_samples", "likelihood", "strength"
    );
    for &snr in &cfg.snr_db {
        let row = |mode: &str| {
            table
                .rows
                .iter()
                .find(|r| r.snr_db == snr && r.mode == mode && r.metric == "mismatch_rate")
        };
        let (lik, str_) = (row("likelihood"), row("strength"));
        match (lik, str_) {
            (Some(l), Some(s)) => {
                println!("{snr:>7} {:>12} {:>14.5} {:>14.5}", l.n, l.value, s.value)
            }
            _ => println!("{snr:>7} missing rows"),
        }
    }
    Ok(())
}
