//! Runs one four-phase sharing round at 20 dB and prints what every node
//! ends up holding: its directly estimated channels, the ring-sum
//! broadcast, and the channel it recovered by decoding the broadcast.

use gsk::channel::{draw_block, ChannelParams, TrialRngs};
use gsk::protocol::run_round;
use gsk::Constellation;

fn main() -> gsk::Result<()> {
    let c = Constellation::new(4)?;
    let params = ChannelParams::new(20.0, None)?;
    let mut rngs = TrialRngs::for_trial(7, 0, 0);
    let block = draw_block(&params, &mut rngs);

    println!("true gains:");
    println!("  h12 = {:.4}", block.h12);
    println!("  h13 = {:.4}", block.h13);

    let round = run_round(&block, &c, &mut rngs, params.sigma2(), None, 0)?;
    println!("\nphase-4 broadcast (unit energy): {:.4}", round.broadcast);

    for node in &round.nodes {
        println!("\n{:?}:", node.node);
        println!("  C_h12 = {}", fmt(node.csr_h12));
        println!("  C_h13 = {}", fmt(node.csr_h13));
    }

    let c12: Vec<_> = round.nodes.iter().map(|n| n.csr_h12.unwrap()).collect();
    let c13: Vec<_> = round.nodes.iter().map(|n| n.csr_h13.unwrap()).collect();
    println!(
        "\nall nodes agree on h12: {}, on h13: {}",
        c12.windows(2).all(|w| w[0] == w[1]),
        c13.windows(2).all(|w| w[0] == w[1])
    );
    Ok(())
}

fn fmt(z: Option<num_complex::Complex64>) -> String {
    match z {
        Some(z) => format!("{:+} {:+}i", z.re, z.im),
        None => "-".into(),
    }
}
