//! Loads the two bundled parity-check codes from alist text, prints their
//! shapes, and demonstrates a single syndrome-decoding repair on a key
//! with one weak erroneous bit.

use gsk::recon::{decode_syndrome, parse_alist, syndrome};

const SMALL: &str = include_str!("../fixtures/ldpc_12_9.alist");
const LARGE: &str = include_str!("../fixtures/ldpc_648_486.alist");

fn main() -> gsk::Result<()> {
    for (name, text) in [("ldpc_12_9", SMALL), ("ldpc_648_486", LARGE)] {
        let h = parse_alist(text)?;
        println!(
            "{name}: n = {}, k = {}, checks = {}, disclosure = {} bits/frame",
            h.n(),
            h.k(),
            h.checks(),
            h.n() - h.k()
        );
    }

    let h = parse_alist(SMALL)?;
    let key: Vec<u8> = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1];
    let s = syndrome(&key, &h)?;
    println!("\nreference key: {key:?}");
    println!("published syndrome: {s:?}");

    // The other node's soft view: confident everywhere except position 5,
    // where a weak wrong-sign LLR sneaks in.
    let mut llrs: Vec<f64> = key
        .iter()
        .map(|&b| if b == 0 { 18.0 } else { -18.0 })
        .collect();
    llrs[5] = -0.4;
    let before: Vec<u8> = llrs.iter().map(|&l| u8::from(l < 0.0)).collect();
    println!("hard decisions before decoding: {before:?}");

    let out = decode_syndrome(&llrs, &s, &h, 50)?;
    println!(
        "after {} iterations (converged: {}): {:?}",
        out.iterations, out.converged, out.bits
    );
    assert_eq!(out.bits, key);
    println!("decoded key matches the reference");
    Ok(())
}
