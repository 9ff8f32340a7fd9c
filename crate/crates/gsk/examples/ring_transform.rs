//! Walks the constellation/ring correspondence at m = 4: the PAM grid,
//! the coordinate map into Z_4[i], and why a modular sum can be undone by
//! the receiver that knows one addend.

use gsk::{Constellation, RingElement, D_MIN};
use num_complex::Complex64;

fn main() -> gsk::Result<()> {
    let c = Constellation::new(4)?;
    println!(
        "16-QAM: side {}, d_min {}, E_avg {}",
        c.side(),
        D_MIN,
        c.e_avg()
    );
    println!("\nPAM level -> ring coordinate (per component):");
    for (t, &p) in c.pam_points().iter().enumerate() {
        println!("  {p:+} -> {t}");
    }

    // A complex constellation point maps componentwise.
    let a = Complex64::new(-3.0, 1.0);
    let r = c.phi(a)?;
    println!("\nphi({a}) = ({}, {}) mod {}", r.re(), r.im(), r.modulus());
    println!("phi_inv back: {}", c.phi_inv(r)?);

    // The broadcast hides one symbol behind another: the sum alone is
    // ambiguous, but subtracting a known addend restores the other.
    let u = c.phi(Complex64::new(1.0, 3.0))?;
    let v = c.phi(Complex64::new(-1.0, -3.0))?;
    let w = u.add(v)?;
    println!(
        "\nu = ({},{}), v = ({},{}), u + v = ({},{}) over Z_{}[i]",
        u.re(),
        u.im(),
        v.re(),
        v.im(),
        w.re(),
        w.im(),
        c.side()
    );
    assert_eq!(w.sub(v)?, u);
    assert_eq!(w.sub(u)?, v);
    println!("w - v recovers u, w - u recovers v");

    // Every pair round-trips the same way.
    let mut checked = 0u32;
    for ur in 0..c.side() {
        for ui in 0..c.side() {
            for vr in 0..c.side() {
                for vi in 0..c.side() {
                    let u = RingElement::new(ur, ui, c.side());
                    let v = RingElement::new(vr, vi, c.side());
                    assert_eq!(u.add(v)?.sub(v)?, u);
                    checked += 1;
                }
            }
        }
    }
    println!("add/sub round-trip verified on {checked} pairs");
    Ok(())
}
