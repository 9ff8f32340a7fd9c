//! Mutual-information oracles for what the broadcast reveals.
//!
//! The security claim of the protocol is asymmetric: the broadcast ring sum
//! reveals nothing about either consensus sample alone, but reveals the
//! pair jointly (knowing one CSR and the sum gives the other, which is the
//! whole point of the exchange). Two independent layers check this: an
//! exact enumerator that trusts the ring model, and an empirical estimator
//! fed by nothing but simulator outputs. A bug in either layer shows up as
//! disagreement with the other.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::pmf::QamPmf;

/// Minimum samples per joint-alphabet cell accepted by [`empirical_mi`].
pub const SAMPLES_PER_CELL: usize = 100;

fn entropy_bits(masses: impl Iterator<Item = f64>) -> f64 {
    -masses
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Plug-in mutual information in bits from paired discrete observations.
///
/// Requires at least [`SAMPLES_PER_CELL`] samples per cell of the joint
/// alphabet so the plug-in bias `(|X|-1)(|Y|-1) / (2 n ln 2)` stays well
/// under a hundredth of a bit. With `miller_madow` set, each entropy term
/// gets the Miller-Madow occupancy correction before combining; the result
/// is clamped at zero either way.
pub fn empirical_mi(
    samples: &[(u32, u32)],
    alphabet: (u32, u32),
    miller_madow: bool,
) -> Result<f64> {
    let (ax, ay) = (alphabet.0 as usize, alphabet.1 as usize);
    if ax < 2 || ay < 2 {
        return Err(Error::Config(format!(
            "mutual information needs alphabets of at least two symbols, got {ax} x {ay}"
        )));
    }
    let cells = ax * ay;
    let needed = SAMPLES_PER_CELL * cells;
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
            alphabet: cells,
        });
    }
    let mut joint = vec![0u64; cells];
    for &(x, y) in samples {
        if x as usize >= ax || y as usize >= ay {
            return Err(Error::Config(format!(
                "sample ({x}, {y}) lies outside the {ax} x {ay} alphabet"
            )));
        }
        joint[x as usize * ay + y as usize] += 1;
    }
    let n = samples.len() as f64;
    let mut px = vec![0u64; ax];
    let mut py = vec![0u64; ay];
    for x in 0..ax {
        for y in 0..ay {
            px[x] += joint[x * ay + y];
            py[y] += joint[x * ay + y];
        }
    }
    let hx = entropy_bits(px.iter().map(|&c| c as f64 / n));
    let hy = entropy_bits(py.iter().map(|&c| c as f64 / n));
    let hxy = entropy_bits(joint.iter().map(|&c| c as f64 / n));
    let mut mi = hx + hy - hxy;
    if miller_madow {
        let occupied = |counts: &[u64]| counts.iter().filter(|&&c| c > 0).count() as f64;
        // Each Miller-Madow entropy correction is (K - 1) / (2 n ln 2);
        // combining the three gives (Kx + Ky - Kxy - 1) / (2 n ln 2).
        mi += (occupied(&px) + occupied(&py) - occupied(&joint) - 1.0)
            / (2.0 * n * std::f64::consts::LN_2);
    }
    Ok(mi.max(0.0))
}

/// Bias floor of [`empirical_mi`] on this data: the mean estimate after
/// shuffling the second coordinate, which destroys any real dependence and
/// leaves only estimator bias plus fluctuation.
pub fn shuffled_mi_floor<R: Rng + ?Sized>(
    samples: &[(u32, u32)],
    alphabet: (u32, u32),
    miller_madow: bool,
    shuffles: u32,
    rng: &mut R,
) -> Result<f64> {
    if shuffles == 0 {
        return Err(Error::Config(
            "the bias floor needs at least one shuffle".into(),
        ));
    }
    let mut ys: Vec<u32> = samples.iter().map(|&(_, y)| y).collect();
    let mut total = 0.0;
    let mut shuffled = Vec::with_capacity(samples.len());
    for _ in 0..shuffles {
        ys.shuffle(rng);
        shuffled.clear();
        shuffled.extend(samples.iter().zip(&ys).map(|(&(x, _), &y)| (x, y)));
        total += empirical_mi(&shuffled, alphabet, miller_madow)?;
    }
    Ok(total / f64::from(shuffles))
}

/// What the broadcast reveals, in bits, under the exact ring model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingLeakage {
    /// I(first CSR; broadcast).
    pub mi_single_12: f64,
    /// I(second CSR; broadcast).
    pub mi_single_13: f64,
    /// I(both CSRs; broadcast).
    pub mi_joint: f64,
}

/// Exact mutual information between the CSRs and the broadcast ring sum by
/// enumeration of the full joint: independent draws `U ~ prior12` and
/// `V ~ prior13` over the constellation, broadcast `W = U (+) V` in the
/// ring.
///
/// Because the sum is a deterministic function of the pair, the joint
/// leakage is exactly `H(W)`; the single-CSR leakages are `H(W) - H(V)`
/// and `H(W) - H(U)`, which the enumeration reproduces without using those
/// identities. Uniform priors act as one-time pads: both singles vanish and
/// the joint is the full `m` bits. A non-uniform prior on one side leaks
/// information about the *other* side through the sum.
pub fn exact_mi_ring(prior12: &QamPmf, prior13: &QamPmf, c: &Constellation) -> Result<RingLeakage> {
    let side = c.side() as usize;
    for (label, prior) in [("prior12", prior12), ("prior13", prior13)] {
        if prior.marginal_re().len() != side {
            return Err(Error::LengthMismatch {
                context: "ring leakage prior",
                got: prior.marginal_re().len(),
                expected: side,
            });
        }
        let total: f64 = prior.flatten().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{label} mass sums to {total}, expected 1"
            )));
        }
    }

    let points = side * side;
    // Joint tables P(u, w) and P(v, w), indexed by flattened ring
    // coordinates re * side + im.
    let mut joint_uw = vec![0.0f64; points * points];
    let mut joint_vw = vec![0.0f64; points * points];
    let mut pw = vec![0.0f64; points];
    for ure in 0..side {
        for uim in 0..side {
            let pu = prior12.mass_at(ure as u32, uim as u32);
            if pu == 0.0 {
                continue;
            }
            let u = ure * side + uim;
            for vre in 0..side {
                for vim in 0..side {
                    let pv = prior13.mass_at(vre as u32, vim as u32);
                    if pv == 0.0 {
                        continue;
                    }
                    let v = vre * side + vim;
                    let w = ((ure + vre) % side) * side + (uim + vim) % side;
                    let p = pu * pv;
                    joint_uw[u * points + w] += p;
                    joint_vw[v * points + w] += p;
                    pw[w] += p;
                }
            }
        }
    }

    let hw = entropy_bits(pw.iter().copied());
    let mi_from = |joint: &[f64], marginal: &QamPmf| {
        let mut cond = 0.0;
        for a in 0..points {
            let pa = marginal.mass_at((a / side) as u32, (a % side) as u32);
            if pa == 0.0 {
                continue;
            }
            // H(W | A = a) accumulated in bits, weighted by P(a).
            cond += entropy_bits(joint[a * points..(a + 1) * points].iter().map(|&p| p / pa)) * pa;
        }
        (hw - cond).max(0.0)
    };
    Ok(RingLeakage {
        mi_single_12: mi_from(&joint_uw, prior12),
        mi_single_13: mi_from(&joint_vw, prior13),
        // W is a function of the pair, so conditioning on both leaves no
        // entropy: the joint leakage is H(W) itself.
        mi_joint: hw,
    })
}
