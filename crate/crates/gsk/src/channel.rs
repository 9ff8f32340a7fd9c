//! Reciprocal fading channels, estimation noise, and seeded randomness.
//!
//! A coherence block freezes three pairwise channel gains, each circularly
//! symmetric complex Gaussian with unit power and identical in both link
//! directions. Nodes never see gains directly: every pilot exchange yields
//! the true gain plus an independent complex Gaussian estimation error of
//! variance `gamma`. SNR is defined against a unit-power pilot, so the AWGN
//! variance is `sigma2 = 10^(-snr_db/10)`.
//!
//! Randomness is organized for reproducibility under parallel execution: a
//! trial (one coherence block) derives one counter-seeded stream for the
//! environment and one per node from `(master seed, point, block index)`.
//! Each stream consumes draws in a fixed documented order, so any trial can
//! be regenerated in isolation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Noise and estimation-error levels for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    snr_db: f64,
    sigma2: f64,
    gamma: f64,
}

impl ChannelParams {
    /// Operating point at `snr_db` with an explicit estimation-error
    /// variance, or the default `gamma = sigma2` when `None` (unit-power
    /// pilots estimated in the same noise).
    pub fn new(snr_db: f64, gamma: Option<f64>) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::NonFinite("snr_db"));
        }
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let gamma = gamma.unwrap_or(sigma2);
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::NegativeGamma(gamma));
        }
        Ok(Self {
            snr_db,
            sigma2,
            gamma,
        })
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    /// AWGN variance per complex sample.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Estimation-error variance per complex estimate.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// One coherence block: true gains plus each node's noisy estimates.
///
/// `estJ_hXY` is node `J`'s estimate of channel `hXY`, formed during the
/// pilot phase in which the opposite endpoint transmitted. Reciprocity is
/// structural: both endpoints of a link estimate the same underlying gain.
#[derive(Debug, Clone, Copy)]
pub struct CoherenceBlock {
    pub h12: Complex64,
    pub h13: Complex64,
    pub h23: Complex64,
    /// Node-1's estimate of h12 (phase 2).
    pub est1_h12: Complex64,
    /// Node-1's estimate of h13 (phase 3).
    pub est1_h13: Complex64,
    /// Node-2's estimate of h12 (phase 1).
    pub est2_h12: Complex64,
    /// Node-2's estimate of h23 (phase 3).
    pub est2_h23: Complex64,
    /// Node-3's estimate of h13 (phase 1).
    pub est3_h13: Complex64,
    /// Node-3's estimate of h23 (phase 2).
    pub est3_h23: Complex64,
}

/// Per-trial random streams: one for the environment (channel gains), one
/// per node (that node's estimation errors, then its phase-4 receiver
/// noise, in that order).
pub struct TrialRngs {
    pub env: ChaCha8Rng,
    pub node1: ChaCha8Rng,
    pub node2: ChaCha8Rng,
    pub node3: ChaCha8Rng,
}

impl TrialRngs {
    /// Derives the four streams for one trial. `point` distinguishes sweep
    /// points sharing a master seed; `block` is the trial index.
    pub fn for_trial(master_seed: u64, point: u64, block: u64) -> Self {
        Self {
            env: stream_rng(master_seed, point, block, 0),
            node1: stream_rng(master_seed, point, block, 1),
            node2: stream_rng(master_seed, point, block, 2),
            node3: stream_rng(master_seed, point, block, 3),
        }
    }
}

/// Counter-seeded stream: identical inputs give an identical stream on every
/// platform and thread schedule.
pub fn stream_rng(master_seed: u64, point: u64, block: u64, stream: u64) -> ChaCha8Rng {
    let mut state = master_seed ^ 0x6773_6b5f_7374_7265; // domain tag
    let mut next = |v: u64| {
        state ^= v.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        splitmix64(&mut state)
    };
    let a = next(point);
    let b = next(block);
    let c = next(stream);
    let d = next(a ^ b.rotate_left(17) ^ c.rotate_left(43));
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&a.to_le_bytes());
    seed[8..16].copy_from_slice(&b.to_le_bytes());
    seed[16..24].copy_from_slice(&c.to_le_bytes());
    seed[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Circularly symmetric complex Gaussian with total variance `var`.
#[inline]
pub fn complex_normal(var: f64, rng: &mut impl Rng) -> Complex64 {
    let s = (var * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Adds receiver noise of variance `sigma2` to `signal`; `sigma2 = 0` is the
/// identity.
pub fn awgn(signal: Complex64, sigma2: f64, rng: &mut impl Rng) -> Result<Complex64> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::NegativeNoiseVariance(sigma2));
    }
    if sigma2 == 0.0 {
        return Ok(signal);
    }
    Ok(signal + complex_normal(sigma2, rng))
}

/// Draws one coherence block.
///
/// Draw order within streams: environment yields `h12, h13, h23`; each node
/// stream yields that node's estimation errors in phase order (node-1:
/// h12 then h13; node-2: h12 then h23; node-3: h13 then h23). Phase-4
/// receiver noise is drawn later by the protocol from the same node streams.
pub fn draw_block(params: &ChannelParams, rngs: &mut TrialRngs) -> CoherenceBlock {
    let g = params.gamma;
    let h12 = complex_normal(1.0, &mut rngs.env);
    let h13 = complex_normal(1.0, &mut rngs.env);
    let h23 = complex_normal(1.0, &mut rngs.env);
    CoherenceBlock {
        h12,
        h13,
        h23,
        est1_h12: h12 + complex_normal(g, &mut rngs.node1),
        est1_h13: h13 + complex_normal(g, &mut rngs.node1),
        est2_h12: h12 + complex_normal(g, &mut rngs.node2),
        est2_h23: h23 + complex_normal(g, &mut rngs.node2),
        est3_h13: h13 + complex_normal(g, &mut rngs.node3),
        est3_h23: h23 + complex_normal(g, &mut rngs.node3),
    }
}
