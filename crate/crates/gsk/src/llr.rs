//! Soft information about node-1's key bits, one PAM sample at a time.
//!
//! Reconciliation needs log-likelihood ratios for the bits node-1 emitted,
//! computed by the other two nodes from what they hold locally. The two
//! node roles see very different evidence:
//!
//! * The reciprocal node observed the same channel through its own noisy
//!   estimate. Its evidence is the joint distribution of the two quantized
//!   estimates of one fading coefficient, tabulated once per parameter
//!   point as a [`JointPmfTable`].
//! * The decoding node never saw the channel. It holds a sample recovered
//!   from the broadcast by ring subtraction, so its evidence is a mixture
//!   over node-1's possible samples, each weighted by a prior and by the
//!   aposteriori mass the recovery chain assigns to the held sample.
//!
//! Both LLRs use the convention `log(Prob bit 0 / Prob bit 1)` and are
//! clamped to [`LLR_CLAMP`] so downstream message passing stays finite.
//!
//! The decoding-node mixture blurs each hypothesis with the per-dimension
//! variance `E_avg * sigma2 / |est|^2`. At the default estimation-error
//! level this deliberately doubles the raw per-dimension broadcast noise:
//! equalizing by a noisy estimate adds self-noise of the same average size,
//! and the doubled variance is what keeps the mixture an honest posterior
//! for the pipeline as a whole, not just for the additive noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use num_complex::Complex64;

use crate::consensus::{Decision, GuardBandQuantizer};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::pmf::{gaussian_cell_mass, Pmf};

/// Saturation bound for every LLR this module produces.
pub const LLR_CLAMP: f64 = 30.0;

/// How a [`JointPmfTable`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMethod {
    /// Deterministic panel quadrature over the fading coefficient with the
    /// estimate-noise integrals done in closed form.
    Quadrature,
    /// Empirical table from independent draws; kept as a cross-check and as
    /// a fallback, flagged so consumers can tell the tables apart.
    MonteCarlo { draws: u64 },
}

/// Joint PMF of the quantized channel estimates at the two ends of one
/// reciprocal link: `X` is node-1's PAM sample, `Y` the other node's, for a
/// single real dimension of one fading coefficient.
#[derive(Debug, Clone)]
pub struct JointPmfTable {
    support: Vec<f64>,
    /// Row-major `side x side`; `mass[s * side + t] = P(X = support[s],
    /// Y = support[t])`.
    mass: Vec<f64>,
    gamma: f64,
    method: TableMethod,
}

impl JointPmfTable {
    /// Builds a table from an explicit matrix. Entries must be non-negative
    /// and sum to 1 within 1e-9.
    pub fn from_matrix(support: Vec<f64>, mass: Vec<f64>, gamma: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        if mass.len() != support.len() * support.len() {
            return Err(Error::LengthMismatch {
                context: "joint pmf matrix",
                got: mass.len(),
                expected: support.len() * support.len(),
            });
        }
        let total: f64 = mass.iter().sum();
        if mass.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPmf(total));
        }
        Ok(Self {
            support,
            mass,
            gamma,
            method: TableMethod::Quadrature,
        })
    }

    /// PAM values indexing both axes.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Estimation-error variance the table was built for.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn method(&self) -> TableMethod {
        self.method
    }

    /// Joint mass at `(X index, Y index)`.
    pub fn mass(&self, s: usize, t: usize) -> f64 {
        self.mass[s * self.support.len() + t]
    }

    /// Marginal over `Y`, i.e. the PMF of node-1's own quantized sample.
    pub fn marginal_x(&self) -> Vec<f64> {
        let n = self.support.len();
        (0..n)
            .map(|s| (0..n).map(|t| self.mass(s, t)).sum())
            .collect()
    }

    /// Marginal over `X`.
    pub fn marginal_y(&self) -> Vec<f64> {
        let n = self.support.len();
        (0..n)
            .map(|t| (0..n).map(|s| self.mass(s, t)).sum())
            .collect()
    }
}

/// Five-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Probability that a PAM estimate of true value `x` with per-dimension
/// error variance `var_e` quantizes to each alphabet point. Cells are the
/// nearest-point regions: interior points own `point +/- 1`, the edge
/// points extend to infinity.
fn cell_mass_vector(x: f64, sigma_e: f64, pts: &[f64], out: &mut [f64]) {
    let n = pts.len();
    for (t, slot) in out.iter_mut().enumerate() {
        let lo = if t == 0 {
            f64::NEG_INFINITY
        } else {
            pts[t] - 1.0
        };
        let hi = if t == n - 1 {
            f64::INFINITY
        } else {
            pts[t] + 1.0
        };
        *slot = gaussian_cell_mass(lo, hi, x, sigma_e);
    }
}

/// Tabulates the joint PMF of the two quantized estimates of one fading
/// coefficient per real dimension: `X = quantize(h + e1)`,
/// `Y = quantize(h + e2)` with `h ~ N(0, 1/2)` and independent
/// `e1, e2 ~ N(0, gamma/2)`.
///
/// The integral over `h` is a composite Gauss-Legendre quadrature; the
/// conditional cell masses given `h` are exact, so the only error sources
/// are the panel rule on a smooth integrand and the truncation of the
/// fading density, both far below the 1e-3 agreement the Monte Carlo
/// cross-check demands. `snr_db` is recorded for provenance only; the
/// estimates exist before any broadcast noise is added.
pub fn build_joint_pmf(snr_db: f64, gamma: f64, c: &Constellation) -> Result<JointPmfTable> {
    if !snr_db.is_finite() {
        return Err(Error::NonFinite("snr_db"));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    let _ = snr_db;
    let pts = c.pam_points();
    let n = pts.len();
    let h_sigma = (0.5f64).sqrt();
    let mut mass = vec![0.0; n * n];

    let sigma_e = (gamma / 2.0).sqrt();
    if sigma_e < 1e-9 {
        // Degenerate errors: both quantize the fading coefficient itself,
        // so the table is the diagonal single-sample PMF. The boundary
        // layers this ignores carry O(sigma_e) mass, well under tolerance.
        for (s, slot) in mass.chunks_exact_mut(n).enumerate() {
            let lo = if s == 0 {
                f64::NEG_INFINITY
            } else {
                pts[s] - 1.0
            };
            let hi = if s == n - 1 {
                f64::INFINITY
            } else {
                pts[s] + 1.0
            };
            slot[s] = gaussian_cell_mass(lo, hi, 0.0, h_sigma);
        }
        return Ok(JointPmfTable {
            support: pts.to_vec(),
            mass,
            gamma,
            method: TableMethod::Quadrature,
        });
    }

    // Panels must resolve the steepest feature of the conditional cell
    // masses, which varies on the sigma_e scale; the count is capped so
    // pathologically small gamma degrades gracefully instead of hanging.
    let half_range = 6.5 * h_sigma;
    let width_target = (sigma_e / 3.0).min(0.05);
    let panels = ((2.0 * half_range / width_target).ceil() as usize).clamp(256, 100_000);
    let panel_w = 2.0 * half_range / panels as f64;
    let norm = 1.0 / (h_sigma * (2.0 * std::f64::consts::PI).sqrt());

    let mut cells = vec![0.0; n];
    for p in 0..panels {
        let a = -half_range + p as f64 * panel_w;
        for (&node, &weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let x = a + 0.5 * panel_w * (node + 1.0);
            let z = x / h_sigma;
            let density = norm * (-0.5 * z * z).exp();
            let w = weight * 0.5 * panel_w * density;
            cell_mass_vector(x, sigma_e, pts, &mut cells);
            for s in 0..n {
                let ws = w * cells[s];
                if ws == 0.0 {
                    continue;
                }
                for t in 0..n {
                    mass[s * n + t] += ws * cells[t];
                }
            }
        }
    }

    let total: f64 = mass.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-9, "quadrature total {total}");
    Ok(JointPmfTable {
        support: pts.to_vec(),
        mass,
        gamma,
        method: TableMethod::Quadrature,
    })
}

/// Empirical counterpart of [`build_joint_pmf`] from independent draws.
pub fn build_joint_pmf_monte_carlo(
    gamma: f64,
    c: &Constellation,
    draws: u64,
    rng: &mut impl Rng,
) -> Result<JointPmfTable> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    if draws == 0 {
        return Err(Error::Config(
            "a Monte Carlo table needs at least one draw".into(),
        ));
    }
    let h_dist = Normal::new(0.0, (0.5f64).sqrt()).expect("fixed std");
    let e_dist = Normal::new(0.0, (gamma / 2.0).sqrt()).expect("validated std");
    let n = c.side() as usize;
    let mut counts = vec![0u64; n * n];
    for _ in 0..draws {
        let h = h_dist.sample(rng);
        let s = c.quantize_pam_index(h + e_dist.sample(rng)) as usize;
        let t = c.quantize_pam_index(h + e_dist.sample(rng)) as usize;
        counts[s * n + t] += 1;
    }
    let mass = counts.iter().map(|&k| k as f64 / draws as f64).collect();
    Ok(JointPmfTable {
        support: c.pam_points().to_vec(),
        mass,
        gamma,
        method: TableMethod::MonteCarlo { draws },
    })
}

fn clamp_log_ratio(prob0: f64, prob1: f64) -> Result<f64> {
    if prob0 == 0.0 && prob1 == 0.0 {
        return Err(Error::UndefinedLlr);
    }
    Ok((prob0 / prob1).ln().clamp(-LLR_CLAMP, LLR_CLAMP))
}

/// LLR of node-1's bit as seen by the reciprocal node observing PAM sample
/// `p` on the same channel.
///
/// `Prob_b` sums the table column `Y = p` over node-1 samples `X` that are
/// out of band on the side emitting bit `b`; in-band `X` never produced a
/// bit and is excluded. Returns the undefined-LLR error when both sums are
/// zero (such samples are removed by consensus before this point).
pub fn llr_reciprocal(p: f64, table: &JointPmfTable, q: &GuardBandQuantizer) -> Result<f64> {
    let t = table
        .support
        .iter()
        .position(|&v| v == p)
        .ok_or(Error::NotAConstellationPoint(Complex64::new(p, 0.0)))?;
    let mut prob0 = 0.0;
    let mut prob1 = 0.0;
    for (s, &x) in table.support.iter().enumerate() {
        match q.two_level_quantize(x) {
            Decision::Zero => prob0 += table.mass(s, t),
            Decision::One => prob1 += table.mass(s, t),
            Decision::NoConsensus => {}
        }
    }
    clamp_log_ratio(prob0, prob1)
}

/// Prior over node-1's out-of-band PAM sample, for weighting the decoding
/// hypotheses: the single-sample PMF of `quantize(h + e)` with
/// `h + e ~ N(0, (1 + gamma)/2)` per dimension, restricted and
/// renormalized to the points outside the guard band.
pub fn decoding_prior(c: &Constellation, q: &GuardBandQuantizer, gamma: f64) -> Result<Pmf> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    Pmf::induce(0.0, (1.0 + gamma) / 2.0, c)?
        .restrict(|_, v| q.two_level_quantize(v) != Decision::NoConsensus)
}

/// LLR of node-1's bit as seen by the decoding node, which holds the
/// recovered sample `own_csr_sample` and subtracted `own_other_csr` to get
/// it.
///
/// For each out-of-band hypothesis `x_u` for node-1's sample, the decoding
/// node reconstructs what it would have received: the broadcast coordinate
/// `x_u (+) own_other_csr` on the ring (its own copy standing in for
/// node-1's, which consensus makes safe), blurred to an aposteriori PMF
/// with per-dimension variance `E_avg * sigma2 / |channel_est|^2`, then
/// ring-shifted by the subtraction it actually performed. The mass that
/// lands on the held sample, weighted by `prior`, accumulates into the
/// probability of the bit `x_u` encodes.
///
/// The same function serves both decoding roles: node-2 passes its
/// recovered sample, its own reciprocal-channel sample, and its estimate of
/// that reciprocal channel; node-3 does the same with the roles of the two
/// channels swapped.
pub fn llr_decoding(
    own_csr_sample: f64,
    own_other_csr: f64,
    channel_est: Complex64,
    sigma2: f64,
    prior: &Pmf,
    c: &Constellation,
    q: &GuardBandQuantizer,
) -> Result<f64> {
    if !(channel_est.re.is_finite() && channel_est.im.is_finite()) {
        return Err(Error::NonFinite("channel estimate"));
    }
    if channel_est.norm_sqr() == 0.0 {
        return Err(Error::UndefinedLlr);
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::NegativeNoiseVariance(sigma2));
    }
    if prior.len() != c.side() as usize {
        return Err(Error::LengthMismatch {
            context: "decoding prior",
            got: prior.len(),
            expected: c.side() as usize,
        });
    }
    let t_obs = c.pam_ring_index(own_csr_sample)?;
    let s_own = c.pam_ring_index(own_other_csr)?;
    let side = c.side();
    let var = c.e_avg() * sigma2 / channel_est.norm_sqr();

    let mut prob0 = 0.0;
    let mut prob1 = 0.0;
    for u in 0..side {
        let x_u = c.pam_value(u);
        let bit = match q.two_level_quantize(x_u) {
            Decision::Zero => 0,
            Decision::One => 1,
            Decision::NoConsensus => continue,
        };
        let weight = prior.mass_at(u);
        if weight == 0.0 {
            continue;
        }
        let mu = c.pam_value((u + s_own) % side);
        let aposteriori = Pmf::induce(mu, var, c)?.circular_shift(s_own);
        let mass = weight * aposteriori.mass_at(t_obs);
        if bit == 0 {
            prob0 += mass;
        } else {
            prob1 += mass;
        }
    }
    clamp_log_ratio(prob0, prob1)
}
