//! Opportunistic choice of which channel's symbols feed the key.
//!
//! On indices where both channels survived consensus, node-1 decides which
//! one the key will use. The likelihood rule models, entirely from node-1's
//! local state, the recovery error each helper node was exposed to: the
//! helper saw the broadcast through its link to node-1, so its
//! aposteriori distribution is the broadcast point blurred by that link's
//! equalized noise, ring-shifted by the symbol the helper subtracted. The
//! error event is the recovered sample landing out of band on the wrong
//! side; whichever channel's helper is more at risk gets dropped.
//!
//! The strength baseline keeps the weaker channel's symbols instead: that
//! channel's copy was recovered over the stronger link, so its decoding is
//! the safer of the two. Both rules use node-1's own estimates only; no
//! extra traffic is needed beyond announcing the decision.

use num_complex::Complex64;

use crate::consensus::{Decision, GuardBandQuantizer};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::pmf::QamPmf;
use crate::protocol::{NodeId, NodeState, Part, SourceChannel};

/// Which parts of the complex symbol are in play for one decision: both
/// when the whole symbol survived consensus on both channels, or a single
/// part when only that sample index did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolParts {
    ReOnly,
    ImOnly,
    Both,
}

impl SymbolParts {
    fn parts(self) -> &'static [Part] {
        match self {
            SymbolParts::ReOnly => &[Part::Re],
            SymbolParts::ImOnly => &[Part::Im],
            SymbolParts::Both => &[Part::Re, Part::Im],
        }
    }
}

/// Node-1 fields the selection rules are allowed to read. Constructed only
/// from node-1's own state, so helper-node knowledge cannot leak into the
/// decision by construction.
struct Node1View {
    csr_h12: Complex64,
    csr_h13: Complex64,
    est_h12: Complex64,
    est_h13: Complex64,
}

impl Node1View {
    fn new(node1: &NodeState) -> Result<Self> {
        if node1.node != NodeId::Node1 {
            return Err(Error::Config(
                "selection runs at node-1; got another node's state".into(),
            ));
        }
        Ok(Self {
            csr_h12: node1
                .csr_h12
                .ok_or(Error::IncompleteNodeState("node-1 h12 symbol"))?,
            csr_h13: node1
                .csr_h13
                .ok_or(Error::IncompleteNodeState("node-1 h13 symbol"))?,
            est_h12: node1
                .est_h12
                .ok_or(Error::IncompleteNodeState("node-1 h12 estimate"))?,
            est_h13: node1
                .est_h13
                .ok_or(Error::IncompleteNodeState("node-1 h13 estimate"))?,
        })
    }
}

fn part_of(z: Complex64, part: Part) -> f64 {
    match part {
        Part::Re => z.re,
        Part::Im => z.im,
    }
}

/// Probability mass the recovered symbol puts on the wrong out-of-band side
/// of `part`, per the aposteriori model: broadcast point blurred with
/// per-component variance `E_avg * sigma2 / |link_est|^2`, ring-shifted by
/// the symbol the helper subtracts.
#[allow(clippy::too_many_arguments)]
fn wrong_side_mass(
    view: &Node1View,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    link_est: Complex64,
    subtracted: Complex64,
    truth: Complex64,
    part: Part,
) -> Result<f64> {
    let truth_side = match q.two_level_quantize(part_of(truth, part)) {
        Decision::Zero => Decision::Zero,
        Decision::One => Decision::One,
        Decision::NoConsensus => return Err(Error::ConditioningSampleInBand),
    };
    let wrong = if truth_side == Decision::One {
        Decision::Zero
    } else {
        Decision::One
    };

    let gain = link_est.norm_sqr();
    if gain == 0.0 {
        // A dead link makes the helper's recovery hopeless; report certain
        // error so selection falls back to the other channel.
        return Ok(1.0);
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let mu = c.phi_inv(c.phi(view.csr_h12)?.add(c.phi(view.csr_h13)?)?)?;
    let var = c.e_avg() * sigma2 / gain;
    let recovered = QamPmf::induce(mu, var, c)?.circular_shift(c.phi(subtracted)?);
    let marginal = match part {
        Part::Re => recovered.marginal_re(),
        Part::Im => recovered.marginal_im(),
    };
    Ok(marginal.sum_where(|_, v| q.two_level_quantize(v) == wrong))
}

/// Chance that node-2's recovered sample for the given part of the h13
/// symbol lands out of band on the wrong side. Node-2 saw the broadcast
/// over h12 and subtracted its h12 symbol, which node-1 proxies with its
/// own.
pub fn error_prob_at_node2_part(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    part: Part,
) -> Result<f64> {
    let view = Node1View::new(node1)?;
    wrong_side_mass(
        &view,
        c,
        q,
        sigma2,
        view.est_h12,
        view.csr_h12,
        view.csr_h13,
        part,
    )
}

/// Mirror of [`error_prob_at_node2_part`] for node-3's recovery of the h12
/// symbol over the h13 link.
pub fn error_prob_at_node3_part(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    part: Part,
) -> Result<f64> {
    let view = Node1View::new(node1)?;
    wrong_side_mass(
        &view,
        c,
        q,
        sigma2,
        view.est_h13,
        view.csr_h13,
        view.csr_h12,
        part,
    )
}

fn combined(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    parts: SymbolParts,
    per_part: impl Fn(&NodeState, &Constellation, &GuardBandQuantizer, f64, Part) -> Result<f64>,
) -> Result<f64> {
    let mut ok = 1.0;
    for &part in parts.parts() {
        ok *= 1.0 - per_part(node1, c, q, sigma2, part)?;
    }
    Ok(1.0 - ok)
}

/// Symbol-level error probability at node-2 on the h13 symbol: the chance
/// any in-play part lands wrong-side, parts treated as independent.
pub fn error_prob_at_node2(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    parts: SymbolParts,
) -> Result<f64> {
    combined(node1, c, q, sigma2, parts, error_prob_at_node2_part)
}

/// Symbol-level error probability at node-3 on the h12 symbol.
pub fn error_prob_at_node3(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    parts: SymbolParts,
) -> Result<f64> {
    combined(node1, c, q, sigma2, parts, error_prob_at_node3_part)
}

/// Likelihood selection: keep h12 exactly when node-2 is at least as likely
/// to err on the h13 symbol as node-3 is on the h12 symbol (ties keep h12).
pub fn select_csr(
    node1: &NodeState,
    c: &Constellation,
    q: &GuardBandQuantizer,
    sigma2: f64,
    parts: SymbolParts,
) -> Result<SourceChannel> {
    let p2 = error_prob_at_node2(node1, c, q, sigma2, parts)?;
    let p3 = error_prob_at_node3(node1, c, q, sigma2, parts)?;
    Ok(if p2 >= p3 {
        SourceChannel::H12
    } else {
        SourceChannel::H13
    })
}

/// Strength baseline: keep the symbols of the weaker observed channel,
/// because that channel's copy was recovered over the stronger link (ties
/// keep h12).
pub fn select_csr_by_strength(node1: &NodeState) -> Result<SourceChannel> {
    let view = Node1View::new(node1)?;
    Ok(if view.est_h12.norm_sqr() <= view.est_h13.norm_sqr() {
        SourceChannel::H12
    } else {
        SourceChannel::H13
    })
}
