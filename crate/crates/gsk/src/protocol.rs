//! The four-phase key-generation round.
//!
//! Phases 1-3 are pilot exchanges: after them, node-1 has quantized both of
//! its channels while node-2 and node-3 each hold only one of the two
//! key-bearing channels (plus the unused cross link h23). Phase 4 closes the
//! gap: node-1 broadcasts the ring sum of its two quantized symbols, scaled
//! to unit average power; each helper node MAP-decodes that broadcast
//! through its own channel and ring-subtracts the symbol it already knows,
//! recovering the channel it never observed.
//!
//! Node-1's symbols always come from quantization alone, never decoding, so
//! its pair of symbols is the reference the other nodes try to match.

use num_complex::Complex64;

use crate::channel::{awgn, CoherenceBlock, TrialRngs};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::pmf::{Pmf, QamPmf};

/// Node identity in the three-node network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum NodeId {
    Node1,
    Node2,
    Node3,
}

impl NodeId {
    pub fn index(self) -> usize {
        match self {
            NodeId::Node1 => 0,
            NodeId::Node2 => 1,
            NodeId::Node3 => 2,
        }
    }
}

/// Which key-bearing channel a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum SourceChannel {
    H12,
    H13,
}

/// Real or imaginary component of a quantized symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Part {
    Re,
    Im,
}

/// One unfolded PAM-valued sample of common randomness.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CsrSample {
    pub value: f64,
    pub source_channel: SourceChannel,
    pub part: Part,
    pub node: NodeId,
    pub block_index: u64,
}

/// What one node knows after a (partial or complete) round.
///
/// `csr_h12`/`csr_h13` are `None` until the phase that sets them has run; a
/// completed round leaves both populated at every node. The retained channel
/// estimates are exactly those later stages consume: node-1 keeps both of
/// its own estimates for selection, node-2 and node-3 keep the estimate they
/// equalize the broadcast with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub node: NodeId,
    pub csr_h12: Option<Complex64>,
    pub csr_h13: Option<Complex64>,
    /// Quantized cross-link symbol (phases 2-3 produce it; nothing downstream
    /// reads it).
    pub csr_h23: Option<Complex64>,
    pub est_h12: Option<Complex64>,
    pub est_h13: Option<Complex64>,
    /// Phase-4 observation at node-2/3.
    pub rx_phase4: Option<Complex64>,
    /// MAP-decoded broadcast at node-2/3.
    pub theta_hat: Option<Complex64>,
}

impl NodeState {
    fn empty(node: NodeId) -> Self {
        Self {
            node,
            csr_h12: None,
            csr_h13: None,
            csr_h23: None,
            est_h12: None,
            est_h13: None,
            rx_phase4: None,
            theta_hat: None,
        }
    }
}

/// Output of a full round: the three node states, the broadcast symbol, and
/// the twelve unfolded samples (node-major, h12 before h13, real before
/// imaginary).
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub nodes: [NodeState; 3],
    pub broadcast: Complex64,
    pub samples: [CsrSample; 12],
}

/// Pilot phases 1-3: every node quantizes each estimate it observes.
///
/// Node-2's h13 symbol and node-3's h12 symbol stay unset; phase 4 fills
/// them by decoding.
pub fn run_phases_1_to_3(block: &CoherenceBlock, c: &Constellation) -> Result<[NodeState; 3]> {
    let mut n1 = NodeState::empty(NodeId::Node1);
    let mut n2 = NodeState::empty(NodeId::Node2);
    let mut n3 = NodeState::empty(NodeId::Node3);

    // Phase 1: node-1 transmits; nodes 2 and 3 estimate their links to it.
    n2.est_h12 = Some(block.est2_h12);
    n2.csr_h12 = Some(c.quantize(block.est2_h12)?);
    n3.est_h13 = Some(block.est3_h13);
    n3.csr_h13 = Some(c.quantize(block.est3_h13)?);

    // Phase 2: node-2 transmits.
    n1.est_h12 = Some(block.est1_h12);
    n1.csr_h12 = Some(c.quantize(block.est1_h12)?);
    n3.csr_h23 = Some(c.quantize(block.est3_h23)?);

    // Phase 3: node-3 transmits.
    n1.est_h13 = Some(block.est1_h13);
    n1.csr_h13 = Some(c.quantize(block.est1_h13)?);
    n2.csr_h23 = Some(c.quantize(block.est2_h23)?);

    Ok([n1, n2, n3])
}

/// Node-1's phase-4 transmit symbol: the ring sum of its two quantized
/// symbols, mapped back to the constellation and scaled to unit average
/// power.
pub fn phase4_broadcast(node1: &NodeState, c: &Constellation) -> Result<Complex64> {
    let c_h12 = node1
        .csr_h12
        .ok_or(Error::IncompleteNodeState("node-1 h12 symbol"))?;
    let c_h13 = node1
        .csr_h13
        .ok_or(Error::IncompleteNodeState("node-1 h13 symbol"))?;
    let sum = c.phi(c_h12)?.add(c.phi(c_h13)?)?;
    Ok(c.phi_inv(sum)? / c.e_avg().sqrt())
}

/// MAP decode of the broadcast under a uniform prior: equalize by the
/// channel estimate, undo the power scaling, and take the nearest
/// constellation point. The noise level does not move a uniform-prior
/// decision, so `sigma2` is only validated.
pub fn map_decode_broadcast(
    rx: Complex64,
    channel_est: Complex64,
    sigma2: f64,
    c: &Constellation,
) -> Result<Complex64> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::NegativeNoiseVariance(sigma2));
    }
    if channel_est == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroChannelEstimate);
    }
    c.quantize(rx * c.e_avg().sqrt() / channel_est)
}

/// MAP decode under an explicit prior over constellation points: maximizes
/// `ln prior(a) - |rx - est * a / sqrt(E_avg)|^2 / sigma2` over the grid.
/// Reduces to the uniform rule when the prior is flat.
pub fn map_decode_broadcast_with_prior(
    rx: Complex64,
    channel_est: Complex64,
    sigma2: f64,
    prior: &QamPmf,
    c: &Constellation,
) -> Result<Complex64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    if channel_est == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroChannelEstimate);
    }
    let scale = 1.0 / c.e_avg().sqrt();
    let side = c.side();
    let mut best = None;
    for ti in 0..side {
        for tr in 0..side {
            let p = prior.mass_at(tr, ti);
            if p == 0.0 {
                continue;
            }
            let a = Complex64::new(c.pam_points()[tr as usize], c.pam_points()[ti as usize]);
            let score = p.ln() - (rx - channel_est * a * scale).norm_sqr() / sigma2;
            match best {
                Some((s, _)) if s >= score => {}
                _ => best = Some((score, a)),
            }
        }
    }
    best.map(|(_, a)| a).ok_or(Error::EmptySupport)
}

/// Distribution of the broadcast symbol when both of node-1's estimates are
/// standard complex Gaussian channels observed with estimation-error
/// variance `gamma`: each ring coordinate of a quantized estimate follows
/// the PMF induced by `N(0, (1 + gamma)/2)`, and the broadcast coordinate is
/// the ring sum of two such independent draws.
pub fn broadcast_prior(c: &Constellation, gamma: f64) -> Result<QamPmf> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    let per_dim = Pmf::induce(0.0, (1.0 + gamma) / 2.0, c)?;
    let summed = per_dim.cyclic_convolve(&per_dim)?;
    QamPmf::from_parts(summed.clone(), summed)
}

/// Ring subtraction that recovers the unseen symbol: maps both inputs to
/// ring coordinates, subtracts the known one from the decoded broadcast, and
/// maps back.
pub fn recover_csr(
    theta_hat: Complex64,
    own_csr: Complex64,
    c: &Constellation,
) -> Result<Complex64> {
    let diff = c.phi(theta_hat)?.sub(c.phi(own_csr)?)?;
    c.phi_inv(diff)
}

/// Runs one complete round on a drawn block.
///
/// Phase-4 receiver noise comes from the node-2 and node-3 streams in
/// `rngs`, after the estimation errors those streams already produced for
/// the block. When `prior` is given, helper nodes decode with it instead of
/// the uniform rule.
pub fn run_round(
    block: &CoherenceBlock,
    c: &Constellation,
    rngs: &mut TrialRngs,
    sigma2: f64,
    prior: Option<&QamPmf>,
    block_index: u64,
) -> Result<RoundOutput> {
    let [n1, mut n2, mut n3] = run_phases_1_to_3(block, c)?;

    let tx = phase4_broadcast(&n1, c)?;
    let y2 = awgn(block.h12 * tx, sigma2, &mut rngs.node2)?;
    let y3 = awgn(block.h13 * tx, sigma2, &mut rngs.node3)?;
    n2.rx_phase4 = Some(y2);
    n3.rx_phase4 = Some(y3);

    let decode = |rx, est| match prior {
        Some(p) => map_decode_broadcast_with_prior(rx, est, sigma2, p, c),
        None => map_decode_broadcast(rx, est, sigma2, c),
    };
    let theta2 = decode(y2, block.est2_h12)?;
    let theta3 = decode(y3, block.est3_h13)?;
    n2.theta_hat = Some(theta2);
    n3.theta_hat = Some(theta3);

    let own2 = n2.csr_h12.expect("set in phase 1");
    let own3 = n3.csr_h13.expect("set in phase 1");
    n2.csr_h13 = Some(recover_csr(theta2, own2, c)?);
    n3.csr_h12 = Some(recover_csr(theta3, own3, c)?);

    let nodes = [n1, n2, n3];
    let samples = unfold_samples(&nodes, block_index)?;
    Ok(RoundOutput {
        nodes,
        broadcast: tx,
        samples,
    })
}

/// Unfolds each node's two complex symbols into four real samples.
fn unfold_samples(nodes: &[NodeState; 3], block_index: u64) -> Result<[CsrSample; 12]> {
    let mut out = [CsrSample {
        value: 0.0,
        source_channel: SourceChannel::H12,
        part: Part::Re,
        node: NodeId::Node1,
        block_index,
    }; 12];
    let mut k = 0;
    for n in nodes {
        for (source_channel, sym) in [
            (SourceChannel::H12, n.csr_h12),
            (SourceChannel::H13, n.csr_h13),
        ] {
            let sym = sym.ok_or(Error::IncompleteNodeState("symbol after full round"))?;
            for (part, value) in [(Part::Re, sym.re), (Part::Im, sym.im)] {
                out[k] = CsrSample {
                    value,
                    source_channel,
                    part,
                    node: n.node,
                    block_index,
                };
                k += 1;
            }
        }
    }
    Ok(out)
}
