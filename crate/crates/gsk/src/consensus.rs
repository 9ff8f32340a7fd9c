//! Guard-band quantization, index-exchange consensus, and band calibration.
//!
//! Each PAM-valued sample becomes a key bit through a two-level quantizer
//! with a dead zone: samples strictly above `q_plus` map to 1, strictly
//! below `q_minus` map to 0, and anything in between (boundaries included)
//! is out of consensus. The three nodes then agree on which sample indices
//! survived at all of them by passing index sets around the ring
//! (node-2 to node-1 to node-3); only indices, never signs, travel over the
//! public channel.
//!
//! Guard bands are calibrated per operating point: the smallest symmetric
//! band on a quarter-minimum-distance grid whose measured reciprocal-pair
//! mismatch over a seeded Monte Carlo run stays at or below the requested
//! initial error rate.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::channel::{draw_block, ChannelParams, TrialRngs};
use crate::constellation::{Constellation, D_MIN};
use crate::error::{Error, Result};
use crate::protocol::{run_round, CsrSample, Part, SourceChannel};

/// Spacing of the calibration search grid for guard-band levels.
pub const GUARD_GRID_STEP: f64 = D_MIN / 8.0;

/// Trials drawn during calibration use this reserved point index, so
/// evaluation sweeps never replay calibration randomness.
const CALIBRATION_POINT: u64 = u64::MAX;

/// Outcome of the two-level quantizer for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Zero,
    One,
    NoConsensus,
}

impl Decision {
    /// The key bit, if the sample is in consensus.
    pub fn bit(self) -> Option<u8> {
        match self {
            Decision::Zero => Some(0),
            Decision::One => Some(1),
            Decision::NoConsensus => None,
        }
    }
}

/// Two-level quantizer with a guard band `[q_minus, q_plus]` around zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardBandQuantizer {
    q_minus: f64,
    q_plus: f64,
}

impl GuardBandQuantizer {
    pub fn new(q_minus: f64, q_plus: f64) -> Result<Self> {
        if !q_minus.is_finite() || !q_plus.is_finite() || q_minus > 0.0 || q_plus < 0.0 {
            return Err(Error::Config(format!(
                "guard band must satisfy q_minus <= 0 <= q_plus, got [{q_minus}, {q_plus}]"
            )));
        }
        Ok(Self { q_minus, q_plus })
    }

    /// Symmetric band `[-q, q]`.
    pub fn symmetric(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Config(format!("guard level must be >= 0, got {q}")));
        }
        Ok(Self {
            q_minus: -q,
            q_plus: q,
        })
    }

    pub fn q_plus(&self) -> f64 {
        self.q_plus
    }

    pub fn q_minus(&self) -> f64 {
        self.q_minus
    }

    /// The two-level rule. Band boundaries are out of consensus, and so is
    /// any non-finite input.
    pub fn two_level_quantize(&self, alpha: f64) -> Decision {
        if alpha > self.q_plus {
            Decision::One
        } else if alpha < self.q_minus {
            Decision::Zero
        } else {
            Decision::NoConsensus
        }
    }
}

/// Position of a sample in the per-channel index space: two samples per
/// block, real part first.
pub fn sample_index(block_index: u64, part: Part) -> u64 {
    2 * block_index
        + match part {
            Part::Re => 0,
            Part::Im => 1,
        }
}

/// Per-channel index sets, as exchanged over the public channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSets {
    pub h12: BTreeSet<u64>,
    pub h13: BTreeSet<u64>,
}

/// The three public messages of one consensus exchange, in transmission
/// order. Serializable so leakage audits can inspect exactly what an
/// eavesdropper saw: index sets only, no sample values or signs.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeTranscript {
    /// Node-2's in-consensus indices, sent to node-1.
    pub node2_report: IndexSets,
    /// Indices surviving at node-2 and node-1, forwarded to node-3.
    pub node1_forward: IndexSets,
    /// Final three-node consensus, broadcast by node-3.
    pub node3_broadcast: IndexSets,
}

/// Consensus sets after a full exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsensusOutcome {
    /// Indices where the h12 sample is in consensus at all three nodes.
    pub r_h12: BTreeSet<u64>,
    /// Same for h13.
    pub r_h13: BTreeSet<u64>,
    /// Indices in consensus on both channels; these get one selected bit.
    pub v: BTreeSet<u64>,
    /// In consensus on h12 only.
    pub exclusive_h12: BTreeSet<u64>,
    /// In consensus on h13 only.
    pub exclusive_h13: BTreeSet<u64>,
}

impl ConsensusOutcome {
    fn from_final_sets(r_h12: BTreeSet<u64>, r_h13: BTreeSet<u64>) -> Self {
        let v: BTreeSet<u64> = r_h12.intersection(&r_h13).copied().collect();
        let exclusive_h12 = r_h12.difference(&v).copied().collect();
        let exclusive_h13 = r_h13.difference(&v).copied().collect();
        Self {
            r_h12,
            r_h13,
            v,
            exclusive_h12,
            exclusive_h13,
        }
    }

    /// Secret samples retained per block: one per exclusive index plus one
    /// per doubly-covered index.
    pub fn kept_samples(&self) -> u64 {
        (self.exclusive_h12.len() + self.exclusive_h13.len() + self.v.len()) as u64
    }
}

type SampleMap = BTreeMap<(u8, u64), f64>;

fn channel_tag(ch: SourceChannel) -> u8 {
    match ch {
        SourceChannel::H12 => 0,
        SourceChannel::H13 => 1,
    }
}

fn index_samples(samples: &[CsrSample]) -> Result<SampleMap> {
    let mut map = SampleMap::new();
    for s in samples {
        let key = (
            channel_tag(s.source_channel),
            sample_index(s.block_index, s.part),
        );
        if map.insert(key, s.value).is_some() {
            return Err(Error::Config(format!(
                "duplicate sample for channel {:?} index {}",
                s.source_channel, key.1
            )));
        }
    }
    Ok(map)
}

fn in_consensus_set(map: &SampleMap, tag: u8, q: &GuardBandQuantizer) -> BTreeSet<u64> {
    map.iter()
        .filter(|((ch, _), &v)| *ch == tag && q.two_level_quantize(v) != Decision::NoConsensus)
        .map(|((_, idx), _)| *idx)
        .collect()
}

/// Runs the index exchange and also returns the public transcript.
///
/// `node_samples` holds the per-node sample streams in node order. All
/// three streams must cover the same (channel, index) positions.
pub fn exchange_indices_with_transcript(
    node_samples: [&[CsrSample]; 3],
    q: &GuardBandQuantizer,
) -> Result<(ConsensusOutcome, ExchangeTranscript)> {
    let n1 = index_samples(node_samples[0])?;
    let n2 = index_samples(node_samples[1])?;
    let n3 = index_samples(node_samples[2])?;
    if n1.len() != n2.len() || n1.len() != n3.len() {
        return Err(Error::SampleLengthMismatch(
            n1.len(),
            n2.len().max(n3.len()),
        ));
    }
    for key in n1.keys() {
        if !n2.contains_key(key) || !n3.contains_key(key) {
            return Err(Error::MissingSample(key.1));
        }
    }

    let sets_for = |map: &SampleMap| IndexSets {
        h12: in_consensus_set(map, 0, q),
        h13: in_consensus_set(map, 1, q),
    };

    // Node-2 reports first; node-1 strikes what it cannot match and
    // forwards; node-3 strikes again and broadcasts the result.
    let node2_report = sets_for(&n2);
    let own1 = sets_for(&n1);
    let node1_forward = IndexSets {
        h12: node2_report.h12.intersection(&own1.h12).copied().collect(),
        h13: node2_report.h13.intersection(&own1.h13).copied().collect(),
    };
    let own3 = sets_for(&n3);
    let node3_broadcast = IndexSets {
        h12: node1_forward.h12.intersection(&own3.h12).copied().collect(),
        h13: node1_forward.h13.intersection(&own3.h13).copied().collect(),
    };

    let outcome =
        ConsensusOutcome::from_final_sets(node3_broadcast.h12.clone(), node3_broadcast.h13.clone());
    Ok((
        outcome,
        ExchangeTranscript {
            node2_report,
            node1_forward,
            node3_broadcast,
        },
    ))
}

/// Index exchange without the transcript.
pub fn exchange_indices(
    node_samples: [&[CsrSample]; 3],
    q: &GuardBandQuantizer,
) -> Result<ConsensusOutcome> {
    exchange_indices_with_transcript(node_samples, q).map(|(outcome, _)| outcome)
}

/// Reads one node's key bits at the given `(channel, index)` positions, in
/// the order given.
///
/// Every requested position must be held by the node and be in consensus;
/// asking for an in-band sample is a contract violation, because consensus
/// should have excluded it.
pub fn extract_bits(
    samples: &[CsrSample],
    indices: &[(SourceChannel, u64)],
    q: &GuardBandQuantizer,
) -> Result<Vec<u8>> {
    let map = index_samples(samples)?;
    indices
        .iter()
        .map(|&(ch, idx)| {
            let v = map
                .get(&(channel_tag(ch), idx))
                .copied()
                .ok_or(Error::MissingSample(idx))?;
            q.two_level_quantize(v)
                .bit()
                .ok_or(Error::SampleInGuardBand { index: idx })
        })
        .collect()
}

/// Result of a guard-band calibration run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Calibration {
    pub quantizer: GuardBandQuantizer,
    /// Measured reciprocal mismatch at the accepted band (max over the two
    /// channels).
    pub achieved_mismatch: f64,
    /// In-consensus samples behind that measurement, min over channels.
    pub consensus_samples: u64,
    /// Fraction of all samples surviving the band, averaged over channels.
    pub consensus_fraction: f64,
}

/// Per-sample calibration record: survival threshold and pair agreement.
struct PairStat {
    /// Smallest |value| among the three nodes; the sample is in consensus
    /// at all of them iff this exceeds the guard level.
    threshold: f64,
    /// Whether the reciprocal pair disagrees in sign.
    mismatch: bool,
}

/// Finds the smallest symmetric guard band meeting `target_initial_error`.
///
/// Runs `n_calib_blocks` seeded protocol rounds, then sweeps the band level
/// over multiples of [`GUARD_GRID_STEP`]. For each level, the mismatch
/// estimate is the sign-disagreement rate of the reciprocal pair on each
/// channel (node-1/node-2 on h12 samples, node-1/node-3 on h13 samples),
/// restricted to samples in consensus at all three nodes, taking the worse
/// channel. A level is accepted only with at least 100 consensus samples
/// per channel behind its estimate; otherwise calibration fails with the
/// best rate seen.
pub fn calibrate_guard_bands(
    target_initial_error: f64,
    snr_db: f64,
    gamma: Option<f64>,
    m: u32,
    n_calib_blocks: u64,
    seed: u64,
) -> Result<Calibration> {
    if !(target_initial_error > 0.0 && target_initial_error <= 0.5) {
        return Err(Error::Config(format!(
            "initial error target must lie in (0, 0.5], got {target_initial_error}"
        )));
    }
    if n_calib_blocks == 0 {
        return Err(Error::Config("calibration needs at least one block".into()));
    }
    let c = Constellation::new(m)?;
    let params = ChannelParams::new(snr_db, gamma)?;

    // One simulation pass; the band sweep reuses these records.
    let n_samples = (2 * n_calib_blocks) as usize;
    let mut h12_stats = Vec::with_capacity(n_samples);
    let mut h13_stats = Vec::with_capacity(n_samples);
    for b in 0..n_calib_blocks {
        let mut rngs = TrialRngs::for_trial(seed, CALIBRATION_POINT, b);
        let blk = draw_block(&params, &mut rngs);
        let out = run_round(&blk, &c, &mut rngs, params.sigma2(), None, b)?;
        let [n1, n2, n3] = out.nodes;
        for pick in [
            |z: num_complex::Complex64| z.re,
            |z: num_complex::Complex64| z.im,
        ] {
            let (a, b2, c3) = (
                pick(n1.csr_h12.unwrap()),
                pick(n2.csr_h12.unwrap()),
                pick(n3.csr_h12.unwrap()),
            );
            h12_stats.push(PairStat {
                threshold: a.abs().min(b2.abs()).min(c3.abs()),
                mismatch: (a > 0.0) != (b2 > 0.0),
            });
            let (a, b2, c3) = (
                pick(n1.csr_h13.unwrap()),
                pick(n3.csr_h13.unwrap()),
                pick(n2.csr_h13.unwrap()),
            );
            h13_stats.push(PairStat {
                threshold: a.abs().min(b2.abs()).min(c3.abs()),
                mismatch: (a > 0.0) != (b2 > 0.0),
            });
        }
    }

    let measure = |stats: &[PairStat], q: f64| {
        let mut kept = 0u64;
        let mut bad = 0u64;
        for s in stats {
            if s.threshold > q {
                kept += 1;
                bad += s.mismatch as u64;
            }
        }
        (
            kept,
            if kept == 0 {
                1.0
            } else {
                bad as f64 / kept as f64
            },
        )
    };

    let max_level = (c.side() - 1) as f64;
    let steps = (max_level / GUARD_GRID_STEP) as u32;
    let mut best = 1.0f64;
    for k in 0..=steps {
        let q = k as f64 * GUARD_GRID_STEP;
        let (kept12, miss12) = measure(&h12_stats, q);
        let (kept13, miss13) = measure(&h13_stats, q);
        if kept12 < 100 || kept13 < 100 {
            break; // larger bands only shrink the evidence further
        }
        let mismatch = miss12.max(miss13);
        best = best.min(mismatch);
        if mismatch <= target_initial_error {
            return Ok(Calibration {
                quantizer: GuardBandQuantizer::symmetric(q)?,
                achieved_mismatch: mismatch,
                consensus_samples: kept12.min(kept13),
                consensus_fraction: (kept12 + kept13) as f64 / (2 * n_samples) as f64,
            });
        }
    }
    Err(Error::CalibrationFailure {
        target: target_initial_error,
        snr_db,
        best,
    })
}
