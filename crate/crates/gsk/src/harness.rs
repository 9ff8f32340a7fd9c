//! Experiment orchestration: parameter sweeps, result tables, and emission.
//!
//! Each experiment walks an SNR grid with one deterministic RNG lane per
//! point, calibrates the guard band where the protocol needs one, and
//! reduces the simulated rounds to metric rows with a pinned column order.
//! A point whose calibration fails is reported as an invalid row (NaN
//! value) and the sweep continues; only when every point fails does the
//! run itself error out. All randomness is counter-seeded, so a config and
//! seed pin the full output byte for byte.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rand::Rng as _;

use crate::channel::{complex_normal, draw_block, ChannelParams, CoherenceBlock, TrialRngs};
use crate::consensus::{
    calibrate_guard_bands, exchange_indices, Calibration, ConsensusOutcome, GuardBandQuantizer,
};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::leakage::{empirical_mi, exact_mi_ring, shuffled_mi_floor};
use crate::llr::{build_joint_pmf, decoding_prior, llr_decoding, llr_reciprocal, JointPmfTable};
use crate::pmf::{Pmf, QamPmf};
use crate::protocol::{run_round, NodeId, Part, RoundOutput, SourceChannel};
use crate::recon::{parse_alist, reconcile_block, ParityCheckMatrix};

/// Desk-scale default block count per SNR point.
pub const DEFAULT_BLOCKS: u64 = 200_000;
/// Default calibration block count per point.
pub const DEFAULT_CALIB_BLOCKS: u64 = 50_000;
/// Default master seed.
pub const DEFAULT_SEED: u64 = 2024;
/// Default SNR grid in dB.
pub const DEFAULT_SNR_GRID: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];

/// The built-in (12, 9) parity-check code, also shipped as a fixture file.
pub fn default_parity_check() -> ParityCheckMatrix {
    parse_alist(include_str!("../fixtures/ldpc_12_9.alist")).expect("the built-in code parses")
}

/// Estimation-error variance policy for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GammaMode {
    /// Tie the estimation-error variance to the noise floor of each point.
    TiedToSnr,
    /// Hold it fixed across the sweep.
    Fixed(f64),
}

impl GammaMode {
    fn as_option(self) -> Option<f64> {
        match self {
            GammaMode::TiedToSnr => None,
            GammaMode::Fixed(g) => Some(g),
        }
    }
}

/// How the key-bearing CSR is chosen on doubly-covered sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SelectionMode {
    Likelihood,
    Strength,
    FixedH12,
}

impl SelectionMode {
    pub fn label(self) -> &'static str {
        match self {
            SelectionMode::Likelihood => "likelihood",
            SelectionMode::Strength => "strength",
            SelectionMode::FixedH12 => "fixed_h12",
        }
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "likelihood" => Ok(SelectionMode::Likelihood),
            "strength" => Ok(SelectionMode::Strength),
            "fixed_h12" | "fixed-h12" => Ok(SelectionMode::FixedH12),
            other => Err(Error::Config(format!(
                "unknown selection mode {other:?}; use likelihood, strength, or fixed_h12"
            ))),
        }
    }
}

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; use csv or json"
            ))),
        }
    }
}

/// Axes and knobs of one experiment sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: u32,
    pub snr_db: Vec<f64>,
    pub gamma: GammaMode,
    /// Target initial error rate the guard-band calibration aims for.
    pub target_ier: f64,
    pub n_blocks: u64,
    pub calib_blocks: u64,
    pub seed: u64,
    pub selection_mode: SelectionMode,
    /// Parity-check matrix for reconciliation; `None` means the built-in
    /// (12, 9) code.
    pub ldpc_matrix: Option<PathBuf>,
    /// Suppress the timestamp metadata so identical runs are byte-identical.
    pub reproducible: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 4,
            snr_db: DEFAULT_SNR_GRID.to_vec(),
            gamma: GammaMode::TiedToSnr,
            target_ier: 1e-2,
            n_blocks: DEFAULT_BLOCKS,
            calib_blocks: DEFAULT_CALIB_BLOCKS,
            seed: DEFAULT_SEED,
            selection_mode: SelectionMode::Likelihood,
            ldpc_matrix: None,
            reproducible: false,
        }
    }
}

impl ExperimentConfig {
    /// Checks the sweep invariants and that the modulation order is
    /// constructible.
    pub fn validate(&self) -> Result<()> {
        Constellation::new(self.m)?;
        if self.snr_db.is_empty() {
            return Err(Error::Config("the SNR grid must not be empty".into()));
        }
        if let Some(&bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR {bad} dB is not finite")));
        }
        if self.n_blocks == 0 {
            return Err(Error::Config("n_blocks must be at least 1".into()));
        }
        if self.calib_blocks == 0 {
            return Err(Error::Config("calib_blocks must be at least 1".into()));
        }
        if !(self.target_ier > 0.0 && self.target_ier <= 0.5) {
            return Err(Error::Config(format!(
                "initial error target must lie in (0, 0.5], got {}",
                self.target_ier
            )));
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::NegativeGamma(g));
            }
        }
        Ok(())
    }

    fn parity_check(&self) -> Result<ParityCheckMatrix> {
        match &self.ldpc_matrix {
            Some(path) => crate::recon::load_alist(path),
            None => Ok(default_parity_check()),
        }
    }
}

/// One metric observation. The field order is the pinned CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub m: u32,
    pub snr_db: f64,
    pub target_ier: f64,
    pub mode: String,
    pub metric: String,
    pub value: f64,
    pub n: u64,
    pub seed: u64,
}

/// Pinned CSV header.
pub const CSV_HEADER: &str = "experiment,m,snr_db,target_ier,mode,metric,value,n,seed";

/// An experiment result: rows plus optional creation-time metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
    pub rows: Vec<Row>,
}

impl Table {
    /// Empty table; carries a timestamp unless `reproducible` is set.
    pub fn new(reproducible: bool) -> Self {
        let generated_unix = (!reproducible).then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            generated_unix,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(ts) = self.generated_unix {
            out.push_str(&format!("# generated_unix {ts}\n"));
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.experiment, r.m, r.snr_db, r.target_ier, r.mode, r.metric, r.value, r.n, r.seed
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut generated_unix = None;
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(ts) = rest.trim().strip_prefix("generated_unix ") {
                    generated_unix = ts.trim().parse::<u64>().ok();
                }
                lines.next();
            } else {
                break;
            }
        }
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(Error::Config(format!(
                    "expected the header {CSV_HEADER:?}, found {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Config(format!(
                    "row {} has {} fields, expected 9",
                    i + 1,
                    f.len()
                )));
            }
            let parse_err = |what: &str| Error::Config(format!("row {}: bad {what}", i + 1));
            rows.push(Row {
                experiment: f[0].to_string(),
                m: f[1].parse().map_err(|_| parse_err("m"))?,
                snr_db: f[2].parse().map_err(|_| parse_err("snr_db"))?,
                target_ier: f[3].parse().map_err(|_| parse_err("target_ier"))?,
                mode: f[4].to_string(),
                metric: f[5].to_string(),
                value: f[6].parse().map_err(|_| parse_err("value"))?,
                n: f[7].parse().map_err(|_| parse_err("n"))?,
                seed: f[8].parse().map_err(|_| parse_err("seed"))?,
            });
        }
        Ok(Self {
            generated_unix,
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize") + "\n"
    }
}

/// Writes a table to the path, or to stdout when no path is given.
pub fn emit(table: &Table, format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json(),
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Helper that stamps the sweep-constant columns onto metric rows.
struct RowSink<'a> {
    experiment: &'static str,
    cfg: &'a ExperimentConfig,
    rows: Vec<Row>,
}

impl<'a> RowSink<'a> {
    fn new(experiment: &'static str, cfg: &'a ExperimentConfig) -> Self {
        Self {
            experiment,
            cfg,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, snr_db: f64, mode: &str, metric: &str, value: f64, n: u64) {
        self.rows.push(Row {
            experiment: self.experiment.to_string(),
            m: self.cfg.m,
            snr_db,
            target_ier: self.cfg.target_ier,
            mode: mode.to_string(),
            metric: metric.to_string(),
            value,
            n,
            seed: self.cfg.seed,
        });
    }

    fn into_table(self) -> Table {
        let mut table = Table::new(self.cfg.reproducible);
        table.rows = self.rows;
        table
    }
}

fn calibrate_point(cfg: &ExperimentConfig, snr_db: f64) -> Result<Calibration> {
    calibrate_guard_bands(
        cfg.target_ier,
        snr_db,
        cfg.gamma.as_option(),
        cfg.m,
        cfg.calib_blocks,
        cfg.seed,
    )
}

/// Quantized sample value of one node for one channel part, read off the
/// node-major sample layout of a round.
fn sample_value(round: &RoundOutput, node: NodeId, ch: SourceChannel, part: Part) -> f64 {
    let ch_off = match ch {
        SourceChannel::H12 => 0,
        SourceChannel::H13 => 1,
    };
    let part_off = match part {
        Part::Re => 0,
        Part::Im => 1,
    };
    let s = &round.samples[node.index() * 4 + ch_off * 2 + part_off];
    debug_assert_eq!(s.node, node);
    debug_assert_eq!(s.source_channel, ch);
    debug_assert_eq!(s.part, part);
    s.value
}

fn part_of_index(idx: u64) -> Part {
    if idx.is_multiple_of(2) {
        Part::Re
    } else {
        Part::Im
    }
}

/// One simulated round plus its three-node consensus outcome.
fn consensus_round(
    params: &ChannelParams,
    c: &Constellation,
    q: &GuardBandQuantizer,
    seed: u64,
    point: u64,
    block: u64,
) -> Result<(RoundOutput, ConsensusOutcome)> {
    let mut rngs = TrialRngs::for_trial(seed, point, block);
    let blk = draw_block(params, &mut rngs);
    let round = run_round(&blk, c, &mut rngs, params.sigma2(), None, block)?;
    let outcome = exchange_indices(
        [
            &round.samples[0..4],
            &round.samples[4..8],
            &round.samples[8..12],
        ],
        q,
    )?;
    Ok((round, outcome))
}

/// Necessary condition for a block to contribute any doubly-covered
/// sample: on at least one part, the four holder-side estimates (nodes 1
/// and 2 for h12, nodes 1 and 3 for h13) must quantize out of the guard
/// band. Recovered values can only thin the consensus further.
fn holders_clear_guard_band(
    blk: &CoherenceBlock,
    c: &Constellation,
    q: &GuardBandQuantizer,
) -> bool {
    let clears = |re: f64, im: f64, part: Part| {
        let x = match part {
            Part::Re => re,
            Part::Im => im,
        };
        q.two_level_quantize(c.pam_value(c.quantize_pam_index(x)))
            .bit()
            .is_some()
    };
    [Part::Re, Part::Im].into_iter().any(|part| {
        [
            (blk.est1_h12.re, blk.est1_h12.im),
            (blk.est2_h12.re, blk.est2_h12.im),
            (blk.est1_h13.re, blk.est1_h13.im),
            (blk.est3_h13.re, blk.est3_h13.im),
        ]
        .into_iter()
        .all(|(re, im)| clears(re, im, part))
    })
}

/// Like `consensus_round`, but skips the broadcast phase entirely when no
/// sample index can survive the double-coverage test. Narrow guard bands
/// reject almost every block up front, which makes sweeps that only
/// consume doubly-covered samples orders of magnitude cheaper.
fn consensus_round_filtered(
    params: &ChannelParams,
    c: &Constellation,
    q: &GuardBandQuantizer,
    seed: u64,
    point: u64,
    block: u64,
) -> Result<Option<(RoundOutput, ConsensusOutcome)>> {
    let mut rngs = TrialRngs::for_trial(seed, point, block);
    let blk = draw_block(params, &mut rngs);
    if !holders_clear_guard_band(&blk, c, q) {
        return Ok(None);
    }
    let round = run_round(&blk, c, &mut rngs, params.sigma2(), None, block)?;
    let outcome = exchange_indices(
        [
            &round.samples[0..4],
            &round.samples[4..8],
            &round.samples[8..12],
        ],
        q,
    )?;
    Ok(Some((round, outcome)))
}

/// Marks every metric of a failed point invalid.
fn invalid_point(sink: &mut RowSink, snr_db: f64, modes_metrics: &[(&str, &str)]) {
    for &(mode, metric) in modes_metrics {
        sink.push(snr_db, mode, metric, f64::NAN, 0);
    }
}

fn finish_sweep(sink: RowSink, any_ok: bool, last_err: Option<Error>) -> Result<Table> {
    if !any_ok {
        return Err(last_err.unwrap_or_else(|| Error::Config("empty sweep".into())));
    }
    Ok(sink.into_table())
}

/// Key-rate sweep: secret bits retained per CSR sample of one channel,
/// with and without opportunistic use of the second channel.
///
/// Both modes are measured in one pass over the same rounds, so the sample
/// accounting is identical by construction and the opportunistic set is a
/// superset of the fixed one.
pub fn run_keyrate_experiment(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let c = Constellation::new(cfg.m)?;
    let mut sink = RowSink::new("keyrate", cfg);
    let mut any_ok = false;
    let mut last_err = None;
    for (point, &snr_db) in cfg.snr_db.iter().enumerate() {
        let invalid = [
            ("calibration", "guard_q"),
            ("fixed_h12", "key_rate"),
            ("opportunistic", "key_rate"),
        ];
        let cal = match calibrate_point(cfg, snr_db) {
            Ok(cal) => cal,
            Err(e) => {
                invalid_point(&mut sink, snr_db, &invalid);
                last_err = Some(e);
                continue;
            }
        };
        let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
        let (mut r12, mut r13, mut v) = (0u64, 0u64, 0u64);
        for b in 0..cfg.n_blocks {
            let (_, outcome) =
                consensus_round(&params, &c, &cal.quantizer, cfg.seed, point as u64, b)?;
            r12 += outcome.r_h12.len() as u64;
            r13 += outcome.r_h13.len() as u64;
            v += outcome.v.len() as u64;
        }
        let total = (2 * cfg.n_blocks) as f64;
        sink.push(
            snr_db,
            "calibration",
            "guard_q",
            cal.quantizer.q_plus(),
            cal.consensus_samples,
        );
        sink.push(
            snr_db,
            "fixed_h12",
            "key_rate",
            r12 as f64 / total,
            2 * cfg.n_blocks,
        );
        let union = r12 + r13 - v;
        sink.push(
            snr_db,
            "opportunistic",
            "key_rate",
            union as f64 / total,
            2 * cfg.n_blocks,
        );
        any_ok = true;
    }
    finish_sweep(sink, any_ok, last_err)
}

/// Mismatch of the selected CSR across the three nodes, restricted to
/// sample indices in consensus on both channels, for the likelihood rule
/// and the channel-strength baseline side by side.
pub fn run_selection_experiment(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let c = Constellation::new(cfg.m)?;
    let mut sink = RowSink::new("selection", cfg);
    let mut any_ok = false;
    let mut last_err = None;
    for (point, &snr_db) in cfg.snr_db.iter().enumerate() {
        let invalid = [
            ("calibration", "guard_q"),
            ("likelihood", "mismatch_rate"),
            ("strength", "mismatch_rate"),
        ];
        let cal = match calibrate_point(cfg, snr_db) {
            Ok(cal) => cal,
            Err(e) => {
                invalid_point(&mut sink, snr_db, &invalid);
                last_err = Some(e);
                continue;
            }
        };
        let q = &cal.quantizer;
        let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
        let sigma2 = params.sigma2();
        let mut v_samples = 0u64;
        let mut mismatches = [0u64; 2];
        for b in 0..cfg.n_blocks {
            let Some((round, outcome)) =
                consensus_round_filtered(&params, &c, q, cfg.seed, point as u64, b)?
            else {
                continue;
            };
            let node1 = &round.nodes[0];
            for &idx in &outcome.v {
                let part = part_of_index(idx);
                let parts = match part {
                    Part::Re => crate::selection::SymbolParts::ReOnly,
                    Part::Im => crate::selection::SymbolParts::ImOnly,
                };
                v_samples += 1;
                let choices = [
                    crate::selection::select_csr(node1, &c, q, sigma2, parts)?,
                    crate::selection::select_csr_by_strength(node1)?,
                ];
                // Key material is the sign bit, so disagreement is
                // measured on bits; consensus guarantees every retained
                // sample is out of band at all three nodes.
                let bit = |n: NodeId, ch: SourceChannel| -> Result<u8> {
                    q.two_level_quantize(sample_value(&round, n, ch, part))
                        .bit()
                        .ok_or(Error::SampleInGuardBand { index: idx })
                };
                for (rule, &ch) in choices.iter().enumerate() {
                    let reference = bit(NodeId::Node1, ch)?;
                    let disagrees = bit(NodeId::Node2, ch)? != reference
                        || bit(NodeId::Node3, ch)? != reference;
                    mismatches[rule] += u64::from(disagrees);
                }
            }
        }
        sink.push(
            snr_db,
            "calibration",
            "guard_q",
            q.q_plus(),
            cal.consensus_samples,
        );
        for (rule, mode) in ["likelihood", "strength"].into_iter().enumerate() {
            // No doubly-covered samples: an insufficient-data row, not a
            // failed point.
            let rate = if v_samples == 0 {
                f64::NAN
            } else {
                mismatches[rule] as f64 / v_samples as f64
            };
            sink.push(snr_db, mode, "mismatch_rate", rate, v_samples);
        }
        any_ok = true;
    }
    finish_sweep(sink, any_ok, last_err)
}

/// Per-node key and soft information, relative to node-1's key bits.
struct KeyStreams {
    bits1: Vec<u8>,
    llrs2: Vec<f64>,
    llrs3: Vec<f64>,
}

/// Walks one point's rounds and builds node-1's key bits plus the matching
/// LLR streams at nodes 2 and 3 over the retained sample indices.
fn collect_key_streams(
    cfg: &ExperimentConfig,
    c: &Constellation,
    q: &GuardBandQuantizer,
    table: &JointPmfTable,
    prior: &Pmf,
    snr_db: f64,
    point: u64,
) -> Result<KeyStreams> {
    let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
    let sigma2 = params.sigma2();
    let mut streams = KeyStreams {
        bits1: Vec::new(),
        llrs2: Vec::new(),
        llrs3: Vec::new(),
    };
    for b in 0..cfg.n_blocks {
        let (round, outcome) = consensus_round(&params, c, q, cfg.seed, point, b)?;
        let node1 = &round.nodes[0];
        let node2 = &round.nodes[1];
        let node3 = &round.nodes[2];
        // Retained indices with their key-bearing channel, in index order.
        let mut picks: Vec<(u64, SourceChannel)> = Vec::new();
        match cfg.selection_mode {
            SelectionMode::FixedH12 => {
                picks.extend(outcome.r_h12.iter().map(|&i| (i, SourceChannel::H12)));
            }
            mode => {
                picks.extend(
                    outcome
                        .exclusive_h12
                        .iter()
                        .map(|&i| (i, SourceChannel::H12)),
                );
                picks.extend(
                    outcome
                        .exclusive_h13
                        .iter()
                        .map(|&i| (i, SourceChannel::H13)),
                );
                for &idx in &outcome.v {
                    let parts = match part_of_index(idx) {
                        Part::Re => crate::selection::SymbolParts::ReOnly,
                        Part::Im => crate::selection::SymbolParts::ImOnly,
                    };
                    let ch = match mode {
                        SelectionMode::Likelihood => {
                            crate::selection::select_csr(node1, c, q, sigma2, parts)?
                        }
                        SelectionMode::Strength => crate::selection::select_csr_by_strength(node1)?,
                        SelectionMode::FixedH12 => unreachable!(),
                    };
                    picks.push((idx, ch));
                }
                picks.sort_unstable_by_key(|&(i, _)| i);
            }
        }
        for (idx, ch) in picks {
            let part = part_of_index(idx);
            let v1 = sample_value(&round, NodeId::Node1, ch, part);
            let bit = q
                .two_level_quantize(v1)
                .bit()
                .ok_or(Error::SampleInGuardBand { index: idx })?;
            streams.bits1.push(bit);
            // The holder of the selected channel computes a reciprocal
            // LLR from its own sample; the other node decodes through the
            // broadcast, subtracting the channel it holds.
            let (llr2, llr3) = match ch {
                SourceChannel::H12 => {
                    let own2 = sample_value(&round, NodeId::Node2, SourceChannel::H12, part);
                    let rec3 = sample_value(&round, NodeId::Node3, SourceChannel::H12, part);
                    let own3 = sample_value(&round, NodeId::Node3, SourceChannel::H13, part);
                    (
                        llr_reciprocal(own2, table, q)?,
                        llr_decoding(rec3, own3, node3.est_h13.unwrap(), sigma2, prior, c, q)?,
                    )
                }
                SourceChannel::H13 => {
                    let rec2 = sample_value(&round, NodeId::Node2, SourceChannel::H13, part);
                    let own2 = sample_value(&round, NodeId::Node2, SourceChannel::H12, part);
                    let own3 = sample_value(&round, NodeId::Node3, SourceChannel::H13, part);
                    (
                        llr_decoding(rec2, own2, node2.est_h12.unwrap(), sigma2, prior, c, q)?,
                        llr_reciprocal(own3, table, q)?,
                    )
                }
            };
            streams.llrs2.push(llr2);
            streams.llrs3.push(llr3);
        }
    }
    Ok(streams)
}

/// Full pipeline sweep: protocol, consensus, selection, LLRs, syndrome
/// decoding. Pre- and post-reconciliation mismatch are measured against
/// node-1's key, aggregated over nodes 2 and 3.
pub fn run_reconciliation_experiment(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let c = Constellation::new(cfg.m)?;
    let h = cfg.parity_check()?;
    let mut sink = RowSink::new("reconcile", cfg);
    let mut any_ok = false;
    let mut last_err = None;
    let mode = cfg.selection_mode.label();
    for (point, &snr_db) in cfg.snr_db.iter().enumerate() {
        let invalid = [
            ("calibration", "guard_q"),
            (mode, "pre_mismatch_rate"),
            (mode, "post_mismatch_rate"),
            (mode, "converged_fraction"),
            (mode, "disclosed_bits"),
        ];
        let cal = match calibrate_point(cfg, snr_db) {
            Ok(cal) => cal,
            Err(e) => {
                invalid_point(&mut sink, snr_db, &invalid);
                last_err = Some(e);
                continue;
            }
        };
        let q = &cal.quantizer;
        let gamma = cfg.gamma.as_option().unwrap_or_else(|| {
            ChannelParams::new(snr_db, None)
                .map(|p| p.gamma())
                .unwrap_or(0.0)
        });
        let table = build_joint_pmf(snr_db, gamma, &c)?;
        let prior = decoding_prior(&c, q, gamma)?;
        let streams = collect_key_streams(cfg, &c, q, &table, &prior, snr_db, point as u64)?;
        if streams.bits1.is_empty() {
            invalid_point(&mut sink, snr_db, &invalid);
            continue;
        }
        let o2 = reconcile_block(&streams.bits1, &streams.llrs2, &h, 50)?;
        let o3 = reconcile_block(&streams.bits1, &streams.llrs3, &h, 50)?;
        let bits = o2.bits_compared + o3.bits_compared;
        let frames = o2.frames + o3.frames;
        sink.push(
            snr_db,
            "calibration",
            "guard_q",
            q.q_plus(),
            cal.consensus_samples,
        );
        let pre = (o2.pre_mismatch + o3.pre_mismatch) as f64 / bits as f64;
        let post = (o2.post_mismatch + o3.post_mismatch) as f64 / bits as f64;
        let conv = (o2.converged_frames + o3.converged_frames) as f64 / frames as f64;
        sink.push(snr_db, mode, "pre_mismatch_rate", pre, bits);
        sink.push(snr_db, mode, "post_mismatch_rate", post, bits);
        sink.push(snr_db, mode, "converged_fraction", conv, frames);
        sink.push(
            snr_db,
            mode,
            "disclosed_bits",
            (o2.disclosed_bits + o3.disclosed_bits) as f64,
            frames,
        );
        any_ok = true;
    }
    finish_sweep(sink, any_ok, last_err)
}

/// One coherence block whose keyed channels quantize to uniformly drawn
/// constellation points while everything else follows the usual draw
/// order. This realizes the premise of the zero-leakage propositions
/// (uniform quantized CSRs) inside the real protocol machinery.
fn uniform_csr_block(c: &Constellation, gamma: f64, rngs: &mut TrialRngs) -> CoherenceBlock {
    let point = |rng: &mut rand_chacha::ChaCha8Rng| {
        let re = rng.random_range(0..c.side());
        let im = rng.random_range(0..c.side());
        num_complex::Complex64::new(c.pam_value(re), c.pam_value(im))
    };
    let h12 = point(&mut rngs.env);
    let h13 = point(&mut rngs.env);
    let h23 = complex_normal(1.0, &mut rngs.env);
    CoherenceBlock {
        h12,
        h13,
        h23,
        est1_h12: h12 + complex_normal(gamma, &mut rngs.node1),
        est1_h13: h13 + complex_normal(gamma, &mut rngs.node1),
        est2_h12: h12 + complex_normal(gamma, &mut rngs.node2),
        est2_h23: h23 + complex_normal(gamma, &mut rngs.node2),
        est3_h13: h13 + complex_normal(gamma, &mut rngs.node3),
        est3_h23: h23 + complex_normal(gamma, &mut rngs.node3),
    }
}

/// Symbol-index pairs feeding the discrete mutual-information estimator.
type IndexPairs = Vec<(u32, u32)>;

/// (node-1 CSR index, broadcast index) pairs for both keyed channels over
/// one batch of rounds.
fn broadcast_pairs(
    cfg: &ExperimentConfig,
    c: &Constellation,
    point: u64,
    blocks: std::ops::Range<u64>,
    uniform_csr: bool,
) -> Result<(IndexPairs, IndexPairs)> {
    let params = ChannelParams::new(cfg.snr_db[point as usize], cfg.gamma.as_option())?;
    let n = (blocks.end - blocks.start) as usize;
    let mut pairs12 = Vec::with_capacity(n);
    let mut pairs13 = Vec::with_capacity(n);
    let scale = c.e_avg().sqrt();
    for b in blocks {
        let mut rngs = TrialRngs::for_trial(cfg.seed, point, b);
        let blk = if uniform_csr {
            uniform_csr_block(c, params.gamma(), &mut rngs)
        } else {
            draw_block(&params, &mut rngs)
        };
        let round = run_round(&blk, c, &mut rngs, params.sigma2(), None, b)?;
        let node1 = &round.nodes[0];
        let index_of = |z: num_complex::Complex64| -> u32 {
            c.quantize_pam_index(z.re) * c.side() + c.quantize_pam_index(z.im)
        };
        let w = index_of(round.broadcast * scale);
        pairs12.push((index_of(node1.csr_h12.unwrap()), w));
        pairs13.push((index_of(node1.csr_h13.unwrap()), w));
    }
    Ok((pairs12, pairs13))
}

/// Leakage sweep, reported in two regimes.
///
/// Under the propositions' premise of uniformly distributed quantized
/// CSRs, the broadcast hides each single CSR completely; `exact_uniform`
/// states that in closed form and `empirical_uniform` checks it on
/// simulated rounds whose keyed channels are drawn on the grid. Raw
/// Rayleigh rounds concentrate the quantizer output on the inner points,
/// and the resulting single-CSR leakage is real; `exact_channel_prior`
/// predicts it from the Gaussian-induced prior and `empirical` measures it
/// on unmodified rounds. Each empirical estimate ships with a
/// shuffled-control bias floor.
pub fn run_leakage_experiment(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let c = Constellation::new(cfg.m)?;
    let mut sink = RowSink::new("leakage", cfg);
    let uniform = QamPmf::from_parts(Pmf::uniform(&c), Pmf::uniform(&c))?;
    let exact_uniform = exact_mi_ring(&uniform, &uniform, &c)?;
    let alphabet = c.side() * c.side();
    let mut any_ok = false;
    for (point, &snr_db) in cfg.snr_db.iter().enumerate() {
        sink.push(
            snr_db,
            "exact_uniform",
            "mi_single_12",
            exact_uniform.mi_single_12,
            0,
        );
        sink.push(
            snr_db,
            "exact_uniform",
            "mi_single_13",
            exact_uniform.mi_single_13,
            0,
        );
        sink.push(
            snr_db,
            "exact_uniform",
            "mi_joint",
            exact_uniform.mi_joint,
            0,
        );

        let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
        let est_var = (1.0 + params.gamma()) / 2.0;
        let induced = Pmf::induce(0.0, est_var, &c)?;
        let channel_prior = QamPmf::from_parts(induced.clone(), induced)?;
        let exact_channel = exact_mi_ring(&channel_prior, &channel_prior, &c)?;
        sink.push(
            snr_db,
            "exact_channel_prior",
            "mi_single_12",
            exact_channel.mi_single_12,
            0,
        );
        sink.push(
            snr_db,
            "exact_channel_prior",
            "mi_single_13",
            exact_channel.mi_single_13,
            0,
        );
        sink.push(
            snr_db,
            "exact_channel_prior",
            "mi_joint",
            exact_channel.mi_joint,
            0,
        );

        let mut shuffle_rng = crate::channel::stream_rng(cfg.seed, point as u64, u64::MAX, 101);
        for (mode, uniform_csr, blocks) in [
            ("empirical", false, 0..cfg.n_blocks),
            ("empirical_uniform", true, cfg.n_blocks..2 * cfg.n_blocks),
        ] {
            let (pairs12, pairs13) = broadcast_pairs(cfg, &c, point as u64, blocks, uniform_csr)?;
            let mut estimate = |pairs: &[(u32, u32)]| -> Result<(f64, f64)> {
                let mi = empirical_mi(pairs, (alphabet, alphabet), false)?;
                let floor =
                    shuffled_mi_floor(pairs, (alphabet, alphabet), false, 30, &mut shuffle_rng)?;
                Ok((mi, floor))
            };
            // The exact rows stand on their own; an undersampled empirical
            // estimate degrades to invalid rows rather than failing the
            // point.
            match (estimate(&pairs12), estimate(&pairs13)) {
                (Ok((mi12, floor12)), Ok((mi13, floor13))) => {
                    let n = pairs12.len() as u64;
                    sink.push(snr_db, mode, "mi_single_12", mi12, n);
                    sink.push(snr_db, mode, "bias_floor_12", floor12, n);
                    sink.push(snr_db, mode, "mi_single_13", mi13, n);
                    sink.push(snr_db, mode, "bias_floor_13", floor13, n);
                }
                (Err(e), _) | (_, Err(e)) => {
                    for metric in [
                        "mi_single_12",
                        "bias_floor_12",
                        "mi_single_13",
                        "bias_floor_13",
                    ] {
                        sink.push(snr_db, mode, metric, f64::NAN, cfg.n_blocks);
                    }
                    eprintln!("leakage: {mode} estimate skipped at {snr_db} dB: {e}");
                }
            }
        }
        any_ok = true;
    }
    finish_sweep(sink, any_ok, None)
}

/// Guard-band calibration sweep: the accepted band level and its measured
/// mismatch per point.
pub fn run_calibration(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut sink = RowSink::new("calibrate", cfg);
    let mut any_ok = false;
    let mut last_err = None;
    for &snr_db in &cfg.snr_db {
        match calibrate_point(cfg, snr_db) {
            Ok(cal) => {
                sink.push(
                    snr_db,
                    "calibration",
                    "guard_q",
                    cal.quantizer.q_plus(),
                    cal.consensus_samples,
                );
                sink.push(
                    snr_db,
                    "calibration",
                    "achieved_ier",
                    cal.achieved_mismatch,
                    cal.consensus_samples,
                );
                sink.push(
                    snr_db,
                    "calibration",
                    "consensus_fraction",
                    cal.consensus_fraction,
                    2 * cfg.calib_blocks,
                );
                any_ok = true;
            }
            Err(e) => {
                let invalid = [
                    ("calibration", "guard_q"),
                    ("calibration", "achieved_ier"),
                    ("calibration", "consensus_fraction"),
                ];
                invalid_point(&mut sink, snr_db, &invalid);
                last_err = Some(e);
            }
        }
    }
    finish_sweep(sink, any_ok, last_err)
}

/// A key bit of node-1 paired with another node's LLR for it.
pub type BitLlr = (u8, f64);

/// Reciprocal-role LLR stream: for every h12 and h13 sample retained by
/// consensus, the holder node's reciprocal LLR paired with node-1's bit.
pub fn reciprocal_llr_stream(
    cfg: &ExperimentConfig,
    snr_db: f64,
    q: &GuardBandQuantizer,
    n_blocks: u64,
) -> Result<Vec<BitLlr>> {
    let c = Constellation::new(cfg.m)?;
    let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
    let gamma = params.gamma();
    let table = build_joint_pmf(snr_db, gamma, &c)?;
    let mut out = Vec::new();
    for b in 0..n_blocks {
        let (round, outcome) = consensus_round(&params, &c, q, cfg.seed, 0, b)?;
        for (set, ch, holder) in [
            (&outcome.r_h12, SourceChannel::H12, NodeId::Node2),
            (&outcome.r_h13, SourceChannel::H13, NodeId::Node3),
        ] {
            for &idx in set.iter() {
                let part = part_of_index(idx);
                let v1 = sample_value(&round, NodeId::Node1, ch, part);
                let bit = q
                    .two_level_quantize(v1)
                    .bit()
                    .ok_or(Error::SampleInGuardBand { index: idx })?;
                let own = sample_value(&round, holder, ch, part);
                out.push((bit, llr_reciprocal(own, &table, q)?));
            }
        }
    }
    Ok(out)
}

/// Decoding-role LLR stream, restricted to sample indices in consensus on
/// both channels: nodes 2 and 3 each decode the channel they do not hold
/// through the broadcast, paired with node-1's bit for that channel.
pub fn v_decoding_llr_stream(
    cfg: &ExperimentConfig,
    snr_db: f64,
    q: &GuardBandQuantizer,
    n_blocks: u64,
) -> Result<Vec<BitLlr>> {
    let c = Constellation::new(cfg.m)?;
    let params = ChannelParams::new(snr_db, cfg.gamma.as_option())?;
    let sigma2 = params.sigma2();
    let gamma = params.gamma();
    let prior = decoding_prior(&c, q, gamma)?;
    let mut out = Vec::new();
    for b in 0..n_blocks {
        let Some((round, outcome)) = consensus_round_filtered(&params, &c, q, cfg.seed, 0, b)?
        else {
            continue;
        };
        let node2 = &round.nodes[1];
        let node3 = &round.nodes[2];
        for &idx in &outcome.v {
            let part = part_of_index(idx);
            let bit_for = |ch: SourceChannel| -> Result<u8> {
                let v1 = sample_value(&round, NodeId::Node1, ch, part);
                q.two_level_quantize(v1)
                    .bit()
                    .ok_or(Error::SampleInGuardBand { index: idx })
            };
            // Node-3 decodes h12 over its h13 link.
            let rec3 = sample_value(&round, NodeId::Node3, SourceChannel::H12, part);
            let own3 = sample_value(&round, NodeId::Node3, SourceChannel::H13, part);
            out.push((
                bit_for(SourceChannel::H12)?,
                llr_decoding(rec3, own3, node3.est_h13.unwrap(), sigma2, &prior, &c, q)?,
            ));
            // Node-2 decodes h13 over its h12 link.
            let rec2 = sample_value(&round, NodeId::Node2, SourceChannel::H13, part);
            let own2 = sample_value(&round, NodeId::Node2, SourceChannel::H12, part);
            out.push((
                bit_for(SourceChannel::H13)?,
                llr_decoding(rec2, own2, node2.est_h12.unwrap(), sigma2, &prior, &c, q)?,
            ));
        }
    }
    Ok(out)
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
