//! Simulation library for opportunistic group secret-key generation among
//! three wireless nodes sharing reciprocal fading channels.
//!
//! One designated node pair-measures two channels, quantizes them onto a
//! square QAM grid, and broadcasts the modular ring sum of the two quantized
//! symbols so that each remote node can recover the channel it cannot observe
//! by subtracting its own. Key material is then distilled with a guard-band
//! consensus pass, an opportunistic choice of which channel to keep when both
//! survive, soft-information (LLR) generation at the non-reference nodes, and
//! LDPC syndrome reconciliation.
//!
//! The crate is organized bottom-up:
//!
//! - [`constellation`]: the QAM grid, the Gaussian-integer ring, and the maps
//!   between them;
//! - [`pmf`]: Gaussian-induced PMFs over the grid and their ring shifts;
//! - [`channel`]: reciprocal Rayleigh blocks, estimation noise, AWGN;
//! - [`protocol`]: the four-phase sharing round itself;
//! - [`consensus`]: guard-band quantization, index exchange, calibration;
//! - [`selection`]: likelihood- and strength-based choice of the kept channel;
//! - [`llr`]: soft information for reconciliation at both node roles;
//! - [`recon`]: parity-check matrices, alist I/O, syndrome decoding;
//! - [`leakage`]: exact and empirical mutual-information audits of the
//!   broadcast;
//! - [`harness`]: seeded Monte Carlo experiments behind the CLI and the
//!   runnable examples.

// Guards of the form `!(x >= 0.0)` are load-bearing: they reject NaN along
// with genuinely negative values, which `x < 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod consensus;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod leakage;
pub mod llr;
pub mod pmf;
pub mod protocol;
pub mod recon;
pub mod selection;

pub use channel::{ChannelParams, CoherenceBlock, TrialRngs};
pub use consensus::{Calibration, ConsensusOutcome, Decision, GuardBandQuantizer};
pub use constellation::{Constellation, RingElement, D_MIN};
pub use error::{Error, Result};
pub use harness::{emit, ExperimentConfig, GammaMode, OutputFormat, Row, SelectionMode, Table};
pub use leakage::RingLeakage;
pub use llr::{JointPmfTable, TableMethod, LLR_CLAMP};
pub use pmf::{Pmf, QamPmf};
pub use protocol::{CsrSample, NodeId, NodeState, Part, RoundOutput, SourceChannel};
pub use recon::{ParityCheckMatrix, ReconcileOutcome, SyndromeDecode};
