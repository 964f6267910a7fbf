//! IEEE 802.15.4 frame accounting and a deterministic simulated link.
//!
//! 6LoWPAN fragmentation headers are folded into the flat per-frame
//! overhead, so a message of `n` bytes needs `ceil(n / payload_per_frame)`
//! frames.

mod link;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dns::{self, CodecError, Compression, Message};

pub use link::{Direction, LinkStats, SimLink, TransmissionEntry};

pub const DEFAULT_FRAME_SIZE: usize = 127;
/// Worst-case 6LoWPAN overhead; the acceptance tests account with this.
pub const WORST_CASE_OVERHEAD: usize = 41;
pub const BEST_CASE_OVERHEAD: usize = 26;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BudgetError {
    #[error("overhead {overhead} must be positive and below the frame size {frame_size}")]
    InvalidOverhead { frame_size: usize, overhead: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameBudget {
    frame_size: usize,
    overhead: usize,
}

impl Default for FrameBudget {
    fn default() -> Self {
        FrameBudget {
            frame_size: DEFAULT_FRAME_SIZE,
            overhead: WORST_CASE_OVERHEAD,
        }
    }
}

impl FrameBudget {
    pub fn new(frame_size: usize, overhead: usize) -> Result<Self, BudgetError> {
        if overhead == 0 || overhead >= frame_size {
            return Err(BudgetError::InvalidOverhead {
                frame_size,
                overhead,
            });
        }
        Ok(FrameBudget {
            frame_size,
            overhead,
        })
    }

    pub fn with_overhead(overhead: usize) -> Result<Self, BudgetError> {
        Self::new(DEFAULT_FRAME_SIZE, overhead)
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn overhead(&self) -> usize {
        self.overhead
    }

    pub fn payload_per_frame(&self) -> usize {
        self.frame_size - self.overhead
    }
}

pub fn frames_required(nbytes: usize, budget: &FrameBudget) -> usize {
    nbytes.div_ceil(budget.payload_per_frame())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCost {
    pub bytes: usize,
    pub frames: usize,
}

impl MessageCost {
    pub fn of(msg: &Message, budget: &FrameBudget) -> Result<Self, CodecError> {
        let bytes = dns::measure(msg, Compression::On)?;
        Ok(MessageCost {
            bytes,
            frames: frames_required(bytes, budget),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub messages: Vec<MessageCost>,
    pub total_bytes: usize,
    pub total_frames: usize,
    /// Frames times the full frame size.
    pub on_air_bytes: usize,
}

impl TransmissionReport {
    pub fn push(&mut self, cost: MessageCost, budget: &FrameBudget) {
        self.total_bytes += cost.bytes;
        self.total_frames += cost.frames;
        self.on_air_bytes += cost.frames * budget.frame_size();
        self.messages.push(cost);
    }
}

/// Encodes each message as sent and totals bytes and frames.
pub fn simulate_exchange(
    messages: &[Message],
    budget: &FrameBudget,
) -> Result<TransmissionReport, CodecError> {
    let mut report = TransmissionReport::default();
    for m in messages {
        report.push(MessageCost::of(m, budget)?, budget);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub bytes_original: usize,
    pub bytes_optimized: usize,
    pub frames_original: usize,
    pub frames_optimized: usize,
    /// Negative when the "optimized" message is larger.
    pub byte_savings: i64,
}

pub fn compare(
    original: &Message,
    optimized: &Message,
    budget: &FrameBudget,
) -> Result<FrameComparison, CodecError> {
    let a = MessageCost::of(original, budget)?;
    let b = MessageCost::of(optimized, budget)?;
    Ok(FrameComparison {
        bytes_original: a.bytes,
        bytes_optimized: b.bytes,
        frames_original: a.frames,
        frames_optimized: b.frames,
        byte_savings: a.bytes as i64 - b.bytes as i64,
    })
}

/// One row of the reference comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    #[serde(flatten)]
    pub comparison: FrameComparison,
}

/// The SRV and TXT reference exchanges and the compacted TXT payload,
/// original versus optimized, under `budget`.
pub fn reference_report(budget: &FrameBudget) -> Vec<ComparisonRow> {
    use crate::fixtures;
    let srv = compare(
        &fixtures::srv_response_full(),
        &fixtures::srv_response_optimized(),
        budget,
    )
    .expect("fixtures encode");
    let txt = compare(
        &fixtures::txt_response_multi(),
        &fixtures::txt_response_joined(),
        budget,
    )
    .expect("fixtures encode");
    let joined = crate::semantics::to_txt(&fixtures::dimmer_light_metadata(), Default::default())
        .expect("fixture metadata is valid")
        .remove(0);
    let compact = crate::semantics::compact_txt(&fixtures::dimmer_light_metadata()).bytes;
    let payload = FrameComparison {
        bytes_original: joined.len(),
        bytes_optimized: compact.len(),
        frames_original: frames_required(joined.len(), budget),
        frames_optimized: frames_required(compact.len(), budget),
        byte_savings: joined.len() as i64 - compact.len() as i64,
    };
    vec![
        ComparisonRow {
            name: "srv-response".into(),
            comparison: srv,
        },
        ComparisonRow {
            name: "txt-response".into(),
            comparison: txt,
        },
        ComparisonRow {
            name: "txt-payload-compact".into(),
            comparison: payload,
        },
    ]
}
