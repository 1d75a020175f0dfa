//! Two-stage executors: a cost-model mock and a CPU stylization filter.

mod cost;
mod executor;
mod mock;
mod stylize;

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::frameio::{Frame, FrameIoError};
use crate::motion::GrayFrame;
use crate::segmentation::Segment;

pub use cost::{to_ticks, CostModelParams};
pub use executor::SegmentExecutor;
pub use mock::MockBackend;
pub use stylize::{Style, StylizeBackend};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("protocol error on segment {segment}: {reason}")]
    ProtocolError { segment: usize, reason: String },
    #[error(transparent)]
    Frame(#[from] FrameIoError),
    #[error("{0}")]
    Failed(String),
}

/// Output of the invert stage for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub segment: usize,
    pub frames: Vec<Frame>,
    /// Per-frame blur pyramid, finest level first. Empty for the mock.
    pub pyramids: Vec<Vec<GrayFrame>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditedSegment {
    pub segment: usize,
    pub frames: Vec<Frame>,
    /// Backend name and prompt tag.
    pub tag: String,
}

/// A two-stage segment processor. Calls for different segments may run
/// concurrently.
pub trait Backend: Sync {
    fn name(&self) -> String;

    /// Stage one. `frames` are the segment frames in order.
    fn invert(&self, segment: &Segment, frames: Vec<Frame>) -> Result<Latents, BackendError>;

    /// Stage two. `overlap` holds the previous segment's trailing frames.
    fn edit(
        &self,
        segment: &Segment,
        latents: &Latents,
        overlap: &[Frame],
        prompt: &str,
    ) -> Result<EditedSegment, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Inverted,
    Edited,
}

/// Enforces one invert followed by one edit per segment.
#[derive(Debug, Default)]
pub(crate) struct Protocol(Mutex<HashMap<usize, Phase>>);

impl Protocol {
    fn begin_invert(&self, segment: usize) -> Result<(), BackendError> {
        let mut map = self.0.lock().expect("protocol state poisoned");
        if let Some(phase) = map.get(&segment) {
            return Err(BackendError::ProtocolError {
                segment,
                reason: format!("invert called again after {phase:?}"),
            });
        }
        map.insert(segment, Phase::Inverted);
        Ok(())
    }

    fn begin_edit(&self, segment: usize, latents: &Latents) -> Result<(), BackendError> {
        if latents.segment != segment {
            return Err(BackendError::ProtocolError {
                segment,
                reason: format!("given latents of segment {}", latents.segment),
            });
        }
        let mut map = self.0.lock().expect("protocol state poisoned");
        match map.get(&segment) {
            Some(Phase::Inverted) => {
                map.insert(segment, Phase::Edited);
                Ok(())
            }
            Some(Phase::Edited) => Err(BackendError::ProtocolError {
                segment,
                reason: "edit called twice".into(),
            }),
            None => Err(BackendError::ProtocolError {
                segment,
                reason: "edit called before invert".into(),
            }),
        }
    }
}
