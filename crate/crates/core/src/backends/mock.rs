use std::thread;
use std::time::Duration;

use super::{
    cost::to_ticks, Backend, BackendError, CostModelParams, EditedSegment, Latents, Protocol,
};
use crate::frameio::Frame;
use crate::segmentation::Segment;

/// Pass-through backend whose stage durations come from the cost model.
#[derive(Debug)]
pub struct MockBackend {
    cost: CostModelParams,
    /// Seconds slept per modeled tick; `None` returns immediately.
    sleep_per_tick: Option<f64>,
    protocol: Protocol,
}

impl MockBackend {
    pub fn new(cost: CostModelParams) -> Result<Self, BackendError> {
        cost.validate()?;
        Ok(Self {
            cost,
            sleep_per_tick: None,
            protocol: Protocol::default(),
        })
    }

    /// Sleeps `ticks * seconds_per_tick` in every stage call.
    pub fn sleeping(mut self, seconds_per_tick: f64) -> Self {
        self.sleep_per_tick = Some(seconds_per_tick);
        self
    }

    pub fn cost(&self) -> &CostModelParams {
        &self.cost
    }

    fn pause(&self, time: f64) {
        if let Some(s) = self.sleep_per_tick {
            let secs = to_ticks(time) as f64 * s;
            if secs > 0.0 && secs.is_finite() {
                thread::sleep(Duration::from_secs_f64(secs));
            }
        }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> String {
        "mock".into()
    }

    fn invert(&self, segment: &Segment, frames: Vec<Frame>) -> Result<Latents, BackendError> {
        self.protocol.begin_invert(segment.id)?;
        self.pause(self.cost.invert_time(segment.frames.len()));
        Ok(Latents {
            segment: segment.id,
            frames,
            pyramids: Vec::new(),
        })
    }

    fn edit(
        &self,
        segment: &Segment,
        latents: &Latents,
        _overlap: &[Frame],
        prompt: &str,
    ) -> Result<EditedSegment, BackendError> {
        self.protocol.begin_edit(segment.id, latents)?;
        self.pause(
            self.cost
                .edit_time(segment.frames.len(), segment.guide_count()),
        );
        Ok(EditedSegment {
            segment: segment.id,
            frames: latents.frames.clone(),
            tag: format!("mock:{prompt}"),
        })
    }
}
