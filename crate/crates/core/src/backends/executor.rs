use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use super::{Backend, BackendError, EditedSegment, Latents};
use crate::frameio::{Frame, FrameSource};
use crate::scheduler::{ExecError, Stage, TaskExecutor, TaskSpec};
use crate::segmentation::{Segment, SegmentPlan};

/// Runs plan tasks on a [`Backend`], loading frames from `source` and
/// passing each segment's latents from its invert task to its edit task.
pub struct SegmentExecutor<'a> {
    backend: &'a dyn Backend,
    source: &'a dyn FrameSource,
    plan: &'a SegmentPlan,
    prompt: String,
    latents: Mutex<HashMap<usize, Latents>>,
    outputs: Mutex<BTreeMap<usize, EditedSegment>>,
}

impl<'a> SegmentExecutor<'a> {
    pub fn new(
        backend: &'a dyn Backend,
        source: &'a dyn FrameSource,
        plan: &'a SegmentPlan,
        prompt: impl Into<String>,
    ) -> Self {
        Self {
            backend,
            source,
            plan,
            prompt: prompt.into(),
            latents: Mutex::new(HashMap::new()),
            outputs: Mutex::new(BTreeMap::new()),
        }
    }

    /// Edited segments in segment order.
    pub fn into_outputs(self) -> Vec<EditedSegment> {
        self.outputs
            .into_inner()
            .expect("output map poisoned")
            .into_values()
            .collect()
    }

    fn segment(&self, id: usize) -> Result<&Segment, BackendError> {
        self.plan
            .segments
            .get(id)
            .filter(|s| s.id == id)
            .ok_or_else(|| BackendError::Failed(format!("no segment {id} in plan")))
    }

    fn load(&self, indices: &[usize]) -> Result<Vec<Frame>, BackendError> {
        indices
            .iter()
            .map(|&i| self.source.frame(i).map_err(BackendError::from))
            .collect()
    }

    fn run(&self, task: &TaskSpec) -> Result<(), BackendError> {
        let segment = self.segment(task.id.segment)?;
        match task.id.stage {
            Stage::Invert => {
                let frames = self.load(&segment.frames)?;
                let latents = self.backend.invert(segment, frames)?;
                self.latents
                    .lock()
                    .expect("latent cache poisoned")
                    .insert(segment.id, latents);
            }
            Stage::Edit => {
                let latents = self
                    .latents
                    .lock()
                    .expect("latent cache poisoned")
                    .remove(&segment.id)
                    .ok_or_else(|| BackendError::ProtocolError {
                        segment: segment.id,
                        reason: "edit called before invert".into(),
                    })?;
                let overlap = self.load(&segment.overlap_frames)?;
                let edited = self
                    .backend
                    .edit(segment, &latents, &overlap, &self.prompt)?;
                self.outputs
                    .lock()
                    .expect("output map poisoned")
                    .insert(segment.id, edited);
            }
        }
        Ok(())
    }
}

impl TaskExecutor for SegmentExecutor<'_> {
    fn execute(&self, task: &TaskSpec) -> Result<(), ExecError> {
        self.run(task).map_err(|e| ExecError(e.to_string()))
    }
}
