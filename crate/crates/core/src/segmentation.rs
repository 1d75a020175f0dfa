//! Splitting selected frames into segments with keyframes and border overlap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{to_ticks, CostModelParams};
use crate::scheduler::{TaskId, TaskSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("no selected frames to segment")]
    EmptySelection,
}

/// Keyframe sampling inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyframeMode {
    /// One keyframe every 10 frames.
    #[default]
    Sparse,
    /// One keyframe every 2 frames.
    Dense,
    Custom(usize),
}

impl KeyframeMode {
    pub fn stride(self) -> usize {
        match self {
            KeyframeMode::Sparse => 10,
            KeyframeMode::Dense => 2,
            KeyframeMode::Custom(s) => s,
        }
    }
}

impl fmt::Display for KeyframeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyframeMode::Sparse => f.write_str("sparse"),
            KeyframeMode::Dense => f.write_str("dense"),
            KeyframeMode::Custom(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for KeyframeMode {
    type Err = String;

    /// `sparse`, `dense`, or a positive stride.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse" => Ok(KeyframeMode::Sparse),
            "dense" => Ok(KeyframeMode::Dense),
            other => match other.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(KeyframeMode::Custom(n)),
                _ => Err(format!(
                    "expected sparse, dense or a stride >= 1, got {other:?}"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    /// Original frame indices, ascending.
    pub frames: Vec<usize>,
    pub keyframes: Vec<usize>,
    /// Trailing frames of the previous segment fed to this segment's edit.
    pub overlap_frames: Vec<usize>,
}

impl Segment {
    pub fn first(&self) -> usize {
        self.frames[0]
    }

    pub fn last(&self) -> usize {
        *self.frames.last().expect("segments are non-empty")
    }

    /// Keyframes plus overlap frames, which guide the edit stage together.
    pub fn guide_count(&self) -> usize {
        self.keyframes.len() + self.overlap_frames.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
    pub seg_len: usize,
    pub keyframe_mode: KeyframeMode,
    pub overlap: usize,
}

impl SegmentPlan {
    /// Segment frame lists concatenated, overlap excluded.
    pub fn covered(&self) -> Vec<usize> {
        self.segments
            .iter()
            .flat_map(|s| s.frames.iter().copied())
            .collect()
    }

    /// `(last of segment i, first of segment i+1)` for every border.
    pub fn borders(&self) -> Vec<(usize, usize)> {
        self.segments
            .windows(2)
            .map(|w| (w[0].last(), w[1].first()))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.frames.len()).collect()
    }
}

pub fn plan_segments(
    selected: &[usize],
    seg_len: usize,
    keyframe_mode: KeyframeMode,
    overlap: usize,
) -> Result<SegmentPlan, SegmentationError> {
    if seg_len < 2 {
        return Err(SegmentationError::BadConfig(format!(
            "seg_len must be >= 2, got {seg_len}"
        )));
    }
    if overlap >= seg_len {
        return Err(SegmentationError::BadConfig(format!(
            "overlap {overlap} must be < seg_len {seg_len}"
        )));
    }
    if keyframe_mode.stride() == 0 {
        return Err(SegmentationError::BadConfig(
            "keyframe stride must be >= 1".into(),
        ));
    }
    if selected.is_empty() {
        return Err(SegmentationError::EmptySelection);
    }
    let mut chunks: Vec<Vec<usize>> = selected.chunks(seg_len).map(<[usize]>::to_vec).collect();
    if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() == 1) {
        let tail = chunks.pop().expect("checked non-empty");
        chunks.last_mut().expect("more than one chunk").extend(tail);
    }
    let stride = keyframe_mode.stride();
    let mut segments: Vec<Segment> = Vec::with_capacity(chunks.len());
    for (id, frames) in chunks.into_iter().enumerate() {
        let keyframes = frames.iter().copied().step_by(stride).collect();
        let overlap_frames = match segments.last() {
            Some(prev) => prev.frames[prev.frames.len().saturating_sub(overlap)..].to_vec(),
            None => Vec::new(),
        };
        segments.push(Segment {
            id,
            frames,
            keyframes,
            overlap_frames,
        });
    }
    Ok(SegmentPlan {
        segments,
        seg_len,
        keyframe_mode,
        overlap,
    })
}

/// Memory units reserved by each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemDemand {
    pub invert: u64,
    pub edit: u64,
}

impl Default for MemDemand {
    fn default() -> Self {
        Self { invert: 1, edit: 1 }
    }
}

/// Modeled tick durations `(invert, edit)` for one segment.
pub fn segment_ticks(segment: &Segment, cost: &CostModelParams) -> (u64, u64) {
    (
        to_ticks(cost.invert_time(segment.frames.len())),
        to_ticks(cost.edit_time(segment.frames.len(), segment.guide_count())),
    )
}

/// One `invert(i) -> edit(i)` pair per segment with modeled durations.
pub fn plan_to_tasks(plan: &SegmentPlan, cost: &CostModelParams, mem: MemDemand) -> Vec<TaskSpec> {
    plan.segments
        .iter()
        .flat_map(|s| {
            let (t1, t2) = segment_ticks(s, cost);
            [
                TaskSpec::new(TaskId::invert(s.id), vec![], mem.invert, Some(t1)),
                TaskSpec::new(
                    TaskId::edit(s.id),
                    vec![TaskId::invert(s.id)],
                    mem.edit,
                    Some(t2),
                ),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chunk_sizes() {
        let sel: Vec<usize> = (0..100).collect();
        let plan = plan_segments(&sel, 32, KeyframeMode::Sparse, 0).unwrap();
        assert_eq!(plan.sizes(), vec![32, 32, 32, 4]);
        let sel: Vec<usize> = (0..65).collect();
        let plan = plan_segments(&sel, 32, KeyframeMode::Sparse, 0).unwrap();
        assert_eq!(plan.sizes(), vec![32, 33]);
        let plan = plan_segments(&[4], 32, KeyframeMode::Sparse, 0).unwrap();
        assert_eq!(plan.sizes(), vec![1]);
    }

    #[test]
    fn keyframe_density() {
        let sel: Vec<usize> = (0..10).collect();
        let sparse = plan_segments(&sel, 10, KeyframeMode::Sparse, 0).unwrap();
        assert_eq!(sparse.segments[0].keyframes, vec![0]);
        let dense = plan_segments(&sel, 10, KeyframeMode::Dense, 0).unwrap();
        assert_eq!(dense.segments[0].keyframes, vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn overlap_borrows_tail() {
        let sel: Vec<usize> = (0..20).map(|i| i * 2).collect();
        let plan = plan_segments(&sel, 8, KeyframeMode::Dense, 3).unwrap();
        assert!(plan.segments[0].overlap_frames.is_empty());
        assert_eq!(plan.segments[1].overlap_frames, vec![10, 12, 14]);
        assert_eq!(plan.borders(), vec![(14, 16), (30, 32)]);
    }

    #[test]
    fn bad_configs() {
        assert!(matches!(
            plan_segments(&[0, 1], 1, KeyframeMode::Sparse, 0),
            Err(SegmentationError::BadConfig(_))
        ));
        assert!(matches!(
            plan_segments(&[0, 1], 4, KeyframeMode::Sparse, 4),
            Err(SegmentationError::BadConfig(_))
        ));
        assert!(matches!(
            plan_segments(&[0, 1], 4, KeyframeMode::Custom(0), 0),
            Err(SegmentationError::BadConfig(_))
        ));
        assert_eq!(
            plan_segments(&[], 4, KeyframeMode::Sparse, 0),
            Err(SegmentationError::EmptySelection)
        );
    }

    #[test]
    fn tasks_form_pairs() {
        let sel: Vec<usize> = (0..90).collect();
        let plan = plan_segments(&sel, 30, KeyframeMode::Sparse, 0).unwrap();
        let tasks = plan_to_tasks(&plan, &CostModelParams::default(), MemDemand::default());
        assert_eq!(tasks.len(), 6);
        let edges: Vec<_> = tasks
            .iter()
            .flat_map(|t| t.deps.iter().map(move |d| (*d, t.id)))
            .collect();
        assert_eq!(
            edges,
            (0..3)
                .map(|i| (TaskId::invert(i), TaskId::edit(i)))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn keyframe_mode_parse() {
        assert_eq!("sparse".parse(), Ok(KeyframeMode::Sparse));
        assert_eq!("dense".parse(), Ok(KeyframeMode::Dense));
        assert_eq!("4".parse(), Ok(KeyframeMode::Custom(4)));
        assert!("0".parse::<KeyframeMode>().is_err());
        let json = serde_json::to_string(&KeyframeMode::Custom(3)).unwrap();
        assert_eq!(
            serde_json::from_str::<KeyframeMode>(&json).unwrap(),
            KeyframeMode::Custom(3)
        );
    }

    proptest! {
        #[test]
        fn plan_invariants(
            n in 1usize..300,
            seg_len in 2usize..40,
            stride in 1usize..12,
            overlap_frac in 0.0f64..1.0,
        ) {
            let overlap = ((seg_len as f64) * overlap_frac) as usize % seg_len;
            let sel: Vec<usize> = (0..n).map(|i| i * 3 + 1).collect();
            let plan = plan_segments(&sel, seg_len, KeyframeMode::Custom(stride), overlap).unwrap();
            prop_assert_eq!(plan.covered(), sel.clone());
            for (i, s) in plan.segments.iter().enumerate() {
                prop_assert!(!s.frames.is_empty());
                prop_assert_eq!(s.keyframes[0], s.frames[0]);
                prop_assert!(s.keyframes.iter().all(|k| s.frames.contains(k)));
                if plan.segments.len() > 1 {
                    prop_assert!(s.frames.len() >= 2);
                }
                if i == 0 {
                    prop_assert!(s.overlap_frames.is_empty());
                } else {
                    let prev = &plan.segments[i - 1].frames;
                    prop_assert!(prev.ends_with(&s.overlap_frames));
                    prop_assert_eq!(s.overlap_frames.len(), overlap.min(prev.len()));
                }
            }
            let dense = plan_segments(&sel, seg_len, KeyframeMode::Dense, overlap).unwrap();
            let sparse = plan_segments(&sel, seg_len, KeyframeMode::Sparse, overlap).unwrap();
            let cost = CostModelParams::default();
            for (d, s) in dense.segments.iter().zip(&sparse.segments) {
                prop_assert!(d.keyframes.len() >= s.keyframes.len());
                let ratio = cost.edit_time(d.frames.len(), d.guide_count())
                    / cost.edit_time(s.frames.len(), s.guide_count());
                prop_assert!(ratio <= 2.0 + 1e-12);
            }
        }
    }
}
