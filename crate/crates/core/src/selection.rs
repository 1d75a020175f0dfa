//! Motion-aware frame selection.
//!
//! Every transition `t-1 -> t` is scored with global SSIM and mean flow
//! magnitude; frame `t` is kept when either score signals motion. Frame 0 and
//! the final frame are always kept. Runs of dropped frames are reported as
//! `(kept_before, kept_after)` gaps for later reconstruction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::FrameSource;
use crate::motion::{self, FlowConfig, GrayFrame, MotionMetrics};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("selection aborted at frame {index}: {reason}")]
    SelectionAborted { index: usize, reason: String },
    #[error("bad selection config: {0}")]
    BadConfig(String),
    #[error("malformed selection document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Transitions with SSIM strictly below this count as motion.
    pub tau_s: f64,
    /// Transitions with mean flow magnitude strictly above this (pixels) count as motion.
    pub tau_f: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            tau_s: 0.95,
            tau_f: 0.5,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.tau_s > 0.0 && self.tau_s <= 1.0) {
            return Err(SelectionError::BadConfig(format!(
                "tau_s must be in (0, 1], got {}",
                self.tau_s
            )));
        }
        if !(self.tau_f >= 0.0 && self.tau_f.is_finite()) {
            return Err(SelectionError::BadConfig(format!(
                "tau_f must be finite and >= 0, got {}",
                self.tau_f
            )));
        }
        Ok(())
    }
}

/// `ssim < tau_s || mean_flow_magnitude > tau_f`; both comparisons strict.
pub fn motion_detected(metrics: &MotionMetrics, cfg: &SelectionConfig) -> bool {
    metrics.ssim < cfg.tau_s || metrics.mean_flow_magnitude > cfg.tau_f
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    pub skipped_runs: Vec<(usize, usize)>,
    /// One entry per transition, in index order.
    pub metrics: Vec<MotionMetrics>,
}

impl SelectionResult {
    /// Number of frames in the source video.
    pub fn frame_count(&self) -> usize {
        self.selected.last().map_or(0, |&n| n + 1)
    }

    pub fn to_document(&self) -> SelectionDocument {
        SelectionDocument {
            selected: self.selected.clone(),
            skipped_runs: self.skipped_runs.iter().map(|&(a, b)| [a, b]).collect(),
            metrics: self
                .metrics
                .iter()
                .map(|m| MetricRow {
                    t: m.frame_pair.1,
                    ssim: m.ssim,
                    mf: m.mean_flow_magnitude,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &SelectionDocument) -> Result<Self, SelectionError> {
        let selected = doc.selected.clone();
        if selected.first() != Some(&0) || selected.len() < 2 {
            return Err(SelectionError::Malformed(
                "selected must start at 0 and keep at least two frames".into(),
            ));
        }
        if selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SelectionError::Malformed(
                "selected indices must be strictly increasing".into(),
            ));
        }
        let skipped_runs = skipped_runs(&selected);
        let declared: Vec<(usize, usize)> = doc.skipped_runs.iter().map(|r| (r[0], r[1])).collect();
        if declared != skipped_runs {
            return Err(SelectionError::Malformed(format!(
                "skipped_runs {declared:?} disagree with selected (expected {skipped_runs:?})"
            )));
        }
        let metrics = doc
            .metrics
            .iter()
            .map(|r| MotionMetrics {
                ssim: r.ssim,
                mean_flow_magnitude: r.mf,
                frame_pair: (r.t.saturating_sub(1), r.t),
            })
            .collect();
        Ok(Self {
            selected,
            skipped_runs,
            metrics,
        })
    }
}

/// On-disk selection schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub selected: Vec<usize>,
    pub skipped_runs: Vec<[usize; 2]>,
    pub metrics: Vec<MetricRow>,
}

/// Metrics of the transition into frame `t` (from `t - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub t: usize,
    pub ssim: f64,
    pub mf: f64,
}

/// Gaps between consecutive kept indices that hide at least one frame.
pub fn skipped_runs(selected: &[usize]) -> Vec<(usize, usize)> {
    selected
        .windows(2)
        .filter(|w| w[1] - w[0] >= 2)
        .map(|w| (w[0], w[1]))
        .collect()
}

/// Applies the selection rule to precomputed transition metrics, where
/// `metrics[t - 1]` scores the transition into frame `t`.
pub fn select_from_metrics(metrics: Vec<MotionMetrics>, cfg: &SelectionConfig) -> SelectionResult {
    let n = metrics.len();
    let mut selected = vec![0];
    for (i, m) in metrics.iter().enumerate() {
        let t = i + 1;
        if motion_detected(m, cfg) || t == n {
            selected.push(t);
        }
    }
    let skipped_runs = skipped_runs(&selected);
    SelectionResult {
        selected,
        skipped_runs,
        metrics,
    }
}

/// Scores every consecutive pair of `video` and selects frames.
///
/// Transitions are computed in parallel; the result does not depend on
/// execution order.
pub fn select_frames<S: FrameSource + ?Sized>(
    video: &S,
    cfg: &SelectionConfig,
    flow_cfg: &FlowConfig,
) -> Result<SelectionResult, SelectionError> {
    cfg.validate()?;
    flow_cfg
        .validate()
        .map_err(|e| SelectionError::BadConfig(e.to_string()))?;
    let count = video.frame_count();
    if count < 2 {
        return Err(SelectionError::TooFewFrames(count));
    }
    let grays: Vec<GrayFrame> = (0..count)
        .into_par_iter()
        .map(|i| {
            let frame = video
                .frame(i)
                .map_err(|e| SelectionError::SelectionAborted {
                    index: i,
                    reason: e.to_string(),
                })?;
            motion::to_gray(&frame).map_err(|e| SelectionError::SelectionAborted {
                index: i,
                reason: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    let metrics: Vec<MotionMetrics> = (1..count)
        .into_par_iter()
        .map(|t| {
            motion::transition_metrics(&grays[t - 1], &grays[t], (t - 1, t), flow_cfg).map_err(
                |e| SelectionError::SelectionAborted {
                    index: t,
                    reason: e.to_string(),
                },
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(select_from_metrics(metrics, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub frame_count: usize,
    pub kept: usize,
    pub skipped: usize,
    pub skip_ratio: f64,
    pub tau_s: f64,
    pub tau_f: f64,
    pub metrics: Vec<MetricRow>,
}

impl SelectionSummary {
    /// Per-transition metric table with header `t,ssim,mf`.
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn selection_report(result: &SelectionResult, cfg: &SelectionConfig) -> SelectionSummary {
    let frame_count = result.frame_count();
    let kept = result.selected.len();
    let skipped = frame_count - kept;
    SelectionSummary {
        frame_count,
        kept,
        skipped,
        skip_ratio: if frame_count == 0 {
            0.0
        } else {
            skipped as f64 / frame_count as f64
        },
        tau_s: cfg.tau_s,
        tau_f: cfg.tau_f,
        metrics: result.to_document().metrics,
    }
}
