//! Run reports: speedups, scaling tables, Little's Law checks and CSV/JSON
//! output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::CostModelParams;
use crate::interpolation::BorderMetrics;
use crate::scheduler::{
    integrate_samples, predict_times, queue_stats, run_schedule, validate_trace, Mode,
    NoopExecutor, PredictedTimes, QueueStats, ResourcePool, ScheduleError, ScheduleTrace, Stage,
    TaskSpec, TimeUnit, Violation, Worker,
};
use crate::segmentation::SegmentPlan;
use crate::selection::SelectionSummary;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("cannot write {path}: {source}")]
    WriteError { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Queue statistics with `L` measured two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LittlesLaw {
    #[serde(flatten)]
    pub stats: QueueStats,
    /// `L` integrated from the queue samples over the same window.
    pub l_samples: f64,
    /// `|L - lambda*W| / L` with `L = l_samples`.
    pub residual_samples: f64,
}

pub fn littles_law(trace: &ScheduleTrace) -> Result<LittlesLaw, ScheduleError> {
    let stats = queue_stats(trace)?;
    let [from, to] = stats.window;
    let l_samples = if to > from {
        integrate_samples(&trace.queue_samples, from, to) / (to - from)
    } else {
        0.0
    };
    let residual_samples = if l_samples > 0.0 {
        (l_samples - stats.lambda * stats.w).abs() / l_samples
    } else {
        0.0
    };
    Ok(LittlesLaw {
        stats,
        l_samples,
        residual_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerUtilization {
    pub worker: usize,
    pub invert_busy: f64,
    pub edit_busy: f64,
    /// Busy time over makespan.
    pub utilization: f64,
}

pub fn utilization(trace: &ScheduleTrace, workers: usize) -> Vec<WorkerUtilization> {
    let mut rows: Vec<WorkerUtilization> = (0..workers)
        .map(|worker| WorkerUtilization {
            worker,
            invert_busy: 0.0,
            edit_busy: 0.0,
            utilization: 0.0,
        })
        .collect();
    for e in &trace.events {
        if let Some(r) = rows.get_mut(e.worker) {
            match e.task.stage {
                Stage::Invert => r.invert_busy += e.end - e.start,
                Stage::Edit => r.edit_busy += e.end - e.start,
            }
        }
    }
    for r in &mut rows {
        r.utilization = if trace.makespan > 0.0 {
            (r.invert_busy + r.edit_busy) / trace.makespan
        } else {
            0.0
        };
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub workers: usize,
    pub makespan: f64,
    /// One-worker makespan over this makespan.
    pub speedup: f64,
}

/// Simulates `tasks` on `k` general-purpose copies of the first worker of
/// `base` with `max_jobs = k`, for every `k` in `worker_counts`.
pub fn scaling_sweep(
    tasks: &[TaskSpec],
    base: &ResourcePool,
    worker_counts: &[usize],
) -> Result<Vec<ScalingRow>, AnalyticsError> {
    if worker_counts.is_empty() || worker_counts.contains(&0) {
        return Err(AnalyticsError::BadInput(
            "worker counts must be non-empty and >= 1".into(),
        ));
    }
    let worker = base
        .workers
        .first()
        .map(|w| Worker::new(w.capacity))
        .ok_or_else(|| AnalyticsError::BadInput("pool has no workers".into()))?;
    let makespan = |k: usize| -> Result<f64, AnalyticsError> {
        let pool = ResourcePool {
            workers: vec![worker; k],
            max_jobs: k,
            mem_threshold: base.mem_threshold,
        };
        Ok(run_schedule(tasks, &pool, &NoopExecutor, Mode::Simulated)?.makespan)
    };
    let one = makespan(1)?;
    worker_counts
        .iter()
        .map(|&k| {
            let m = if k == 1 { one } else { makespan(k)? };
            Ok(ScalingRow {
                workers: k,
                makespan: m,
                speedup: if m > 0.0 { one / m } else { 1.0 },
            })
        })
        .collect()
}

/// Segment count and the largest per-stage durations, as cost symbols.
pub fn cost_from_tasks(tasks: &[TaskSpec]) -> CostModelParams {
    let max_ticks = |stage| {
        tasks
            .iter()
            .filter(|t| t.id.stage == stage)
            .filter_map(|t| t.est_duration)
            .max()
            .unwrap_or(1)
            .max(1)
    };
    let segments = tasks.iter().map(|t| t.id.segment + 1).max().unwrap_or(1) as u64;
    CostModelParams {
        n1: segments,
        n2: segments,
        t1: max_ticks(Stage::Invert),
        t2: max_ticks(Stage::Edit),
        batches: segments,
        ..Default::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub segments: usize,
    pub sizes: Vec<usize>,
    pub keyframes: Vec<usize>,
    pub overlap: usize,
    pub keyframe_mode: String,
}

impl PlanSummary {
    pub fn new(plan: &SegmentPlan) -> Self {
        Self {
            segments: plan.segments.len(),
            sizes: plan.sizes(),
            keyframes: plan.segments.iter().map(|s| s.keyframes.len()).collect(),
            overlap: plan.overlap,
            keyframe_mode: plan.keyframe_mode.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub selection: Option<SelectionSummary>,
    pub plan: Option<PlanSummary>,
    pub makespan: f64,
    pub time_unit: TimeUnit,
    /// Sum of task busy times, i.e. the makespan on one serial worker.
    pub serial_makespan: f64,
    pub speedup_vs_serial: f64,
    pub predicted: PredictedTimes,
    pub queue: LittlesLaw,
    pub borders: Option<BorderMetrics>,
    pub utilization: Vec<WorkerUtilization>,
    pub scaling: Vec<ScalingRow>,
    pub violations: Vec<Violation>,
    pub trace: ScheduleTrace,
}

/// Inputs for [`build_report`] beyond the trace itself.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub config: serde_json::Value,
    pub selection: Option<SelectionSummary>,
    pub plan: Option<PlanSummary>,
    pub borders: Option<BorderMetrics>,
    pub cost: Option<CostModelParams>,
    pub sweep: Vec<usize>,
}

pub fn build_report(
    trace: &ScheduleTrace,
    tasks: &[TaskSpec],
    pool: &ResourcePool,
    inputs: ReportInputs,
) -> Result<RunReport, AnalyticsError> {
    let serial: f64 = trace.events.iter().map(|e| e.end - e.start).sum();
    let speedup_vs_serial = if trace.makespan > 0.0 {
        serial / trace.makespan
    } else {
        1.0
    };
    let cost = inputs.cost.unwrap_or_else(|| cost_from_tasks(tasks));
    let scaling = if inputs.sweep.is_empty() {
        Vec::new()
    } else {
        scaling_sweep(tasks, pool, &inputs.sweep)?
    };
    Ok(RunReport {
        config: inputs.config,
        selection: inputs.selection,
        plan: inputs.plan,
        makespan: trace.makespan,
        time_unit: trace.time_unit,
        serial_makespan: serial,
        speedup_vs_serial,
        predicted: predict_times(&cost)?,
        queue: littles_law(trace)?,
        borders: inputs.borders,
        utilization: utilization(trace, pool.workers.len()),
        scaling,
        violations: validate_trace(trace, tasks, pool),
        trace: trace.clone(),
    })
}

/// Serializes with object keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub const REPORT_FILES: [&str; 4] = ["report.json", "scaling.csv", "queue.csv", "borders.csv"];

/// Writes `report.json`, `scaling.csv`, `queue.csv` and `borders.csv`.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, AnalyticsError> {
    let write = |name: &str, bytes: &[u8]| -> Result<PathBuf, AnalyticsError> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| AnalyticsError::WriteError {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };
    fs::create_dir_all(dir).map_err(|source| AnalyticsError::WriteError {
        path: dir.to_path_buf(),
        source,
    })?;
    let borders = report.borders.as_ref().map_or(&[][..], |b| &b.borders[..]);
    Ok(vec![
        write(REPORT_FILES[0], to_sorted_json(report).as_bytes())?,
        write(
            REPORT_FILES[1],
            &csv_bytes(&["workers", "makespan", "speedup"], &report.scaling),
        )?,
        write(
            REPORT_FILES[2],
            &csv_bytes(
                &["time", "queue_length", "in_flight"],
                &report.trace.queue_samples,
            ),
        )?,
        write(
            REPORT_FILES[3],
            &csv_bytes(&["prev", "next", "mse", "ssim"], borders),
        )?,
    ])
}
