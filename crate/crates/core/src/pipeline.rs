//! End-to-end composition: select, plan, schedule over a backend, smooth
//! borders, fill skipped runs, write frames and report.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{build_report, emit_report, PlanSummary, ReportInputs, RunReport};
use crate::backends::{
    Backend, CostModelParams, MockBackend, SegmentExecutor, Style, StylizeBackend,
};
use crate::frameio::{load_sequence, write_sequence, Fps, Frame};
use crate::interpolation::{
    border_consistency, interpolate_recursive, smooth_borders, BorderMetrics, InterpolationRequest,
};
use crate::motion::FlowConfig;
use crate::scheduler::{
    run_schedule, two_stage_tasks, Mode, ResourcePool, ScheduleError, ScheduleTrace, TaskSpec,
};
use crate::segmentation::{plan_segments, plan_to_tasks, KeyframeMode, MemDemand, SegmentPlan};
use crate::selection::{select_frames, selection_report, SelectionConfig, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineStage {
    Config,
    Load,
    Analyze,
    Select,
    Plan,
    Schedule,
    Interpolate,
    Write,
    Report,
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("stage is a string"))
    }
}

/// A failure tagged with the stage that produced it.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: PipelineStage,
    pub message: String,
    /// Report directory, when a partial report was written before failing.
    pub partial_report: Option<PathBuf>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)?;
        if let Some(p) = &self.partial_report {
            write!(f, " (partial report in {})", p.display())?;
        }
        Ok(())
    }
}

impl std::error::Error for PipelineError {}

fn at<E: fmt::Display>(stage: PipelineStage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
        partial_report: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendSpec {
    Mock,
    Stylize(Style),
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Mock => f.write_str("mock"),
            BackendSpec::Stylize(s) => write!(f, "stylize:{s}"),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = String;

    /// `mock` or `stylize:<posterize|invert-colors|sepia>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "mock" => Ok(BackendSpec::Mock),
            Some(("stylize", style)) => Ok(BackendSpec::Stylize(style.parse()?)),
            _ => Err(format!("expected mock or stylize:<style>, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub selection: SelectionConfig,
    pub flow: FlowConfig,
    pub seg_len: usize,
    pub keyframes: KeyframeMode,
    pub overlap: usize,
    pub pool: ResourcePool,
    pub mem: MemDemand,
    pub backend: BackendSpec,
    pub cost: CostModelParams,
    pub interp: bool,
    pub seed: u64,
    pub mode: Mode,
    pub prompt: String,
    /// Worker counts for the report's scaling table; empty skips it.
    pub sweep: Vec<usize>,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            selection: SelectionConfig::default(),
            flow: FlowConfig::default(),
            seg_len: 32,
            keyframes: KeyframeMode::Sparse,
            overlap: 0,
            pool: ResourcePool::uniform(2, 16, 2, 0),
            mem: MemDemand::default(),
            backend: BackendSpec::Mock,
            cost: CostModelParams::default(),
            interp: true,
            seed: 0,
            mode: Mode::Simulated,
            prompt: String::new(),
            sweep: Vec::new(),
        }
    }

    /// Every knob except the paths, for embedding in reports.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::json!({
            "selection": self.selection,
            "flow": self.flow,
            "seg_len": self.seg_len,
            "keyframes": self.keyframes.to_string(),
            "overlap": self.overlap,
            "pool": self.pool,
            "mem": self.mem,
            "backend": self.backend.to_string(),
            "cost": self.cost,
            "interp": self.interp,
            "seed": self.seed,
            "mode": self.mode,
            "prompt": self.prompt,
            "sweep": self.sweep,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.selection
            .validate()
            .map_err(at(PipelineStage::Config))?;
        self.flow.validate().map_err(at(PipelineStage::Config))?;
        self.pool.validate().map_err(at(PipelineStage::Config))?;
        self.cost.validate().map_err(at(PipelineStage::Config))?;
        if self.seg_len < 2 || self.overlap >= self.seg_len {
            return Err(at(PipelineStage::Config)(format!(
                "need seg_len >= 2 and overlap < seg_len, got {} and {}",
                self.seg_len, self.overlap
            )));
        }
        Ok(())
    }
}

/// Per-transition motion metrics as CSV (`t,ssim,mf`).
pub fn cmd_analyze(input: &Path, flow: &FlowConfig) -> Result<String, PipelineError> {
    let result = cmd_select(input, &SelectionConfig::default(), flow)?;
    Ok(selection_report(&result, &SelectionConfig::default()).metrics_csv())
}

pub fn cmd_select(
    input: &Path,
    cfg: &SelectionConfig,
    flow: &FlowConfig,
) -> Result<SelectionResult, PipelineError> {
    let seq = load_sequence(input).map_err(at(PipelineStage::Load))?;
    select_frames(&seq, cfg, flow).map_err(at(PipelineStage::Select))
}

/// Trace plus the workload and pool that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    #[serde(flatten)]
    pub trace: ScheduleTrace,
    #[serde(default)]
    pub tasks: Option<Vec<TaskSpec>>,
    #[serde(default)]
    pub pool: Option<ResourcePool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub segments: usize,
    pub t1: u64,
    pub t2: u64,
    pub workers: usize,
    pub max_jobs: usize,
    pub mem_threshold: u64,
    pub worker_mem: u64,
    pub task_mem: u64,
    /// Alternate invert-only and edit-only workers.
    pub dedicated: bool,
    /// Release `invert(i)` at tick `i * interarrival`.
    pub interarrival: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            segments: 8,
            t1: 10,
            t2: 10,
            workers: 2,
            max_jobs: 2,
            mem_threshold: 0,
            worker_mem: 16,
            task_mem: 1,
            dedicated: false,
            interarrival: 0,
        }
    }
}

impl SimulateConfig {
    pub fn tasks(&self) -> Vec<TaskSpec> {
        let mut tasks = two_stage_tasks(
            &vec![(self.t1, self.t2); self.segments],
            (self.task_mem, self.task_mem),
        );
        for t in tasks.iter_mut().filter(|t| t.deps.is_empty()) {
            t.release = t.id.segment as u64 * self.interarrival;
        }
        tasks
    }

    pub fn pool(&self) -> ResourcePool {
        ResourcePool::alternating(
            self.workers,
            self.worker_mem,
            self.max_jobs,
            self.mem_threshold,
            self.dedicated,
        )
    }
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<TraceDocument, ScheduleError> {
    if cfg.dedicated && cfg.workers < 2 {
        return Err(ScheduleError::BadConfig(
            "dedicated pools need at least 2 workers".into(),
        ));
    }
    let tasks = cfg.tasks();
    let pool = cfg.pool();
    let trace = run_schedule(
        &tasks,
        &pool,
        &crate::scheduler::NoopExecutor,
        Mode::Simulated,
    )?;
    Ok(TraceDocument {
        trace,
        tasks: Some(tasks),
        pool: Some(pool),
    })
}

/// Report from a trace document written by `simulate` or `run`.
pub fn cmd_report(doc: &TraceDocument, sweep: &[usize]) -> Result<RunReport, PipelineError> {
    let (Some(tasks), Some(pool)) = (&doc.tasks, &doc.pool) else {
        return Err(at(PipelineStage::Report)(
            "trace document lacks its tasks and pool",
        ));
    };
    let inputs = ReportInputs {
        config: serde_json::json!({ "source": "trace" }),
        sweep: sweep.to_vec(),
        ..Default::default()
    };
    build_report(&doc.trace, tasks, pool, inputs).map_err(at(PipelineStage::Report))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub frames_written: usize,
    pub report: RunReport,
    pub report_dir: PathBuf,
}

impl RunOutcome {
    /// Zero trace violations.
    pub fn ok(&self) -> bool {
        self.report.violations.is_empty()
    }
}

fn make_backend(cfg: &PipelineConfig) -> Result<Box<dyn Backend>, PipelineError> {
    Ok(match cfg.backend {
        BackendSpec::Mock => {
            let mock = MockBackend::new(cfg.cost).map_err(at(PipelineStage::Config))?;
            match cfg.mode {
                Mode::Realtime { seconds_per_tick } => Box::new(mock.sleeping(seconds_per_tick)),
                Mode::Simulated => Box::new(mock),
            }
        }
        BackendSpec::Stylize(style) => Box::new(StylizeBackend::new(style)),
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), PipelineError> {
    fs::write(dir.join(name), crate::analytics::to_sorted_json(value))
        .map_err(at(PipelineStage::Report))
}

/// Runs the whole pipeline. Frames go to `cfg.output`, report files to
/// `cfg.output/report`.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    if let (Ok(a), Ok(b)) = (cfg.input.canonicalize(), cfg.output.canonicalize()) {
        if a == b {
            return Err(at(PipelineStage::Config)(
                "output directory must differ from input",
            ));
        }
    }
    let seq = load_sequence(&cfg.input).map_err(at(PipelineStage::Load))?;
    let fps: Fps = seq.manifest().fps();
    let selection =
        select_frames(&seq, &cfg.selection, &cfg.flow).map_err(at(PipelineStage::Select))?;
    let plan = plan_segments(&selection.selected, cfg.seg_len, cfg.keyframes, cfg.overlap)
        .map_err(at(PipelineStage::Plan))?;
    let tasks = plan_to_tasks(&plan, &cfg.cost, cfg.mem);

    let report_dir = cfg.output.join("report");
    fs::create_dir_all(&report_dir).map_err(at(PipelineStage::Write))?;
    let mut inputs = ReportInputs {
        config: cfg.snapshot(),
        selection: Some(selection_report(&selection, &cfg.selection)),
        plan: Some(PlanSummary::new(&plan)),
        borders: None,
        cost: None,
        sweep: cfg.sweep.clone(),
    };
    write_json(&report_dir, "plan.json", &plan)?;
    write_json(&report_dir, "selection.json", &selection.to_document())?;

    let backend = make_backend(cfg)?;
    let executor = SegmentExecutor::new(backend.as_ref(), &seq, &plan, cfg.prompt.clone());
    let trace = match run_schedule(&tasks, &cfg.pool, &executor, cfg.mode) {
        Ok(t) => t,
        Err(ScheduleError::PartialTrace { trace, failed }) => {
            let report = build_report(&trace, &tasks, &cfg.pool, inputs)
                .map_err(at(PipelineStage::Report))?;
            emit_report(&report, &report_dir).map_err(at(PipelineStage::Report))?;
            let failed: Vec<String> = failed.iter().map(ToString::to_string).collect();
            return Err(PipelineError {
                stage: PipelineStage::Schedule,
                message: format!("task(s) failed: {}", failed.join(", ")),
                partial_report: Some(report_dir),
            });
        }
        Err(e) => return Err(at(PipelineStage::Schedule)(e)),
    };
    write_json(
        &report_dir,
        "trace.json",
        &TraceDocument {
            trace: trace.clone(),
            tasks: Some(tasks.clone()),
            pool: Some(cfg.pool.clone()),
        },
    )?;

    let segments: Vec<Vec<Frame>> = executor
        .into_outputs()
        .into_iter()
        .map(|e| e.frames)
        .collect();
    let (frames, borders) = assemble(&segments, &selection, &plan, cfg)?;
    inputs.borders = Some(borders);

    let written = write_sequence(&frames, &cfg.output, fps).map_err(at(PipelineStage::Write))?;
    let report =
        build_report(&trace, &tasks, &cfg.pool, inputs).map_err(at(PipelineStage::Report))?;
    emit_report(&report, &report_dir).map_err(at(PipelineStage::Report))?;
    Ok(RunOutcome {
        frames_written: written.frame_count,
        report,
        report_dir,
    })
}

fn interp_err(e: impl fmt::Display) -> PipelineError {
    at(PipelineStage::Interpolate)(e)
}

/// Builds the output frame list and measures its segment borders.
fn assemble(
    segments: &[Vec<Frame>],
    selection: &SelectionResult,
    plan: &SegmentPlan,
    cfg: &PipelineConfig,
) -> Result<(Vec<Frame>, BorderMetrics), PipelineError> {
    if segments.len() != plan.segments.len() {
        return Err(interp_err(format!(
            "{} of {} segments produced output",
            segments.len(),
            plan.segments.len()
        )));
    }
    if !cfg.interp {
        let frames: Vec<Frame> = segments
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, f)| f.clone().with_index(i))
            .collect();
        let mut borders = Vec::new();
        let mut pos = 0;
        for s in &segments[..segments.len() - 1] {
            pos += s.len();
            borders.push((pos - 1, pos));
        }
        let metrics = border_consistency(&frames, &borders, &cfg.flow).map_err(interp_err)?;
        return Ok((frames, metrics));
    }
    let smoothed = smooth_borders(segments, &cfg.flow).map_err(interp_err)?;
    let mut slots: Vec<Option<Frame>> = vec![None; selection.frame_count()];
    for f in smoothed {
        let i = f.index();
        slots[i] = Some(f);
    }
    let fills = selection
        .skipped_runs
        .par_iter()
        .map(|&(a, b)| {
            let req = InterpolationRequest {
                frame_a: slots[a].clone().expect("selected frame present"),
                frame_b: slots[b].clone().expect("selected frame present"),
                count: b - a - 1,
            };
            interpolate_recursive(&req, &cfg.flow)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(interp_err)?;
    for f in fills.into_iter().flatten() {
        let i = f.index();
        slots[i] = Some(f);
    }
    let frames: Vec<Frame> = slots
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| interp_err(format!("frame {i} missing after interpolation"))))
        .collect::<Result<_, _>>()?;
    let metrics = border_consistency(&frames, &plan.borders(), &cfg.flow).map_err(interp_err)?;
    Ok((frames, metrics))
}
