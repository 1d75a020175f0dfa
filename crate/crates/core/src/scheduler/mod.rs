//! Memory-aware, queue-based execution of the two-stage segment DAG.
//!
//! A single decision loop owns the ready queue. A task is admitted when fewer
//! than `max_jobs` tasks are running and the first worker (by id) that is idle,
//! accepts the task's stage, and has free memory of at least
//! `max(mem_threshold, task.mem_demand)`. Ready edit tasks outrank ready invert
//! tasks; within a stage, lower segment ids go first. Workers that cannot host
//! the head of the queue may still take later tasks.
//!
//! Two engines share that policy: a discrete-event simulator over integer
//! ticks ([`Mode::Simulated`]) and a threaded wall-clock runner
//! ([`Mode::Realtime`]) in which workers only execute and report completion.

mod dispatch;
mod realtime;
mod simulate;
mod stats;
mod validate;

use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{integrate_samples, predict_times, queue_stats, PredictedTimes, QueueStats};
pub use validate::{validate_trace, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Per-segment preprocessing that must finish before the segment is edited.
    Invert,
    /// Keyframe-guided editing of a segment.
    Edit,
}

impl Stage {
    /// Lower value is served first.
    fn priority(self) -> u8 {
        match self {
            Stage::Edit => 0,
            Stage::Invert => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId {
    pub segment: usize,
    pub stage: Stage,
}

impl TaskId {
    pub const fn invert(segment: usize) -> Self {
        Self {
            segment,
            stage: Stage::Invert,
        }
    }

    pub const fn edit(segment: usize) -> Self {
        Self {
            segment,
            stage: Stage::Edit,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = match self.stage {
            Stage::Invert => "invert",
            Stage::Edit => "edit",
        };
        write!(f, "{stage}({})", self.segment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub deps: Vec<TaskId>,
    /// Memory units reserved on the worker for the task's lifetime.
    pub mem_demand: u64,
    /// Duration in ticks for simulation; `None` when only a real backend knows.
    pub est_duration: Option<u64>,
    /// Earliest tick at which the task may be queued.
    #[serde(default)]
    pub release: u64,
}

impl TaskSpec {
    pub fn new(id: TaskId, deps: Vec<TaskId>, mem_demand: u64, est_duration: Option<u64>) -> Self {
        Self {
            id,
            deps,
            mem_demand,
            est_duration,
            release: 0,
        }
    }
}

/// Builds the standard invert -> edit pair for each of `durations`
/// (`(invert_ticks, edit_ticks)` per segment).
pub fn two_stage_tasks(durations: &[(u64, u64)], mem: (u64, u64)) -> Vec<TaskSpec> {
    durations
        .iter()
        .enumerate()
        .flat_map(|(i, &(t1, t2))| {
            [
                TaskSpec::new(TaskId::invert(i), vec![], mem.0, Some(t1)),
                TaskSpec::new(TaskId::edit(i), vec![TaskId::invert(i)], mem.1, Some(t2)),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageSet {
    #[default]
    Any,
    Invert,
    Edit,
}

impl StageSet {
    pub fn accepts(self, stage: Stage) -> bool {
        match self {
            StageSet::Any => true,
            StageSet::Invert => stage == Stage::Invert,
            StageSet::Edit => stage == Stage::Edit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Worker {
    /// Memory units.
    pub capacity: u64,
    #[serde(default)]
    pub stages: StageSet,
}

impl Worker {
    pub const fn new(capacity: u64) -> Self {
        Self {
            capacity,
            stages: StageSet::Any,
        }
    }

    pub const fn dedicated(capacity: u64, stages: StageSet) -> Self {
        Self { capacity, stages }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub workers: Vec<Worker>,
    /// Maximum number of concurrently running tasks across all workers.
    pub max_jobs: usize,
    /// Minimum free memory a worker must have before it is handed a task.
    pub mem_threshold: u64,
}

impl ResourcePool {
    /// `count` identical general-purpose workers.
    pub fn uniform(count: usize, capacity: u64, max_jobs: usize, mem_threshold: u64) -> Self {
        Self {
            workers: vec![Worker::new(capacity); count],
            max_jobs,
            mem_threshold,
        }
    }

    /// `count` workers of one capacity. With `dedicated`, even ids only invert
    /// and odd ids only edit.
    pub fn alternating(
        count: usize,
        capacity: u64,
        max_jobs: usize,
        mem_threshold: u64,
        dedicated: bool,
    ) -> Self {
        let workers = (0..count)
            .map(|i| {
                let stages = match (dedicated, i % 2) {
                    (false, _) => StageSet::Any,
                    (true, 0) => StageSet::Invert,
                    (true, _) => StageSet::Edit,
                };
                Worker::dedicated(capacity, stages)
            })
            .collect();
        Self {
            workers,
            max_jobs,
            mem_threshold,
        }
    }

    /// One invert-only and one edit-only worker, two concurrent jobs.
    pub fn two_stage(capacity: u64) -> Self {
        Self {
            workers: vec![
                Worker::dedicated(capacity, StageSet::Invert),
                Worker::dedicated(capacity, StageSet::Edit),
            ],
            max_jobs: 2,
            mem_threshold: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.workers.is_empty() {
            return Err(ScheduleError::BadPool("no workers".into()));
        }
        if self.max_jobs == 0 {
            return Err(ScheduleError::BadPool("max_jobs must be >= 1".into()));
        }
        if let Some(i) = self.workers.iter().position(|w| w.capacity == 0) {
            return Err(ScheduleError::BadPool(format!(
                "worker {i} has zero capacity"
            )));
        }
        Ok(())
    }

    /// Memory a worker must offer for `task` to be admitted on it.
    pub fn required_free(&self, task: &TaskSpec) -> u64 {
        self.mem_threshold.max(task.mem_demand)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Discrete-event simulation in integer ticks; the executor still runs
    /// every task, in start order, on the decision thread.
    Simulated,
    /// Wall-clock execution on one thread per worker. Release ticks are
    /// converted with `seconds_per_tick`; trace times are in seconds.
    Realtime { seconds_per_tick: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub task: TaskId,
    pub worker: usize,
    /// Instant the task entered the ready queue.
    pub arrival: f64,
    pub start: f64,
    pub end: f64,
    /// Free memory on the worker just before the task's reservation.
    pub mem_at_start: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSample {
    pub time: f64,
    /// Tasks queued but not yet started.
    pub queue_length: usize,
    pub in_flight: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Ticks,
    Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    /// In start order.
    pub events: Vec<TraceEvent>,
    pub makespan: f64,
    /// Sampled after every scheduling decision; the last sample is empty.
    pub queue_samples: Vec<QueueSample>,
    /// Tasks never started because a dependency failed.
    #[serde(default)]
    pub cancelled: Vec<TaskId>,
    pub time_unit: TimeUnit,
}

impl ScheduleTrace {
    pub fn event(&self, id: TaskId) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.task == id)
    }

    pub fn failed(&self) -> Vec<TaskId> {
        self.events
            .iter()
            .filter(|e| matches!(e.outcome, Outcome::Failed { .. }))
            .map(|e| e.task)
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ExecError(pub String);

/// Runs task bodies. Implementations must tolerate concurrent calls for
/// different tasks.
pub trait TaskExecutor: Sync {
    /// Simulated duration in ticks. Defaults to the task's estimate.
    fn simulated_duration(&self, task: &TaskSpec) -> Result<u64, ExecError> {
        task.est_duration
            .ok_or_else(|| ExecError(format!("{} has no duration estimate", task.id)))
    }

    fn execute(&self, task: &TaskSpec) -> Result<(), ExecError>;
}

/// Executor with no side effects; simulated durations come from the tasks.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoopExecutor;

impl TaskExecutor for NoopExecutor {
    fn execute(&self, _task: &TaskSpec) -> Result<(), ExecError> {
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("dependency cycle through {0:?}")]
    CycleError(Vec<TaskId>),
    #[error(
        "task {task} needs {required} free memory units but no eligible worker offers that much"
    )]
    Unschedulable { task: TaskId, required: u64 },
    #[error("task {task} depends on unknown task {dep}")]
    UnknownDependency { task: TaskId, dep: TaskId },
    #[error("task {0} listed twice")]
    DuplicateTask(TaskId),
    #[error("bad resource pool: {0}")]
    BadPool(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("{} task(s) failed; partial trace attached", failed.len())]
    PartialTrace {
        trace: Box<ScheduleTrace>,
        failed: Vec<TaskId>,
    },
    #[error("trace has no events")]
    EmptyTrace,
    #[error("scheduler stalled with {0} queued task(s)")]
    Stalled(usize),
}

/// Shared read-only view of the queue samples recorded so far.
#[derive(Debug, Clone, Default)]
pub struct QueueObserver(Arc<RwLock<Vec<QueueSample>>>);

impl QueueObserver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Vec<QueueSample> {
        self.0.read().expect("queue observer poisoned").clone()
    }

    fn push(&self, sample: QueueSample) {
        self.0
            .write()
            .expect("queue observer poisoned")
            .push(sample);
    }
}

/// Executes `tasks` on `pool` and returns the full execution record.
pub fn run_schedule(
    tasks: &[TaskSpec],
    pool: &ResourcePool,
    executor: &dyn TaskExecutor,
    mode: Mode,
) -> Result<ScheduleTrace, ScheduleError> {
    run_schedule_observed(tasks, pool, executor, mode, None)
}

/// [`run_schedule`] that also publishes queue samples to `observer` as they
/// are taken.
pub fn run_schedule_observed(
    tasks: &[TaskSpec],
    pool: &ResourcePool,
    executor: &dyn TaskExecutor,
    mode: Mode,
    observer: Option<&QueueObserver>,
) -> Result<ScheduleTrace, ScheduleError> {
    let dispatcher = dispatch::Dispatcher::new(tasks, pool)?;
    let trace = match mode {
        Mode::Simulated => simulate::run(dispatcher, executor, observer)?,
        Mode::Realtime { seconds_per_tick } => {
            if !(seconds_per_tick.is_finite() && seconds_per_tick >= 0.0) {
                return Err(ScheduleError::BadConfig(format!(
                    "seconds_per_tick must be finite and >= 0, got {seconds_per_tick}"
                )));
            }
            realtime::run(dispatcher, executor, seconds_per_tick, observer)?
        }
    };
    let failed = trace.failed();
    if failed.is_empty() {
        Ok(trace)
    } else {
        Err(ScheduleError::PartialTrace {
            trace: Box::new(trace),
            failed,
        })
    }
}

/// Makespan of running every task back to back on one worker.
pub fn serial_makespan(tasks: &[TaskSpec]) -> u64 {
    tasks.iter().filter_map(|t| t.est_duration).sum()
}

#[cfg(test)]
mod tests;
