//! Independent checker for execution traces.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Outcome, ResourcePool, ScheduleTrace, TaskId, TaskSpec, TimeUnit};

/// One broken constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `task` started before `dep` ended, or ran although `dep` did not complete.
    Dependency {
        task: TaskId,
        dep: TaskId,
        time: f64,
    },
    /// More than `max_jobs` tasks running at `time`.
    Concurrency {
        running: usize,
        max_jobs: usize,
        time: f64,
    },
    /// Committed memory on `worker` exceeded its capacity.
    Memory {
        worker: usize,
        committed: u64,
        capacity: u64,
        time: f64,
    },
    /// Started with less free memory than `max(MEM, demand)`.
    Admission {
        task: TaskId,
        worker: usize,
        free: u64,
        required: u64,
        time: f64,
    },
    /// Two tasks overlap on one worker.
    WorkerOverlap {
        worker: usize,
        first: TaskId,
        second: TaskId,
        time: f64,
    },
    /// Ran on a worker that does not accept its stage.
    Stage {
        task: TaskId,
        worker: usize,
    },
    /// Started before its release tick.
    Release {
        task: TaskId,
        release: u64,
        time: f64,
    },
    Duplicate {
        task: TaskId,
    },
    /// Neither executed nor cancelled.
    Missing {
        task: TaskId,
    },
    /// Event for a task or worker that does not exist.
    Unknown {
        task: TaskId,
        worker: usize,
    },
    /// Times out of order (`arrival <= start <= end`) or not finite.
    BadInterval {
        task: TaskId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dependency { task, dep, time } => {
                write!(f, "dependency: {task} at {time} before {dep} completed")
            }
            Violation::Concurrency {
                running,
                max_jobs,
                time,
            } => {
                write!(
                    f,
                    "concurrency: {running} running > MJ {max_jobs} at {time}"
                )
            }
            Violation::Memory {
                worker,
                committed,
                capacity,
                time,
            } => {
                write!(
                    f,
                    "memory: worker {worker} holds {committed} > {capacity} at {time}"
                )
            }
            Violation::Admission {
                task,
                worker,
                free,
                required,
                time,
            } => write!(
                f,
                "admission: {task} on worker {worker} at {time} with {free} free, needs {required}"
            ),
            Violation::WorkerOverlap {
                worker,
                first,
                second,
                time,
            } => {
                write!(
                    f,
                    "overlap: {first} and {second} on worker {worker} at {time}"
                )
            }
            Violation::Stage { task, worker } => {
                write!(f, "stage: worker {worker} does not accept {task}")
            }
            Violation::Release {
                task,
                release,
                time,
            } => {
                write!(f, "release: {task} started at {time} before tick {release}")
            }
            Violation::Duplicate { task } => write!(f, "duplicate: {task} executed twice"),
            Violation::Missing { task } => write!(f, "missing: {task} never ran"),
            Violation::Unknown { task, worker } => {
                write!(f, "unknown: {task} on worker {worker}")
            }
            Violation::BadInterval { task } => write!(f, "bad interval for {task}"),
        }
    }
}

/// Checks every ordering, memory, concurrency and single-execution
/// constraint. Zero-length events occupy no time and are ignored by the
/// concurrency and memory sweeps.
pub fn validate_trace(
    trace: &ScheduleTrace,
    tasks: &[TaskSpec],
    pool: &ResourcePool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let specs: HashMap<TaskId, &TaskSpec> = tasks.iter().map(|t| (t.id, t)).collect();
    let mut seen: HashMap<TaskId, usize> = HashMap::new();
    let mut known = Vec::with_capacity(trace.events.len());

    for (k, e) in trace.events.iter().enumerate() {
        let Some(spec) = specs.get(&e.task) else {
            out.push(Violation::Unknown {
                task: e.task,
                worker: e.worker,
            });
            continue;
        };
        let Some(worker) = pool.workers.get(e.worker) else {
            out.push(Violation::Unknown {
                task: e.task,
                worker: e.worker,
            });
            continue;
        };
        if seen.contains_key(&e.task) {
            out.push(Violation::Duplicate { task: e.task });
            continue;
        }
        seen.insert(e.task, k);
        let finite = e.arrival.is_finite() && e.start.is_finite() && e.end.is_finite();
        if !finite || e.arrival > e.start || e.start > e.end {
            out.push(Violation::BadInterval { task: e.task });
            continue;
        }
        if !worker.stages.accepts(e.task.stage) {
            out.push(Violation::Stage {
                task: e.task,
                worker: e.worker,
            });
        }
        let required = pool.required_free(spec);
        if e.mem_at_start < required || e.mem_at_start > worker.capacity {
            out.push(Violation::Admission {
                task: e.task,
                worker: e.worker,
                free: e.mem_at_start,
                required,
                time: e.start,
            });
        }
        if trace.time_unit == TimeUnit::Ticks && e.start < spec.release as f64 {
            out.push(Violation::Release {
                task: e.task,
                release: spec.release,
                time: e.start,
            });
        }
        known.push(k);
    }

    for &k in &known {
        let e = &trace.events[k];
        for dep in &specs[&e.task].deps {
            let ok = seen
                .get(dep)
                .map(|&j| &trace.events[j])
                .is_some_and(|d| d.outcome == Outcome::Completed && d.end <= e.start);
            if !ok {
                out.push(Violation::Dependency {
                    task: e.task,
                    dep: *dep,
                    time: e.start,
                });
            }
        }
    }

    let cancelled: std::collections::HashSet<_> = trace.cancelled.iter().collect();
    let mut ids: Vec<_> = tasks.iter().map(|t| t.id).collect();
    ids.sort();
    for id in ids {
        if !seen.contains_key(&id) && !cancelled.contains(&id) {
            out.push(Violation::Missing { task: id });
        }
    }

    sweep(trace, &known, &specs, pool, &mut out);
    out
}

/// Sweeps start/end points in time order, ends before starts at equal times.
fn sweep(
    trace: &ScheduleTrace,
    known: &[usize],
    specs: &HashMap<TaskId, &TaskSpec>,
    pool: &ResourcePool,
    out: &mut Vec<Violation>,
) {
    // (time, is_start, event index)
    let mut points = Vec::with_capacity(known.len() * 2);
    for &k in known {
        let e = &trace.events[k];
        if e.end > e.start {
            points.push((e.start, true, k));
            points.push((e.end, false, k));
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut running = 0usize;
    let mut committed = vec![0u64; pool.workers.len()];
    let mut holder: Vec<Option<usize>> = vec![None; pool.workers.len()];
    for (time, is_start, k) in points {
        let e = &trace.events[k];
        let demand = specs[&e.task].mem_demand;
        if is_start {
            running += 1;
            if running > pool.max_jobs {
                out.push(Violation::Concurrency {
                    running,
                    max_jobs: pool.max_jobs,
                    time,
                });
            }
            if let Some(other) = holder[e.worker] {
                out.push(Violation::WorkerOverlap {
                    worker: e.worker,
                    first: trace.events[other].task,
                    second: e.task,
                    time,
                });
            }
            holder[e.worker] = Some(k);
            committed[e.worker] += demand;
            let capacity = pool.workers[e.worker].capacity;
            if committed[e.worker] > capacity {
                out.push(Violation::Memory {
                    worker: e.worker,
                    committed: committed[e.worker],
                    capacity,
                    time,
                });
            }
        } else {
            running -= 1;
            committed[e.worker] -= demand;
            if holder[e.worker] == Some(k) {
                holder[e.worker] = None;
            }
        }
    }
}
