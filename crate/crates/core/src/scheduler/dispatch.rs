//! Admission policy and task bookkeeping shared by both engines.

use std::collections::{BTreeSet, HashMap};

use super::{Outcome, QueueSample, ResourcePool, ScheduleError, TaskId, TaskSpec, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    /// Some dependency has not completed yet.
    Blocked,
    /// Dependencies done; waiting for the release time.
    Held,
    Queued {
        arrival: f64,
    },
    Running {
        arrival: f64,
        start: f64,
        worker: usize,
        mem_at_start: u64,
    },
    Finished,
    Cancelled,
}

/// A task handed to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct Start {
    pub task: usize,
    pub worker: usize,
}

pub(super) struct Dispatcher<'a> {
    pub tasks: &'a [TaskSpec],
    pub pool: &'a ResourcePool,
    dependents: Vec<Vec<usize>>,
    unmet: Vec<usize>,
    state: Vec<State>,
    /// `(stage priority, segment, task index)`
    queue: BTreeSet<(u8, usize, usize)>,
    /// `(release tick, task index)` for held tasks.
    held: BTreeSet<(u64, usize)>,
    busy: Vec<Option<usize>>,
    running: usize,
    pub events: Vec<TraceEvent>,
    pub samples: Vec<QueueSample>,
}

impl<'a> Dispatcher<'a> {
    pub fn new(tasks: &'a [TaskSpec], pool: &'a ResourcePool) -> Result<Self, ScheduleError> {
        pool.validate()?;
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.id, i).is_some() {
                return Err(ScheduleError::DuplicateTask(t.id));
            }
        }
        let mut dependents = vec![Vec::new(); tasks.len()];
        let mut unmet = vec![0; tasks.len()];
        for (i, t) in tasks.iter().enumerate() {
            for dep in &t.deps {
                let &d = index.get(dep).ok_or(ScheduleError::UnknownDependency {
                    task: t.id,
                    dep: *dep,
                })?;
                dependents[d].push(i);
                unmet[i] += 1;
            }
        }
        check_acyclic(tasks, &dependents, &unmet)?;
        for t in tasks {
            let required = pool.required_free(t);
            let feasible = pool
                .workers
                .iter()
                .any(|w| w.stages.accepts(t.id.stage) && w.capacity >= required);
            if !feasible {
                return Err(ScheduleError::Unschedulable {
                    task: t.id,
                    required,
                });
            }
        }
        let mut held = BTreeSet::new();
        let mut state = vec![State::Blocked; tasks.len()];
        for (i, t) in tasks.iter().enumerate() {
            if unmet[i] == 0 {
                state[i] = State::Held;
                held.insert((t.release, i));
            }
        }
        Ok(Self {
            tasks,
            pool,
            dependents,
            unmet,
            state,
            queue: BTreeSet::new(),
            held,
            busy: vec![None; pool.workers.len()],
            running: 0,
            events: Vec::with_capacity(tasks.len()),
            samples: Vec::new(),
        })
    }

    /// Earliest release tick among held tasks.
    pub fn next_release(&self) -> Option<u64> {
        self.held.first().map(|&(r, _)| r)
    }

    /// Queues every held task with `release <= tick`, stamping arrival `now`.
    pub fn release_due(&mut self, tick: u64, now: f64) {
        while let Some(&(r, i)) = self.held.first() {
            if r > tick {
                break;
            }
            self.held.pop_first();
            self.state[i] = State::Queued { arrival: now };
            let id = self.tasks[i].id;
            self.queue.insert((id.stage.priority(), id.segment, i));
        }
    }

    /// Starts every queued task that can be admitted right now.
    pub fn dispatch(&mut self, now: f64) -> Vec<Start> {
        let mut started = Vec::new();
        let candidates: Vec<_> = self.queue.iter().copied().collect();
        for key in candidates {
            if self.running >= self.pool.max_jobs {
                break;
            }
            let i = key.2;
            let task = &self.tasks[i];
            let required = self.pool.required_free(task);
            let slot = self
                .pool
                .workers
                .iter()
                .enumerate()
                .position(|(w, worker)| {
                    self.busy[w].is_none()
                        && worker.stages.accepts(task.id.stage)
                        && worker.capacity >= required
                });
            let Some(w) = slot else { continue };
            let State::Queued { arrival } = self.state[i] else {
                unreachable!("queued set holds only queued tasks")
            };
            self.queue.remove(&key);
            self.busy[w] = Some(i);
            self.running += 1;
            self.state[i] = State::Running {
                arrival,
                start: now,
                worker: w,
                mem_at_start: self.pool.workers[w].capacity,
            };
            started.push(Start { task: i, worker: w });
        }
        started
    }

    /// Records the end of task `i` and unblocks (or cancels) its dependents.
    pub fn complete(&mut self, i: usize, now: f64, outcome: Outcome) {
        let State::Running {
            arrival,
            start,
            worker,
            mem_at_start,
        } = self.state[i]
        else {
            panic!("completing task {} that is not running", self.tasks[i].id)
        };
        self.busy[worker] = None;
        self.running -= 1;
        self.state[i] = State::Finished;
        let ok = outcome == Outcome::Completed;
        self.events.push(TraceEvent {
            task: self.tasks[i].id,
            worker,
            arrival,
            start,
            end: now,
            mem_at_start,
            outcome,
        });
        if ok {
            for k in 0..self.dependents[i].len() {
                let d = self.dependents[i][k];
                self.unmet[d] -= 1;
                if self.unmet[d] == 0 && self.state[d] == State::Blocked {
                    self.state[d] = State::Held;
                    self.held.insert((self.tasks[d].release, d));
                }
            }
        } else {
            self.cancel_dependents(i);
        }
    }

    fn cancel_dependents(&mut self, i: usize) {
        let mut stack = self.dependents[i].clone();
        while let Some(d) = stack.pop() {
            if matches!(
                self.state[d],
                State::Blocked | State::Held | State::Queued { .. }
            ) {
                self.held.remove(&(self.tasks[d].release, d));
                let id = self.tasks[d].id;
                self.queue.remove(&(id.stage.priority(), id.segment, d));
                self.state[d] = State::Cancelled;
                stack.extend(self.dependents[d].iter().copied());
            }
        }
    }

    pub fn sample(&mut self, now: f64) -> QueueSample {
        let s = QueueSample {
            time: now,
            queue_length: self.queue.len(),
            in_flight: self.running,
        };
        self.samples.push(s);
        s
    }

    pub fn running(&self) -> usize {
        self.running
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn cancelled(&self) -> Vec<TaskId> {
        let mut ids: Vec<_> = self
            .state
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == State::Cancelled)
            .map(|(i, _)| self.tasks[i].id)
            .collect();
        ids.sort();
        ids
    }

    /// Whether any task can still become runnable.
    pub fn has_work(&self) -> bool {
        self.running > 0 || !self.queue.is_empty() || !self.held.is_empty()
    }
}

fn check_acyclic(
    tasks: &[TaskSpec],
    dependents: &[Vec<usize>],
    unmet: &[usize],
) -> Result<(), ScheduleError> {
    let mut indegree = unmet.to_vec();
    let mut frontier: Vec<usize> = (0..tasks.len()).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = frontier.pop() {
        seen += 1;
        for &d in &dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                frontier.push(d);
            }
        }
    }
    if seen == tasks.len() {
        Ok(())
    } else {
        let mut stuck: Vec<TaskId> = (0..tasks.len())
            .filter(|&i| indegree[i] > 0)
            .map(|i| tasks[i].id)
            .collect();
        stuck.sort();
        Err(ScheduleError::CycleError(stuck))
    }
}
