use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::backends::CostModelParams;

fn sim(tasks: &[TaskSpec], pool: &ResourcePool) -> ScheduleTrace {
    let trace = run_schedule(tasks, pool, &NoopExecutor, Mode::Simulated).unwrap();
    assert_eq!(validate_trace(&trace, tasks, pool), vec![]);
    trace
}

/// Smallest makespan over every task order and worker assignment, each task
/// started as early as its worker and dependencies allow. Assumes `max_jobs`
/// is not binding.
fn brute_force_optimum(tasks: &[TaskSpec], pool: &ResourcePool) -> u64 {
    fn go(
        tasks: &[TaskSpec],
        pool: &ResourcePool,
        end: &mut Vec<Option<u64>>,
        free_at: &mut Vec<u64>,
        best: &mut u64,
    ) {
        let current = end.iter().flatten().copied().max().unwrap_or(0);
        if current >= *best {
            return;
        }
        if end.iter().all(Option::is_some) {
            *best = current;
            return;
        }
        for i in 0..tasks.len() {
            if end[i].is_some() {
                continue;
            }
            let mut dep_end = tasks[i].deps.iter().map(|d| {
                let j = tasks.iter().position(|t| t.id == *d).unwrap();
                end[j]
            });
            let Some(ready) = dep_end.try_fold(0u64, |acc, e| Some(acc.max(e?))) else {
                continue;
            };
            for (w, worker) in pool.workers.iter().enumerate() {
                if !worker.stages.accepts(tasks[i].id.stage)
                    || worker.capacity < pool.required_free(&tasks[i])
                {
                    continue;
                }
                let start = ready.max(free_at[w]);
                let saved = free_at[w];
                let finish = start + tasks[i].est_duration.unwrap();
                free_at[w] = finish;
                end[i] = Some(finish);
                go(tasks, pool, end, free_at, best);
                end[i] = None;
                free_at[w] = saved;
            }
        }
    }
    let mut best = u64::MAX;
    go(
        tasks,
        pool,
        &mut vec![None; tasks.len()],
        &mut vec![0; pool.workers.len()],
        &mut best,
    );
    best
}

#[test]
fn single_segment_chain() {
    let tasks = two_stage_tasks(&[(10, 20)], (1, 1));
    let trace = sim(&tasks, &ResourcePool::uniform(1, 4, 1, 0));
    assert_eq!(trace.makespan, 30.0);
    assert_eq!(trace.event(TaskId::edit(0)).unwrap().start, 10.0);
}

#[test]
fn three_segments_two_dedicated_workers() {
    let tasks = two_stage_tasks(&[(10, 10); 3], (1, 1));
    let pool = ResourcePool::two_stage(8);
    let trace = sim(&tasks, &pool);
    assert_eq!(trace.makespan, 40.0);
    let start = |id| trace.event(id).unwrap().start;
    assert_eq!(start(TaskId::invert(0)), 0.0);
    assert_eq!(start(TaskId::edit(0)), 10.0);
    assert_eq!(start(TaskId::invert(1)), 10.0);
    assert_eq!(start(TaskId::edit(1)), 20.0);
    assert_eq!(start(TaskId::invert(2)), 20.0);
    assert_eq!(start(TaskId::edit(2)), 30.0);
    assert_eq!(brute_force_optimum(&tasks, &pool), 40);
}

#[test]
fn three_segments_general_workers_edit_first() {
    // Edit-first greedy drains segments in order; an invert-first order
    // could finish in 30 on two general workers.
    let tasks = two_stage_tasks(&[(10, 10); 3], (1, 1));
    let pool = ResourcePool::uniform(2, 8, 2, 0);
    assert_eq!(sim(&tasks, &pool).makespan, 40.0);
    assert_eq!(brute_force_optimum(&tasks, &pool), 30);
}

#[test]
fn memory_threshold_serializes() {
    let tasks = two_stage_tasks(&[(10, 10); 3], (2, 2));
    let pool = ResourcePool {
        workers: vec![Worker::new(8), Worker::new(4)],
        max_jobs: 2,
        mem_threshold: 6,
    };
    let trace = sim(&tasks, &pool);
    assert_eq!(trace.makespan, 60.0);
    assert!(trace.events.iter().all(|e| e.worker == 0));
}

#[test]
fn demand_picks_larger_worker() {
    let tasks = vec![
        TaskSpec::new(TaskId::invert(0), vec![], 10, Some(5)),
        TaskSpec::new(TaskId::invert(1), vec![], 2, Some(5)),
    ];
    let pool = ResourcePool {
        workers: vec![Worker::new(4), Worker::new(16)],
        max_jobs: 2,
        mem_threshold: 0,
    };
    let trace = sim(&tasks, &pool);
    assert_eq!(trace.event(TaskId::invert(0)).unwrap().worker, 1);
    assert_eq!(trace.event(TaskId::invert(1)).unwrap().worker, 0);
    assert_eq!(trace.makespan, 5.0);
}

#[test]
fn backfill_behind_blocked_head() {
    // invert(0) fits only on worker 1, which is busy; invert(1) may use worker 0
    let tasks = vec![
        TaskSpec::new(TaskId::invert(0), vec![], 3, Some(4)),
        TaskSpec::new(TaskId::invert(1), vec![], 3, Some(4)),
        TaskSpec::new(TaskId::invert(2), vec![], 1, Some(2)),
    ];
    let pool = ResourcePool {
        workers: vec![Worker::new(2), Worker::new(4)],
        max_jobs: 2,
        mem_threshold: 0,
    };
    let trace = sim(&tasks, &pool);
    assert_eq!(trace.event(TaskId::invert(2)).unwrap().start, 0.0);
    assert_eq!(trace.event(TaskId::invert(2)).unwrap().worker, 0);
}

#[test]
fn errors() {
    let pool = ResourcePool::uniform(1, 4, 1, 0);
    let cyc = vec![
        TaskSpec::new(TaskId::invert(0), vec![TaskId::edit(0)], 1, Some(1)),
        TaskSpec::new(TaskId::edit(0), vec![TaskId::invert(0)], 1, Some(1)),
    ];
    assert!(matches!(
        run_schedule(&cyc, &pool, &NoopExecutor, Mode::Simulated),
        Err(ScheduleError::CycleError(ids)) if ids.len() == 2
    ));
    let big = vec![TaskSpec::new(TaskId::invert(0), vec![], 5, Some(1))];
    assert!(matches!(
        run_schedule(&big, &pool, &NoopExecutor, Mode::Simulated),
        Err(ScheduleError::Unschedulable { required: 5, .. })
    ));
    let thresh = ResourcePool::uniform(1, 4, 1, 9);
    assert!(matches!(
        run_schedule(
            &two_stage_tasks(&[(1, 1)], (1, 1)),
            &thresh,
            &NoopExecutor,
            Mode::Simulated
        ),
        Err(ScheduleError::Unschedulable { required: 9, .. })
    ));
    let unknown = vec![TaskSpec::new(
        TaskId::edit(0),
        vec![TaskId::invert(0)],
        1,
        Some(1),
    )];
    assert!(matches!(
        run_schedule(&unknown, &pool, &NoopExecutor, Mode::Simulated),
        Err(ScheduleError::UnknownDependency { .. })
    ));
    let dup = vec![
        TaskSpec::new(TaskId::invert(0), vec![], 1, Some(1)),
        TaskSpec::new(TaskId::invert(0), vec![], 1, Some(1)),
    ];
    assert!(matches!(
        run_schedule(&dup, &pool, &NoopExecutor, Mode::Simulated),
        Err(ScheduleError::DuplicateTask(_))
    ));
    let no_est = vec![TaskSpec::new(TaskId::invert(0), vec![], 1, None)];
    assert!(matches!(
        run_schedule(&no_est, &pool, &NoopExecutor, Mode::Simulated),
        Err(ScheduleError::PartialTrace { .. })
    ));
    assert!(matches!(
        run_schedule(
            &[],
            &ResourcePool::uniform(0, 4, 1, 0),
            &NoopExecutor,
            Mode::Simulated
        ),
        Err(ScheduleError::BadPool(_))
    ));
    assert!(matches!(
        run_schedule(
            &[],
            &ResourcePool::uniform(1, 4, 0, 0),
            &NoopExecutor,
            Mode::Simulated
        ),
        Err(ScheduleError::BadPool(_))
    ));
}

#[test]
fn empty_task_list() {
    let pool = ResourcePool::uniform(1, 4, 1, 0);
    let trace = sim(&[], &pool);
    assert_eq!(trace.makespan, 0.0);
    assert!(matches!(
        queue_stats(&trace),
        Err(ScheduleError::EmptyTrace)
    ));
}

struct FailOn(HashSet<TaskId>);

impl TaskExecutor for FailOn {
    fn execute(&self, task: &TaskSpec) -> Result<(), ExecError> {
        if self.0.contains(&task.id) {
            Err(ExecError(format!("injected failure in {}", task.id)))
        } else {
            Ok(())
        }
    }
}

#[test]
fn failure_cancels_dependents() {
    let tasks = two_stage_tasks(&[(3, 3); 3], (1, 1));
    let pool = ResourcePool::uniform(2, 4, 2, 0);
    let exec = FailOn([TaskId::invert(1)].into());
    let Err(ScheduleError::PartialTrace { trace, failed }) =
        run_schedule(&tasks, &pool, &exec, Mode::Simulated)
    else {
        panic!("expected a partial trace")
    };
    assert_eq!(failed, vec![TaskId::invert(1)]);
    assert_eq!(trace.cancelled, vec![TaskId::edit(1)]);
    assert!(trace.event(TaskId::edit(2)).is_some());
    assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
}

#[test]
fn release_times_respected() {
    let mut tasks = two_stage_tasks(&[(2, 2); 4], (1, 1));
    for t in &mut tasks {
        if t.id.stage == Stage::Invert {
            t.release = 10 * t.id.segment as u64;
        }
    }
    let pool = ResourcePool::uniform(2, 4, 2, 0);
    let trace = sim(&tasks, &pool);
    for i in 0..4 {
        let e = trace.event(TaskId::invert(i)).unwrap();
        assert_eq!(e.arrival, 10.0 * i as f64);
        assert_eq!(e.start, 10.0 * i as f64);
    }
    assert_eq!(trace.makespan, 34.0);
}

#[test]
fn zero_duration_tasks() {
    let tasks = two_stage_tasks(&[(0, 0), (0, 3), (2, 0)], (1, 1));
    let pool = ResourcePool::uniform(1, 4, 1, 0);
    let trace = sim(&tasks, &pool);
    assert_eq!(trace.makespan, 5.0);
    assert_eq!(trace.events.len(), 6);
}

#[test]
fn serial_degeneracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let durations: Vec<(u64, u64)> = (0..20)
        .map(|_| (rng.random_range(1..30), rng.random_range(1..30)))
        .collect();
    let tasks = two_stage_tasks(&durations, (1, 1));
    let trace = sim(&tasks, &ResourcePool::uniform(1, 4, 1, 0));
    assert_eq!(trace.makespan as u64, serial_makespan(&tasks));
}

#[test]
fn two_stage_steady_state() {
    for n in [1usize, 2, 5, 19, 50] {
        let tasks = two_stage_tasks(&vec![(7, 7); n], (1, 1));
        let trace = sim(&tasks, &ResourcePool::two_stage(4));
        assert_eq!(trace.makespan, ((n + 1) * 7) as f64, "n={n}");
    }
}

#[test]
fn worker_scaling() {
    for k in [1usize, 2, 4, 8] {
        let tasks = two_stage_tasks(&vec![(5, 5); 8 * k], (1, 1));
        let one = sim(&tasks, &ResourcePool::uniform(1, 4, 1, 0)).makespan;
        let many = sim(&tasks, &ResourcePool::uniform(k, 4, k, 0)).makespan;
        assert!(one / many >= 0.9 * k as f64, "k={k}: {}", one / many);
    }
}

#[test]
fn deterministic() {
    let tasks = random_tasks(&mut ChaCha8Rng::seed_from_u64(5), 30);
    let pool = ResourcePool::uniform(3, 50, 2, 10);
    let a = run_schedule(&tasks, &pool, &NoopExecutor, Mode::Simulated).unwrap();
    let b = run_schedule(&tasks, &pool, &NoopExecutor, Mode::Simulated).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn observer_matches_trace() {
    let tasks = two_stage_tasks(&[(3, 4); 5], (1, 1));
    let pool = ResourcePool::uniform(2, 4, 2, 0);
    let obs = QueueObserver::new();
    let trace =
        run_schedule_observed(&tasks, &pool, &NoopExecutor, Mode::Simulated, Some(&obs)).unwrap();
    assert_eq!(obs.snapshot(), trace.queue_samples);
    let last = trace.queue_samples.last().unwrap();
    assert_eq!((last.queue_length, last.in_flight), (0, 0));
}

#[test]
fn realtime_mode() {
    let tasks = two_stage_tasks(&[(1, 1); 6], (1, 1));
    let pool = ResourcePool::uniform(3, 4, 2, 0);
    let trace = run_schedule(
        &tasks,
        &pool,
        &NoopExecutor,
        Mode::Realtime {
            seconds_per_tick: 0.001,
        },
    )
    .unwrap();
    assert_eq!(trace.time_unit, TimeUnit::Seconds);
    assert_eq!(trace.events.len(), 12);
    assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
    let exec = FailOn([TaskId::invert(2)].into());
    let Err(ScheduleError::PartialTrace { trace, .. }) = run_schedule(
        &tasks,
        &pool,
        &exec,
        Mode::Realtime {
            seconds_per_tick: 0.0,
        },
    ) else {
        panic!("expected a partial trace")
    };
    assert_eq!(trace.cancelled, vec![TaskId::edit(2)]);
    assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
}

#[test]
fn realtime_releases() {
    let mut tasks = two_stage_tasks(&[(1, 1); 2], (1, 1));
    tasks[2].release = 20;
    let pool = ResourcePool::uniform(2, 4, 2, 0);
    let trace = run_schedule(
        &tasks,
        &pool,
        &NoopExecutor,
        Mode::Realtime {
            seconds_per_tick: 0.001,
        },
    )
    .unwrap();
    assert!(trace.event(TaskId::invert(1)).unwrap().start >= 0.02);
}

#[test]
fn queue_stats_single_task() {
    let tasks = vec![TaskSpec::new(TaskId::invert(0), vec![], 1, Some(10))];
    let s = queue_stats(&sim(&tasks, &ResourcePool::uniform(1, 4, 1, 0))).unwrap();
    assert_eq!(s.l, 1.0);
    assert_eq!(s.w, 10.0);
    assert_eq!(s.lambda, 0.1);
    assert_eq!(s.residual, 0.0);
}

#[test]
fn queue_stats_back_to_back() {
    let tasks = vec![
        TaskSpec::new(TaskId::invert(0), vec![], 1, Some(10)),
        TaskSpec::new(TaskId::invert(1), vec![], 1, Some(5)),
    ];
    let trace = sim(&tasks, &ResourcePool::uniform(1, 4, 1, 0));
    let s = queue_stats(&trace).unwrap();
    // 2 in system over [0,10], 1 over [10,15]
    assert!((s.l - 25.0 / 15.0).abs() < 1e-12);
    assert_eq!(s.w, 12.5);
    let area = integrate_samples(&trace.queue_samples, 0.0, 15.0);
    assert_eq!(area, 25.0);
}

#[test]
fn littles_law_steady_state() {
    let n = 100;
    let mut tasks = two_stage_tasks(&vec![(4, 4); n], (1, 1));
    for t in &mut tasks {
        if t.id.stage == Stage::Invert {
            t.release = 4 * t.id.segment as u64;
        }
    }
    let trace = sim(&tasks, &ResourcePool::two_stage(4));
    let s = queue_stats(&trace).unwrap();
    assert!(s.residual <= 0.05, "{s:?}");
    let area = integrate_samples(&trace.queue_samples, s.window[0], s.window[1]);
    assert!((area / (s.window[1] - s.window[0]) - s.l).abs() < 1e-9);
}

#[test]
fn predict_overflow_is_an_error() {
    let huge = CostModelParams {
        n1: u64::MAX,
        n2: u64::MAX,
        t1: u64::MAX,
        t2: u64::MAX,
        ..Default::default()
    };
    assert!(matches!(
        predict_times(&huge),
        Err(ScheduleError::BadConfig(_))
    ));
    let edge = CostModelParams {
        n1: u64::MAX,
        n2: 1,
        t1: u64::MAX,
        t2: 1,
        ..Default::default()
    };
    assert_eq!(
        predict_times(&edge).unwrap().t_serial_sum,
        (u64::MAX as u128).pow(2) + 1
    );
}

#[test]
fn predict_examples() {
    let p = CostModelParams {
        n1: 2,
        n2: 2,
        t1: 3,
        t2: 3,
        batches: 4,
        ..Default::default()
    };
    let t = predict_times(&p).unwrap();
    assert_eq!(t.t_serial_paper, 36);
    assert_eq!(t.t_async_paper, num_rational::Ratio::from_integer(9));
    let p = CostModelParams {
        n1: 19,
        n2: 19,
        t1: 5,
        t2: 5,
        ..Default::default()
    };
    let t = predict_times(&p).unwrap();
    assert_eq!(t.t_serial_sum as f64 / t.pipeline_bound as f64, 1.9);
    let json = serde_json::to_value(t).unwrap();
    assert_eq!(json["t_async_paper"], serde_json::json!([9025, 1]));
    let back: PredictedTimes = serde_json::from_value(json).unwrap();
    assert_eq!(back, t);
    assert!(predict_times(&CostModelParams {
        batches: 0,
        ..Default::default()
    })
    .is_err());
}

fn hand_event(task: TaskId, worker: usize, start: f64, end: f64) -> TraceEvent {
    TraceEvent {
        task,
        worker,
        arrival: 0.0,
        start,
        end,
        mem_at_start: 4,
        outcome: Outcome::Completed,
    }
}

fn hand_trace(events: Vec<TraceEvent>) -> ScheduleTrace {
    let makespan = events.iter().map(|e| e.end).fold(0.0, f64::max);
    ScheduleTrace {
        events,
        makespan,
        queue_samples: vec![],
        cancelled: vec![],
        time_unit: TimeUnit::Ticks,
    }
}

#[test]
fn validator_flags_dependency() {
    let tasks = two_stage_tasks(&[(5, 5); 3], (1, 1));
    let pool = ResourcePool::uniform(2, 4, 2, 0);
    let trace = hand_trace(vec![
        hand_event(TaskId::invert(0), 0, 0.0, 5.0),
        hand_event(TaskId::edit(0), 0, 5.0, 10.0),
        hand_event(TaskId::invert(1), 1, 0.0, 5.0),
        hand_event(TaskId::edit(1), 1, 5.0, 10.0),
        hand_event(TaskId::invert(2), 0, 10.0, 15.0),
        hand_event(TaskId::edit(2), 1, 12.0, 17.0),
    ]);
    let v = validate_trace(&trace, &tasks, &pool);
    assert_eq!(
        v,
        vec![Violation::Dependency {
            task: TaskId::edit(2),
            dep: TaskId::invert(2),
            time: 12.0
        }]
    );
}

#[test]
fn validator_flags_concurrency() {
    let tasks = two_stage_tasks(&[(5, 5); 3], (1, 1));
    let pool = ResourcePool::uniform(3, 4, 2, 0);
    let trace = hand_trace(vec![
        hand_event(TaskId::invert(0), 0, 0.0, 5.0),
        hand_event(TaskId::invert(1), 1, 0.0, 5.0),
        hand_event(TaskId::invert(2), 2, 0.0, 5.0),
        hand_event(TaskId::edit(0), 0, 5.0, 10.0),
        hand_event(TaskId::edit(1), 1, 5.0, 10.0),
        hand_event(TaskId::edit(2), 0, 10.0, 15.0),
    ]);
    let v = validate_trace(&trace, &tasks, &pool);
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(matches!(
        v[0],
        Violation::Concurrency {
            running: 3,
            max_jobs: 2,
            ..
        }
    ));
}

#[test]
fn validator_flags_the_rest() {
    let tasks = two_stage_tasks(&[(5, 5); 2], (3, 3));
    let pool = ResourcePool {
        workers: vec![Worker::new(4), Worker::dedicated(4, StageSet::Invert)],
        max_jobs: 4,
        mem_threshold: 0,
    };
    let mut low = hand_event(TaskId::invert(1), 1, 6.0, 9.0);
    low.mem_at_start = 2;
    let trace = hand_trace(vec![
        hand_event(TaskId::invert(0), 0, 0.0, 5.0),
        hand_event(TaskId::invert(0), 0, 20.0, 25.0),
        hand_event(TaskId::edit(0), 0, 5.0, 10.0),
        hand_event(TaskId::edit(1), 1, 8.0, 12.0),
        low,
        hand_event(TaskId::edit(1), 7, 0.0, 1.0),
        hand_event(TaskId::invert(9), 0, 0.0, 1.0),
    ]);
    let v = validate_trace(&trace, &tasks, &pool);
    let kinds: Vec<&str> = v
        .iter()
        .map(|v| match v {
            Violation::Duplicate { .. } => "duplicate",
            Violation::Stage { .. } => "stage",
            Violation::Admission { .. } => "admission",
            Violation::Unknown { .. } => "unknown",
            Violation::WorkerOverlap { .. } => "overlap",
            Violation::Memory { .. } => "memory",
            Violation::Concurrency { .. } => "concurrency",
            Violation::Dependency { .. } => "dependency",
            Violation::Missing { .. } => "missing",
            Violation::Release { .. } => "release",
            Violation::BadInterval { .. } => "interval",
        })
        .collect();
    assert_eq!(
        kinds,
        vec![
            "duplicate",
            "stage",
            "admission",
            "unknown",
            "unknown",
            "dependency",
            "overlap",
            "memory"
        ],
        "{v:?}"
    );
    let bad = hand_trace(vec![hand_event(TaskId::invert(0), 0, 5.0, 4.0)]);
    let v = validate_trace(&bad, &tasks[..1], &pool);
    assert_eq!(
        v,
        vec![Violation::BadInterval {
            task: TaskId::invert(0)
        }]
    );
    let v = validate_trace(&hand_trace(vec![]), &tasks[..1], &pool);
    assert_eq!(
        v,
        vec![Violation::Missing {
            task: TaskId::invert(0)
        }]
    );
}

/// A random two-stage workload; memory demands fit the largest worker.
pub(super) fn random_tasks(rng: &mut ChaCha8Rng, segments: usize) -> Vec<TaskSpec> {
    let mut tasks = Vec::with_capacity(segments * 2);
    for i in 0..segments {
        let release = if rng.random_bool(0.2) {
            rng.random_range(0..40)
        } else {
            0
        };
        let mut inv = TaskSpec::new(
            TaskId::invert(i),
            vec![],
            rng.random_range(1..=50),
            Some(rng.random_range(0..25)),
        );
        inv.release = release;
        tasks.push(inv);
        tasks.push(TaskSpec::new(
            TaskId::edit(i),
            vec![TaskId::invert(i)],
            rng.random_range(1..=50),
            Some(rng.random_range(0..25)),
        ));
    }
    tasks
}

pub(super) fn random_pool(rng: &mut ChaCha8Rng) -> ResourcePool {
    let k = rng.random_range(1..=8);
    let mut workers: Vec<Worker> = (0..k)
        .map(|_| Worker::new(rng.random_range(1..=60)))
        .collect();
    workers[rng.random_range(0..k)].capacity = 50 + rng.random_range(0..20);
    ResourcePool {
        workers,
        max_jobs: rng.random_range(1..=8),
        mem_threshold: rng.random_range(0..=50),
    }
}

proptest! {
    #[test]
    fn random_schedules_are_valid(seed in any::<u64>(), segments in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks = random_tasks(&mut rng, segments);
        let pool = random_pool(&mut rng);
        let trace = run_schedule(&tasks, &pool, &NoopExecutor, Mode::Simulated).unwrap();
        prop_assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
        prop_assert_eq!(trace.events.len(), tasks.len());
        prop_assert!(trace.makespan <= serial_makespan(&tasks) as f64 + 40.0);
    }

    #[test]
    fn failures_keep_traces_valid(seed in any::<u64>(), segments in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks = random_tasks(&mut rng, segments);
        let pool = random_pool(&mut rng);
        let failing: HashSet<TaskId> = tasks.iter().map(|t| t.id).filter(|_| rng.random_bool(0.2)).collect();
        match run_schedule(&tasks, &pool, &FailOn(failing.clone()), Mode::Simulated) {
            Ok(trace) => {
                prop_assert!(trace.events.iter().all(|e| !failing.contains(&e.task)));
                prop_assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
            }
            Err(ScheduleError::PartialTrace { trace, failed }) => {
                prop_assert!(failed.iter().all(|t| failing.contains(t)));
                prop_assert_eq!(validate_trace(&trace, &tasks, &pool), vec![]);
                for c in &trace.cancelled {
                    prop_assert!(failed.contains(&TaskId::invert(c.segment)));
                }
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn predicted_identity(n1 in 1u64..1000, n2 in 1u64..1000, t1 in 1u64..10_000, t2 in 1u64..10_000, b in 1u64..500) {
        let p = CostModelParams { n1, n2, t1, t2, batches: b, ..Default::default() };
        let t = predict_times(&p).unwrap();
        prop_assert_eq!(t.t_async_paper * b as u128, num_rational::Ratio::from_integer(t.t_serial_paper));
    }
}
