use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::dispatch::Dispatcher;
use super::{Outcome, QueueObserver, ScheduleError, ScheduleTrace, TaskExecutor, TimeUnit};

/// Discrete-event loop over integer ticks. At each instant: finish every task
/// ending now, queue newly released tasks, then admit as many as fit.
pub(super) fn run(
    mut d: Dispatcher<'_>,
    executor: &dyn TaskExecutor,
    observer: Option<&QueueObserver>,
) -> Result<ScheduleTrace, ScheduleError> {
    // (end tick, start sequence) orders completions deterministically
    let mut in_flight: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();
    let mut outcomes: Vec<Option<Outcome>> = vec![None; d.tasks.len()];
    let mut seq = 0usize;
    let mut now = 0u64;
    loop {
        d.release_due(now, now as f64);
        for start in d.dispatch(now as f64) {
            let task = &d.tasks[start.task];
            let (duration, outcome) = match executor.simulated_duration(task) {
                Ok(ticks) => {
                    let outcome = match executor.execute(task) {
                        Ok(()) => Outcome::Completed,
                        Err(e) => Outcome::Failed { reason: e.0 },
                    };
                    (ticks, outcome)
                }
                Err(e) => (0, Outcome::Failed { reason: e.0 }),
            };
            outcomes[start.task] = Some(outcome);
            in_flight.push(Reverse((now + duration, seq, start.task)));
            seq += 1;
        }
        let sample = d.sample(now as f64);
        if let Some(obs) = observer {
            obs.push(sample);
        }

        let next_end = in_flight.peek().map(|Reverse((end, _, _))| *end);
        let next = match (next_end, d.next_release()) {
            (Some(e), Some(r)) => e.min(r),
            (Some(e), None) => e,
            (None, Some(r)) => r,
            (None, None) => break,
        };
        now = next;
        while let Some(&Reverse((end, _, task))) = in_flight.peek() {
            if end != now {
                break;
            }
            in_flight.pop();
            let outcome = outcomes[task].take().expect("outcome recorded at start");
            d.complete(task, now as f64, outcome);
        }
    }
    if d.has_work() {
        return Err(ScheduleError::Stalled(d.queued()));
    }
    let makespan = d.events.iter().map(|e| e.end).fold(0.0, f64::max);
    let cancelled = d.cancelled();
    let mut events = std::mem::take(&mut d.events);
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.worker.cmp(&b.worker)));
    Ok(ScheduleTrace {
        events,
        makespan,
        queue_samples: std::mem::take(&mut d.samples),
        cancelled,
        time_unit: TimeUnit::Ticks,
    })
}
