use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::dispatch::Dispatcher;
use super::{Outcome, QueueObserver, ScheduleError, ScheduleTrace, TaskExecutor, TimeUnit};

struct Done {
    task: usize,
    outcome: Outcome,
}

/// Threaded engine: one thread per worker receives task indices, runs them
/// and reports back; only this decision loop touches the dispatcher.
pub(super) fn run(
    mut d: Dispatcher<'_>,
    executor: &dyn TaskExecutor,
    seconds_per_tick: f64,
    observer: Option<&QueueObserver>,
) -> Result<ScheduleTrace, ScheduleError> {
    let tasks = d.tasks;
    let origin = Instant::now();
    let elapsed = move || origin.elapsed().as_secs_f64();
    let tick_at = |t: f64| {
        if seconds_per_tick > 0.0 {
            (t / seconds_per_tick).floor() as u64
        } else {
            u64::MAX
        }
    };

    thread::scope(|scope| {
        let (done_tx, done_rx) = mpsc::channel::<Done>();
        let mut job_txs = Vec::with_capacity(d.pool.workers.len());
        for _ in 0..d.pool.workers.len() {
            let (tx, rx) = mpsc::channel::<usize>();
            let done_tx = done_tx.clone();
            job_txs.push(tx);
            scope.spawn(move || {
                for task in rx {
                    let outcome = match executor.execute(&tasks[task]) {
                        Ok(()) => Outcome::Completed,
                        Err(e) => Outcome::Failed { reason: e.0 },
                    };
                    if done_tx.send(Done { task, outcome }).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        loop {
            let now = elapsed();
            d.release_due(tick_at(now), now);
            let started = d.dispatch(now);
            for s in &started {
                job_txs[s.worker]
                    .send(s.task)
                    .expect("worker thread alive while scheduler runs");
            }
            let sample = d.sample(now);
            if let Some(obs) = observer {
                obs.push(sample);
            }
            if !d.has_work() {
                break;
            }
            if d.running() == 0 {
                match d.next_release() {
                    Some(r) => {
                        let wait = r as f64 * seconds_per_tick - elapsed();
                        if wait > 0.0 {
                            thread::sleep(Duration::from_secs_f64(wait));
                        }
                        continue;
                    }
                    None => return Err(ScheduleError::Stalled(d.queued())),
                }
            }
            let timeout = d.next_release().map(|r| {
                Duration::from_secs_f64((r as f64 * seconds_per_tick - elapsed()).max(0.0))
            });
            let msg = match timeout {
                Some(t) => match done_rx.recv_timeout(t) {
                    Ok(m) => Some(m),
                    Err(mpsc::RecvTimeoutError::Timeout) => None,
                    Err(mpsc::RecvTimeoutError::Disconnected) => {
                        return Err(ScheduleError::Stalled(d.queued()))
                    }
                },
                None => Some(
                    done_rx
                        .recv()
                        .map_err(|_| ScheduleError::Stalled(d.queued()))?,
                ),
            };
            if let Some(m) = msg {
                let t = elapsed();
                d.complete(m.task, t, m.outcome);
                // drain whatever else already finished
                while let Ok(m) = done_rx.try_recv() {
                    d.complete(m.task, elapsed(), m.outcome);
                }
            }
        }
        drop(job_txs);
        Ok(())
    })?;

    let makespan = d.events.iter().map(|e| e.end).fold(0.0, f64::max);
    let cancelled = d.cancelled();
    let mut events = std::mem::take(&mut d.events);
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.worker.cmp(&b.worker)));
    Ok(ScheduleTrace {
        events,
        makespan,
        queue_samples: std::mem::take(&mut d.samples),
        cancelled,
        time_unit: TimeUnit::Seconds,
    })
}
