//! Queueing statistics over a trace and closed-form time predictions.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{QueueSample, ScheduleError, ScheduleTrace};
use crate::backends::CostModelParams;

/// Little's Law quantities measured from one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    /// Arrivals per time unit over the arrival span.
    pub lambda: f64,
    /// Mean time in system (end - arrival).
    #[serde(rename = "W")]
    pub w: f64,
    /// Time-averaged number of tasks in system over `window`.
    #[serde(rename = "L")]
    pub l: f64,
    /// `|L - lambda*W| / L`, zero when `L` is zero.
    pub residual: f64,
    pub tasks: usize,
    /// `[first arrival, last completion]`.
    pub window: [f64; 2],
}

/// Measures `lambda`, `W` and `L` from the trace events.
///
/// `lambda` is the task count over the span of arrivals (the whole window
/// when every task arrives at once). `L` integrates the in-system count
/// exactly: each task contributes `end - arrival`.
pub fn queue_stats(trace: &ScheduleTrace) -> Result<QueueStats, ScheduleError> {
    let ev = &trace.events;
    if ev.is_empty() {
        return Err(ScheduleError::EmptyTrace);
    }
    let n = ev.len() as f64;
    let first = ev.iter().map(|e| e.arrival).fold(f64::INFINITY, f64::min);
    let last_arrival = ev
        .iter()
        .map(|e| e.arrival)
        .fold(f64::NEG_INFINITY, f64::max);
    let last_end = ev.iter().map(|e| e.end).fold(f64::NEG_INFINITY, f64::max);
    let window = last_end - first;
    let sojourn: f64 = ev.iter().map(|e| e.end - e.arrival).sum();
    let w = sojourn / n;
    let l = if window > 0.0 { sojourn / window } else { 0.0 };
    let arrival_span = last_arrival - first;
    let span = if arrival_span > 0.0 {
        arrival_span
    } else {
        window
    };
    let lambda = if span > 0.0 { n / span } else { 0.0 };
    Ok(QueueStats {
        lambda,
        w,
        l,
        residual: littles_residual(l, lambda, w),
        tasks: ev.len(),
        window: [first, last_end],
    })
}

pub(crate) fn littles_residual(l: f64, lambda: f64, w: f64) -> f64 {
    if l > 0.0 {
        (l - lambda * w).abs() / l
    } else {
        0.0
    }
}

/// Step integral of `queue_length + in_flight` over `[from, to]`. Samples
/// sharing a timestamp are resolved by the last one.
pub fn integrate_samples(samples: &[QueueSample], from: f64, to: f64) -> f64 {
    let mut area = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let next = samples.get(i + 1).map_or(to, |n| n.time);
        let lo = s.time.max(from);
        let hi = next.min(to);
        if hi > lo {
            area += (s.queue_length + s.in_flight) as f64 * (hi - lo);
        }
    }
    area
}

/// Multiplicative closed-form times next to the additive two-stage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedTimes {
    /// `N1 * N2 * T1 * T2`.
    pub t_serial_paper: u128,
    /// `t_serial_paper / B`, exact, as `[numerator, denominator]`.
    #[serde(with = "ratio_pair")]
    pub t_async_paper: Ratio<u128>,
    /// `N1 * T1 + N2 * T2`.
    pub t_serial_sum: u128,
    /// `T1 + max(N1, N2) * max(T1, T2)`.
    pub pipeline_bound: u128,
}

impl PredictedTimes {
    pub fn t_async_paper_f64(&self) -> f64 {
        *self.t_async_paper.numer() as f64 / *self.t_async_paper.denom() as f64
    }
}

pub fn predict_times(cost: &CostModelParams) -> Result<PredictedTimes, ScheduleError> {
    cost.validate()
        .map_err(|e| ScheduleError::BadConfig(e.to_string()))?;
    let (n1, n2) = (cost.n1 as u128, cost.n2 as u128);
    let (t1, t2) = (cost.t1 as u128, cost.t2 as u128);
    let overflow = || ScheduleError::BadConfig("predicted time overflows u128".into());
    let t_serial_paper = (n1 * n2).checked_mul(t1 * t2).ok_or_else(overflow)?;
    Ok(PredictedTimes {
        t_serial_paper,
        t_async_paper: Ratio::new(t_serial_paper, cost.batches as u128),
        t_serial_sum: (n1 * t1).checked_add(n2 * t2).ok_or_else(overflow)?,
        pipeline_bound: t1 + n1.max(n2) * t1.max(t2),
    })
}

mod ratio_pair {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u128>, s: S) -> Result<S::Ok, S::Error> {
        [*r.numer(), *r.denom()].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u128>, D::Error> {
        let [num, den] = <[u128; 2]>::deserialize(d)?;
        if den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Ratio::new(num, den))
    }
}
