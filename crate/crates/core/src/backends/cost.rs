//! Analytical cost model for the two stages.

use serde::{Deserialize, Serialize};

use super::BackendError;

/// Cost symbols. Counts and tick durations are integers; `unit_cost` is the
/// time charged per `n^2 * d` operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    /// Diffusion timesteps.
    #[serde(rename = "T")]
    pub timesteps: u64,
    /// Tokens per frame.
    pub n: u64,
    /// Token dimension.
    pub d: u64,
    /// Keyframes per segment.
    #[serde(rename = "K")]
    pub keyframes: u64,
    /// Batch (segment) count.
    #[serde(rename = "B")]
    pub batches: u64,
    /// Frames per segment.
    #[serde(rename = "F")]
    pub frames: u64,
    #[serde(rename = "N1")]
    pub n1: u64,
    #[serde(rename = "N2")]
    pub n2: u64,
    #[serde(rename = "T1")]
    pub t1: u64,
    #[serde(rename = "T2")]
    pub t2: u64,
    pub unit_cost: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self {
            timesteps: 50,
            n: 4096,
            d: 320,
            keyframes: 1,
            batches: 1,
            frames: 32,
            n1: 1,
            n2: 1,
            t1: 1,
            t2: 1,
            unit_cost: 1e-9,
        }
    }
}

impl CostModelParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        let counts = [
            ("T", self.timesteps),
            ("n", self.n),
            ("d", self.d),
            ("K", self.keyframes),
            ("B", self.batches),
            ("F", self.frames),
            ("N1", self.n1),
            ("N2", self.n2),
            ("T1", self.t1),
            ("T2", self.t2),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(BackendError::BadConfig(format!("{name} must be > 0")));
        }
        if !(self.unit_cost.is_finite() && self.unit_cost > 0.0) {
            return Err(BackendError::BadConfig(format!(
                "unit_cost must be finite and > 0, got {}",
                self.unit_cost
            )));
        }
        Ok(())
    }

    fn attn(&self) -> f64 {
        (self.n as f64).powi(2) * self.d as f64
    }

    /// `unit_cost * T * n^2 * d * frames`.
    pub fn invert_time(&self, frames: usize) -> f64 {
        self.unit_cost * self.timesteps as f64 * self.attn() * frames as f64
    }

    /// Cross-attention share of the edit stage: `unit_cost * K * n^2 * d`.
    pub fn cross_attention_time(&self, keyframes: usize) -> f64 {
        self.unit_cost * keyframes as f64 * self.attn()
    }

    /// Edit stage for `frames` frames guided by `keyframes` keyframe-like
    /// frames: per-frame self-attention, cross-attention over the keyframes,
    /// and per-frame propagation.
    pub fn edit_time(&self, frames: usize, keyframes: usize) -> f64 {
        let n2 = (self.n as f64).powi(2);
        self.unit_cost * frames as f64 * self.attn()
            + self.cross_attention_time(keyframes)
            + self.unit_cost * frames as f64 * n2
    }
}

/// Whole ticks for a modeled time, at least one.
pub fn to_ticks(time: f64) -> u64 {
    (time.ceil() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_is_linear_in_frames_and_steps() {
        let p = CostModelParams::default();
        assert_eq!(p.invert_time(10), 2.0 * p.invert_time(5));
        let half = CostModelParams { timesteps: 25, ..p };
        assert_eq!(p.invert_time(7), 2.0 * half.invert_time(7));
    }

    #[test]
    fn cross_attention_doubles_with_k() {
        let p = CostModelParams::default();
        assert_eq!(p.cross_attention_time(10), 2.0 * p.cross_attention_time(5));
        let ratio = p.edit_time(10, 5) / p.edit_time(10, 1);
        assert!(ratio <= 2.0, "{ratio}");
    }

    #[test]
    fn zero_params_rejected() {
        let p = CostModelParams {
            n: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = CostModelParams {
            unit_cost: f64::NAN,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
