//! Per-transition motion metrics: luma conversion, global SSIM, dense optical
//! flow and mean flow magnitude.

mod blockmatch;
mod flow;
mod warp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::Frame;

pub use blockmatch::flow_oracle_blockmatch;
pub use flow::{estimate_flow, read_flow, write_flow, FlowConfig, FlowField};
pub use warp::{sample_bilinear, warp_frame, warp_gray};

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("unsupported channel count {0}")]
    ChannelError(u8),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("image {0}x{1} too small for flow estimation (need at least 16x16)")]
    TooSmall(u32, u32),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("malformed flow data: {0}")]
    Malformed(String),
}

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
/// Dynamic range of 8-bit samples.
pub const SSIM_L: f64 = 255.0;
pub const SSIM_C1: f64 = (0.01 * SSIM_L) * (0.01 * SSIM_L);
pub const SSIM_C2: f64 = (0.03 * SSIM_L) * (0.03 * SSIM_L);

/// Luminance raster kept at full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, MotionError> {
        if data.len() != width as usize * height as usize || width == 0 || height == 0 {
            return Err(MotionError::BadConfig(format!(
                "{} samples for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height as usize {
            for x in 0..width as usize {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width as usize + x]
    }

    /// 8-bit storage form, rounded half-up and clamped.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn to_frame(&self, index: usize) -> Frame {
        Frame::new(self.width, self.height, 1, self.to_u8(), index)
            .expect("gray frame dimensions already validated")
    }
}

/// Rounds half-up to the nearest 8-bit value.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn to_gray(frame: &Frame) -> Result<GrayFrame, MotionError> {
    let data = match frame.channels() {
        1 => frame.data().iter().map(|&v| v as f64).collect(),
        3 => frame
            .data()
            .chunks_exact(3)
            .map(|p| {
                LUMA_WEIGHTS[0] * p[0] as f64
                    + LUMA_WEIGHTS[1] * p[1] as f64
                    + LUMA_WEIGHTS[2] * p[2] as f64
            })
            .collect(),
        c => return Err(MotionError::ChannelError(c)),
    };
    Ok(GrayFrame {
        width: frame.width(),
        height: frame.height(),
        data,
    })
}

fn check_same_dims(a: &GrayFrame, b: &GrayFrame) -> Result<(), MotionError> {
    if a.dims() != b.dims() {
        return Err(MotionError::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// Structural similarity over whole-image statistics (one mean, variance and
/// covariance per image, population normalization).
pub fn ssim_global(a: &GrayFrame, b: &GrayFrame) -> Result<f64, MotionError> {
    check_same_dims(a, b)?;
    let n = a.data.len();
    if n < 2 {
        return Err(MotionError::BadConfig(
            "SSIM needs at least 2 pixels".into(),
        ));
    }
    let inv_n = 1.0 / n as f64;
    let mu_a = a.data.iter().sum::<f64>() * inv_n;
    let mu_b = b.data.iter().sum::<f64>() * inv_n;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let dx = x - mu_a;
        let dy = y - mu_b;
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    var_a *= inv_n;
    var_b *= inv_n;
    cov *= inv_n;
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    Ok(num / den)
}

/// Average per-pixel displacement length.
pub fn mean_flow_magnitude(flow: &FlowField) -> f64 {
    let n = flow.u().len();
    flow.u()
        .iter()
        .zip(flow.v())
        .map(|(u, v)| u.hypot(*v))
        .sum::<f64>()
        / n as f64
}

/// Metrics of the transition `frame_pair.0 -> frame_pair.1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub ssim: f64,
    pub mean_flow_magnitude: f64,
    pub frame_pair: (usize, usize),
}

pub fn transition_metrics(
    prev: &GrayFrame,
    next: &GrayFrame,
    frame_pair: (usize, usize),
    cfg: &FlowConfig,
) -> Result<MotionMetrics, MotionError> {
    let ssim = ssim_global(prev, next)?;
    let flow = estimate_flow(prev, next, cfg)?;
    Ok(MotionMetrics {
        ssim,
        mean_flow_magnitude: mean_flow_magnitude(&flow),
        frame_pair,
    })
}
