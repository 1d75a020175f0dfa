//! Deterministic synthetic footage: smooth random textures, translating
//! clips, static clips and alternating black/white clips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frameio::Frame;
use crate::motion::GrayFrame;

const BLUR_SIGMA: f64 = 1.6;

/// A blurred-noise texture larger than the visible window by `margin` on
/// every side, so that shifted crops never read outside real content.
#[derive(Debug, Clone)]
pub struct Texture {
    width: u32,
    height: u32,
    margin: u32,
    full_w: usize,
    data: Vec<u8>,
}

impl Texture {
    pub fn new(width: u32, height: u32, margin: u32, seed: u64) -> Self {
        let full_w = (width + 2 * margin) as usize;
        let full_h = (height + 2 * margin) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..full_w * full_h)
            .map(|_| rng.random_range(0.0..255.0))
            .collect();
        let blurred = gaussian_blur(&noise, full_w, full_h, BLUR_SIGMA);
        let (lo, hi) = blurred
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = (hi - lo).max(1e-9);
        let data = blurred
            .iter()
            .map(|&v| (16.0 + (v - lo) / span * 223.0).round() as u8)
            .collect();
        Self {
            width,
            height,
            margin,
            full_w,
            data,
        }
    }

    fn sample(&self, x: usize, y: usize, shift: (i32, i32)) -> u8 {
        let sx = x as i64 - shift.0 as i64 + self.margin as i64;
        let sy = y as i64 - shift.1 as i64 + self.margin as i64;
        assert!(
            sx >= 0
                && sy >= 0
                && (sx as usize) < self.full_w
                && (sy as usize) < self.data.len() / self.full_w,
            "shift {shift:?} exceeds texture margin {}",
            self.margin
        );
        self.data[sy as usize * self.full_w + sx as usize]
    }

    /// The visible window with content moved by `(dx, dy)`:
    /// `out(x, y) = texture(x - dx, y - dy)`.
    pub fn crop_gray(&self, dx: i32, dy: i32) -> GrayFrame {
        GrayFrame::from_fn(self.width, self.height, |x, y| {
            self.sample(x, y, (dx, dy)) as f64
        })
    }

    /// RGB version of [`Texture::crop_gray`] with brightness `gain`.
    pub fn crop_rgb(&self, dx: i32, dy: i32, gain: f64, index: usize) -> Frame {
        let mut data = Vec::with_capacity(self.width as usize * self.height as usize * 3);
        for y in 0..self.height as usize {
            for x in 0..self.width as usize {
                let t = self.sample(x, y, (dx, dy)) as f64;
                for c in [t, 0.8 * t + 25.0, 255.0 - 0.9 * t] {
                    data.push((c * gain).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Frame::new(self.width, self.height, 3, data, index).expect("valid texture frame")
    }
}

fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let pass = |input: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for (j, k) in (-r..=r).enumerate() {
                    let (sx, sy) = if horizontal {
                        ((x + k).clamp(0, w as isize - 1), y)
                    } else {
                        (x, (y + k).clamp(0, h as isize - 1))
                    };
                    acc += kernel[j] * input[sy as usize * w + sx as usize];
                }
                out[y as usize * w + x as usize] = acc / norm;
            }
        }
        out
    };
    pass(&pass(src, true), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClipKind {
    /// One textured frame repeated.
    Static,
    /// Texture translating one pixel per frame to the right.
    Translate,
    /// Black and white frames alternating.
    Alternating,
    /// A static first third followed by a translating, brightening texture.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub kind: ClipKind,
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            kind: ClipKind::Mixed,
            frames: 60,
            width: 64,
            height: 64,
            seed: 7,
        }
    }
}

pub fn generate_clip(spec: &ClipSpec) -> Vec<Frame> {
    let n = spec.frames;
    let (w, h) = (spec.width, spec.height);
    match spec.kind {
        ClipKind::Alternating => (0..n)
            .map(|i| {
                let v = if i % 2 == 0 { 0 } else { 255 };
                Frame::filled(w, h, &[v, v, v], i).expect("valid dimensions")
            })
            .collect(),
        ClipKind::Static => {
            let tex = Texture::new(w, h, 0, spec.seed);
            (0..n).map(|i| tex.crop_rgb(0, 0, 1.0, i)).collect()
        }
        ClipKind::Translate => {
            let tex = Texture::new(w, h, n as u32 + 1, spec.seed);
            (0..n).map(|i| tex.crop_rgb(i as i32, 0, 1.0, i)).collect()
        }
        ClipKind::Mixed => {
            let still = n / 3;
            let tex = Texture::new(w, h, n as u32 + 1, spec.seed);
            (0..n)
                .map(|i| {
                    if i < still {
                        tex.crop_rgb(0, 0, 0.7, i)
                    } else {
                        let t = (i - still) as f64 / (n - still).max(1) as f64;
                        tex.crop_rgb((i - still) as i32, 0, 0.7 + 0.5 * t, i)
                    }
                })
                .collect()
        }
    }
}
