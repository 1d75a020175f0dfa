//! Dense optical flow by coarse-to-fine iterative least squares.
//!
//! Each pyramid level solves the 2x2 gradient normal equations over a square
//! window around every pixel, warping the second image by the current
//! estimate between iterations. Coarser levels seed finer ones with the
//! upsampled, doubled field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::warp::sample_bilinear;
use super::{check_same_dims, GrayFrame, MotionError};

pub const MIN_FLOW_DIMENSION: u32 = 16;
/// Levels whose shorter side would drop below this are not built.
const MIN_LEVEL_DIMENSION: usize = 8;
const MAX_STEP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: u32,
    height: u32,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: u32, height: u32, u: Vec<f64>, v: Vec<f64>) -> Result<Self, MotionError> {
        let n = width as usize * height as usize;
        if u.len() != n || v.len() != n {
            return Err(MotionError::Malformed(format!(
                "flow planes {}/{} for {width}x{height}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(MotionError::Malformed("non-finite displacement".into()));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
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

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width as usize + x;
        (self.u[i], self.v[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub pyramid_levels: u32,
    /// Side of the square least-squares neighborhood (odd).
    pub window: u32,
    /// Refinement iterations per pyramid level.
    pub iterations: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            window: 5,
            iterations: 6,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), MotionError> {
        if self.pyramid_levels == 0 {
            return Err(MotionError::BadConfig("pyramid_levels must be >= 1".into()));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(MotionError::BadConfig(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.iterations == 0 {
            return Err(MotionError::BadConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    /// 5-tap binomial blur then 2x decimation.
    fn reduce(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let mut tmp = vec![0.0; self.w * self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                tmp[y * self.w + x] = (0..5)
                    .map(|k| K[k] * self.at_clamped(x as isize + k as isize - 2, y as isize))
                    .sum();
            }
        }
        let horiz = Plane {
            w: self.w,
            h: self.h,
            data: tmp,
        };
        let (nw, nh) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut data = Vec::with_capacity(nw * nh);
        for y in 0..nh {
            for x in 0..nw {
                data.push(
                    (0..5)
                        .map(|k| {
                            K[k] * horiz.at_clamped(2 * x as isize, 2 * y as isize + k as isize - 2)
                        })
                        .sum(),
                );
            }
        }
        Plane { w: nw, h: nh, data }
    }

    /// Five-point central derivative along x and y.
    fn gradients(&self) -> (Vec<f64>, Vec<f64>) {
        let mut gx = vec![0.0; self.w * self.h];
        let mut gy = vec![0.0; self.w * self.h];
        for y in 0..self.h as isize {
            for x in 0..self.w as isize {
                let i = y as usize * self.w + x as usize;
                gx[i] = (self.at_clamped(x - 2, y) - 8.0 * self.at_clamped(x - 1, y)
                    + 8.0 * self.at_clamped(x + 1, y)
                    - self.at_clamped(x + 2, y))
                    / 12.0;
                gy[i] = (self.at_clamped(x, y - 2) - 8.0 * self.at_clamped(x, y - 1)
                    + 8.0 * self.at_clamped(x, y + 1)
                    - self.at_clamped(x, y + 2))
                    / 12.0;
            }
        }
        (gx, gy)
    }
}

/// Sums of `values` over a `(2r+1)^2` window clipped to the image.
fn box_sum(values: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let stride = w + 1;
    let mut integral = vec![0.0; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += values[y * w + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            out[y * w + x] = integral[y1 * stride + x1]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
        }
    }
    out
}

fn build_pyramid(base: &GrayFrame, levels: u32) -> Vec<Plane> {
    let mut pyr = vec![Plane {
        w: base.width() as usize,
        h: base.height() as usize,
        data: base.data().to_vec(),
    }];
    while pyr.len() < levels as usize {
        let last = pyr.last().expect("non-empty");
        if last.w.div_ceil(2).min(last.h.div_ceil(2)) < MIN_LEVEL_DIMENSION {
            break;
        }
        pyr.push(last.reduce());
    }
    pyr
}

fn refine_level(a: &Plane, b: &Plane, u: &mut Vec<f64>, v: &mut Vec<f64>, cfg: &FlowConfig) {
    let (w, h) = (a.w, a.h);
    let r = (cfg.window / 2) as usize;
    let (ax, ay) = a.gradients();
    let (bx, by) = b.gradients();
    // minimum eigenvalue below this means the window carries no usable texture
    let min_eig = 1e-3 * cfg.window as f64 * cfg.window as f64;

    let n = w * h;
    let (mut gxx, mut gxy, mut gyy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut gxt, mut gyt) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..cfg.iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (sx, sy) = (x as f64 + u[i], y as f64 + v[i]);
                let it = sample_bilinear(&b.data, w, h, sx, sy) - a.data[i];
                // average of both images' gradients keeps large steps stable
                let gx = 0.5 * (ax[i] + sample_bilinear(&bx, w, h, sx, sy));
                let gy = 0.5 * (ay[i] + sample_bilinear(&by, w, h, sx, sy));
                gxx[i] = gx * gx;
                gxy[i] = gx * gy;
                gyy[i] = gy * gy;
                gxt[i] = gx * it;
                gyt[i] = gy * it;
            }
        }
        let sxx = box_sum(&gxx, w, h, r);
        let sxy = box_sum(&gxy, w, h, r);
        let syy = box_sum(&gyy, w, h, r);
        let sxt = box_sum(&gxt, w, h, r);
        let syt = box_sum(&gyt, w, h, r);
        for i in 0..n {
            let (a11, a12, a22) = (sxx[i], sxy[i], syy[i]);
            let half_tr = 0.5 * (a11 + a22);
            let disc = (0.25 * (a11 - a22) * (a11 - a22) + a12 * a12).sqrt();
            if half_tr - disc < min_eig {
                continue;
            }
            let det = a11 * a22 - a12 * a12;
            let du = (-a22 * sxt[i] + a12 * syt[i]) / det;
            let dv = (a12 * sxt[i] - a11 * syt[i]) / det;
            if du.is_finite() && dv.is_finite() {
                u[i] += du.clamp(-MAX_STEP, MAX_STEP);
                v[i] += dv.clamp(-MAX_STEP, MAX_STEP);
            }
        }
        *u = median3(u, w, h);
        *v = median3(v, w, h);
    }
}

/// 3x3 median with replicate edges.
fn median3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    let mut win = [0.0f64; 9];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                    win[k] = src[sy * w + sx];
                    k += 1;
                }
            }
            win.sort_by(f64::total_cmp);
            out[y as usize * w + x as usize] = win[4];
        }
    }
    out
}

fn upsample(coarse: &[f64], cw: usize, ch: usize, fw: usize, fh: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(fw * fh);
    for y in 0..fh {
        for x in 0..fw {
            out.push(2.0 * sample_bilinear(coarse, cw, ch, x as f64 / 2.0, y as f64 / 2.0));
        }
    }
    out
}

/// Dense displacement from `a` toward `b`: `a(x, y) ~ b(x + u, y + v)`.
pub fn estimate_flow(
    a: &GrayFrame,
    b: &GrayFrame,
    cfg: &FlowConfig,
) -> Result<FlowField, MotionError> {
    check_same_dims(a, b)?;
    cfg.validate()?;
    if a.width().min(a.height()) < MIN_FLOW_DIMENSION {
        return Err(MotionError::TooSmall(a.width(), a.height()));
    }
    let pa = build_pyramid(a, cfg.pyramid_levels);
    let pb = build_pyramid(b, cfg.pyramid_levels);

    let top = pa.last().expect("pyramid has a base level");
    let mut u = vec![0.0; top.w * top.h];
    let mut v = vec![0.0; top.w * top.h];
    let mut dims = (top.w, top.h);
    for level in (0..pa.len()).rev() {
        let (la, lb) = (&pa[level], &pb[level]);
        if dims != (la.w, la.h) {
            u = upsample(&u, dims.0, dims.1, la.w, la.h);
            v = upsample(&v, dims.0, dims.1, la.w, la.h);
            dims = (la.w, la.h);
        }
        refine_level(la, lb, &mut u, &mut v, cfg);
    }
    FlowField::new(a.width(), a.height(), u, v)
}

/// Little-endian dump: `u32 width, u32 height, f32 u-plane, f32 v-plane`.
pub fn write_flow<W: Write>(flow: &FlowField, mut out: W) -> std::io::Result<()> {
    out.write_all(&flow.width.to_le_bytes())?;
    out.write_all(&flow.height.to_le_bytes())?;
    for x in flow.u.iter().chain(&flow.v) {
        out.write_all(&(*x as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_flow<R: Read>(mut input: R) -> Result<FlowField, MotionError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| MotionError::Malformed(e.to_string()))?;
    if bytes.len() < 8 {
        return Err(MotionError::Malformed("truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (w, h) = (word(0), word(4));
    let n = w as usize * h as usize;
    if bytes.len() != 8 + 8 * n {
        return Err(MotionError::Malformed(format!(
            "{} bytes for a {w}x{h} field",
            bytes.len()
        )));
    }
    let plane = |start: usize| -> Vec<f64> {
        bytes[start..start + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect()
    };
    FlowField::new(w, h, plane(8), plane(8 + 4 * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::mean_flow_magnitude;
    use crate::synthetic::Texture;

    #[test]
    fn zero_motion() {
        let t = Texture::new(64, 64, 8, 3);
        let a = t.crop_gray(0, 0);
        let f = estimate_flow(&a, &a, &FlowConfig::default()).unwrap();
        assert_eq!(mean_flow_magnitude(&f), 0.0);
    }

    #[test]
    fn flat_images_have_no_motion() {
        let a = GrayFrame::from_fn(40, 40, |_, _| 90.0);
        let b = GrayFrame::from_fn(40, 40, |_, _| 130.0);
        let f = estimate_flow(&a, &b, &FlowConfig::default()).unwrap();
        assert!(f.u().iter().chain(f.v()).all(|d| d.abs() <= 0.1));
    }

    #[test]
    fn recovers_translation_interior() {
        let t = Texture::new(128, 128, 12, 11);
        let a = t.crop_gray(0, 0);
        let b = t.crop_gray(3, 4);
        let f = estimate_flow(&a, &b, &FlowConfig::default()).unwrap();
        let (mut close, mut total, mut mag) = (0, 0, 0.0);
        for y in 8..120 {
            for x in 8..120 {
                let (u, v) = f.at(x, y);
                if (u - 3.0).abs() <= 0.5 && (v - 4.0).abs() <= 0.5 {
                    close += 1;
                }
                total += 1;
                mag += u.hypot(v);
            }
        }
        assert!(close as f64 >= 0.95 * total as f64, "{close}/{total}");
        assert!((mag / total as f64 - 5.0).abs() <= 0.25);
    }

    #[test]
    fn errors() {
        let a = GrayFrame::from_fn(15, 40, |_, _| 0.0);
        assert_eq!(
            estimate_flow(&a, &a, &FlowConfig::default()),
            Err(MotionError::TooSmall(15, 40))
        );
        let b = GrayFrame::from_fn(16, 40, |_, _| 0.0);
        assert!(matches!(
            estimate_flow(&a, &b, &FlowConfig::default()),
            Err(MotionError::DimensionMismatch(..))
        ));
        let bad = FlowConfig {
            window: 4,
            ..FlowConfig::default()
        };
        assert!(matches!(
            estimate_flow(&b, &b, &bad),
            Err(MotionError::BadConfig(_))
        ));
    }

    #[test]
    fn binary_dump_layout() {
        let f = FlowField::new(2, 1, vec![1.5, -2.0], vec![0.25, 8.0]).unwrap();
        let mut buf = Vec::new();
        write_flow(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16);
        assert_eq!(&buf[0..4], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1.5f32.to_le_bytes());
        assert_eq!(&buf[16..20], &0.25f32.to_le_bytes());
        assert_eq!(read_flow(buf.as_slice()).unwrap(), f);
        assert!(read_flow(&buf[..10]).is_err());
    }
}
