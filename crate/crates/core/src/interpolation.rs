//! Frame synthesis by bidirectional flow warping, recursive gap filling,
//! and border smoothing between segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::Frame;
use crate::motion::{
    estimate_flow, quantize, ssim_global, to_gray, warp_frame, warp_gray, FlowConfig, FlowField,
    GrayFrame, MotionError,
};

/// Per-pixel disagreement (8-bit units) between the two warps above which
/// the pixel falls back to a plain cross-fade.
pub const DISAGREEMENT_THRESHOLD: f64 = 24.0;

#[derive(Debug, Error)]
pub enum InterpolationError {
    #[error("frames differ in shape: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32, u8), (u32, u32, u8)),
    #[error("segment {0} is empty")]
    EmptySegment(usize),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationRequest {
    pub frame_a: Frame,
    pub frame_b: Frame,
    /// Frames to synthesize strictly between `frame_a` and `frame_b`.
    pub count: usize,
}

fn check_shapes(a: &Frame, b: &Frame) -> Result<(), InterpolationError> {
    if a.shape() != b.shape() {
        return Err(InterpolationError::DimensionMismatch(a.shape(), b.shape()));
    }
    Ok(())
}

/// Flow from `a` toward `b`, or zero when the frames are too small to
/// estimate.
fn flow_or_zero(a: &GrayFrame, b: &GrayFrame, cfg: &FlowConfig) -> Result<FlowField, MotionError> {
    match estimate_flow(a, b, cfg) {
        Err(MotionError::TooSmall(w, h)) => Ok(FlowField::zeros(w, h)),
        other => other,
    }
}

/// The `t = 0.5` frame between `a` and `b`. The result keeps `a`'s index.
pub fn interpolate_midpoint(
    a: &Frame,
    b: &Frame,
    cfg: &FlowConfig,
) -> Result<Frame, InterpolationError> {
    check_shapes(a, b)?;
    let (ga, gb) = (to_gray(a)?, to_gray(b)?);
    let fab = flow_or_zero(&ga, &gb, cfg)?;
    let fba = flow_or_zero(&gb, &ga, cfg)?;
    // a(x) ~ b(x + F_ab): content of a at x - F_ab/2 sits at x halfway through
    let wa = warp_frame(a, &fab, -0.5);
    let wb = warp_frame(b, &fba, -0.5);
    let c = a.channels() as usize;
    let mut data = Vec::with_capacity(a.data().len());
    for ((pa, pb), (sa, sb)) in wa
        .chunks_exact(c)
        .zip(wb.chunks_exact(c))
        .zip(a.data().chunks_exact(c).zip(b.data().chunks_exact(c)))
    {
        let disagree = pa
            .iter()
            .zip(pb)
            .any(|(x, y)| (x - y).abs() > DISAGREEMENT_THRESHOLD);
        for ch in 0..c {
            let v = if disagree {
                (sa[ch] as f64 + sb[ch] as f64) / 2.0
            } else {
                (pa[ch] + pb[ch]) / 2.0
            };
            data.push(quantize(v));
        }
    }
    Ok(Frame::new(
        a.width(),
        a.height(),
        a.channels(),
        data,
        a.index(),
    )?)
}

impl From<crate::frameio::FrameIoError> for InterpolationError {
    fn from(e: crate::frameio::FrameIoError) -> Self {
        InterpolationError::BadRequest(e.to_string())
    }
}

/// `count` in-between frames in temporal order, built by bisection. Each
/// synthesized frame lands on the position nearest the middle of its gap
/// (the earlier one on ties). Output indices run from `a.index() + 1`.
pub fn interpolate_recursive(
    req: &InterpolationRequest,
    cfg: &FlowConfig,
) -> Result<Vec<Frame>, InterpolationError> {
    if req.count == 0 {
        return Err(InterpolationError::BadRequest("count must be >= 1".into()));
    }
    check_shapes(&req.frame_a, &req.frame_b)?;
    let base = req.frame_a.index();
    Ok(fill(&req.frame_a, &req.frame_b, req.count, cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.with_index(base + i + 1))
        .collect())
}

/// The `count` frames strictly between `a` (position 0) and `b` (position
/// `count + 1`).
fn fill(
    a: &Frame,
    b: &Frame,
    count: usize,
    cfg: &FlowConfig,
) -> Result<Vec<Frame>, InterpolationError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mid = count.div_ceil(2);
    let m = interpolate_midpoint(a, b, cfg)?;
    let (left, right) = rayon::join(
        || fill(a, &m, mid - 1, cfg),
        || fill(&m, b, count - mid, cfg),
    );
    let mut out = left?;
    out.push(m);
    out.extend(right?);
    Ok(out)
}

/// Concatenates segments, replacing the first frame of every segment after
/// the first with the midpoint of the border pair.
pub fn smooth_borders(
    segments: &[Vec<Frame>],
    cfg: &FlowConfig,
) -> Result<Vec<Frame>, InterpolationError> {
    if let Some(i) = segments.iter().position(Vec::is_empty) {
        return Err(InterpolationError::EmptySegment(i));
    }
    let mids: Vec<Option<Frame>> = {
        use rayon::prelude::*;
        (0..segments.len())
            .into_par_iter()
            .map(|i| {
                if i == 0 {
                    return Ok(None);
                }
                let prev = segments[i - 1].last().expect("non-empty");
                let first = &segments[i][0];
                Ok(Some(
                    interpolate_midpoint(prev, first, cfg)?.with_index(first.index()),
                ))
            })
            .collect::<Result<_, InterpolationError>>()?
    };
    let mut out = Vec::with_capacity(segments.iter().map(Vec::len).sum());
    for (seg, mid) in segments.iter().zip(mids) {
        match mid {
            Some(m) => {
                out.push(m);
                out.extend(seg[1..].iter().cloned());
            }
            None => out.extend(seg.iter().cloned()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorderRow {
    /// Positions in the checked video.
    pub prev: usize,
    pub next: usize,
    pub mse: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderMetrics {
    pub borders: Vec<BorderRow>,
    /// Zero when there are no borders.
    pub mean_mse: f64,
    /// One when there are no borders.
    pub mean_ssim: f64,
}

/// Warps `prev` onto `next` with the flow estimated from `next` to `prev`
/// and compares luma by MSE and global SSIM.
pub fn border_pair(
    prev: &Frame,
    next: &Frame,
    cfg: &FlowConfig,
) -> Result<(f64, f64), InterpolationError> {
    check_shapes(prev, next)?;
    let (gp, gn) = (to_gray(prev)?, to_gray(next)?);
    let flow = flow_or_zero(&gn, &gp, cfg)?;
    let warped = warp_gray(&gp, &flow, 1.0);
    let mse = warped
        .data()
        .iter()
        .zip(gn.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / gn.data().len() as f64;
    Ok((mse, ssim_global(&warped, &gn)?))
}

/// Border consistency for each `(prev, next)` position pair in `video`.
pub fn border_consistency(
    video: &[Frame],
    borders: &[(usize, usize)],
    cfg: &FlowConfig,
) -> Result<BorderMetrics, InterpolationError> {
    use rayon::prelude::*;
    if video.len() < 2 && !borders.is_empty() {
        return Err(InterpolationError::BadRequest(
            "need at least 2 frames".into(),
        ));
    }
    if let Some(&(p, n)) = borders
        .iter()
        .find(|&&(p, n)| p >= video.len() || n >= video.len())
    {
        return Err(InterpolationError::BadRequest(format!(
            "border ({p}, {n}) outside {} frames",
            video.len()
        )));
    }
    let rows = borders
        .par_iter()
        .map(|&(prev, next)| {
            let (mse, ssim) = border_pair(&video[prev], &video[next], cfg)?;
            Ok(BorderRow {
                prev,
                next,
                mse,
                ssim,
            })
        })
        .collect::<Result<Vec<_>, InterpolationError>>()?;
    let n = rows.len() as f64;
    let (mean_mse, mean_ssim) = if rows.is_empty() {
        (0.0, 1.0)
    } else {
        (
            rows.iter().map(|r| r.mse).sum::<f64>() / n,
            rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        )
    };
    Ok(BorderMetrics {
        borders: rows,
        mean_mse,
        mean_ssim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Texture;

    fn cfg() -> FlowConfig {
        FlowConfig::default()
    }

    #[test]
    fn identity_is_exact() {
        let f = Texture::new(48, 40, 0, 1).crop_rgb(0, 0, 1.0, 3);
        assert_eq!(interpolate_midpoint(&f, &f, &cfg()).unwrap(), f);
        let req = InterpolationRequest {
            frame_a: f.clone(),
            frame_b: f.clone(),
            count: 5,
        };
        for g in interpolate_recursive(&req, &cfg()).unwrap() {
            assert_eq!(g.data(), f.data());
        }
        let segs = vec![vec![f.clone()], vec![f.clone().with_index(4)]];
        let out = smooth_borders(&segs, &cfg()).unwrap();
        assert_eq!(out[1].data(), f.data());
        let m = border_consistency(&[f.clone(), f.clone()], &[(0, 1)], &cfg()).unwrap();
        assert_eq!(m.mean_mse, 0.0);
        assert!((m.mean_ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_frames_cross_fade() {
        let a = Frame::filled(32, 32, &[100], 0).unwrap();
        let b = Frame::filled(32, 32, &[200], 1).unwrap();
        let m = interpolate_midpoint(&a, &b, &cfg()).unwrap();
        assert!(m.data().iter().all(|&p| p == 150));
        let small_a = Frame::filled(4, 4, &[10, 20, 30], 0).unwrap();
        let small_b = Frame::filled(4, 4, &[20, 20, 31], 0).unwrap();
        let m = interpolate_midpoint(&small_a, &small_b, &cfg()).unwrap();
        assert_eq!(&m.data()[..3], &[15, 20, 31]);
    }

    #[test]
    fn border_offset_forty() {
        let s0 = vec![Frame::filled(32, 32, &[80, 80, 80], 0).unwrap()];
        let s1 = vec![
            Frame::filled(32, 32, &[120, 120, 120], 1).unwrap(),
            Frame::filled(32, 32, &[120, 120, 120], 2).unwrap(),
        ];
        let out = smooth_borders(&[s0, s1], &cfg()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[1].data().iter().all(|&p| p == 100));
        assert_eq!(out[1].index(), 1);
        assert!(out[2].data().iter().all(|&p| p == 120));
    }

    #[test]
    fn shifted_midpoint() {
        let t = Texture::new(96, 96, 8, 21);
        let a = t.crop_rgb(0, 0, 1.0, 0);
        let b = t.crop_rgb(4, 0, 1.0, 1);
        let truth = t.crop_rgb(2, 0, 1.0, 0);
        let m = interpolate_midpoint(&a, &b, &cfg()).unwrap();
        let (w, c) = (96usize, 3usize);
        let mut err = 0.0;
        let mut n = 0usize;
        for y in 8..88 {
            for x in 8..88 {
                for ch in 0..c {
                    let i = (y * w + x) * c + ch;
                    err += (m.data()[i] as f64 - truth.data()[i] as f64).abs();
                    n += 1;
                }
            }
        }
        let mae = err / n as f64;
        assert!(mae <= 4.0, "mean abs error {mae}");
    }

    #[test]
    fn recursive_order() {
        let a = Frame::filled(8, 8, &[0], 10).unwrap();
        let b = Frame::filled(8, 8, &[255], 14).unwrap();
        let req = InterpolationRequest {
            frame_a: a.clone(),
            frame_b: b.clone(),
            count: 3,
        };
        let out = interpolate_recursive(&req, &cfg()).unwrap();
        let vals: Vec<u8> = out.iter().map(|f| f.data()[0]).collect();
        // m = 128, then (0+128)/2 and (128+255)/2 rounded half-up
        assert_eq!(vals, vec![64, 128, 192]);
        assert_eq!(
            out.iter().map(Frame::index).collect::<Vec<_>>(),
            vec![11, 12, 13]
        );
        let req = InterpolationRequest { count: 1, ..req };
        assert_eq!(
            interpolate_recursive(&req, &cfg()).unwrap()[0].data()[0],
            128
        );
        let req = InterpolationRequest { count: 2, ..req };
        let vals: Vec<u8> = interpolate_recursive(&req, &cfg())
            .unwrap()
            .iter()
            .map(|f| f.data()[0])
            .collect();
        // positions 0..3: midpoint lands on 1, then 2 from (m, b)
        assert_eq!(vals, vec![128, 192]);
    }

    #[test]
    fn errors() {
        let a = Frame::filled(8, 8, &[0], 0).unwrap();
        let b = Frame::filled(8, 9, &[0], 0).unwrap();
        assert!(matches!(
            interpolate_midpoint(&a, &b, &cfg()),
            Err(InterpolationError::DimensionMismatch(..))
        ));
        let req = InterpolationRequest {
            frame_a: a.clone(),
            frame_b: a.clone(),
            count: 0,
        };
        assert!(interpolate_recursive(&req, &cfg()).is_err());
        assert!(matches!(
            smooth_borders(&[vec![a.clone()], vec![]], &cfg()),
            Err(InterpolationError::EmptySegment(1))
        ));
        assert!(border_consistency(std::slice::from_ref(&a), &[(0, 1)], &cfg()).is_err());
    }
}
