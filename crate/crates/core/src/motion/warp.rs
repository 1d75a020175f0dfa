use super::{FlowField, GrayFrame};
use crate::frameio::Frame;

/// Bilinear sample of a single-channel plane with replicate-edge addressing.
#[inline]
pub fn sample_bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    sample_strided(plane, width, height, 1, 0, x, y)
}

#[inline]
pub(crate) fn sample_strided(
    data: &[f64],
    width: usize,
    height: usize,
    stride: usize,
    channel: usize,
    x: f64,
    y: f64,
) -> f64 {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let at = |xx: usize, yy: usize| data[(yy * width + xx) * stride + channel];
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// `out(x, y) = g(x + scale * u(x, y), y + scale * v(x, y))`.
pub fn warp_gray(g: &GrayFrame, flow: &FlowField, scale: f64) -> GrayFrame {
    assert_eq!(
        g.dims(),
        flow.dims(),
        "warp_gray: flow shape differs from image"
    );
    let (w, h) = (g.width() as usize, g.height() as usize);
    GrayFrame::from_fn(g.width(), g.height(), |x, y| {
        let i = y * w + x;
        sample_bilinear(
            g.data(),
            w,
            h,
            x as f64 + scale * flow.u()[i],
            y as f64 + scale * flow.v()[i],
        )
    })
}

/// Warps every channel of `frame` like [`warp_gray`], returning interleaved
/// full-precision samples.
pub fn warp_frame(frame: &Frame, flow: &FlowField, scale: f64) -> Vec<f64> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    assert_eq!(
        (frame.width(), frame.height()),
        flow.dims(),
        "warp_frame: flow shape differs from image"
    );
    let c = frame.channels() as usize;
    let src: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f64 + scale * flow.u()[i];
            let sy = y as f64 + scale * flow.v()[i];
            for ch in 0..c {
                out.push(sample_strided(&src, w, h, c, ch, sx, sy));
            }
        }
    }
    out
}
