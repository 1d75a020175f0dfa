//! Exhaustive integer block matching, kept as an independent reference for
//! the gradient-based estimator.

use super::{check_same_dims, FlowField, GrayFrame, MotionError};

/// Fixed-point scale for SAD accumulation so that equal costs compare equal.
const SAD_SCALE: f64 = 65536.0;

/// For every pixel, the integer displacement `(u, v)` with `|u|, |v| <= radius`
/// minimizing the sum of absolute differences between the `block x block`
/// window of `a` around the pixel and the same window of `b` shifted by
/// `(u, v)`. Windows are clipped to the image; `b` is sampled with
/// replicate-edge addressing. Ties go to the smaller `u^2 + v^2`, then the
/// lexicographically smaller `(u, v)`.
pub fn flow_oracle_blockmatch(
    a: &GrayFrame,
    b: &GrayFrame,
    radius: u32,
    block: u32,
) -> Result<FlowField, MotionError> {
    check_same_dims(a, b)?;
    if radius == 0 {
        return Err(MotionError::BadConfig("radius must be >= 1".into()));
    }
    if block.is_multiple_of(2) {
        return Err(MotionError::BadConfig(format!(
            "block must be odd, got {block}"
        )));
    }
    let (w, h) = (a.width() as usize, a.height() as usize);
    let half = (block / 2) as usize;
    let r = radius as i64;

    let mut candidates: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|u| (-r..=r).map(move |v| (u, v)))
        .collect();
    candidates.sort_by_key(|&(u, v)| (u * u + v * v, u, v));

    let mut best_cost = vec![i64::MAX; w * h];
    let mut best = vec![(0i64, 0i64); w * h];
    let stride = w + 1;
    let mut integral = vec![0i64; stride * (h + 1)];
    for &(du, dv) in &candidates {
        for y in 0..h {
            let mut row = 0i64;
            let sy = (y as i64 + dv).clamp(0, h as i64 - 1) as usize;
            for x in 0..w {
                let sx = (x as i64 + du).clamp(0, w as i64 - 1) as usize;
                let diff = (a.at(x, y) - b.at(sx, sy)).abs();
                row += (diff * SAD_SCALE).round() as i64;
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
            }
        }
        for y in 0..h {
            let y0 = y.saturating_sub(half);
            let y1 = (y + half + 1).min(h);
            for x in 0..w {
                let x0 = x.saturating_sub(half);
                let x1 = (x + half + 1).min(w);
                let cost = integral[y1 * stride + x1]
                    - integral[y0 * stride + x1]
                    - integral[y1 * stride + x0]
                    + integral[y0 * stride + x0];
                let i = y * w + x;
                // candidates arrive in tie-break order, so only strict improvements win
                if cost < best_cost[i] {
                    best_cost[i] = cost;
                    best[i] = (du, dv);
                }
            }
        }
    }
    FlowField::new(
        a.width(),
        a.height(),
        best.iter().map(|p| p.0 as f64).collect(),
        best.iter().map(|p| p.1 as f64).collect(),
    )
}
