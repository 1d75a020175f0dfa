use proptest::prelude::*;

use pipeflow::frameio::Frame;
use pipeflow::interpolation::{
    border_consistency, border_pair, interpolate_midpoint, interpolate_recursive, smooth_borders,
    InterpolationRequest,
};
use pipeflow::motion::{estimate_flow, FlowConfig, GrayFrame};
use pipeflow::synthetic::Texture;

fn luma(f: &Frame) -> Vec<f64> {
    f.data()
        .chunks(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Bilinear lookup with replicate edges done by clamping the integer taps.
fn tap(img: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let (xf, yf) = (x.floor(), y.floor());
    let (ax, ay) = (x - xf, y - yf);
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - ay), (1, ay)] {
        for (dx, wx) in [(0i64, 1.0 - ax), (1, ax)] {
            let px = clamp(xf as i64 + dx, w);
            let py = clamp(yf as i64 + dy, h);
            acc += wx * wy * img[py * w + px];
        }
    }
    acc
}

/// Border MSE and SSIM written out with plain loops.
fn naive_border(prev: &Frame, next: &Frame) -> (f64, f64) {
    let (w, h) = (prev.width() as usize, prev.height() as usize);
    let (lp, ln) = (luma(prev), luma(next));
    let gp = GrayFrame::new(w as u32, h as u32, lp.clone()).unwrap();
    let gn = GrayFrame::new(w as u32, h as u32, ln.clone()).unwrap();
    let flow = estimate_flow(&gn, &gp, &FlowConfig::default()).unwrap();
    let mut warped = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            warped[y * w + x] = tap(&lp, w, h, x as f64 + u, y as f64 + v);
        }
    }
    let n = (w * h) as f64;
    let mut mse = 0.0;
    for i in 0..w * h {
        mse += (warped[i] - ln[i]) * (warped[i] - ln[i]);
    }
    mse /= n;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (ma, mb) = (mean(&warped), mean(&ln));
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..w * h {
        va += (warped[i] - ma).powi(2) / n;
        vb += (ln[i] - mb).powi(2) / n;
        cov += (warped[i] - ma) * (ln[i] - mb) / n;
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let ssim =
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    (mse, ssim)
}

#[test]
fn border_metrics_match_naive_oracle() {
    let tex = Texture::new(48, 48, 8, 21);
    let prev = tex.crop_rgb(0, 0, 1.0, 0);
    let cases = [
        tex.crop_rgb(0, 0, 1.0, 1),
        tex.crop_rgb(2, 1, 1.0, 1),
        tex.crop_rgb(2, 1, 1.3, 1),
        tex.crop_rgb(-5, 3, 0.6, 1),
    ];
    let mut ours = Vec::new();
    let mut naive = Vec::new();
    for next in &cases {
        let (m, s) = border_pair(&prev, next, &FlowConfig::default()).unwrap();
        let (nm, ns) = naive_border(&prev, next);
        assert!((m - nm).abs() <= 1e-9 * nm.max(1.0), "mse {m} vs {nm}");
        assert!((s - ns).abs() <= 1e-12, "ssim {s} vs {ns}");
        ours.push((m, s));
        naive.push((nm, ns));
    }
    assert_eq!(ours[0], (0.0, 1.0));
    let order = |v: &[(f64, f64)], key: fn(&(f64, f64)) -> f64| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| key(&v[a]).total_cmp(&key(&v[b])));
        idx
    };
    assert_eq!(order(&ours, |p| p.0), order(&naive, |p| p.0));
    assert_eq!(order(&ours, |p| -p.1), order(&naive, |p| -p.1));
}

#[test]
fn border_consistency_aggregates_rows() {
    let tex = Texture::new(32, 32, 8, 4);
    let video: Vec<Frame> = (0..4).map(|i| tex.crop_rgb(i as i32, 0, 1.0, i)).collect();
    let m = border_consistency(&video, &[(0, 1), (2, 3)], &FlowConfig::default()).unwrap();
    assert_eq!(m.borders.len(), 2);
    let mean = (m.borders[0].mse + m.borders[1].mse) / 2.0;
    assert!((m.mean_mse - mean).abs() < 1e-12);
    assert!(border_consistency(&video, &[(3, 4)], &FlowConfig::default()).is_err());
    let none = border_consistency(&video, &[], &FlowConfig::default()).unwrap();
    assert_eq!((none.mean_mse, none.mean_ssim), (0.0, 1.0));
}

#[test]
fn smoothing_conserves_frame_count() {
    let tex = Texture::new(24, 24, 12, 2);
    let segs: Vec<Vec<Frame>> = [3usize, 1, 4]
        .iter()
        .scan(0usize, |start, &len| {
            let seg = (*start..*start + len)
                .map(|i| tex.crop_rgb(i as i32, 0, 1.0, i))
                .collect();
            *start += len;
            Some(seg)
        })
        .collect();
    let out = smooth_borders(&segs, &FlowConfig::default()).unwrap();
    assert_eq!(out.len(), 8);
    assert_eq!(out[0], segs[0][0]);
    assert_eq!(out[2], segs[0][2]);
}

fn channel_range(frames: &[&Frame]) -> Vec<(u8, u8)> {
    (0..3)
        .map(|c| {
            frames
                .iter()
                .flat_map(|f| f.data().iter().skip(c).step_by(3).copied())
                .fold((u8::MAX, u8::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn midpoint_stays_within_source_range(
        seed in any::<u64>(),
        dx in -3i32..=3,
        dy in -3i32..=3,
        gain in 0.5f64..1.5,
    ) {
        let tex = Texture::new(24, 24, 4, seed);
        let a = tex.crop_rgb(0, 0, 1.0, 0);
        let b = tex.crop_rgb(dx, dy, gain, 1);
        let m = interpolate_midpoint(&a, &b, &FlowConfig::default()).unwrap();
        let range = channel_range(&[&a, &b]);
        for (i, &v) in m.data().iter().enumerate() {
            let (lo, hi) = range[i % 3];
            prop_assert!(lo <= v && v <= hi, "sample {} = {} outside [{}, {}]", i, v, lo, hi);
        }
    }

    #[test]
    fn recursive_fill_count_and_order(count in 1usize..=9, lo in 0u8..100, hi in 150u8..=255) {
        let a = Frame::filled(20, 20, &[lo, lo, lo], 5).unwrap();
        let b = Frame::filled(20, 20, &[hi, hi, hi], 6 + count).unwrap();
        let out = interpolate_recursive(
            &InterpolationRequest { frame_a: a, frame_b: b, count },
            &FlowConfig::default(),
        )
        .unwrap();
        prop_assert_eq!(out.len(), count);
        for (i, f) in out.iter().enumerate() {
            prop_assert_eq!(f.index(), 6 + i);
        }
        let values: Vec<u8> = out.iter().map(|f| f.data()[0]).collect();
        prop_assert!(values.windows(2).all(|p| p[0] <= p[1]), "{:?}", values);
        prop_assert!(values.iter().all(|&v| lo <= v && v <= hi));
    }
}
