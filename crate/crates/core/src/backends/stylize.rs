use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, EditedSegment, Latents, Protocol};
use crate::frameio::Frame;
use crate::motion::{quantize, to_gray, GrayFrame};
use crate::segmentation::Segment;

const PYRAMID_LEVELS: usize = 3;
const POSTERIZE_LEVELS: u32 = 4;
const TARGET_LUMA: f64 = 128.0;
const GAIN_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Posterize,
    InvertColors,
    Sepia,
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Posterize => "posterize",
            Style::InvertColors => "invert-colors",
            Style::Sepia => "sepia",
        })
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "posterize" => Ok(Style::Posterize),
            "invert-colors" => Ok(Style::InvertColors),
            "sepia" => Ok(Style::Sepia),
            other => Err(format!(
                "unknown style {other:?} (posterize, invert-colors, sepia)"
            )),
        }
    }
}

/// Deterministic color filter. Invert builds a blur pyramid per frame; edit
/// derives an exposure gain from the keyframes (and overlap frames) and
/// applies it with the style to every frame of the segment.
#[derive(Debug)]
pub struct StylizeBackend {
    style: Style,
    protocol: Protocol,
}

impl StylizeBackend {
    pub fn new(style: Style) -> Self {
        Self {
            style,
            protocol: Protocol::default(),
        }
    }

    pub fn style(&self) -> Style {
        self.style
    }
}

/// 2x2 mean decimation until `levels` planes exist or a side reaches 1.
pub fn blur_pyramid(g: GrayFrame, levels: usize) -> Vec<GrayFrame> {
    let mut out = vec![g];
    while out.len() < levels {
        let top = out.last().expect("non-empty");
        let (w, h) = (top.width() as usize, top.height() as usize);
        if w < 2 || h < 2 {
            break;
        }
        let (nw, nh) = (w / 2, h / 2);
        let next = GrayFrame::from_fn(nw as u32, nh as u32, |x, y| {
            (top.at(2 * x, 2 * y)
                + top.at(2 * x + 1, 2 * y)
                + top.at(2 * x, 2 * y + 1)
                + top.at(2 * x + 1, 2 * y + 1))
                / 4.0
        });
        out.push(next);
    }
    out
}

fn mean(g: &GrayFrame) -> f64 {
    g.data().iter().sum::<f64>() / g.data().len() as f64
}

fn gray(frame: &Frame) -> Result<GrayFrame, BackendError> {
    to_gray(frame).map_err(|e| BackendError::Failed(e.to_string()))
}

/// Applies `style` with exposure `gain` to one frame.
pub fn apply_style(style: Style, frame: &Frame, gain: f64) -> Frame {
    let data: Vec<u8> = match style {
        Style::InvertColors => frame.data().iter().map(|&p| 255 - p).collect(),
        Style::Posterize => frame
            .data()
            .iter()
            .map(|&p| {
                let v = (p as f64 * gain).clamp(0.0, 255.0);
                let q = ((v * POSTERIZE_LEVELS as f64 / 256.0) as u32).min(POSTERIZE_LEVELS - 1);
                (q * 255 / (POSTERIZE_LEVELS - 1)) as u8
            })
            .collect(),
        Style::Sepia if frame.channels() == 3 => frame
            .data()
            .chunks_exact(3)
            .flat_map(|p| {
                let (r, g, b) = (p[0] as f64 * gain, p[1] as f64 * gain, p[2] as f64 * gain);
                [
                    quantize(0.393 * r + 0.769 * g + 0.189 * b),
                    quantize(0.349 * r + 0.686 * g + 0.168 * b),
                    quantize(0.272 * r + 0.534 * g + 0.131 * b),
                ]
            })
            .collect(),
        Style::Sepia => frame
            .data()
            .iter()
            .map(|&p| quantize(p as f64 * gain))
            .collect(),
    };
    Frame::new(
        frame.width(),
        frame.height(),
        frame.channels(),
        data,
        frame.index(),
    )
    .expect("same shape as a valid frame")
}

impl Backend for StylizeBackend {
    fn name(&self) -> String {
        format!("stylize:{}", self.style)
    }

    fn invert(&self, segment: &Segment, frames: Vec<Frame>) -> Result<Latents, BackendError> {
        self.protocol.begin_invert(segment.id)?;
        let pyramids = frames
            .iter()
            .map(|f| Ok(blur_pyramid(gray(f)?, PYRAMID_LEVELS)))
            .collect::<Result<_, BackendError>>()?;
        Ok(Latents {
            segment: segment.id,
            frames,
            pyramids,
        })
    }

    fn edit(
        &self,
        segment: &Segment,
        latents: &Latents,
        overlap: &[Frame],
        prompt: &str,
    ) -> Result<EditedSegment, BackendError> {
        self.protocol.begin_edit(segment.id, latents)?;
        if latents.frames.len() != segment.frames.len()
            || latents.pyramids.len() != latents.frames.len()
        {
            return Err(BackendError::ProtocolError {
                segment: segment.id,
                reason: "latents do not match the segment".into(),
            });
        }
        let is_key: Vec<bool> = segment
            .frames
            .iter()
            .map(|f| segment.keyframes.contains(f))
            .collect();
        // keyframe statistics from the coarsest cached level
        let mut lumas: Vec<f64> = latents
            .pyramids
            .iter()
            .zip(&is_key)
            .filter(|(_, k)| **k)
            .map(|(p, _)| mean(p.last().expect("pyramid has a base level")))
            .collect();
        for f in overlap {
            lumas.push(mean(&gray(f)?));
        }
        let mean_luma = lumas.iter().sum::<f64>() / lumas.len().max(1) as f64;
        let gain = if mean_luma > 0.0 {
            (TARGET_LUMA / mean_luma).clamp(GAIN_RANGE.0, GAIN_RANGE.1)
        } else {
            GAIN_RANGE.1
        };
        let mut out: Vec<Option<Frame>> = vec![None; latents.frames.len()];
        let order = (0..out.len())
            .filter(|&i| is_key[i])
            .chain((0..out.len()).filter(|&i| !is_key[i]));
        for i in order {
            out[i] = Some(apply_style(self.style, &latents.frames[i], gain));
        }
        Ok(EditedSegment {
            segment: segment.id,
            frames: out
                .into_iter()
                .map(|f| f.expect("every frame styled"))
                .collect(),
            tag: format!("{}:{prompt}", self.name()),
        })
    }
}
