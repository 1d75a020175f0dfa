//! Frame sequences on disk: binary PPM/PGM frames plus a `manifest.json` sidecar.
//!
//! Layout of a sequence directory:
//!
//! ```text
//! manifest.json          {"frame_count":N,"width":W,"height":H,"fps_num":..,"fps_den":..,"pattern":"frame_{:06}.ppm"}
//! frame_000000.ppm       P6 (RGB) or P5 (gray), maxval 255
//! frame_000001.ppm
//! ...
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MAX_DIMENSION: u32 = 8192;

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("manifest missing: {0}")]
    ManifestMissing(PathBuf),
    #[error("corrupt sequence: {0}")]
    CorruptSequence(String),
    #[error("decode error in {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("dimension mismatch: expected {expected:?}, got {got:?} (frame {index})")]
    DimensionMismatch {
        expected: (u32, u32, u8),
        got: (u32, u32, u8),
        index: usize,
    },
    #[error("no frames given")]
    EmptyInput,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("frame index {index} out of range (sequence has {len} frames)")]
    OutOfRange { index: usize, len: usize },
    #[error("write failed for {path}: {source}")]
    WriteError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("read failed for {path}: {source}")]
    ReadError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// An 8-bit raster, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
    index: usize,
}

impl Frame {
    pub fn new(
        width: u32,
        height: u32,
        channels: u8,
        data: Vec<u8>,
        index: usize,
    ) -> Result<Self, FrameIoError> {
        if width == 0 || height == 0 {
            return Err(FrameIoError::InvalidFrame(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if width > MAX_DIMENSION || height > MAX_DIMENSION {
            return Err(FrameIoError::InvalidFrame(format!(
                "{width}x{height} exceeds {MAX_DIMENSION}x{MAX_DIMENSION}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(FrameIoError::InvalidFrame(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(FrameIoError::InvalidFrame(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            index,
        })
    }

    /// A frame filled with one value per channel.
    pub fn filled(
        width: u32,
        height: u32,
        pixel: &[u8],
        index: usize,
    ) -> Result<Self, FrameIoError> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * pixel.len())
            .collect();
        Self::new(width, height, pixel.len() as u8, data, index)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn shape(&self) -> (u32, u32, u8) {
        (self.width, self.height, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Sample at `(x, y)` for channel `c`. No bounds clamping.
    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width as usize + x) * self.channels as usize + c]
    }

    /// Encodes as binary PGM (1 channel) or PPM (3 channels).
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    /// Decodes a binary PGM/PPM with maxval 255. `#` comments in the header are skipped.
    pub fn from_pnm(bytes: &[u8], index: usize) -> Result<Self, String> {
        let mut pos = 0usize;
        let magic = bytes.get(0..2).ok_or("truncated magic")?;
        let channels = match magic {
            b"P5" => 1,
            b"P6" => 3,
            other => {
                return Err(format!(
                    "unsupported magic {:?}",
                    String::from_utf8_lossy(other)
                ))
            }
        };
        pos += 2;
        let mut fields = [0u32; 3];
        for field in fields.iter_mut() {
            *field = next_header_number(bytes, &mut pos)?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(format!("maxval {maxval} unsupported (need 255)"));
        }
        // exactly one whitespace byte separates maxval from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err("missing whitespace after maxval".into()),
        }
        if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
            return Err(format!("bad dimensions {width}x{height}"));
        }
        let len = width as usize * height as usize * channels as usize;
        let payload = &bytes[pos..];
        if payload.len() != len {
            return Err(format!(
                "payload is {} bytes, expected {len} for {width}x{height}x{channels}",
                payload.len()
            ));
        }
        Frame::new(width, height, channels, payload.to_vec(), index).map_err(|e| e.to_string())
    }
}

fn next_header_number(bytes: &[u8], pos: &mut usize) -> Result<u32, String> {
    loop {
        match bytes.get(*pos) {
            None => return Err("truncated header".into()),
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(format!("expected a number at byte {start}"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| "header number out of range".to_string())
}

/// Frame rate as a positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn is_valid(&self) -> bool {
        self.num > 0 && self.den > 0
    }
}

impl Default for Fps {
    fn default() -> Self {
        Self::new(20, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub frame_count: usize,
    pub width: u32,
    pub height: u32,
    pub fps_num: u32,
    pub fps_den: u32,
    pub pattern: String,
}

impl VideoManifest {
    pub fn fps(&self) -> Fps {
        Fps::new(self.fps_num, self.fps_den)
    }

    /// Expands the `{:0N}` placeholder of `pattern` for frame `index`.
    pub fn file_name(&self, index: usize) -> Result<String, FrameIoError> {
        expand_pattern(&self.pattern, index)
    }

    fn validate(&self) -> Result<(), FrameIoError> {
        if self.frame_count == 0 {
            return Err(FrameIoError::CorruptSequence("frame_count is 0".into()));
        }
        if !self.fps().is_valid() {
            return Err(FrameIoError::CorruptSequence(format!(
                "fps {}/{} not positive",
                self.fps_num, self.fps_den
            )));
        }
        if self.width == 0
            || self.height == 0
            || self.width > MAX_DIMENSION
            || self.height > MAX_DIMENSION
        {
            return Err(FrameIoError::CorruptSequence(format!(
                "bad manifest dimensions {}x{}",
                self.width, self.height
            )));
        }
        expand_pattern(&self.pattern, 0).map(|_| ())
    }
}

fn split_pattern(pattern: &str) -> Result<(&str, usize, &str), FrameIoError> {
    let bad = || FrameIoError::CorruptSequence(format!("bad frame pattern {pattern:?}"));
    let open = pattern.find("{:0").ok_or_else(bad)?;
    let close = open + pattern[open..].find('}').ok_or_else(bad)?;
    let width: usize = pattern[open + 3..close].parse().map_err(|_| bad())?;
    let suffix = &pattern[close + 1..];
    if suffix.contains('{') || pattern[..open].contains('{') {
        return Err(bad());
    }
    Ok((&pattern[..open], width, suffix))
}

fn expand_pattern(pattern: &str, index: usize) -> Result<String, FrameIoError> {
    let (prefix, width, suffix) = split_pattern(pattern)?;
    Ok(format!("{prefix}{index:0width$}{suffix}"))
}

/// Random access to the frames of a video.
pub trait FrameSource: Sync {
    fn frame_count(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Frame, FrameIoError>;
}

impl FrameSource for [Frame] {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn frame(&self, index: usize) -> Result<Frame, FrameIoError> {
        self.get(index).cloned().ok_or(FrameIoError::OutOfRange {
            index,
            len: self.len(),
        })
    }
}

impl FrameSource for Vec<Frame> {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn frame(&self, index: usize) -> Result<Frame, FrameIoError> {
        self.as_slice().frame(index)
    }
}

/// A sequence directory whose frames are decoded on demand.
#[derive(Debug, Clone)]
pub struct Sequence {
    dir: PathBuf,
    manifest: VideoManifest,
}

impl Sequence {
    pub fn manifest(&self) -> &VideoManifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frame_path(&self, index: usize) -> Result<PathBuf, FrameIoError> {
        Ok(self.dir.join(self.manifest.file_name(index)?))
    }

    pub fn load_all(&self) -> Result<Vec<Frame>, FrameIoError> {
        (0..self.manifest.frame_count)
            .map(|i| self.frame(i))
            .collect()
    }
}

impl FrameSource for Sequence {
    fn frame_count(&self) -> usize {
        self.manifest.frame_count
    }

    fn frame(&self, index: usize) -> Result<Frame, FrameIoError> {
        if index >= self.manifest.frame_count {
            return Err(FrameIoError::OutOfRange {
                index,
                len: self.manifest.frame_count,
            });
        }
        let path = self.frame_path(index)?;
        let bytes = fs::read(&path).map_err(|source| FrameIoError::ReadError {
            path: path.clone(),
            source,
        })?;
        let frame = Frame::from_pnm(&bytes, index).map_err(|reason| FrameIoError::DecodeError {
            path: path.clone(),
            reason,
        })?;
        if (frame.width, frame.height) != (self.manifest.width, self.manifest.height) {
            return Err(FrameIoError::CorruptSequence(format!(
                "{} is {}x{}, manifest says {}x{}",
                path.display(),
                frame.width,
                frame.height,
                self.manifest.width,
                self.manifest.height
            )));
        }
        Ok(frame)
    }
}

/// Opens a sequence directory. Frames are not decoded until requested.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence, FrameIoError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(FrameIoError::ManifestMissing(manifest_path));
    }
    let raw = fs::read(&manifest_path).map_err(|source| FrameIoError::ReadError {
        path: manifest_path.clone(),
        source,
    })?;
    let manifest: VideoManifest = serde_json::from_slice(&raw)
        .map_err(|e| FrameIoError::CorruptSequence(format!("{}: {e}", manifest_path.display())))?;
    manifest.validate()?;

    let (prefix, width, suffix) = split_pattern(&manifest.pattern)?;
    let on_disk = fs::read_dir(dir)
        .map_err(|source| FrameIoError::ReadError {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok())
        .filter(|entry| {
            let name = entry.file_name();
            let name = name.to_string_lossy();
            name.len() == prefix.len() + width + suffix.len()
                && name.starts_with(prefix)
                && name.ends_with(suffix)
                && name[prefix.len()..name.len() - suffix.len()]
                    .bytes()
                    .all(|b| b.is_ascii_digit())
        })
        .count();
    if on_disk != manifest.frame_count {
        return Err(FrameIoError::CorruptSequence(format!(
            "manifest declares {} frames, found {on_disk} matching files",
            manifest.frame_count
        )));
    }
    for i in 0..manifest.frame_count {
        let path = dir.join(manifest.file_name(i)?);
        if !path.is_file() {
            return Err(FrameIoError::CorruptSequence(format!(
                "missing frame {i}: {}",
                path.display()
            )));
        }
    }
    Ok(Sequence {
        dir: dir.to_path_buf(),
        manifest,
    })
}

/// Writes `frames` as a sequence directory (created if absent).
///
/// Frames must share one shape and carry indices `0..len` in order.
pub fn write_sequence(
    frames: &[Frame],
    dir: impl AsRef<Path>,
    fps: Fps,
) -> Result<VideoManifest, FrameIoError> {
    let dir = dir.as_ref();
    let first = frames.first().ok_or(FrameIoError::EmptyInput)?;
    if !fps.is_valid() {
        return Err(FrameIoError::InvalidFrame(format!(
            "fps {}/{} not positive",
            fps.num, fps.den
        )));
    }
    for (pos, f) in frames.iter().enumerate() {
        if f.shape() != first.shape() {
            return Err(FrameIoError::DimensionMismatch {
                expected: first.shape(),
                got: f.shape(),
                index: pos,
            });
        }
        if f.index != pos {
            return Err(FrameIoError::InvalidFrame(format!(
                "frame at position {pos} carries index {}",
                f.index
            )));
        }
    }
    let ext = if first.channels == 1 { "pgm" } else { "ppm" };
    let manifest = VideoManifest {
        frame_count: frames.len(),
        width: first.width,
        height: first.height,
        fps_num: fps.num,
        fps_den: fps.den,
        pattern: format!("frame_{{:06}}.{ext}"),
    };
    fs::create_dir_all(dir).map_err(|source| FrameIoError::WriteError {
        path: dir.to_path_buf(),
        source,
    })?;
    for f in frames {
        let path = dir.join(manifest.file_name(f.index)?);
        write_file(&path, &f.to_pnm())?;
    }
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write_file(&dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FrameIoError> {
    let wrap = |source| FrameIoError::WriteError {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(wrap)?;
    file.write_all(bytes).map_err(wrap)
}
