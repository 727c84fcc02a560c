//! Shot segmentation from frame-difference signals and clip length
//! normalization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PIXEL_TOL: f64 = 30.0 / 255.0;
pub const DEFAULT_CHANGE_THRESHOLD: f64 = 0.75;
pub const MIN_CLIP_LEN: usize = 32;
pub const MAX_CLIP_LEN: usize = 112;

/// Fraction of changed pixels between consecutive frames; entry `t`
/// compares frame `t` with frame `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSignal {
    fractions: Vec<f64>,
}

impl DiffSignal {
    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        if fractions.is_empty() {
            return Err(Error::Empty("difference signal"));
        }
        if let Some((t, v)) = fractions.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "difference fraction {v} at index {t} outside [0, 1]"
            )));
        }
        Ok(Self { fractions })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Number of frames the signal describes.
    pub fn total_frames(&self) -> usize {
        self.fractions.len() + 1
    }

    /// One fraction per line; blank lines are ignored.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            out.push(line.parse().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                message: format!("line {}: cannot parse {line:?}", lineno + 1),
            })?);
        }
        Self::new(out)
    }
}

/// Contiguous half-open frame ranges tiling `[0, F)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipList {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub clips: Vec<[usize; 2]>,
}

impl ClipList {
    pub fn new(video_id: Option<String>, clips: Vec<[usize; 2]>) -> Self {
        Self { video_id, clips }
    }

    pub fn total_frames(&self) -> usize {
        self.clips.last().map_or(0, |c| c[1])
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.clips.iter().map(|c| c[1] - c[0]).collect()
    }

    /// Start frame of every clip after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.clips.iter().skip(1).map(|c| c[0]).collect()
    }

    pub fn tiles(&self, total_frames: usize) -> bool {
        let mut at = 0;
        for c in &self.clips {
            if c[0] != at || c[1] <= c[0] {
                return false;
            }
            at = c[1];
        }
        at == total_frames
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let list: ClipList = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if !list.tiles(list.total_frames()) {
            return Err(Error::ShapeMismatch(format!(
                "{}: clips are not contiguous half-open ranges from frame 0",
                path.display()
            )));
        }
        Ok(list)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("clip list serializes")
    }
}

/// One decoded frame, `pixels` in row-major order with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height || pixels.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    /// HSV conversion with every channel in `[0, 1]` (hue as a turn fraction).
    pub fn to_hsv(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| rgb_to_hsv(p)).collect(),
        }
    }
}

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    [hue, sat, max]
}

fn rgb_changed(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    a.iter().zip(&b).any(|(x, y)| (x - y).abs() > tol)
}

fn hsv_changed(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    let dh = (a[0] - b[0]).abs();
    let hue = dh.min(1.0 - dh);
    hue > tol || (a[1] - b[1]).abs() > tol || (a[2] - b[2]).abs() > tol
}

/// Per consecutive frame pair, the fraction of pixels whose largest channel
/// difference exceeds `pixel_tol` in RGB or in HSV. Hue differences wrap.
pub fn frame_diff_fraction(rgb: &[Frame], hsv: &[Frame], pixel_tol: f64) -> Result<DiffSignal> {
    if rgb.len() != hsv.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} RGB frames vs {} HSV frames",
            rgb.len(),
            hsv.len()
        )));
    }
    if rgb.len() < 2 {
        return Err(Error::Empty("need at least two frames"));
    }
    let (w, h) = (rgb[0].width, rgb[0].height);
    if let Some(f) = rgb.iter().chain(hsv).find(|f| f.width != w || f.height != h || f.pixels.len() != w * h) {
        return Err(Error::ShapeMismatch(format!(
            "frame {}x{} differs from {w}x{h}",
            f.width, f.height
        )));
    }
    let total = (w * h) as f64;
    let fractions = (0..rgb.len() - 1)
        .map(|t| {
            let changed = (0..w * h)
                .filter(|&p| {
                    rgb_changed(rgb[t].pixels[p], rgb[t + 1].pixels[p], pixel_tol)
                        || hsv_changed(hsv[t].pixels[p], hsv[t + 1].pixels[p], pixel_tol)
                })
                .count();
            changed as f64 / total
        })
        .collect();
    DiffSignal::new(fractions)
}

/// Convenience wrapper deriving HSV frames from RGB.
pub fn frame_diff_fraction_rgb(rgb: &[Frame], pixel_tol: f64) -> Result<DiffSignal> {
    let hsv: Vec<Frame> = rgb.iter().map(Frame::to_hsv).collect();
    frame_diff_fraction(rgb, &hsv, pixel_tol)
}

/// Frame indices that start a new shot: `t + 1` for every `sig[t] > threshold`.
pub fn detect_change_points(sig: &DiffSignal, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} outside (0, 1]")));
    }
    Ok(sig
        .fractions
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(t, _)| t + 1)
        .collect())
}

/// Turns shot boundaries into clips whose lengths lie in `[min_len, max_len]`.
///
/// Shots shorter than `min_len` are merged into the following shot (a short
/// trailing shot merges backward), then shots longer than `max_len` are
/// split into `⌈len/max_len⌉` parts whose sizes differ by at most one.
pub fn normalize_clips(boundaries: &[usize], total_frames: usize, min_len: usize, max_len: usize) -> Result<ClipList> {
    if min_len == 0 || 2 * min_len > max_len + 1 {
        // Splitting guarantees parts >= max_len/2 only when 2·min <= max + 1.
        return Err(Error::InvalidParameter(format!(
            "clip bounds [{min_len}, {max_len}] cannot be satisfied by merge-then-split"
        )));
    }
    if total_frames < min_len {
        return Err(Error::TooFewFrames {
            video: String::new(),
            total_frames,
            min_len,
        });
    }
    if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.last().is_some_and(|&b| b >= total_frames) {
        return Err(Error::InvalidParameter(
            "boundaries must be strictly increasing and below total_frames".into(),
        ));
    }

    let mut starts: Vec<usize> = std::iter::once(0).chain(boundaries.iter().copied().filter(|&b| b > 0)).collect();
    starts.dedup();
    let shots: Vec<[usize; 2]> = starts
        .iter()
        .enumerate()
        .map(|(i, &a)| [a, starts.get(i + 1).copied().unwrap_or(total_frames)])
        .collect();

    let mut merged: Vec<[usize; 2]> = Vec::with_capacity(shots.len());
    let mut pending: Option<usize> = None;
    for [a, b] in shots {
        let start = pending.take().unwrap_or(a);
        if b - start < min_len {
            pending = Some(start);
        } else {
            merged.push([start, b]);
        }
    }
    if let Some(start) = pending {
        match merged.last_mut() {
            Some(last) => last[1] = total_frames,
            None => merged.push([start, total_frames]),
        }
    }

    let mut clips = Vec::with_capacity(merged.len());
    for [a, b] in merged {
        let len = b - a;
        let parts = len.div_ceil(max_len);
        let (base, extra) = (len / parts, len % parts);
        let mut at = a;
        for p in 0..parts {
            let size = base + usize::from(p < extra);
            clips.push([at, at + size]);
            at += size;
        }
    }
    Ok(ClipList::new(None, clips))
}

/// `detect_change_points` followed by `normalize_clips` with default bounds.
pub fn segment_signal(sig: &DiffSignal, threshold: f64) -> Result<ClipList> {
    let boundaries = detect_change_points(sig, threshold)?;
    normalize_clips(&boundaries, sig.total_frames(), MIN_CLIP_LEN, MAX_CLIP_LEN)
}
