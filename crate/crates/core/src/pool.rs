//! Clip-level features from frame-level features: average pooling followed
//! by l2 normalization.

use crate::corpus::ClipFeatures;
use crate::error::{Error, Result};
use crate::segment::ClipList;

/// Frames covered by one frame-level feature row.
pub const DEFAULT_STRIDE: usize = 16;

/// Pools `frame_features` (row `r` covers frames `[r·stride, (r+1)·stride)`)
/// into one row per clip. A clip owns every row whose frame span intersects
/// it; owned rows are averaged with equal weight and the mean is scaled to
/// unit length. An all-zero mean stays zero and is reported with a warning.
pub fn pool_clip_features(frame_features: &ClipFeatures, clips: &ClipList, stride: usize) -> Result<ClipFeatures> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if clips.clips.is_empty() {
        return Err(Error::Empty("clip list"));
    }
    let d = frame_features.dim();
    let rows = frame_features.rows();
    let mut data = Vec::with_capacity(clips.clips.len() * d);
    let mut zero = 0;
    for &[start, end] in &clips.clips {
        if end <= start {
            return Err(Error::EmptyClip { start, end });
        }
        let first = start / stride;
        let last = ((end - 1) / stride).min(rows.saturating_sub(1));
        if first >= rows || first > last {
            return Err(Error::EmptyClip { start, end });
        }
        let mut mean = vec![0.0; d];
        for r in first..=last {
            for (m, v) in mean.iter_mut().zip(frame_features.row(r)) {
                *m += v;
            }
        }
        let count = (last - first + 1) as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            mean.iter_mut().for_each(|m| *m /= norm);
        } else {
            zero += 1;
        }
        data.extend(mean);
    }
    if zero > 0 {
        log::warn!("{}: {zero} clips pooled to the zero vector", frame_features.video_id());
    }
    ClipFeatures::new(frame_features.video_id(), clips.clips.len(), d, data)
}
