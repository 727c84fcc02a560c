//! Grouped clip-feature corpora and their on-disk formats.

mod annotations;
pub mod vpsf;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use annotations::{load_annotations, write_annotations, Annotation, AnnotationSet, TripleKey};
pub use vpsf::{read_features, write_features};

use crate::error::{Error, Result};
use crate::segment::ClipList;

/// Features of one video, one row per clip, promoted to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    video_id: String,
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ClipFeatures {
    pub fn new(video_id: impl Into<String>, rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let video_id = video_id.into();
        if rows == 0 || dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "video {video_id}: feature matrix must be non-empty, got {rows}x{dim}"
            )));
        }
        if data.len() != rows * dim {
            return Err(Error::ShapeMismatch(format!(
                "video {video_id}: {} values for a {rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                video: video_id,
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self {
            video_id,
            rows,
            dim,
            data,
        })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let video_id = video_id.into();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch(format!(
                "video {video_id}: ragged rows ({} vs {dim})",
                bad.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(video_id, rows.len(), dim, data)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Indices of rows whose Euclidean norm is exactly zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        self.iter_rows()
            .enumerate()
            .filter(|(_, r)| r.iter().all(|&v| v == 0.0))
            .map(|(t, _)| t)
            .collect()
    }
}

/// Video-to-group assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    labels: Vec<String>,
    assignments: BTreeMap<String, usize>,
    group_sizes: Vec<usize>,
}

impl Grouping {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn group_of(&self, video_id: &str) -> Option<usize> {
        self.assignments.get(video_id).copied()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn num_groups(&self) -> usize {
        self.labels.len()
    }
}

/// One video as handed to [`Corpus::new`].
#[derive(Debug, Clone)]
pub struct VideoEntry {
    pub features: ClipFeatures,
    pub group: String,
    pub clips: Option<ClipList>,
}

/// A grouped corpus with videos stored group-contiguously.
///
/// Group `k` occupies videos `group_range(k)`, and within a group videos are
/// sorted by id. Global clip indices follow the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    videos: Vec<ClipFeatures>,
    clips: Vec<Option<ClipList>>,
    video_groups: Vec<usize>,
    group_ranges: Vec<Range<usize>>,
    offsets: Vec<usize>,
    grouping: Grouping,
    dim: usize,
}

impl Corpus {
    /// Builds a corpus whose group labels are ordered lexicographically.
    pub fn new(entries: Vec<VideoEntry>) -> Result<Self> {
        Self::with_labels(entries, None)
    }

    /// Builds a corpus. When `labels` is given it fixes the group order and
    /// any video carrying another label is rejected.
    pub fn with_labels(mut entries: Vec<VideoEntry>, labels: Option<Vec<String>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("corpus has no videos"));
        }
        let labels = match labels {
            Some(labels) => {
                let mut seen = BTreeSet::new();
                for l in &labels {
                    if !seen.insert(l.as_str()) {
                        return Err(Error::Duplicate {
                            what: "group label",
                            key: l.clone(),
                        });
                    }
                }
                if let Some(e) = entries.iter().find(|e| !seen.contains(e.group.as_str())) {
                    return Err(Error::UnknownGroup {
                        video: e.features.video_id.clone(),
                        group: e.group.clone(),
                    });
                }
                labels
            }
            None => entries
                .iter()
                .map(|e| e.group.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        if let Some(e) = entries.iter().find(|e| e.group.is_empty()) {
            return Err(Error::UnknownGroup {
                video: e.features.video_id.clone(),
                group: String::new(),
            });
        }
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();

        let dim = entries[0].features.dim;
        let mut ids = BTreeSet::new();
        for e in &entries {
            if e.features.dim != dim {
                return Err(Error::DimensionMismatch {
                    video: e.features.video_id.clone(),
                    expected: dim,
                    found: e.features.dim,
                });
            }
            if !ids.insert(e.features.video_id.clone()) {
                return Err(Error::Duplicate {
                    what: "video id",
                    key: e.features.video_id.clone(),
                });
            }
            if let Some(clips) = &e.clips {
                if clips.clips.len() != e.features.rows {
                    return Err(Error::ShapeMismatch(format!(
                        "video {}: {} clip ranges for {} feature rows",
                        e.features.video_id,
                        clips.clips.len(),
                        e.features.rows
                    )));
                }
            }
            let zeros = e.features.zero_rows();
            if !zeros.is_empty() {
                log::warn!(
                    "video {}: {} zero-norm clip rows (first at {})",
                    e.features.video_id,
                    zeros.len(),
                    zeros[0]
                );
            }
        }

        entries.sort_by(|a, b| {
            (index[a.group.as_str()], &a.features.video_id).cmp(&(index[b.group.as_str()], &b.features.video_id))
        });

        let mut group_sizes = vec![0; labels.len()];
        let mut assignments = BTreeMap::new();
        let mut video_groups = Vec::with_capacity(entries.len());
        let mut offsets = Vec::with_capacity(entries.len() + 1);
        offsets.push(0);
        let mut videos = Vec::with_capacity(entries.len());
        let mut clips = Vec::with_capacity(entries.len());
        for e in entries {
            let k = index[e.group.as_str()];
            group_sizes[k] += 1;
            assignments.insert(e.features.video_id.clone(), k);
            video_groups.push(k);
            offsets.push(offsets.last().unwrap() + e.features.rows);
            videos.push(e.features);
            clips.push(e.clips);
        }
        let mut group_ranges = Vec::with_capacity(labels.len());
        let mut start = 0;
        for &n in &group_sizes {
            group_ranges.push(start..start + n);
            start += n;
        }

        Ok(Self {
            videos,
            clips,
            video_groups,
            group_ranges,
            offsets,
            grouping: Grouping {
                labels,
                assignments,
                group_sizes,
            },
            dim,
        })
    }

    pub fn videos(&self) -> &[ClipFeatures] {
        &self.videos
    }

    pub fn video(&self, i: usize) -> &ClipFeatures {
        &self.videos[i]
    }

    pub fn clip_ranges(&self, i: usize) -> Option<&ClipList> {
        self.clips[i].as_ref()
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    pub fn num_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn num_groups(&self) -> usize {
        self.grouping.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_clips(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Start offset of every video in the stacked clip vector, plus a final
    /// entry equal to [`Corpus::total_clips`].
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn clip_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn group_of_video(&self, i: usize) -> usize {
        self.video_groups[i]
    }

    /// Videos belonging to group `k`, as a contiguous index range.
    pub fn group_range(&self, k: usize) -> Range<usize> {
        self.group_ranges[k].clone()
    }

    pub fn min_clips(&self) -> usize {
        self.videos.iter().map(ClipFeatures::rows).min().unwrap_or(0)
    }

    /// Video index owning global clip index `t`.
    pub fn video_of_clip(&self, t: usize) -> usize {
        assert!(t < self.total_clips(), "clip index {t} out of range");
        self.offsets.partition_point(|&o| o <= t) - 1
    }

    pub fn clip_row(&self, t: usize) -> &[f64] {
        let i = self.video_of_clip(t);
        self.videos[i].row(t - self.offsets[i])
    }

    pub fn position(&self, video_id: &str) -> Option<usize> {
        self.videos.iter().position(|v| v.video_id == video_id)
    }
}

/// JSON manifest describing a corpus on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Optional explicit group order; videos naming any other label are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub id: String,
    pub group: String,
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clips: Option<PathBuf>,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a manifest and every file it references. Relative paths resolve
/// against the manifest's directory.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::with_capacity(manifest.videos.len());
    for v in &manifest.videos {
        let features = read_features(base.join(&v.features), &v.id)?;
        let clips = match &v.clips {
            Some(p) => Some(ClipList::read_json(base.join(p))?),
            None => None,
        };
        entries.push(VideoEntry {
            features,
            group: v.group.clone(),
            clips,
        });
    }
    Corpus::with_labels(entries, manifest.groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, group: &str, rows: &[Vec<f64>]) -> VideoEntry {
        VideoEntry {
            features: ClipFeatures::from_rows(id, rows).unwrap(),
            group: group.into(),
            clips: None,
        }
    }

    #[test]
    fn sorts_group_contiguously() {
        let c = Corpus::new(vec![
            entry("v3", "A", &[vec![1.0]]),
            entry("v1", "B", &[vec![1.0], vec![2.0]]),
            entry("v2", "A", &[vec![1.0]]),
        ])
        .unwrap();
        let ids: Vec<_> = c.videos().iter().map(|v| v.video_id()).collect();
        assert_eq!(ids, ["v2", "v3", "v1"]);
        assert_eq!(c.grouping().group_sizes(), &[2, 1]);
        assert_eq!(c.group_range(1), 2..3);
        assert_eq!(c.offsets(), &[0, 1, 2, 4]);
        assert_eq!(c.video_of_clip(3), 2);
        assert_eq!(c.video_of_clip(1), 1);
        assert_eq!(c.clip_row(3), &[2.0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = Corpus::new(vec![
            entry("v1", "A", &[vec![0.0; 4]]),
            entry("v2", "B", &[vec![0.0; 5]]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn explicit_labels_reject_unknown_group() {
        let err = Corpus::with_labels(vec![entry("v1", "C", &[vec![1.0]])], Some(vec!["A".into(), "B".into()]))
            .unwrap_err();
        assert!(matches!(err, Error::UnknownGroup { .. }));
    }

    #[test]
    fn explicit_labels_fix_group_order() {
        let c = Corpus::with_labels(
            vec![entry("a", "A", &[vec![1.0]]), entry("b", "B", &[vec![1.0]])],
            Some(vec!["B".into(), "A".into()]),
        )
        .unwrap();
        assert_eq!(c.video(0).video_id(), "b");
        assert_eq!(c.grouping().group_of("a"), Some(1));
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        assert!(matches!(
            ClipFeatures::new("v", 1, 2, vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite { col: 1, .. })
        ));
        let err = Corpus::new(vec![entry("v", "A", &[vec![1.0]]), entry("v", "B", &[vec![1.0]])]).unwrap_err();
        assert!(matches!(err, Error::Duplicate { .. }));
    }

    #[test]
    fn zero_rows_are_allowed() {
        let c = Corpus::new(vec![entry("v", "A", &[vec![0.0, 0.0], vec![1.0, 0.0]])]).unwrap();
        assert_eq!(c.video(0).zero_rows(), vec![0]);
    }
}
