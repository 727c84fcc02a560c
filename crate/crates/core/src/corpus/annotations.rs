use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

pub const MIN_SCORE: u8 = 1;
pub const MAX_SCORE: u8 = 3;

/// One row of the annotation CSV
/// (`video_id,concept_id,annotator_id,clip_index,score`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub video_id: String,
    pub concept_id: String,
    pub annotator_id: String,
    pub clip_index: usize,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey {
    pub concept_id: String,
    pub video_id: String,
    pub annotator_id: String,
}

/// Validated clip importance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    entries: Vec<Annotation>,
    clip_counts: BTreeMap<String, usize>,
}

impl AnnotationSet {
    pub fn new(entries: Vec<Annotation>, corpus: &Corpus) -> Result<Self> {
        let clip_counts = corpus
            .videos()
            .iter()
            .map(|v| (v.video_id().to_string(), v.rows()))
            .collect();
        Self::with_clip_counts(entries, clip_counts)
    }

    /// Validates against explicit per-video clip counts instead of a corpus.
    pub fn with_clip_counts(entries: Vec<Annotation>, clip_counts: BTreeMap<String, usize>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for a in &entries {
            if !(MIN_SCORE..=MAX_SCORE).contains(&a.score) {
                return Err(Error::Annotation(format!(
                    "score {} outside {MIN_SCORE}..={MAX_SCORE} for video {} clip {}",
                    a.score, a.video_id, a.clip_index
                )));
            }
            let t = *clip_counts
                .get(&a.video_id)
                .ok_or_else(|| Error::Annotation(format!("unknown video {}", a.video_id)))?;
            if a.clip_index >= t {
                return Err(Error::Annotation(format!(
                    "clip_index {} out of range for video {} with {t} clips",
                    a.clip_index, a.video_id
                )));
            }
            let key = (&a.video_id, &a.concept_id, &a.annotator_id, a.clip_index);
            if !seen.insert(key) {
                return Err(Error::Duplicate {
                    what: "annotation",
                    key: format!("{},{},{},{}", a.video_id, a.concept_id, a.annotator_id, a.clip_index),
                });
            }
        }
        Ok(Self { entries, clip_counts })
    }

    pub fn entries(&self) -> &[Annotation] {
        &self.entries
    }

    pub fn clip_count(&self, video_id: &str) -> Option<usize> {
        self.clip_counts.get(video_id).copied()
    }

    /// Dense per-clip score vector for every annotated
    /// (concept, video, annotator) triple. Clips the annotator left unscored
    /// get the minimum score.
    pub fn score_vectors(&self) -> BTreeMap<TripleKey, Vec<f64>> {
        let mut out: BTreeMap<TripleKey, Vec<f64>> = BTreeMap::new();
        for a in &self.entries {
            let t = self.clip_counts[&a.video_id];
            let key = TripleKey {
                concept_id: a.concept_id.clone(),
                video_id: a.video_id.clone(),
                annotator_id: a.annotator_id.clone(),
            };
            out.entry(key).or_insert_with(|| vec![MIN_SCORE as f64; t])[a.clip_index] = a.score as f64;
        }
        out
    }
}

pub fn load_annotations(csv_path: impl AsRef<Path>, corpus: &Corpus) -> Result<AnnotationSet> {
    let path = csv_path.as_ref();
    let entries = read_annotation_rows(path)?;
    AnnotationSet::new(entries, corpus)
}

pub(crate) fn read_annotation_rows(path: &Path) -> Result<Vec<Annotation>> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let expected = ["video_id", "concept_id", "annotator_id", "clip_index", "score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(csv_err(format!("header must be {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize::<RawRow>() {
        let r = rec.map_err(|e| csv_err(e.to_string()))?;
        let score = u8::try_from(r.score)
            .ok()
            .filter(|s| (MIN_SCORE..=MAX_SCORE).contains(s))
            .ok_or_else(|| Error::Annotation(format!("score {} outside {MIN_SCORE}..={MAX_SCORE}", r.score)))?;
        rows.push(Annotation {
            video_id: r.video_id,
            concept_id: r.concept_id,
            annotator_id: r.annotator_id,
            clip_index: r.clip_index,
            score,
        });
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct RawRow {
    video_id: String,
    concept_id: String,
    annotator_id: String,
    clip_index: usize,
    score: i64,
}

pub fn write_annotations(path: impl AsRef<Path>, entries: &[Annotation]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    for a in entries {
        w.serialize(a).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
