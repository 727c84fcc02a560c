//! Evaluation against human importance annotations.

mod kmeans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, kmeans_baseline, KMeansOptions, KMeansResult};

use crate::cccp::Summary;
use crate::corpus::{AnnotationSet, Grouping};
use crate::error::{Error, Result};

pub const DEFAULT_RATIO: f64 = 0.3;
pub const DEFAULT_TOP_K: usize = 5;

/// Marks the `⌈ratio·T⌉` highest-scoring clips as positives; ties go to the
/// lower clip index.
pub fn ground_truth_from_scores(scores: &[f64], ratio: f64) -> Result<Vec<bool>> {
    if scores.is_empty() {
        return Err(Error::Empty("score vector"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!("ratio {ratio} outside (0, 1]")));
    }
    let count = ((ratio * scores.len() as f64).ceil() as usize).clamp(1, scores.len());
    let mut labels = vec![false; scores.len()];
    for i in rank_order(scores).into_iter().take(count) {
        labels[i] = true;
    }
    Ok(labels)
}

/// Indices sorted by descending score, lower index first among ties.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Average precision of a ranking. With `cutoff = Some(k)` only the top `k`
/// ranks count and the sum is divided by `min(k, #positives)`.
pub fn average_precision(labels: &[bool], scores: &[f64], cutoff: Option<usize>) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let depth = cutoff.unwrap_or(labels.len()).min(labels.len());
    let denom = match cutoff {
        None if positives == 0 => return Err(Error::NoPositives),
        None => positives,
        Some(k) => k.min(positives),
    };
    if denom == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in rank_order(scores).iter().take(depth).enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleAp {
    pub concept_id: String,
    pub video_id: String,
    pub annotator_id: String,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMap {
    pub group: String,
    pub map: f64,
    pub terms: usize,
    pub concepts: usize,
    pub videos: usize,
    pub annotators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: Option<usize>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub groups: Vec<GroupMap>,
    pub overall: f64,
    pub triples: Vec<TripleAp>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Continuous per-video scores from a summary, keyed by video id.
pub fn predictions_from_summary(summary: &Summary) -> BTreeMap<String, Vec<f64>> {
    summary.videos.iter().map(|v| (v.id.clone(), v.scores.clone())).collect()
}

/// AP of every annotated (concept, video, annotator) triple against the
/// prediction for that video, averaged per group and overall.
///
/// Each triple's ground truth is the top `ratio` of that annotator's clip
/// scores. A group's MAP is the mean over its triples, which equals the
/// `1/(CIJ) ΣΣΣ AP` aggregation whenever every video has the same concepts
/// and annotators.
pub fn map_report(
    predictions: &BTreeMap<String, Vec<f64>>,
    annotations: &AnnotationSet,
    grouping: &Grouping,
    k: Option<usize>,
    ratio: f64,
) -> Result<EvalReport> {
    let mut triples = Vec::new();
    let mut per_group: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (key, scores) in annotations.score_vectors() {
        let pred = predictions
            .get(&key.video_id)
            .ok_or_else(|| Error::MissingPrediction(key.video_id.clone()))?;
        if pred.len() != scores.len() {
            return Err(Error::ShapeMismatch(format!(
                "prediction for {} has {} clips, annotations have {}",
                key.video_id,
                pred.len(),
                scores.len()
            )));
        }
        let group = grouping.group_of(&key.video_id).ok_or_else(|| {
            Error::Annotation(format!("video {} is not part of the grouping", key.video_id))
        })?;
        let labels = ground_truth_from_scores(&scores, ratio)?;
        let ap = average_precision(&labels, pred, k)?;
        per_group.entry(group).or_default().push(triples.len());
        triples.push(TripleAp {
            concept_id: key.concept_id,
            video_id: key.video_id,
            annotator_id: key.annotator_id,
            ap,
        });
    }
    if triples.is_empty() {
        return Err(Error::Empty("annotation set"));
    }
    let groups = per_group
        .into_iter()
        .map(|(g, idx)| {
            let distinct = |f: fn(&TripleAp) -> &str| {
                idx.iter()
                    .map(|&i| f(&triples[i]))
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
            };
            GroupMap {
                group: grouping.labels()[g].clone(),
                map: idx.iter().map(|&i| triples[i].ap).sum::<f64>() / idx.len() as f64,
                terms: idx.len(),
                concepts: distinct(|t| &t.concept_id),
                videos: distinct(|t| &t.video_id),
                annotators: distinct(|t| &t.annotator_id),
            }
        })
        .collect();
    let overall = triples.iter().map(|t| t.ap).sum::<f64>() / triples.len() as f64;
    Ok(EvalReport {
        groups,
        overall,
        triples,
        config: EvalConfig { k, ratio },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Mean centered cosine over pairs scored for the same concept.
    pub inner_concept: Option<f64>,
    /// Mean centered cosine over pairs scored for different concepts.
    pub inter_concept: Option<f64>,
    pub inner_pairs: usize,
    pub inter_pairs: usize,
    /// Score vectors left constant by centering, excluded from all pairs.
    pub skipped: usize,
}

/// Mean-centered cosine similarity between annotators' score vectors of the
/// same video, split by whether the two vectors target the same concept.
pub fn inter_annotator_similarity(annotations: &AnnotationSet) -> Result<SimilarityReport> {
    let annotators: std::collections::BTreeSet<_> =
        annotations.entries().iter().map(|a| a.annotator_id.as_str()).collect();
    if annotators.len() < 2 {
        return Err(Error::InvalidParameter("need at least two annotators".into()));
    }
    let mut by_video: BTreeMap<String, Vec<(String, Vec<f64>)>> = BTreeMap::new();
    let mut skipped = 0;
    for (key, mut scores) in annotations.score_vectors() {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        scores.iter_mut().for_each(|v| *v -= mean);
        let norm = scores.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            log::warn!(
                "constant scores for video {} concept {} annotator {}; skipped",
                key.video_id,
                key.concept_id,
                key.annotator_id
            );
            skipped += 1;
            continue;
        }
        scores.iter_mut().for_each(|v| *v /= norm);
        by_video.entry(key.video_id).or_default().push((key.concept_id, scores));
    }
    let (mut inner, mut inner_n, mut inter, mut inter_n) = (0.0, 0usize, 0.0, 0usize);
    for vectors in by_video.values() {
        for (a, (ca, va)) in vectors.iter().enumerate() {
            for (cb, vb) in &vectors[a + 1..] {
                let cos: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                if ca == cb {
                    inner += cos;
                    inner_n += 1;
                } else {
                    inter += cos;
                    inter_n += 1;
                }
            }
        }
    }
    Ok(SimilarityReport {
        inner_concept: (inner_n > 0).then(|| inner / inner_n as f64),
        inter_concept: (inter_n > 0).then(|| inter / inter_n as f64),
        inner_pairs: inner_n,
        inter_pairs: inter_n,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Annotation;

    #[test]
    fn ground_truth_counts_and_ties() {
        let gt = ground_truth_from_scores(&[1.0; 10], 0.3).unwrap();
        assert_eq!(gt.iter().filter(|&&b| b).count(), 3);
        assert!(gt[0] && gt[1] && gt[2]);
        let gt = ground_truth_from_scores(&[3.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 0.3).unwrap();
        let pos: Vec<usize> = (0..10).filter(|&i| gt[i]).collect();
        assert_eq!(pos, vec![0, 1, 2]);
        assert!(ground_truth_from_scores(&[], 0.3).is_err());
        assert!(ground_truth_from_scores(&[1.0], 0.0).is_err());
        // ⌈0.3·7⌉ = 3
        assert_eq!(ground_truth_from_scores(&[1.0; 7], 0.3).unwrap().iter().filter(|&&b| b).count(), 3);
    }

    #[test]
    fn ap_hand_cases() {
        let ap = average_precision(&[true, false, true, false], &[0.9, 0.8, 0.7, 0.6], None).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(&[true, true, false], &[0.9, 0.8, 0.1], None).unwrap(), 1.0);
        assert_eq!(average_precision(&[true, true, true], &[0.1, 0.5, 0.2], None).unwrap(), 1.0);
        assert!(matches!(
            average_precision(&[false, false], &[0.1, 0.2], None),
            Err(Error::NoPositives)
        ));
        assert_eq!(average_precision(&[false, false], &[0.1, 0.2], Some(5)).unwrap(), 0.0);
    }

    #[test]
    fn ap_with_cutoff() {
        // ranks: 0(+), 1(-), 2(+), 3(+); top-2 holds one hit of min(2, 3) possible
        let labels = [true, false, true, true];
        let scores = [0.9, 0.8, 0.7, 0.6];
        assert!((average_precision(&labels, &scores, Some(2)).unwrap() - 0.5).abs() < 1e-15);
    }

    fn ann(v: &str, c: &str, a: &str, clip: usize, score: u8) -> Annotation {
        Annotation {
            video_id: v.into(),
            concept_id: c.into(),
            annotator_id: a.into(),
            clip_index: clip,
            score,
        }
    }

    fn set(entries: Vec<Annotation>) -> AnnotationSet {
        AnnotationSet::with_clip_counts(entries, [("v".to_string(), 3)].into()).unwrap()
    }

    #[test]
    fn similarity_cases() {
        let mut e = Vec::new();
        for (a, scores) in [("a1", [1, 2, 3]), ("a2", [1, 2, 3]), ("a3", [3, 2, 1])] {
            for (t, &s) in scores.iter().enumerate() {
                let concept = if a == "a3" { "c2" } else { "c1" };
                e.push(ann("v", concept, a, t, s));
            }
        }
        let r = inter_annotator_similarity(&set(e)).unwrap();
        assert!((r.inner_concept.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.inter_concept.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!((r.inner_pairs, r.inter_pairs), (1, 2));
    }

    #[test]
    fn similarity_skips_constant_and_needs_two_annotators() {
        let e = vec![ann("v", "c", "a1", 0, 2), ann("v", "c", "a1", 1, 2), ann("v", "c", "a1", 2, 2)];
        assert!(inter_annotator_similarity(&set(e.clone())).is_err());
        let mut e2 = e;
        e2.extend([ann("v", "c", "a2", 0, 1), ann("v", "c", "a2", 1, 3)]);
        // a1's [2, 2, 2] centers to zero
        let r = inter_annotator_similarity(&set(e2)).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.inner_concept, None);
    }

    #[test]
    fn orthogonal_centered_vectors() {
        // centered (1,0,-1) and (1,-2,1) are orthogonal
        let mut e = Vec::new();
        for (t, s) in [3u8, 2, 1].into_iter().enumerate() {
            e.push(ann("v", "c", "a1", t, s));
        }
        for (t, s) in [3u8, 1, 3].into_iter().enumerate() {
            e.push(ann("v", "c", "a2", t, s));
        }
        let r = inter_annotator_similarity(&set(e)).unwrap();
        assert!(r.inner_concept.unwrap().abs() < 1e-12);
    }
}
