//! Clustering baseline: k-means over all clips of a group, then per video
//! the clips nearest the centers of the largest clusters.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cccp::{Summary, VideoSummary};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::variance::validate_s;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub clusters: usize,
    pub max_iters: usize,
    /// Relative inertia improvement below which iteration stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            clusters: 20,
            max_iters: 300,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Seeded k-means++ initialization followed by Lloyd iterations. The
/// cluster count drops to the number of distinct points when needed.
pub fn kmeans(points: &[&[f64]], opts: &KMeansOptions) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(crate::error::Error::Empty("k-means input"));
    }
    let distinct = points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<BTreeSet<_>>()
        .len();
    let k = opts.clusters.max(1).min(distinct);
    if k < opts.clusters {
        log::warn!("k-means: only {distinct} distinct points, using {k} clusters");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        centers.push(points[pick].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assignments = vec![0; points.len()];
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut next = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centers);
            *a = c;
            next += d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let improved = inertia - next;
        inertia = next;
        if improved.is_finite() && improved <= opts.tol * inertia.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // final assignment against the final centers
    inertia = 0.0;
    for (a, p) in assignments.iter_mut().zip(points) {
        let (c, d) = nearest(p, &centers);
        *a = c;
        inertia += d;
    }
    let mut sizes = vec![0; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    Ok(KMeansResult {
        centers,
        assignments,
        sizes,
        inertia,
        iterations,
    })
}

/// Clusters each group's clips and, for every video, walks the clusters from
/// largest to smallest picking the video's unpicked clip nearest each center
/// until `s` clips are chosen. Picked clips score `(s − r)/s` for pick order
/// `r`; the rest score 0.
pub fn kmeans_baseline(corpus: &Corpus, s: usize, opts: &KMeansOptions) -> Result<Summary> {
    validate_s(corpus, s)?;
    let mut videos = Vec::with_capacity(corpus.num_videos());
    for g in 0..corpus.num_groups() {
        let range = corpus.group_range(g);
        let points: Vec<&[f64]> = range.clone().flat_map(|i| corpus.video(i).iter_rows()).collect();
        let result = kmeans(&points, opts)?;
        let mut order: Vec<usize> = (0..result.centers.len()).collect();
        order.sort_by(|&a, &b| result.sizes[b].cmp(&result.sizes[a]).then(a.cmp(&b)));

        for i in range {
            let video = corpus.video(i);
            let mut taken = vec![false; video.rows()];
            let mut picks = Vec::with_capacity(s);
            'fill: loop {
                for &c in &order {
                    if picks.len() == s {
                        break 'fill;
                    }
                    let center = &result.centers[c];
                    let best = (0..video.rows())
                        .filter(|&t| !taken[t])
                        .map(|t| (t, sq_dist(video.row(t), center)))
                        .fold(None, |acc: Option<(usize, f64)>, (t, d)| match acc {
                            Some((_, bd)) if bd <= d => acc,
                            _ => Some((t, d)),
                        });
                    let (t, _) = best.expect("s <= T leaves an unpicked clip");
                    taken[t] = true;
                    picks.push(t);
                }
            }
            let mut scores = vec![0.0; video.rows()];
            for (r, &t) in picks.iter().enumerate() {
                scores[t] = (s - r) as f64 / s as f64;
            }
            let mut selected = picks;
            selected.sort_unstable();
            videos.push(VideoSummary {
                id: video.video_id().to_string(),
                selected,
                scores,
            });
        }
    }
    Ok(Summary {
        videos,
        objective_history: Vec::new(),
        rounded_objective: None,
        converged: true,
        qp_warnings: 0,
        polish_swaps: 0,
        config: serde_json::json!({ "method": "kmeans", "s": s, "kmeans": opts }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClipFeatures, VideoEntry};

    fn single_video(rows: Vec<Vec<f64>>) -> Corpus {
        Corpus::new(vec![VideoEntry {
            features: ClipFeatures::from_rows("v", &rows).unwrap(),
            group: "G".into(),
            clips: None,
        }])
        .unwrap()
    }

    #[test]
    fn picks_from_the_larger_cloud() {
        // 5 points around (10, 10), 2 points around (0, 0)
        let rows = vec![
            vec![0.0, 0.1],
            vec![10.0, 10.0],
            vec![10.2, 9.9],
            vec![0.1, 0.0],
            vec![9.8, 10.1],
            vec![10.1, 10.2],
            vec![9.9, 9.8],
        ];
        let c = single_video(rows.clone());
        let opts = KMeansOptions {
            clusters: 2,
            ..Default::default()
        };
        let s = kmeans_baseline(&c, 1, &opts).unwrap();
        let pick = s.videos[0].selected[0];
        // centroid of the large cloud is (10, 10); (10, 10) itself is nearest
        assert_eq!(pick, 1);
    }

    #[test]
    fn identical_clips_use_lowest_indices() {
        let c = single_video(vec![vec![1.0, 1.0]; 6]);
        let s = kmeans_baseline(&c, 3, &KMeansOptions::default()).unwrap();
        assert_eq!(s.videos[0].selected, vec![0, 1, 2]);
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let c = single_video(rows);
        let opts = KMeansOptions {
            clusters: 5,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(kmeans_baseline(&c, 4, &opts).unwrap(), kmeans_baseline(&c, 4, &opts).unwrap());
    }

    #[test]
    fn kmeans_separates_clouds() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let r = kmeans(&refs, &KMeansOptions { clusters: 2, ..Default::default() }).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 0.01).abs() < 1e-12);
    }
}
