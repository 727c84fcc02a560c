//! Seeded planted corpora with known discriminative clips.
//!
//! Every group `k` gets a prototype `g_k = normalize(sep·o_k + (1−sep)·c_0)`
//! built from orthonormal directions `o_k` and a shared direction `c_0`;
//! smaller `separation` pulls the group prototypes toward each other. Each
//! video holds `s` clips near its group prototype at random positions and
//! fills the rest with clips near the shared prototypes. Features are
//! rounded to `f32` so a dataset written to disk loads back bit-identically.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_features, ClipFeatures, Corpus, Manifest, ManifestVideo, VideoEntry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_groups: usize,
    pub videos_per_group: usize,
    pub clips_per_video: usize,
    pub d: usize,
    pub s: usize,
    pub noise_sigma: f64,
    /// In `(0, 1]`; 1 makes group prototypes mutually orthogonal.
    pub separation: f64,
    /// Number of prototypes shared by all groups.
    pub n_shared: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_groups: 2,
            videos_per_group: 1,
            clips_per_video: 6,
            d: 8,
            s: 2,
            noise_sigma: 0.05,
            separation: 0.8,
            n_shared: 1,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_groups == 0 || self.videos_per_group == 0 || self.s == 0 || self.n_shared == 0 {
            return bad("n_groups, videos_per_group, s and n_shared must be >= 1".into());
        }
        if self.clips_per_video < self.s + 2 {
            return bad(format!(
                "clips_per_video {} must be >= s + 2 = {}",
                self.clips_per_video,
                self.s + 2
            ));
        }
        if !(self.separation > 0.0 && self.separation <= 1.0) {
            return bad(format!("separation {} outside (0, 1]", self.separation));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if self.d < self.n_groups + self.n_shared {
            return bad(format!(
                "d = {} cannot host {} group and {} shared orthogonal directions",
                self.d, self.n_groups, self.n_shared
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub corpus: Corpus,
    /// Planted clip indices per video, in corpus order, sorted.
    pub planted: Vec<Vec<usize>>,
    /// Unit group prototypes, indexed by group.
    pub prototypes: Vec<Vec<f64>>,
    pub params: SynthParams,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn orthonormal(rng: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

pub fn group_label(k: usize) -> String {
    format!("group{k:02}")
}

pub fn video_label(k: usize, j: usize) -> String {
    format!("g{k:02}_v{j:03}")
}

pub fn generate_planted(params: &SynthParams) -> Result<PlantedCorpus> {
    params.validate()?;
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let basis = orthonormal(&mut rng, p.n_groups + p.n_shared, p.d);
    let shared = &basis[p.n_groups..];
    let prototypes: Vec<Vec<f64>> = (0..p.n_groups)
        .map(|k| {
            let mut g: Vec<f64> = basis[k]
                .iter()
                .zip(&shared[0])
                .map(|(o, c)| p.separation * o + (1.0 - p.separation) * c)
                .collect();
            normalize(&mut g);
            g
        })
        .collect();

    let clip = |rng: &mut ChaCha8Rng, proto: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = proto
            .iter()
            .map(|&x| x + p.noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        normalize(&mut v);
        v.iter().map(|&x| x as f32 as f64).collect()
    };

    let mut entries = Vec::new();
    let mut planted_by_id = std::collections::BTreeMap::new();
    for k in 0..p.n_groups {
        for j in 0..p.videos_per_group {
            let id = video_label(k, j);
            let mut planted: Vec<usize> = sample(&mut rng, p.clips_per_video, p.s).into_vec();
            planted.sort_unstable();
            let mut rows = Vec::with_capacity(p.clips_per_video);
            for t in 0..p.clips_per_video {
                let proto = if planted.binary_search(&t).is_ok() {
                    &prototypes[k]
                } else {
                    &shared[rng.random_range(0..shared.len())]
                };
                rows.push(clip(&mut rng, proto));
            }
            entries.push(VideoEntry {
                features: ClipFeatures::from_rows(id.clone(), &rows)?,
                group: group_label(k),
                clips: None,
            });
            planted_by_id.insert(id, planted);
        }
    }
    let corpus = Corpus::new(entries)?;
    let planted = corpus
        .videos()
        .iter()
        .map(|v| planted_by_id[v.video_id()].clone())
        .collect();
    Ok(PlantedCorpus {
        corpus,
        planted,
        prototypes,
        params: *params,
    })
}

/// Fraction of selected clips that are planted, pooled over videos.
pub fn planted_precision(selected: &[Vec<usize>], planted: &[Vec<usize>]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (sel, pl) in selected.iter().zip(planted) {
        total += sel.len();
        hit += sel.iter().filter(|t| pl.contains(t)).count();
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub params: SynthParams,
    pub videos: Vec<PlantedVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVideo {
    pub id: String,
    pub group: String,
    pub planted: Vec<usize>,
}

/// Writes `manifest.json`, one VPSF file per video under `features/`, and
/// `planted.json`. Returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, planted: &PlantedCorpus) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let feat_dir = dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let corpus = &planted.corpus;
    let mut videos = Vec::with_capacity(corpus.num_videos());
    let mut truth = Vec::with_capacity(corpus.num_videos());
    for (i, v) in corpus.videos().iter().enumerate() {
        let rel = PathBuf::from("features").join(format!("{}.vpsf", v.video_id()));
        write_features(dir.join(&rel), v)?;
        let group = corpus.grouping().labels()[corpus.group_of_video(i)].clone();
        videos.push(ManifestVideo {
            id: v.video_id().to_string(),
            group: group.clone(),
            features: rel,
            clips: None,
        });
        truth.push(PlantedVideo {
            id: v.video_id().to_string(),
            group,
            planted: planted.planted[i].clone(),
        });
    }
    let manifest = Manifest { groups: None, videos };
    let manifest_path = dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    write_json(
        dir.join("planted.json"),
        &PlantedTruth {
            params: planted.params,
            videos: truth,
        },
    )?;
    Ok(manifest_path)
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let p = SynthParams { seed: 3, ..Default::default() };
        assert_eq!(generate_planted(&p).unwrap(), generate_planted(&p).unwrap());
        let q = SynthParams { seed: 4, ..p };
        assert_ne!(generate_planted(&p).unwrap().corpus, generate_planted(&q).unwrap().corpus);
    }

    #[test]
    fn rows_are_unit_norm_and_planted_valid() {
        let p = SynthParams {
            n_groups: 3,
            videos_per_group: 2,
            clips_per_video: 9,
            d: 16,
            s: 3,
            n_shared: 2,
            seed: 9,
            ..Default::default()
        };
        let pc = generate_planted(&p).unwrap();
        for v in pc.corpus.videos() {
            for r in v.iter_rows() {
                let n: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-6);
            }
        }
        for (i, pl) in pc.planted.iter().enumerate() {
            assert_eq!(pl.len(), 3);
            assert!(pl.iter().all(|&t| t < pc.corpus.video(i).rows()));
        }
    }

    #[test]
    fn noiseless_planted_clips_equal_prototype() {
        let p = SynthParams {
            noise_sigma: 0.0,
            separation: 1.0,
            seed: 5,
            ..Default::default()
        };
        let pc = generate_planted(&p).unwrap();
        for (i, pl) in pc.planted.iter().enumerate() {
            let k = pc.corpus.group_of_video(i);
            for &t in pl {
                for (a, b) in pc.corpus.video(i).row(t).iter().zip(&pc.prototypes[k]) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
        let dot: f64 = pc.prototypes[0].iter().zip(&pc.prototypes[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn prototype_angles_respect_separation() {
        for sep in [0.05, 0.2, 0.5, 0.8, 1.0] {
            let pc = generate_planted(&SynthParams {
                separation: sep,
                n_groups: 3,
                ..Default::default()
            })
            .unwrap();
            for a in 0..3 {
                for b in a + 1..3 {
                    let cos: f64 = pc.prototypes[a].iter().zip(&pc.prototypes[b]).map(|(x, y)| x * y).sum();
                    assert!(cos.clamp(-1.0, 1.0).acos() >= sep, "sep {sep}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_planted(&SynthParams { clips_per_video: 3, ..Default::default() }).is_err());
        assert!(generate_planted(&SynthParams { d: 2, ..Default::default() }).is_err());
        assert!(generate_planted(&SynthParams { separation: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn precision_counts() {
        assert_eq!(planted_precision(&[vec![0, 1], vec![2, 3]], &[vec![0, 1], vec![2, 4]]), 0.75);
    }
}
