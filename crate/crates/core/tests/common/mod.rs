//! Reference computations that do not share code paths with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpsumm::corpus::{ClipFeatures, Corpus, VideoEntry};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random corpus with N ≤ max_videos, K ≤ max_groups (every group non-empty),
/// 1 ≤ T_i ≤ max_t, 1 ≤ d ≤ max_d, entries uniform in [-1, 1].
pub fn random_corpus(r: &mut ChaCha8Rng, max_videos: usize, max_groups: usize, max_t: usize, max_d: usize) -> Corpus {
    let n = r.random_range(1..=max_videos);
    let k = r.random_range(1..=max_groups.min(n));
    let d = r.random_range(1..=max_d);
    let entries = (0..n)
        .map(|i| {
            let t = r.random_range(1..=max_t);
            let data = (0..t * d).map(|_| r.random_range(-1.0..1.0)).collect();
            // first k videos cover every group, the rest land anywhere
            let g = if i < k { i } else { r.random_range(0..k) };
            VideoEntry {
                features: ClipFeatures::new(format!("v{i}"), t, d, data).unwrap(),
                group: format!("g{g}"),
                clips: None,
            }
        })
        .collect();
    Corpus::new(entries).unwrap()
}

/// Random binary z with exactly s ones per video.
pub fn random_binary(r: &mut ChaCha8Rng, corpus: &Corpus, s: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(corpus.total_clips());
    for v in corpus.videos() {
        let mut zi = vec![0.0; v.rows()];
        for t in sample(r, v.rows(), s) {
            zi[t] = 1.0;
        }
        z.extend(zi);
    }
    z
}

/// Random feasible fractional z: a binary point mixed with the uniform point.
pub fn random_fractional(r: &mut ChaCha8Rng, corpus: &Corpus, s: usize) -> Vec<f64> {
    let b = random_binary(r, corpus, s);
    let w: f64 = r.random_range(0.0..1.0);
    let mut z = Vec::with_capacity(b.len());
    let mut at = 0;
    for v in corpus.videos() {
        let u = s as f64 / v.rows() as f64;
        for t in 0..v.rows() {
            z.push(w * b[at + t] + (1.0 - w) * u);
        }
        at += v.rows();
    }
    z
}

fn rows_of(corpus: &Corpus, i: usize) -> Vec<Vec<f64>> {
    corpus.video(i).iter_rows().map(|r| r.to_vec()).collect()
}

fn summary_vector(corpus: &Corpus, z: &[f64], i: usize, s: usize) -> Vec<f64> {
    let d = corpus.dim();
    let off = corpus.offsets()[i];
    let mut v = vec![0.0; d];
    for (t, row) in rows_of(corpus, i).iter().enumerate() {
        for j in 0..d {
            v[j] += z[off + t] * row[j];
        }
    }
    v.iter().map(|x| x / s as f64).collect()
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Σ_i Σ_t z_t ‖x_t − v_i‖² with v_i = X_iᵀz_i / s.
pub fn def_inner_summary(corpus: &Corpus, z: &[f64], s: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..corpus.num_videos() {
        let v = summary_vector(corpus, z, i, s);
        let off = corpus.offsets()[i];
        for (t, row) in rows_of(corpus, i).iter().enumerate() {
            total += z[off + t] * sqdist(row, &v);
        }
    }
    total
}

fn group_means(corpus: &Corpus, z: &[f64], s: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = corpus.dim();
    let n = corpus.num_videos();
    let k = corpus.num_groups();
    let mut mu = vec![vec![0.0; d]; k];
    let mut count = vec![0usize; k];
    let mut global = vec![0.0; d];
    for i in 0..n {
        let v = summary_vector(corpus, z, i, s);
        let g = corpus.group_of_video(i);
        count[g] += 1;
        for j in 0..d {
            mu[g][j] += v[j];
            global[j] += v[j] / n as f64;
        }
    }
    for g in 0..k {
        for j in 0..d {
            mu[g][j] /= count[g] as f64;
        }
    }
    (mu, global)
}

/// Σ_k Σ_{i∈k} s‖v_i − μ_k‖².
pub fn def_within_group(corpus: &Corpus, z: &[f64], s: usize) -> f64 {
    let (mu, _) = group_means(corpus, z, s);
    (0..corpus.num_videos())
        .map(|i| s as f64 * sqdist(&summary_vector(corpus, z, i, s), &mu[corpus.group_of_video(i)]))
        .sum()
}

/// Σ_k n_k s‖μ_k − μ̄‖².
pub fn def_between_group(corpus: &Corpus, z: &[f64], s: usize) -> f64 {
    let (mu, global) = group_means(corpus, z, s);
    let sizes = corpus.grouping().group_sizes();
    (0..corpus.num_groups())
        .map(|g| sizes[g] as f64 * s as f64 * sqdist(&mu[g], &global))
        .sum()
}

pub fn quad(m: &DMatrix<f64>, z: &[f64]) -> f64 {
    let v = DVector::from_column_slice(z);
    (v.transpose() * m * &v)[(0, 0)]
}

pub fn matvec(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(z)).iter().copied().collect()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Max absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Capped-simplex projection by walking the sorted breakpoints of the
/// piecewise-linear mass function θ ↦ Σ clip(v − θ, 0, 1) and interpolating
/// on the segment that crosses s.
pub fn projection_oracle(v: &[f64], s: usize) -> Vec<f64> {
    let target = s as f64;
    let mass = |theta: f64| v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).sum::<f64>();
    let mut bps: Vec<f64> = v.iter().flat_map(|&x| [x, x - 1.0]).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    // mass is non-increasing in θ; find adjacent breakpoints a < b with mass(a) >= s >= mass(b)
    let mut theta = bps[0];
    for w in bps.windows(2) {
        let (ma, mb) = (mass(w[0]), mass(w[1]));
        if ma >= target && mb <= target {
            theta = if ma == mb { w[0] } else { w[0] + (ma - target) * (w[1] - w[0]) / (ma - mb) };
            break;
        }
    }
    v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).collect()
}

/// Minimum of zᵀQz − 2bᵀz over the product of capped simplices by
/// enumerating every active set (each coordinate at 0, at 1, or free),
/// solving the equality-constrained stationarity system on the free
/// coordinates, and keeping the best feasible candidate.
pub fn qp_active_set_oracle(q: &DMatrix<f64>, b: &[f64], offsets: &[usize], s: usize) -> (f64, Vec<f64>) {
    let n = b.len();
    let n_videos = offsets.len() - 1;
    let owner: Vec<usize> = (0..n).map(|t| offsets.partition_point(|&o| o <= t) - 1).collect();
    let mut state = vec![0u8; n]; // 0 lower, 1 upper, 2 free
    let mut best = (f64::INFINITY, vec![]);
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for st in state.iter_mut() {
            *st = (c % 3) as u8;
            c /= 3;
        }
        // quick count check per video: ones <= s, ones + free >= s
        let mut ok = true;
        for i in 0..n_videos {
            let (mut ones, mut free) = (0, 0);
            for t in offsets[i]..offsets[i + 1] {
                match state[t] {
                    1 => ones += 1,
                    2 => free += 1,
                    _ => {}
                }
            }
            if ones > s || ones + free < s || (free == 0 && ones != s) {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let free: Vec<usize> = (0..n).filter(|&t| state[t] == 2).collect();
        let mut z: Vec<f64> = state.iter().map(|&st| if st == 1 { 1.0 } else { 0.0 }).collect();
        if !free.is_empty() {
            // Stationarity on free coords: 2 Q_FF z_F + 2 Q_FB z_B − 2 b_F + Pᵀλ = 0,
            // with per-video sums over free coords fixed.
            let videos: Vec<usize> = {
                let mut v: Vec<usize> = free.iter().map(|&t| owner[t]).collect();
                v.dedup();
                v
            };
            let m = free.len() + videos.len();
            let mut kkt = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (a, &ta) in free.iter().enumerate() {
                for (bi, &tb) in free.iter().enumerate() {
                    kkt[(a, bi)] = 2.0 * q[(ta, tb)];
                }
                let mut r = 2.0 * b[ta];
                for t in 0..n {
                    if state[t] == 1 {
                        r -= 2.0 * q[(ta, t)];
                    }
                }
                rhs[a] = r;
                let vi = videos.iter().position(|&v| v == owner[ta]).unwrap();
                kkt[(a, free.len() + vi)] = 1.0;
                kkt[(free.len() + vi, a)] = 1.0;
            }
            for (vi, &v) in videos.iter().enumerate() {
                let ones = (offsets[v]..offsets[v + 1]).filter(|&t| state[t] == 1).count();
                rhs[free.len() + vi] = (s - ones) as f64;
            }
            let svd = kkt.clone().svd(true, true);
            let sol = match svd.solve(&rhs, 1e-12) {
                Ok(x) => x,
                Err(_) => continue,
            };
            if (&kkt * &sol - &rhs).norm() > 1e-8 * (1.0 + rhs.norm()) {
                continue;
            }
            for (a, &t) in free.iter().enumerate() {
                z[t] = sol[a];
            }
        }
        if z.iter().any(|&x| !(-1e-10..=1.0 + 1e-10).contains(&x)) {
            continue;
        }
        let f = quad(q, &z) - 2.0 * z.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        if f < best.0 {
            best = (f, z);
        }
    }
    best
}

/// Dense F, D, C, A assembled entry by entry from their definitions.
pub struct DenseParts {
    pub f: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

pub fn dense_parts(corpus: &Corpus, s: usize) -> DenseParts {
    let n = corpus.total_clips();
    let s = s as f64;
    let big_n = corpus.num_videos() as f64;
    let sizes = corpus.grouping().group_sizes();
    let rows: Vec<Vec<f64>> = (0..n).map(|t| corpus.clip_row(t).to_vec()).collect();
    let video: Vec<usize> = (0..n).map(|t| corpus.video_of_clip(t)).collect();
    let group: Vec<usize> = video.iter().map(|&i| corpus.group_of_video(i)).collect();
    let mut p = DenseParts {
        f: DMatrix::zeros(n, n),
        d: DMatrix::zeros(n, n),
        c: DMatrix::zeros(n, n),
        a: DMatrix::zeros(n, n),
    };
    for i in 0..n {
        for j in 0..n {
            let g: f64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum();
            if i == j {
                p.f[(i, j)] = g;
            }
            if video[i] == video[j] {
                p.d[(i, j)] = g / s;
            }
            if group[i] == group[j] {
                p.c[(i, j)] = g / (sizes[group[i]] as f64 * s);
            }
            p.a[(i, j)] = g / (big_n * s);
        }
    }
    p
}

/// f·F + d·D + c·C + a·A.
pub fn combine(p: &DenseParts, f: f64, d: f64, c: f64, a: f64) -> DMatrix<f64> {
    &p.f * f + &p.d * d + &p.c * c + &p.a * a
}

/// Q = −λ1F + (λ1+λ2)D − (λ2+λ3)C + λ3A.
pub fn dense_objective(p: &DenseParts, l1: f64, l2: f64, l3: f64) -> DMatrix<f64> {
    combine(p, -l1, l1 + l2, -(l2 + l3), l3)
}

/// Minimum of zᵀQz over binary selections with s ones per video, by
/// recursive enumeration.
pub fn exhaustive_min(q: &DMatrix<f64>, offsets: &[usize], s: usize) -> f64 {
    fn rec(q: &DMatrix<f64>, offsets: &[usize], s: usize, video: usize, z: &mut Vec<f64>, best: &mut f64) {
        if video + 1 == offsets.len() {
            *best = best.min(quad(q, z));
            return;
        }
        let (lo, hi) = (offsets[video], offsets[video + 1]);
        let t = hi - lo;
        for mask in 0u32..(1 << t) {
            if mask.count_ones() as usize != s {
                continue;
            }
            for k in 0..t {
                z[lo + k] = if mask >> k & 1 == 1 { 1.0 } else { 0.0 };
            }
            rec(q, offsets, s, video + 1, z, best);
        }
    }
    let mut z = vec![0.0; *offsets.last().unwrap()];
    let mut best = f64::INFINITY;
    rec(q, offsets, s, 0, &mut z, &mut best);
    best
}
