//! Quadratic forms behind the three variance traces.
//!
//! With `X̂` the stacked clip features and `ẑ` the stacked selection vector,
//! four PSD matrices appear:
//!
//! * `F = diag(‖x_t‖²)`
//! * `D = (1/s) ⊕_i X_i X_iᵀ` (block per video)
//! * `C = ⊕_k (1/(n_k s)) X̂_(k) X̂_(k)ᵀ` (block per group)
//! * `A = (1/(N s)) X̂ X̂ᵀ`
//!
//! Inner-summary variance is `ẑᵀ(F−D)ẑ`, within-group `ẑᵀ(D−C)ẑ` and
//! between-group `ẑᵀ(C−A)ẑ`. None of these matrices is materialized on the
//! solve path: [`GramOperators`] applies any linear combination of them via
//! `X_iᵀ z_i` products in `O(ΣT·d)`.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_LAMBDA1: f64 = 0.05;
pub const DEFAULT_LAMBDA2: f64 = 0.5;
pub const DEFAULT_LAMBDA3: f64 = 0.5;
pub const DEFAULT_DENSE_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of inner-summary variance (diversity).
    pub lambda1: f64,
    /// Weight of within-group variance (representativeness).
    pub lambda2: f64,
    /// Weight of between-group variance (discriminativeness).
    pub lambda3: f64,
    /// Clips selected per video.
    pub s: usize,
}

impl Hyperparams {
    pub fn new(s: usize) -> Self {
        Self {
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            lambda3: DEFAULT_LAMBDA3,
            s,
        }
    }

    pub fn with_lambdas(mut self, lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self.lambda3 = lambda3;
        self
    }

    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        validate_s(corpus, self.s)
    }
}

pub(crate) fn validate_s(corpus: &Corpus, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be >= 1".into()));
    }
    match corpus.videos().iter().find(|v| v.rows() < s) {
        Some(v) => Err(Error::SummaryTooLarge {
            video: v.video_id().to_string(),
            s,
            t: v.rows(),
        }),
        None => Ok(()),
    }
}

/// Coefficients of a linear combination `f·F + d·D + c·C + a·A`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coeffs {
    pub f: f64,
    pub d: f64,
    pub c: f64,
    pub a: f64,
}

impl Coeffs {
    pub const F: Coeffs = Coeffs { f: 1.0, d: 0.0, c: 0.0, a: 0.0 };
    pub const D: Coeffs = Coeffs { f: 0.0, d: 1.0, c: 0.0, a: 0.0 };
    pub const C: Coeffs = Coeffs { f: 0.0, d: 0.0, c: 1.0, a: 0.0 };
    pub const A: Coeffs = Coeffs { f: 0.0, d: 0.0, c: 0.0, a: 1.0 };

    /// `Q = −λ1 F + (λ1+λ2) D − (λ2+λ3) C + λ3 A`.
    pub fn objective(hp: &Hyperparams) -> Self {
        Coeffs {
            f: -hp.lambda1,
            d: hp.lambda1 + hp.lambda2,
            c: -(hp.lambda2 + hp.lambda3),
            a: hp.lambda3,
        }
    }

    /// Convex part `Q1 = (λ1+λ2) D + λ3 A`.
    pub fn convex_part(hp: &Hyperparams) -> Self {
        Coeffs {
            d: hp.lambda1 + hp.lambda2,
            a: hp.lambda3,
            ..Default::default()
        }
    }

    /// Concave part `Q2 = λ1 F + (λ2+λ3) C`, entering the objective as `−ẑᵀQ2ẑ`.
    pub fn concave_part(hp: &Hyperparams) -> Self {
        Coeffs {
            f: hp.lambda1,
            c: hp.lambda2 + hp.lambda3,
            ..Default::default()
        }
    }

    pub fn minus(self, o: Coeffs) -> Self {
        Coeffs {
            f: self.f - o.f,
            d: self.d - o.d,
            c: self.c - o.c,
            a: self.a - o.a,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.f == 0.0 && self.d == 0.0 && self.c == 0.0 && self.a == 0.0
    }
}

/// Stacked continuous selection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    z: Vec<f64>,
    offsets: Vec<usize>,
}

impl SelectionState {
    pub fn new(z: Vec<f64>, offsets: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) || offsets.last() != Some(&z.len()) || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ShapeMismatch(format!(
                "selection of length {} does not match video offsets",
                z.len()
            )));
        }
        Ok(Self { z, offsets })
    }

    pub fn for_corpus(corpus: &Corpus, z: Vec<f64>) -> Result<Self> {
        Self::new(z, corpus.offsets().to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.z
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_videos(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn video(&self, i: usize) -> &[f64] {
        &self.z[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Largest violation of the box and per-video sum constraints.
    pub fn feasibility_residual(&self, s: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_videos() {
            let zi = self.video(i);
            let sum: f64 = zi.iter().sum();
            worst = worst.max((sum - s as f64).abs());
            for &v in zi {
                worst = worst.max(-v).max(v - 1.0);
            }
        }
        worst
    }

    pub fn is_feasible(&self, s: usize, tol: f64) -> bool {
        self.feasibility_residual(s) <= tol
    }
}

static DENSE_BUILDS: AtomicUsize = AtomicUsize::new(0);

/// Number of dense `ΣT × ΣT` matrices built in this process so far.
pub fn dense_build_count() -> usize {
    DENSE_BUILDS.load(Ordering::Relaxed)
}

/// Matrix-free appliers for `F`, `D`, `C`, `A` over one corpus.
#[derive(Debug, Clone)]
pub struct GramOperators<'a> {
    corpus: &'a Corpus,
    s: usize,
    f_diag: Vec<f64>,
}

impl<'a> GramOperators<'a> {
    pub fn new(corpus: &'a Corpus, s: usize) -> Result<Self> {
        validate_s(corpus, s)?;
        let f_diag = corpus
            .videos()
            .iter()
            .flat_map(|v| v.iter_rows().map(|r| dot(r, r)))
            .collect();
        Ok(Self { corpus, s, f_diag })
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.corpus.total_clips()
    }

    /// Squared clip norms, the diagonal of `F`.
    pub fn f_diag(&self) -> &[f64] {
        &self.f_diag
    }

    /// `out = (f·F + d·D + c·C + a·A) z`.
    pub fn apply_into(&self, k: Coeffs, z: &[f64], out: &mut [f64]) {
        let corpus = self.corpus;
        let n = corpus.total_clips();
        assert_eq!(z.len(), n, "selection length");
        assert_eq!(out.len(), n, "output length");
        let dim = corpus.dim();
        let s = self.s as f64;
        let offsets = corpus.offsets();

        // u_i = X_iᵀ z_i
        let u: Vec<Vec<f64>> = par::map(corpus.num_videos(), |i| {
            let zi = &z[offsets[i]..offsets[i + 1]];
            let mut ui = vec![0.0; dim];
            for (row, &zt) in corpus.video(i).iter_rows().zip(zi) {
                if zt != 0.0 {
                    axpy(zt, row, &mut ui);
                }
            }
            ui
        });

        let mut group_sums = vec![vec![0.0; dim]; corpus.num_groups()];
        let mut total = vec![0.0; dim];
        for (gk, sum) in group_sums.iter_mut().enumerate() {
            for ui in &u[corpus.group_range(gk)] {
                axpy(1.0, ui, sum);
            }
            axpy(1.0, sum, &mut total);
        }

        let n_videos = corpus.num_videos() as f64;
        let sizes = corpus.grouping().group_sizes();
        let w: Vec<Vec<f64>> = par::map(corpus.num_videos(), |i| {
            let gk = corpus.group_of_video(i);
            let cd = k.d / s;
            let cc = k.c / (sizes[gk] as f64 * s);
            let ca = k.a / (n_videos * s);
            (0..dim)
                .map(|j| cd * u[i][j] + cc * group_sums[gk][j] + ca * total[j])
                .collect()
        });

        let chunks = split_by_offsets(out, offsets);
        par::for_each_indexed(chunks, |i, chunk| {
            let base = offsets[i];
            for (t, (row, o)) in corpus.video(i).iter_rows().zip(chunk.iter_mut()).enumerate() {
                let g = base + t;
                *o = dot(row, &w[i]) + k.f * self.f_diag[g] * z[g];
            }
        });
    }

    pub fn apply(&self, k: Coeffs, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.apply_into(k, z, &mut out);
        out
    }

    pub fn apply_f(&self, z: &[f64]) -> Vec<f64> {
        self.apply(Coeffs::F, z)
    }

    pub fn apply_d(&self, z: &[f64]) -> Vec<f64> {
        self.apply(Coeffs::D, z)
    }

    pub fn apply_c(&self, z: &[f64]) -> Vec<f64> {
        self.apply(Coeffs::C, z)
    }

    pub fn apply_a(&self, z: &[f64]) -> Vec<f64> {
        self.apply(Coeffs::A, z)
    }

    /// `zᵀ(f·F + d·D + c·C + a·A)z`.
    pub fn quad(&self, k: Coeffs, z: &[f64]) -> f64 {
        dot(z, &self.apply(k, z))
    }

    /// `ẑᵀ(F − D)ẑ`.
    pub fn trace_inner_summary(&self, z: &SelectionState) -> f64 {
        self.quad(Coeffs::F.minus(Coeffs::D), z.as_slice())
    }

    /// `ẑᵀ(D − C)ẑ`.
    pub fn trace_within_group(&self, z: &SelectionState) -> f64 {
        self.quad(Coeffs::D.minus(Coeffs::C), z.as_slice())
    }

    /// `ẑᵀ(C − A)ẑ`.
    pub fn trace_between_group(&self, z: &SelectionState) -> f64 {
        self.quad(Coeffs::C.minus(Coeffs::A), z.as_slice())
    }

    /// `ẑᵀQẑ`, which for binary feasible `ẑ` equals
    /// `−λ1·Tr(S^V) + λ2·Tr(S^W) − λ3·Tr(S^B)`.
    pub fn objective(&self, hp: &Hyperparams, z: &SelectionState) -> f64 {
        self.quad(Coeffs::objective(hp), z.as_slice())
    }

    /// Dense `ΣT × ΣT` matrix of a combination; refuses above `cap` clips.
    pub fn dense(&self, k: Coeffs, cap: usize) -> Result<DMatrix<f64>> {
        dense_operator(self.corpus, self.s, k, cap)
    }
}

/// Builds `f·F + d·D + c·C + a·A` explicitly from the block formulas.
/// Intended for oracles and spectrum checks on small corpora.
pub fn dense_operator(corpus: &Corpus, s: usize, k: Coeffs, cap: usize) -> Result<DMatrix<f64>> {
    validate_s(corpus, s)?;
    let n = corpus.total_clips();
    if n > cap {
        return Err(Error::CapExceeded {
            what: "dense matrix size",
            size: n as u128,
            cap: cap as u128,
        });
    }
    DENSE_BUILDS.fetch_add(1, Ordering::Relaxed);
    let sf = s as f64;
    let n_videos = corpus.num_videos() as f64;
    let sizes = corpus.grouping().group_sizes();
    let owner: Vec<usize> = (0..n).map(|t| corpus.video_of_clip(t)).collect();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        let xa = corpus.clip_row(a);
        for b in 0..n {
            let xb = corpus.clip_row(b);
            let g = dot(xa, xb);
            let (va, vb) = (owner[a], owner[b]);
            let (ga, gb) = (corpus.group_of_video(va), corpus.group_of_video(vb));
            let mut scale = k.a / (n_videos * sf);
            if ga == gb {
                scale += k.c / (sizes[ga] as f64 * sf);
            }
            if va == vb {
                scale += k.d / sf;
            }
            let mut v = scale * g;
            if a == b {
                v += k.f * g;
            }
            m[(a, b)] = v;
        }
    }
    Ok(m)
}

/// Explicit objective matrix `Q`.
pub fn dense_q(corpus: &Corpus, hp: &Hyperparams, cap: usize) -> Result<DMatrix<f64>> {
    dense_operator(corpus, hp.s, Coeffs::objective(hp), cap)
}

/// Entry `m_ij` of the pair-weight matrix
/// `M = −λ1·1_F + (λ1+λ2)·1_D − (λ2+λ3)·1_C + λ3·1_A`, where `1_X` masks
/// the structural support of `X`. The block scale factors of `Q` are not
/// applied.
pub fn pair_weight(i: usize, j: usize, corpus: &Corpus, hp: &Hyperparams) -> f64 {
    let (vi, vj) = (corpus.video_of_clip(i), corpus.video_of_clip(j));
    let mut m = hp.lambda3;
    if corpus.group_of_video(vi) == corpus.group_of_video(vj) {
        m -= hp.lambda2 + hp.lambda3;
    }
    if vi == vj {
        m += hp.lambda1 + hp.lambda2;
    }
    if i == j {
        m -= hp.lambda1;
    }
    m
}

/// Clip sampling distribution `p_t = z_t / (N s)`.
pub fn sampling_distribution(z: &SelectionState, s: usize) -> Vec<f64> {
    let denom = (z.num_videos() * s) as f64;
    z.as_slice().iter().map(|&v| v.max(0.0) / denom).collect()
}

/// Eight independent partial sums let the compiler vectorize; the order of
/// additions is still fixed, so results are reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn split_by_offsets<'b>(mut out: &'b mut [f64], offsets: &[usize]) -> Vec<&'b mut [f64]> {
    let mut chunks = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = std::mem::take(&mut out).split_at_mut(w[1] - w[0]);
        chunks.push(head);
        out = tail;
    }
    chunks
}
