//! Concave-convex procedure over the relaxed selection problem.
//!
//! `ẑᵀQẑ = ẑᵀQ1ẑ − ẑᵀQ2ẑ` with both parts PSD. Each outer step linearizes
//! the concave part at the current iterate and solves the convex surrogate
//! `ẑᵀQ1ẑ − 2 ẑ_(t)ᵀQ2ẑ` with [`crate::qp`]. Warm-starting the inner solve at
//! the anchor and only accepting descent keeps the true relaxed objective
//! non-increasing.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::qp::{solve_qp_with_lipschitz, GramCombination, QpOptions, QpProblem};
use crate::variance::{dense_q, validate_s, Coeffs, GramOperators, Hyperparams, SelectionState};

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CccpOptions {
    pub max_outer: usize,
    /// Stop when the relaxed objective improves by less than this fraction.
    pub rel_decrease_tol: f64,
    pub qp: QpOptions,
    pub seed: u64,
    /// After rounding, apply improving within-video swaps until none is
    /// left. Off by default, so the selection is the plain top-`s` rounding.
    #[serde(default)]
    pub polish: bool,
}

impl Default for CccpOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            rel_decrease_tol: 1e-6,
            qp: QpOptions::default(),
            seed: 0,
            polish: false,
        }
    }
}

impl CccpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter("max_outer must be >= 1".into()));
        }
        if !(self.rel_decrease_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_decrease_tol must be > 0".into()));
        }
        self.qp.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub id: String,
    /// Exactly `s` clip indices, strictly increasing.
    pub selected: Vec<usize>,
    /// Continuous selection scores, one per clip.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub videos: Vec<VideoSummary>,
    /// Relaxed objective at the initial point and after every outer step.
    pub objective_history: Vec<f64>,
    /// `ẑᵀQẑ` of the rounded binary selection, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounded_objective: Option<f64>,
    #[serde(default)]
    pub converged: bool,
    /// Inner solves that hit their iteration cap.
    #[serde(default)]
    pub qp_warnings: usize,
    /// Swaps applied by the optional polish step.
    #[serde(default)]
    pub polish_swaps: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Summary {
    /// Selection vector with ones at the selected clips.
    pub fn binary_selection(&self, corpus: &Corpus) -> Result<SelectionState> {
        let mut z = vec![0.0; corpus.total_clips()];
        for (i, v) in corpus.videos().iter().enumerate() {
            let vs = self
                .videos
                .iter()
                .find(|s| s.id == v.video_id())
                .ok_or_else(|| Error::MissingPrediction(v.video_id().to_string()))?;
            for &t in &vs.selected {
                if t >= v.rows() {
                    return Err(Error::ShapeMismatch(format!("selected clip {t} out of range in {}", vs.id)));
                }
                z[corpus.offsets()[i] + t] = 1.0;
            }
        }
        SelectionState::for_corpus(corpus, z)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Uniform feasible start `z_i = (s/T_i)·1`.
pub fn init_selection(corpus: &Corpus, s: usize) -> Result<SelectionState> {
    validate_s(corpus, s)?;
    let z = corpus
        .videos()
        .iter()
        .flat_map(|v| {
            let t = v.rows();
            std::iter::repeat_n(s as f64 / t as f64, t)
        })
        .collect();
    SelectionState::for_corpus(corpus, z)
}

/// Convex and concave parts of `Q`; `Q = Q1 − Q2`.
pub fn dc_split(hp: &Hyperparams) -> (Coeffs, Coeffs) {
    (Coeffs::convex_part(hp), Coeffs::concave_part(hp))
}

/// Per video, the `s` clips with the largest score; ties go to the lower index.
pub fn round_selection(z: &SelectionState, s: usize, ids: &[String]) -> Vec<VideoSummary> {
    (0..z.num_videos())
        .map(|i| {
            let zi = z.video(i);
            VideoSummary {
                id: ids[i].clone(),
                selected: top_s(zi, s),
                scores: zi.to_vec(),
            }
        })
        .collect()
}

pub(crate) fn top_s(scores: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(s).collect();
    picked.sort_unstable();
    picked
}

pub fn video_ids(corpus: &Corpus) -> Vec<String> {
    corpus.videos().iter().map(|v| v.video_id().to_string()).collect()
}

/// Runs the outer CCCP loop from [`init_selection`] and rounds the result.
pub fn cccp_solve(corpus: &Corpus, hp: &Hyperparams, opts: &CccpOptions) -> Result<Summary> {
    let (_, mut summary) = cccp_relaxed(corpus, hp, opts)?;
    let ops = GramOperators::new(corpus, hp.s)?;
    if opts.polish {
        let mut selected: Vec<Vec<usize>> = summary.videos.iter().map(|v| v.selected.clone()).collect();
        summary.polish_swaps = polish_selection(&ops, hp, &mut selected);
        for (v, sel) in summary.videos.iter_mut().zip(selected) {
            v.selected = sel;
        }
    }
    let rounded = summary.binary_selection(corpus)?;
    summary.rounded_objective = Some(ops.objective(hp, &rounded));
    Ok(summary)
}

/// Best-improvement local search over binary selections: repeatedly swaps
/// one selected clip for an unselected clip of the same video while that
/// lowers `ẑᵀQẑ`. Returns the number of swaps made.
pub fn polish_selection(ops: &GramOperators<'_>, hp: &Hyperparams, selected: &mut [Vec<usize>]) -> usize {
    let corpus = ops.corpus();
    let q = Coeffs::objective(hp);
    let offsets = corpus.offsets();
    let n_videos = corpus.num_videos() as f64;
    let s = hp.s as f64;
    let mut z = vec![0.0; corpus.total_clips()];
    for (i, sel) in selected.iter().enumerate() {
        for &t in sel.iter() {
            z[offsets[i] + t] = 1.0;
        }
    }
    let mut swaps = 0;
    // each swap strictly decreases a finite objective over finitely many
    // selections; the cap only guards against rounding ties
    let max_swaps = corpus.total_clips() * hp.s.max(1) * 4;
    while swaps < max_swaps {
        let qz = ops.apply(q, &z);
        let scale = crate::variance::dot(&z, &qz).abs().max(1.0);
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (i, sel) in selected.iter().enumerate() {
            let video = corpus.video(i);
            let gk = corpus.group_of_video(i);
            let within = q.d / s + q.c / (corpus.grouping().group_sizes()[gk] as f64 * s) + q.a / (n_videos * s);
            let entry = |a: usize, b: usize| {
                let diag = if a == b { q.f * ops.f_diag()[offsets[i] + a] } else { 0.0 };
                diag + within * crate::variance::dot(video.row(a), video.row(b))
            };
            for (slot, &a) in sel.iter().enumerate() {
                for b in (0..video.rows()).filter(|b| !sel.contains(b)) {
                    let delta = 2.0 * (qz[offsets[i] + b] - qz[offsets[i] + a]) + entry(a, a) + entry(b, b)
                        - 2.0 * entry(a, b);
                    if delta < -1e-12 * scale && best.is_none_or(|(d, ..)| delta < d) {
                        best = Some((delta, i, slot, b));
                    }
                }
            }
        }
        let Some((_, i, slot, b)) = best else { break };
        let a = selected[i][slot];
        z[offsets[i] + a] = 0.0;
        z[offsets[i] + b] = 1.0;
        selected[i][slot] = b;
        selected[i].sort_unstable();
        swaps += 1;
    }
    swaps
}

/// The outer loop proper; returns the final relaxed iterate alongside the
/// rounded summary.
pub fn cccp_relaxed(corpus: &Corpus, hp: &Hyperparams, opts: &CccpOptions) -> Result<(SelectionState, Summary)> {
    hp.validate(corpus)?;
    opts.validate()?;
    let ops = GramOperators::new(corpus, hp.s)?;
    let mut qp_opts = opts.qp;
    qp_opts.seed = opts.seed;

    let (q1, _) = dc_split(hp);
    let lipschitz = if q1.is_zero() {
        crate::qp::LIPSCHITZ_FLOOR
    } else {
        let op = GramCombination { ops: &ops, coeffs: q1 };
        let probe = QpProblem {
            q1: &op,
            linear: vec![0.0; ops.dim()],
            offsets: corpus.offsets(),
            s: hp.s,
        };
        probe.gradient_lipschitz(&qp_opts)
    };

    let mut z = init_selection(corpus, hp.s)?;
    let mut current = ops.objective(hp, &z);
    let mut history = vec![current];
    let mut converged = false;
    let mut qp_warnings = 0;

    for outer in 0..opts.max_outer {
        let out = solve_qp_with_lipschitz(&ops, hp, &z, &qp_opts, Some(lipschitz))?;
        if !out.converged {
            qp_warnings += 1;
        }
        let candidate = SelectionState::for_corpus(corpus, out.z)?;
        let value = ops.objective(hp, &candidate);
        let decrease = current - value;
        log::debug!("cccp outer {outer}: objective {value:.12e} (qp iters {})", out.iterations);
        history.push(value);
        z = candidate;
        current = value;
        if decrease <= opts.rel_decrease_tol * history[history.len() - 2].abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if qp_warnings > 0 {
        log::warn!("cccp: {qp_warnings} inner solves stopped at max_iters");
    }

    let videos = round_selection(&z, hp.s, &video_ids(corpus));
    let summary = Summary {
        videos,
        objective_history: history,
        rounded_objective: None,
        converged,
        qp_warnings,
        polish_swaps: 0,
        config: serde_json::Value::Null,
    };
    Ok((z, summary))
}

/// Exact binary minimizer of `ẑᵀQẑ`, by enumerating every feasible selection.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub z: SelectionState,
    pub objective: f64,
    pub selected: Vec<Vec<usize>>,
}

pub fn brute_force(corpus: &Corpus, hp: &Hyperparams, cap: u128) -> Result<BruteForceResult> {
    hp.validate(corpus)?;
    let s = hp.s;
    let mut count: u128 = 1;
    for v in corpus.videos() {
        count = count.saturating_mul(binomial(v.rows() as u128, s as u128));
    }
    if count > cap {
        return Err(Error::CapExceeded {
            what: "feasible selection count",
            size: count,
            cap,
        });
    }
    let q = dense_q(corpus, hp, corpus.total_clips())?;
    let per_video: Vec<Vec<Vec<usize>>> = corpus
        .videos()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            combinations(v.rows(), s)
                .into_iter()
                .map(|c| c.into_iter().map(|t| t + corpus.offsets()[i]).collect())
                .collect()
        })
        .collect();

    let n = per_video.len();
    let mut odometer = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut chosen = Vec::with_capacity(n * s);
    loop {
        chosen.clear();
        for (i, &c) in odometer.iter().enumerate() {
            chosen.extend_from_slice(&per_video[i][c]);
        }
        let mut value = 0.0;
        for &a in &chosen {
            for &b in &chosen {
                value += q[(a, b)];
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, odometer.clone()));
        }
        // advance, last video fastest
        let mut i = n;
        loop {
            if i == 0 {
                let (objective, idx) = best.expect("at least one selection");
                let mut z = vec![0.0; corpus.total_clips()];
                let mut selected = Vec::with_capacity(n);
                for (v, &c) in idx.iter().enumerate() {
                    for &t in &per_video[v][c] {
                        z[t] = 1.0;
                    }
                    selected.push(per_video[v][c].iter().map(|t| t - corpus.offsets()[v]).collect());
                }
                return Ok(BruteForceResult {
                    z: SelectionState::for_corpus(corpus, z)?,
                    objective,
                    selected,
                });
            }
            i -= 1;
            odometer[i] += 1;
            if odometer[i] < per_video[i].len() {
                break;
            }
            odometer[i] = 0;
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
