//! Browser demo: the functions here are plain Rust so they can be tested
//! natively; the `wasm_bindgen` wrappers only convert arguments.

use serde::Serialize;
use vpsumm::synth::planted_precision;
use vpsumm::{brute_force, cccp_solve, generate_planted, CccpOptions, DiffSignal, Hyperparams, SynthParams};
use wasm_bindgen::prelude::*;

/// Selections enumerated at most when computing the exact optimum.
const ORACLE_CAP: u128 = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct DemoVideo {
    pub id: String,
    pub group: usize,
    pub selected: Vec<usize>,
    pub planted: Vec<usize>,
    pub scores: Vec<f64>,
    /// Clip coordinates on the plane spanned by the first two group prototypes.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoResult {
    pub videos: Vec<DemoVideo>,
    pub objective_history: Vec<f64>,
    pub rounded_objective: f64,
    /// Exact binary optimum, when the instance is small enough to enumerate.
    pub oracle_objective: Option<f64>,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DemoParams {
    pub n_groups: usize,
    pub videos_per_group: usize,
    pub clips_per_video: usize,
    pub s: usize,
    pub separation: f64,
    pub noise_sigma: f64,
    pub lambdas: [f64; 3],
    pub seed: u64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn summarize_planted(p: &DemoParams) -> Result<DemoResult, String> {
    let sp = SynthParams {
        n_groups: p.n_groups,
        videos_per_group: p.videos_per_group,
        clips_per_video: p.clips_per_video,
        d: (p.n_groups + 2).max(8),
        s: p.s,
        noise_sigma: p.noise_sigma,
        separation: p.separation,
        n_shared: 1,
        seed: p.seed,
    };
    let planted = generate_planted(&sp).map_err(err)?;
    let corpus = &planted.corpus;
    let [l1, l2, l3] = p.lambdas;
    let hp = Hyperparams::new(p.s).with_lambdas(l1, l2, l3);
    let summary = cccp_solve(corpus, &hp, &CccpOptions { seed: p.seed, ..Default::default() }).map_err(err)?;
    let oracle_objective = brute_force(corpus, &hp, ORACLE_CAP).ok().map(|b| b.objective);
    let selected: Vec<Vec<usize>> = summary.videos.iter().map(|v| v.selected.clone()).collect();
    let axes = [&planted.prototypes[0], planted.prototypes.get(1).unwrap_or(&planted.prototypes[0])];
    let videos = summary
        .videos
        .iter()
        .enumerate()
        .map(|(i, v)| DemoVideo {
            id: v.id.clone(),
            group: corpus.group_of_video(i),
            selected: v.selected.clone(),
            planted: planted.planted[i].clone(),
            scores: v.scores.clone(),
            points: corpus
                .video(i)
                .iter_rows()
                .map(|r| [dot(r, axes[0]), dot(r, axes[1])])
                .collect(),
        })
        .collect();
    Ok(DemoResult {
        videos,
        rounded_objective: summary.rounded_objective.unwrap_or(f64::NAN),
        objective_history: summary.objective_history,
        oracle_objective,
        precision: planted_precision(&selected, &planted.planted),
    })
}

pub fn project(values: &[f64], s: usize) -> Result<Vec<f64>, String> {
    vpsumm::project_capped_simplex(values, s).map_err(err)
}

pub fn segment(fractions: Vec<f64>, threshold: f64) -> Result<Vec<[usize; 2]>, String> {
    let sig = DiffSignal::new(fractions).map_err(err)?;
    Ok(vpsumm::segment::segment_signal(&sig, threshold).map_err(err)?.clips)
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("serializable"))
        .map_err(|e| JsValue::from_str(&e))
}

/// Generates a planted corpus, summarizes it and returns the result as JSON.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = summarizePlanted)]
pub fn summarize_planted_js(
    n_groups: usize,
    videos_per_group: usize,
    clips_per_video: usize,
    s: usize,
    separation: f64,
    noise_sigma: f64,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    seed: u32,
) -> Result<String, JsValue> {
    js(summarize_planted(&DemoParams {
        n_groups,
        videos_per_group,
        clips_per_video,
        s,
        separation,
        noise_sigma,
        lambdas: [lambda1, lambda2, lambda3],
        seed: seed as u64,
    }))
}

/// Euclidean projection onto `{z : Σz = s, 0 ≤ z ≤ 1}`.
#[wasm_bindgen(js_name = projectCappedSimplex)]
pub fn project_js(values: Vec<f64>, s: usize) -> Result<Vec<f64>, JsValue> {
    project(&values, s).map_err(|e| JsValue::from_str(&e))
}

/// Clip ranges `[[start, end], ...]` as JSON for a frame-difference signal.
#[wasm_bindgen(js_name = segmentSignal)]
pub fn segment_js(fractions: Vec<f64>, threshold: f64) -> Result<String, JsValue> {
    js(segment(fractions, threshold))
}
