use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use vpsumm::corpus::{read_features, write_features};
use vpsumm::eval::{
    inter_annotator_similarity, kmeans_baseline, map_report, predictions_from_summary, KMeansOptions, DEFAULT_RATIO,
    DEFAULT_TOP_K,
};
use vpsumm::pool::{pool_clip_features, DEFAULT_STRIDE};
use vpsumm::segment::{segment_signal, DEFAULT_CHANGE_THRESHOLD};
use vpsumm::synth::write_dataset;
use vpsumm::variance::{DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_LAMBDA3};
use vpsumm::{
    brute_force, cccp_solve, generate_planted, load_annotations, load_corpus, CccpOptions, ClipList, DiffSignal,
    Hyperparams, Summary, SynthParams,
};

use crate::config::{pick, require, ConfigFile};
use crate::{EvaluateArgs, Failure, Objective, OracleArgs, Output, PoolArgs, SegmentArgs, SummarizeArgs, SynthArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cccp,
    Kmeans,
}

fn emit<T: Serialize>(out: &Output, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
    match &out.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::new("io", format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn hyperparams(o: &Objective, file: &ConfigFile) -> Result<Hyperparams, Failure> {
    let s = require(o.s, file.s, "s")?;
    Ok(Hyperparams::new(s).with_lambdas(
        pick(o.lambda1, file.lambda1, DEFAULT_LAMBDA1),
        pick(o.lambda2, file.lambda2, DEFAULT_LAMBDA2),
        pick(o.lambda3, file.lambda3, DEFAULT_LAMBDA3),
    ))
}

fn hp_json(hp: &Hyperparams) -> Value {
    json!({ "s": hp.s, "lambda1": hp.lambda1, "lambda2": hp.lambda2, "lambda3": hp.lambda3 })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

pub fn segment(a: SegmentArgs, file: &ConfigFile) -> Result<(), Failure> {
    let threshold = pick(a.threshold, file.threshold, DEFAULT_CHANGE_THRESHOLD);
    let signal = DiffSignal::read_csv(&a.diff)?;
    let mut clips = segment_signal(&signal, threshold)?;
    clips.video_id = a.video_id.clone();
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        clips: ClipList,
        config: Value,
    }
    let config = json!({ "command": "segment", "diff": path_str(&a.diff), "threshold": threshold });
    emit(&a.output, &Out { clips, config })
}

pub fn pool(a: PoolArgs, file: &ConfigFile) -> Result<(), Failure> {
    let stride = pick(a.stride, file.stride, DEFAULT_STRIDE);
    let clips = ClipList::read_json(&a.clips)?;
    let id = clips.video_id.clone().unwrap_or_else(|| {
        a.features
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let frames = read_features(&a.features, &id)?;
    let pooled = pool_clip_features(&frames, &clips, stride)?;
    write_features(&a.out, &pooled)?;
    let status = json!({
        "status": "ok",
        "video_id": id,
        "rows": pooled.rows(),
        "dim": pooled.dim(),
        "zero_rows": pooled.zero_rows(),
        "out": path_str(&a.out),
        "config": {
            "command": "pool",
            "features": path_str(&a.features),
            "clips": path_str(&a.clips),
            "stride": stride,
        },
    });
    emit(&Output { out: None }, &status)
}

pub fn summarize(a: SummarizeArgs, file: &ConfigFile) -> Result<(), Failure> {
    let hp = hyperparams(&a.objective, file)?;
    let defaults = CccpOptions::default();
    let mut opts = defaults;
    opts.max_outer = pick(a.max_outer, file.max_outer, defaults.max_outer);
    opts.qp.grad_map_tol = pick(a.qp_tol, file.qp_tol, defaults.qp.grad_map_tol);
    opts.seed = pick(a.seed, file.seed, defaults.seed);
    opts.qp.seed = opts.seed;
    opts.polish = a.polish || file.polish.unwrap_or(false);
    let corpus = load_corpus(&a.objective.manifest)?;
    let base = merge(
        json!({ "command": "summarize", "manifest": path_str(&a.objective.manifest), "method": a.method }),
        hp_json(&hp),
    );
    let mut summary = match a.method {
        Method::Cccp => {
            let mut s = cccp_solve(&corpus, &hp, &opts)?;
            s.config = merge(
                base,
                json!({
                    "max_outer": opts.max_outer,
                    "qp_tol": opts.qp.grad_map_tol,
                    "seed": opts.seed,
                    "polish": opts.polish,
                    "cccp": opts,
                }),
            );
            s
        }
        Method::Kmeans => {
            let km = KMeansOptions {
                clusters: pick(a.clusters, file.clusters, KMeansOptions::default().clusters),
                seed: opts.seed,
                ..KMeansOptions::default()
            };
            hp.validate(&corpus)?;
            let mut s = kmeans_baseline(&corpus, hp.s, &km)?;
            s.config = merge(base, json!({ "seed": km.seed, "clusters": km.clusters, "kmeans": km }));
            s
        }
    };
    if summary.rounded_objective.is_none() {
        summary.rounded_objective = Some(rounded_objective(&corpus, &hp, &summary)?);
    }
    if summary.qp_warnings > 0 {
        log::warn!("{} inner solves hit their iteration cap", summary.qp_warnings);
    }
    emit(&a.output, &summary)
}

fn rounded_objective(corpus: &vpsumm::Corpus, hp: &Hyperparams, summary: &Summary) -> Result<f64, Failure> {
    let z = summary.binary_selection(corpus)?;
    let ops = vpsumm::GramOperators::new(corpus, hp.s)?;
    Ok(ops.quad(vpsumm::variance::Coeffs::objective(hp), z.as_slice()))
}

pub fn evaluate(a: EvaluateArgs, file: &ConfigFile) -> Result<(), Failure> {
    let k = pick(a.k, file.k, DEFAULT_TOP_K);
    let ratio = pick(a.ratio, file.ratio, DEFAULT_RATIO);
    let text = std::fs::read_to_string(&a.summary)
        .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", a.summary.display())))?;
    let summary: Summary = serde_json::from_str(&text)
        .map_err(|e| Failure::new("json", format!("bad summary {}: {e}", a.summary.display())))?;
    let corpus = load_corpus(&a.manifest)?;
    let annotations = load_annotations(&a.annotations, &corpus)?;
    let cutoff = (k > 0).then_some(k);
    let report = map_report(
        &predictions_from_summary(&summary),
        &annotations,
        corpus.grouping(),
        cutoff,
        ratio,
    )?;
    let similarity = inter_annotator_similarity(&annotations)?;
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["config"] = json!({
        "command": "evaluate",
        "summary": path_str(&a.summary),
        "annotations": path_str(&a.annotations),
        "manifest": path_str(&a.manifest),
        "k": cutoff,
        "ratio": ratio,
        "summary_config": summary.config,
    });
    value["similarity"] = serde_json::to_value(similarity).expect("similarity serializes");
    emit(&a.output, &value)
}

pub fn synth(a: SynthArgs, file: &ConfigFile) -> Result<(), Failure> {
    let d = SynthParams::default();
    let params = SynthParams {
        n_groups: a.n_groups.unwrap_or(d.n_groups),
        videos_per_group: a.videos_per_group.unwrap_or(d.videos_per_group),
        clips_per_video: a.clips_per_video.unwrap_or(d.clips_per_video),
        d: a.d.unwrap_or(d.d),
        s: pick(a.s, file.s, d.s),
        noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
        separation: a.separation.unwrap_or(d.separation),
        n_shared: a.n_shared.unwrap_or(d.n_shared),
        seed: pick(a.seed, file.seed, d.seed),
    };
    let planted = generate_planted(&params)?;
    let manifest = write_dataset(&a.out_dir, &planted)?;
    let status = json!({
        "status": "ok",
        "manifest": path_str(&manifest),
        "videos": planted.corpus.num_videos(),
        "total_clips": planted.corpus.total_clips(),
        "config": merge(json!({ "command": "synth", "out_dir": path_str(&a.out_dir) }),
                        serde_json::to_value(params).expect("params serialize")),
    });
    emit(&a.output, &status)
}

pub fn oracle(a: OracleArgs, file: &ConfigFile) -> Result<(), Failure> {
    let hp = hyperparams(&a.objective, file)?;
    let corpus = load_corpus(&a.objective.manifest)?;
    let best = brute_force(&corpus, &hp, a.cap)?;
    let videos: Vec<BTreeMap<&str, Value>> = corpus
        .videos()
        .iter()
        .zip(&best.selected)
        .map(|(v, sel)| BTreeMap::from([("id", json!(v.video_id())), ("selected", json!(sel))]))
        .collect();
    let config = merge(
        json!({ "command": "oracle", "manifest": path_str(&a.objective.manifest), "cap": a.cap.to_string() }),
        hp_json(&hp),
    );
    emit(
        &a.output,
        &json!({ "videos": videos, "objective": best.objective, "config": config }),
    )
}
