//! Discriminative co-summarization of grouped videos.
//!
//! Given clip features for videos partitioned into groups, pick `s` clips
//! per video so that each summary is diverse, close to the other summaries
//! of its group, and far from those of other groups. The binary problem is
//! relaxed to a difference of convex quadratics over per-video capped
//! simplices and solved with the concave-convex procedure.
//!
//! ```
//! use vpsumm::{cccp_solve, generate_planted, CccpOptions, Hyperparams, SynthParams};
//!
//! let planted = generate_planted(&SynthParams { seed: 7, ..Default::default() }).unwrap();
//! let summary = cccp_solve(&planted.corpus, &Hyperparams::new(2), &CccpOptions::default()).unwrap();
//! assert_eq!(summary.videos.len(), 2);
//! assert!(summary.videos.iter().all(|v| v.selected.len() == 2));
//! ```

pub mod cccp;
pub mod corpus;
pub mod error;
pub mod eval;
mod par;
pub mod pool;
pub mod qp;
pub mod segment;
pub mod synth;
pub mod variance;

pub use cccp::{brute_force, cccp_solve, init_selection, round_selection, CccpOptions, Summary, VideoSummary};
pub use corpus::{load_annotations, load_corpus, AnnotationSet, ClipFeatures, Corpus, Grouping};
pub use error::{Error, Result};
pub use qp::{project_capped_simplex, solve_qp, QpOptions};
pub use segment::{ClipList, DiffSignal};
pub use synth::{generate_planted, SynthParams};
pub use variance::{GramOperators, Hyperparams, SelectionState};
