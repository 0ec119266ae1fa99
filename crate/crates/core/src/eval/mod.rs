//! EMQA evaluation: dataset loading, BLEU-4 / METEOR / ROUGE-L scoring and
//! per-template aggregation.

mod dataset;
mod harness;
pub mod metrics;

pub use dataset::{load_dataset, Dataset, QASample, SplitSummary, UNSPECIFIED_SPLIT};
pub use harness::{
    run_emqa, EvalOptions, EvalReport, EvalScores, SampleRow, TemplateSummary, UNCATEGORIZED,
};
pub use metrics::{bleu4, meteor, rouge_l_f, sentence_bleu4};
