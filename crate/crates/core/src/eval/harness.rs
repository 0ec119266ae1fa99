use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};

use serde::Serialize;

use super::metrics::{bleu4, meteor, rouge_l_f, sentence_bleu4};
use super::QASample;

pub const UNCATEGORIZED: &str = "uncategorized";

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EvalScores {
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l_f: f64,
}

impl EvalScores {
    /// Scores for a single prediction.
    pub fn for_pair(predicted: &str, gold: &str) -> Self {
        Self {
            bleu4: sentence_bleu4(predicted, gold),
            meteor: meteor(predicted, gold),
            rouge_l_f: rouge_l_f(predicted, gold),
        }
    }

    fn mean<'a>(rows: impl Iterator<Item = &'a EvalScores>) -> Self {
        let mut n = 0usize;
        let mut sum = EvalScores::default();
        for r in rows {
            n += 1;
            sum.bleu4 += r.bleu4;
            sum.meteor += r.meteor;
            sum.rouge_l_f += r.rouge_l_f;
        }
        if n == 0 {
            return sum;
        }
        let n = n as f64;
        EvalScores {
            bleu4: sum.bleu4 / n,
            meteor: sum.meteor / n,
            rouge_l_f: sum.rouge_l_f / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub video_id: String,
    pub template: String,
    pub predicted: String,
    pub gold: String,
    pub scores: EvalScores,
    /// Agent failure; the row was scored as an empty prediction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemplateSummary {
    /// Means of per-sample scores.
    pub scores: EvalScores,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub label: String,
    /// Corpus BLEU-4; METEOR and ROUGE-L averaged over samples.
    pub overall: EvalScores,
    pub per_template: BTreeMap<String, TemplateSummary>,
    /// Sorted by sample id.
    pub per_sample: Vec<SampleRow>,
    pub flagged: usize,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Name shown in the model column of the text report.
    pub label: String,
    /// Score samples concurrently (ignored without the `parallel` feature).
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            label: "memory agent".to_string(),
            parallel: true,
        }
    }
}

fn evaluate_one<F, E>(agent: &F, sample: &QASample) -> SampleRow
where
    F: Fn(&QASample) -> Result<String, E>,
    E: Display,
{
    let (predicted, error) = match agent(sample) {
        Ok(p) => (p, None),
        Err(e) => (String::new(), Some(e.to_string())),
    };
    SampleRow {
        sample_id: sample.sample_id.clone(),
        video_id: sample.video_id.clone(),
        template: sample
            .template
            .clone()
            .unwrap_or_else(|| UNCATEGORIZED.to_string()),
        scores: EvalScores::for_pair(&predicted, &sample.gold_answer),
        predicted,
        gold: sample.gold_answer.clone(),
        error,
    }
}

/// Runs `agent` on every sample and scores the answers.
///
/// The agent must answer from its memory store only. Agent errors are
/// flagged and scored as empty predictions.
pub fn run_emqa<F, E>(agent: F, samples: &[QASample], options: &EvalOptions) -> EvalReport
where
    F: Fn(&QASample) -> Result<String, E> + Sync,
    E: Display,
{
    let mut rows: Vec<SampleRow> = if options.parallel && cfg!(feature = "parallel") {
        score_parallel(&agent, samples)
    } else {
        samples.iter().map(|s| evaluate_one(&agent, s)).collect()
    };
    rows.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let overall = if rows.is_empty() {
        EvalScores::default()
    } else {
        let preds: Vec<&str> = rows.iter().map(|r| r.predicted.as_str()).collect();
        let golds: Vec<&str> = rows.iter().map(|r| r.gold.as_str()).collect();
        EvalScores {
            bleu4: bleu4(&preds, &golds).expect("non-empty and aligned"),
            ..EvalScores::mean(rows.iter().map(|r| &r.scores))
        }
    };

    let mut groups: BTreeMap<String, Vec<&EvalScores>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.template.clone()).or_default().push(&r.scores);
    }
    let per_template = groups
        .into_iter()
        .map(|(t, scores)| {
            (
                t,
                TemplateSummary {
                    count: scores.len(),
                    scores: EvalScores::mean(scores.into_iter()),
                },
            )
        })
        .collect();

    EvalReport {
        label: options.label.clone(),
        overall,
        per_template,
        flagged: rows.iter().filter(|r| r.error.is_some()).count(),
        per_sample: rows,
    }
}

#[cfg(feature = "parallel")]
fn score_parallel<F, E>(agent: &F, samples: &[QASample]) -> Vec<SampleRow>
where
    F: Fn(&QASample) -> Result<String, E> + Sync,
    E: Display,
{
    use rayon::prelude::*;
    samples.par_iter().map(|s| evaluate_one(agent, s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn score_parallel<F, E>(agent: &F, samples: &[QASample]) -> Vec<SampleRow>
where
    F: Fn(&QASample) -> Result<String, E> + Sync,
    E: Display,
{
    samples.iter().map(|s| evaluate_one(agent, s)).collect()
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two aligned tables: overall scores, then per-template scores.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let label_w = self.label.len().max(5);
        let _ = writeln!(out, "{:<label_w$}  {:>7}  {:>7}  {:>7}", "Model", "BLEU", "METEOR", "ROUGE");
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>7.2}  {:>7.2}  {:>7.2}",
            self.label, self.overall.bleu4, self.overall.meteor, self.overall.rouge_l_f
        );
        let _ = writeln!(out);

        let tw = self
            .per_template
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let _ = writeln!(
            out,
            "{:<tw$}  {:>5}  {:>7}  {:>7}  {:>7}",
            "Template", "n", "BLEU", "METEOR", "ROUGE"
        );
        for (t, s) in &self.per_template {
            let pad = tw - t.chars().count();
            let _ = writeln!(
                out,
                "{t}{:pad$}  {:>5}  {:>7.2}  {:>7.2}  {:>7.2}",
                "", s.count, s.scores.bleu4, s.scores.meteor, s.scores.rouge_l_f
            );
        }
        if self.flagged > 0 {
            let _ = writeln!(out, "\n{} sample(s) flagged", self.flagged);
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}
