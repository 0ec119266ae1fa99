//! Dataset evaluation against one memory per video.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use epmem_core::capture::read_caption_fixture;
use epmem_core::eval::{load_dataset, run_emqa, EvalOptions, EvalReport, QASample};
use epmem_core::ingest::ingest_captions;
use epmem_core::memory::{load, MemoryStore};
use epmem_core::qa::{Agent, AgentConfig, ChatOptions, MemoryQuery, PromptTemplate};

use crate::api::ServiceError;
use crate::config::AppConfig;
use crate::runtime::{build_chat, build_embedder};

/// Where a video's memory comes from, in lookup order.
pub fn memory_candidates(dir: &Path, video_id: &str) -> [PathBuf; 2] {
    [dir.join(format!("{video_id}.store")), dir.join(format!("{video_id}.jsonl"))]
}

#[derive(Debug, Clone, Default)]
pub struct EvalRequest {
    pub dataset: PathBuf,
    pub memories: PathBuf,
    /// Debug: answer every question with its own gold answer.
    pub identity: bool,
    pub label: Option<String>,
}

pub fn evaluate(cfg: &AppConfig, offline: bool, req: &EvalRequest) -> Result<EvalReport, ServiceError> {
    cfg.validate(offline)?;
    let dataset = load_dataset(&req.dataset)?;
    let label = req
        .label
        .clone()
        .unwrap_or_else(|| if req.identity { "identity".into() } else { "memory agent".into() });
    let options = EvalOptions {
        label,
        ..EvalOptions::default()
    };
    if req.identity {
        let agent = |s: &QASample| Ok::<_, String>(s.gold_answer.clone());
        return Ok(run_emqa(agent, &dataset.samples, &options));
    }

    let embedder = build_embedder(cfg)?;
    let chat = build_chat(cfg)?;
    let agent_cfg = AgentConfig {
        template: PromptTemplate(cfg.retrieval.prompt_template.clone()),
        context_budget_tokens: cfg.retrieval.context_budget_tokens,
        chat: cfg
            .chat
            .as_ref()
            .map(|c| ChatOptions { max_tokens: c.max_tokens, temperature: c.temperature })
            .unwrap_or_default(),
    };

    let videos: BTreeSet<&str> = dataset.samples.iter().map(|s| s.video_id.as_str()).collect();
    let mut agents: BTreeMap<String, Agent> = BTreeMap::new();
    for video in videos {
        let [store_file, fixture] = memory_candidates(&req.memories, video);
        let store = if store_file.is_file() {
            load(&store_file)?
        } else if fixture.is_file() {
            let shared = MemoryStore::new(embedder.dim()).into_shared();
            ingest_captions(&shared, embedder.as_ref(), &read_caption_fixture(&fixture)?, cfg.chunker)?;
            let s = shared.read().clone();
            s
        } else {
            tracing::warn!(video, "no memory found; its samples will be flagged");
            continue;
        };
        if store.dim() != embedder.dim() {
            return Err(ServiceError::BadRequest(format!(
                "{}: store dim {} differs from embedder dim {}",
                store_file.display(),
                store.dim(),
                embedder.dim()
            )));
        }
        agents.insert(
            video.to_string(),
            Agent::new(store.into_shared(), Arc::clone(&embedder), chat.clone(), agent_cfg.clone()),
        );
    }

    let k = cfg.retrieval.k;
    let agent = |s: &QASample| -> Result<String, String> {
        let a = agents
            .get(&s.video_id)
            .ok_or_else(|| format!("no memory for video {}", s.video_id))?;
        let q = MemoryQuery::new(s.question.clone())
            .and_then(|q| q.with_k(k))
            .map_err(|e| e.to_string())?;
        a.answer(&q).map(|ans| ans.text).map_err(|e| e.to_string())
    };
    Ok(run_emqa(agent, &dataset.samples, &options))
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_reports(report: &EvalReport, dir: &Path) -> std::io::Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join("report.json");
    let text = dir.join("report.txt");
    std::fs::write(&json, report.to_json())?;
    std::fs::write(&text, report.render_text())?;
    Ok([json, text])
}
