//! Retrieval and answer generation over a [`MemoryStore`].

mod extractive;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use extractive::{best_sentence, content_words, split_sentences, STOPWORDS};

use crate::error::{Error, ProviderError, Result};
use crate::memory::{embed, EmbeddingProvider, Hit, MemoryStore, MetadataFilter, SharedStore};

pub const DEFAULT_K: usize = 4;
/// Four full chunks.
pub const DEFAULT_CONTEXT_BUDGET_TOKENS: usize = 4096;
pub const NO_MEMORY_ANSWER: &str = "no memory available";
pub const NO_CONTEXT_SENTINEL: &str = "(no stored observations matched this question)";
pub const DEFAULT_PROMPT_TEMPLATE: &str = "You are a memory assistant. Using only the following first-person observations, answer the question concisely.\n{context}\nQuestion: {question}\nAnswer:";
pub const EXTRACTIVE_ID: &str = "extractive";
pub const EXTRACTIVE_FALLBACK_ID: &str = "extractive-fallback";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryQuery {
    pub question: String,
    pub k: usize,
    pub filter: Option<MetadataFilter>,
}

impl MemoryQuery {
    pub fn new(question: impl Into<String>) -> Result<Self> {
        let question = question.into();
        if question.trim().is_empty() {
            return Err(Error::argument("question must not be empty"));
        }
        Ok(Self {
            question,
            k: DEFAULT_K,
            filter: None,
        })
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        self.k = k;
        Ok(self)
    }

    pub fn with_filter(mut self, filter: MetadataFilter) -> Self {
        self.filter = Some(filter);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RetrievedContext {
    /// Best first.
    pub hits: Vec<Hit>,
    pub total_context_tokens: usize,
}

impl RetrievedContext {
    pub fn new(hits: Vec<Hit>) -> Self {
        let total_context_tokens = hits.iter().map(|h| h.chunk.token_count).sum();
        Self {
            hits,
            total_context_tokens,
        }
    }

    /// Drops whole hits from the lowest score up until the token total fits.
    /// The best hit is always kept.
    pub fn fit_to_budget(mut self, budget_tokens: usize) -> Self {
        while self.hits.len() > 1 && self.total_context_tokens > budget_tokens {
            let dropped = self.hits.pop().expect("non-empty");
            self.total_context_tokens -= dropped.chunk.token_count;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub video_id: String,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub chunk_id: u64,
    pub score: f64,
}

impl From<&Hit> for Source {
    fn from(h: &Hit) -> Self {
        Self {
            video_id: h.chunk.metadata.video_id.clone(),
            t_start_s: h.chunk.metadata.t_start_s,
            t_end_s: h.chunk.metadata.t_end_s,
            chunk_id: h.chunk_id,
            score: h.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub sources: Vec<Source>,
    pub provider_id: String,
    /// The chat provider failed and the extractive answerer stood in.
    pub fallback_used: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatOptions {
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for ChatOptions {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

/// Answer generator fed with the assembled prompt.
pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str, options: &ChatOptions) -> Result<String, ProviderError>;
}

/// Prompt text with `{context}` and `{question}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptTemplate(pub String);

impl Default for PromptTemplate {
    fn default() -> Self {
        Self(DEFAULT_PROMPT_TEMPLATE.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub template: PromptTemplate,
    pub context_budget_tokens: usize,
    pub chat: ChatOptions,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            template: PromptTemplate::default(),
            context_budget_tokens: DEFAULT_CONTEXT_BUDGET_TOKENS,
            chat: ChatOptions::default(),
        }
    }
}

/// `[video {id} @ {start}s–{end}s]`
pub fn timestamp_marker(hit: &Hit) -> String {
    let m = &hit.chunk.metadata;
    format!("[video {} @ {:.2}s–{:.2}s]", m.video_id, m.t_start_s, m.t_end_s)
}

pub fn build_prompt(context: &RetrievedContext, question: &str, template: &PromptTemplate) -> String {
    let blocks = if context.hits.is_empty() {
        NO_CONTEXT_SENTINEL.to_string()
    } else {
        context
            .hits
            .iter()
            .map(|h| format!("{}\n{}", timestamp_marker(h), h.chunk.text))
            .collect::<Vec<_>>()
            .join("\n")
    };
    template
        .0
        .replace("{context}", &blocks)
        .replace("{question}", question.trim())
}

pub fn retrieve(
    query: &MemoryQuery,
    store: &MemoryStore,
    embedder: &dyn EmbeddingProvider,
) -> Result<RetrievedContext> {
    let q = embed(&query.question, embedder)?;
    let hits = store.query(&q, query.k, query.filter.as_ref())?;
    Ok(RetrievedContext::new(hits))
}

fn extractive(question: &str, context: &RetrievedContext, provider_id: &str) -> Answer {
    let top = &context.hits[0];
    let text = best_sentence(question, &top.chunk.text)
        .unwrap_or(top.chunk.text.as_str())
        .to_string();
    Answer {
        text,
        sources: vec![Source::from(top)],
        provider_id: provider_id.to_string(),
        fallback_used: provider_id == EXTRACTIVE_FALLBACK_ID,
        warning: None,
    }
}

/// Retrieves context and answers with `chat`, or extractively when `chat`
/// is absent or fails.
pub fn answer(
    query: &MemoryQuery,
    store: &MemoryStore,
    embedder: &dyn EmbeddingProvider,
    chat: Option<&dyn ChatProvider>,
    config: &AgentConfig,
) -> Result<Answer> {
    let context = retrieve(query, store, embedder)?.fit_to_budget(config.context_budget_tokens);
    if context.hits.is_empty() {
        return Ok(Answer {
            text: NO_MEMORY_ANSWER.to_string(),
            sources: Vec::new(),
            provider_id: chat.map_or(EXTRACTIVE_ID, |c| c.id()).to_string(),
            fallback_used: false,
            warning: None,
        });
    }
    let Some(chat) = chat else {
        return Ok(extractive(&query.question, &context, EXTRACTIVE_ID));
    };

    let prompt = build_prompt(&context, &query.question, &config.template);
    let reply = chat.complete(&prompt, &config.chat).and_then(|text| {
        if text.trim().is_empty() {
            Err(ProviderError::EmptyResponse)
        } else {
            Ok(text)
        }
    });
    match reply {
        Ok(text) => Ok(Answer {
            text,
            sources: context.hits.iter().map(Source::from).collect(),
            provider_id: chat.id().to_string(),
            fallback_used: false,
            warning: None,
        }),
        Err(err) => {
            tracing::warn!(provider = chat.id(), %err, "chat provider failed, answering extractively");
            let mut a = extractive(&query.question, &context, EXTRACTIVE_FALLBACK_ID);
            a.warning = Some(format!("chat provider {} failed: {err}", chat.id()));
            Ok(a)
        }
    }
}

/// A store handle bundled with its providers.
#[derive(Clone)]
pub struct Agent {
    store: SharedStore,
    embedder: Arc<dyn EmbeddingProvider>,
    chat: Option<Arc<dyn ChatProvider>>,
    config: AgentConfig,
}

impl Agent {
    pub fn new(
        store: SharedStore,
        embedder: Arc<dyn EmbeddingProvider>,
        chat: Option<Arc<dyn ChatProvider>>,
        config: AgentConfig,
    ) -> Self {
        Self {
            store,
            embedder,
            chat,
            config,
        }
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn embedder(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.embedder
    }

    pub fn retrieve(&self, query: &MemoryQuery) -> Result<RetrievedContext> {
        retrieve(query, &self.store.read(), self.embedder.as_ref())
    }

    pub fn answer(&self, query: &MemoryQuery) -> Result<Answer> {
        answer(
            query,
            &self.store.read(),
            self.embedder.as_ref(),
            self.chat.as_deref(),
            &self.config,
        )
    }
}
