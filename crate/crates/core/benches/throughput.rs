//! Sequential vs parallel throughput. Run with `cargo bench -p epmem-core`;
//! add `--no-default-features` to time the fallback build of `embed_many`.

use std::time::Duration;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use epmem_core::capture::{run_encoding_pipeline, synthetic_frames, CaptionProvider, Frame, StubCaptioner};
use epmem_core::eval::{run_emqa, EvalOptions, QASample};
use epmem_core::memory::{
    embed_many, Chunk, ChunkMetadata, EmbeddingVector, Execution, HashedBowEmbedder, MemoryStore,
    StoredItem,
};
use epmem_core::ProviderError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    EmbeddingVector::normalized((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn store_of(n: usize, dim: usize) -> MemoryStore {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = MemoryStore::new(dim);
    for i in 0..n as u64 {
        let chunk = Chunk {
            chunk_id: i,
            text: String::new(),
            token_count: 0,
            metadata: ChunkMetadata {
                video_id: "bench".into(),
                t_start_s: 0.0,
                t_end_s: 0.0,
                chunk_index: i,
                frame_span: [0, 0],
                token_span: [0, 0],
            },
        };
        store.upsert(StoredItem { chunk, vector: random_unit(&mut rng, dim) }).unwrap();
    }
    store
}

fn query(c: &mut Criterion) {
    let store = store_of(100_000, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = random_unit(&mut rng, 256);
    let mut g = c.benchmark_group("query_100k_dim256_top10");
    g.throughput(Throughput::Elements(100_000));
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        g.bench_function(name, |b| {
            b.iter(|| store.query_with(black_box(&q), 10, None, exec).unwrap())
        });
    }
    g.finish();
}

/// Stub with a fixed per-frame latency, standing in for a remote model.
struct Slow(StubCaptioner);

impl CaptionProvider for Slow {
    fn id(&self) -> &str {
        "slow-stub"
    }
    fn describe(&self, frame: &Frame, prompt: &str) -> Result<String, ProviderError> {
        std::thread::sleep(Duration::from_micros(500));
        self.0.describe(frame, prompt)
    }
}

fn encoding(c: &mut Criterion) {
    let frames = synthetic_frames("bench", 16.0, 4.0);
    let provider = Slow(StubCaptioner::new(0));
    let mut g = c.benchmark_group("encode_64_frames");
    g.throughput(Throughput::Elements(frames.len() as u64));
    g.sample_size(20);
    for workers in [1usize, 2, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| run_encoding_pipeline(&frames, &provider, "describe", w).unwrap())
        });
    }
    g.finish();
}

fn embedding(c: &mut Criterion) {
    let stub = StubCaptioner::new(3);
    let texts: Vec<String> = (0..4096)
        .map(|i| (0..20).map(|j| stub.caption_for("bench", i * 20 + j)).collect::<Vec<_>>().join(" "))
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let e = HashedBowEmbedder::default();
    let mut g = c.benchmark_group("embed_many_4096");
    g.throughput(Throughput::Elements(refs.len() as u64));
    g.sample_size(20);
    let mode = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };
    g.bench_function(mode, |b| b.iter(|| embed_many(black_box(&refs), &e, 64).unwrap()));
    g.finish();
}

fn eval(c: &mut Criterion) {
    let stub = StubCaptioner::new(5);
    let samples: Vec<QASample> = (0..2000)
        .map(|i| QASample {
            sample_id: format!("s{i:05}"),
            video_id: "bench".into(),
            question: "what happened?".into(),
            gold_answer: stub.caption_for("gold", i),
            segment: None,
            template: Some(format!("t{}", i % 5)),
            split: None,
        })
        .collect();
    let agent = |s: &QASample| -> Result<String, std::convert::Infallible> {
        Ok(s.gold_answer.split_whitespace().rev().collect::<Vec<_>>().join(" "))
    };
    let mut g = c.benchmark_group("run_emqa_2000");
    g.throughput(Throughput::Elements(samples.len() as u64));
    g.sample_size(20);
    for parallel in [false, true] {
        let opts = EvalOptions { parallel, ..EvalOptions::default() };
        let name = if parallel { "parallel" } else { "sequential" };
        g.bench_function(name, |b| b.iter(|| run_emqa(agent, &samples, &opts)));
    }
    g.finish();
}

criterion_group!(benches, query, encoding, embedding, eval);
criterion_main!(benches);
