use criterion::{black_box, criterion_group, criterion_main, Criterion};

use plab_core::augment;
use plab_core::corpus::{self, TemplateSet};
use plab_core::model::{backward, forward, generate_greedy, init, nll_loss, Batch, ModelConfig};
use plab_core::tokenizer::{encode, Vocab, BOS, EOS};

fn bench_corpus() -> (Vec<corpus::Document>, Vocab) {
    let templates = TemplateSet::builtin();
    let profiles = corpus::generate_profiles(32, 3).unwrap();
    let docs = corpus::render_all_documents(&profiles, &templates).unwrap();
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let vocab = Vocab::build(&texts).unwrap();
    (docs, vocab)
}

fn train_batch(docs: &[corpus::Document], vocab: &Vocab, rows: usize) -> Batch {
    let seqs: Vec<(Vec<u32>, Vec<u8>)> = docs
        .iter()
        .take(rows)
        .map(|d| {
            let mut ids = vec![BOS];
            ids.extend(encode(&d.text, vocab).ids);
            ids.push(EOS);
            let mut mask = vec![1u8; ids.len()];
            mask[0] = 0;
            (ids, mask)
        })
        .collect();
    Batch::from_rows(&seqs)
}

fn bench_forward_backward(c: &mut Criterion) {
    let (docs, vocab) = bench_corpus();
    let cfg = ModelConfig::tiny(vocab.len());
    let params = init(&cfg, 1).unwrap();
    let batch = train_batch(&docs, &vocab, 8);

    c.bench_function("forward_batch8", |b| {
        b.iter(|| forward(&params, black_box(&batch)).unwrap())
    });
    c.bench_function("train_step_batch8", |b| {
        b.iter(|| {
            let (logits, cache) = forward(&params, black_box(&batch)).unwrap();
            let (loss, _) = nll_loss(&logits, &batch).unwrap();
            let grads = backward(&params, &logits, &cache, &batch).unwrap();
            black_box((loss, grads))
        })
    });
}

fn bench_generate(c: &mut Criterion) {
    let (docs, vocab) = bench_corpus();
    let cfg = ModelConfig::tiny(vocab.len());
    let params = init(&cfg, 1).unwrap();
    let mut prompt = vec![BOS];
    prompt.extend(encode(&docs[0].text, &vocab).ids.iter().take(12));
    c.bench_function("greedy_16_tokens", |b| {
        b.iter(|| generate_greedy(&params, black_box(&prompt), 16, &[EOS]).unwrap())
    });
}

fn bench_augment(c: &mut Criterion) {
    let (docs, _) = bench_corpus();
    c.bench_function("augment_set_k3", |b| {
        b.iter(|| {
            for (i, d) in docs.iter().enumerate() {
                black_box(augment::augment_set(d, 3, i as u64));
            }
        })
    });
}

fn bench_encode(c: &mut Criterion) {
    let (docs, vocab) = bench_corpus();
    c.bench_function("encode_corpus", |b| {
        b.iter(|| {
            for d in &docs {
                black_box(encode(&d.text, &vocab));
            }
        })
    });
}

criterion_group!(benches, bench_forward_backward, bench_generate, bench_augment, bench_encode);
criterion_main!(benches);
