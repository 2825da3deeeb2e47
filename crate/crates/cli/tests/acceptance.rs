//! Acceptance suite. Each criterion prints one `PASS`/`FAIL`/`BLOCKED` line
//! on stderr (uncaptured) and asserts at the stated tolerance.
//!
//! Criteria 2–4 and the embedding-coverage check need the real corpora. They
//! are `#[ignore]`d and read these variables:
//!
//! * `ILSTM_GLOVE`: 300-dimensional GloVe text file
//! * `ILSTM_TREC_TRAIN`, `ILSTM_TREC_TEST`: labelled question files
//!
//! Run them with `cargo test --release -p ilstm-cli --test acceptance -- --ignored`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ilstm_cli::full_grad_check;
use ilstm_core::dataset::{load_trec, scan_labels, LabelTaxonomy, LabeledQuestion};
use ilstm_core::models::{embed_all, EmbeddedQuestion, ModelKind, ModelTwo, Responder};
use ilstm_core::numerics::{Rng, Vector};
use ilstm_core::synth::{self, CorpusSpec, QaSpec};
use ilstm_core::textpipe::{clean_and_tokenize, embed, load_glove, EmbeddingTable};
use ilstm_core::trainer::{format_percent, train_classifier, train_unlabeled, EpochRecord, OptimizerKind, TrainConfig};

fn report(id: &str, name: &str, verdict: &str, detail: &str) {
    let _ = writeln!(std::io::stderr(), "[acceptance] criterion {id} ({name}): {verdict} - {detail}");
}

fn check(id: &str, name: &str, pass: bool, detail: String) {
    report(id, name, if pass { "PASS" } else { "FAIL" }, &detail);
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let report = full_grad_check(20, 1e-4, 2024).unwrap();
    let elapsed = start.elapsed();
    let covered = ["one/", "two/main_head", "two/sub_head", "two/lstm", "responder/init_fwd_h", "responder/init_bwd_c"]
        .iter()
        .all(|p| report.entries.iter().any(|e| e.name.starts_with(p)));
    check(
        "1",
        "gradient correctness",
        report.passed() && covered && report.trials >= 20 && elapsed < Duration::from_secs(60),
        format!(
            "worst relative error {:.2e} < 1e-4 over {} tensors, {} trials each, {:.1}s < 60s",
            report.worst(),
            report.entries.len(),
            report.trials,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_5_padding_step_invariant() {
    let mut rng = Rng::seed_from_u64(5);
    let model = ModelTwo::<f64>::new(100, 300, 6, 50, &mut rng).unwrap();
    let reused = Vector::zeros(300);
    let bits = |v: &Vector<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let (mut identical, mut sensitive) = (0, 0);
    for _ in 0..100 {
        let len = 1 + rng.below(20);
        let xs: Vec<Vector<f64>> = (0..len).map(|_| (0..300).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let fresh = model.forward_with_pad(&xs, &model.pad()).unwrap();
        let again = model.forward_with_pad(&xs, &reused).unwrap();
        identical += usize::from(bits(fresh.sub_input()) == bits(again.sub_input()));
        let noise: Vector<f64> = (0..300).map(|_| rng.uniform(0.1, 1.0)).collect();
        let noisy = model.forward_with_pad(&xs, &noise).unwrap();
        sensitive += usize::from(bits(fresh.sub_input()) != bits(noisy.sub_input()));
    }
    check(
        "5",
        "padding-step invariant",
        identical == 100 && sensitive == 100,
        format!("{identical}/100 bit-identical with a reused zero PAD, {sensitive}/100 changed by a nonzero PAD"),
    );
}

#[test]
fn criterion_6_sweep_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let c = synth::corpus(&CorpusSpec {
        train: 120,
        test: 40,
        ..CorpusSpec::default()
    })
    .unwrap();
    synth::write_trec(dir.path().join("train.txt"), &c.taxonomy, &c.train).unwrap();
    synth::write_trec(dir.path().join("test.txt"), &c.taxonomy, &c.test).unwrap();
    synth::write_glove(dir.path().join("glove.txt"), &c.embeddings).unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "glove_path = glove.txt\ntrain_path = train.txt\ntest_path = test.txt\nembedding_dim = 16\n\
         epochs = 2\nseed = 17\nhs = 25, 50, 75, 100\n",
    )
    .unwrap();
    let run = |name: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ilstm"))
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--model", "two", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let rows = String::from_utf8_lossy(&a).lines().count() - 1;
    check(
        "6",
        "sweep determinism",
        a == b && rows == 4,
        format!("two seeded sweeps: {} bytes each, byte-identical = {}, {rows} rows", a.len(), a == b),
    );
}

fn responder_config(epochs: usize, batch_size: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        hidden: 32,
        optimizer: OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        batch_size,
        epochs,
        seed: 7,
        ..TrainConfig::default()
    }
}

#[test]
fn criterion_7_responder_properties() {
    let qa = synth::qa_set(&QaSpec::default()).unwrap();
    let train: Vec<_> = qa.train.iter().map(|p| p.example(&qa).unwrap()).collect();
    let width = qa.num_main + qa.num_fine;
    let vocab_size = qa.vocab.len();
    let threshold = (vocab_size as f64).ln() / 4.0;

    let cfg = responder_config(100, 32, 1e-2);
    let model = Responder::<f64>::new(cfg.hidden, qa.embeddings.dim(), width, qa.vocab.clone(), &mut Rng::seed_from_u64(cfg.seed)).unwrap();
    let (model, records) = train_unlabeled(model, &train, None, &cfg).unwrap();
    let first_below = records.iter().find(|r| r.train_loss < threshold).map(|r| r.epoch);

    let held: Vec<_> = qa.held_out.iter().filter(|p| qa.vocab.encode(&p.answer).is_ok()).collect();
    let (mut in_vocab, mut changed) = (true, 0);
    for p in &held {
        let ex = p.example(&qa).unwrap();
        let flipped = p.example_with_main(&qa, (p.main + 1) % qa.num_main).unwrap();
        let a = model.generate(&ex.cond, &ex.xs).unwrap();
        let b = model.generate(&flipped.cond, &flipped.xs).unwrap();
        in_vocab &= a.iter().chain(&b).all(|t| qa.vocab.contains(t) && t != "</s>");
        changed += usize::from(a != b);
    }
    let sensitivity = changed as f64 / held.len() as f64;

    let ten: Vec<_> = train[..10].to_vec();
    let small = Responder::<f64>::new(16, qa.embeddings.dim(), width, qa.vocab.clone(), &mut Rng::seed_from_u64(3)).unwrap();
    let (_, overfit) = train_unlabeled(small, &ten, None, &responder_config(150, 10, 1e-2)).unwrap();
    let overfit_loss = overfit.last().unwrap().train_loss;

    check(
        "7",
        "responder properties",
        first_below.is_some() && in_vocab && sensitivity >= 0.5 && overfit_loss < 0.1,
        format!(
            "500 pairs: loss < ln({vocab_size})/4 = {threshold:.3} first at epoch {first_below:?} (final {:.4}); \
             generated tokens in vocabulary = {in_vocab}; class flip changes output on {changed}/{} held-out ({:.0}%); \
             10-pair overfit loss {overfit_loss:.4} < 0.1",
            records.last().unwrap().train_loss,
            held.len(),
            sensitivity * 100.0
        ),
    );
}

#[test]
fn criterion_8_tokenizer_golden_file() {
    let golden = include_str!("data/tokenizer_golden.tsv");
    let mut failures = Vec::new();
    let mut total = 0;
    for line in golden.lines().filter(|l| !l.is_empty()) {
        let (question, expected) = line.split_once('\t').expect("question<TAB>tokens");
        total += 1;
        let got = clean_and_tokenize(question);
        let want: Vec<&str> = expected.split(' ').filter(|t| !t.is_empty()).collect();
        if got != want {
            failures.push(format!("{question:?}: got {got:?}"));
        }
    }
    check(
        "8",
        "tokenizer golden file",
        total == 25 && failures.is_empty(),
        format!("{}/{total} pairs exact{}", total - failures.len(), if failures.is_empty() { String::new() } else { format!("; {failures:?}") }),
    );
}

struct Corpora {
    glove: EmbeddingTable<f64>,
    taxonomy: LabelTaxonomy,
    train: Vec<LabeledQuestion>,
    test: Vec<LabeledQuestion>,
}

fn env_path(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from).filter(|p| p.exists())
}

const CORPUS_VARS: [&str; 3] = ["ILSTM_GLOVE", "ILSTM_TREC_TRAIN", "ILSTM_TREC_TEST"];

fn corpora() -> Option<&'static Corpora> {
    static CELL: OnceLock<Option<Corpora>> = OnceLock::new();
    CELL.get_or_init(|| {
        let [glove, train, test] = CORPUS_VARS.map(env_path);
        let (glove, train, test) = (glove?, train?, test?);
        let taxonomy = LabelTaxonomy::trec(scan_labels(&train).unwrap()).unwrap();
        Some(Corpora {
            glove: load_glove(&glove).unwrap(),
            train: load_trec(&train, &taxonomy).unwrap(),
            test: load_trec(&test, &taxonomy).unwrap(),
            taxonomy,
        })
    })
    .as_ref()
}

fn require_corpora(id: &str, name: &str) -> &'static Corpora {
    match corpora() {
        Some(c) => c,
        None => {
            let detail = format!("needs {} pointing at existing files", CORPUS_VARS.join(", "));
            report(id, name, "BLOCKED", &detail);
            panic!("criterion {id} is blocked: {detail}");
        }
    }
}

/// Prints the status of the corpus-dependent criteria without running them.
#[test]
fn corpus_dependent_criteria_status() {
    let missing: Vec<&str> = CORPUS_VARS.iter().copied().filter(|k| env_path(k).is_none()).collect();
    for (id, name) in [
        ("2", "model one accuracy"),
        ("3", "model two accuracy"),
        ("4", "epoch curve stability"),
        ("coverage", "embedding coverage"),
    ] {
        if missing.is_empty() {
            report(id, name, "READY", "corpora found; run the ignored tests with --ignored");
        } else {
            report(id, name, "BLOCKED", &format!("{} not set; not evaluated", missing.join(", ")));
        }
    }
}

fn embedded(c: &Corpora) -> (Vec<EmbeddedQuestion<f64>>, Vec<EmbeddedQuestion<f64>>) {
    (embed_all(&c.glove, &c.train), embed_all(&c.glove, &c.test))
}

fn model_two_h100() -> &'static Vec<EpochRecord> {
    static CELL: OnceLock<Vec<EpochRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let c = require_corpora("3", "model two accuracy");
        let (train, test) = embedded(c);
        let cfg = TrainConfig { hidden: 100, ..TrainConfig::default() };
        let (_, records) =
            train_classifier(ModelKind::Two, &cfg, c.taxonomy.num_main(), c.taxonomy.num_fine(), &train, Some(&test)).unwrap();
        records
    })
}

#[test]
#[ignore = "needs ILSTM_GLOVE, ILSTM_TREC_TRAIN and ILSTM_TREC_TEST"]
fn criterion_2_model_one_accuracy() {
    let c = require_corpora("2", "model one accuracy");
    let (train, test) = embedded(c);
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for hidden in [50, 100] {
        let cfg = TrainConfig { hidden, ..TrainConfig::default() };
        let (_, records) =
            train_classifier(ModelKind::One, &cfg, c.taxonomy.num_main(), c.taxonomy.num_fine(), &train, Some(&test)).unwrap();
        let acc = records.last().unwrap().test.unwrap().main;
        pass &= acc >= 0.85;
        parts.push(format!("H={hidden}: test main {} (>= 85.00%)", format_percent(acc)));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(30 * 60);
    check("2", "model one accuracy", pass, format!("{}; {:.0}s <= 1800s", parts.join(", "), elapsed.as_secs_f64()));
}

#[test]
#[ignore = "needs ILSTM_GLOVE, ILSTM_TREC_TRAIN and ILSTM_TREC_TEST"]
fn criterion_3_model_two_accuracy() {
    let last = model_two_h100().last().unwrap();
    let test = last.test.unwrap();
    let sub = test.sub.unwrap();
    check(
        "3",
        "model two accuracy",
        test.main >= 0.85 && sub >= 0.72 && last.train.main >= 0.99,
        format!(
            "H=100: test main {} (>= 85.00%), test sub {} (>= 72.00%), train main {} (>= 99.00%)",
            format_percent(test.main),
            format_percent(sub),
            format_percent(last.train.main)
        ),
    );
}

#[test]
#[ignore = "needs ILSTM_GLOVE, ILSTM_TREC_TRAIN and ILSTM_TREC_TEST"]
fn criterion_4_epoch_curve_stability() {
    let records = model_two_h100();
    let tail: Vec<f64> = records.iter().rev().take(10).map(|r| r.test.unwrap().main).collect();
    let range = tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
    let violations: Vec<usize> = records
        .iter()
        .filter(|r| r.epoch > 3 && r.train.main < r.test.unwrap().main)
        .map(|r| r.epoch)
        .collect();
    check(
        "4",
        "epoch curve stability",
        records.len() == 30 && range < 0.05 && violations.is_empty(),
        format!(
            "{} epochs; last-10 test main range {:.2} pp (< 5); epochs after 3 with train < test: {violations:?}",
            records.len(),
            range * 100.0
        ),
    );
}

#[test]
#[ignore = "needs ILSTM_GLOVE, ILSTM_TREC_TRAIN and ILSTM_TREC_TEST"]
fn embedding_coverage() {
    let c = require_corpora("coverage", "embedding coverage");
    let words: BTreeSet<&str> = c.train.iter().chain(&c.test).flat_map(|q| q.tokens.iter().map(String::as_str)).collect();
    c.glove.reset_oov_count();
    let tokens: Vec<&str> = words.iter().copied().collect();
    embed(&c.glove, &tokens);
    let oov = c.glove.oov_count();
    check(
        "coverage",
        "embedding coverage",
        oov == 0,
        format!("{} distinct words, {oov} without a vector (expected 9123 and 0)", words.len()),
    );
}
