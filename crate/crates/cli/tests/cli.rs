use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ilstm_cli::container::{ModelContainer, StoredKind};
use ilstm_core::synth::{self, CorpusSpec, QaSpec};

const BIN: &str = env!("CARGO_BIN_EXE_ilstm");

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let c = synth::corpus(&CorpusSpec {
            train: 150,
            test: 40,
            ..CorpusSpec::default()
        })
        .unwrap();
        synth::write_trec(dir.path().join("train.txt"), &c.taxonomy, &c.train).unwrap();
        synth::write_trec(dir.path().join("test.txt"), &c.taxonomy, &c.test).unwrap();
        synth::write_glove(dir.path().join("glove.txt"), &c.embeddings).unwrap();
        let f = Self { dir };
        f.write_config("run.cfg", extra);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write_config(&self, name: &str, extra: &str) -> PathBuf {
        let text = format!(
            "glove_path = glove.txt\ntrain_path = train.txt\ntest_path = test.txt\nembedding_dim = 16\n\
             hidden = 8\nepochs = 3\nbatch_size = 16\nlearning_rate = 0.01\n{extra}"
        );
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn train(&self, args: &[&str]) -> (Output, PathBuf) {
        let model = self.path("model.ilstm");
        let cfg = self.path("run.cfg");
        let mut full = vec!["train", "--config", s(&cfg), "--out", s(&model)];
        full.extend_from_slice(args);
        (ilstm(&full), model)
    }
}

fn ilstm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ilstm_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gradcheck_passes_and_lists_tensors() {
    let o = ilstm(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for t in ["w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o"] {
        assert!(text.contains(&format!("lstm/lstm.{t}")), "{t}");
    }
    for t in ["one/head.w", "two/main_head.w", "two/sub_head.b", "responder/init_fwd_h.w", "responder/out.w"] {
        assert!(text.contains(t), "{t}");
    }
    assert!(text.contains("PASS"));
}

#[test]
fn gradcheck_unreachable_tolerance_fails() {
    let o = ilstm(&["gradcheck", "--tolerance", "1e-12", "--trials", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn train_writes_model_and_csv() {
    let f = Fixture::new("");
    let (o, model) = f.train(&["--model", "two", "--h", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let meta = ModelContainer::load(&model).unwrap().metadata;
    assert_eq!(meta.kind, StoredKind::Two);
    assert_eq!(meta.hidden, 12);
    assert_eq!(meta.input_dim, 16);
    let csv = fs::read_to_string(model.with_extension("csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,train_main_acc,train_sub_acc,test_main_acc,test_sub_acc");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').all(|c| !c.is_empty())));

    let (o, model) = f.train(&["--model", "one"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(ModelContainer::load(&model).unwrap().metadata.kind, StoredKind::One);
    let csv = fs::read_to_string(model.with_extension("csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().split(',').nth(3) == Some(""));
}

#[test]
fn missing_embedding_file_is_a_config_error() {
    let f = Fixture::new("");
    fs::remove_file(f.path("glove.txt")).unwrap();
    let (o, _) = f.train(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("glove.txt"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let f = Fixture::new("hiden = 4\n");
    let (o, _) = f.train(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hiden"));
}

#[test]
fn divergence_exits_with_numeric_code() {
    let f = Fixture::new("optimizer = sgd\n");
    let cfg = fs::read_to_string(f.path("run.cfg")).unwrap().replace("learning_rate = 0.01", "learning_rate = 1e308");
    fs::write(f.path("run.cfg"), cfg).unwrap();
    let (o, _) = f.train(&[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("epoch"));
}

#[test]
fn eval_prints_both_heads_and_is_repeatable() {
    let f = Fixture::new("");
    let (_, model) = f.train(&["--model", "two"]);
    let cfg = f.path("run.cfg");
    let args = ["eval", s(&model), "--config", s(&cfg)];
    let a = ilstm(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let text = stdout(&a);
    assert!(text.contains("test main accuracy: ") && text.contains("test sub accuracy: "));
    assert!(text.lines().all(|l| l.ends_with('%')));
    assert_eq!(stdout(&ilstm(&args)), text);
}

#[test]
fn eval_rejects_corrupt_model_and_foreign_labels() {
    let f = Fixture::new("");
    let (_, model) = f.train(&[]);
    let mut bytes = fs::read(&model).unwrap();
    bytes[0] ^= 0xff;
    let bad = f.path("bad.ilstm");
    fs::write(&bad, &bytes).unwrap();
    let o = ilstm(&["eval", s(&bad), "--config", s(&f.path("run.cfg"))]);
    assert_eq!(o.status.code(), Some(2));

    let foreign = f.path("foreign.txt");
    fs::write(&foreign, "LOC:sub0 filler1 ?\nXYZ:abc filler2 ?\n").unwrap();
    let o = ilstm(&["eval", s(&model), "--glove", s(&f.path("glove.txt")), "--test", s(&foreign)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("XYZ:abc"));
}

#[test]
fn classify_outputs() {
    let f = Fixture::new("");
    let (_, model) = f.train(&["--model", "two"]);
    let glove = f.path("glove.txt");
    let o = ilstm(&["classify", s(&model), "???", "--glove", s(&glove)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("tokens: ? ? ?"));
    assert!(text.contains("main: ") && text.contains("sub: "));

    let o = ilstm(&["classify", s(&model), "Qwertyuiop zxcvbnm asdfgh?", "--glove", s(&glove)]);
    assert_eq!(o.status.code(), Some(0));

    let o = ilstm(&["classify", s(&model), "!!! ...", "--glove", s(&glove)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn repl_loop() {
    let f = Fixture::new("");
    let (_, model) = f.train(&["--model", "two"]);
    let cfg = f.path("run.cfg");
    let args = ["repl", s(&model), "--config", s(&cfg)];
    let o = ilstm_stdin(&args, "\nfiller1 cue3x0 ?\n!!!\nexit\nfiller2 ?\n");
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.matches("main: ").count(), 1, "{text}");
    assert!(text.contains("error: question is empty"));
    let o = ilstm_stdin(&args, "filler2 ?");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("main: ").count(), 1);
}

#[test]
fn repl_with_responder_emits_vocabulary_tokens() {
    let f = Fixture::new("");
    let (_, model) = f.train(&["--model", "two"]);
    let qa = synth::qa_set(&QaSpec { train: 40, held_out: 0, ..QaSpec::default() }).unwrap();
    // Reuse the classifier's embedding file: the generator only needs some vectors.
    let pairs: Vec<_> = qa
        .train
        .iter()
        .map(|p| synth::QaPair {
            question: p.question.iter().map(|w| w.replace("topic", "cue")).collect(),
            ..p.clone()
        })
        .collect();
    synth::write_qa(f.path("qa.tsv"), &pairs).unwrap();
    let cfg = f.write_config("qa.cfg", "qa_path = qa.tsv\nepochs = 2\n");
    let cfg_text = fs::read_to_string(&cfg).unwrap().replace("epochs = 3\n", "");
    fs::write(&cfg, cfg_text).unwrap();
    let responder = f.path("responder.ilstm");
    let o = ilstm(&["train-responder", "--config", s(&cfg), "--classifier", s(&model), "--out", s(&responder), "--h", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let vocab = ModelContainer::load(&responder).unwrap().metadata.answer_vocab.unwrap();

    let o = ilstm_stdin(
        &["repl", s(&model), "--responder", s(&responder), "--glove", s(&f.path("glove.txt"))],
        "filler1 filler2 cue1 filler3 ?\nfiller4 cue2 ?\n",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let answers: Vec<String> = stdout(&o).lines().filter_map(|l| l.split("answer:").nth(1).map(str::to_owned)).collect();
    assert_eq!(answers.len(), 2);
    for a in answers {
        for tok in a.split_whitespace() {
            assert!(vocab.iter().any(|v| v == tok) && tok != "</s>", "{tok}");
        }
    }

    let one_model = f.train(&["--model", "one"]).1;
    let o = ilstm_stdin(&["repl", s(&one_model), "--responder", s(&responder), "--glove", s(&f.path("glove.txt"))], "");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_tables() {
    let f = Fixture::new("hs = 4, 6, 8, 10\nepochs = 1\n");
    let cfg = fs::read_to_string(f.path("run.cfg")).unwrap().replace("epochs = 3\n", "");
    fs::write(f.path("run.cfg"), cfg).unwrap();
    let out_a = f.path("a.csv");
    let o = ilstm(&["sweep", "--config", s(&f.path("run.cfg")), "--model", "two", "--out", s(&out_a)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out_a).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.split(',').count() == 5));
    assert!(stdout(&o).lines().next().unwrap().contains("train_main"));

    let single = f.write_config("single.cfg", "hs = 4\n");
    let o = ilstm(&["sweep", "--config", s(&single), "--model", "one"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let csv_part: Vec<&str> = text.split("\n\n").nth(1).unwrap().lines().collect();
    assert_eq!(csv_part, [csv_part[0], csv_part[1]]);
    assert_eq!(csv_part[0], "h,train_main,test_main");
}
