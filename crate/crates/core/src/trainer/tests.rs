use super::*;
use crate::models::{embed_all, ModelOne, ModelTwo, QaExample, Responder};
use crate::synth::{self, CorpusSpec};

fn corpus_data(spec: &CorpusSpec) -> (usize, usize, Vec<EmbeddedQuestion<f64>>, Vec<EmbeddedQuestion<f64>>) {
    let c = synth::corpus(spec).unwrap();
    let train = embed_all(&c.embeddings, &c.train);
    let test = embed_all(&c.embeddings, &c.test);
    (c.taxonomy.num_main(), c.taxonomy.num_fine(), train, test)
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden: 8,
        optimizer: OptimizerKind::Adam {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        batch_size: 8,
        epochs,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (_, _, train_data, _) = corpus_data(&CorpusSpec::default());
    let mut rng = Rng::seed_from_u64(1);
    let model = ModelTwo::<f64>::new(4, 16, 6, 12, &mut rng).unwrap();
    for optimizer in [OptimizerKind::Sgd { lr: 0.0 }, OptimizerKind::Adam { lr: 0.0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }] {
        let cfg = TrainConfig {
            optimizer,
            epochs: 1,
            ..TrainConfig::default()
        };
        let (trained, records) = train(model.clone(), &train_data[..1], None, &cfg).unwrap();
        assert_eq!(trained, model);
        assert_eq!(records.len(), 1);
    }
}

#[test]
fn memorizes_twenty_examples() {
    let (nm, nf, train_data, _) = corpus_data(&CorpusSpec::default());
    let subset = &train_data[..20];
    let (model, records) = train_classifier(ModelKind::Two, &small_config(50), nm, nf, subset, None).unwrap();
    let last = records.last().unwrap();
    assert_eq!(last.train.main, 1.0);
    assert_eq!(last.train.sub, Some(1.0));
    assert!(matches!(model, Classifier::Two(_)));
}

#[test]
fn training_is_deterministic() {
    let (nm, nf, train_data, test_data) = corpus_data(&CorpusSpec::default());
    let cfg = TrainConfig {
        validation_fraction: 0.1,
        ..small_config(3)
    };
    let run = || train_classifier(ModelKind::Two, &cfg, nm, nf, &train_data, Some(&test_data)).unwrap();
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    assert!(r1[0].validation.is_some());
    let (_, r3) = train_classifier(ModelKind::Two, &TrainConfig { seed: 43, ..cfg.clone() }, nm, nf, &train_data, None).unwrap();
    assert_ne!(r1[2].train_loss, r3[2].train_loss);
}

#[test]
fn loss_decreases_over_first_five_epochs() {
    let (nm, nf, train_data, test_data) = corpus_data(&CorpusSpec::default());
    for kind in [ModelKind::One, ModelKind::Two] {
        let cfg = TrainConfig { hidden: 16, epochs: 5, ..TrainConfig::default() };
        let (_, records) = train_classifier(kind, &cfg, nm, nf, &train_data, Some(&test_data)).unwrap();
        for w in records.windows(2) {
            assert!(w[1].train_loss < w[0].train_loss, "{kind}: {:?}", records.iter().map(|r| r.train_loss).collect::<Vec<_>>());
        }
        for r in &records {
            assert!((0.0..=1.0).contains(&r.train.main));
            assert_eq!(r.train.sub.is_some(), kind == ModelKind::Two);
        }
    }
}

#[test]
fn evaluate_counts_and_is_order_free() {
    let (nm, _, train_data, _) = corpus_data(&CorpusSpec::default());
    let mut rng = Rng::seed_from_u64(3);
    let mut model = ModelOne::<f64>::new(4, 16, nm, &mut rng).unwrap();
    model.head = crate::models::DenseHead::zeros(nm, 4);
    // Uniform outputs: argmax is class 0, so accuracy is class 0's frequency.
    let zeros = train_data.iter().filter(|e| e.main == 0).count() as f64 / train_data.len() as f64;
    let acc = evaluate(&model, &train_data).unwrap();
    assert_eq!(acc.main, zeros);
    assert_eq!(acc.sub, None);

    let mut shuffled = train_data.clone();
    rng.shuffle(&mut shuffled);
    assert_eq!(evaluate(&model, &shuffled).unwrap(), acc);

    // A model whose bias always names the true class is always right.
    let only_two: Vec<_> = train_data.iter().filter(|e| e.main == 2).cloned().collect();
    model.head.b[2] = 1.0;
    assert_eq!(evaluate(&model, &only_two).unwrap().main, 1.0);
    assert!(evaluate(&model, &[]).is_err());
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let (_, _, train_data, _) = corpus_data(&CorpusSpec::default());
    let mut rng = Rng::seed_from_u64(4);
    let mut model = ModelOne::<f64>::new(4, 16, 6, &mut rng).unwrap();
    model.head.b[0] = f64::NAN;
    match train(model, &train_data, None, &small_config(2)) {
        Err(Error::Diverged { epoch, batch, .. }) => assert_eq!((epoch, batch), (1, 1)),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let (_, _, train_data, _) = corpus_data(&CorpusSpec::default());
    let mut rng = Rng::seed_from_u64(5);
    let model = ModelOne::<f64>::new(4, 16, 6, &mut rng).unwrap();
    for cfg in [
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { clip: Some(0.0), ..TrainConfig::default() },
        TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
        TrainConfig { optimizer: OptimizerKind::Sgd { lr: f64::NAN }, ..TrainConfig::default() },
    ] {
        assert!(train(model.clone(), &train_data, None, &cfg).is_err());
    }
    assert!(train(model, &[], None, &TrainConfig::default()).is_err());
}

#[test]
fn clipping_keeps_training_finite() {
    let (nm, nf, train_data, _) = corpus_data(&CorpusSpec::default());
    let cfg = TrainConfig { clip: Some(0.5), ..small_config(2) };
    let (_, records) = train_classifier(ModelKind::One, &cfg, nm, nf, &train_data, None).unwrap();
    assert!(records.iter().all(|r| r.train_loss.is_finite()));
}

#[test]
fn epoch_csv_layout() {
    let rec = |sub: Option<f64>| EpochRecord {
        epoch: 1,
        train_loss: 0.5,
        train: Accuracy { main: 0.75, sub },
        test: Some(Accuracy { main: 0.5, sub }),
        validation: None,
    };
    let mut one = Vec::new();
    write_epoch_csv(&[rec(None)], &mut one).unwrap();
    assert_eq!(
        String::from_utf8(one).unwrap(),
        "epoch,train_loss,train_main_acc,train_sub_acc,test_main_acc,test_sub_acc\n1,0.500000,0.750000,,0.500000,\n"
    );
    let mut two = Vec::new();
    write_epoch_csv(&[rec(Some(0.25))], &mut two).unwrap();
    assert!(String::from_utf8(two).unwrap().ends_with("1,0.500000,0.750000,0.250000,0.500000,0.250000\n"));
    assert_eq!(format_percent(0.898), "89.80%");
}

#[test]
fn sweep_table_shapes() {
    let (nm, nf, train_data, test_data) = corpus_data(&CorpusSpec { train: 60, test: 20, ..CorpusSpec::default() });
    let cfg = small_config(2);
    let table = sweep_h(ModelKind::Two, &[2, 3, 4, 5], &cfg, nm, nf, &train_data, &test_data).unwrap();
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "h,train_main,train_sub,test_main,test_sub");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert_eq!(table.to_text().lines().count(), 5);
    assert_eq!(csv, sweep_h(ModelKind::Two, &[2, 3, 4, 5], &cfg, nm, nf, &train_data, &test_data).unwrap().to_csv());

    let single = sweep_h(ModelKind::One, &[3], &cfg, nm, nf, &train_data, &test_data).unwrap();
    assert_eq!(single.to_csv().lines().next(), Some("h,train_main,test_main"));
    let (model, _) = train_classifier(ModelKind::One, &TrainConfig { hidden: 3, ..cfg.clone() }, nm, nf, &train_data, None).unwrap();
    let Classifier::One(m) = model else { unreachable!() };
    assert_eq!(single.rows[0].test, evaluate(&m, &test_data).unwrap());
    assert!(sweep_h(ModelKind::One, &[0], &cfg, nm, nf, &train_data, &test_data).is_err());
}

#[test]
fn responder_overfits_ten_pairs() {
    let qa = synth::qa_set(&synth::QaSpec::default()).unwrap();
    let pairs: Vec<QaExample<f64>> = qa.train[..10].iter().map(|p| p.example(&qa).unwrap()).collect();
    let mut rng = Rng::seed_from_u64(6);
    let model = Responder::<f64>::new(16, 16, 18, qa.vocab.clone(), &mut rng).unwrap();
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Adam { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 },
        batch_size: 10,
        epochs: 150,
        ..TrainConfig::default()
    };
    let (_, records) = train_unlabeled(model, &pairs, None, &cfg).unwrap();
    assert!(records.last().unwrap().train_loss < 0.1, "{}", records.last().unwrap().train_loss);
}
