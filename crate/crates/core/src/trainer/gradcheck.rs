use std::fmt;

use crate::error::Result;
use crate::lstm::{self, LstmParams, LstmState};
use crate::models::{AnswerVocab, EmbeddedQuestion, ModelOne, ModelTwo, QaExample, Responder, Score, Trainable};
use crate::numerics::{finite_diff_grad, relative_error, Rng, Vector};
use crate::params::{vector_view, vector_view_mut, ParamView, ParamViewMut, Parameters};

const FD_EPS: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Bare recurrence, including the gradient on the initial state.
    Lstm,
    ModelOne,
    ModelTwo,
    Responder,
}

impl CheckKind {
    pub const ALL: [CheckKind; 4] = [CheckKind::Lstm, CheckKind::ModelOne, CheckKind::ModelTwo, CheckKind::Responder];

    pub fn label(self) -> &'static str {
        match self {
            CheckKind::Lstm => "lstm",
            CheckKind::ModelOne => "one",
            CheckKind::ModelTwo => "two",
            CheckKind::Responder => "responder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    /// `<model>/<tensor>`, e.g. `two/lstm.w_f`.
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub trials: usize,
    pub entries: Vec<TensorError>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.max_rel_error < self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn merge(mut self, other: GradCheckReport) -> Self {
        self.trials = self.trials.max(other.trials);
        self.entries.extend(other.entries);
        self
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
        for e in &self.entries {
            let verdict = if e.max_rel_error < self.tolerance { "ok" } else { "FAIL" };
            writeln!(f, "{:<width$}  {:.3e}  {verdict}", e.name, e.max_rel_error)?;
        }
        write!(
            f,
            "{} tensors, {} trials, worst {:.3e}, tolerance {:.1e}: {}",
            self.entries.len(),
            self.trials,
            self.worst(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Compares analytic gradients with central differences on `trials` small
/// random instances of `kind`.
pub fn grad_check(kind: CheckKind, trials: usize, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    match kind {
        CheckKind::Lstm => grad_check_with(kind.label(), trials, tolerance, seed, random_probe, analytic_grad::<LstmProbe>),
        CheckKind::ModelOne => grad_check_with(kind.label(), trials, tolerance, seed, random_model_one, analytic_grad::<ModelOne<f64>>),
        CheckKind::ModelTwo => grad_check_with(kind.label(), trials, tolerance, seed, random_model_two, analytic_grad::<ModelTwo<f64>>),
        CheckKind::Responder => grad_check_with(kind.label(), trials, tolerance, seed, random_responder, analytic_grad::<Responder<f64>>),
    }
}

fn analytic_grad<M: Trainable<f64>>(model: &M, ex: &M::Example) -> Result<M> {
    let mut grads = model.zeros_like();
    model.accumulate_grad(ex, &mut grads)?;
    Ok(grads)
}

/// Generic harness: `generate` draws an instance, `analytic` computes its
/// gradient (normally [`Trainable::accumulate_grad`]; swappable for fault
/// injection).
pub fn grad_check_with<M, G, A>(
    label: &str,
    trials: usize,
    tolerance: f64,
    seed: u64,
    mut generate: G,
    analytic: A,
) -> Result<GradCheckReport>
where
    M: Trainable<f64>,
    G: FnMut(&mut Rng) -> Result<(M, M::Example)>,
    A: Fn(&M, &M::Example) -> Result<M>,
{
    let mut entries: Vec<TensorError> = Vec::new();
    for trial in 0..trials {
        let mut rng = Rng::seed_from_u64(Rng::derive_seed(seed, trial as u64));
        let (model, ex) = generate(&mut rng)?;
        let grads = analytic(&model, &ex)?;
        let numeric = finite_diff_grad(
            |theta: &[f64]| {
                let mut m = model.clone();
                m.assign_flat(theta).expect("perturbed vector has the registry's length");
                let mut scratch = m.zeros_like();
                m.accumulate_grad(&ex, &mut scratch).unwrap_or(f64::NAN)
            },
            &model.flatten(),
            FD_EPS,
        )?;
        let mut offset = 0;
        for (k, p) in grads.params().into_iter().enumerate() {
            let n = p.data.len();
            let worst = p
                .data
                .iter()
                .zip(&numeric[offset..offset + n])
                .map(|(&a, &b)| relative_error(a, b, REL_FLOOR))
                .fold(0.0, f64::max);
            offset += n;
            let name = format!("{label}/{}", p.name);
            match entries.get_mut(k) {
                Some(e) => e.max_rel_error = e.max_rel_error.max(worst),
                None => entries.push(TensorError { name, max_rel_error: worst }),
            }
        }
    }
    Ok(GradCheckReport {
        tolerance,
        trials,
        entries,
    })
}

fn random_seq(t: usize, e: usize, rng: &mut Rng) -> Vec<Vector<f64>> {
    (0..t).map(|_| (0..e).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect()
}

fn dims(rng: &mut Rng) -> (usize, usize, usize) {
    (2 + rng.below(4), 2 + rng.below(7), 1 + rng.below(6))
}

fn random_model_one(rng: &mut Rng) -> Result<(ModelOne<f64>, EmbeddedQuestion<f64>)> {
    let (h, e, t) = dims(rng);
    let classes = 2 + rng.below(5);
    let model = ModelOne::new(h, e, classes, rng)?;
    let ex = EmbeddedQuestion {
        xs: random_seq(t, e, rng),
        main: rng.below(classes),
        fine: 0,
    };
    Ok((model, ex))
}

fn random_model_two(rng: &mut Rng) -> Result<(ModelTwo<f64>, EmbeddedQuestion<f64>)> {
    let (h, e, t) = dims(rng);
    let (main, fine) = (2 + rng.below(3), 3 + rng.below(6));
    let model = ModelTwo::new(h, e, main, fine, rng)?;
    let ex = EmbeddedQuestion {
        xs: random_seq(t, e, rng),
        main: rng.below(main),
        fine: rng.below(fine),
    };
    Ok((model, ex))
}

fn random_responder(rng: &mut Rng) -> Result<(Responder<f64>, QaExample<f64>)> {
    let (h, e, t) = dims(rng);
    let words = 2 + rng.below(5);
    let vocab = AnswerVocab::from_answers((0..words).map(|k| vec![format!("w{k}")]));
    let cond_width = 3 + rng.below(6);
    let model = Responder::new(h, e, cond_width, vocab, rng)?;
    let answer = (0..rng.below(t + 2)).map(|_| 1 + rng.below(words)).collect();
    let ex = QaExample {
        cond: (0..cond_width).map(|_| rng.uniform(0.0, 1.0)).collect(),
        xs: random_seq(t, e, rng),
        answer,
    };
    Ok((model, ex))
}

/// A bare LSTM with a trainable initial state, scored by a fixed random
/// linear functional of every output and of the final cell.
#[derive(Debug, Clone, PartialEq)]
struct LstmProbe {
    lstm: LstmParams<f64>,
    h0: Vector<f64>,
    c0: Vector<f64>,
}

#[derive(Debug, Clone)]
struct ProbeInput {
    xs: Vec<Vector<f64>>,
    weights_h: Vec<Vector<f64>>,
    weight_c: Vector<f64>,
}

fn random_probe(rng: &mut Rng) -> Result<(LstmProbe, ProbeInput)> {
    let (h, e, t) = dims(rng);
    let mut lstm = LstmParams::init(h, e, rng)?;
    // Nonzero biases so the bias gradients are exercised away from init.
    for b in [&mut lstm.b_f, &mut lstm.b_i, &mut lstm.b_c, &mut lstm.b_o] {
        for x in b.as_mut_slice() {
            *x += rng.uniform(-0.5, 0.5);
        }
    }
    let probe = LstmProbe {
        lstm,
        h0: (0..h).map(|_| rng.uniform(-0.5, 0.5)).collect(),
        c0: (0..h).map(|_| rng.uniform(-0.5, 0.5)).collect(),
    };
    let input = ProbeInput {
        xs: random_seq(t, e, rng),
        weights_h: random_seq(t, h, rng),
        weight_c: (0..h).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    };
    Ok((probe, input))
}

impl Parameters<f64> for LstmProbe {
    fn params(&self) -> Vec<ParamView<'_, f64>> {
        let mut v: Vec<_> = self.lstm.params().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.push(vector_view("h0", &self.h0));
        v.push(vector_view("c0", &self.c0));
        v
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, f64>> {
        let mut v: Vec<_> = self.lstm.params_mut().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.push(vector_view_mut("h0", &mut self.h0));
        v.push(vector_view_mut("c0", &mut self.c0));
        v
    }
}

impl Trainable<f64> for LstmProbe {
    type Example = ProbeInput;

    fn zeros_like(&self) -> Self {
        let h = self.lstm.hidden();
        Self {
            lstm: LstmParams::zeros(h, self.lstm.input()),
            h0: Vector::zeros(h),
            c0: Vector::zeros(h),
        }
    }

    fn accumulate_grad(&self, ex: &ProbeInput, grads: &mut Self) -> Result<f64> {
        let init = LstmState {
            h: self.h0.clone(),
            c: self.c0.clone(),
        };
        let (states, caches) = lstm::forward(&self.lstm, &init, &ex.xs)?;
        let mut loss: f64 = states.iter().zip(&ex.weights_h).map(|(s, w)| s.h.dot(w)).sum();
        loss += states.last().map_or(0.0, |s| s.c.dot(&ex.weight_c));
        let (dh0, dc0) = lstm::backward_into(&self.lstm, &caches, &ex.weights_h, Some(&ex.weight_c), &mut grads.lstm)?;
        grads.h0.add_assign(&dh0);
        grads.c0.add_assign(&dc0);
        Ok(loss)
    }

    fn score(&self, _ex: &ProbeInput) -> Result<Score> {
        Ok(Score::default())
    }
}
