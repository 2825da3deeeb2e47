//! The two question classifiers and the conditioned answer generator.

mod head;
mod one;
mod responder;
mod two;

pub use head::DenseHead;
pub use one::ModelOne;
pub use responder::{condition_vector, Affine, AnswerVocab, QaExample, Responder, ResponderPass, END_TOKEN};
pub use two::{ModelTwo, ModelTwoPass};

use crate::dataset::{Labeled, LabeledQuestion};
use crate::error::{Error, Result};
use crate::numerics::{ProbVector, Rng, Vector};
use crate::params::Parameters;
use crate::scalar::Scalar;
use crate::textpipe::{embed, EmbeddingTable};

/// A question with its looked-up embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddedQuestion<T> {
    pub xs: Vec<Vector<T>>,
    pub main: usize,
    pub fine: usize,
}

impl<T: Scalar> EmbeddedQuestion<T> {
    pub fn from_question(table: &EmbeddingTable<T>, q: &LabeledQuestion) -> Self {
        Self {
            xs: embed(table, &q.tokens),
            main: q.main,
            fine: q.fine,
        }
    }
}

pub fn embed_all<T: Scalar>(table: &EmbeddingTable<T>, data: &[LabeledQuestion]) -> Vec<EmbeddedQuestion<T>> {
    data.iter().map(|q| EmbeddedQuestion::from_question(table, q)).collect()
}

impl<T> Labeled for EmbeddedQuestion<T> {
    fn main_class(&self) -> usize {
        self.main
    }

    fn fine_label(&self) -> usize {
        self.fine
    }
}

/// Correct/total counts; scores of several examples add up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Score {
    pub main_correct: usize,
    pub main_total: usize,
    pub sub_correct: usize,
    pub sub_total: usize,
}

impl Score {
    pub fn single(main: bool, sub: Option<bool>) -> Self {
        Self {
            main_correct: main as usize,
            main_total: 1,
            sub_correct: sub.unwrap_or(false) as usize,
            sub_total: sub.is_some() as usize,
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            main_correct: self.main_correct + other.main_correct,
            main_total: self.main_total + other.main_total,
            sub_correct: self.sub_correct + other.sub_correct,
            sub_total: self.sub_total + other.sub_total,
        }
    }
}

/// A model the trainer can optimize.
///
/// Gradients live in a value of the model's own type, built by
/// [`Trainable::zeros_like`]. Word embeddings are inputs, never parameters.
pub trait Trainable<T: Scalar>: Parameters<T> + Clone {
    type Example;

    fn zeros_like(&self) -> Self;

    /// Adds the example's loss gradient into `grads` and returns the loss.
    fn accumulate_grad(&self, ex: &Self::Example, grads: &mut Self) -> Result<T>;

    fn score(&self, ex: &Self::Example) -> Result<Score>;
}

/// Which classifier architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Main class only, read from the last step.
    One,
    /// Main class at the last step, fine label after one extra padding step.
    Two,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::One => "one",
            ModelKind::Two => "two",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(ModelKind::One),
            "two" | "2" => Ok(ModelKind::Two),
            other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}, expected one or two"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class distributions for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub main: ProbVector<T>,
    pub sub: Option<ProbVector<T>>,
}

/// Either classifier behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier<T> {
    One(ModelOne<T>),
    Two(ModelTwo<T>),
}

impl<T: Scalar> Classifier<T> {
    pub fn new(kind: ModelKind, hidden: usize, input: usize, num_main: usize, num_fine: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match kind {
            ModelKind::One => Classifier::One(ModelOne::new(hidden, input, num_main, rng)?),
            ModelKind::Two => Classifier::Two(ModelTwo::new(hidden, input, num_main, num_fine, rng)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::One(_) => ModelKind::One,
            Classifier::Two(_) => ModelKind::Two,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Classifier::One(m) => m.hidden(),
            Classifier::Two(m) => m.hidden(),
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Classifier::One(m) => m.input(),
            Classifier::Two(m) => m.input(),
        }
    }

    pub fn predict(&self, xs: &[Vector<T>]) -> Result<Prediction<T>> {
        match self {
            Classifier::One(m) => Ok(Prediction {
                main: m.forward(xs)?,
                sub: None,
            }),
            Classifier::Two(m) => {
                let (main, sub) = m.forward(xs)?;
                Ok(Prediction { main, sub: Some(sub) })
            }
        }
    }

    pub fn score(&self, ex: &EmbeddedQuestion<T>) -> Result<Score> {
        match self {
            Classifier::One(m) => m.score(ex),
            Classifier::Two(m) => m.score(ex),
        }
    }
}

impl<T: Scalar> Parameters<T> for Classifier<T> {
    fn params(&self) -> Vec<crate::params::ParamView<'_, T>> {
        match self {
            Classifier::One(m) => m.params(),
            Classifier::Two(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<crate::params::ParamViewMut<'_, T>> {
        match self {
            Classifier::One(m) => m.params_mut(),
            Classifier::Two(m) => m.params_mut(),
        }
    }
}
