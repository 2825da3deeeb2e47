use super::head::{softmax_ce_grad, DenseHead};
use super::{EmbeddedQuestion, Score, Trainable};
use crate::error::{Error, Result};
use crate::lstm::{backward_into, forward, LstmParams, LstmState};
use crate::numerics::{cross_entropy, ClassTarget, ProbVector, Rng, Vector};
use crate::params::{ParamView, ParamViewMut, Parameters};
use crate::scalar::Scalar;

/// Main-class classifier: the final LSTM output feeds one softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOne<T> {
    pub lstm: LstmParams<T>,
    pub head: DenseHead<T>,
}

impl<T: Scalar> ModelOne<T> {
    pub fn new(hidden: usize, input: usize, classes: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            lstm: LstmParams::init(hidden, input, rng)?,
            head: DenseHead::init(classes, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn input(&self) -> usize {
        self.lstm.input()
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn forward(&self, xs: &[Vector<T>]) -> Result<ProbVector<T>> {
        let (states, _) = forward(&self.lstm, &LstmState::zeros(self.hidden()), xs)?;
        self.head.probs(&states.last().unwrap().h)
    }

    pub fn loss(&self, xs: &[Vector<T>], target: usize) -> Result<T> {
        let p = self.forward(xs)?;
        cross_entropy(ClassTarget::new(target, self.classes())?, &p)
    }

    /// Adds this example's loss gradient into `grads`; returns the loss.
    pub fn loss_and_grad(&self, xs: &[Vector<T>], target: usize, grads: &mut Self) -> Result<T> {
        let target = ClassTarget::new(target, self.classes())?;
        let (states, caches) = forward(&self.lstm, &LstmState::zeros(self.hidden()), xs)?;
        let h = &states.last().unwrap().h;
        let p = self.head.probs(h)?;
        let loss = cross_entropy(target, &p)?;
        let dlogits = softmax_ce_grad(&p, target.index());
        let dh = self.head.backward(h, &dlogits, &mut grads.head);
        let mut upstream = vec![Vector::zeros(self.hidden()); xs.len()];
        *upstream.last_mut().unwrap() = dh;
        backward_into(&self.lstm, &caches, &upstream, None, &mut grads.lstm)?;
        Ok(loss)
    }
}

impl<T: Scalar> Parameters<T> for ModelOne<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v: Vec<_> = self.lstm.params().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.extend(self.head.params().into_iter().map(|p| p.prefixed("head")));
        v
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        let mut v: Vec<_> = self.lstm.params_mut().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.extend(self.head.params_mut().into_iter().map(|p| p.prefixed("head")));
        v
    }
}

impl<T: Scalar> Trainable<T> for ModelOne<T> {
    type Example = EmbeddedQuestion<T>;

    fn zeros_like(&self) -> Self {
        Self {
            lstm: LstmParams::zeros(self.hidden(), self.input()),
            head: DenseHead::zeros(self.classes(), self.hidden()),
        }
    }

    fn accumulate_grad(&self, ex: &Self::Example, grads: &mut Self) -> Result<T> {
        self.loss_and_grad(&ex.xs, ex.main, grads)
    }

    fn score(&self, ex: &Self::Example) -> Result<Score> {
        if ex.xs.is_empty() {
            return Err(Error::EmptySequence("ModelOne::score"));
        }
        let p = self.forward(&ex.xs)?;
        Ok(Score::single(p.argmax() == ex.main, None))
    }
}
