use super::head::{softmax_ce_grad, DenseHead};
use super::{EmbeddedQuestion, Score, Trainable};
use crate::error::{Error, Result};
use crate::lstm::{backward_into, forward, LstmParams, LstmState, StepCache};
use crate::numerics::{cross_entropy, ClassTarget, ProbVector, Rng, Vector};
use crate::params::{ParamView, ParamViewMut, Parameters};
use crate::scalar::Scalar;

/// Dual-head classifier.
///
/// The question is extended with one all-zero padding element. The output at
/// the last question token feeds the main-class head; the output at the
/// padding step, which depends only on the carried `(h, c)`, feeds the
/// fine-label head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTwo<T> {
    pub lstm: LstmParams<T>,
    pub main_head: DenseHead<T>,
    pub sub_head: DenseHead<T>,
}

/// Everything computed by one forward pass of [`ModelTwo`].
#[derive(Debug, Clone)]
pub struct ModelTwoPass<T> {
    pub main: ProbVector<T>,
    pub sub: ProbVector<T>,
    /// `T + 1` states; the last one is the padding step's.
    pub states: Vec<LstmState<T>>,
    pub caches: Vec<StepCache<T>>,
}

impl<T: Scalar> ModelTwoPass<T> {
    /// Input of the main head (output at the last question token).
    pub fn main_input(&self) -> &Vector<T> {
        &self.states[self.states.len() - 2].h
    }

    /// Input of the fine-label head (output at the padding step).
    pub fn sub_input(&self) -> &Vector<T> {
        &self.states[self.states.len() - 1].h
    }
}

impl<T: Scalar> ModelTwo<T> {
    pub fn new(hidden: usize, input: usize, main_classes: usize, fine_labels: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            lstm: LstmParams::init(hidden, input, rng)?,
            main_head: DenseHead::init(main_classes, hidden, rng)?,
            sub_head: DenseHead::init(fine_labels, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn input(&self) -> usize {
        self.lstm.input()
    }

    pub fn main_classes(&self) -> usize {
        self.main_head.classes()
    }

    pub fn fine_labels(&self) -> usize {
        self.sub_head.classes()
    }

    /// The padding element: a fresh all-zero input vector.
    pub fn pad(&self) -> Vector<T> {
        Vector::zeros(self.input())
    }

    /// Forward pass with an explicit padding vector. Anything other than
    /// [`Self::pad`] is only meaningful for probing the mechanism.
    pub fn forward_with_pad(&self, xs: &[Vector<T>], pad: &Vector<T>) -> Result<ModelTwoPass<T>> {
        if xs.is_empty() {
            return Err(Error::EmptySequence("ModelTwo::forward"));
        }
        let mut seq = Vec::with_capacity(xs.len() + 1);
        seq.extend_from_slice(xs);
        seq.push(pad.clone());
        let (states, caches) = forward(&self.lstm, &LstmState::zeros(self.hidden()), &seq)?;
        let n = states.len();
        let main = self.main_head.probs(&states[n - 2].h)?;
        let sub = self.sub_head.probs(&states[n - 1].h)?;
        Ok(ModelTwoPass {
            main,
            sub,
            states,
            caches,
        })
    }

    pub fn forward(&self, xs: &[Vector<T>]) -> Result<(ProbVector<T>, ProbVector<T>)> {
        let pass = self.forward_with_pad(xs, &self.pad())?;
        Ok((pass.main, pass.sub))
    }

    /// `CE(main) + CE(sub)`.
    pub fn loss(&self, xs: &[Vector<T>], main: usize, sub: usize) -> Result<T> {
        let (pm, ps) = self.forward(xs)?;
        Ok(cross_entropy(ClassTarget::new(main, self.main_classes())?, &pm)?
            + cross_entropy(ClassTarget::new(sub, self.fine_labels())?, &ps)?)
    }

    pub fn loss_and_grad(&self, xs: &[Vector<T>], main: usize, sub: usize, grads: &mut Self) -> Result<T> {
        self.weighted_loss_and_grad(xs, main, sub, T::one(), T::one(), grads)
    }

    /// `w_main·CE(main) + w_sub·CE(sub)` and its gradient.
    pub(crate) fn weighted_loss_and_grad(
        &self,
        xs: &[Vector<T>],
        main: usize,
        sub: usize,
        w_main: T,
        w_sub: T,
        grads: &mut Self,
    ) -> Result<T> {
        let main_t = ClassTarget::new(main, self.main_classes())?;
        let sub_t = ClassTarget::new(sub, self.fine_labels())?;
        let pass = self.forward_with_pad(xs, &self.pad())?;
        let loss = w_main * cross_entropy(main_t, &pass.main)? + w_sub * cross_entropy(sub_t, &pass.sub)?;

        let mut d_main = softmax_ce_grad(&pass.main, main);
        d_main.scale(w_main);
        let mut d_sub = softmax_ce_grad(&pass.sub, sub);
        d_sub.scale(w_sub);

        let n = pass.states.len();
        let mut upstream = vec![Vector::zeros(self.hidden()); n];
        upstream[n - 2] = self.main_head.backward(pass.main_input(), &d_main, &mut grads.main_head);
        upstream[n - 1] = self.sub_head.backward(pass.sub_input(), &d_sub, &mut grads.sub_head);
        backward_into(&self.lstm, &pass.caches, &upstream, None, &mut grads.lstm)?;
        Ok(loss)
    }
}

impl<T: Scalar> Parameters<T> for ModelTwo<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v: Vec<_> = self.lstm.params().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.extend(self.main_head.params().into_iter().map(|p| p.prefixed("main_head")));
        v.extend(self.sub_head.params().into_iter().map(|p| p.prefixed("sub_head")));
        v
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        let mut v: Vec<_> = self.lstm.params_mut().into_iter().map(|p| p.prefixed("lstm")).collect();
        v.extend(self.main_head.params_mut().into_iter().map(|p| p.prefixed("main_head")));
        v.extend(self.sub_head.params_mut().into_iter().map(|p| p.prefixed("sub_head")));
        v
    }
}

impl<T: Scalar> Trainable<T> for ModelTwo<T> {
    type Example = EmbeddedQuestion<T>;

    fn zeros_like(&self) -> Self {
        Self {
            lstm: LstmParams::zeros(self.hidden(), self.input()),
            main_head: DenseHead::zeros(self.main_classes(), self.hidden()),
            sub_head: DenseHead::zeros(self.fine_labels(), self.hidden()),
        }
    }

    fn accumulate_grad(&self, ex: &Self::Example, grads: &mut Self) -> Result<T> {
        self.loss_and_grad(&ex.xs, ex.main, ex.fine, grads)
    }

    fn score(&self, ex: &Self::Example) -> Result<Score> {
        let (pm, ps) = self.forward(&ex.xs)?;
        Ok(Score::single(pm.argmax() == ex.main, Some(ps.argmax() == ex.fine)))
    }
}
