use std::collections::{BTreeSet, HashMap};

use super::head::{softmax_ce_grad, DenseHead};
use super::{Score, Trainable};
use crate::error::{Error, Result};
use crate::lstm::{bi_backward, bi_forward, BiPass, LstmParams, LstmState};
use crate::numerics::{cross_entropy, ClassTarget, Matrix, ProbVector, Rng, Vector};
use crate::params::{matrix_view, matrix_view_mut, vector_view, vector_view_mut, ParamView, ParamViewMut, Parameters};
use crate::scalar::Scalar;

/// Symbol closing every answer.
pub const END_TOKEN: &str = "</s>";

/// `[main_p ; sub_p]`, the conditioning input of the responder.
pub fn condition_vector<T: Scalar>(main: &ProbVector<T>, sub: &ProbVector<T>) -> Vector<T> {
    main.concat(sub)
}

/// Tokens the responder can emit. Index 0 is [`END_TOKEN`]; the rest are
/// sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl AnswerVocab {
    pub fn from_answers<I, A, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = A>,
        A: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words = BTreeSet::new();
        for answer in answers {
            for tok in answer {
                let tok = tok.as_ref();
                if tok != END_TOKEN {
                    words.insert(tok.to_owned());
                }
            }
        }
        let mut tokens = vec![END_TOKEN.to_owned()];
        tokens.extend(words);
        Self::from_tokens(tokens).expect("canonical vocabulary")
    }

    /// Rebuilds a stored vocabulary; the first entry must be [`END_TOKEN`].
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(END_TOKEN) {
            return Err(Error::InvalidArgument(format!("answer vocabulary must start with {END_TOKEN}")));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::InvalidArgument("answer vocabulary has duplicates".into()));
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn end_id(&self) -> usize {
        0
    }

    pub fn encode<S: AsRef<str>>(&self, answer: &[S]) -> Result<Vec<usize>> {
        answer
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.index
                    .get(t)
                    .copied()
                    .filter(|&i| i != 0)
                    .ok_or_else(|| Error::UnknownAnswerToken(t.to_owned()))
            })
            .collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }
}

/// `W·v + b` without an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub w: Matrix<T>,
    pub b: Vector<T>,
}

impl<T: Scalar> Affine<T> {
    fn zeros(out: usize, input: usize) -> Self {
        Self {
            w: Matrix::zeros(out, input),
            b: Vector::zeros(out),
        }
    }

    fn init(out: usize, input: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (out + input) as f64).sqrt();
        let mut a = Self::zeros(out, input);
        for x in a.w.as_mut_slice() {
            *x = T::of(rng.uniform(-limit, limit));
        }
        a
    }

    fn apply(&self, v: &Vector<T>) -> Result<Vector<T>> {
        crate::numerics::affine(&self.w, v, &self.b)
    }

    fn backward(&self, v: &Vector<T>, dout: &Vector<T>, grads: &mut Self) {
        grads.w.add_outer(dout.as_slice(), v.as_slice());
        grads.b.add_assign(dout);
    }

    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![matrix_view("w", &self.w), vector_view("b", &self.b)]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        vec![matrix_view_mut("w", &mut self.w), vector_view_mut("b", &mut self.b)]
    }
}

/// Training pair for the responder.
#[derive(Debug, Clone)]
pub struct QaExample<T> {
    /// Output of [`condition_vector`] for the question.
    pub cond: Vector<T>,
    pub xs: Vec<Vector<T>>,
    /// Answer token ids, without the end symbol.
    pub answer: Vec<usize>,
}

/// Class-conditioned bidirectional answer generator.
///
/// Four learned affine maps turn the conditioning vector into the initial
/// `(h, c)` of each direction. Each question position's concatenated output
/// is decoded through the answer head, so at most one token per question
/// position is emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Responder<T> {
    pub init_fwd_h: Affine<T>,
    pub init_fwd_c: Affine<T>,
    pub init_bwd_h: Affine<T>,
    pub init_bwd_c: Affine<T>,
    pub fwd: LstmParams<T>,
    pub bwd: LstmParams<T>,
    pub out: DenseHead<T>,
    pub vocab: AnswerVocab,
}

/// Forward pass of a [`Responder`].
#[derive(Debug, Clone)]
pub struct ResponderPass<T> {
    pub init_fwd: LstmState<T>,
    pub init_bwd: LstmState<T>,
    pub bi: BiPass<T>,
    pub probs: Vec<ProbVector<T>>,
}

impl<T: Scalar> Responder<T> {
    pub fn new(hidden: usize, input: usize, cond_width: usize, vocab: AnswerVocab, rng: &mut Rng) -> Result<Self> {
        if cond_width == 0 {
            return Err(Error::InvalidArgument("conditioning width must be positive".into()));
        }
        let init_fwd_h = Affine::init(hidden, cond_width, rng);
        let init_fwd_c = Affine::init(hidden, cond_width, rng);
        let init_bwd_h = Affine::init(hidden, cond_width, rng);
        let init_bwd_c = Affine::init(hidden, cond_width, rng);
        let fwd = LstmParams::init(hidden, input, rng)?;
        let bwd = LstmParams::init(hidden, input, rng)?;
        let out = DenseHead::init(vocab.len(), 2 * hidden, rng)?;
        Ok(Self {
            init_fwd_h,
            init_fwd_c,
            init_bwd_h,
            init_bwd_c,
            fwd,
            bwd,
            out,
            vocab,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn input(&self) -> usize {
        self.fwd.input()
    }

    pub fn cond_width(&self) -> usize {
        self.init_fwd_h.w.cols()
    }

    pub fn initial_states(&self, cond: &Vector<T>) -> Result<(LstmState<T>, LstmState<T>)> {
        if cond.len() != self.cond_width() {
            return Err(Error::shape(
                "responder conditioning",
                format!("width {}", self.cond_width()),
                format!("width {}", cond.len()),
            ));
        }
        Ok((
            LstmState {
                h: self.init_fwd_h.apply(cond)?,
                c: self.init_fwd_c.apply(cond)?,
            },
            LstmState {
                h: self.init_bwd_h.apply(cond)?,
                c: self.init_bwd_c.apply(cond)?,
            },
        ))
    }

    pub fn forward(&self, cond: &Vector<T>, xs: &[Vector<T>]) -> Result<ResponderPass<T>> {
        if xs.is_empty() {
            return Err(Error::EmptySequence("Responder::forward"));
        }
        let (init_fwd, init_bwd) = self.initial_states(cond)?;
        let bi = bi_forward(&self.fwd, &self.bwd, &init_fwd, &init_bwd, xs)?;
        let probs = bi.outputs.iter().map(|o| self.out.probs(o)).collect::<Result<_>>()?;
        Ok(ResponderPass {
            init_fwd,
            init_bwd,
            bi,
            probs,
        })
    }

    /// Greedy per-position decoding up to the end symbol or the question
    /// length.
    pub fn generate_ids(&self, cond: &Vector<T>, xs: &[Vector<T>]) -> Result<Vec<usize>> {
        let pass = self.forward(cond, xs)?;
        Ok(pass
            .probs
            .iter()
            .map(|p| p.argmax())
            .take_while(|&id| id != self.vocab.end_id())
            .collect())
    }

    pub fn generate(&self, cond: &Vector<T>, xs: &[Vector<T>]) -> Result<Vec<String>> {
        Ok(self
            .generate_ids(cond, xs)?
            .into_iter()
            .map(|id| self.vocab.token(id).to_owned())
            .collect())
    }

    /// Targets per supervised position: the answer then the end symbol,
    /// capped at the question length.
    fn targets(&self, answer: &[usize], positions: usize) -> Vec<usize> {
        answer
            .iter()
            .copied()
            .chain(std::iter::once(self.vocab.end_id()))
            .take(positions)
            .collect()
    }

    /// Mean teacher-forced cross-entropy over the supervised positions.
    pub fn loss(&self, cond: &Vector<T>, xs: &[Vector<T>], answer: &[usize]) -> Result<T> {
        let pass = self.forward(cond, xs)?;
        let targets = self.targets(answer, xs.len());
        let mut total = T::zero();
        for (p, &t) in pass.probs.iter().zip(&targets) {
            total += cross_entropy(ClassTarget::new(t, self.vocab.len())?, p)?;
        }
        Ok(total / T::of(targets.len() as f64))
    }

    pub fn loss_and_grad(&self, cond: &Vector<T>, xs: &[Vector<T>], answer: &[usize], grads: &mut Self) -> Result<T> {
        let pass = self.forward(cond, xs)?;
        let targets = self.targets(answer, xs.len());
        let scale = T::one() / T::of(targets.len() as f64);
        let width = 2 * self.hidden();
        let mut total = T::zero();
        let mut upstream = vec![Vector::zeros(width); xs.len()];
        for (t, &target) in targets.iter().enumerate() {
            let p = &pass.probs[t];
            total += cross_entropy(ClassTarget::new(target, self.vocab.len())?, p)?;
            let mut d = softmax_ce_grad(p, target);
            d.scale(scale);
            upstream[t] = self.out.backward(&pass.bi.outputs[t], &d, &mut grads.out);
        }
        let (gf, gb) = bi_backward(&self.fwd, &self.bwd, &pass.bi, &upstream)?;
        crate::params::accumulate(&mut grads.fwd, &gf.params);
        crate::params::accumulate(&mut grads.bwd, &gb.params);
        self.init_fwd_h.backward(cond, &gf.h0, &mut grads.init_fwd_h);
        self.init_fwd_c.backward(cond, &gf.c0, &mut grads.init_fwd_c);
        self.init_bwd_h.backward(cond, &gb.h0, &mut grads.init_bwd_h);
        self.init_bwd_c.backward(cond, &gb.c0, &mut grads.init_bwd_c);
        Ok(total * scale)
    }
}

impl<T: Scalar> Parameters<T> for Responder<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = Vec::new();
        for (name, a) in [
            ("init_fwd_h", &self.init_fwd_h),
            ("init_fwd_c", &self.init_fwd_c),
            ("init_bwd_h", &self.init_bwd_h),
            ("init_bwd_c", &self.init_bwd_c),
        ] {
            v.extend(a.params().into_iter().map(|p| p.prefixed(name)));
        }
        v.extend(self.fwd.params().into_iter().map(|p| p.prefixed("fwd")));
        v.extend(self.bwd.params().into_iter().map(|p| p.prefixed("bwd")));
        v.extend(self.out.params().into_iter().map(|p| p.prefixed("out")));
        v
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        let mut v = Vec::new();
        for (name, a) in [
            ("init_fwd_h", &mut self.init_fwd_h),
            ("init_fwd_c", &mut self.init_fwd_c),
            ("init_bwd_h", &mut self.init_bwd_h),
            ("init_bwd_c", &mut self.init_bwd_c),
        ] {
            v.extend(a.params_mut().into_iter().map(|p| p.prefixed(name)));
        }
        v.extend(self.fwd.params_mut().into_iter().map(|p| p.prefixed("fwd")));
        v.extend(self.bwd.params_mut().into_iter().map(|p| p.prefixed("bwd")));
        v.extend(self.out.params_mut().into_iter().map(|p| p.prefixed("out")));
        v
    }
}

impl<T: Scalar> Trainable<T> for Responder<T> {
    type Example = QaExample<T>;

    fn zeros_like(&self) -> Self {
        let (h, e, c) = (self.hidden(), self.input(), self.cond_width());
        Self {
            init_fwd_h: Affine::zeros(h, c),
            init_fwd_c: Affine::zeros(h, c),
            init_bwd_h: Affine::zeros(h, c),
            init_bwd_c: Affine::zeros(h, c),
            fwd: LstmParams::zeros(h, e),
            bwd: LstmParams::zeros(h, e),
            out: DenseHead::zeros(self.vocab.len(), 2 * h),
            vocab: self.vocab.clone(),
        }
    }

    fn accumulate_grad(&self, ex: &Self::Example, grads: &mut Self) -> Result<T> {
        self.loss_and_grad(&ex.cond, &ex.xs, &ex.answer, grads)
    }

    /// Token accuracy over the supervised positions.
    fn score(&self, ex: &Self::Example) -> Result<Score> {
        let pass = self.forward(&ex.cond, &ex.xs)?;
        let targets = self.targets(&ex.answer, ex.xs.len());
        let correct = pass.probs.iter().zip(&targets).filter(|(p, &t)| p.argmax() == t).count();
        Ok(Score {
            main_correct: correct,
            main_total: targets.len(),
            sub_correct: 0,
            sub_total: 0,
        })
    }
}
