//! LSTM cell: forward step, sequence unroll, backpropagation through time and
//! a bidirectional wrapper.
//!
//! Every gate reads the concatenation `z = [h_{t-1}; x_t]` (previous output
//! first, then the input), so each weight matrix is `H × (H + E)` and its
//! first `H` columns act on the recurrent state.
//!
//! ```text
//! f  = σ(W_f·z + b_f)        i = σ(W_i·z + b_i)
//! c̃  = tanh(W_c·z + b_c)     o = σ(W_o·z + b_o)
//! c' = f ∗ c + i ∗ c̃         h' = o ∗ tanh(c')
//! ```

use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, Rng, Vector};
use crate::params::{matrix_view, matrix_view_mut, vector_view, vector_view_mut, ParamView, ParamViewMut, Parameters};
use crate::scalar::Scalar;

/// The four gate weight matrices and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_f: Matrix<T>,
    pub w_i: Matrix<T>,
    pub w_c: Matrix<T>,
    pub w_o: Matrix<T>,
    pub b_f: Vector<T>,
    pub b_i: Vector<T>,
    pub b_c: Vector<T>,
    pub b_o: Vector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vector<T>,
    pub c: Vector<T>,
}

/// Activations of one step, retained for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache<T> {
    /// `[h_{t-1}; x_t]`
    pub z: Vector<T>,
    pub c_prev: Vector<T>,
    pub f: Vector<T>,
    pub i: Vector<T>,
    pub c_tilde: Vector<T>,
    pub o: Vector<T>,
    pub tanh_c: Vector<T>,
}

/// Gradients of a scalar loss with respect to [`LstmParams`] and the
/// initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads<T> {
    pub params: LstmParams<T>,
    pub h0: Vector<T>,
    pub c0: Vector<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Vector::zeros(hidden),
            c: Vector::zeros(hidden),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.c.is_finite()
    }
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = Matrix::zeros(hidden, hidden + input);
        let b = Vector::zeros(hidden);
        Self {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Glorot-uniform weights over the concatenated fan-in, zero biases except
    /// the forget bias, which starts at one.
    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 || input == 0 {
            return Err(Error::InvalidArgument(format!(
                "LSTM sizes must be positive (H = {hidden}, E = {input})"
            )));
        }
        let limit = Self::init_limit(hidden, input);
        let mut p = Self::zeros(hidden, input);
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            for x in w.as_mut_slice() {
                *x = T::of(rng.uniform(-limit, limit));
            }
        }
        p.b_f = Vector::filled(hidden, T::one());
        Ok(p)
    }

    /// `sqrt(6 / (H + E + H))`
    pub fn init_limit(hidden: usize, input: usize) -> f64 {
        (6.0 / (2 * hidden + input) as f64).sqrt()
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.w_f.rows()
    }

    #[inline]
    pub fn input(&self) -> usize {
        self.w_f.cols() - self.w_f.rows()
    }

    fn gates(&self) -> [(&Matrix<T>, &Vector<T>); 4] {
        [
            (&self.w_f, &self.b_f),
            (&self.w_i, &self.b_i),
            (&self.w_c, &self.b_c),
            (&self.w_o, &self.b_o),
        ]
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, cols) = self.w_f.shape();
        for (w, b) in self.gates() {
            if w.shape() != (h, cols) || b.len() != h {
                return Err(Error::shape(
                    "LstmParams",
                    format!("W {h}x{cols}, b {h}"),
                    format!("W {}, b {}", w.shape_str(), b.len()),
                ));
            }
        }
        if cols <= h {
            return Err(Error::shape("LstmParams", "cols > rows", self.w_f.shape_str()));
        }
        Ok(())
    }
}

impl<T: Scalar> Parameters<T> for LstmParams<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            matrix_view("w_f", &self.w_f),
            matrix_view("w_i", &self.w_i),
            matrix_view("w_c", &self.w_c),
            matrix_view("w_o", &self.w_o),
            vector_view("b_f", &self.b_f),
            vector_view("b_i", &self.b_i),
            vector_view("b_c", &self.b_c),
            vector_view("b_o", &self.b_o),
        ]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        vec![
            matrix_view_mut("w_f", &mut self.w_f),
            matrix_view_mut("w_i", &mut self.w_i),
            matrix_view_mut("w_c", &mut self.w_c),
            matrix_view_mut("w_o", &mut self.w_o),
            vector_view_mut("b_f", &mut self.b_f),
            vector_view_mut("b_i", &mut self.b_i),
            vector_view_mut("b_c", &mut self.b_c),
            vector_view_mut("b_o", &mut self.b_o),
        ]
    }
}

impl<T: Scalar> LstmGrads<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            params: LstmParams::zeros(hidden, input),
            h0: Vector::zeros(hidden),
            c0: Vector::zeros(hidden),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.all_finite() && self.h0.is_finite() && self.c0.is_finite()
    }
}

/// One LSTM step from `state` on input `x`.
pub fn step<T: Scalar>(params: &LstmParams<T>, state: &LstmState<T>, x: &Vector<T>) -> Result<(LstmState<T>, StepCache<T>)> {
    let hidden = params.hidden();
    if state.h.len() != hidden || state.c.len() != hidden {
        return Err(Error::shape(
            "lstm step (state)",
            format!("H = {hidden}"),
            format!("h {}, c {}", state.h.len(), state.c.len()),
        ));
    }
    if x.len() != params.input() {
        return Err(Error::shape(
            "lstm step (input)",
            format!("E = {}", params.input()),
            format!("x {}", x.len()),
        ));
    }
    Ok(step_unchecked(params, state, x))
}

fn step_unchecked<T: Scalar>(params: &LstmParams<T>, state: &LstmState<T>, x: &Vector<T>) -> (LstmState<T>, StepCache<T>) {
    let hidden = params.hidden();
    let z = state.h.concat(x);
    let mut pre = [
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
    ];
    for ((w, b), out) in params.gates().into_iter().zip(pre.iter_mut()) {
        w.mul_vec_unchecked(z.as_slice(), out);
        for (o, &bias) in out.iter_mut().zip(b.iter()) {
            *o += bias;
        }
    }
    let [pf, pi, pc, po] = pre;
    let f: Vector<T> = pf.into_iter().map(sigmoid_scalar).collect();
    let i: Vector<T> = pi.into_iter().map(sigmoid_scalar).collect();
    let c_tilde: Vector<T> = pc.into_iter().map(|v| v.tanh()).collect();
    let o: Vector<T> = po.into_iter().map(sigmoid_scalar).collect();

    let c: Vector<T> = (0..hidden).map(|k| f[k] * state.c[k] + i[k] * c_tilde[k]).collect();
    let tanh_c = c.map(|v| v.tanh());
    let h = o.hadamard(&tanh_c);

    let cache = StepCache {
        z,
        c_prev: state.c.clone(),
        f,
        i,
        c_tilde,
        o,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// States after each step (initial state excluded) and the matching caches.
pub type Unrolled<T> = (Vec<LstmState<T>>, Vec<StepCache<T>>);

/// Unrolls [`step`] over `xs`; returns every intermediate state (excluding the
/// initial one) and the matching caches.
pub fn forward<T: Scalar>(
    params: &LstmParams<T>,
    init: &LstmState<T>,
    xs: &[Vector<T>],
) -> Result<Unrolled<T>> {
    if xs.is_empty() {
        return Err(Error::EmptySequence("lstm forward"));
    }
    params.check_shapes()?;
    let mut states = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    let mut state = init.clone();
    for x in xs {
        let (next, cache) = step(params, &state, x)?;
        states.push(next.clone());
        caches.push(cache);
        state = next;
    }
    Ok((states, caches))
}

/// Backpropagation through time.
///
/// `upstream_h[t]` is the loss gradient arriving at the output `h_t` from
/// outside the recurrence (zeros where a timestep is unsupervised);
/// `final_c` is an optional gradient on the last cell state.
pub fn backward<T: Scalar>(
    params: &LstmParams<T>,
    caches: &[StepCache<T>],
    upstream_h: &[Vector<T>],
    final_c: Option<&Vector<T>>,
) -> Result<LstmGrads<T>> {
    let mut grads = LstmParams::zeros(params.hidden(), params.input());
    let (h0, c0) = backward_into(params, caches, upstream_h, final_c, &mut grads)?;
    Ok(LstmGrads { params: grads, h0, c0 })
}

/// As [`backward`], but adds the parameter gradients into `grads` and returns
/// the gradients on the initial `(h, c)`.
pub fn backward_into<T: Scalar>(
    params: &LstmParams<T>,
    caches: &[StepCache<T>],
    upstream_h: &[Vector<T>],
    final_c: Option<&Vector<T>>,
    grads: &mut LstmParams<T>,
) -> Result<(Vector<T>, Vector<T>)> {
    let hidden = params.hidden();
    if grads.w_f.shape() != params.w_f.shape() {
        return Err(Error::shape("lstm backward (gradient buffer)", params.w_f.shape_str(), grads.w_f.shape_str()));
    }
    if caches.len() != upstream_h.len() {
        return Err(Error::shape(
            "lstm backward",
            format!("{} cached steps", caches.len()),
            format!("{} upstream gradients", upstream_h.len()),
        ));
    }
    if let Some(bad) = upstream_h.iter().find(|g| g.len() != hidden) {
        return Err(Error::shape("lstm backward", format!("H = {hidden}"), format!("gradient of length {}", bad.len())));
    }
    let mut dh_next = vec![T::zero(); hidden];
    let mut dc_next = match final_c {
        Some(g) if g.len() != hidden => {
            return Err(Error::shape("lstm backward", format!("H = {hidden}"), format!("final c gradient {}", g.len())))
        }
        Some(g) => g.as_slice().to_vec(),
        None => vec![T::zero(); hidden],
    };

    let one = T::one();
    let mut da = [
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
    ];
    let mut dz = vec![T::zero(); params.w_f.cols()];

    for (cache, up) in caches.iter().zip(upstream_h).rev() {
        for k in 0..hidden {
            let dh = up[k] + dh_next[k];
            let (f, i, g, o, tc) = (cache.f[k], cache.i[k], cache.c_tilde[k], cache.o[k], cache.tanh_c[k]);
            let d_o = dh * tc;
            let dc = dc_next[k] + dh * o * (one - tc * tc);
            let d_f = dc * cache.c_prev[k];
            let d_i = dc * g;
            let d_g = dc * i;
            dc_next[k] = dc * f;
            da[0][k] = d_f * f * (one - f);
            da[1][k] = d_i * i * (one - i);
            da[2][k] = d_g * (one - g * g);
            da[3][k] = d_o * o * (one - o);
        }

        dz.fill(T::zero());
        let LstmParams {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
        } = grads;
        let grad_gates: [(&mut Matrix<T>, &mut Vector<T>); 4] = [(w_f, b_f), (w_i, b_i), (w_c, b_c), (w_o, b_o)];
        for (((gw, gb), (w, _)), d) in grad_gates.into_iter().zip(params.gates()).zip(&da) {
            gw.add_outer(d, cache.z.as_slice());
            for (b, &v) in gb.as_mut_slice().iter_mut().zip(d) {
                *b += v;
            }
            w.tr_mul_vec_acc(d, &mut dz);
        }
        dh_next.copy_from_slice(&dz[..hidden]);
    }

    Ok((Vector::from_vec(dh_next), Vector::from_vec(dc_next)))
}

/// Forward and backward passes of a bidirectional LSTM.
#[derive(Debug, Clone)]
pub struct BiPass<T> {
    /// Per-position `[h_fwd(t); h_bwd(t)]`.
    pub outputs: Vec<Vector<T>>,
    pub fwd_states: Vec<LstmState<T>>,
    pub fwd_caches: Vec<StepCache<T>>,
    /// In processing order, i.e. reversed relative to input positions.
    pub bwd_states: Vec<LstmState<T>>,
    pub bwd_caches: Vec<StepCache<T>>,
}

pub fn bi_forward<T: Scalar>(
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
    init_fwd: &LstmState<T>,
    init_bwd: &LstmState<T>,
    xs: &[Vector<T>],
) -> Result<BiPass<T>> {
    if fwd.input() != bwd.input() {
        return Err(Error::shape(
            "bi_forward",
            format!("forward E = {}", fwd.input()),
            format!("backward E = {}", bwd.input()),
        ));
    }
    let (fwd_states, fwd_caches) = forward(fwd, init_fwd, xs)?;
    let reversed: Vec<Vector<T>> = xs.iter().rev().cloned().collect();
    let (bwd_states, bwd_caches) = forward(bwd, init_bwd, &reversed)?;
    let n = xs.len();
    let outputs = (0..n)
        .map(|t| fwd_states[t].h.concat(&bwd_states[n - 1 - t].h))
        .collect();
    Ok(BiPass {
        outputs,
        fwd_states,
        fwd_caches,
        bwd_states,
        bwd_caches,
    })
}

/// Gradients of both directions given per-position gradients on the
/// concatenated outputs.
pub fn bi_backward<T: Scalar>(
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
    pass: &BiPass<T>,
    upstream: &[Vector<T>],
) -> Result<(LstmGrads<T>, LstmGrads<T>)> {
    let n = pass.outputs.len();
    if upstream.len() != n {
        return Err(Error::shape(
            "bi_backward",
            format!("{n} positions"),
            format!("{} upstream gradients", upstream.len()),
        ));
    }
    let hf = fwd.hidden();
    let hb = bwd.hidden();
    let mut up_f = Vec::with_capacity(n);
    let mut up_b = vec![Vector::zeros(hb); n];
    for (t, g) in upstream.iter().enumerate() {
        if g.len() != hf + hb {
            return Err(Error::shape("bi_backward", format!("width {}", hf + hb), format!("width {}", g.len())));
        }
        up_f.push(g.slice(0, hf));
        up_b[n - 1 - t] = g.slice(hf, hf + hb);
    }
    let gf = backward(fwd, &pass.fwd_caches, &up_f, None)?;
    let gb = backward(bwd, &pass.bwd_caches, &up_b, None)?;
    Ok((gf, gb))
}
