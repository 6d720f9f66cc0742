//! A single LSTM cell over the concatenated input `[x_t, h_{t-1}]`:
//!
//! ```text
//! i_t = σ(W_i [x_t, h_{t-1}] + b_i)
//! f_t = σ(W_f [x_t, h_{t-1}] + b_f)
//! o_t = σ(W_o [x_t, h_{t-1}] + b_o)
//! c̃_t = tanh(W_c [x_t, h_{t-1}] + b_c)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ c̃_t
//! h_t = o_t ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{view, view_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::{sigmoid, Scalar};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    input_dim: usize,
    hidden_dim: usize,
    pub w_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_o: Matrix<T>,
    pub w_c: Matrix<T>,
    pub b_i: Vec<T>,
    pub b_f: Vec<T>,
    pub b_o: Vec<T>,
    pub b_c: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![T::zero(); hidden], c: vec![T::zero(); hidden] }
    }
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Debug, Clone)]
struct StepCache<T> {
    z: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    o: Vec<T>,
    g: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

/// Forward activations of a whole sequence in processing order.
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    direction: Direction,
    steps: Vec<StepCache<T>>,
}

impl<T: Scalar> LstmCell<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = Matrix::zeros(hidden_dim, input_dim + hidden_dim);
        let b = vec![T::zero(); hidden_dim];
        LstmCell {
            input_dim,
            hidden_dim,
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_c: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_o: b.clone(),
            b_c: b,
        }
    }

    /// Uniform(±√(1/hidden)) weights, zero biases except `b_f = forget_bias`.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, forget_bias: f64, rng: &mut R) -> Self {
        let bound = (1.0 / hidden_dim.max(1) as f64).sqrt();
        let mut cell = Self::zeros(input_dim, hidden_dim);
        for w in [&mut cell.w_i, &mut cell.w_f, &mut cell.w_o, &mut cell.w_c] {
            for x in w.as_mut_slice() {
                *x = T::of(rng.random_range(-bound..=bound));
            }
        }
        cell.b_f.iter_mut().for_each(|b| *b = T::of(forget_bias));
        cell
    }

    /// Builds a cell from explicit parameters, checking that the shapes agree.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        w_i: Matrix<T>,
        w_f: Matrix<T>,
        w_o: Matrix<T>,
        w_c: Matrix<T>,
        b_i: Vec<T>,
        b_f: Vec<T>,
        b_o: Vec<T>,
        b_c: Vec<T>,
    ) -> Result<Self> {
        let hidden = w_i.rows();
        if hidden == 0 || w_i.cols() < hidden {
            return Err(Error::shape("W_i", "hidden × (input + hidden)", format!("{:?}", w_i.shape())));
        }
        for (name, w) in [("W_f", &w_f), ("W_o", &w_o), ("W_c", &w_c)] {
            if w.shape() != w_i.shape() {
                return Err(Error::shape(name, format!("{:?}", w_i.shape()), format!("{:?}", w.shape())));
            }
        }
        for (name, b) in [("b_i", &b_i), ("b_f", &b_f), ("b_o", &b_o), ("b_c", &b_c)] {
            if b.len() != hidden {
                return Err(Error::shape(name, hidden, b.len()));
            }
        }
        Ok(LstmCell { input_dim: w_i.cols() - hidden, hidden_dim: hidden, w_i, w_f, w_o, w_c, b_i, b_f, b_o, b_c })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape("x_t", self.input_dim, x.len()));
        }
        Ok(())
    }

    fn step_cached(&self, x: &[T], prev: &LstmState<T>) -> (LstmState<T>, StepCache<T>) {
        let mut z = Vec::with_capacity(self.input_dim + self.hidden_dim);
        z.extend_from_slice(x);
        z.extend_from_slice(&prev.h);

        let gate = |w: &Matrix<T>, b: &[T]| {
            let mut a = b.to_vec();
            w.matvec_acc(&z, &mut a);
            a
        };
        let i: Vec<T> = gate(&self.w_i, &self.b_i).into_iter().map(sigmoid).collect();
        let f: Vec<T> = gate(&self.w_f, &self.b_f).into_iter().map(sigmoid).collect();
        let o: Vec<T> = gate(&self.w_o, &self.b_o).into_iter().map(sigmoid).collect();
        let g: Vec<T> = gate(&self.w_c, &self.b_c).into_iter().map(T::tanh).collect();

        let c: Vec<T> = (0..self.hidden_dim).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = o.iter().zip(&tanh_c).map(|(&o, &t)| o * t).collect();

        let cache = StepCache { z, i, f, o, g, c_prev: prev.c.clone(), tanh_c };
        (LstmState { h, c }, cache)
    }

    /// One recurrence step.
    pub fn step(&self, x: &[T], prev: &LstmState<T>) -> Result<LstmState<T>> {
        self.check_input(x)?;
        if prev.h.len() != self.hidden_dim {
            return Err(Error::shape("h_{t-1}", self.hidden_dim, prev.h.len()));
        }
        if prev.c.len() != self.hidden_dim {
            return Err(Error::shape("c_{t-1}", self.hidden_dim, prev.c.len()));
        }
        Ok(self.step_cached(x, prev).0)
    }

    /// Unrolls the cell from a zero state. Backward direction consumes the
    /// input reversed; states are returned aligned to input positions.
    pub fn forward(&self, inputs: &[Vec<T>], direction: Direction) -> Result<Vec<LstmState<T>>> {
        Ok(self.forward_traced(inputs, direction)?.0)
    }

    pub fn forward_traced(&self, inputs: &[Vec<T>], direction: Direction) -> Result<(Vec<LstmState<T>>, LstmTrace<T>)> {
        if inputs.is_empty() {
            return Err(Error::Empty("LSTM input sequence"));
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let n = inputs.len();
        let order: Vec<usize> = match direction {
            Direction::Forward => (0..n).collect(),
            Direction::Backward => (0..n).rev().collect(),
        };
        let mut states = vec![LstmState::zeros(self.hidden_dim); n];
        let mut steps = Vec::with_capacity(n);
        let mut prev = LstmState::zeros(self.hidden_dim);
        for &pos in &order {
            let (state, cache) = self.step_cached(&inputs[pos], &prev);
            steps.push(cache);
            states[pos] = state.clone();
            prev = state;
        }
        Ok((states, LstmTrace { direction, steps }))
    }

    /// Backpropagation through time.
    ///
    /// `d_h[p]` is the loss gradient w.r.t. the hidden state reported at
    /// input position `p`. Parameter gradients are accumulated into `grads`;
    /// the gradient w.r.t. each input is returned, aligned to positions.
    pub fn backward(&self, trace: &LstmTrace<T>, d_h: &[Vec<T>], grads: &mut LstmCell<T>) -> Vec<Vec<T>> {
        let n = trace.steps.len();
        assert_eq!(d_h.len(), n, "one hidden-state gradient per position");
        let hd = self.hidden_dim;
        let position = |step: usize| match trace.direction {
            Direction::Forward => step,
            Direction::Backward => n - 1 - step,
        };

        let mut d_x = vec![Vec::new(); n];
        let mut dh_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); hd];
        let mut da_i = vec![T::zero(); hd];
        let mut da_f = vec![T::zero(); hd];
        let mut da_o = vec![T::zero(); hd];
        let mut da_g = vec![T::zero(); hd];
        for step in (0..n).rev() {
            let s = &trace.steps[step];
            let pos = position(step);
            for k in 0..hd {
                let dh = d_h[pos][k] + dh_next[k];
                let dc = dc_next[k] + dh * s.o[k] * (T::one() - s.tanh_c[k] * s.tanh_c[k]);
                let d_o = dh * s.tanh_c[k];
                let d_i = dc * s.g[k];
                let d_g = dc * s.i[k];
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                da_i[k] = d_i * s.i[k] * (T::one() - s.i[k]);
                da_f[k] = d_f * s.f[k] * (T::one() - s.f[k]);
                da_o[k] = d_o * s.o[k] * (T::one() - s.o[k]);
                da_g[k] = d_g * (T::one() - s.g[k] * s.g[k]);
            }
            grads.w_i.add_outer(&da_i, &s.z);
            grads.w_f.add_outer(&da_f, &s.z);
            grads.w_o.add_outer(&da_o, &s.z);
            grads.w_c.add_outer(&da_g, &s.z);
            for k in 0..hd {
                grads.b_i[k] += da_i[k];
                grads.b_f[k] += da_f[k];
                grads.b_o[k] += da_o[k];
                grads.b_c[k] += da_g[k];
            }
            let mut dz = vec![T::zero(); self.input_dim + hd];
            self.w_i.matvec_t_acc(&da_i, &mut dz);
            self.w_f.matvec_t_acc(&da_f, &mut dz);
            self.w_o.matvec_t_acc(&da_o, &mut dz);
            self.w_c.matvec_t_acc(&da_g, &mut dz);
            dh_next.copy_from_slice(&dz[self.input_dim..]);
            dz.truncate(self.input_dim);
            d_x[pos] = dz;
        }
        d_x
    }
}

/// Free-function form of [`LstmCell::step`].
pub fn lstm_cell_step<T: Scalar>(params: &LstmCell<T>, x: &[T], prev: &LstmState<T>) -> Result<LstmState<T>> {
    params.step(x, prev)
}

/// Free-function form of [`LstmCell::forward`].
pub fn lstm_forward<T: Scalar>(
    params: &LstmCell<T>,
    inputs: &[Vec<T>],
    direction: Direction,
) -> Result<Vec<LstmState<T>>> {
    params.forward(inputs, direction)
}

impl<T: Scalar> ParamSet<T> for LstmCell<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        let ws = [self.hidden_dim, self.input_dim + self.hidden_dim];
        let bs = [self.hidden_dim];
        vec![
            view("w_i", &ws, self.w_i.as_slice()),
            view("w_f", &ws, self.w_f.as_slice()),
            view("w_o", &ws, self.w_o.as_slice()),
            view("w_c", &ws, self.w_c.as_slice()),
            view("b_i", &bs, &self.b_i),
            view("b_f", &bs, &self.b_f),
            view("b_o", &bs, &self.b_o),
            view("b_c", &bs, &self.b_c),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        let ws = [self.hidden_dim, self.input_dim + self.hidden_dim];
        let bs = [self.hidden_dim];
        vec![
            view_mut("w_i", &ws, self.w_i.as_mut_slice()),
            view_mut("w_f", &ws, self.w_f.as_mut_slice()),
            view_mut("w_o", &ws, self.w_o.as_mut_slice()),
            view_mut("w_c", &ws, self.w_c.as_mut_slice()),
            view_mut("b_i", &bs, &mut self.b_i),
            view_mut("b_f", &bs, &mut self.b_f),
            view_mut("b_o", &bs, &mut self.b_o),
            view_mut("b_c", &bs, &mut self.b_c),
        ]
    }
}
