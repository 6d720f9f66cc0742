use rand::Rng;

use super::lstm::{Direction, LstmCell, LstmTrace};
use crate::error::{Error, Result};
use crate::params::{prefixed, prefixed_mut, view, view_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Per-token tag scores, `T × |tags|`, unnormalized.
pub type EmissionMatrix<T> = Matrix<T>;

/// Two LSTM cells reading in opposite directions, followed by a linear
/// projection of each concatenated `[h_fwd, h_bwd]` onto tag scores.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmEncoder<T> {
    pub forward_cell: LstmCell<T>,
    pub backward_cell: LstmCell<T>,
    /// `|tags| × 2·hidden`
    pub proj: Matrix<T>,
    pub proj_bias: Vec<T>,
}

pub struct EncoderTrace<T> {
    fwd: LstmTrace<T>,
    bwd: LstmTrace<T>,
    hidden: Vec<Vec<T>>,
}

impl<T: Scalar> BiLstmEncoder<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_tags: usize) -> Self {
        BiLstmEncoder {
            forward_cell: LstmCell::zeros(input_dim, hidden_dim),
            backward_cell: LstmCell::zeros(input_dim, hidden_dim),
            proj: Matrix::zeros(num_tags, 2 * hidden_dim),
            proj_bias: vec![T::zero(); num_tags],
        }
    }

    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        num_tags: usize,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let forward_cell = LstmCell::random(input_dim, hidden_dim, forget_bias, rng);
        let backward_cell = LstmCell::random(input_dim, hidden_dim, forget_bias, rng);
        let bound = (1.0 / (2 * hidden_dim).max(1) as f64).sqrt();
        let proj = Matrix::from_fn(num_tags, 2 * hidden_dim, |_, _| T::of(rng.random_range(-bound..=bound)));
        BiLstmEncoder { forward_cell, backward_cell, proj, proj_bias: vec![T::zero(); num_tags] }
    }

    pub fn from_parts(
        forward_cell: LstmCell<T>,
        backward_cell: LstmCell<T>,
        proj: Matrix<T>,
        proj_bias: Vec<T>,
    ) -> Result<Self> {
        if forward_cell.input_dim() != backward_cell.input_dim()
            || forward_cell.hidden_dim() != backward_cell.hidden_dim()
        {
            return Err(Error::shape(
                "backward cell",
                format!("{}→{}", forward_cell.input_dim(), forward_cell.hidden_dim()),
                format!("{}→{}", backward_cell.input_dim(), backward_cell.hidden_dim()),
            ));
        }
        if proj.cols() != 2 * forward_cell.hidden_dim() {
            return Err(Error::shape("emission projection", 2 * forward_cell.hidden_dim(), proj.cols()));
        }
        if proj_bias.len() != proj.rows() {
            return Err(Error::shape("emission bias", proj.rows(), proj_bias.len()));
        }
        Ok(BiLstmEncoder { forward_cell, backward_cell, proj, proj_bias })
    }

    pub fn input_dim(&self) -> usize {
        self.forward_cell.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward_cell.hidden_dim()
    }

    pub fn num_tags(&self) -> usize {
        self.proj.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.num_tags())
    }

    /// Per position, `[h_fwd_t, h_bwd_t]`.
    pub fn bilstm_forward(&self, inputs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        Ok(self.bilstm_traced(inputs)?.hidden)
    }

    fn bilstm_traced(&self, inputs: &[Vec<T>]) -> Result<EncoderTrace<T>> {
        let (fs, fwd) = self.forward_cell.forward_traced(inputs, Direction::Forward)?;
        let (bs, bwd) = self.backward_cell.forward_traced(inputs, Direction::Backward)?;
        let hidden = fs.into_iter().zip(bs).map(|(f, b)| [f.h, b.h].concat()).collect();
        Ok(EncoderTrace { fwd, bwd, hidden })
    }

    pub fn project_emissions(&self, hidden: &[Vec<T>]) -> Result<EmissionMatrix<T>> {
        let mut out = Matrix::zeros(hidden.len(), self.num_tags());
        for (t, h) in hidden.iter().enumerate() {
            if h.len() != self.proj.cols() {
                return Err(Error::shape("hidden state", self.proj.cols(), h.len()));
            }
            let row = out.row_mut(t);
            row.copy_from_slice(&self.proj_bias);
            self.proj.matvec_acc(h, row);
        }
        Ok(out)
    }

    pub fn emissions(&self, inputs: &[Vec<T>]) -> Result<EmissionMatrix<T>> {
        self.project_emissions(&self.bilstm_forward(inputs)?)
    }

    pub fn emissions_traced(&self, inputs: &[Vec<T>]) -> Result<(EmissionMatrix<T>, EncoderTrace<T>)> {
        let trace = self.bilstm_traced(inputs)?;
        let em = self.project_emissions(&trace.hidden)?;
        Ok((em, trace))
    }

    /// Accumulates parameter gradients for `d_emissions` into `grads` and
    /// returns the gradient w.r.t. each input vector.
    pub fn backward(
        &self,
        trace: &EncoderTrace<T>,
        d_emissions: &Matrix<T>,
        grads: &mut BiLstmEncoder<T>,
    ) -> Vec<Vec<T>> {
        let hd = self.hidden_dim();
        let n = trace.hidden.len();
        let mut d_fwd = Vec::with_capacity(n);
        let mut d_bwd = Vec::with_capacity(n);
        for (t, h) in trace.hidden.iter().enumerate() {
            let de = d_emissions.row(t);
            grads.proj.add_outer(de, h);
            for (b, &d) in grads.proj_bias.iter_mut().zip(de) {
                *b += d;
            }
            let mut dh = vec![T::zero(); 2 * hd];
            self.proj.matvec_t_acc(de, &mut dh);
            d_bwd.push(dh.split_off(hd));
            d_fwd.push(dh);
        }
        let dx_f = self.forward_cell.backward(&trace.fwd, &d_fwd, &mut grads.forward_cell);
        let dx_b = self.backward_cell.backward(&trace.bwd, &d_bwd, &mut grads.backward_cell);
        dx_f.into_iter().zip(dx_b).map(|(a, b)| a.into_iter().zip(b).map(|(x, y)| x + y).collect()).collect()
    }
}

impl<T: Scalar> ParamSet<T> for BiLstmEncoder<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        let shape = [self.proj.rows(), self.proj.cols()];
        prefixed("fwd", self.forward_cell.tensors())
            .chain(prefixed("bwd", self.backward_cell.tensors()))
            .chain([view("proj", &shape, self.proj.as_slice()), view("proj_bias", &shape[..1], &self.proj_bias)])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        let shape = [self.proj.rows(), self.proj.cols()];
        prefixed_mut("fwd", self.forward_cell.tensors_mut())
            .chain(prefixed_mut("bwd", self.backward_cell.tensors_mut()))
            .chain([
                view_mut("proj", &shape, self.proj.as_mut_slice()),
                view_mut("proj_bias", &shape[..1], &mut self.proj_bias),
            ])
            .collect()
    }
}
