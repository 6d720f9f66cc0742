//! Bi-LSTM context encoder and emission projection.

mod bilstm;
mod lstm;

pub use bilstm::{BiLstmEncoder, EmissionMatrix, EncoderTrace};
pub use lstm::{lstm_cell_step, lstm_forward, Direction, LstmCell, LstmState, LstmTrace};
