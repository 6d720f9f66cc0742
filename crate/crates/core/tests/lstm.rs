//! The LSTM cell against a direct scalar transcription of the gate equations.

#![allow(clippy::needless_range_loop)]

use legalner::encoder::{lstm_cell_step, lstm_forward, Direction, LstmCell, LstmState};
use legalner::rng::seeded;
use rand::Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line evaluation: every gate is `act(W·[x; h] + b)`.
fn oracle(cell: &LstmCell<f64>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let xh: Vec<f64> = x.iter().chain(h).copied().collect();
    let affine = |w: &legalner::tensor::Matrix<f64>, b: &[f64], r: usize| {
        (0..xh.len()).map(|j| w.get(r, j) * xh[j]).sum::<f64>() + b[r]
    };
    let (mut h_new, mut c_new) = (Vec::new(), Vec::new());
    for r in 0..cell.hidden_dim() {
        let i = sigmoid(affine(&cell.w_i, &cell.b_i, r));
        let f = sigmoid(affine(&cell.w_f, &cell.b_f, r));
        let o = sigmoid(affine(&cell.w_o, &cell.b_o, r));
        let g = affine(&cell.w_c, &cell.b_c, r).tanh();
        let cr = f * c[r] + i * g;
        c_new.push(cr);
        h_new.push(o * cr.tanh());
    }
    (h_new, c_new)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn random_cells_match_scalar_oracle() {
    let mut rng = seeded(2024);
    for _ in 0..500 {
        let (input, hidden) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let mut cell = LstmCell::<f64>::random(input, hidden, rng.random_range(-1.0..2.0), &mut rng);
        for b in [&mut cell.b_i, &mut cell.b_o, &mut cell.b_c] {
            b.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let x: Vec<f64> = (0..input).map(|_| rng.random_range(-3.0..3.0)).collect();
        let prev = LstmState {
            h: (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..hidden).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let got = lstm_cell_step(&cell, &x, &prev).unwrap();
        let (h, c) = oracle(&cell, &x, &prev.h, &prev.c);
        for r in 0..hidden {
            assert!(rel(got.h[r], h[r]) <= 1e-12, "h[{r}] {} vs {}", got.h[r], h[r]);
            assert!(rel(got.c[r], c[r]) <= 1e-12, "c[{r}] {} vs {}", got.c[r], c[r]);
        }
    }
}

#[test]
fn zero_parameter_closed_forms() {
    let cell = LstmCell::<f64>::zeros(2, 1);
    let s = lstm_cell_step(&cell, &[0.7, -1.1], &LstmState::zeros(1)).unwrap();
    assert_eq!((s.h[0], s.c[0]), (0.0, 0.0));
    let s = lstm_cell_step(&cell, &[0.7, -1.1], &LstmState { h: vec![0.0], c: vec![1.0] }).unwrap();
    assert_eq!(s.c[0], 0.5);
    assert!((s.h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
    assert!((s.h[0] - 0.2310585786).abs() < 1e-10);
}

#[test]
fn sequence_forward_chains_single_steps() {
    let mut rng = seeded(9);
    let cell = LstmCell::<f64>::random(3, 2, 1.0, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let fwd = lstm_forward(&cell, &xs, Direction::Forward).unwrap();
    let mut state = LstmState::zeros(2);
    for (t, x) in xs.iter().enumerate() {
        state = lstm_cell_step(&cell, x, &state).unwrap();
        assert_eq!(fwd[t], state);
    }
    let bwd = lstm_forward(&cell, &xs, Direction::Backward).unwrap();
    let mut state = LstmState::zeros(2);
    for t in (0..xs.len()).rev() {
        state = lstm_cell_step(&cell, &xs[t], &state).unwrap();
        assert_eq!(bwd[t], state);
    }
}

#[test]
fn f32_tracks_f64() {
    let mut rng = seeded(4);
    let cell = LstmCell::<f64>::random(3, 3, 1.0, &mut rng);
    let narrow = LstmCell::<f32>::from_parts(
        cast(&cell.w_i),
        cast(&cell.w_f),
        cast(&cell.w_o),
        cast(&cell.w_c),
        castv(&cell.b_i),
        castv(&cell.b_f),
        castv(&cell.b_o),
        castv(&cell.b_c),
    )
    .unwrap();
    let x = [0.3, -0.8, 1.5];
    let wide = lstm_cell_step(&cell, &x, &LstmState::zeros(3)).unwrap();
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let small = lstm_cell_step(&narrow, &x32, &LstmState::zeros(3)).unwrap();
    for r in 0..3 {
        assert!((wide.h[r] - small.h[r] as f64).abs() < 1e-6);
    }
}

fn cast(m: &legalner::tensor::Matrix<f64>) -> legalner::tensor::Matrix<f32> {
    legalner::tensor::Matrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c) as f32)
}

fn castv(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}
