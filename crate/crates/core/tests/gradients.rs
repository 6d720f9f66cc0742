//! End-to-end gradient checks against central finite differences.

#![allow(clippy::needless_range_loop)]

use legalner::corpus::{TagSet, Vocabulary};
use legalner::crf::{nll_loss, nll_loss_grad, CrfLoss, TransitionMatrix};
use legalner::embeddings::{EmbedderPart, EmbeddingTable, StackedEmbedder, WordEmbedding};
use legalner::encoder::BiLstmEncoder;
use legalner::model::Tagger;
use legalner::params::ParamSet;
use legalner::rng::seeded;
use rand::Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

/// Relative error with the denominator floored at 1e-6: central differences
/// on an O(1) loss carry about 1e-11 of rounding noise, which would swamp
/// the relative error of near-zero gradients.
fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() <= REL_TOL * scale
}

const WORDS: [&str; 5] = ["court", "held", "the", "appeal", "on"];

fn random_model(seed: u64) -> (Tagger<f64>, Vec<String>, Vec<usize>, Option<Vec<bool>>) {
    let mut rng = seeded(seed);
    let dim = rng.random_range(1..=4);
    let hidden = rng.random_range(1..=4);
    let len = rng.random_range(1..=4);
    let tagset = TagSet::new(["COURT"]).unwrap();
    let vocab = Vocabulary::build(WORDS[..3].iter().copied(), 1, false);
    let mut table = EmbeddingTable::random(vocab.len(), dim, &mut rng);
    // widen the default init so activations are not all near zero
    table.matrix.as_mut_slice().iter_mut().for_each(|x| *x *= 4.0 * dim as f64);
    let embedder = StackedEmbedder::new(vec![EmbedderPart::Word(WordEmbedding::new(vocab, table).unwrap())]);
    let mut tagger = Tagger::random(tagset.clone(), embedder, hidden, 1.0, &mut rng);
    let n = tagset.len() + 2;
    for a in 0..n {
        for b in 0..n {
            if !tagger.transitions.is_fixed(a, b) {
                tagger.transitions.set(a, b, rng.random_range(-1.0..1.0));
            }
        }
    }
    tagger.encoder.proj_bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    let tokens: Vec<String> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect();
    let gold: Vec<usize> = (0..len).map(|_| rng.random_range(0..tagset.len())).collect();
    let dropped = seed.is_multiple_of(3).then(|| (0..len).map(|_| rng.random_bool(0.3)).collect());
    (tagger, tokens, gold, dropped)
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let mut checked = 0;
    for seed in 0..24 {
        let (model, tokens, gold, dropped) = random_model(seed);
        let (loss, grads) = model.loss_grad(&tokens, &gold, dropped.as_deref(), CrfLoss::Nll).unwrap();
        let direct = model.loss(&tokens, &gold, dropped.as_deref(), CrfLoss::Nll).unwrap();
        assert_eq!(loss, direct);
        let dense = grads.to_dense(&model);
        let names: Vec<String> = model.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(dense.len(), names.len());
        for (ti, name) in names.iter().enumerate() {
            let len = model.tensors()[ti].data.len();
            for k in 0..len {
                let base = model.tensors()[ti].data[k];
                if !base.is_finite() {
                    assert_eq!(dense[ti][k], 0.0, "{name}[{k}] is fixed but has a gradient");
                    continue;
                }
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    m.tensors_mut()[ti].data[k] = base + delta;
                    m.loss(&tokens, &gold, dropped.as_deref(), CrfLoss::Nll).unwrap()
                };
                let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
                assert!(
                    close(dense[ti][k], numeric),
                    "seed {seed}: {name}[{k}] analytic {} numeric {numeric}",
                    dense[ti][k]
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "only {checked} coordinates checked");
}

#[test]
fn encoder_and_crf_gradient_up_to_four_tags() {
    for seed in 100..124 {
        let mut rng = seeded(seed);
        let (input, hidden, k, len) =
            (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(2..=4), rng.random_range(1..=4));
        let mut enc = BiLstmEncoder::<f64>::random(input, hidden, k, 1.0, &mut rng);
        enc.proj_bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let mut trans = TransitionMatrix::zeros(k);
        for a in 0..k + 2 {
            for b in 0..k + 2 {
                if !trans.is_fixed(a, b) {
                    trans.set(a, b, rng.random_range(-1.0..1.0));
                }
            }
        }
        let xs: Vec<Vec<f64>> = (0..len).map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let gold: Vec<usize> = (0..len).map(|_| rng.random_range(0..k)).collect();
        let loss_of =
            |e: &BiLstmEncoder<f64>, x: &[Vec<f64>]| nll_loss(&e.emissions(x).unwrap(), &trans, &gold).unwrap();

        let (em, trace) = enc.emissions_traced(&xs).unwrap();
        let lg = nll_loss_grad(&em, &trans, &gold).unwrap();
        let mut grads = enc.zeros_like();
        let d_x = enc.backward(&trace, &lg.d_emissions, &mut grads);

        let g_views: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data.to_vec()).collect();
        for (ti, g) in g_views.iter().enumerate() {
            for (k_, &analytic) in g.iter().enumerate() {
                let base = enc.tensors()[ti].data[k_];
                let eval = |d: f64| {
                    let mut e = enc.clone();
                    e.tensors_mut()[ti].data[k_] = base + d;
                    loss_of(&e, &xs)
                };
                let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
                assert!(close(analytic, numeric), "seed {seed} tensor {ti}[{k_}]: {analytic} vs {numeric}");
            }
        }
        for t in 0..len {
            for j in 0..input {
                let eval = |d: f64| {
                    let mut x = xs.clone();
                    x[t][j] += d;
                    loss_of(&enc, &x)
                };
                let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
                assert!(close(d_x[t][j], numeric), "seed {seed} input ({t},{j})");
            }
        }
    }
}

#[test]
fn loss_falls_over_twenty_small_steps() {
    use legalner::training::sgd_step;
    let (mut model, tokens, gold, _) = random_model(7);
    let mut losses = Vec::new();
    for _ in 0..20 {
        let (loss, grads) = model.loss_grad(&tokens, &gold, None, CrfLoss::Nll).unwrap();
        losses.push(loss);
        sgd_step(&mut model, &grads, 0.01, 5.0).unwrap();
    }
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{losses:?}");
    }
    assert!(losses[19] < losses[0]);
}
