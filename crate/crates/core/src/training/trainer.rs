use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::hyper::Hyperparameters;
use super::setup::TrainingSentence;
use super::sgd::sgd_step;
use crate::crf::CrfLoss;
use crate::embeddings::dropout_mask;
use crate::error::{Error, Result};
use crate::evaluation::{classification_report, token_accuracy, MatchMode, Report};
use crate::model::{Tagger, TaggerGrads};
use crate::rng::{ModelRng, RngState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: Option<f64>,
    pub dev_accuracy: Option<f64>,
    pub lr: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    #[serde(flatten)]
    pub record: EpochRecord,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub best_score: Option<f64>,
    pub since_improvement: usize,
    pub learning_rate: f64,
    /// Whether the current plateau has already been annealed.
    pub annealed: bool,
}

impl TrainState {
    pub fn new(learning_rate: f64) -> Self {
        TrainState { epoch: 0, best_score: None, since_improvement: 0, learning_rate, annealed: false }
    }

    /// Records a validation score; true if it is a new best.
    pub fn observe(&mut self, score: f64) -> bool {
        if self.best_score.is_none_or(|b| score > b) {
            self.best_score = Some(score);
            self.since_improvement = 0;
            self.annealed = false;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealDecision {
    pub learning_rate: f64,
    pub stop: bool,
}

/// Halves (by `anneal_factor`) the learning rate once per plateau when the
/// plateau reaches `patience` epochs; stops when the plateau outlasts
/// `patience` or the rate falls below the floor.
pub fn anneal_check(state: &mut TrainState, config: &Hyperparameters) -> AnnealDecision {
    if state.since_improvement >= config.patience && !state.annealed {
        state.learning_rate *= config.anneal_factor;
        state.annealed = true;
    }
    AnnealDecision {
        learning_rate: state.learning_rate,
        stop: state.since_improvement > config.patience || state.learning_rate < config.min_learning_rate,
    }
}

/// Mean loss and mean gradient over `batch`. Sentences are processed in
/// parallel but reduced in batch order, so the result does not depend on
/// scheduling.
pub fn compute_gradients<T: Scalar>(
    model: &Tagger<T>,
    batch: &[&TrainingSentence],
    dropped: &[Option<Vec<bool>>],
    kind: CrfLoss,
) -> Result<(T, TaggerGrads<T>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let per_sentence: Vec<(T, TaggerGrads<T>)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.loss_grad(&s.tokens, &s.tags, dropped.get(i).and_then(|m| m.as_deref()), kind))
        .collect::<Result<_>>()?;
    let w = T::one() / T::of(batch.len() as f64);
    let mut total = TaggerGrads::zeros(model);
    let mut loss = T::zero();
    for (l, g) in &per_sentence {
        loss += *l * w;
        total.add_scaled(g, w);
    }
    Ok((loss, total))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: Report,
    pub accuracy: f64,
    pub predictions: Vec<Vec<usize>>,
}

/// Decodes every sentence and scores the result against the gold tags.
pub fn evaluate<T: Scalar>(
    model: &Tagger<T>,
    sentences: &[TrainingSentence],
    constrained: bool,
    mode: MatchMode,
) -> Result<Evaluation> {
    let predictions: Vec<Vec<usize>> =
        sentences.par_iter().map(|s| model.predict(&s.tokens, constrained).map(|p| p.tags)).collect::<Result<_>>()?;
    let pairs = sentences
        .iter()
        .zip(&predictions)
        .map(|(s, p)| {
            Ok((
                s.gold_spans(&model.tagset)?,
                crate::corpus::bio_to_spans(p, &model.tagset, crate::corpus::BioMode::Repair)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = classification_report(&pairs, &model.tagset, mode)?;
    let gold: Vec<Vec<usize>> = sentences.iter().map(|s| s.tags.clone()).collect();
    let accuracy = if gold.iter().all(Vec::is_empty) { 0.0 } else { token_accuracy(&gold, &predictions)? };
    Ok(Evaluation { report, accuracy, predictions })
}

fn divergence<T: Scalar>(model: &Tagger<T>, epoch: usize, batch: usize, what: String) -> Error {
    let norms: Vec<String> = model.param_norms().into_iter().map(|(n, v)| format!("{n}={v:.4e}")).collect();
    Error::Divergence { epoch, batch, detail: format!("{what}; parameter norms: {}", norms.join(", ")) }
}

/// Runs up to `config.epochs` epochs of minibatch SGD, evaluating on `dev`
/// after every epoch and returning the best-scoring model (or the last one
/// when `dev` is empty). `on_epoch` sees each log line as it is produced.
pub fn train<T: Scalar>(
    config: &Hyperparameters,
    train_set: &[TrainingSentence],
    dev_set: &[TrainingSentence],
    mut model: Tagger<T>,
    rng: &mut ModelRng,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Checkpoint<T>> {
    config.validate()?;
    let train_set: Vec<&TrainingSentence> = train_set.iter().filter(|s| !s.is_empty()).collect();
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut state = TrainState::new(config.learning_rate);
    let mut history = Vec::new();
    let mut best: Option<(Tagger<T>, usize)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        state.epoch = epoch;
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TrainingSentence> = chunk.iter().map(|&i| train_set[i]).collect();
            let dropped = batch
                .iter()
                .map(|s| {
                    (config.word_dropout > 0.0).then(|| dropout_mask(s.len(), config.word_dropout, rng)).transpose()
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = compute_gradients(&model, &batch, &dropped, config.loss)?;
            if !loss.is_finite() {
                return Err(divergence(&model, epoch, b, format!("batch loss {loss}")));
            }
            loss_sum += loss.as_f64() * batch.len() as f64;
            sgd_step(&mut model, &grads, T::of(state.learning_rate), T::of(config.gradient_clip)).map_err(
                |e| match e {
                    Error::NonFinite(what) => divergence(&model, epoch, b, what),
                    other => other,
                },
            )?;
        }

        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            dev_micro_f1: None,
            dev_accuracy: None,
            lr: state.learning_rate,
        };
        let mut stop = false;
        if !dev_set.is_empty() {
            let eval = evaluate(&model, dev_set, true, MatchMode::Strict)?;
            record.dev_micro_f1 = Some(eval.report.micro_f1);
            record.dev_accuracy = Some(eval.accuracy);
            if state.observe(eval.report.micro_f1) {
                best = Some((model.clone(), epoch));
            }
            stop = anneal_check(&mut state, config).stop;
        }
        log::info!(
            "epoch {epoch}: loss {:.4} dev F1 {} lr {}",
            record.train_loss,
            record.dev_micro_f1.map_or("-".into(), |f| format!("{f:.4}")),
            record.lr
        );
        on_epoch(&EpochLog { record: record.clone(), seconds: started.elapsed().as_secs_f64() });
        history.push(record);
        if stop {
            break;
        }
    }

    let (model, best_epoch) = match best {
        Some((m, e)) => (m, Some(e)),
        None => (model, None),
    };
    Ok(Checkpoint {
        tagger: model,
        hyperparameters: config.clone(),
        history,
        best_epoch,
        rng: RngState::capture(config.seed, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Hyperparameters {
        Hyperparameters { patience: 3, anneal_factor: 0.5, learning_rate: 0.1, ..Default::default() }
    }

    #[test]
    fn improvement_keeps_lr() {
        let mut s = TrainState::new(0.1);
        s.observe(0.5);
        assert_eq!(anneal_check(&mut s, &cfg()), AnnealDecision { learning_rate: 0.1, stop: false });
    }

    #[test]
    fn patience_hit_anneals_once() {
        let mut s = TrainState::new(0.1);
        s.observe(0.5);
        for _ in 0..3 {
            s.observe(0.4);
        }
        let d = anneal_check(&mut s, &cfg());
        assert_eq!(d, AnnealDecision { learning_rate: 0.05, stop: false });
        s.observe(0.4);
        let d = anneal_check(&mut s, &cfg());
        assert_eq!(d, AnnealDecision { learning_rate: 0.05, stop: true });
    }

    #[test]
    fn floor_stops() {
        let mut s = TrainState::new(1e-4);
        s.observe(0.5);
        for _ in 0..3 {
            s.observe(0.1);
        }
        let d = anneal_check(&mut s, &cfg());
        assert!((d.learning_rate - 5e-5).abs() < 1e-18);
        assert!(d.stop);
    }

    #[test]
    fn new_best_resets_plateau() {
        let mut s = TrainState::new(0.1);
        s.observe(0.5);
        s.observe(0.5);
        assert_eq!(s.since_improvement, 1);
        assert!(s.observe(0.6));
        assert_eq!(s.since_improvement, 0);
    }
}
