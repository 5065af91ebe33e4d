use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::utterance_rng;
use crate::error::{Error, Result};
use crate::loss::{btc_loss, ctc_loss, PenaltySchedule};
use crate::topology::{column_of, Transcript, Vocabulary};
use crate::trainer::data::{Dataset, Utterance};
use crate::trainer::decode::{edit_distance, greedy_decode, EditCounts};
use crate::trainer::encoder::{
    encoder_backward_cached, encoder_forward, encoder_forward_cached, EncoderGrads, EncoderParams,
};

/// Optimizer and model hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub hidden_dim: usize,
    /// Neighbouring frames stacked on each side of the encoder input.
    pub context: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    /// Initial bypass penalty.
    pub beta: Option<f64>,
    /// Per-epoch penalty decay.
    pub tau: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            epochs: 20,
            batch_size: 16,
            clip_norm: 20.0,
            hidden_dim: 64,
            context: 3,
            init_seed: 7,
            shuffle_seed: 11,
            beta: Some(2.0),
            tau: Some(0.995),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("batch_size and hidden_dim must be positive".into()));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::Config("clip_norm must be >= 0".into()));
        }
        Ok(())
    }

    /// The configured penalty schedule, if both `beta` and `tau` are set.
    pub fn schedule(&self) -> Result<Option<PenaltySchedule>> {
        match (self.beta, self.tau) {
            (Some(b), Some(t)) => PenaltySchedule::new(b, t).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainCriterion {
    Ctc,
    /// Bypass loss with `λ_i` from the schedule at epoch `i`.
    Btc(PenaltySchedule),
    /// Bypass loss with one penalty for every epoch.
    BtcFixed(f64),
}

impl TrainCriterion {
    pub fn penalty(&self, epoch: usize) -> Option<f64> {
        match self {
            TrainCriterion::Ctc => None,
            TrainCriterion::Btc(s) => Some(s.penalty_at(epoch)),
            TrainCriterion::BtcFixed(l) => Some(*l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lambda: Option<f64>,
    /// Mean per-utterance negative log-likelihood over the epoch.
    pub train_nll: f64,
    pub test_per: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub final_counts: EditCounts,
    pub final_per: f64,
    /// `(reference, hypothesis)` for the first few test utterances.
    pub samples: Vec<(String, String)>,
    /// Mean ★ occupancy per frame in the last epoch over training utterances
    /// whose label differs from the clean transcript.
    pub star_occupancy_corrupted: Option<f64>,
    /// Same, over utterances whose label is clean.
    pub star_occupancy_clean: Option<f64>,
}

impl TrainReport {
    /// `epoch,lambda,train_nll,test_per` with one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lambda,train_nll,test_per\n");
        for e in &self.epochs {
            let lambda = e.lambda.map_or(String::new(), |l| format!("{l}"));
            let _ = writeln!(out, "{},{},{:.10},{:.4}", e.epoch, lambda, e.train_nll, e.test_per);
        }
        out
    }

    pub fn summary(&self) -> String {
        let c = &self.final_counts;
        let mut out = format!(
            "PER {:.2}% (S={} I={} D={} N={})\n",
            self.final_per, c.substitutions, c.insertions, c.deletions, c.ref_len
        );
        if let (Some(a), Some(b)) = (self.star_occupancy_corrupted, self.star_occupancy_clean) {
            let _ = writeln!(out, "star occupancy: corrupted {a:.4}, clean {b:.4}");
        }
        for (r, h) in &self.samples {
            let _ = writeln!(out, "  ref: {r}\n  hyp: {h}");
        }
        out
    }
}

struct UttOutcome {
    nll: f64,
    grads: EncoderGrads,
    star_occupancy: f64,
}

fn utterance_step(
    params: &EncoderParams,
    utt: &Utterance,
    label: &Transcript,
    vocab: &Vocabulary,
    lambda: Option<f64>,
    index: usize,
) -> Result<UttOutcome> {
    let (e, cache) = encoder_forward_cached(params, &utt.features)?;
    let loss = match lambda {
        None => ctc_loss(&e, label, vocab, None),
        Some(l) => btc_loss(&e, label, vocab, None, l),
    }
    .map_err(|err| match err {
        Error::UnrealizableTranscript { frames } => Error::UnrealizableUtterance {
            utterance: index,
            frames,
        },
        other => other,
    })?;
    let grads = encoder_backward_cached(params, &utt.features, &cache, &loss.grad);
    Ok(UttOutcome {
        nll: loss.nll,
        star_occupancy: loss.mean_occupancy(column_of(vocab.star())),
        grads,
    })
}

/// Greedy-decodes `utts` and scores against their transcripts.
pub fn evaluate(params: &EncoderParams, utts: &[Utterance]) -> Result<(EditCounts, Vec<Transcript>)> {
    let hyps = utts
        .par_iter()
        .map(|u| encoder_forward(params, &u.features).map(|e| greedy_decode(&e)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = EditCounts::default();
    for (u, h) in utts.iter().zip(&hyps) {
        total += edit_distance(u.transcript.tokens(), h.tokens());
    }
    Ok((total, hyps))
}

/// Minibatch gradient descent on the summed batch loss with global-norm
/// clipping. `labels[i]` is the (possibly corrupted) training transcript of
/// `data.train[i]`; test scoring always uses the clean test transcripts.
///
/// Utterance losses within a batch run in parallel and are reduced in batch
/// order, so results do not depend on the thread count.
pub fn train(
    data: &Dataset,
    labels: &[Transcript],
    criterion: TrainCriterion,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, TrainReport)> {
    cfg.validate()?;
    if labels.len() != data.train.len() {
        return Err(Error::Config(format!(
            "{} labels for {} training utterances",
            labels.len(),
            data.train.len()
        )));
    }
    let vocab = &data.vocab;
    let mut params = EncoderParams::init(
        data.feature_dim(),
        cfg.context,
        cfg.hidden_dim,
        vocab.extended_size(),
        cfg.init_seed,
    );
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut last_occupancy = vec![0.0; data.train.len()];

    for epoch in 0..cfg.epochs {
        let lambda = criterion.penalty(epoch);
        order.sort_unstable();
        order.shuffle(&mut utterance_rng(cfg.shuffle_seed, epoch as u64));
        let mut nll_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let outcomes = batch
                .par_iter()
                .map(|&i| utterance_step(&params, &data.train[i], &labels[i], vocab, lambda, i))
                .collect::<Vec<_>>();
            let mut grads = params.zero_grads();
            for (&i, outcome) in batch.iter().zip(outcomes) {
                let o = outcome?;
                nll_sum += o.nll;
                last_occupancy[i] = o.star_occupancy;
                grads.add_assign(&o.grads);
            }
            let norm = grads.norm();
            if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                grads.scale(cfg.clip_norm / norm);
            }
            params.apply(&grads, cfg.lr);
        }
        let (counts, _) = evaluate(&params, &data.test)?;
        epochs.push(EpochStats {
            epoch,
            lambda,
            train_nll: nll_sum / data.train.len().max(1) as f64,
            test_per: counts.error_rate(),
        });
    }

    let (final_counts, hyps) = evaluate(&params, &data.test)?;
    let samples = data
        .test
        .iter()
        .zip(&hyps)
        .take(5)
        .map(|(u, h)| (u.transcript.to_line(vocab), h.to_line(vocab)))
        .collect();

    let (mut corrupted, mut clean) = (Vec::new(), Vec::new());
    if lambda_used(&criterion) && cfg.epochs > 0 {
        for ((u, l), occ) in data.train.iter().zip(labels).zip(&last_occupancy) {
            if &u.transcript == l {
                clean.push(*occ);
            } else {
                corrupted.push(*occ);
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    Ok((
        params,
        TrainReport {
            epochs,
            final_per: final_counts.error_rate(),
            final_counts,
            samples,
            star_occupancy_corrupted: mean(&corrupted),
            star_occupancy_clean: mean(&clean),
        },
    ))
}

fn lambda_used(c: &TrainCriterion) -> bool {
    !matches!(c, TrainCriterion::Ctc)
}
