//! Synthetic "speech": each unit owns a template vector, and an utterance is a
//! run of noisy template frames.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corruption::utterance_rng;
use crate::error::{Error, Result};
use crate::loss::parse_row;
use crate::topology::{Transcript, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskConfig {
    pub num_units: usize,
    pub feature_dim: usize,
    /// Inclusive frame-count range per token.
    pub frames_per_token: (usize, usize),
    pub noise_std: f64,
    /// Inclusive token-count range per utterance.
    pub utterance_length: (usize, usize),
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        SyntheticTaskConfig {
            num_units: 8,
            feature_dim: 16,
            frames_per_token: (3, 5),
            noise_std: 1.0,
            utterance_length: (3, 10),
            train_size: 2000,
            test_size: 200,
            seed: 2023,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_units == 0 || self.feature_dim == 0 {
            return bad("num_units and feature_dim must be positive");
        }
        if self.frames_per_token.0 == 0 || self.frames_per_token.0 > self.frames_per_token.1 {
            return bad("frames_per_token must be a non-empty range starting at >= 1");
        }
        if self.utterance_length.0 == 0 || self.utterance_length.0 > self.utterance_length.1 {
            return bad("utterance_length must be a non-empty range starting at >= 1");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be >= 0");
        }
        Ok(())
    }

    /// Units are named `p0`, `p1`, ...
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new((0..self.num_units).map(|i| format!("p{i}"))).expect("generated names")
    }
}

/// Frame-major `T × D` feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub frames: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Features {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub features: Features,
    pub transcript: Transcript,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

impl Dataset {
    pub fn train_transcripts(&self) -> Vec<Transcript> {
        self.train.iter().map(|u| u.transcript.clone()).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.train
            .first()
            .or(self.test.first())
            .map_or(0, |u| u.features.dim)
    }
}

/// Builds train and test sets. Adjacent tokens of an utterance always
/// differ: frames carry no silence, so a repeated unit would be acoustically
/// one segment. Stream 0 of the seed draws the templates;
/// train utterance `i` uses stream `1 + i` and test utterance `j` stream
/// `1 + train_size + j`. Features are standardized per dimension with the
/// training-set mean and deviation.
pub fn generate_synthetic_dataset(cfg: &SyntheticTaskConfig) -> Result<Dataset> {
    cfg.validate()?;
    let vocab = cfg.vocabulary();
    let mut rng = utterance_rng(cfg.seed, 0);
    let templates: Vec<Vec<f64>> = (0..cfg.num_units)
        .map(|_| {
            (0..cfg.feature_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let first = vocab.unit_labels().next().expect("non-empty");

    let make = |stream: u64| -> Utterance {
        let mut rng = utterance_rng(cfg.seed, stream);
        let len = rng.random_range(cfg.utterance_length.0..=cfg.utterance_length.1);
        let mut tokens = Vec::with_capacity(len);
        let mut values = Vec::new();
        let mut frames = 0;
        let mut prev: Option<usize> = None;
        for _ in 0..len {
            let unit = match prev {
                Some(p) if cfg.num_units > 1 => {
                    let u = rng.random_range(0..cfg.num_units - 1);
                    if u >= p {
                        u + 1
                    } else {
                        u
                    }
                }
                _ => rng.random_range(0..cfg.num_units),
            };
            prev = Some(unit);
            tokens.push(first + unit as u32);
            let reps = rng.random_range(cfg.frames_per_token.0..=cfg.frames_per_token.1);
            for _ in 0..reps {
                for &x in &templates[unit] {
                    let n: f64 = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    values.push(x + n);
                }
            }
            frames += reps;
        }
        Utterance {
            features: Features {
                frames,
                dim: cfg.feature_dim,
                values,
            },
            transcript: Transcript::from_labels_unchecked(tokens),
        }
    };

    let mut train: Vec<Utterance> = (0..cfg.train_size as u64).map(|i| make(1 + i)).collect();
    let mut test: Vec<Utterance> = (0..cfg.test_size as u64)
        .map(|j| make(1 + cfg.train_size as u64 + j))
        .collect();

    standardize(&mut train, &mut test, cfg.feature_dim);
    Ok(Dataset { vocab, train, test })
}

fn standardize(train: &mut [Utterance], test: &mut [Utterance], dim: usize) {
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0usize;
    for u in train.iter() {
        for t in 0..u.features.frames {
            for (d, &x) in u.features.frame(t).iter().enumerate() {
                sum[d] += x;
                sq[d] += x * x;
            }
        }
        n += u.features.frames;
    }
    if n == 0 {
        return;
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let std: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let var = s / n as f64 - m * m;
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for u in train.iter_mut().chain(test.iter_mut()) {
        for (i, x) in u.features.values.iter_mut().enumerate() {
            let d = i % dim;
            *x = (*x - mean[d]) / std[d];
        }
    }
}

/// Feature file: for each utterance a `T D` header line followed by `T` rows.
pub fn features_to_text(utts: &[&Features]) -> String {
    let mut out = String::new();
    for f in utts {
        let _ = writeln!(out, "{} {}", f.frames, f.dim);
        for t in 0..f.frames {
            let row: Vec<String> = f.frame(t).iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn features_from_text(text: &str) -> Result<Vec<Features>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((i, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad header {header:?}"),
            })?;
        let [frames, dim] = dims[..] else {
            return Err(Error::Parse {
                line: i + 1,
                message: "header must be `T D`".into(),
            });
        };
        let mut values = Vec::with_capacity(frames * dim);
        for _ in 0..frames {
            let (j, line) = lines.next().ok_or(Error::Parse {
                line: i + 1,
                message: "truncated utterance".into(),
            })?;
            let row = parse_row(line, j + 1)?;
            if row.len() != dim {
                return Err(Error::Parse {
                    line: j + 1,
                    message: format!("expected {dim} values, found {}", row.len()),
                });
            }
            values.extend(row);
        }
        out.push(Features { frames, dim, values });
    }
    Ok(out)
}
