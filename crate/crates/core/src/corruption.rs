//! Synthetic transcript corruption: substitution, insertion, and insertion
//! followed by substitution.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), keyed by the 64-bit seed
//! through `SeedableRng::seed_from_u64` and using the utterance index as the
//! stream id. Each utterance therefore draws from its own reproducible
//! stream, independent of how a corpus is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fst::Label;
use crate::topology::{Transcript, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    Substitution,
    Insertion,
    SubPlusIns,
}

impl std::str::FromStr for CorruptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sub" | "substitution" => Ok(CorruptionMode::Substitution),
            "ins" | "insertion" => Ok(CorruptionMode::Insertion),
            "sub+ins" | "sub_plus_ins" => Ok(CorruptionMode::SubPlusIns),
            other => Err(Error::Config(format!("unknown corruption mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub mode: CorruptionMode,
    pub p_sub: f64,
    pub p_ins: f64,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn new(mode: CorruptionMode, p_sub: f64, p_ins: f64, seed: u64) -> Result<Self> {
        for (name, p) in [("p_sub", p_sub), ("p_ins", p_ins)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        match mode {
            CorruptionMode::Substitution if p_ins != 0.0 => {
                Err(Error::Config("substitution mode requires p_ins = 0".into()))
            }
            CorruptionMode::Insertion if p_sub != 0.0 => {
                Err(Error::Config("insertion mode requires p_sub = 0".into()))
            }
            _ => Ok(CorruptionConfig {
                mode,
                p_sub,
                p_ins,
                seed,
            }),
        }
    }

    pub fn substitution(p_sub: f64, seed: u64) -> Result<Self> {
        Self::new(CorruptionMode::Substitution, p_sub, 0.0, seed)
    }

    pub fn insertion(p_ins: f64, seed: u64) -> Result<Self> {
        Self::new(CorruptionMode::Insertion, 0.0, p_ins, seed)
    }
}

/// The generator for utterance `index` under `seed`.
pub fn utterance_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Realized corruption counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStats {
    /// Tokens offered to the substitution pass.
    pub sub_trials: u64,
    pub substitutions: u64,
    /// Gaps offered to the insertion pass.
    pub gaps: u64,
    pub insertions: u64,
}

impl CorruptionStats {
    pub fn substitution_rate(&self) -> f64 {
        ratio(self.substitutions, self.sub_trials)
    }

    pub fn insertion_rate(&self) -> f64 {
        ratio(self.insertions, self.gaps)
    }

    fn add(&mut self, o: &CorruptionStats) {
        self.sub_trials += o.sub_trials;
        self.substitutions += o.substitutions;
        self.gaps += o.gaps;
        self.insertions += o.insertions;
    }
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn substitute<R: Rng>(
    t: &Transcript,
    vocab: &Vocabulary,
    p_sub: f64,
    rng: &mut R,
    stats: &mut CorruptionStats,
) -> Result<Transcript> {
    if vocab.len() < 2 && p_sub > 0.0 {
        return Err(Error::Vocabulary(
            "substitution needs at least two units".into(),
        ));
    }
    let first = vocab.unit_labels().next().unwrap_or(0);
    let tokens = t
        .tokens()
        .iter()
        .map(|&tok| {
            stats.sub_trials += 1;
            if !rng.random_bool(p_sub) {
                return tok;
            }
            stats.substitutions += 1;
            // uniform over the other V - 1 units
            let k = rng.random_range(0..vocab.len() as Label - 1);
            let orig = tok - first;
            first + if k < orig { k } else { k + 1 }
        })
        .collect();
    Ok(Transcript::from_labels_unchecked(tokens))
}

fn insert<R: Rng>(
    t: &Transcript,
    vocab: &Vocabulary,
    p_ins: f64,
    rng: &mut R,
    stats: &mut CorruptionStats,
) -> Result<Transcript> {
    if vocab.is_empty() && p_ins > 0.0 {
        return Err(Error::Vocabulary("insertion needs a unit".into()));
    }
    let first = vocab.unit_labels().next().unwrap_or(0);
    let mut tokens = Vec::with_capacity(t.len() * 2 + 1);
    for gap in 0..=t.len() {
        stats.gaps += 1;
        if rng.random_bool(p_ins) {
            stats.insertions += 1;
            tokens.push(first + rng.random_range(0..vocab.len() as Label));
        }
        if let Some(&tok) = t.tokens().get(gap) {
            tokens.push(tok);
        }
    }
    Ok(Transcript::from_labels_unchecked(tokens))
}

/// Replaces each token with probability `p_sub` by a different unit drawn
/// uniformly.
pub fn corrupt_substitute<R: Rng>(
    t: &Transcript,
    vocab: &Vocabulary,
    p_sub: f64,
    rng: &mut R,
) -> Result<Transcript> {
    substitute(t, vocab, p_sub, rng, &mut CorruptionStats::default())
}

/// At each of the `U + 1` gaps, including both ends, inserts one uniformly
/// drawn unit with probability `p_ins`.
pub fn corrupt_insert<R: Rng>(
    t: &Transcript,
    vocab: &Vocabulary,
    p_ins: f64,
    rng: &mut R,
) -> Result<Transcript> {
    insert(t, vocab, p_ins, rng, &mut CorruptionStats::default())
}

/// Insertion, then substitution over the lengthened transcript, on one stream.
pub fn corrupt_sub_ins<R: Rng>(
    t: &Transcript,
    vocab: &Vocabulary,
    p_sub: f64,
    p_ins: f64,
    rng: &mut R,
) -> Result<Transcript> {
    let inserted = corrupt_insert(t, vocab, p_ins, rng)?;
    corrupt_substitute(&inserted, vocab, p_sub, rng)
}

/// Corrupts one utterance with its own stream and reports the counts.
pub fn corrupt_utterance(
    t: &Transcript,
    vocab: &Vocabulary,
    config: &CorruptionConfig,
    index: u64,
) -> Result<(Transcript, CorruptionStats)> {
    let mut rng = utterance_rng(config.seed, index);
    let mut stats = CorruptionStats::default();
    let out = match config.mode {
        CorruptionMode::Substitution => substitute(t, vocab, config.p_sub, &mut rng, &mut stats)?,
        CorruptionMode::Insertion => insert(t, vocab, config.p_ins, &mut rng, &mut stats)?,
        CorruptionMode::SubPlusIns => {
            let inserted = insert(t, vocab, config.p_ins, &mut rng, &mut stats)?;
            substitute(&inserted, vocab, config.p_sub, &mut rng, &mut stats)?
        }
    };
    Ok((out, stats))
}

/// Corrupts a corpus; utterance `i` uses stream `i`.
pub fn corrupt_corpus(
    transcripts: &[Transcript],
    vocab: &Vocabulary,
    config: &CorruptionConfig,
) -> Result<(Vec<Transcript>, CorruptionStats)> {
    let mut total = CorruptionStats::default();
    let mut out = Vec::with_capacity(transcripts.len());
    for (i, t) in transcripts.iter().enumerate() {
        let (c, s) = corrupt_utterance(t, vocab, config, i as u64)?;
        total.add(&s);
        out.push(c);
    }
    Ok((out, total))
}
