//! CTC and bypass (BTC) negative log-likelihoods over the composed lattice,
//! their gradients, the penalty schedule and an enumeration oracle.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::algo::{compose_with_origins, connect_with_map, forward_backward};
use crate::error::{Error, Result};
use crate::fst::{Fst, Label};
use crate::semiring::logsumexp;
use crate::topology::{
    btc_graph, column_of, ctc_graph, emission_chain, Lexicon, Transcript, Vocabulary, BLANK,
    ROW_NORM_TOLERANCE,
};

/// Frame-major `T × V_ext` matrix of log-probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionMatrix {
    frames: usize,
    width: usize,
    values: Vec<f64>,
}

impl EmissionMatrix {
    /// Checked constructor: every row must logsumexp to 0 within 1e-6.
    pub fn new(frames: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let e = Self::unnormalized(frames, width, values)?;
        e.check_normalized(ROW_NORM_TOLERANCE)?;
        Ok(e)
    }

    /// Shape-checked only. Entries act as free additive scores, which is what
    /// finite-difference checks perturb.
    pub fn unnormalized(frames: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 {
            return Err(Error::Emission("no frames".into()));
        }
        if width < 2 {
            return Err(Error::Emission(format!("width {width} < 2")));
        }
        if values.len() != frames * width {
            return Err(Error::Emission(format!(
                "{} values for a {frames}x{width} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Emission("NaN or +inf entry".into()));
        }
        Ok(EmissionMatrix {
            frames,
            width,
            values,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let frames = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Emission("ragged rows".into()));
        }
        Self::new(frames, width, rows.concat())
    }

    pub fn uniform(frames: usize, width: usize) -> Self {
        let v = -(width as f64).ln();
        Self::unnormalized(frames, width, vec![v; frames * width]).expect("valid shape")
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for t in 0..self.frames {
            let z = logsumexp(self.row(t));
            if z.is_nan() || z.abs() > tol {
                return Err(Error::Emission(format!(
                    "row {t} logsumexp is {z}, not 0"
                )));
            }
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, col: usize) -> f64 {
        self.values[t * self.width + col]
    }

    /// Score of label `label` at frame `t`.
    pub fn at(&self, t: usize, label: Label) -> f64 {
        self.get(t, column_of(label))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// First line `T V_ext`, then one line of log-probabilities per frame.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.frames, self.width);
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Parses the text form. Rows are not required to be normalized; call
    /// [`EmissionMatrix::check_normalized`] when that matters.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: 1,
                message: format!("bad header {header:?}"),
            })?;
        let [frames, width] = dims[..] else {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `T V_ext`".into(),
            });
        };
        let mut values = Vec::with_capacity(frames * width);
        let mut rows = 0;
        for (i, line) in lines {
            let row = parse_row(line, i + 1)?;
            if row.len() != width {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {width} values, found {}", row.len()),
                });
            }
            values.extend(row);
            rows += 1;
        }
        if rows != frames {
            return Err(Error::Parse {
                line: rows + 2,
                message: format!("expected {frames} rows, found {rows}"),
            });
        }
        Self::unnormalized(frames, width, values)
    }
}

pub(crate) fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|f| {
            f.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad number {f:?}"),
            })
        })
        .collect()
}

/// Loss value and its gradient with respect to the emission entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LossResult {
    pub nll: f64,
    /// `T × V_ext`, frame-major; `grad[t][v]` is minus the occupancy of
    /// label `v` at frame `t`.
    pub grad: Vec<f64>,
    pub width: usize,
}

impl LossResult {
    pub fn grad_at(&self, t: usize, col: usize) -> f64 {
        self.grad[t * self.width + col]
    }

    pub fn frames(&self) -> usize {
        self.grad.len() / self.width
    }

    /// Mean posterior occupancy of one emission column across frames.
    pub fn mean_occupancy(&self, col: usize) -> f64 {
        let frames = self.frames();
        -(0..frames).map(|t| self.grad_at(t, col)).sum::<f64>() / frames as f64
    }
}

/// Geometric bypass-penalty decay `λ_i = β τ^i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltySchedule {
    beta: f64,
    tau: f64,
}

impl PenaltySchedule {
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {beta}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(PenaltySchedule { beta, tau })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn penalty_at(&self, epoch: usize) -> f64 {
        penalty_at(self, epoch)
    }
}

pub fn penalty_at(schedule: &PenaltySchedule, epoch: usize) -> f64 {
    schedule.beta * schedule.tau.powi(epoch as i32)
}

/// `-log` of the total lattice weight of `emission ∘ graph`, with gradients
/// from arc posteriors.
pub fn lattice_loss(e: &EmissionMatrix, graph: &Fst) -> Result<LossResult> {
    let chain = emission_chain(e);
    let composed = compose_with_origins(&chain, graph)?;
    let trimmed = connect_with_map(&composed.fst);
    let lattice = trimmed.fst;
    if lattice.is_empty() {
        return Err(Error::UnrealizableTranscript { frames: e.frames() });
    }
    // Emission chain state of each lattice state is its frame index.
    let mut frame_of = vec![0usize; lattice.num_states()];
    for (old, new) in trimmed.state_map.iter().enumerate() {
        if let Some(new) = new {
            frame_of[*new] = composed.origins[old].0;
        }
    }
    let fb = forward_backward(&lattice)?;
    let width = e.width();
    let mut grad = vec![0.0; e.frames() * width];
    for ((src, arc), post) in lattice.all_arcs().zip(&fb.posteriors) {
        grad[frame_of[src] * width + column_of(arc.ilabel)] -= post;
    }
    Ok(LossResult {
        nll: -fb.total.0,
        grad,
        width,
    })
}

fn check_width(e: &EmissionMatrix, vocab: &Vocabulary) -> Result<()> {
    if e.width() != vocab.extended_size() {
        return Err(Error::Emission(format!(
            "width {} does not match vocabulary size {} + 2",
            e.width(),
            vocab.len()
        )));
    }
    Ok(())
}

/// Plain CTC. Without a lexicon the transcript is over units.
pub fn ctc_loss(
    e: &EmissionMatrix,
    transcript: &Transcript,
    vocab: &Vocabulary,
    lexicon: Option<&Lexicon>,
) -> Result<LossResult> {
    check_width(e, vocab)?;
    let identity;
    let lexicon = match lexicon {
        Some(l) => l,
        None => {
            identity = Lexicon::identity(vocab);
            &identity
        }
    };
    lattice_loss(e, &ctc_graph(vocab, lexicon, transcript)?)
}

/// Bypass loss with penalty `lambda` on every ★ arc.
pub fn btc_loss(
    e: &EmissionMatrix,
    transcript: &Transcript,
    vocab: &Vocabulary,
    lexicon: Option<&Lexicon>,
    lambda: f64,
) -> Result<LossResult> {
    check_width(e, vocab)?;
    let identity;
    let lexicon = match lexicon {
        Some(l) => l,
        None => {
            identity = Lexicon::identity(vocab);
            &identity
        }
    };
    lattice_loss(e, &btc_graph(vocab, lexicon, transcript, lambda)?)
}

/// Loss criterion for [`batch_loss`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Criterion {
    Ctc,
    Btc { lambda: f64 },
}

/// Evaluates many utterances in parallel. Results come back in input order.
pub fn batch_loss(
    items: &[(&EmissionMatrix, &Transcript)],
    vocab: &Vocabulary,
    criterion: Criterion,
) -> Vec<Result<LossResult>> {
    items
        .par_iter()
        .map(|(e, t)| match criterion {
            Criterion::Ctc => ctc_loss(e, t, vocab, None),
            Criterion::Btc { lambda } => btc_loss(e, t, vocab, None, lambda),
        })
        .collect()
}

/// Largest instance [`brute_force_loss`] will enumerate.
pub const BRUTE_FORCE_MAX_FRAMES: usize = 8;
pub const BRUTE_FORCE_MAX_WIDTH: usize = 5;

/// Collapse: merge adjacent repeats, then drop blanks. ★ is an ordinary unit.
fn collapse(path: &[Label]) -> Vec<Label> {
    let mut out = Vec::new();
    let mut prev = None;
    for &l in path {
        if Some(l) != prev && l != BLANK {
            out.push(l);
        }
        prev = Some(l);
    }
    out
}

/// Exact `-ln P(l | x)` by enumerating all `V_ext^T` alignment strings.
///
/// Without `lambda` the sum runs over strings collapsing to the transcript.
/// With `lambda` it runs over every bypass mask `b`: strings collapsing to
/// the transcript with masked tokens replaced by ★, weighted `e^{-λ|b|}`.
/// The transcript holds unit labels; ★ is label `V_ext`.
pub fn brute_force_loss(e: &EmissionMatrix, transcript: &Transcript, lambda: Option<f64>) -> Result<f64> {
    let (frames, width) = (e.frames(), e.width());
    if frames > BRUTE_FORCE_MAX_FRAMES || width > BRUTE_FORCE_MAX_WIDTH {
        return Err(Error::TooLarge(format!(
            "{frames} frames x {width} labels exceeds {BRUTE_FORCE_MAX_FRAMES} x {BRUTE_FORCE_MAX_WIDTH}"
        )));
    }
    let star = width as Label;
    let target = transcript.tokens();
    let targets: Vec<(Vec<Label>, usize)> = match lambda {
        None => vec![(target.to_vec(), 0)],
        Some(_) => (0u32..1 << target.len())
            .map(|mask| {
                let seq = target
                    .iter()
                    .enumerate()
                    .map(|(i, &tok)| if mask >> i & 1 == 1 { star } else { tok })
                    .collect();
                (seq, mask.count_ones() as usize)
            })
            .collect(),
    };

    let mut total = 0.0f64;
    let mut path = vec![0 as Label; frames];
    for code in 0..width.pow(frames as u32) {
        let mut c = code;
        let mut logp = 0.0;
        for (t, slot) in path.iter_mut().enumerate() {
            let col = c % width;
            c /= width;
            *slot = col as Label + 1;
            logp += e.get(t, col);
        }
        let collapsed = collapse(&path);
        for (seq, bypassed) in &targets {
            if *seq == collapsed {
                let penalty = lambda.map_or(0.0, |l| l * *bypassed as f64);
                total += (logp - penalty).exp();
            }
        }
    }
    if total == 0.0 {
        return Err(Error::UnrealizableTranscript { frames });
    }
    Ok(-total.ln())
}
