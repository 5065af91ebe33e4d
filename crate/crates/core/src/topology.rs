//! Vocabularies and the machines that make up a training graph: the emission
//! chain, the CTC alignment topology, the lexicon, and the linear and bypass
//! grammars.
//!
//! Label ids follow one fixed scheme in every machine:
//!
//! | id        | meaning              |
//! |-----------|----------------------|
//! | 0         | ε                    |
//! | 1         | blank ∅              |
//! | 2..=V+1   | the V units          |
//! | V+2       | star ★               |
//!
//! Emission matrices have `V + 2` columns; column `j` holds label `j + 1`.

use std::collections::HashMap;

use crate::algo::{compose, connect};
use crate::error::{Error, Result};
use crate::fst::{Arc, Fst, Label, EPSILON};
use crate::loss::EmissionMatrix;
use crate::semiring::Weight;

pub const BLANK: Label = 1;
const FIRST_UNIT: Label = 2;

const RESERVED: [&str; 3] = ["<eps>", "<blk>", "<star>"];

/// Tolerance on `logsumexp(row) = 0` for emission rows.
pub const ROW_NORM_TOLERANCE: f64 = 1e-6;

/// Ordered, unique unit (or word) names with the reserved label scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, Label>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::Vocabulary(format!("bad unit name {name:?}")));
            }
            if RESERVED.contains(&name.as_str()) {
                return Err(Error::Vocabulary(format!("{name} is reserved")));
            }
            if index.insert(name.clone(), FIRST_UNIT + i as Label).is_some() {
                return Err(Error::Vocabulary(format!("duplicate unit {name}")));
            }
        }
        Ok(Vocabulary { names, index })
    }

    /// One unit name per line; blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }

    /// Number of units V.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// V + 2: blank, units, star.
    pub fn extended_size(&self) -> usize {
        self.names.len() + 2
    }

    pub fn star(&self) -> Label {
        FIRST_UNIT + self.names.len() as Label
    }

    pub fn unit_labels(&self) -> impl Iterator<Item = Label> + Clone {
        FIRST_UNIT..FIRST_UNIT + self.names.len() as Label
    }

    pub fn is_unit(&self, label: Label) -> bool {
        (FIRST_UNIT..self.star()).contains(&label)
    }

    pub fn label(&self, name: &str) -> Option<Label> {
        self.index.get(name).copied()
    }

    pub fn name(&self, label: Label) -> &str {
        match label {
            EPSILON => RESERVED[0],
            BLANK => RESERVED[1],
            l if l == self.star() => RESERVED[2],
            l if self.is_unit(l) => &self.names[(l - FIRST_UNIT) as usize],
            _ => "<unk>",
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Emission column of a label.
#[inline]
pub fn column_of(label: Label) -> usize {
    debug_assert!(label >= BLANK);
    (label - 1) as usize
}

/// Label of an emission column.
#[inline]
pub fn label_of_column(col: usize) -> Label {
    col as Label + 1
}

/// A sequence of unit (or word) labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Transcript {
    tokens: Vec<Label>,
}

impl Transcript {
    pub fn new(tokens: Vec<Label>, vocab: &Vocabulary) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|&&t| !vocab.is_unit(t)) {
            return Err(Error::Transcript(format!("label {bad} is not a unit")));
        }
        Ok(Transcript { tokens })
    }

    pub(crate) fn from_labels_unchecked(tokens: Vec<Label>) -> Self {
        Transcript { tokens }
    }

    /// Space-separated unit names.
    pub fn parse(line: &str, vocab: &Vocabulary) -> Result<Self> {
        let tokens = line
            .split_whitespace()
            .map(|name| {
                vocab
                    .label(name)
                    .ok_or_else(|| Error::Transcript(format!("unknown unit {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Transcript { tokens })
    }

    pub fn to_line(&self, vocab: &Vocabulary) -> String {
        self.tokens
            .iter()
            .map(|&t| vocab.name(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn tokens(&self) -> &[Label] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Reads a transcript file: one utterance per line.
pub fn parse_transcripts(text: &str, vocab: &Vocabulary) -> Result<Vec<Transcript>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            Transcript::parse(line, vocab).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn transcripts_to_text(transcripts: &[Transcript], vocab: &Vocabulary) -> String {
    transcripts
        .iter()
        .map(|t| format!("{}\n", t.to_line(vocab)))
        .collect()
}

/// Word pronunciations over a unit vocabulary. Words get their own label
/// space with the same reserved ids, so the word star is `W + 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    words: Vocabulary,
    prons: Vec<Vec<Label>>,
    unit_star: Label,
}

impl Lexicon {
    pub fn new<W, U>(units: &Vocabulary, entries: impl IntoIterator<Item = (W, Vec<U>)>) -> Result<Self>
    where
        W: Into<String>,
        U: AsRef<str>,
    {
        let mut names = Vec::new();
        let mut prons = Vec::new();
        for (word, pron) in entries {
            let word = word.into();
            if pron.is_empty() {
                return Err(Error::Lexicon(format!("{word} has an empty pronunciation")));
            }
            let labels = pron
                .iter()
                .map(|u| {
                    units.label(u.as_ref()).ok_or_else(|| {
                        Error::Lexicon(format!("{word}: unknown unit {:?}", u.as_ref()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            names.push(word);
            prons.push(labels);
        }
        let words = Vocabulary::new(names).map_err(|e| Error::Lexicon(e.to_string()))?;
        Ok(Lexicon {
            words,
            prons,
            unit_star: units.star(),
        })
    }

    /// Every unit is a word pronounced as itself.
    pub fn identity(units: &Vocabulary) -> Self {
        Lexicon {
            words: units.clone(),
            prons: units.unit_labels().map(|l| vec![l]).collect(),
            unit_star: units.star(),
        }
    }

    /// `WORD unit1 unit2 ...` per line.
    pub fn from_text(text: &str, units: &Vocabulary) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let pron: Vec<&str> = fields.collect();
            if pron.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{word} has an empty pronunciation"),
                });
            }
            entries.push((word.to_string(), pron));
        }
        Self::new(units, entries)
    }

    pub fn words(&self) -> &Vocabulary {
        &self.words
    }

    pub fn pronunciation(&self, word: Label) -> &[Label] {
        &self.prons[(word - FIRST_UNIT) as usize]
    }
}

/// The emission acceptor: a chain of `T + 1` states with one arc per
/// extended label per frame. Rejects rows that are not log-distributions.
pub fn build_emission_fsa(e: &EmissionMatrix) -> Result<Fst> {
    e.check_normalized(ROW_NORM_TOLERANCE)?;
    Ok(emission_chain(e))
}

/// Same chain as [`build_emission_fsa`] without the normalization check; the
/// entries are used as free additive scores.
pub fn emission_chain(e: &EmissionMatrix) -> Fst {
    let frames = e.frames();
    let mut f = Fst::new();
    f.add_states(frames + 1);
    f.set_start(0);
    f.set_final(frames, Weight::ONE);
    for t in 0..frames {
        for (col, &v) in e.row(t).iter().enumerate() {
            let l = label_of_column(col);
            f.add_arc(t, Arc::new(l, l, v, t + 1));
        }
    }
    f
}

/// Compact CTC alignment topology.
///
/// State 0 is a hub with a blank self-loop. Each emittable unit `u` (the
/// units, plus ★ when `include_star`) owns a state with an entry arc `u:u`
/// from the hub, a repeat loop `u:ε`, a blank exit `∅:ε` back to the hub and
/// a cross arc `w:w` to every other emittable `w`. All states are final.
pub fn build_ctc_topo(vocab: &Vocabulary, include_star: bool) -> Fst {
    let mut emittable: Vec<Label> = vocab.unit_labels().collect();
    if include_star {
        emittable.push(vocab.star());
    }
    let mut f = Fst::new();
    f.add_states(emittable.len() + 1);
    f.set_start(0);
    for s in f.states() {
        f.set_final(s, Weight::ONE);
    }
    f.add_arc(0, Arc::new(BLANK, EPSILON, 0.0, 0));
    for (i, &u) in emittable.iter().enumerate() {
        f.add_arc(0, Arc::new(u, u, 0.0, i + 1));
    }
    for (i, &u) in emittable.iter().enumerate() {
        let s = i + 1;
        f.add_arc(s, Arc::new(u, EPSILON, 0.0, s));
        f.add_arc(s, Arc::new(BLANK, EPSILON, 0.0, 0));
        for (j, &w) in emittable.iter().enumerate() {
            if j != i {
                f.add_arc(s, Arc::new(w, w, 0.0, j + 1));
            }
        }
    }
    f
}

/// Lexicon transducer from unit strings to word strings.
///
/// The hub (state 0) is start and final. Each word is a cycle through the
/// hub consuming its units; the first arc emits the word. With `include_star`
/// the hub also carries a `★:★` loop.
pub fn build_lexicon_fst(lex: &Lexicon, include_star: bool) -> Fst {
    let mut f = Fst::new();
    let hub = f.add_state();
    f.set_start(hub);
    f.set_final(hub, Weight::ONE);
    for word in lex.words.unit_labels() {
        let pron = lex.pronunciation(word);
        let mut src = hub;
        for (k, &unit) in pron.iter().enumerate() {
            let dst = if k + 1 == pron.len() { hub } else { f.add_state() };
            let out = if k == 0 { word } else { EPSILON };
            f.add_arc(src, Arc::new(unit, out, 0.0, dst));
            src = dst;
        }
    }
    if include_star {
        f.add_arc(hub, Arc::new(lex.unit_star, lex.words.star(), 0.0, hub));
    }
    f
}

/// Linear acceptor of exactly the transcript.
pub fn build_linear_grammar(t: &Transcript) -> Fst {
    let mut f = Fst::new();
    f.add_states(t.len() + 1);
    f.set_start(0);
    f.set_final(t.len(), Weight::ONE);
    for (i, &tok) in t.tokens().iter().enumerate() {
        f.add_arc(i, Arc::new(tok, tok, 0.0, i + 1));
    }
    f
}

/// Linear grammar plus one `★:ε` bypass arc with weight `-penalty` parallel
/// to every token. `penalty = +∞` gives bypass arcs of weight ZERO.
pub fn build_btc_grammar(t: &Transcript, vocab: &Vocabulary, penalty: f64) -> Result<Fst> {
    if t.is_empty() {
        return Err(Error::Transcript(
            "bypass grammar needs at least one token".into(),
        ));
    }
    if penalty.is_nan() || penalty < 0.0 {
        return Err(Error::Config(format!("penalty must be >= 0, got {penalty}")));
    }
    let mut f = build_linear_grammar(t);
    let w = Weight(-penalty);
    for i in 0..t.len() {
        f.add_arc(i, Arc::new(vocab.star(), EPSILON, w, i + 1));
    }
    Ok(f)
}

/// `connect(h ∘ (l ∘ g))`.
pub fn build_training_graph(h: &Fst, l: &Fst, g: &Fst) -> Result<Fst> {
    let lg = compose(l, g)?;
    Ok(connect(&compose(h, &lg)?))
}

/// Graph of a plain CTC criterion for `t`.
pub fn ctc_graph(vocab: &Vocabulary, lexicon: &Lexicon, t: &Transcript) -> Result<Fst> {
    build_training_graph(
        &build_ctc_topo(vocab, false),
        &build_lexicon_fst(lexicon, false),
        &build_linear_grammar(t),
    )
}

/// Graph of the bypass criterion for `t` at penalty `penalty`.
pub fn btc_graph(
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    t: &Transcript,
    penalty: f64,
) -> Result<Fst> {
    build_training_graph(
        &build_ctc_topo(vocab, true),
        &build_lexicon_fst(lexicon, true),
        &build_btc_grammar(t, lexicon.words(), penalty)?,
    )
}
