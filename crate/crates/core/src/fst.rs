//! Mutable vector-backed weighted transducer plus AT&T text and Graphviz output.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::semiring::Weight;

pub type StateId = usize;
pub type Label = u32;

/// Reserved epsilon label.
pub const EPSILON: Label = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: Weight,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: impl Into<Weight>, nextstate: StateId) -> Self {
        Arc {
            ilabel,
            olabel,
            weight: weight.into(),
            nextstate,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct State {
    arcs: Vec<Arc>,
    final_weight: Weight,
}

/// A weighted transducer whose arcs are stored per source state in insertion
/// order. A state is final iff its final weight is not [`Weight::ZERO`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fst {
    start: Option<StateId>,
    states: Vec<State>,
}

impl Fst {
    pub fn new() -> Self {
        Self::default()
    }

    /// The machine with no states; its language is empty.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(State {
            arcs: Vec::new(),
            final_weight: Weight::ZERO,
        });
        self.states.len() - 1
    }

    pub fn add_states(&mut self, n: usize) {
        for _ in 0..n {
            self.add_state();
        }
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!(s < self.states.len(), "start state {s} out of range");
        self.start = Some(s);
    }

    pub fn set_final(&mut self, s: StateId, w: impl Into<Weight>) {
        self.states[s].final_weight = w.into();
    }

    pub fn add_arc(&mut self, src: StateId, arc: Arc) {
        assert!(
            arc.nextstate < self.states.len(),
            "arc destination {} out of range",
            arc.nextstate
        );
        self.states[src].arcs.push(arc);
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_none()
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s].arcs
    }

    pub fn final_weight(&self, s: StateId) -> Weight {
        self.states[s].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        !self.states[s].final_weight.is_zero()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.states.len()
    }

    /// All arcs as `(src, arc)` pairs, grouped by source in state order.
    pub fn all_arcs(&self) -> impl Iterator<Item = (StateId, &Arc)> {
        self.states
            .iter()
            .enumerate()
            .flat_map(|(s, st)| st.arcs.iter().map(move |a| (s, a)))
    }

    /// Offset of each state's first arc in the flat arc order of [`Fst::all_arcs`].
    pub fn arc_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.states.len() + 1);
        let mut acc = 0;
        for st in &self.states {
            offsets.push(acc);
            acc += st.arcs.len();
        }
        offsets.push(acc);
        offsets
    }

    pub fn has_input_epsilon(&self) -> Option<StateId> {
        self.all_arcs()
            .find(|(_, a)| a.ilabel == EPSILON)
            .map(|(s, _)| s)
    }

    /// Serializes in AT&T text form.
    ///
    /// Arc lines are `src dst ilabel olabel weight`, final lines are
    /// `state weight`. The start state's lines come first so that the first
    /// listed state is the start. Final weights live on states; no super-final
    /// `-1` arc is written. Weights are log-probabilities printed with 17
    /// significant digits. States that have no arcs, are not final and are not
    /// the start are not represented.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let Some(start) = self.start else {
            return out;
        };
        if self.arcs(start).is_empty() && !self.is_final(start) {
            // keep the start visible as the first listed state
            let _ = writeln!(out, "{} {}", start, fmt_weight(Weight::ZERO));
        }
        let order = std::iter::once(start).chain(self.states().filter(|&s| s != start));
        for s in order {
            for a in self.arcs(s) {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}",
                    s,
                    a.nextstate,
                    a.ilabel,
                    a.olabel,
                    fmt_weight(a.weight)
                );
            }
            if self.is_final(s) {
                let _ = writeln!(out, "{} {}", s, fmt_weight(self.final_weight(s)));
            }
        }
        out
    }

    /// Parses AT&T text. A 4-field arc line has weight 0; a 1-field final
    /// line has final weight 0.
    pub fn from_text(text: &str) -> Result<Fst> {
        let mut arcs: Vec<(StateId, Arc)> = Vec::new();
        let mut finals: Vec<(StateId, Weight)> = Vec::new();
        let mut start = None;
        let mut max_state = None::<StateId>;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let state = |i: usize| -> Result<StateId> {
                fields[i].parse::<StateId>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad state id {:?}", fields[i]),
                })
            };
            let label = |i: usize| -> Result<Label> {
                fields[i].parse::<Label>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad label {:?}", fields[i]),
                })
            };
            let weight = |i: usize| -> Result<Weight> {
                parse_weight(fields[i]).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("bad weight {:?}", fields[i]),
                })
            };
            let src = state(0)?;
            start.get_or_insert(src);
            let mut bump = |s: StateId| max_state = Some(max_state.map_or(s, |m| m.max(s)));
            bump(src);
            match fields.len() {
                1 | 2 => {
                    let w = if fields.len() == 2 { weight(1)? } else { Weight::ONE };
                    finals.push((src, w));
                }
                4 | 5 => {
                    let dst = state(1)?;
                    bump(dst);
                    let w = if fields.len() == 5 { weight(4)? } else { Weight::ONE };
                    arcs.push((src, Arc::new(label(2)?, label(3)?, w, dst)));
                }
                n => {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected 1, 2, 4 or 5 fields, found {n}"),
                    })
                }
            }
        }
        let mut fst = Fst::new();
        let Some(max_state) = max_state else {
            return Ok(fst);
        };
        fst.add_states(max_state + 1);
        fst.set_start(start.expect("start set with first line"));
        for (s, arc) in arcs {
            fst.add_arc(s, arc);
        }
        for (s, w) in finals {
            fst.set_final(s, w);
        }
        Ok(fst)
    }

    /// Graphviz rendering: doubled circles mark final states, edges are
    /// labelled `ilabel:olabel/weight`. `symbol` maps label ids to names.
    pub fn to_dot(&self, symbol: &dyn Fn(Label) -> String) -> String {
        let mut out = String::from("digraph fst {\n  rankdir = LR;\n");
        for s in self.states() {
            let shape = if self.is_final(s) { "doublecircle" } else { "circle" };
            let style = if Some(s) == self.start { ", style = bold" } else { "" };
            let _ = writeln!(out, "  {s} [label = \"{s}\", shape = {shape}{style}];");
        }
        for (s, a) in self.all_arcs() {
            let _ = writeln!(
                out,
                "  {} -> {} [label = \"{}:{}/{}\"];",
                s,
                a.nextstate,
                escape(&symbol(a.ilabel)),
                escape(&symbol(a.olabel)),
                short_weight(a.weight)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn short_weight(w: Weight) -> String {
    if w.is_zero() {
        "-inf".to_string()
    } else {
        format!("{:.4}", w.0)
    }
}

/// 17 significant digits, so that parsing recovers the exact double.
pub fn fmt_weight(w: Weight) -> String {
    if w.0.is_finite() {
        format!("{:.16e}", w.0)
    } else if w.0 > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn parse_weight(s: &str) -> Option<Weight> {
    match s {
        "-inf" | "-Infinity" => Some(Weight::ZERO),
        "inf" | "Infinity" => Some(Weight(f64::INFINITY)),
        _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()).map(Weight),
    }
}
