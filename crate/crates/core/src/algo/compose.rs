use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::fst::{Arc, Fst, StateId, EPSILON};
use crate::semiring::times;

/// Result of [`compose_with_origins`]: the composed machine and, for every
/// composed state, the `(left, right)` state pair it stands for.
#[derive(Clone, Debug)]
pub struct Composition {
    pub fst: Fst,
    pub origins: Vec<(StateId, StateId)>,
}

/// Composition `a ∘ b` for an input-ε-free right operand.
///
/// Output-ε arcs of `a` move `a` alone while `b` holds its state. Every other
/// arc of `a` must be matched by a `b` arc whose input label equals its output
/// label. States are numbered in breadth-first discovery order from the start
/// pair.
pub fn compose(a: &Fst, b: &Fst) -> Result<Fst> {
    compose_with_origins(a, b).map(|c| c.fst)
}

pub fn compose_with_origins(a: &Fst, b: &Fst) -> Result<Composition> {
    if let Some(state) = b.has_input_epsilon() {
        return Err(Error::InputEpsilonInRightOperand { state });
    }
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(Composition {
            fst: Fst::empty(),
            origins: Vec::new(),
        });
    };

    // Right-operand arcs bucketed by input label, per state.
    let b_index: Vec<HashMap<u32, Vec<usize>>> = b
        .states()
        .map(|s| {
            let mut m: HashMap<u32, Vec<usize>> = HashMap::new();
            for (i, arc) in b.arcs(s).iter().enumerate() {
                m.entry(arc.ilabel).or_default().push(i);
            }
            m
        })
        .collect();

    let mut out = Fst::new();
    let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut origins = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |pair: (StateId, StateId),
                      out: &mut Fst,
                      origins: &mut Vec<(StateId, StateId)>,
                      queue: &mut VecDeque<(StateId, StateId)>| {
        match ids.entry(pair) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = out.add_state();
                origins.push(pair);
                queue.push_back(pair);
                *e.insert(id)
            }
        }
    };

    let start = intern((sa, sb), &mut out, &mut origins, &mut queue);
    out.set_start(start);

    // Queue order equals id order.
    let mut src = 0;
    while let Some((qa, qb)) = queue.pop_front() {
        debug_assert_eq!(origins[src], (qa, qb));
        let fw = times(a.final_weight(qa), b.final_weight(qb));
        if !fw.is_zero() {
            out.set_final(src, fw);
        }
        for arc_a in a.arcs(qa) {
            if arc_a.olabel == EPSILON {
                let dst = intern((arc_a.nextstate, qb), &mut out, &mut origins, &mut queue);
                out.add_arc(src, Arc::new(arc_a.ilabel, EPSILON, arc_a.weight, dst));
                continue;
            }
            let Some(matches) = b_index[qb].get(&arc_a.olabel) else {
                continue;
            };
            for &bi in matches {
                let arc_b = &b.arcs(qb)[bi];
                let dst = intern(
                    (arc_a.nextstate, arc_b.nextstate),
                    &mut out,
                    &mut origins,
                    &mut queue,
                );
                out.add_arc(
                    src,
                    Arc::new(arc_a.ilabel, arc_b.olabel, times(arc_a.weight, arc_b.weight), dst),
                );
            }
        }
        src += 1;
    }

    Ok(Composition { fst: out, origins })
}
