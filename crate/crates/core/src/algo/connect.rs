use std::collections::VecDeque;

use crate::fst::{Arc, Fst, StateId};

/// Trimmed machine plus the old→new state map (`None` for removed states).
#[derive(Clone, Debug)]
pub struct Connected {
    pub fst: Fst,
    pub state_map: Vec<Option<StateId>>,
}

/// Removes states that are not both accessible and coaccessible.
///
/// Surviving states are renumbered in breadth-first discovery order from the
/// start. If no final state is reachable the result is the empty machine.
pub fn connect(f: &Fst) -> Fst {
    connect_with_map(f).fst
}

pub fn connect_with_map(f: &Fst) -> Connected {
    let n = f.num_states();
    let Some(start) = f.start() else {
        return Connected {
            fst: Fst::empty(),
            state_map: vec![None; n],
        };
    };

    let mut order = Vec::with_capacity(n);
    let mut accessible = vec![false; n];
    let mut queue = VecDeque::from([start]);
    accessible[start] = true;
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for arc in f.arcs(s) {
            if !accessible[arc.nextstate] {
                accessible[arc.nextstate] = true;
                queue.push_back(arc.nextstate);
            }
        }
    }

    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, arc) in f.all_arcs() {
        preds[arc.nextstate].push(s);
    }
    let mut coaccessible = vec![false; n];
    let mut stack: Vec<StateId> = f.states().filter(|&s| f.is_final(s)).collect();
    for &s in &stack {
        coaccessible[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &preds[s] {
            if !coaccessible[p] {
                coaccessible[p] = true;
                stack.push(p);
            }
        }
    }

    let mut state_map = vec![None; n];
    if !coaccessible[start] {
        return Connected {
            fst: Fst::empty(),
            state_map,
        };
    }
    let mut out = Fst::new();
    for &s in &order {
        if coaccessible[s] {
            state_map[s] = Some(out.add_state());
        }
    }
    out.set_start(state_map[start].expect("start kept"));
    for &s in &order {
        let Some(ns) = state_map[s] else { continue };
        out.set_final(ns, f.final_weight(s));
        for arc in f.arcs(s) {
            if let Some(nd) = state_map[arc.nextstate] {
                out.add_arc(ns, Arc { nextstate: nd, ..*arc });
            }
        }
    }
    Connected {
        fst: out,
        state_map,
    }
}
