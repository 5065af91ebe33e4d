use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::fst::{Arc, Fst, StateId};
use crate::semiring::{log_add, times, Weight};

/// Orders states so that every arc goes from an earlier to a later state.
/// Among ready states the lowest id goes first.
pub fn topo_sort(f: &Fst) -> Result<Vec<StateId>> {
    let n = f.num_states();
    let mut indegree = vec![0usize; n];
    for (_, arc) in f.all_arcs() {
        indegree[arc.nextstate] += 1;
    }
    let mut ready: BinaryHeap<Reverse<StateId>> =
        f.states().filter(|&s| indegree[s] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(s)) = ready.pop() {
        order.push(s);
        for arc in f.arcs(s) {
            indegree[arc.nextstate] -= 1;
            if indegree[arc.nextstate] == 0 {
                ready.push(Reverse(arc.nextstate));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    Err(Error::Cycle {
        state: state_on_cycle(f, &indegree),
    })
}

// Every state left with positive in-degree has a predecessor that is also
// left, so walking predecessors must revisit a state.
fn state_on_cycle(f: &Fst, indegree: &[usize]) -> StateId {
    let n = f.num_states();
    let mut pred = vec![None; n];
    for (s, arc) in f.all_arcs() {
        if indegree[s] > 0 && indegree[arc.nextstate] > 0 {
            pred[arc.nextstate].get_or_insert(s);
        }
    }
    let mut seen = vec![false; n];
    let mut s = (0..n).find(|&s| indegree[s] > 0).expect("a blocked state");
    while !seen[s] {
        seen[s] = true;
        s = pred[s].expect("blocked state has a blocked predecessor");
    }
    s
}

/// Forward log distances from the start over a topological order.
fn forward(f: &Fst, order: &[StateId]) -> Vec<Weight> {
    let mut alpha = vec![Weight::ZERO; f.num_states()];
    if let Some(s) = f.start() {
        alpha[s] = Weight::ONE;
    }
    for &s in order {
        let a = alpha[s];
        if a.is_zero() {
            continue;
        }
        for arc in f.arcs(s) {
            alpha[arc.nextstate] = log_add(alpha[arc.nextstate], times(a, arc.weight));
        }
    }
    alpha
}

/// Backward log distances to the final states.
fn backward(f: &Fst, order: &[StateId]) -> Vec<Weight> {
    let mut beta = vec![Weight::ZERO; f.num_states()];
    for &s in order.iter().rev() {
        let mut b = f.final_weight(s);
        for arc in f.arcs(s) {
            b = log_add(b, times(arc.weight, beta[arc.nextstate]));
        }
        beta[s] = b;
    }
    beta
}

/// Log-semiring total weight of all accepting paths of an acyclic machine.
pub fn shortest_distance_log(f: &Fst) -> Result<Weight> {
    if f.is_empty() {
        return Ok(Weight::ZERO);
    }
    let order = topo_sort(f)?;
    let alpha = forward(f, &order);
    Ok(f
        .states()
        .fold(Weight::ZERO, |acc, s| log_add(acc, times(alpha[s], f.final_weight(s)))))
}

#[derive(Clone, Debug)]
pub struct ForwardBackward {
    pub total: Weight,
    pub alpha: Vec<Weight>,
    pub beta: Vec<Weight>,
    /// Arc posteriors in [`Fst::all_arcs`] order.
    pub posteriors: Vec<f64>,
}

impl ForwardBackward {
    /// Posterior mass of paths that stop at `s`.
    pub fn final_posterior(&self, f: &Fst, s: StateId) -> f64 {
        (times(self.alpha[s], f.final_weight(s)).0 - self.total.0).exp()
    }
}

/// Forward-backward arc posteriors over an acyclic machine.
pub fn forward_backward(f: &Fst) -> Result<ForwardBackward> {
    if f.is_empty() {
        return Err(Error::NoAcceptingPath);
    }
    let order = topo_sort(f)?;
    let alpha = forward(f, &order);
    let beta = backward(f, &order);
    let total = beta[f.start().expect("non-empty")];
    if total.is_zero() {
        return Err(Error::NoAcceptingPath);
    }
    let posteriors = f
        .all_arcs()
        .map(|(s, arc)| {
            let w = times(times(alpha[s], arc.weight), beta[arc.nextstate]);
            if w.is_zero() {
                0.0
            } else {
                (w.0 - total.0).exp()
            }
        })
        .collect();
    Ok(ForwardBackward {
        total,
        alpha,
        beta,
        posteriors,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestPath {
    /// `(source state, arc)` in path order.
    pub arcs: Vec<(StateId, Arc)>,
    pub weight: Weight,
}

impl BestPath {
    pub fn ilabels(&self) -> Vec<u32> {
        self.arcs.iter().map(|(_, a)| a.ilabel).collect()
    }

    pub fn olabels(&self) -> Vec<u32> {
        self.arcs.iter().map(|(_, a)| a.olabel).collect()
    }
}

/// Maximum-weight accepting path under the tropical semiring.
///
/// Ties prefer the predecessor with the lowest state id, then the lowest
/// arc index; among equally good final states the lowest id wins.
pub fn best_path(f: &Fst) -> Result<BestPath> {
    let Some(start) = f.start() else {
        return Err(Error::NoAcceptingPath);
    };
    let order = topo_sort(f)?;
    let n = f.num_states();
    let mut score = vec![Weight::ZERO; n];
    let mut back: Vec<Option<(StateId, usize)>> = vec![None; n];
    score[start] = Weight::ONE;
    for &s in &order {
        if score[s].is_zero() {
            continue;
        }
        for (i, arc) in f.arcs(s).iter().enumerate() {
            let cand = times(score[s], arc.weight);
            if cand.is_zero() {
                continue;
            }
            let d = arc.nextstate;
            let better = match back[d] {
                None => true,
                Some(prev) => cand.0 > score[d].0 || (cand.0 == score[d].0 && (s, i) < prev),
            };
            if better {
                score[d] = cand;
                back[d] = Some((s, i));
            }
        }
    }
    let mut best: Option<(StateId, Weight)> = None;
    for s in f.states() {
        let w = times(score[s], f.final_weight(s));
        if w.is_zero() {
            continue;
        }
        if best.is_none_or(|(_, bw)| w.0 > bw.0) {
            best = Some((s, w));
        }
    }
    let Some((mut s, weight)) = best else {
        return Err(Error::NoAcceptingPath);
    };
    let mut arcs = Vec::new();
    while let Some((p, i)) = back[s] {
        arcs.push((p, f.arcs(p)[i]));
        s = p;
    }
    debug_assert_eq!(s, start);
    arcs.reverse();
    Ok(BestPath { arcs, weight })
}
