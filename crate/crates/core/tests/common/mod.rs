//! Independent oracles shared by the integration tests: path enumeration,
//! string relations, collapse functions and random instance generators.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wfst_btc::loss::EmissionMatrix;
use wfst_btc::{Arc, Fst, Label, EPSILON};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Natural-log-sum of plain f64 log values.
pub fn lse(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One complete path: arc list (as `(src, arc index)`), input and output
/// labels (ε kept) and total weight including the final weight.
#[derive(Clone, Debug)]
pub struct Path {
    pub arcs: Vec<(usize, usize)>,
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub weight: f64,
}

/// Every successful path of an acyclic machine, by depth-first search.
/// Panics beyond `limit` paths.
pub fn enumerate_paths(f: &Fst, limit: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let Some(start) = f.start() else {
        return out;
    };
    let mut stack = vec![(
        start,
        Path {
            arcs: vec![],
            ilabels: vec![],
            olabels: vec![],
            weight: 0.0,
        },
    )];
    while let Some((s, p)) = stack.pop() {
        assert!(p.arcs.len() <= f.num_states(), "machine is cyclic");
        if f.is_final(s) {
            let mut done = p.clone();
            done.weight += f.final_weight(s).0;
            out.push(done);
            assert!(out.len() <= limit, "more than {limit} paths");
        }
        for (k, a) in f.arcs(s).iter().enumerate() {
            let mut q = p.clone();
            q.arcs.push((s, k));
            q.ilabels.push(a.ilabel);
            q.olabels.push(a.olabel);
            q.weight += a.weight.0;
            stack.push((a.nextstate, q));
        }
    }
    out
}

pub fn strip_eps(labels: &[Label]) -> Vec<Label> {
    labels.iter().copied().filter(|&l| l != EPSILON).collect()
}

pub type Relation = HashMap<(Vec<Label>, Vec<Label>), f64>;

/// The weighted string relation of an acyclic machine (ε removed, weights
/// log-summed over paths).
pub fn relation(f: &Fst) -> Relation {
    let mut by_pair: HashMap<(Vec<Label>, Vec<Label>), Vec<f64>> = HashMap::new();
    for p in enumerate_paths(f, 100_000) {
        by_pair
            .entry((strip_eps(&p.ilabels), strip_eps(&p.olabels)))
            .or_default()
            .push(p.weight);
    }
    by_pair.into_iter().map(|(k, v)| (k, lse(v))).collect()
}

/// Relation composition `A∘B` computed on strings.
pub fn compose_relations(a: &Relation, b: &Relation) -> Relation {
    let mut acc: HashMap<(Vec<Label>, Vec<Label>), Vec<f64>> = HashMap::new();
    for ((x, y), wa) in a {
        for ((y2, z), wb) in b {
            if y == y2 {
                acc.entry((x.clone(), z.clone())).or_default().push(wa + wb);
            }
        }
    }
    acc.into_iter().map(|(k, v)| (k, lse(v))).collect()
}

pub fn assert_relations_equal(got: &Relation, want: &Relation, tol: f64) {
    assert_eq!(
        got.len(),
        want.len(),
        "relation sizes differ:\n got {got:?}\nwant {want:?}"
    );
    for (k, w) in want {
        let g = got.get(k).unwrap_or_else(|| panic!("missing pair {k:?}"));
        assert!((g - w).abs() <= tol, "{k:?}: {g} vs {w}");
    }
}

/// Random acyclic machine: arcs only go from lower to higher state ids.
/// `labels` is the label alphabet (may include ε).
pub fn random_acyclic(
    r: &mut impl Rng,
    max_states: usize,
    ilabels: &[Label],
    olabels: &[Label],
) -> Fst {
    let n = r.random_range(1..=max_states);
    let mut f = Fst::new();
    f.add_states(n);
    f.set_start(0);
    for s in 0..n {
        for d in s + 1..n {
            let k = r.random_range(0..=2);
            for _ in 0..k {
                let i = ilabels[r.random_range(0..ilabels.len())];
                let o = olabels[r.random_range(0..olabels.len())];
                f.add_arc(s, Arc::new(i, o, -r.random_range(0.0..2.0), d));
            }
        }
        if r.random_bool(0.5) || s == n - 1 {
            f.set_final(s, -r.random_range(0.0..1.0));
        }
    }
    f
}

/// Random normalized emission matrix with entries spread over a few nats.
pub fn random_emissions(r: &mut impl Rng, frames: usize, width: usize) -> EmissionMatrix {
    let mut rows = Vec::with_capacity(frames);
    for _ in 0..frames {
        let logits: Vec<f64> = (0..width).map(|_| r.random_range(-3.0..3.0)).collect();
        let z = lse(logits.iter().copied());
        rows.push(logits.iter().map(|l| l - z).collect());
    }
    EmissionMatrix::from_rows(rows).unwrap()
}

/// Collapse ℬ: merge adjacent repeats, then drop blank (label 1).
pub fn collapse(path: &[Label]) -> Vec<Label> {
    let mut out = Vec::new();
    let mut prev = None;
    for &l in path {
        if Some(l) != prev && l != 1 {
            out.push(l);
        }
        prev = Some(l);
    }
    out
}

/// ℬ★ weight of an alignment string for transcript `l`: the log of
/// `Σ_b e^{-λ|b|}` over bypass masks `b` for which `ℬ(path)` equals `l` with
/// the masked tokens replaced by `star`. `None` if no mask matches.
pub fn bypass_weight(path: &[Label], l: &[Label], star: Label, lambda: f64) -> Option<f64> {
    let c = collapse(path);
    if c.len() != l.len() {
        return None;
    }
    let mut bypassed = 0usize;
    for (x, y) in c.iter().zip(l) {
        if x != y {
            if *x != star {
                return None;
            }
            bypassed += 1;
        }
    }
    // each position is matched in exactly one way (a unit is never ★)
    Some(-lambda * bypassed as f64)
}

/// All strings of `len` labels over `alphabet`.
pub fn all_strings(alphabet: &[Label], len: usize) -> Vec<Vec<Label>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet.len());
        for s in &out {
            for &a in alphabet {
                let mut t = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Input strings accepted by an acyclic acceptor-like machine with their
/// log-summed weights.
pub fn input_language(f: &Fst) -> HashMap<Vec<Label>, f64> {
    let mut acc: HashMap<Vec<Label>, Vec<f64>> = HashMap::new();
    for p in enumerate_paths(f, 1_000_000) {
        acc.entry(strip_eps(&p.ilabels)).or_default().push(p.weight);
    }
    acc.into_iter().map(|(k, v)| (k, lse(v))).collect()
}

/// Relative error with an absolute floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}
