mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wfst_btc::loss::{
    batch_loss, brute_force_loss, btc_loss, ctc_loss, lattice_loss, Criterion, EmissionMatrix,
};
use wfst_btc::topology::{
    build_ctc_topo, build_lexicon_fst, build_linear_grammar, build_training_graph, Lexicon,
    Transcript, Vocabulary,
};
use wfst_btc::{Error, Label};

fn vocab(n: usize) -> Vocabulary {
    Vocabulary::new(["a", "b", "c"].into_iter().take(n)).unwrap()
}

/// A random realizable instance: `(vocab, emissions, transcript)`.
fn instance(seed: u64, max_frames: usize, max_units: usize) -> (Vocabulary, EmissionMatrix, Transcript) {
    let mut r = rng(seed);
    let v = vocab(r.random_range(1..=max_units));
    let frames = r.random_range(1..=max_frames);
    let units: Vec<Label> = v.unit_labels().collect();
    loop {
        let len = r.random_range(1..=frames);
        let toks: Vec<Label> = (0..len).map(|_| units[r.random_range(0..units.len())]).collect();
        let repeats = toks.windows(2).filter(|w| w[0] == w[1]).count();
        if len + repeats <= frames {
            let e = random_emissions(&mut r, frames, v.extended_size());
            let t = Transcript::new(toks, &v).unwrap();
            return (v, e, t);
        }
    }
}

#[test]
fn lattice_loss_matches_enumeration() {
    for seed in 0..100 {
        let (v, e, t) = instance(seed, 5, 2);
        let want = brute_force_loss(&e, &t, None).unwrap();
        let got = ctc_loss(&e, &t, &v, None).unwrap().nll;
        assert!((got - want).abs() <= 1e-9, "seed {seed}: {got} vs {want}");
        for lambda in [0.0, 0.5, 3.0] {
            let want = brute_force_loss(&e, &t, Some(lambda)).unwrap();
            let got = btc_loss(&e, &t, &v, None, lambda).unwrap().nll;
            assert!((got - want).abs() <= 1e-9, "seed {seed} λ={lambda}: {got} vs {want}");
        }
    }
}

fn fd_check(e: &EmissionMatrix, loss: &dyn Fn(&EmissionMatrix) -> f64, grad: &[f64]) {
    let h = 1e-4;
    for (idx, &g) in grad.iter().enumerate() {
        if g.abs() <= 1e-6 {
            continue;
        }
        let mut up = e.clone();
        up.values_mut()[idx] += h;
        let mut down = e.clone();
        down.values_mut()[idx] -= h;
        let fd = (loss(&up) - loss(&down)) / (2.0 * h);
        assert!(rel_err(fd, g) <= 1e-4, "entry {idx}: fd {fd} vs {}", g);
    }
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..30 {
        let (v, e, t) = instance(100 + seed, 6, 3);
        let r = ctc_loss(&e, &t, &v, None).unwrap();
        fd_check(&e, &|x| ctc_loss(x, &t, &v, None).unwrap().nll, &r.grad);
        let r = btc_loss(&e, &t, &v, None, 0.7).unwrap();
        fd_check(&e, &|x| btc_loss(x, &t, &v, None, 0.7).unwrap().nll, &r.grad);
    }
}

#[test]
fn occupancy_sums_to_one_per_frame() {
    for seed in 0..50 {
        let (v, e, t) = instance(200 + seed, 8, 3);
        for r in [
            ctc_loss(&e, &t, &v, None).unwrap(),
            btc_loss(&e, &t, &v, None, 1.5).unwrap(),
        ] {
            for frame in 0..e.frames() {
                let occ: f64 = (0..e.width()).map(|c| -r.grad_at(frame, c)).sum();
                assert!((occ - 1.0).abs() <= 1e-8, "{occ}");
                for c in 0..e.width() {
                    assert!((-1.0 - 1e-12..=1e-12).contains(&r.grad_at(frame, c)));
                }
            }
        }
    }
}

#[test]
fn bypass_loss_is_bounded_by_ctc_and_monotone_in_lambda() {
    for seed in 0..50 {
        let (v, e, t) = instance(300 + seed, 8, 3);
        let ctc = ctc_loss(&e, &t, &v, None).unwrap().nll;
        let mut prev = f64::NEG_INFINITY;
        for lambda in [5.0, 3.0, 1.0, 0.5, 0.0] {
            let btc = btc_loss(&e, &t, &v, None, lambda).unwrap().nll;
            assert!(btc <= ctc + 1e-12);
            assert!(prev == f64::NEG_INFINITY || btc <= prev + 1e-12);
            prev = btc;
        }
        assert!(prev < ctc, "λ=0 adds mass");
    }
}

#[test]
fn huge_penalty_reduces_to_ctc() {
    for seed in 0..50 {
        let (v, e, t) = instance(400 + seed, 8, 3);
        let ctc = ctc_loss(&e, &t, &v, None).unwrap();
        let btc = btc_loss(&e, &t, &v, None, 1e9).unwrap();
        assert!((ctc.nll - btc.nll).abs() <= 1e-6);
        for (a, b) in ctc.grad.iter().zip(&btc.grad) {
            assert!((a - b).abs() <= 1e-6);
        }
        let inf = btc_loss(&e, &t, &v, None, f64::INFINITY).unwrap();
        assert_eq!(inf.nll, ctc.nll);
    }
}

#[test]
fn concentrated_emissions() {
    let v = vocab(2);
    let a = Transcript::parse("a", &v).unwrap();
    // one frame, P(a) = e^-12
    let p_a: f64 = -12.0;
    let rest = ((1.0 - p_a.exp()) / 3.0).ln();
    let e = EmissionMatrix::from_rows(vec![vec![rest, p_a, rest, rest]]).unwrap();
    let nll = ctc_loss(&e, &a, &v, None).unwrap().nll;
    assert!((nll - 12.0).abs() <= 1e-12);
    assert!(nll > 10.0);
    // the ★ column takes over once the penalty is gone
    let btc = btc_loss(&e, &a, &v, None, 0.0).unwrap().nll;
    assert!((btc - -(p_a.exp() + rest.exp()).ln()).abs() <= 1e-12);

    // an emission sure of "a b" gives a near-zero loss
    let sure = |col: usize| {
        let mut row = [-30.0; 4];
        row[col] = 0.0;
        let z = lse(row.iter().copied());
        row.iter().map(|x| x - z).collect::<Vec<_>>()
    };
    let e = EmissionMatrix::from_rows(vec![sure(1), sure(0), sure(2)]).unwrap();
    let ab = Transcript::parse("a b", &v).unwrap();
    assert!(ctc_loss(&e, &ab, &v, None).unwrap().nll < 1e-10);
    let ba = Transcript::parse("b a", &v).unwrap();
    assert!(ctc_loss(&e, &ba, &v, None).unwrap().nll > 50.0);
}

#[test]
fn unrealizable_and_malformed_inputs() {
    let v = vocab(2);
    let aa = Transcript::parse("a a", &v).unwrap();
    let e = EmissionMatrix::uniform(2, 4);
    assert!(matches!(
        ctc_loss(&e, &aa, &v, None),
        Err(Error::UnrealizableTranscript { frames: 2 })
    ));
    // a bypass lifts the separator ("a ★") but still needs a frame per token
    assert!(btc_loss(&e, &aa, &v, None, 0.0).is_ok());
    assert!(btc_loss(&EmissionMatrix::uniform(1, 4), &aa, &v, None, 0.0).is_err());
    assert!(ctc_loss(&EmissionMatrix::uniform(2, 5), &aa, &v, None).is_err());
    assert!(btc_loss(&EmissionMatrix::uniform(3, 4), &aa, &v, None, -1.0).is_err());
    assert!(matches!(
        brute_force_loss(&EmissionMatrix::uniform(9, 4), &aa, None),
        Err(Error::TooLarge(_))
    ));
}

#[test]
fn wrapper_agrees_with_manual_graph() {
    let units = vocab(3);
    let lex = Lexicon::new(&units, [("X", vec!["a", "b"]), ("Y", vec!["c"])]).unwrap();
    let words = Transcript::parse("X Y X", lex.words()).unwrap();
    let mut r = rng(7);
    let e = random_emissions(&mut r, 8, units.extended_size());
    let g = build_training_graph(
        &build_ctc_topo(&units, false),
        &build_lexicon_fst(&lex, false),
        &build_linear_grammar(&words),
    )
    .unwrap();
    let manual = lattice_loss(&e, &g).unwrap();
    let wrapped = ctc_loss(&e, &words, &units, Some(&lex)).unwrap();
    assert_eq!(manual, wrapped);
    // the word-level loss equals the unit-level loss of the expanded transcript
    let expanded = Transcript::parse("a b c a b", &units).unwrap();
    let unit_level = ctc_loss(&e, &expanded, &units, None).unwrap();
    assert!((unit_level.nll - wrapped.nll).abs() <= 1e-12);
}

#[test]
fn batch_loss_keeps_input_order() {
    let v = vocab(2);
    let items: Vec<_> = (0..20).map(|s| instance(500 + s, 6, 2)).collect();
    let refs: Vec<_> = items
        .iter()
        .filter(|(iv, _, _)| iv.len() == v.len())
        .map(|(_, e, t)| (e, t))
        .collect();
    let out = batch_loss(&refs, &v, Criterion::Btc { lambda: 1.0 });
    for ((e, t), r) in refs.iter().zip(out) {
        assert_eq!(r.unwrap(), btc_loss(e, t, &v, None, 1.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superset_bound_for_any_penalty(seed in 0u64..10_000, lambda in 0.0f64..20.0) {
        let (v, e, t) = instance(seed, 7, 3);
        let ctc = ctc_loss(&e, &t, &v, None).unwrap().nll;
        let btc = btc_loss(&e, &t, &v, None, lambda).unwrap().nll;
        prop_assert!(btc <= ctc + 1e-12);
        prop_assert!(btc.is_finite() && btc >= 0.0);
    }
}
