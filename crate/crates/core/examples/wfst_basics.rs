//! Hand-built transducers: composition, trimming, log-semiring distance,
//! arc posteriors, best path and the AT&T text format.
//!
//! ```bash
//! cargo run -p wfst-btc --example wfst_basics
//! ```

use wfst_btc::algo::{best_path, compose, connect, forward_backward, shortest_distance_log};
use wfst_btc::{Arc, Fst};

fn main() -> wfst_btc::Result<()> {
    // A: accepts "1 2" or "1 3", with the second choice less likely
    let mut a = Fst::new();
    a.add_states(3);
    a.set_start(0);
    a.add_arc(0, Arc::new(1, 1, 0.0, 1));
    a.add_arc(1, Arc::new(2, 2, (0.7f64).ln(), 2));
    a.add_arc(1, Arc::new(3, 3, (0.3f64).ln(), 2));
    a.set_final(2, 0.0);

    // B: rewrites 1 -> 10, 2 -> 20, 3 -> 30, plus a dead-end state
    let mut b = Fst::new();
    b.add_states(2);
    b.set_start(0);
    b.set_final(0, 0.0);
    for (i, o) in [(1, 10), (2, 20), (3, 30)] {
        b.add_arc(0, Arc::new(i, o, 0.0, 0));
    }
    b.add_arc(0, Arc::new(2, 99, -5.0, 1));

    let c = compose(&a, &b)?;
    let trimmed = connect(&c);
    println!("A∘B: {} states, {} arcs; trimmed: {} states, {} arcs",
        c.num_states(), c.num_arcs(), trimmed.num_states(), trimmed.num_arcs());
    println!("total log weight {:.6}", shortest_distance_log(&trimmed)?.0);

    let fb = forward_backward(&trimmed)?;
    for ((s, arc), p) in trimmed.all_arcs().zip(&fb.posteriors) {
        println!("  {s} -> {} {}:{} posterior {p:.3}", arc.nextstate, arc.ilabel, arc.olabel);
    }

    let best = best_path(&trimmed)?;
    println!("best path in {:?} out {:?} weight {:.4}", best.ilabels(), best.olabels(), best.weight.0);

    let text = trimmed.to_text();
    print!("AT&T text:\n{text}");
    assert_eq!(Fst::from_text(&text)?, trimmed);
    Ok(())
}
