//! CTC and BTC training graphs for a word transcript through a lexicon.
//! Pass `dot` to print the BTC graph in Graphviz format.
//!
//! ```bash
//! cargo run -p wfst-btc --example training_graphs
//! cargo run -p wfst-btc --example training_graphs -- dot | dot -Tsvg > btc.svg
//! ```

use wfst_btc::topology::{btc_graph, ctc_graph, Lexicon, Transcript, Vocabulary};

fn main() -> wfst_btc::Result<()> {
    let units = Vocabulary::new(["k", "ae", "t"])?;
    let lex = Lexicon::new(&units, [("CAT", vec!["k", "ae", "t"]), ("AT", vec!["ae", "t"])])?;
    let words = Transcript::parse("CAT AT", lex.words())?;

    let ctc = ctc_graph(&units, &lex, &words)?;
    let btc = btc_graph(&units, &lex, &words, 2.0)?;
    if std::env::args().nth(1).as_deref() == Some("dot") {
        print!("{}", btc.to_dot(&|l| units.name(l).to_string()));
        return Ok(());
    }
    println!("transcript: {}", words.to_line(lex.words()));
    println!("CTC graph: {} states, {} arcs", ctc.num_states(), ctc.num_arcs());
    println!("BTC graph (λ = 2): {} states, {} arcs", btc.num_states(), btc.num_arcs());
    let bypasses = btc.all_arcs().filter(|(_, a)| a.ilabel == units.star() && a.weight.0 < 0.0).count();
    println!("arcs entering a ★ segment: {bypasses}");

    // a single-unit identity lexicon gives the unit-level graphs
    let t = Transcript::parse("k ae", &units)?;
    let g = ctc_graph(&units, &Lexicon::identity(&units), &t)?;
    print!("unit-level CTC graph for \"k ae\":\n{}", g.to_text());
    Ok(())
}
