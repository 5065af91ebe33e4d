//! Substitution, insertion and combined corruption of a small corpus, with
//! realized rates and a few before/after lines.
//!
//! ```bash
//! cargo run -p wfst-btc --example corrupt_transcripts
//! ```

use wfst_btc::corruption::{corrupt_corpus, CorruptionConfig, CorruptionMode};
use wfst_btc::topology::{Transcript, Vocabulary};

fn main() -> wfst_btc::Result<()> {
    let v = Vocabulary::new(["sh", "iy", "hh", "ae", "d", "y", "er", "k"])?;
    let lines = ["sh iy hh ae d", "y er k ae d", "hh ae d sh iy", "k ae sh iy d y er"];
    let clean: Vec<Transcript> = (0..500)
        .map(|i| Transcript::parse(lines[i % lines.len()], &v))
        .collect::<Result<_, _>>()?;

    for cfg in [
        CorruptionConfig::substitution(0.3, 7)?,
        CorruptionConfig::insertion(0.3, 7)?,
        CorruptionConfig::new(CorruptionMode::SubPlusIns, 0.2, 0.2, 7)?,
    ] {
        let (out, stats) = corrupt_corpus(&clean, &v, &cfg)?;
        println!(
            "{:?}: substitution {:.3} ({}/{}), insertion {:.3} ({}/{})",
            cfg.mode,
            stats.substitution_rate(),
            stats.substitutions,
            stats.sub_trials,
            stats.insertion_rate(),
            stats.insertions,
            stats.gaps
        );
        for (c, o) in clean.iter().zip(&out).take(2) {
            println!("  {}  ->  {}", c.to_line(&v), o.to_line(&v));
        }
    }
    Ok(())
}
