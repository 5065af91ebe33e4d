//! CTC and BTC losses on random emissions, checked against alignment
//! enumeration, with the per-frame ★ occupancy as the penalty falls.
//!
//! ```bash
//! cargo run -p wfst-btc --example loss_and_gradients
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use wfst_btc::loss::{brute_force_loss, btc_loss, ctc_loss, EmissionMatrix};
use wfst_btc::topology::{column_of, Transcript, Vocabulary};

fn random_emissions(frames: usize, width: usize, seed: u64) -> EmissionMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows = (0..frames)
        .map(|_| {
            let logits: Vec<f64> = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z = logits.iter().map(|x| x.exp()).sum::<f64>().ln();
            logits.iter().map(|x| x - z).collect()
        })
        .collect();
    EmissionMatrix::from_rows(rows).expect("normalized rows")
}

fn main() -> wfst_btc::Result<()> {
    let v = Vocabulary::new(["a", "b"])?;
    let t = Transcript::parse("a b a", &v)?;
    let e = random_emissions(6, v.extended_size(), 3);

    let ctc = ctc_loss(&e, &t, &v, None)?;
    println!("CTC nll {:.10}  (enumeration {:.10})", ctc.nll, brute_force_loss(&e, &t, None)?);
    println!("{:>6} {:>14} {:>14} {:>10}", "λ", "BTC nll", "enumeration", "★ occ");
    for lambda in [8.0, 3.0, 1.0, 0.5, 0.0] {
        let r = btc_loss(&e, &t, &v, None, lambda)?;
        println!(
            "{lambda:>6} {:>14.10} {:>14.10} {:>10.4}",
            r.nll,
            brute_force_loss(&e, &t, Some(lambda))?,
            r.mean_occupancy(column_of(v.star()))
        );
    }

    // the gradient with respect to log-emissions is minus the occupancy
    println!("CTC gradient (frames × [blank a b ★]):");
    for frame in 0..ctc.frames() {
        let row: Vec<String> = (0..e.width()).map(|c| format!("{:+.3}", ctc.grad_at(frame, c))).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
