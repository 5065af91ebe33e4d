//! The geometric bypass-penalty schedule and its effect on the BTC loss of a
//! fixed, partly wrong transcript.
//!
//! ```bash
//! cargo run -p wfst-btc --example penalty_schedule -- 8 0.75 10
//! ```

use wfst_btc::loss::{btc_loss, ctc_loss, EmissionMatrix, PenaltySchedule};
use wfst_btc::topology::{Transcript, Vocabulary};

fn main() -> wfst_btc::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let (beta, tau, epochs) = match args[..] {
        [b, t, n] => (b, t, n as usize),
        _ => (8.0, 0.75, 10),
    };
    let schedule = PenaltySchedule::new(beta, tau)?;

    // the frames say "a a b" but the label claims "a b b"
    let v = Vocabulary::new(["a", "b"])?;
    let sure = |col: usize| -> Vec<f64> {
        let mut row = vec![(0.05f64 / 3.0).ln(); 4];
        row[col] = 0.95f64.ln();
        row
    };
    let e = EmissionMatrix::from_rows(vec![sure(1), sure(0), sure(1), sure(0), sure(2)])?;
    let label = Transcript::parse("a b b", &v)?;
    println!("CTC nll {:.4}", ctc_loss(&e, &label, &v, None)?.nll);
    println!("epoch lambda btc_nll");
    for i in 0..epochs {
        let lambda = schedule.penalty_at(i);
        println!("{i} {lambda:.6} {:.4}", btc_loss(&e, &label, &v, None, lambda)?.nll);
    }
    Ok(())
}
