//! CTC vs BTC on the synthetic task with clean, substituted and inserted
//! training transcripts.
//!
//! ```bash
//! cargo run --release -p wfst-btc --example desk_experiment
//! cargo run --release -p wfst-btc --example desk_experiment -- 0.7   # p for both corruptions
//! ```

use std::time::Instant;

use wfst_btc::corruption::{corrupt_corpus, CorruptionConfig};
use wfst_btc::topology::Transcript;
use wfst_btc::trainer::{
    generate_synthetic_dataset, train, Dataset, SyntheticTaskConfig, TrainConfig, TrainCriterion,
};

fn run(data: &Dataset, labels: &[Transcript], name: &str, crit: TrainCriterion, cfg: &TrainConfig) {
    let start = Instant::now();
    match train(data, labels, crit, cfg) {
        Ok((_, report)) => {
            let first = report.epochs.first().map_or(f64::NAN, |e| e.train_nll);
            let last = report.epochs.last().map_or(f64::NAN, |e| e.train_nll);
            print!(
                "{name:<14} PER {:6.2}%  nll {first:8.3} -> {last:8.3}  ({:.1}s)",
                report.final_per,
                start.elapsed().as_secs_f64()
            );
            if let (Some(c), Some(k)) = (report.star_occupancy_corrupted, report.star_occupancy_clean)
            {
                print!("  star occupancy corrupted {c:.3} clean {k:.3}");
            }
            println!();
        }
        Err(e) => println!("{name:<14} failed: {e}"),
    }
}

fn main() {
    let p: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("probability"))
        .unwrap_or(0.5);
    let data = generate_synthetic_dataset(&SyntheticTaskConfig::default()).expect("dataset");
    let cfg = TrainConfig::default();
    let schedule = cfg.schedule().expect("valid").expect("beta and tau set");
    let btc = TrainCriterion::Btc(schedule);
    println!(
        "{} train / {} test utterances, {} epochs, beta {} tau {}",
        data.train.len(),
        data.test.len(),
        cfg.epochs,
        schedule.beta(),
        schedule.tau()
    );

    let clean = data.train_transcripts();
    run(&data, &clean, "clean ctc", TrainCriterion::Ctc, &cfg);
    run(&data, &clean, "clean btc", btc, &cfg);

    let (sub, stats) = corrupt_corpus(&clean, &data.vocab, &CorruptionConfig::substitution(p, 1).unwrap())
        .expect("corrupt");
    println!("substitution p={p}: realized {:.3}", stats.substitution_rate());
    run(&data, &sub, "sub ctc", TrainCriterion::Ctc, &cfg);
    run(&data, &sub, "sub btc", btc, &cfg);

    let (ins, stats) = corrupt_corpus(&clean, &data.vocab, &CorruptionConfig::insertion(p, 2).unwrap())
        .expect("corrupt");
    println!("insertion p={p}: realized {:.3}", stats.insertion_rate());
    run(&data, &ins, "ins ctc", TrainCriterion::Ctc, &cfg);
    run(&data, &ins, "ins btc", btc, &cfg);
}
