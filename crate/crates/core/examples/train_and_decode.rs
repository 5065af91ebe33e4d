//! Train a small encoder with the bypass criterion on substituted labels,
//! save and reload it, then greedy-decode a few test utterances.
//!
//! ```bash
//! cargo run --release -p wfst-btc --example train_and_decode
//! ```

use wfst_btc::corruption::{corrupt_corpus, CorruptionConfig};
use wfst_btc::trainer::{
    encoder_forward, generate_synthetic_dataset, greedy_decode, train, EncoderParams,
    SyntheticTaskConfig, TrainConfig, TrainCriterion,
};

fn main() -> wfst_btc::Result<()> {
    let data = generate_synthetic_dataset(&SyntheticTaskConfig {
        test_size: 50,
        ..Default::default()
    })?;
    let (labels, _) = corrupt_corpus(
        &data.train_transcripts(),
        &data.vocab,
        &CorruptionConfig::substitution(0.2, 5)?,
    )?;
    let cfg = TrainConfig::default();
    let schedule = cfg.schedule()?.expect("defaults set beta and tau");
    let (params, report) = train(&data, &labels, TrainCriterion::Btc(schedule), &cfg)?;
    print!("{}", report.to_csv());
    print!("{}", report.summary());

    let restored = EncoderParams::from_bytes(&params.to_bytes())?;
    assert_eq!(restored, params);
    for u in data.test.iter().take(3) {
        let hyp = greedy_decode(&encoder_forward(&restored, &u.features)?);
        println!("{} frames: {}  =>  {}", u.features.frames, u.transcript.to_line(&data.vocab), hyp.to_line(&data.vocab));
    }
    Ok(())
}
