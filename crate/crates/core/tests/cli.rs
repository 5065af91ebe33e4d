mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use common::*;
use wfst_btc::cli::{manifest_path, run, write_data_dir, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};
use wfst_btc::loss::EmissionMatrix;
use wfst_btc::topology::{Transcript, Vocabulary};
use wfst_btc::trainer::{Dataset, EncoderParams, Features, Utterance};
use wfst_btc::Fst;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("wfst-btc").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_corpus(dir: &Path, lines: usize) -> std::path::PathBuf {
    let units = ["k", "ae", "t", "s", "ih", "n", "d", "aa"];
    let text: String = (0..lines)
        .map(|i| {
            let toks: Vec<&str> = (0..10).map(|k| units[(i * 5 + k * 3 + i / 7) % units.len()]).collect();
            toks.join(" ") + "\n"
        })
        .collect();
    let path = dir.join("clean.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn corrupt_identity_rate_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let clean = write_corpus(dir.path(), 1000);
    // p = 0 leaves the file byte-identical
    let same = dir.path().join("same.txt");
    let (code, _, err) = cli(&["corrupt", "--in", p(&clean), "--out", p(&same), "--mode", "sub", "--seed", "1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(fs::read(&clean).unwrap(), fs::read(&same).unwrap());

    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let (code, _, err) = cli(&[
            "corrupt", "--in", p(&clean), "--out", p(out), "--mode", "sub", "--p-sub", "0.3", "--seed", "17",
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest_path(&a)).unwrap()).unwrap();
    let rate = manifest["realized_substitution_rate"].as_f64().unwrap();
    assert!((rate - 0.3).abs() <= 0.02, "{rate}");
    assert_eq!(manifest["utterances"], 1000);

    // the manifest rate is what the files show
    let (x, y) = (fs::read_to_string(&clean).unwrap(), fs::read_to_string(&a).unwrap());
    let (mut diff, mut n) = (0usize, 0usize);
    for (l1, l2) in x.lines().zip(y.lines()) {
        for (t1, t2) in l1.split_whitespace().zip(l2.split_whitespace()) {
            diff += usize::from(t1 != t2);
            n += 1;
        }
    }
    assert!((diff as f64 / n as f64 - rate).abs() <= 1e-12);

    let (code, _, _) = cli(&["corrupt", "--in", p(&clean), "--out", p(&a), "--mode", "sub", "--p-sub", "1.5", "--seed", "1"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = cli(&["corrupt", "--in", "/no/such/file", "--out", p(&a), "--mode", "ins", "--seed", "1"]);
    assert_eq!(code, EXIT_DATA);
}

fn synth(dir: &Path, train: usize) -> std::path::PathBuf {
    let cfg = dir.join("task.toml");
    fs::write(&cfg, format!("train_size = {train}\ntest_size = 20\nutterance_length = [3, 6]\n")).unwrap();
    let data = dir.join("data");
    let (code, _, err) = cli(&["synth", "--out", p(&data), "--config", p(&cfg)]);
    assert_eq!(code, EXIT_OK, "{err}");
    data
}

#[test]
fn train_smoke_run_writes_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 50);
    let cfg = dir.path().join("train.toml");
    fs::write(&cfg, "epochs = 2\nhidden_dim = 16\nbeta = 4.0\ntau = 0.5\n").unwrap();
    let started = Instant::now();
    let mut csvs = Vec::new();
    for run_dir in ["r1", "r2"] {
        let out = dir.path().join(run_dir);
        let (code, stdout, err) = cli(&[
            "train", "--config", p(&cfg), "--criterion", "btc", "--data", p(&data), "--out", p(&out),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(stdout.starts_with("PER "), "{stdout}");
        let csv = fs::read_to_string(out.join("report.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "epoch,lambda,train_nll,test_per");
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("0,4,") && rows[2].starts_with("1,2,"), "{csv}");
        assert!(out.join("model.bin").exists() && out.join("manifest.json").exists());
        csvs.push(csv);
    }
    assert!(started.elapsed().as_secs() < 60);
    assert_eq!(csvs[0], csvs[1]);

    // eval of a trained model runs end to end
    let (code, stdout, err) = cli(&["eval", "--model", p(&dir.path().join("r1/model.bin")), "--data", p(&data)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("utterances 20"));

    // btc without a schedule is a usage error
    let bare = dir.path().join("bare.toml");
    fs::write(&bare, "epochs = 1\nbeta = 2.0\n").unwrap();
    let (code, _, err) = cli(&[
        "train", "--config", p(&bare), "--criterion", "btc", "--data", p(&data), "--out", p(&dir.path().join("x")),
    ]);
    assert_eq!(code, EXIT_USAGE, "{err}");
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "epochs = 1\nmomentum = 0.9\n").unwrap();
    let (code, _, _) = cli(&[
        "train", "--config", p(&unknown), "--criterion", "ctc", "--data", p(&data), "--out", p(&dir.path().join("x")),
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn train_reports_unrealizable_transcripts_as_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 5);
    let cfg = dir.path().join("train.toml");
    fs::write(&cfg, "epochs = 1\nhidden_dim = 4\n").unwrap();
    // far more tokens than frames on the first line
    let labels = fs::read_to_string(data.join("train.txt")).unwrap();
    let long = std::iter::repeat_n("p0 p1", 60).collect::<Vec<_>>().join(" ");
    let bad: String = std::iter::once(long)
        .chain(labels.lines().skip(1).map(str::to_string))
        .map(|l| l + "\n")
        .collect();
    let bad_path = dir.path().join("bad.txt");
    fs::write(&bad_path, bad).unwrap();
    let (code, _, err) = cli(&[
        "train", "--config", p(&cfg), "--criterion", "ctc", "--data", p(&data), "--out",
        p(&dir.path().join("o")), "--transcripts", p(&bad_path),
    ]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("utterance 0"), "{err}");
}

/// A hand-built encoder over one-hot features: frame `k < V` decodes to unit
/// `k`, a zero frame decodes to blank.
fn one_hot_model(v: usize) -> EncoderParams {
    let mut m = EncoderParams::zeros(v, v, v + 2);
    for j in 0..v {
        m.w1[j * v + j] = 3.0;
        m.w2[(j + 1) * v + j] = 10.0;
    }
    m.b2[0] = 1.0;
    m
}

fn one_hot(v: usize, frames: &[Option<usize>]) -> Features {
    let mut values = vec![0.0; frames.len() * v];
    for (t, f) in frames.iter().enumerate() {
        if let Some(k) = f {
            values[t * v + k] = 1.0;
        }
    }
    Features {
        frames: frames.len(),
        dim: v,
        values,
    }
}

#[test]
fn eval_counts_match_hand_alignment() {
    let vocab = Vocabulary::new(["a", "b", "c", "d"]).unwrap();
    // (frames as unit indices or blank, reference) with the hypothesis in comments
    let cases: [(&[Option<usize>], &str); 10] = [
        (&[Some(0), None, Some(1)], "a b"),                // a b: exact
        (&[Some(0), Some(0), Some(2)], "a b"),             // a c: 1 S
        (&[Some(0)], "a b"),                               // a: 1 D
        (&[Some(0), Some(1), Some(2)], "a c"),             // a b c: 1 I
        (&[None, None], "d"),                              // empty: 1 D
        (&[Some(3), None, Some(3)], "d"),                  // d d: 1 I
        (&[Some(1), Some(0)], "a b"),                      // b a: 2 S
        (&[Some(2), Some(2), Some(2)], "c"),               // c: exact
        (&[Some(0), Some(1), Some(2), Some(3)], "a b c d"), // exact
        (&[Some(3), Some(2)], "a b c d"),                  // d c: 1 S 2 D
    ];
    // S = 1 + 2 + 1, I = 1 + 1, D = 1 + 1 + 2, N = 2+2+2+2+1+1+2+1+4+4
    let test: Vec<Utterance> = cases
        .iter()
        .map(|(f, r)| Utterance {
            features: one_hot(4, f),
            transcript: Transcript::parse(r, &vocab).unwrap(),
        })
        .collect();
    let data = Dataset {
        vocab,
        train: test.clone(),
        test,
    };
    let dir = tempfile::tempdir().unwrap();
    write_data_dir(&dir.path().join("d"), &data).unwrap();
    let model = dir.path().join("m.bin");
    fs::write(&model, one_hot_model(4).to_bytes()).unwrap();
    let (code, out, err) = cli(&["eval", "--model", p(&model), "--data", p(&dir.path().join("d"))]);
    assert_eq!(code, EXIT_OK, "{err}");
    let want = "utterances 10\nreference tokens 21\nsubstitutions 4\ninsertions 2\ndeletions 4\nPER 47.62\n";
    assert_eq!(out, want);

    // a model of the wrong width is a data error
    fs::write(&model, EncoderParams::zeros(4, 2, 9).to_bytes()).unwrap();
    let (code, _, _) = cli(&["eval", "--model", p(&model), "--data", p(&dir.path().join("d"))]);
    assert_eq!(code, EXIT_DATA);
    fs::write(&model, b"not a model").unwrap();
    let (code, _, _) = cli(&["eval", "--model", p(&model), "--data", p(&dir.path().join("d"))]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn graph_counts_and_round_trip() {
    let (code, out, err) = cli(&["graph", "--transcript", "a b"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let g = Fst::from_text(&out).unwrap();
    assert_eq!((g.num_states(), g.num_arcs()), (5, 10));
    assert_eq!(g.to_text(), out);

    let (code, out, _) = cli(&["graph", "--transcript", "a b", "--criterion", "btc", "--lambda", "2"]);
    assert_eq!(code, EXIT_OK);
    let g = Fst::from_text(&out).unwrap();
    // vocabulary a, b gives ★ = 4
    let star_arcs: Vec<_> = g.all_arcs().filter(|(_, a)| a.ilabel == 4 && a.weight.0 == -2.0).collect();
    assert_eq!(star_arcs.len(), 3);
    assert!(star_arcs.iter().all(|(_, a)| a.olabel == 0));

    let (code, out, _) = cli(&["graph", "--transcript", "a b", "--format", "dot"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("digraph"));

    let (code, _, _) = cli(&["graph", "--transcript", "a b", "--lambda", "2"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = cli(&["graph", "--transcript", "a b", "--criterion", "btc", "--lambda", "-1"]);
    assert_ne!(code, EXIT_OK);
}

#[test]
fn graph_with_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    let units = dir.path().join("units.txt");
    let lex = dir.path().join("lex.txt");
    fs::write(&units, "k\nae\nt\n").unwrap();
    fs::write(&lex, "CAT k ae t\nAT ae t\n").unwrap();
    let (code, out, err) = cli(&["graph", "--transcript", "CAT AT", "--units", p(&units), "--lexicon", p(&lex)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let g = Fst::from_text(&out).unwrap();
    assert!(g.num_states() > 5);
    let (code, _, _) = cli(&["graph", "--transcript", "CAT", "--lexicon", p(&lex)]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn schedule_output() {
    let (code, out, _) = cli(&["schedule", "--beta", "8", "--tau", "0.75", "--epochs", "4"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "epoch lambda\n0 8\n1 6\n2 4.5\n3 3.375\n");
    let (code, out, _) = cli(&["schedule", "--beta", "8", "--tau", "0.75", "--epochs", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 2);
    for tau in ["1", "0", "1.5", "-0.2"] {
        let (code, _, _) = cli(&["schedule", "--beta", "8", "--tau", tau, "--epochs", "3"]);
        assert_eq!(code, EXIT_USAGE, "tau {tau}");
    }
    let (code, _, _) = cli(&["schedule", "--beta", "-1", "--tau", "0.5", "--epochs", "3"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn oracle_agrees_and_enforces_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(3);
    let e = random_emissions(&mut r, 5, 5);
    let path = dir.path().join("e.txt");
    fs::write(&path, e.to_text()).unwrap();
    for lambda in [None, Some("0"), Some("0.5"), Some("3")] {
        let mut args = vec!["oracle", "--emissions", p(&path), "--transcript", "a b a"];
        if let Some(l) = lambda {
            args.extend(["--lambda", l]);
        }
        let (code, out, err) = cli(&args);
        assert_eq!(code, EXIT_OK, "{err}");
        let diff: f64 = out
            .lines()
            .find_map(|l| l.strip_prefix("diff"))
            .unwrap()
            .trim()
            .parse()
            .unwrap();
        assert!(diff < 1e-9);
        let first = out.lines().next().unwrap();
        assert_eq!(first == "criterion ctc", lambda.is_none(), "{first}");
    }
    let big = EmissionMatrix::uniform(20, 5);
    fs::write(&path, big.to_text()).unwrap();
    let (code, _, err) = cli(&["oracle", "--emissions", p(&path), "--transcript", "a"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
    // unrealizable transcript is a data error
    fs::write(&path, EmissionMatrix::uniform(1, 5).to_text()).unwrap();
    let (code, _, _) = cli(&["oracle", "--emissions", p(&path), "--transcript", "a b"]);
    assert_eq!(code, EXIT_DATA);
    assert_ne!(EXIT_INTERNAL, EXIT_DATA);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_wfst-btc");
    let status = std::process::Command::new(bin)
        .args(["schedule", "--beta", "2", "--tau", "0.5", "--epochs", "2"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&status.stdout), "epoch lambda\n0 2\n1 1\n");
    let status = std::process::Command::new(bin).args(["nonsense"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
}
