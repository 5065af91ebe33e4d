//! CTC and bypass temporal classification (BTC) as weighted finite-state
//! transducer compositions.
//!
//! The training graph of a transcript is `H ∘ L ∘ G`: a CTC alignment
//! topology `H`, a lexicon `L` and a grammar `G`. Plain CTC uses a linear
//! grammar. BTC adds a `★` arc with penalty `-λ` in parallel to every
//! transcript token so that substituted or inserted tokens can be bypassed
//! by frames labelled `★`. The loss is the negative log total weight of the
//! emission acceptor composed with the graph; gradients come from
//! forward-backward arc posteriors.
//!
//! ```
//! use wfst_btc::loss::{btc_loss, ctc_loss, EmissionMatrix};
//! use wfst_btc::topology::{Transcript, Vocabulary};
//!
//! let vocab = Vocabulary::new(["a", "b"]).unwrap();
//! let t = Transcript::parse("a b", &vocab).unwrap();
//! let e = EmissionMatrix::uniform(4, vocab.extended_size());
//! let ctc = ctc_loss(&e, &t, &vocab, None).unwrap();
//! let btc = btc_loss(&e, &t, &vocab, None, 0.0).unwrap();
//! assert!(btc.nll < ctc.nll);
//! ```

pub mod algo;
pub mod cli;
pub mod corruption;
pub mod error;
pub mod fst;
pub mod loss;
pub mod semiring;
pub mod topology;
pub mod trainer;

pub use error::{Error, Result};
pub use fst::{Arc, Fst, Label, StateId, EPSILON};
pub use semiring::Weight;

/// Toolkit version recorded in manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
