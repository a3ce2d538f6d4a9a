//! Sparse regression codes over non-coherent SIMO flat-fading channels.
//!
//! MUB dictionaries, the MLMP / P-MLMP greedy decoders with BOMP and MBOMP
//! baselines, sectioned AMP with state evolution, the coherent
//! sphere-packing bound and a seeded Monte Carlo harness.

pub mod bounds;
pub mod channel;
pub mod codec;
pub mod decoders;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod rng;
pub mod samp;

pub use channel::{ChannelRealization, Observation};
pub use codec::{Codeword, SupportSet};
pub use decoders::{DecodeResult, DecoderConfig};
pub use dictionary::{Dictionary, SectionPlan};
pub use error::{Error, Result};
pub use harness::{BlerRecord, SimConfig};
pub use rng::StreamKey;
pub use samp::{SeMode, SeSchedule};
