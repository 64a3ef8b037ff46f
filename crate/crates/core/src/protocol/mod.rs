//! Random-coding protocol: codebooks, Charlie's quantizer, Alice's binning
//! encoder, Bob's pretty-good measurement, and Monte Carlo estimation.
//!
//! Indices are 0-based; the fallback choices are k = 0 for Charlie and the
//! first codeword of the message class for Alice.

mod codebook;
mod decoder;
mod encoders;
mod gates;
mod params;
mod simulate;

#[cfg(test)]
mod tests;

pub use codebook::{bob_decode, generate_codebooks, Codebook, Decoded};
pub use decoder::{build_decoder, Decoder};
pub use encoders::{
    alice_acceptance, alice_encode, charlie_acceptance, charlie_encode, sample_input, AliceOutcome, CharlieOutcome,
};
pub use gates::{g1, g2, test_value, visit_by_probability, G2Interval, Protocol, G2_RESIDUAL};
pub use params::{check_eps, e1_bound, e2_bound, error_budget, ProtocolParams, RateOracles, MAX_COUNT};
pub use simulate::{
    codebook_for_batch, simulate, simulate_with_codebook, stream_rng, wilson_interval, write_traces_csv, PovmSummary,
    Proportion, SimConfig, SimulationResult, TransmissionTrace,
};
