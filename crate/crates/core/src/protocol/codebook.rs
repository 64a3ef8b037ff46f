use std::ops::Range;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ProtocolParams;
use crate::error::{Error, Result};
use crate::model::ProductExtension;

/// Binned u-codebook (Alice) and s̃-quantization codebook (Charlie).
///
/// Codeword ℓ belongs to class ⌊ℓ / words_per_bin⌋.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub bin_count: usize,
    pub words_per_bin: usize,
    pub u_words: Vec<Vec<usize>>,
    pub ts_words: Vec<Vec<usize>>,
}

/// Bob's verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decoded {
    Message(usize),
    Failure,
}

impl Codebook {
    pub fn new(
        n: usize,
        bin_count: usize,
        words_per_bin: usize,
        u_words: Vec<Vec<usize>>,
        ts_words: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if bin_count == 0 || words_per_bin == 0 || ts_words.is_empty() {
            return Err(Error::InvalidParameter("codebook dimensions must be positive".into()));
        }
        if u_words.len() != bin_count * words_per_bin {
            return Err(Error::DimensionMismatch(format!(
                "{} u-words for {bin_count} bins of {words_per_bin}",
                u_words.len()
            )));
        }
        if u_words.iter().chain(&ts_words).any(|w| w.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "codeword length differs from n = {n}"
            )));
        }
        Ok(Self {
            n,
            bin_count,
            words_per_bin,
            u_words,
            ts_words,
        })
    }

    pub fn len(&self) -> usize {
        self.u_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_words.is_empty()
    }

    pub fn quant_count(&self) -> usize {
        self.ts_words.len()
    }

    /// Indices ℓ of class m.
    pub fn class_range(&self, m: usize) -> Range<usize> {
        m * self.words_per_bin..(m + 1) * self.words_per_bin
    }

    pub fn class_of(&self, ell: usize) -> usize {
        ell / self.words_per_bin
    }
}

/// Draws u-words iid from p_U^{⊗n} and s̃-words iid from p_{S̃}^{⊗n}.
pub fn generate_codebooks<R: Rng + ?Sized>(
    ext: &ProductExtension,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Codebook> {
    if params.n != ext.n {
        return Err(Error::DimensionMismatch(format!(
            "params n = {} vs extension n = {}",
            params.n, ext.n
        )));
    }
    let du = WeightedIndex::new(ext.p_u_letter()).map_err(|e| Error::InvalidDistribution(format!("p_U: {e}")))?;
    let dt = WeightedIndex::new(ext.p_ts_letter()).map_err(|e| Error::InvalidDistribution(format!("p_S~: {e}")))?;
    let n = params.n;
    let u_words = (0..params.codeword_count())
        .map(|_| (0..n).map(|_| du.sample(rng)).collect())
        .collect();
    let ts_words = (0..params.quant_count)
        .map(|_| (0..n).map(|_| dt.sample(rng)).collect())
        .collect();
    Codebook::new(n, params.bin_count, params.words_per_bin, u_words, ts_words)
}

/// Maps a measurement outcome to a message; `outcome == codebook.len()` is the failure element.
pub fn bob_decode(outcome: usize, codebook: &Codebook) -> Decoded {
    if outcome < codebook.len() {
        Decoded::Message(codebook.class_of(outcome))
    } else {
        Decoded::Failure
    }
}
