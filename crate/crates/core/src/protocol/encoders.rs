use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use super::gates::Protocol;
use crate::error::{Error, Result};
use crate::model::ProductExtension;
use crate::qop::sample_index;

/// Charlie's choice and the indices where ζ(k) = 1 was observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharlieOutcome {
    pub k: usize,
    /// False when no index qualified and the fallback k = 0 was used.
    pub found: bool,
    /// (k, gates passed) for every k with ζ(k) = 1, in the order examined.
    pub zeta_hits: Vec<(usize, bool)>,
    pub draws: usize,
}

/// Alice's choice of codeword and the channel input word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliceOutcome {
    pub ell: usize,
    /// False when no index of the class qualified and its first codeword was used.
    pub found: bool,
    pub x_word: Vec<usize>,
    pub draws: usize,
}

/// min(1, p(s̃|s)/p(s̃) · 2^{−n(bound+γ)}), evaluated in the log domain.
pub fn charlie_acceptance(ext: &ProductExtension, ts_word: &[usize], s_word: &[usize], bound: f64, gamma: f64) -> f64 {
    let pt = ext.p_ts_letter();
    let mut log2r = -(ext.n as f64) * (bound + gamma);
    for (&t, &s) in ts_word.iter().zip(s_word) {
        let p = ext.law.p_ts_given_s[s][t];
        if p <= 0.0 {
            return 0.0;
        }
        log2r += (p / pt[t]).log2();
    }
    log2r.min(0.0).exp2()
}

/// min(1, p(u|s̃)/p(u) · 2^{−n(bound+γ)}), evaluated in the log domain.
pub fn alice_acceptance(ext: &ProductExtension, u_word: &[usize], ts_word: &[usize], bound: f64, gamma: f64) -> f64 {
    let pu = ext.p_u_letter();
    let mut log2r = -(ext.n as f64) * (bound + gamma);
    for (&u, &t) in u_word.iter().zip(ts_word) {
        let p = ext.law.p_u_given_ts[t][u];
        if p <= 0.0 {
            return 0.0;
        }
        log2r += (p / pu[u]).log2();
    }
    log2r.min(0.0).exp2()
}

/// Charlie: smallest k with ζ(k) = 1, g1(s̃[k]) < √ε and g2(s̃[k]) < ε^{1/4};
/// otherwise k = 0. Z(k) is drawn in index order; gates are evaluated only when ζ(k) = 1.
pub fn charlie_encode<R: Rng + ?Sized>(
    proto: &Protocol,
    codebook: &Codebook,
    s_word: &[usize],
    rng: &mut R,
) -> Result<CharlieOutcome> {
    let ext = &proto.ext;
    if s_word.len() != ext.n {
        return Err(Error::DimensionMismatch(format!(
            "s-word of length {} for n = {}",
            s_word.len(),
            ext.n
        )));
    }
    let mut zeta_hits = Vec::new();
    for (k, ts) in codebook.ts_words.iter().enumerate() {
        let z: f64 = rng.gen();
        let ratio = charlie_acceptance(ext, ts, s_word, proto.params.bound_s_ts, proto.params.gamma);
        if z <= ratio {
            let pass = proto.charlie_gate(ts)?;
            zeta_hits.push((k, pass));
            if pass {
                return Ok(CharlieOutcome {
                    k,
                    found: true,
                    zeta_hits,
                    draws: k + 1,
                });
            }
        }
    }
    Ok(CharlieOutcome {
        k: 0,
        found: false,
        zeta_hits,
        draws: codebook.ts_words.len(),
    })
}

/// Alice: smallest ℓ in class m with I(k,ℓ) = 1 and g(k,ℓ) > 1 − √ε; otherwise the
/// first codeword of the class. The input word is drawn letterwise from p(x|u,s̃).
pub fn alice_encode<R: Rng + ?Sized>(
    proto: &Protocol,
    codebook: &Codebook,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<AliceOutcome> {
    if m >= codebook.bin_count {
        return Err(Error::InvalidParameter(format!(
            "message {m} out of range {}",
            codebook.bin_count
        )));
    }
    let ts = codebook
        .ts_words
        .get(k)
        .ok_or_else(|| Error::InvalidParameter(format!("quantization index {k} out of range")))?;
    let ext = &proto.ext;
    let cut = 1.0 - proto.params.eps.sqrt();
    let range = codebook.class_range(m);
    let mut chosen = None;
    let mut draws = 0;
    for ell in range.clone() {
        let eta: f64 = rng.gen();
        draws += 1;
        let u = &codebook.u_words[ell];
        if eta <= alice_acceptance(ext, u, ts, proto.params.bound_u_ts, proto.params.gamma) && proto.g(u, ts)? > cut {
            chosen = Some(ell);
            break;
        }
    }
    let (ell, found) = match chosen {
        Some(l) => (l, true),
        None => (range.start, false),
    };
    let x_word = sample_input(ext, &codebook.u_words[ell], ts, rng);
    Ok(AliceOutcome {
        ell,
        found,
        x_word,
        draws,
    })
}

/// x ~ Πᵢ p(xᵢ | uᵢ, s̃ᵢ).
pub fn sample_input<R: Rng + ?Sized>(
    ext: &ProductExtension,
    u_word: &[usize],
    ts_word: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    u_word
        .iter()
        .zip(ts_word)
        .map(|(&u, &t)| sample_index(&ext.law.p_x_given_u_ts[u][t], rng))
        .collect()
}
