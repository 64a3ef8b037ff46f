use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codebook::{bob_decode, generate_codebooks, Codebook, Decoded};
use super::decoder::{build_decoder, Decoder};
use super::encoders::{alice_encode, charlie_encode};
use super::gates::Protocol;
use crate::error::{Error, Result};
use crate::qop::{sample_index, PovmReport};

const CODEBOOK_DOMAIN: u64 = 0x6362_6f6f_6b73_0001;
const SOURCE_DOMAIN: u64 = 0x736f_7572_6365_0002;
const CHARLIE_DOMAIN: u64 = 0x6368_6172_6c69_0003;
const ALICE_DOMAIN: u64 = 0x616c_6963_6500_0004;
const MEASURE_DOMAIN: u64 = 0x6d65_6173_7572_0005;

/// Independent generator for (seed, domain, stream).
pub fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ domain);
    r.set_stream(stream);
    r
}

/// The codebook used for batch `batch` under `seed`.
pub fn codebook_for_batch(proto: &Protocol, seed: u64, batch: u64) -> Result<Codebook> {
    generate_codebooks(&proto.ext, &proto.params, &mut stream_rng(seed, CODEBOOK_DOMAIN, batch))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    /// Trials sharing one codebook draw.
    pub batch_size: usize,
    /// Use a single codebook (batch 0) for every trial.
    pub fixed_codebook: bool,
    /// Check every decoder built against the POVM invariants.
    pub validate_povm: bool,
    pub keep_traces: bool,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            batch_size: 1,
            fixed_codebook: false,
            validate_povm: false,
            keep_traces: true,
        }
    }
}

/// One transmission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTrace {
    pub trial: usize,
    pub m: usize,
    pub s_word: Vec<usize>,
    pub k_star: usize,
    pub ell_star: usize,
    pub x_word: Vec<usize>,
    pub decoded_ell: Option<usize>,
    pub decoded_m: Option<usize>,
    /// Charlie found no qualifying index.
    pub e1: bool,
    /// Alice found no qualifying index.
    pub e2: bool,
    pub error: bool,
}

/// Worst-case POVM diagnostics over several decoders.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PovmSummary {
    pub decoders: usize,
    pub worst: PovmReport,
}

impl PovmSummary {
    fn merge(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(Self {
                decoders: a.decoders + b.decoders,
                worst: PovmReport {
                    min_element_eigenvalue: a.worst.min_element_eigenvalue.min(b.worst.min_element_eigenvalue),
                    completion_min_eigenvalue: a.worst.completion_min_eigenvalue.min(b.worst.completion_min_eigenvalue),
                    completeness_deviation: a.worst.completeness_deviation.max(b.worst.completeness_deviation),
                },
            }),
        }
    }

    /// Meets the 1e-9 tolerance on every check.
    pub fn is_valid(&self) -> bool {
        self.worst.min_element_eigenvalue >= -1e-9
            && self.worst.completion_min_eigenvalue >= -1e-9
            && self.worst.completeness_deviation <= 1e-9
    }
}

/// A binomial proportion with its 95% Wilson interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Proportion {
    pub count: usize,
    pub trials: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// sqrt(p(1−p)/trials)
    pub std_error: f64,
}

impl Proportion {
    pub fn new(count: usize, trials: usize) -> Self {
        let p = if trials == 0 { 0.0 } else { count as f64 / trials as f64 };
        let (lo, hi) = wilson_interval(count, trials, 1.96);
        Self {
            count,
            trials,
            estimate: p,
            ci_low: lo,
            ci_high: hi,
            std_error: if trials == 0 {
                0.0
            } else {
                (p * (1.0 - p) / trials as f64).sqrt()
            },
        }
    }

    /// Wilson interval at z standard deviations.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.count, self.trials, z)
    }
}

/// Wilson score interval for k successes in n trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub fixed_codebook: bool,
    pub error: Proportion,
    /// Pr{E1}
    pub e1: Proportion,
    /// Pr{E1ᶜ ∩ E2}
    pub e1c_e2: Proportion,
    /// Completion outcomes observed.
    pub decode_failures: usize,
    pub povm: Option<PovmSummary>,
    #[serde(skip)]
    pub traces: Vec<TransmissionTrace>,
}

fn run_trial(
    proto: &Protocol,
    codebook: &Codebook,
    decoder: &Decoder,
    trial: usize,
    seed: u64,
) -> Result<TransmissionTrace> {
    let ext = &proto.ext;
    let t = trial as u64;
    let mut src = stream_rng(seed, SOURCE_DOMAIN, t);
    let m = src.gen_range(0..codebook.bin_count);
    let ds = WeightedIndex::new(&ext.law.p_s).map_err(|e| Error::InvalidDistribution(format!("p_s: {e}")))?;
    let s_word: Vec<usize> = (0..ext.n).map(|_| ds.sample(&mut src)).collect();

    let charlie = charlie_encode(proto, codebook, &s_word, &mut stream_rng(seed, CHARLIE_DOMAIN, t))?;
    let alice = alice_encode(proto, codebook, m, charlie.k, &mut stream_rng(seed, ALICE_DOMAIN, t))?;

    let factor = ext.channel.output_factor(&alice.x_word, &s_word)?;
    let probs = if 8 * factor.ncols() <= factor.nrows() {
        decoder.probabilities_factored(&factor)?
    } else {
        decoder.probabilities(&ext.channel.output_word(&alice.x_word, &s_word))?
    };
    let outcome = sample_index(&probs, &mut stream_rng(seed, MEASURE_DOMAIN, t));
    let decoded = bob_decode(outcome, codebook);
    let (decoded_ell, decoded_m) = match decoded {
        Decoded::Message(mm) => (Some(outcome), Some(mm)),
        Decoded::Failure => (None, None),
    };
    Ok(TransmissionTrace {
        trial,
        m,
        s_word,
        k_star: charlie.k,
        ell_star: alice.ell,
        x_word: alice.x_word,
        decoded_ell,
        decoded_m,
        e1: !charlie.found,
        e2: !alice.found,
        error: decoded_m != Some(m),
    })
}

fn decoder_for(proto: &Protocol, codebook: &Codebook, validate: bool) -> Result<(Decoder, Option<PovmSummary>)> {
    let d = build_decoder(&proto.ext, codebook, proto.params.lambda_a, proto.params.gamma)?;
    let summary = if validate {
        Some(PovmSummary {
            decoders: 1,
            worst: d.validate()?,
        })
    } else {
        None
    };
    Ok((d, summary))
}

fn summarize(
    proto: &Protocol,
    cfg: &SimConfig,
    traces: Vec<TransmissionTrace>,
    povm: Option<PovmSummary>,
) -> SimulationResult {
    let n_trials = traces.len();
    let errors = traces.iter().filter(|t| t.error).count();
    let e1 = traces.iter().filter(|t| t.e1).count();
    let e2 = traces.iter().filter(|t| !t.e1 && t.e2).count();
    let fails = traces.iter().filter(|t| t.decoded_m.is_none()).count();
    SimulationResult {
        n: proto.n(),
        trials: n_trials,
        seed: cfg.seed,
        fixed_codebook: cfg.fixed_codebook,
        error: Proportion::new(errors, n_trials),
        e1: Proportion::new(e1, n_trials),
        e1c_e2: Proportion::new(e2, n_trials),
        decode_failures: fails,
        povm,
        traces: if cfg.keep_traces { traces } else { Vec::new() },
    }
}

/// Monte Carlo estimate of the average error probability. Each batch of
/// `batch_size` trials draws a fresh codebook unless `fixed_codebook` is set.
pub fn simulate(proto: &Protocol, cfg: &SimConfig) -> Result<SimulationResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if cfg.fixed_codebook {
        let cb = codebook_for_batch(proto, cfg.seed, 0)?;
        return simulate_with_codebook(proto, &cb, cfg);
    }
    let bs = cfg.batch_size.max(1);
    let batches = cfg.trials.div_ceil(bs);
    let parts = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<(Vec<TransmissionTrace>, Option<PovmSummary>)> {
            let cb = codebook_for_batch(proto, cfg.seed, b as u64)?;
            let (dec, rep) = decoder_for(proto, &cb, cfg.validate_povm)?;
            let traces = (b * bs..((b + 1) * bs).min(cfg.trials))
                .map(|t| run_trial(proto, &cb, &dec, t, cfg.seed))
                .collect::<Result<Vec<_>>>()?;
            Ok((traces, rep))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut traces = Vec::with_capacity(cfg.trials);
    let mut povm = None;
    for (t, r) in parts {
        traces.extend(t);
        povm = PovmSummary::merge(povm, r);
    }
    Ok(summarize(proto, cfg, traces, povm))
}

/// Monte Carlo estimate for one given codebook.
pub fn simulate_with_codebook(proto: &Protocol, codebook: &Codebook, cfg: &SimConfig) -> Result<SimulationResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let (dec, povm) = decoder_for(proto, codebook, cfg.validate_povm)?;
    let traces = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(proto, codebook, &dec, t, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = cfg.clone();
    cfg.fixed_codebook = true;
    Ok(summarize(proto, &cfg, traces, povm))
}

fn word(w: &[usize]) -> String {
    w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-trial traces as CSV.
pub fn write_traces_csv<W: Write>(traces: &[TransmissionTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "m",
        "s_word",
        "k_star",
        "ell_star",
        "x_word",
        "decoded_ell",
        "decoded_m",
        "e1",
        "e2",
        "error",
    ])?;
    for t in traces {
        w.write_record([
            t.trial.to_string(),
            t.m.to_string(),
            word(&t.s_word),
            t.k_star.to_string(),
            t.ell_star.to_string(),
            word(&t.x_word),
            opt(t.decoded_ell),
            opt(t.decoded_m),
            t.e1.to_string(),
            t.e2.to_string(),
            t.error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
