//! Information-spectrum functionals and the iid single-letter oracles.
//!
//! Everything is in bits. Sums of per-letter log-ratios are accumulated
//! on a fixed lattice (1e-9 bit) so that exact convolutions can merge equal
//! partial sums.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qop::{eigh, rank_one_spectral_value, spectral_test, tensor_density, DensityOperator};

/// Lattice spacing for log-ratio sums, in bits.
pub const LATTICE: f64 = 1e-9;

/// Slack used for the `≤` comparison in typical-set membership.
pub const BOUNDARY_TOL: f64 = 1e-12;

fn key(v: f64) -> i64 {
    (v / LATTICE).round() as i64
}

/// Exact distribution of Σᵢ Vᵢ for independent finite-valued Vᵢ, returned as
/// (lattice key, probability) pairs. Each letter is a list of (value, prob).
pub fn sum_distribution(letters: &[&[(f64, f64)]]) -> Vec<(i64, f64)> {
    let mut acc: HashMap<i64, f64> = HashMap::from([(0, 1.0)]);
    for letter in letters {
        let mut next: HashMap<i64, f64> = HashMap::with_capacity(acc.len() * letter.len());
        for (&k, &p) in &acc {
            for &(v, q) in letter.iter() {
                if q > 0.0 {
                    *next.entry(k + key(v)).or_insert(0.0) += p * q;
                }
            }
        }
        acc = next;
    }
    let mut out: Vec<(i64, f64)> = acc.into_iter().collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Pr{Σᵢ Vᵢ > total} by exact convolution.
pub fn sum_tail(letters: &[&[(f64, f64)]], total: f64) -> f64 {
    let cut = key(total);
    sum_distribution(letters)
        .into_iter()
        .filter(|(k, _)| *k > cut)
        .map(|(_, p)| p)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Per-letter joint pmf p(a,b) and a block length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalPair {
    /// `[a][b]`
    pub joint: Vec<Vec<f64>>,
    pub n: usize,
}

impl ClassicalPair {
    pub fn new(joint: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        if joint.is_empty() || joint[0].is_empty() || joint.iter().any(|r| r.len() != joint[0].len()) {
            return Err(Error::InvalidDistribution(
                "joint pmf must be a non-empty rectangle".into(),
            ));
        }
        if joint.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(
                "joint pmf has a negative or non-finite entry".into(),
            ));
        }
        let s: f64 = joint.iter().flatten().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("joint pmf sums to {s}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        Ok(Self { joint, n })
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self {
            joint: self.joint.clone(),
            n,
        }
    }

    pub fn p_a(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn p_b(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.joint[0].len()];
        for r in &self.joint {
            for (j, p) in r.iter().enumerate() {
                out[j] += p;
            }
        }
        out
    }

    /// log₂ p(a,b)/(p(a)p(b)) for every (a,b) with p(a,b) > 0, with its mass.
    pub fn letter_ratios(&self) -> Vec<(f64, f64)> {
        let (pa, pb) = (self.p_a(), self.p_b());
        let mut out = Vec::new();
        for (a, r) in self.joint.iter().enumerate() {
            for (b, &p) in r.iter().enumerate() {
                if p > 0.0 {
                    out.push(((p / (pa[a] * pb[b])).log2(), p));
                }
            }
        }
        out
    }
}

/// (1/n) Σᵢ log₂ p(aᵢ,bᵢ)/(p(aᵢ)p(bᵢ)).
pub fn log_likelihood_ratio(pair: &ClassicalPair, a_word: &[usize], b_word: &[usize]) -> Result<f64> {
    if a_word.len() != pair.n || b_word.len() != pair.n {
        return Err(Error::DimensionMismatch(format!(
            "words of length {} and {} for n = {}",
            a_word.len(),
            b_word.len(),
            pair.n
        )));
    }
    let (pa, pb) = (pair.p_a(), pair.p_b());
    let mut total = 0.0;
    for (&a, &b) in a_word.iter().zip(b_word) {
        let p = pair.joint.get(a).and_then(|r| r.get(b)).copied().unwrap_or(0.0);
        if p <= 0.0 {
            return Err(Error::ZeroProbability(format!("letter pair ({a}, {b})")));
        }
        total += (p / (pa[a] * pb[b])).log2();
    }
    Ok(total / pair.n as f64)
}

/// Exact Pr{(1/n) Σ per-letter ratios > a} under the iid joint law.
pub fn tail_probability(pair: &ClassicalPair, a: f64) -> f64 {
    let letter = pair.letter_ratios();
    let letters: Vec<&[(f64, f64)]> = vec![&letter; pair.n];
    sum_tail(&letters, pair.n as f64 * a)
}

/// Membership in the typical-set analog: ratio ≤ bound + γ.
pub fn in_typical_set(
    pair: &ClassicalPair,
    a_word: &[usize],
    b_word: &[usize],
    bound: f64,
    gamma: f64,
) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(log_likelihood_ratio(pair, a_word, b_word)? <= bound + gamma + BOUNDARY_TOL)
}

/// Finite-n spectral curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub n: usize,
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectralEstimate {
    /// Largest grid point whose value is at least 1 − δ.
    pub fn crossing(&self, delta: f64) -> Option<f64> {
        self.grid
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v >= 1.0 - delta)
            .map(|(a, _)| *a)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
    }

    /// Largest increase between consecutive grid points (0 for a non-increasing curve).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Default δ for crossing summaries.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Tr[{ρₙ ⪰ 2^{n(a−γ)} σₙ} ρₙ] over a grid of a.
pub fn quantum_trace_curve(
    rho_n: &DensityOperator,
    sigma_n: &DensityOperator,
    n: usize,
    a_grid: &[f64],
    gamma: f64,
) -> Result<SpectralEstimate> {
    if rho_n.dim() != sigma_n.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rho has dim {}, sigma has dim {}",
            rho_n.dim(),
            sigma_n.dim()
        )));
    }
    let values = a_grid
        .par_iter()
        .map(|&a| spectral_test(rho_n, sigma_n, (n as f64 * (a - gamma)).exp2()).map(|(_, v)| v))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralEstimate {
        n,
        gamma,
        grid: a_grid.to_vec(),
        values,
    })
}

/// Multiset of letter counts with its multinomial coefficient.
fn type_classes(q: usize, n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(q: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(q, left - c, cur, out);
            cur.pop();
        }
    }
    let mut counts = Vec::new();
    rec(q, n, &mut Vec::new(), &mut counts);
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    counts
        .into_iter()
        .map(|c| {
            let coef = (ln_fact(n) - c.iter().map(|&k| ln_fact(k)).sum::<f64>()).exp();
            (c, coef)
        })
        .collect()
}

/// The trace curve for Θ^{U^nB^n} against Θ^{U^n} ⊗ Θ_B^{⊗n} for an iid
/// cq ensemble {p(u), ρ_u}. The value depends on u-words only through their
/// type, so one representative per type class is evaluated. Pure ensembles
/// use the rank-one route in the eigenbasis of Θ_B.
pub fn cq_iid_trace_curve(
    ensemble: &[(f64, DensityOperator)],
    n: usize,
    a_grid: &[f64],
    gamma: f64,
) -> Result<SpectralEstimate> {
    check_ensemble(ensemble)?;
    let d = ensemble[0].1.dim();
    let theta = DensityOperator::mixture(ensemble.iter().map(|(p, r)| (*p, r)))?;
    let q = ensemble.len();
    let classes = type_classes(q, n);
    let te = eigh(&theta);
    let pure_vecs: Option<Vec<Vec<f64>>> = ensemble
        .iter()
        .map(|(_, r)| {
            let e = eigh(r);
            if (e.values[0] - 1.0).abs() < 1e-12 {
                let v = e.vectors.column(0);
                // Squared overlaps with Θ_B's eigenvectors.
                Some((0..d).map(|j| te.vectors.column(j).dotc(&v).norm_sqr()).collect())
            } else {
                None
            }
        })
        .collect();
    let theta_n = tensor_density(std::iter::repeat(&theta).take(n))
        .ok_or_else(|| Error::InvalidParameter("block length must be at least 1".into()));
    let theta_eigs_n = product_spectrum(&te.values, n);

    let mut values = vec![0.0; a_grid.len()];
    for (counts, coef) in classes {
        let p_word: f64 = counts
            .iter()
            .enumerate()
            .map(|(u, &c)| ensemble[u].0.powi(c as i32))
            .product();
        let mass = coef * p_word;
        if mass == 0.0 {
            continue;
        }
        let word: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(u, &c)| std::iter::repeat(u).take(c))
            .collect();
        let class_vals: Vec<f64> = match &pure_vecs {
            Some(ov) => {
                let weights = product_weights(&word.iter().map(|&u| ov[u].as_slice()).collect::<Vec<_>>());
                a_grid
                    .par_iter()
                    .map(|&a| rank_one_spectral_value(&weights, &theta_eigs_n, (n as f64 * (a - gamma)).exp2()))
                    .collect()
            }
            None => {
                let theta_n = theta_n.as_ref().map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let rho = tensor_density(word.iter().map(|&u| &ensemble[u].1)).expect("n >= 1");
                quantum_trace_curve(&rho, theta_n, n, a_grid, gamma)?.values
            }
        };
        for (v, c) in values.iter_mut().zip(class_vals) {
            *v += mass * c;
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(SpectralEstimate {
        n,
        gamma,
        grid: a_grid.to_vec(),
        values,
    })
}

fn product_spectrum(eigs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        out = out.iter().flat_map(|&x| eigs.iter().map(move |&e| x * e)).collect();
    }
    out
}

fn product_weights(letters: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![1.0];
    for l in letters {
        out = out.iter().flat_map(|&x| l.iter().map(move |&w| x * w)).collect();
    }
    out
}

fn check_ensemble(ensemble: &[(f64, DensityOperator)]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::InvalidDistribution("empty ensemble".into()));
    }
    let s: f64 = ensemble.iter().map(|e| e.0).sum();
    if (s - 1.0).abs() > 1e-12 || ensemble.iter().any(|e| !(e.0 >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("ensemble probabilities sum to {s}")));
    }
    let d = ensemble[0].1.dim();
    if ensemble.iter().any(|e| e.1.dim() != d) {
        return Err(Error::DimensionMismatch("ensemble states differ in dimension".into()));
    }
    Ok(())
}

/// Writes curves as CSV with columns n, a, value.
pub fn write_curves_csv<W: Write>(curves: &[SpectralEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "a", "value"])?;
    for c in curves {
        for (a, v) in c.grid.iter().zip(&c.values) {
            w.write_record([c.n.to_string(), format!("{a}"), format!("{v}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Evenly spaced grid including both ends.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

/// −p log₂ p − (1−p) log₂(1−p).
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Σ p(a,b) log₂ p(a,b)/(p(a)p(b)).
pub fn mutual_information(pair: &ClassicalPair) -> f64 {
    pair.letter_ratios().iter().map(|(r, p)| p * r).sum::<f64>().max(0.0)
}

/// Mutual information of a joint pmf given as `[a][b]` rows, without validation.
pub fn mutual_information_joint(joint: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let mut pb = vec![0.0; joint.first().map_or(0, |r| r.len())];
    for r in joint {
        for (j, p) in r.iter().enumerate() {
            pb[j] += p;
        }
    }
    let mut total = 0.0;
    for (a, r) in joint.iter().enumerate() {
        for (b, &p) in r.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    total.max(0.0)
}

/// S(ρ) = −Tr ρ log₂ ρ.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    shannon_entropy(&eigh(rho).values)
}

/// S(Σ p(u)ρ_u) − Σ p(u) S(ρ_u).
pub fn holevo_information(ensemble: &[(f64, DensityOperator)]) -> Result<f64> {
    check_ensemble(ensemble)?;
    let avg = DensityOperator::mixture(ensemble.iter().map(|(p, r)| (*p, r)))?;
    let inner: f64 = ensemble.iter().map(|(p, r)| p * von_neumann_entropy(r)).sum();
    Ok((von_neumann_entropy(&avg) - inner).max(0.0))
}
