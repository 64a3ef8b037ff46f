use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::params::ProtocolParams;
use crate::error::{Error, Result};
use crate::infospec::sum_tail;
use crate::model::ProductExtension;
use crate::qop::trace_product;

/// Enumeration for g2 stops once the unvisited conditional mass is below this.
pub const G2_RESIDUAL: f64 = 1e-6;

fn check_ts(ext: &ProductExtension, ts_word: &[usize]) -> Result<()> {
    if ts_word.len() != ext.n {
        return Err(Error::DimensionMismatch(format!(
            "s~-word of length {} for n = {}",
            ts_word.len(),
            ext.n
        )));
    }
    if ts_word
        .iter()
        .any(|&t| t >= ext.p_ts_letter().len() || ext.p_ts_letter()[t] <= 0.0)
    {
        return Err(Error::ZeroProbability(format!("s~-word {ts_word:?}")));
    }
    Ok(())
}

/// Conditional mass of u-words outside T_n(p_{US̃}), i.e. with
/// (1/n) log₂ p(u|s̃)/p(u) > bound + γ. Exact, by convolution over positions.
pub fn g1(ext: &ProductExtension, ts_word: &[usize], bound: f64, gamma: f64) -> Result<f64> {
    check_ts(ext, ts_word)?;
    let pu = ext.p_u_letter();
    let per_ts: Vec<Vec<(f64, f64)>> = (0..ext.p_ts_letter().len())
        .map(|t| {
            ext.law.p_u_given_ts[t]
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(u, &p)| ((p / pu[u]).log2(), p))
                .collect()
        })
        .collect();
    let letters: Vec<&[(f64, f64)]> = ts_word.iter().map(|&t| per_ts[t].as_slice()).collect();
    Ok(sum_tail(&letters, ext.n as f64 * (bound + gamma)))
}

/// g2 as an interval: `lower` is the exact sum over the enumerated u-words and
/// `residual` bounds the mass of the words not visited.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct G2Interval {
    pub lower: f64,
    pub residual: f64,
    pub visited: usize,
}

impl G2Interval {
    pub fn upper(&self) -> f64 {
        (self.lower + self.residual).min(1.0)
    }
}

/// Tr[Λ_u ρ_{u,s̃}].
pub fn test_value(ext: &ProductExtension, u_word: &[usize], ts_word: &[usize], a: f64, gamma: f64) -> Result<f64> {
    let lam = ext.lambda_operator(u_word, a, gamma)?;
    let rho = ext.induced_output_state(u_word, ts_word)?;
    Ok(trace_product(&lam, &rho).clamp(0.0, 1.0))
}

struct Node {
    prob: f64,
    idx: Vec<usize>,
    pivot: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob.total_cmp(&other.prob).then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Visits words of a product distribution in non-increasing probability until
/// the unvisited mass drops below `residual` (or every word is visited).
/// Returns the remaining mass.
pub fn visit_by_probability(
    letters: &[Vec<(usize, f64)>],
    residual: f64,
    mut visit: impl FnMut(&[usize], f64) -> Result<()>,
) -> Result<f64> {
    let sorted: Vec<Vec<(usize, f64)>> = letters
        .iter()
        .map(|l| {
            let mut v: Vec<(usize, f64)> = l.iter().copied().filter(|e| e.1 > 0.0).collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v
        })
        .collect();
    if sorted.iter().any(|v| v.is_empty()) {
        return Ok(0.0);
    }
    let n = sorted.len();
    let prob_of = |idx: &[usize]| idx.iter().enumerate().map(|(i, &j)| sorted[i][j].1).product::<f64>();
    let mut heap = BinaryHeap::new();
    let start = vec![0usize; n];
    heap.push(Node {
        prob: prob_of(&start),
        idx: start,
        pivot: 0,
    });
    let mut seen = 0.0;
    let mut word = vec![0usize; n];
    while let Some(node) = heap.pop() {
        for (i, &j) in node.idx.iter().enumerate() {
            word[i] = sorted[i][j].0;
        }
        visit(&word, node.prob)?;
        seen += node.prob;
        // Canonical successors: increment positions at or after the pivot.
        for p in node.pivot..n {
            if node.idx[p] + 1 < sorted[p].len() {
                let mut idx = node.idx.clone();
                idx[p] += 1;
                heap.push(Node {
                    prob: prob_of(&idx),
                    idx,
                    pivot: p,
                });
            }
        }
        if 1.0 - seen < residual {
            break;
        }
    }
    Ok(if heap.is_empty() { 0.0 } else { (1.0 - seen).max(0.0) })
}

/// Σ p(u|s̃) over u-words with Tr[Λ_u ρ_{u,s̃}] ≤ 1 − √ε, by best-first enumeration.
pub fn g2(ext: &ProductExtension, ts_word: &[usize], a: f64, gamma: f64, eps: f64) -> Result<G2Interval> {
    g2_with(ext, ts_word, eps, |u| test_value(ext, u, ts_word, a, gamma))
}

fn g2_with(
    ext: &ProductExtension,
    ts_word: &[usize],
    eps: f64,
    mut value: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<G2Interval> {
    check_ts(ext, ts_word)?;
    let letters: Vec<Vec<(usize, f64)>> = ts_word
        .iter()
        .map(|&t| ext.law.p_u_given_ts[t].iter().copied().enumerate().collect())
        .collect();
    let cut = 1.0 - eps.sqrt();
    let mut lower = 0.0;
    let mut visited = 0;
    let residual = visit_by_probability(&letters, G2_RESIDUAL, |u, p| {
        visited += 1;
        if value(u)? <= cut {
            lower += p;
        }
        Ok(())
    })?;
    Ok(G2Interval {
        lower: lower.min(1.0),
        residual,
        visited,
    })
}

type Word = Vec<usize>;

/// Extension, parameters and the memoized gate values for one experiment.
pub struct Protocol {
    pub ext: ProductExtension,
    pub params: ProtocolParams,
    g1_cache: RwLock<HashMap<Word, f64>>,
    g2_cache: RwLock<HashMap<Word, G2Interval>>,
    g_cache: RwLock<HashMap<(Word, Word), f64>>,
}

impl Protocol {
    pub fn new(ext: ProductExtension, params: ProtocolParams) -> Result<Self> {
        if ext.n != params.n {
            return Err(Error::DimensionMismatch(format!(
                "params n = {} vs extension n = {}",
                params.n, ext.n
            )));
        }
        Ok(Self {
            ext,
            params,
            g1_cache: RwLock::new(HashMap::new()),
            g2_cache: RwLock::new(HashMap::new()),
            g_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn g1(&self, ts_word: &[usize]) -> Result<f64> {
        if let Some(v) = self.g1_cache.read().get(ts_word) {
            return Ok(*v);
        }
        let v = g1(&self.ext, ts_word, self.params.bound_u_ts, self.params.gamma)?;
        self.g1_cache.write().insert(ts_word.to_vec(), v);
        Ok(v)
    }

    /// g(u, s̃) = Tr[Λ_u ρ_{u,s̃}], memoized.
    pub fn g(&self, u_word: &[usize], ts_word: &[usize]) -> Result<f64> {
        let key = (u_word.to_vec(), ts_word.to_vec());
        if let Some(v) = self.g_cache.read().get(&key) {
            return Ok(*v);
        }
        let v = test_value(&self.ext, u_word, ts_word, self.params.lambda_a, self.params.gamma)?;
        self.g_cache.write().insert(key, v);
        Ok(v)
    }

    pub fn g2(&self, ts_word: &[usize]) -> Result<G2Interval> {
        if let Some(v) = self.g2_cache.read().get(ts_word) {
            return Ok(*v);
        }
        let v = g2_with(&self.ext, ts_word, self.params.eps, |u| self.g(u, ts_word))?;
        self.g2_cache.write().insert(ts_word.to_vec(), v);
        Ok(v)
    }

    /// g1 < √ε and g2 < ε^{1/4}, with g2 taken at the upper end of its interval.
    /// g2 is only evaluated when the g1 gate passes.
    pub fn charlie_gate(&self, ts_word: &[usize]) -> Result<bool> {
        let eps = self.params.eps;
        if self.g1(ts_word)? >= eps.sqrt() {
            return Ok(false);
        }
        Ok(self.g2(ts_word)?.upper() < eps.powf(0.25))
    }

    pub fn cached_gate_counts(&self) -> (usize, usize, usize) {
        (
            self.g1_cache.read().len(),
            self.g2_cache.read().len(),
            self.g_cache.read().len(),
        )
    }
}
