//! Channel model, the factorized joint law p(s)p(s̃|s)p(u|s̃)p(x|u,s̃), and
//! the iid n-fold extension with its derived states.
//!
//! Classical registers are never materialized as quantum registers; the
//! cq state Θ^{UB} is kept as a list of (probability, conditional state)
//! blocks indexed by the u-word.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qop::{
    self, nonneg_eigenspace_basis, nonneg_eigenspace_projector, projector_from_basis, psd_factor, tensor_all,
    tensor_density, CMatrix, DensityOperator, HermitianOperator, MatrixJson, Projector,
};

/// Row-sum tolerance for stochastic arrays.
pub const ROW_TOL: f64 = 1e-12;

pub(crate) fn check_row(row: &[f64], what: &str) -> Result<()> {
    if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "{what}[{j}] = {v} is not a probability"
        )));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// p(s) p(s̃|s) p(u|s̃) p(x|u,s̃).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JointLaw {
    pub p_s: Vec<f64>,
    /// `[s][s̃]`
    pub p_ts_given_s: Vec<Vec<f64>>,
    /// `[s̃][u]`
    pub p_u_given_ts: Vec<Vec<f64>>,
    /// `[u][s̃][x]`
    pub p_x_given_u_ts: Vec<Vec<Vec<f64>>>,
}

impl JointLaw {
    pub fn new(
        p_s: Vec<f64>,
        p_ts_given_s: Vec<Vec<f64>>,
        p_u_given_ts: Vec<Vec<f64>>,
        p_x_given_u_ts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let law = Self {
            p_s,
            p_ts_given_s,
            p_u_given_ts,
            p_x_given_u_ts,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        check_row(&self.p_s, "p_s")?;
        if self.p_ts_given_s.len() != self.s_size() {
            return Err(Error::InvalidDistribution(format!(
                "p_ts_given_s has {} rows, expected |S| = {}",
                self.p_ts_given_s.len(),
                self.s_size()
            )));
        }
        let ts = self.ts_size();
        for (s, row) in self.p_ts_given_s.iter().enumerate() {
            if row.len() != ts {
                return Err(Error::InvalidDistribution(format!(
                    "p_ts_given_s[{s}] has wrong length"
                )));
            }
            check_row(row, &format!("p_ts_given_s[{s}]"))?;
        }
        if self.p_u_given_ts.len() != ts {
            return Err(Error::InvalidDistribution(format!(
                "p_u_given_ts has {} rows, expected |S~| = {ts}",
                self.p_u_given_ts.len()
            )));
        }
        let u = self.u_size();
        for (t, row) in self.p_u_given_ts.iter().enumerate() {
            if row.len() != u {
                return Err(Error::InvalidDistribution(format!(
                    "p_u_given_ts[{t}] has wrong length"
                )));
            }
            check_row(row, &format!("p_u_given_ts[{t}]"))?;
        }
        if self.p_x_given_u_ts.len() != u {
            return Err(Error::InvalidDistribution(format!(
                "p_x_given_u_ts has {} blocks, expected |U| = {u}",
                self.p_x_given_u_ts.len()
            )));
        }
        let x = self.x_size();
        for (ui, block) in self.p_x_given_u_ts.iter().enumerate() {
            if block.len() != ts {
                return Err(Error::InvalidDistribution(format!(
                    "p_x_given_u_ts[{ui}] has wrong length"
                )));
            }
            for (t, row) in block.iter().enumerate() {
                if row.len() != x {
                    return Err(Error::InvalidDistribution(format!(
                        "p_x_given_u_ts[{ui}][{t}] has wrong length"
                    )));
                }
                check_row(row, &format!("p_x_given_u_ts[{ui}][{t}]"))?;
            }
        }
        for (t, p) in self.p_ts().iter().enumerate() {
            if *p <= 0.0 {
                return Err(Error::ZeroProbability(format!("marginal p(s~ = {t}) = 0")));
            }
        }
        Ok(())
    }

    pub fn s_size(&self) -> usize {
        self.p_s.len()
    }
    pub fn ts_size(&self) -> usize {
        self.p_ts_given_s.first().map_or(0, |r| r.len())
    }
    pub fn u_size(&self) -> usize {
        self.p_u_given_ts.first().map_or(0, |r| r.len())
    }
    pub fn x_size(&self) -> usize {
        self.p_x_given_u_ts
            .first()
            .and_then(|b| b.first())
            .map_or(0, |r| r.len())
    }

    pub fn p_ts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ts_size()];
        for (s, row) in self.p_ts_given_s.iter().enumerate() {
            for (t, p) in row.iter().enumerate() {
                out[t] += self.p_s[s] * p;
            }
        }
        out
    }

    pub fn p_u(&self) -> Vec<f64> {
        let pt = self.p_ts();
        let mut out = vec![0.0; self.u_size()];
        for (t, row) in self.p_u_given_ts.iter().enumerate() {
            for (u, p) in row.iter().enumerate() {
                out[u] += pt[t] * p;
            }
        }
        out
    }

    /// Bayes rule: `[s̃][s]`.
    pub fn p_s_given_ts(&self) -> Vec<Vec<f64>> {
        let pt = self.p_ts();
        (0..self.ts_size())
            .map(|t| {
                (0..self.s_size())
                    .map(|s| self.p_s[s] * self.p_ts_given_s[s][t] / pt[t])
                    .collect()
            })
            .collect()
    }

    /// `[u][s̃]`; rows of zero-probability u are all zero.
    pub fn p_ts_given_u(&self) -> Vec<Vec<f64>> {
        let pt = self.p_ts();
        let pu = self.p_u();
        (0..self.u_size())
            .map(|u| {
                (0..self.ts_size())
                    .map(|t| {
                        if pu[u] > 0.0 {
                            pt[t] * self.p_u_given_ts[t][u] / pu[u]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Joint p(s, s̃) as `[s][s̃]`.
    pub fn joint_s_ts(&self) -> Vec<Vec<f64>> {
        self.p_ts_given_s
            .iter()
            .enumerate()
            .map(|(s, row)| row.iter().map(|p| self.p_s[s] * p).collect())
            .collect()
    }

    /// Joint p(u, s̃) as `[u][s̃]`.
    pub fn joint_u_ts(&self) -> Vec<Vec<f64>> {
        let pt = self.p_ts();
        (0..self.u_size())
            .map(|u| (0..self.ts_size()).map(|t| pt[t] * self.p_u_given_ts[t][u]).collect())
            .collect()
    }
}

/// Finite-alphabet cq channel (x, s) → ρ^B_{x,s}.
#[derive(Clone, Debug)]
pub struct CqGpChannel {
    pub x_labels: Vec<String>,
    pub s_labels: Vec<String>,
    pub dim_b: usize,
    /// `[x][s]`
    pub outputs: Vec<Vec<DensityOperator>>,
}

impl CqGpChannel {
    pub fn new(x_labels: Vec<String>, s_labels: Vec<String>, outputs: Vec<Vec<DensityOperator>>) -> Result<Self> {
        if outputs.len() != x_labels.len() || x_labels.is_empty() || s_labels.is_empty() {
            return Err(Error::Validation(format!(
                "outputs has {} rows for {} input symbols",
                outputs.len(),
                x_labels.len()
            )));
        }
        let dim_b = outputs[0].first().map(|o| o.dim()).unwrap_or(0);
        for (x, row) in outputs.iter().enumerate() {
            if row.len() != s_labels.len() {
                return Err(Error::Validation(format!(
                    "outputs[{x}] has {} entries for {} states",
                    row.len(),
                    s_labels.len()
                )));
            }
            if let Some(s) = row.iter().position(|o| o.dim() != dim_b) {
                return Err(Error::Validation(format!("outputs[{x}][{s}] has dimension mismatch")));
            }
        }
        Ok(Self {
            x_labels,
            s_labels,
            dim_b,
            outputs,
        })
    }

    /// Channel with a single trivial state.
    pub fn stateless(outputs: Vec<DensityOperator>) -> Result<Self> {
        let x_labels = (0..outputs.len()).map(|i| i.to_string()).collect();
        Self::new(
            x_labels,
            vec!["0".into()],
            outputs.into_iter().map(|o| vec![o]).collect(),
        )
    }

    pub fn x_size(&self) -> usize {
        self.x_labels.len()
    }
    pub fn s_size(&self) -> usize {
        self.s_labels.len()
    }

    pub fn output(&self, x: usize, s: usize) -> &DensityOperator {
        &self.outputs[x][s]
    }

    /// ⊗ᵢ ρ_{xᵢ,sᵢ}
    pub fn output_word(&self, x_word: &[usize], s_word: &[usize]) -> DensityOperator {
        tensor_density(x_word.iter().zip(s_word).map(|(&x, &s)| &self.outputs[x][s])).expect("non-empty word")
    }

    /// A factor F of ⊗ᵢ ρ_{xᵢ,sᵢ} with F F† equal to the word state; its column
    /// count is the product of the letter ranks.
    pub fn output_factor(&self, x_word: &[usize], s_word: &[usize]) -> Result<CMatrix> {
        let mut f = CMatrix::identity(1, 1);
        for (&x, &s) in x_word.iter().zip(s_word) {
            f = f.kronecker(&psd_factor(&self.outputs[x][s])?);
        }
        Ok(f)
    }

    pub fn all_diagonal(&self) -> bool {
        self.outputs.iter().flatten().all(|o| o.is_diagonal())
    }
}

/// On-disk channel + law document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    #[serde(default)]
    pub x_alphabet: Vec<String>,
    #[serde(default)]
    pub s_alphabet: Vec<String>,
    pub dim_b: usize,
    /// `outputs[x][s]` as a complex matrix.
    pub outputs: Vec<Vec<MatrixJson>>,
    pub p_s: Vec<f64>,
    pub p_ts_given_s: Vec<Vec<f64>>,
    pub p_u_given_ts: Vec<Vec<f64>>,
    pub p_x_given_u_ts: Vec<Vec<Vec<f64>>>,
}

impl ChannelFile {
    pub fn from_parts(channel: &CqGpChannel, law: &JointLaw) -> Self {
        Self {
            x_alphabet: channel.x_labels.clone(),
            s_alphabet: channel.s_labels.clone(),
            dim_b: channel.dim_b,
            outputs: channel
                .outputs
                .iter()
                .map(|row| row.iter().map(|o| qop::matrix_to_json(o.matrix())).collect())
                .collect(),
            p_s: law.p_s.clone(),
            p_ts_given_s: law.p_ts_given_s.clone(),
            p_u_given_ts: law.p_u_given_ts.clone(),
            p_x_given_u_ts: law.p_x_given_u_ts.clone(),
        }
    }

    /// Validates and converts; messages name the offending entry.
    pub fn into_parts(self) -> Result<(CqGpChannel, JointLaw)> {
        let x_size = self.outputs.len();
        let s_size = self.outputs.first().map_or(0, |r| r.len());
        let x_labels = if self.x_alphabet.is_empty() {
            (0..x_size).map(|i| i.to_string()).collect()
        } else {
            self.x_alphabet.clone()
        };
        let s_labels = if self.s_alphabet.is_empty() {
            (0..s_size).map(|i| i.to_string()).collect()
        } else {
            self.s_alphabet.clone()
        };
        if x_labels.len() != x_size {
            return Err(Error::Validation(format!(
                "x_alphabet has {} symbols but outputs has {x_size} rows",
                x_labels.len()
            )));
        }
        let mut outputs = Vec::with_capacity(x_size);
        for (x, row) in self.outputs.iter().enumerate() {
            if row.len() != s_labels.len() {
                return Err(Error::Validation(format!(
                    "outputs[{x}] has {} entries, expected |S| = {}",
                    row.len(),
                    s_labels.len()
                )));
            }
            let mut out_row = Vec::with_capacity(row.len());
            for (s, m) in row.iter().enumerate() {
                let ctx = |e: Error| Error::Validation(format!("outputs[{x}][{s}]: {e}"));
                let mat = qop::matrix_from_json(m).map_err(ctx)?;
                if mat.nrows() != self.dim_b {
                    return Err(Error::Validation(format!(
                        "outputs[{x}][{s}] is {}x{}, expected dim_b = {}",
                        mat.nrows(),
                        mat.ncols(),
                        self.dim_b
                    )));
                }
                let h = HermitianOperator::new(mat).map_err(ctx)?;
                out_row.push(DensityOperator::new(h).map_err(ctx)?);
            }
            outputs.push(out_row);
        }
        let channel = CqGpChannel::new(x_labels, s_labels, outputs)?;
        let law = JointLaw::new(self.p_s, self.p_ts_given_s, self.p_u_given_ts, self.p_x_given_u_ts)
            .map_err(|e| Error::Validation(e.to_string()))?;
        if law.s_size() != channel.s_size() {
            return Err(Error::Validation(format!(
                "p_s has {} entries but the channel has {} states",
                law.s_size(),
                channel.s_size()
            )));
        }
        if law.x_size() != channel.x_size() {
            return Err(Error::Validation(format!(
                "p_x_given_u_ts rows have {} entries but the channel has {} inputs",
                law.x_size(),
                channel.x_size()
            )));
        }
        Ok((channel, law))
    }

    pub fn load(path: &Path) -> Result<(CqGpChannel, JointLaw)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read channel file {}: {e}", path.display())))?;
        let file: ChannelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("channel file {}: {e}", path.display())))?;
        file.into_parts()
    }
}

type LambdaKey = (Vec<usize>, u64, u64);

#[derive(Clone, Debug)]
struct LambdaEntry {
    projector: Arc<Projector>,
    range: Arc<CMatrix>,
}

/// The iid n-fold extension of a channel and law.
///
/// Single-letter building blocks are precomputed; n-letter states are
/// tensor products of them. Λ operators are memoized per u-word.
#[derive(Debug)]
pub struct ProductExtension {
    pub n: usize,
    pub law: JointLaw,
    pub channel: CqGpChannel,
    p_s_given_ts: Vec<Vec<f64>>,
    p_ts: Vec<f64>,
    p_u: Vec<f64>,
    /// ρ_{u,s̃} single letter, `[u][s̃]`.
    letter_states: Vec<Vec<DensityOperator>>,
    /// ρ_{B|u} single letter (zero-probability u get the maximally mixed state).
    cond_b: Vec<DensityOperator>,
    theta_b: DensityOperator,
    lambda_cache: RwLock<HashMap<LambdaKey, LambdaEntry>>,
}

impl Clone for ProductExtension {
    fn clone(&self) -> Self {
        Self::new(self.n, self.law.clone(), self.channel.clone()).expect("validated")
    }
}

impl ProductExtension {
    pub fn new(n: usize, law: JointLaw, channel: CqGpChannel) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length n must be at least 1".into()));
        }
        law.validate()?;
        if law.s_size() != channel.s_size() || law.x_size() != channel.x_size() {
            return Err(Error::DimensionMismatch("law and channel alphabets differ".into()));
        }
        let p_s_given_ts = law.p_s_given_ts();
        let p_ts = law.p_ts();
        let p_u = law.p_u();
        let p_ts_given_u = law.p_ts_given_u();
        let mut letter_states = Vec::with_capacity(law.u_size());
        for u in 0..law.u_size() {
            let mut row = Vec::with_capacity(law.ts_size());
            for t in 0..law.ts_size() {
                let mut parts = Vec::new();
                for s in 0..law.s_size() {
                    for x in 0..law.x_size() {
                        let w = p_s_given_ts[t][s] * law.p_x_given_u_ts[u][t][x];
                        if w > 0.0 {
                            parts.push((w, channel.output(x, s)));
                        }
                    }
                }
                row.push(DensityOperator::mixture(parts)?);
            }
            letter_states.push(row);
        }
        let cond_b = (0..law.u_size())
            .map(|u| {
                if p_u[u] > 0.0 {
                    DensityOperator::mixture(
                        (0..law.ts_size())
                            .filter(|&t| p_ts_given_u[u][t] > 0.0)
                            .map(|t| (p_ts_given_u[u][t], &letter_states[u][t])),
                    )
                } else {
                    Ok(DensityOperator::maximally_mixed(channel.dim_b))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let theta_b = DensityOperator::mixture(
            (0..law.u_size())
                .filter(|&u| p_u[u] > 0.0)
                .map(|u| (p_u[u], &cond_b[u])),
        )?;
        Ok(Self {
            n,
            law,
            channel,
            p_s_given_ts,
            p_ts,
            p_u,
            letter_states,
            cond_b,
            theta_b,
            lambda_cache: RwLock::new(HashMap::new()),
        })
    }

    /// Same law and channel at another block length.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.law.clone(), self.channel.clone())
    }

    pub fn dim_b(&self) -> usize {
        self.channel.dim_b
    }

    /// d_B^n
    pub fn dim_bn(&self) -> usize {
        self.channel.dim_b.pow(self.n as u32)
    }

    pub fn p_u_letter(&self) -> &[f64] {
        &self.p_u
    }
    pub fn p_ts_letter(&self) -> &[f64] {
        &self.p_ts
    }
    pub fn p_s_given_ts_letter(&self) -> &[Vec<f64>] {
        &self.p_s_given_ts
    }
    pub fn letter_state(&self, u: usize, ts: usize) -> &DensityOperator {
        &self.letter_states[u][ts]
    }
    pub fn cond_b_letter(&self, u: usize) -> &DensityOperator {
        &self.cond_b[u]
    }
    pub fn theta_b_letter(&self) -> &DensityOperator {
        &self.theta_b
    }

    fn check_len(&self, w: &[usize], what: &str) -> Result<()> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {}, expected n = {}",
                w.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn p_s_word(&self, s_word: &[usize]) -> f64 {
        s_word.iter().map(|&s| self.law.p_s[s]).product()
    }
    pub fn p_ts_word(&self, ts_word: &[usize]) -> f64 {
        ts_word.iter().map(|&t| self.p_ts[t]).product()
    }
    pub fn p_u_word(&self, u_word: &[usize]) -> f64 {
        u_word.iter().map(|&u| self.p_u[u]).product()
    }
    pub fn p_u_given_ts_word(&self, u_word: &[usize], ts_word: &[usize]) -> f64 {
        u_word
            .iter()
            .zip(ts_word)
            .map(|(&u, &t)| self.law.p_u_given_ts[t][u])
            .product()
    }
    pub fn p_ts_given_s_word(&self, ts_word: &[usize], s_word: &[usize]) -> f64 {
        ts_word
            .iter()
            .zip(s_word)
            .map(|(&t, &s)| self.law.p_ts_given_s[s][t])
            .product()
    }
    pub fn p_x_given_u_ts_word(&self, x_word: &[usize], u_word: &[usize], ts_word: &[usize]) -> f64 {
        x_word
            .iter()
            .zip(u_word.iter().zip(ts_word))
            .map(|(&x, (&u, &t))| self.law.p_x_given_u_ts[u][t][x])
            .product()
    }

    /// ρ^{B^n}_{u,s̃} = ⊗ᵢ Σ_{s,x} p(s|s̃ᵢ) p(x|uᵢ,s̃ᵢ) ρ_{x,s}.
    pub fn induced_output_state(&self, u_word: &[usize], ts_word: &[usize]) -> Result<DensityOperator> {
        self.check_len(u_word, "u-word")?;
        self.check_len(ts_word, "s~-word")?;
        if let Some(&t) = ts_word.iter().find(|&&t| self.p_ts[t] <= 0.0) {
            return Err(Error::ZeroProbability(format!("s~ letter {t}")));
        }
        Ok(tensor_density(u_word.iter().zip(ts_word).map(|(&u, &t)| &self.letter_states[u][t])).expect("n >= 1"))
    }

    /// ρ_{B^n|u} = ⊗ᵢ ρ_{B|uᵢ}.
    pub fn cond_output_state(&self, u_word: &[usize]) -> Result<DensityOperator> {
        self.check_len(u_word, "u-word")?;
        Ok(tensor_density(u_word.iter().map(|&u| &self.cond_b[u])).expect("n >= 1"))
    }

    /// Θ^{B^n} = (Θ^B)^{⊗n}.
    pub fn theta_b_n(&self) -> DensityOperator {
        tensor_density(std::iter::repeat(&self.theta_b).take(self.n)).expect("n >= 1")
    }

    /// Θ^{U^nB^n} as blocks {u-word ↦ (p(u), ρ_{B|u})} over positive-probability
    /// words, plus the marginals Θ^{U^n} and Θ^{B^n}.
    pub fn theta_marginals(&self) -> ThetaMarginals {
        let words = all_words(self.law.u_size(), self.n);
        let mut theta_ub = Vec::new();
        for w in words {
            let p = self.p_u_word(&w);
            if p > 0.0 {
                let st = self.cond_output_state(&w).expect("length n");
                theta_ub.push((w, p, st));
            }
        }
        let theta_u = theta_ub.iter().map(|(w, p, _)| (w.clone(), *p)).collect();
        ThetaMarginals {
            theta_ub,
            theta_u,
            theta_b: self.theta_b_n(),
        }
    }

    /// Λ_u = {ρ_{B|u} ⪰ 2^{n(a−γ)} Θ_B}, the u-block of Π^{UB}. Memoized per word.
    pub fn lambda_operator(&self, u_word: &[usize], a: f64, gamma: f64) -> Result<Arc<Projector>> {
        Ok(self.lambda_entry(u_word, a, gamma)?.projector)
    }

    /// Orthonormal basis of the range of Λ_u, one column per unit eigenvalue.
    pub fn lambda_range(&self, u_word: &[usize], a: f64, gamma: f64) -> Result<Arc<CMatrix>> {
        Ok(self.lambda_entry(u_word, a, gamma)?.range)
    }

    fn lambda_entry(&self, u_word: &[usize], a: f64, gamma: f64) -> Result<LambdaEntry> {
        self.check_len(u_word, "u-word")?;
        if self.p_u_word(u_word) <= 0.0 {
            return Err(Error::ZeroProbability(format!("codeword {u_word:?}")));
        }
        let key = (u_word.to_vec(), a.to_bits(), gamma.to_bits());
        if let Some(p) = self.lambda_cache.read().get(&key) {
            return Ok(p.clone());
        }
        let threshold = (self.n as f64 * (a - gamma)).exp2();
        let rho = self.cond_output_state(u_word)?;
        let diff = rho.add_scaled(&self.theta_b_n(), -threshold)?;
        let range = nonneg_eigenspace_basis(&diff);
        let entry = LambdaEntry {
            projector: Arc::new(projector_from_basis(&range)),
            range: Arc::new(range),
        };
        self.lambda_cache.write().insert(key, entry.clone());
        Ok(entry)
    }

    pub fn lambda_cache_len(&self) -> usize {
        self.lambda_cache.read().len()
    }
}

/// Block form of Θ^{U^nB^n} and its marginals.
#[derive(Clone, Debug)]
pub struct ThetaMarginals {
    pub theta_ub: Vec<(Vec<usize>, f64, DensityOperator)>,
    pub theta_u: Vec<(Vec<usize>, f64)>,
    pub theta_b: DensityOperator,
}

/// All words of length n over an alphabet of size q, in lexicographic order.
pub fn all_words(q: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..q).map(move |a| {
                    let mut v = w.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Dense Π^{U^nB^n} on the full U^n ⊗ B^n space; only feasible for tiny instances.
pub fn full_space_pi(ext: &ProductExtension, a: f64, gamma: f64) -> Result<(HermitianOperator, HermitianOperator)> {
    let words = all_words(ext.law.u_size(), ext.n);
    let du = words.len();
    let db = ext.dim_bn();
    let theta = ext.theta_marginals();
    let mut ub_blocks = Vec::new();
    let mut u_diag = vec![0.0; du];
    for (i, w) in words.iter().enumerate() {
        let p = ext.p_u_word(w);
        u_diag[i] = p;
        let st = ext.cond_output_state(w)?;
        ub_blocks.push(tensor_all([&HermitianOperator::diagonal(&unit(du, i)), &st.scale(p)]).unwrap());
    }
    let mut theta_ub = HermitianOperator::zeros(du * db);
    for b in &ub_blocks {
        theta_ub = theta_ub.add_scaled(b, 1.0)?;
    }
    let prod = qop::tensor(&HermitianOperator::diagonal(&u_diag), &theta.theta_b);
    let threshold = (ext.n as f64 * (a - gamma)).exp2();
    let diff = theta_ub.add_scaled(&prod, -threshold)?;
    Ok((nonneg_eigenspace_projector(&diff).into_hermitian(), theta_ub))
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}
