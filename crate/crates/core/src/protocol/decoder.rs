use std::collections::HashMap;
use std::sync::Arc;

use super::codebook::Codebook;
use crate::error::{Error, Result};
use crate::model::ProductExtension;
use num_complex::Complex64;

use crate::qop::{
    eigh, normalize_probabilities, trace_product, CMatrix, DensityOperator, Eigh, HermitianOperator, Povm, PovmReport,
    Projector, PROB_TOL, REL_TOL, STRUCT_TOL,
};

/// Pretty-good measurement β(ℓ) = M^{−1/2} Λ_{u[ℓ]} M^{−1/2}, M = Σ_ℓ Λ_{u[ℓ]}.
///
/// Codewords sharing a u-word share Λ, so the operator work is done once per
/// distinct word. Outcome probabilities use Tr[β(ℓ)ρ] = Tr[Λ_{u[ℓ]} M^{−1/2}ρM^{−1/2}].
#[derive(Debug)]
pub struct Decoder {
    pub words: Vec<Vec<usize>>,
    pub word_of: Vec<usize>,
    pub counts: Vec<usize>,
    pub lambdas: Vec<Arc<Projector>>,
    ranges: Vec<Arc<CMatrix>>,
    m: HermitianOperator,
    m_eigh: Eigh,
    m_inv_sqrt: HermitianOperator,
    dim: usize,
}

pub fn build_decoder(ext: &ProductExtension, codebook: &Codebook, a: f64, gamma: f64) -> Result<Decoder> {
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut words = Vec::new();
    let mut counts = Vec::new();
    let mut word_of = Vec::with_capacity(codebook.len());
    for u in &codebook.u_words {
        let id = *index.entry(u.as_slice()).or_insert_with(|| {
            words.push(u.clone());
            counts.push(0);
            words.len() - 1
        });
        counts[id] += 1;
        word_of.push(id);
    }
    let lambdas = words
        .iter()
        .map(|w| ext.lambda_operator(w, a, gamma))
        .collect::<Result<Vec<_>>>()?;
    let ranges = words
        .iter()
        .map(|w| ext.lambda_range(w, a, gamma))
        .collect::<Result<Vec<_>>>()?;
    let dim = ext.dim_bn();
    let mut m = CMatrix::zeros(dim, dim);
    for (lam, &c) in lambdas.iter().zip(&counts) {
        m += lam.matrix() * Complex64::new(c as f64, 0.0);
    }
    let m = HermitianOperator::new(m)?;
    let m_eigh = eigh(&m);
    let tol = REL_TOL * m_eigh.spectral_norm();
    let min = m_eigh.values.last().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::NotPsd(min));
    }
    let m_inv_sqrt = m_eigh.apply(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 });
    Ok(Decoder {
        words,
        word_of,
        counts,
        lambdas,
        ranges,
        m,
        m_eigh,
        m_inv_sqrt,
        dim,
    })
}

impl Decoder {
    pub fn len(&self) -> usize {
        self.word_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_of.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn failure_index(&self) -> usize {
        self.len()
    }

    /// Tr[β_w ρ] for each distinct word w.
    pub fn word_probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state {} vs decoder {}",
                rho.dim(),
                self.dim
            )));
        }
        let rho_p = rho.congruence(&self.m_inv_sqrt)?;
        Ok(self.lambdas.iter().map(|l| trace_product(l, &rho_p)).collect())
    }

    /// Tr[β_w F F†] for each distinct word w; cheaper than the dense path when F
    /// has few columns. For a projector Λ, Tr[Λ Y Y†] = ‖Λ Y‖²_F.
    pub fn word_probabilities_factored(&self, factor: &CMatrix) -> Result<Vec<f64>> {
        if factor.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "factor {} vs decoder {}",
                factor.nrows(),
                self.dim
            )));
        }
        let y = self.m_inv_sqrt.matrix() * factor;
        Ok(self.ranges.iter().map(|v| (v.adjoint() * &y).norm_squared()).collect())
    }

    fn expand(&self, pw: &[f64]) -> Result<Vec<f64>> {
        let mut p: Vec<f64> = self.word_of.iter().map(|&w| pw[w]).collect();
        let total: f64 = p.iter().sum();
        if total > 1.0 + PROB_TOL {
            return Err(Error::ProbabilityMass(total));
        }
        p.push((1.0 - total).max(0.0));
        normalize_probabilities(&mut p)?;
        Ok(p)
    }

    /// Outcome distribution over ℓ, failure last, checked and renormalized.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.expand(&self.word_probabilities(rho)?)
    }

    /// As `probabilities`, for the state F F†.
    pub fn probabilities_factored(&self, factor: &CMatrix) -> Result<Vec<f64>> {
        self.expand(&self.word_probabilities_factored(factor)?)
    }

    fn beta(&self, w: usize) -> Result<HermitianOperator> {
        self.lambdas[w].congruence(&self.m_inv_sqrt)
    }

    /// Explicit POVM with one element per codeword; validated on construction.
    pub fn povm(&self) -> Result<Povm> {
        let betas = (0..self.words.len())
            .map(|w| self.beta(w))
            .collect::<Result<Vec<_>>>()?;
        Povm::new(self.word_of.iter().map(|&w| betas[w].clone()).collect())
    }

    /// Element positivity, positivity of I − Σβ, and the deviation of Σβ from
    /// the support projector of M.
    ///
    /// With Λ_w = V_w V_w†, β_w = (X V_w)(X V_w)† shares its nonzero spectrum with
    /// the Gram matrix (X V_w)†(X V_w), so each element costs an r×r eigenproblem.
    pub fn report(&self) -> Result<PovmReport> {
        let x = self.m_inv_sqrt.matrix();
        let mut min_el = f64::INFINITY;
        for v in &self.ranges {
            let r = v.ncols();
            if r < self.dim {
                min_el = min_el.min(0.0);
            }
            if r == 0 {
                continue;
            }
            let xv = x * v.as_ref();
            let gram = HermitianOperator::from_matrix_unchecked(xv.adjoint() * &xv);
            min_el = min_el.min(eigh(&gram).values.last().copied().unwrap_or(0.0));
        }
        let sum = HermitianOperator::from_matrix_unchecked(x * self.m.matrix() * x);
        let completion = HermitianOperator::identity(self.dim).add_scaled(&sum, -1.0)?;
        let tol = REL_TOL * self.m_eigh.spectral_norm();
        let support = self.m_eigh.projector_where(|l| l > tol);
        Ok(PovmReport {
            min_element_eigenvalue: min_el,
            completion_min_eigenvalue: completion.min_eigenvalue(),
            completeness_deviation: sum.max_abs_diff(&support),
        })
    }

    pub fn validate(&self) -> Result<PovmReport> {
        let r = self.report()?;
        if r.min_element_eigenvalue < -STRUCT_TOL
            || r.completion_min_eigenvalue < -STRUCT_TOL
            || r.completeness_deviation > STRUCT_TOL
        {
            return Err(Error::InvalidPovm(format!("{r:?}")));
        }
        Ok(r)
    }
}
