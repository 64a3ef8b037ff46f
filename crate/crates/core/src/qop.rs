//! Dense complex Hermitian operator algebra.
//!
//! Operators are stored as dense `nalgebra` matrices of `Complex64`. The
//! wrapper types carry structural guarantees checked at construction:
//! [`HermitianOperator`] (A = A†), [`DensityOperator`] (PSD, unit trace),
//! [`Projector`] (P² = P) and [`Povm`] (PSD elements summing to identity
//! together with a completion element).
//!
//! Tolerances are relative to the spectral norm of the operator involved
//! unless stated otherwise.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for hermiticity and eigenvalue sign decisions.
pub const REL_TOL: f64 = 1e-10;
/// Tolerance for projector idempotence and POVM completeness.
pub const STRUCT_TOL: f64 = 1e-9;
/// Largest deviation of total outcome probability from one that sampling repairs.
pub const PROB_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
#[cfg(test)]
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Wraps a square matrix after checking ‖A − A†‖ ≤ 1e-10·‖A‖ (Frobenius).
    /// The stored matrix is the exact Hermitian part (A + A†)/2.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch("operator of dimension 0".into()));
        }
        let dev = (&m - m.adjoint()).norm();
        let scale = m.norm();
        if dev > REL_TOL * scale.max(f64::MIN_POSITIVE) && dev > 0.0 {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Symmetrizes without validation; for matrices Hermitian by construction.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * c(0.5);
        Self { m: h }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Self {
            m: CMatrix::from_fn(d, d, |i, j| if i == j { c(values[i]) } else { ZERO }),
        }
    }

    /// |v⟩⟨v| for an arbitrary (not necessarily normalized) vector.
    pub fn outer(v: &[Complex64]) -> Self {
        let d = v.len();
        Self {
            m: CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { m: &self.m * c(k) }
    }

    /// self + k·other
    pub fn add_scaled(&self, other: &HermitianOperator, k: f64) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self {
            m: &self.m + &other.m * c(k),
        })
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.m[(i, j)] == ZERO))
    }

    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn spectral_norm(&self) -> f64 {
        eigh(self).spectral_norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *eigh(self).values.last().expect("non-empty spectrum")
    }

    /// B† · self · B for a square B of matching dimension.
    pub fn congruence(&self, b: &HermitianOperator) -> Result<Self> {
        check_same_dim(self, b)?;
        Ok(Self::from_matrix_unchecked(&b.m * &self.m * &b.m))
    }
}

fn check_same_dim(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    base: HermitianOperator,
}

impl DensityOperator {
    pub fn new(base: HermitianOperator) -> Result<Self> {
        let tr = base.trace();
        if (tr - 1.0).abs() > REL_TOL {
            return Err(Error::BadTrace(tr));
        }
        let min = base.min_eigenvalue();
        if min < -REL_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { base })
    }

    pub(crate) fn from_unchecked(base: HermitianOperator) -> Self {
        Self { base }
    }

    pub fn pure(v: &[Complex64]) -> Result<Self> {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let s = 1.0 / norm2.sqrt();
        let w: Vec<Complex64> = v.iter().map(|z| z * s).collect();
        Ok(Self {
            base: HermitianOperator::outer(&w),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            base: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::diagonal(probs))
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.base
    }

    pub fn into_hermitian(self) -> HermitianOperator {
        self.base
    }

    /// Convex combination Σ wᵢ ρᵢ; weights must be non-negative and sum to one.
    pub fn mixture<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a DensityOperator)>,
    {
        let mut acc: Option<CMatrix> = None;
        let mut total = 0.0;
        for (w, rho) in parts {
            if w < 0.0 {
                return Err(Error::InvalidDistribution(format!("negative weight {w}")));
            }
            total += w;
            match acc.as_mut() {
                None => acc = Some(rho.matrix() * c(w)),
                Some(a) => {
                    if a.nrows() != rho.dim() {
                        return Err(Error::DimensionMismatch("mixture components".into()));
                    }
                    *a += rho.matrix() * c(w);
                }
            }
        }
        let acc = acc.ok_or_else(|| Error::InvalidDistribution("empty mixture".into()))?;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("mixture weights sum to {total}")));
        }
        Ok(Self {
            base: HermitianOperator::from_matrix_unchecked(acc),
        })
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.base
    }
}

/// Orthogonal projector.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    base: HermitianOperator,
}

impl Projector {
    pub fn new(base: HermitianOperator) -> Result<Self> {
        let sq = base.matrix() * base.matrix();
        let dev = (&sq - base.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > STRUCT_TOL {
            return Err(Error::NotProjector(format!("|P² − P| = {dev:e}")));
        }
        let e = eigh(&base);
        if let Some(bad) = e
            .values
            .iter()
            .find(|&&l| (l - 0.0).abs() > STRUCT_TOL && (l - 1.0).abs() > STRUCT_TOL)
        {
            return Err(Error::NotProjector(format!("eigenvalue {bad}")));
        }
        Ok(Self { base })
    }

    pub(crate) fn from_unchecked(base: HermitianOperator) -> Self {
        Self { base }
    }

    pub fn rank(&self) -> usize {
        self.base.trace().round() as usize
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.base
    }

    pub fn into_hermitian(self) -> HermitianOperator {
        self.base
    }
}

impl Deref for Projector {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.base
    }
}

/// Spectral decomposition A = V diag(λ) V† with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.apply(|l| l)
    }

    /// V f(Λ) V†
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = c(f(l));
            for i in 0..d {
                scaled[(i, j)] *= fl;
            }
        }
        HermitianOperator::from_matrix_unchecked(scaled * self.vectors.adjoint())
    }

    /// Orthonormal basis (as columns) of the eigenvectors whose eigenvalue satisfies `keep`.
    pub fn basis_where(&self, keep: impl Fn(f64) -> bool) -> CMatrix {
        let cols: Vec<usize> = (0..self.values.len()).filter(|&j| keep(self.values[j])).collect();
        self.vectors.select_columns(cols.iter())
    }

    /// Projector onto the span of eigenvectors whose eigenvalue satisfies `keep`.
    pub fn projector_where(&self, keep: impl Fn(f64) -> bool) -> Projector {
        projector_from_basis(&self.basis_where(keep))
    }
}

/// V V† for a matrix V with orthonormal columns.
pub fn projector_from_basis(v: &CMatrix) -> Projector {
    let d = v.nrows();
    if v.ncols() == d {
        return Projector::from_unchecked(HermitianOperator::identity(d));
    }
    Projector::from_unchecked(HermitianOperator::from_matrix_unchecked(v * v.adjoint()))
}

/// Hermitian eigendecomposition. Diagonal inputs short-circuit to a sort.
pub fn eigh(a: &HermitianOperator) -> Eigh {
    let d = a.dim();
    let (values, vectors) = if a.is_diagonal() {
        let diag: Vec<f64> = (0..d).map(|i| a.matrix()[(i, i)].re).collect();
        (DVector::from_vec(diag), CMatrix::identity(d, d))
    } else {
        let e = a.matrix().clone().symmetric_eigen();
        (e.eigenvalues, e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    Eigh {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_columns(order.iter()),
    }
}

/// Kronecker product a ⊗ b.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        m: a.matrix().kronecker(b.matrix()),
    }
}

/// Left-to-right Kronecker product of a non-empty sequence.
pub fn tensor_all<'a, I>(factors: I) -> Option<HermitianOperator>
where
    I: IntoIterator<Item = &'a HermitianOperator>,
{
    let mut it = factors.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, f| tensor(&acc, f)))
}

pub fn tensor_density<'a, I>(factors: I) -> Option<DensityOperator>
where
    I: IntoIterator<Item = &'a DensityOperator>,
{
    tensor_all(factors.into_iter().map(|d| d.as_hermitian())).map(DensityOperator::from_unchecked)
}

/// Partial trace keeping the factors listed in `keep` (in their original order).
pub fn partial_trace(op: &HermitianOperator, factor_dims: &[usize], keep: &[usize]) -> Result<HermitianOperator> {
    let total: usize = factor_dims.iter().product();
    if factor_dims.is_empty() || total != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {factor_dims:?} do not multiply to {}",
            op.dim()
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= factor_dims.len()) {
        return Err(Error::DimensionMismatch(format!("factor index {bad} out of range")));
    }
    let mut kept = vec![false; factor_dims.len()];
    for &k in keep {
        kept[k] = true;
    }
    // Row-major strides: the last factor varies fastest.
    let mut strides = vec![1usize; factor_dims.len()];
    for i in (0..factor_dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * factor_dims[i + 1];
    }
    let offsets = |select: bool| -> Vec<usize> {
        let mut offs = vec![0usize];
        for (i, &d) in factor_dims.iter().enumerate() {
            if kept[i] != select {
                continue;
            }
            let st = strides[i];
            offs = offs.iter().flat_map(|&o| (0..d).map(move |x| o + x * st)).collect();
        }
        offs
    };
    let kept_off = offsets(true);
    let traced_off = offsets(false);
    let dk = kept_off.len();
    let m = op.matrix();
    let out = CMatrix::from_fn(dk, dk, |r, cidx| {
        traced_off
            .iter()
            .map(|&t| m[(kept_off[r] + t, kept_off[cidx] + t)])
            .sum()
    });
    Ok(HermitianOperator::from_matrix_unchecked(out))
}

/// Projector onto the eigenspace of eigenvalues ≥ −1e-10·‖A‖ (kernel included).
pub fn nonneg_eigenspace_projector(a: &HermitianOperator) -> Projector {
    projector_from_basis(&nonneg_eigenspace_basis(a))
}

/// Orthonormal basis of the same eigenspace.
pub fn nonneg_eigenspace_basis(a: &HermitianOperator) -> CMatrix {
    let e = eigh(a);
    let tol = REL_TOL * e.spectral_norm();
    e.basis_where(|l| l >= -tol)
}

/// Projector onto the eigenspace of eigenvalues > 1e-10·‖A‖ (kernel excluded).
pub fn positive_eigenspace_projector(a: &HermitianOperator) -> Projector {
    let e = eigh(a);
    let tol = REL_TOL * e.spectral_norm();
    e.projector_where(|l| l > tol)
}

/// The test {ρ ⪰ cσ} and its acceptance value Tr[{ρ ⪰ cσ} ρ].
pub fn spectral_test(rho: &DensityOperator, sigma: &DensityOperator, c_factor: f64) -> Result<(Projector, f64)> {
    let diff = rho.add_scaled(sigma, -c_factor)?;
    let p = nonneg_eigenspace_projector(&diff);
    let v = trace_product(&p, rho).clamp(0.0, 1.0);
    Ok((p, v))
}

/// Tr[{ρ ⪰ cσ} ρ] for rank-one ρ = |ψ⟩⟨ψ| and σ = W diag(d) W†.
///
/// `weights[j] = |⟨w_j|ψ⟩|²` and `sigma_eigs[j] = d_j ≥ 0`. The operator
/// |ψ⟩⟨ψ| − cσ has at most one non-negative eigenvalue λ; it exists iff
/// f(0) ≥ 1 where f(λ) = Σ_j weights_j / (λ + c·d_j), and then
/// Tr[Π ψψ†] = 1 / Σ_j weights_j / (λ + c·d_j)².
pub fn rank_one_spectral_value(weights: &[f64], sigma_eigs: &[f64], c_factor: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let f = |lam: f64| -> f64 {
        weights
            .iter()
            .zip(sigma_eigs)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, &d)| w / (lam + c_factor * d))
            .sum::<f64>()
            / total
    };
    let f0 = f(0.0);
    if !(f0 >= 1.0) {
        return 0.0;
    }
    // f is decreasing with f(λ) ≤ 1/λ, so the root lies in [0, 1].
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if f0.is_finite() && (f0 - 1.0).abs() <= 1e-15 {
        hi = 0.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-16 * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = if hi == 0.0 { 0.0 } else { 0.5 * (lo + hi) };
    let s2: f64 = weights
        .iter()
        .zip(sigma_eigs)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &d)| w / ((lam + c_factor * d) * (lam + c_factor * d)))
        .sum::<f64>()
        / total;
    if lam == 0.0 && !s2.is_finite() {
        return 1.0;
    }
    (1.0 / s2).clamp(0.0, 1.0)
}

/// A^{-1/2} on the support of a PSD operator; eigenvalues ≤ tol map to zero.
pub fn inv_sqrt_on_support(a: &HermitianOperator) -> Result<HermitianOperator> {
    let e = eigh(a);
    let tol = REL_TOL * e.spectral_norm();
    let min = *e.values.last().expect("non-empty");
    if min < -tol {
        return Err(Error::NotPsd(min));
    }
    Ok(e.apply(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 }))
}

/// F with F F† = A for PSD A, one column per eigenvalue above tolerance.
pub fn psd_factor(a: &HermitianOperator) -> Result<CMatrix> {
    let e = eigh(a);
    let tol = REL_TOL * e.spectral_norm();
    let min = *e.values.last().expect("non-empty");
    if min < -tol {
        return Err(Error::NotPsd(min));
    }
    let cols: Vec<usize> = (0..e.values.len()).filter(|&j| e.values[j] > tol).collect();
    let mut f = e.vectors.select_columns(cols.iter());
    for (k, &j) in cols.iter().enumerate() {
        let r = c(e.values[j].sqrt());
        f.column_mut(k).iter_mut().for_each(|z| *z *= r);
    }
    Ok(f)
}

/// Re Tr[A B] for Hermitian A, B, computed in O(d²).
pub fn trace_product(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    // Tr[AB] = Σ_ij A_ij B_ji = Σ_ij A_ij conj(B_ij) for Hermitian B.
    a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Positive operator-valued measure with an explicit completion element.
#[derive(Clone, Debug)]
pub struct Povm {
    pub elements: Vec<HermitianOperator>,
    pub completion: HermitianOperator,
}

/// Summary of a POVM validity check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PovmReport {
    pub min_element_eigenvalue: f64,
    pub completion_min_eigenvalue: f64,
    pub completeness_deviation: f64,
}

impl Povm {
    /// Builds the POVM with completion I − Σ elements and validates it.
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let d = elements
            .first()
            .map(|e| e.dim())
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        if elements.iter().any(|e| e.dim() != d) {
            return Err(Error::InvalidPovm("elements differ in dimension".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for e in &elements {
            sum += e.matrix();
        }
        let completion = HermitianOperator::from_matrix_unchecked(CMatrix::identity(d, d) - sum);
        let povm = Self { elements, completion };
        povm.validate()?;
        Ok(povm)
    }

    pub fn dim(&self) -> usize {
        self.completion.dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Outcome index reserved for the completion element.
    pub fn failure_index(&self) -> usize {
        self.elements.len()
    }

    pub fn report(&self) -> PovmReport {
        let d = self.dim();
        let mut min_el = f64::INFINITY;
        let mut sum = self.completion.matrix().clone();
        for e in &self.elements {
            min_el = min_el.min(e.min_eigenvalue());
            sum += e.matrix();
        }
        let dev = (sum - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        PovmReport {
            min_element_eigenvalue: min_el,
            completion_min_eigenvalue: self.completion.min_eigenvalue(),
            completeness_deviation: dev,
        }
    }

    pub fn validate(&self) -> Result<PovmReport> {
        let r = self.report();
        if r.min_element_eigenvalue < -REL_TOL {
            return Err(Error::InvalidPovm(format!(
                "element eigenvalue {:e}",
                r.min_element_eigenvalue
            )));
        }
        if r.completion_min_eigenvalue < -STRUCT_TOL {
            return Err(Error::InvalidPovm(format!(
                "completion eigenvalue {:e}",
                r.completion_min_eigenvalue
            )));
        }
        if r.completeness_deviation > STRUCT_TOL {
            return Err(Error::InvalidPovm(format!(
                "completeness deviation {:e}",
                r.completeness_deviation
            )));
        }
        Ok(r)
    }

    /// Born-rule probabilities Tr[β(k) ρ], completion last.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state {} vs POVM {}",
                rho.dim(),
                self.dim()
            )));
        }
        let mut p: Vec<f64> = self.elements.iter().map(|e| trace_product(e, rho)).collect();
        p.push(trace_product(&self.completion, rho));
        Ok(p)
    }
}

/// Clips negative entries and renormalizes; errors if the raw total is off by > 1e-8.
pub fn normalize_probabilities(probs: &mut [f64]) -> Result<()> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::ProbabilityMass(total));
    }
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let clipped: f64 = probs.iter().sum();
    if clipped <= 0.0 {
        return Err(Error::ProbabilityMass(clipped));
    }
    for p in probs.iter_mut() {
        *p /= clipped;
    }
    Ok(())
}

/// Draws an index from a normalized probability vector with one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Samples a measurement outcome; the completion maps to [`Povm::failure_index`].
pub fn sample_measurement<R: Rng + ?Sized>(povm: &Povm, rho: &DensityOperator, rng: &mut R) -> Result<usize> {
    let mut p = povm.probabilities(rho)?;
    normalize_probabilities(&mut p)?;
    Ok(sample_index(&p, rng))
}

/// JSON form of a complex matrix: row-major rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let r = rows.len();
    let cols = rows.first().map(|x| x.len()).unwrap_or(0);
    if r == 0 || rows.iter().any(|x| x.len() != cols) {
        return Err(Error::DimensionMismatch("ragged or empty matrix".into()));
    }
    Ok(CMatrix::from_fn(r, cols, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}
