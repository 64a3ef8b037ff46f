//! Independent oracles: classical Gel'fand-Pinsker and Heegard-El Gamal
//! quantities, Blahut-Arimoto, the Hayashi-Nagaoka operator inequality,
//! converse bounds and exact error evaluation for small fixed codes.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infospec::{mutual_information_joint, sum_tail};
use crate::model::{all_words, check_row, CqGpChannel, JointLaw};
use crate::protocol::{alice_acceptance, charlie_acceptance, Codebook, Decoder, Protocol};
use crate::qop::{
    eigh, inv_sqrt_on_support, positive_eigenspace_projector, trace_product, CMatrix, DensityOperator,
    HermitianOperator, STRUCT_TOL,
};

/// Default cap on enumeration sizes.
pub const DEFAULT_CAP: u128 = 100_000_000;

/// Discrete memoryless channel with state, p(y|x,s), and the state law p(s).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassicalChannel {
    /// `[x][s][y]`
    pub p_y_given_xs: Vec<Vec<Vec<f64>>>,
    pub p_s: Vec<f64>,
}

impl ClassicalChannel {
    pub fn new(p_y_given_xs: Vec<Vec<Vec<f64>>>, p_s: Vec<f64>) -> Result<Self> {
        check_row(&p_s, "p_s")?;
        let y = p_y_given_xs.first().and_then(|r| r.first()).map_or(0, |r| r.len());
        if p_y_given_xs.is_empty() || y == 0 {
            return Err(Error::InvalidDistribution("empty channel".into()));
        }
        for (x, rows) in p_y_given_xs.iter().enumerate() {
            if rows.len() != p_s.len() {
                return Err(Error::InvalidDistribution(format!(
                    "p_y_given_xs[{x}] has {} states",
                    rows.len()
                )));
            }
            for (s, row) in rows.iter().enumerate() {
                if row.len() != y {
                    return Err(Error::InvalidDistribution(format!(
                        "p_y_given_xs[{x}][{s}] has wrong length"
                    )));
                }
                check_row(row, &format!("p_y_given_xs[{x}][{s}]"))?;
            }
        }
        Ok(Self { p_y_given_xs, p_s })
    }

    /// Channel with a single state.
    pub fn stateless(p_y_given_x: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(p_y_given_x.into_iter().map(|r| vec![r]).collect(), vec![1.0])
    }

    /// The diagonals of a commuting cq channel.
    pub fn from_cq(channel: &CqGpChannel, p_s: Vec<f64>) -> Result<Self> {
        if !channel.all_diagonal() {
            return Err(Error::Validation("channel outputs are not all diagonal".into()));
        }
        let d = channel.dim_b;
        let rows = channel
            .outputs
            .iter()
            .map(|r| {
                r.iter()
                    .map(|o| (0..d).map(|i| o.matrix()[(i, i)].re.max(0.0)).collect())
                    .collect()
            })
            .collect();
        Self::new(rows, p_s)
    }

    pub fn x_size(&self) -> usize {
        self.p_y_given_xs.len()
    }
    pub fn s_size(&self) -> usize {
        self.p_s.len()
    }
    pub fn y_size(&self) -> usize {
        self.p_y_given_xs[0][0].len()
    }

    /// Theorem-level cardinality cap min{|X||S|, |Y| + |S| − 1}.
    pub fn u_size_cap(&self) -> usize {
        (self.x_size() * self.s_size()).min(self.y_size() + self.s_size() - 1)
    }
}

/// (I[U;Y] − I[U;S̃], I[S;S̃]) under p(s)p(s̃|s)p(u|s̃)p(x|u,s̃)p(y|x,s).
pub fn heegard_elgamal_rates(channel: &ClassicalChannel, law: &JointLaw) -> Result<(f64, f64)> {
    if law.s_size() != channel.s_size() || law.x_size() != channel.x_size() {
        return Err(Error::DimensionMismatch(format!(
            "law has |S| = {}, |X| = {}; channel has |S| = {}, |X| = {}",
            law.s_size(),
            law.x_size(),
            channel.s_size(),
            channel.x_size()
        )));
    }
    if law.p_s.iter().zip(&channel.p_s).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::Validation("law and channel disagree on p(s)".into()));
    }
    let mut joint_uy = vec![vec![0.0; channel.y_size()]; law.u_size()];
    for (s, &ps) in law.p_s.iter().enumerate() {
        for (t, &pt) in law.p_ts_given_s[s].iter().enumerate() {
            for (u, &pu) in law.p_u_given_ts[t].iter().enumerate() {
                for (x, &px) in law.p_x_given_u_ts[u][t].iter().enumerate() {
                    let w = ps * pt * pu * px;
                    if w > 0.0 {
                        for (y, &py) in channel.p_y_given_xs[x][s].iter().enumerate() {
                            joint_uy[u][y] += w * py;
                        }
                    }
                }
            }
        }
    }
    Ok((
        mutual_information_joint(&joint_uy) - mutual_information_joint(&law.joint_u_ts()),
        mutual_information_joint(&law.joint_s_ts()),
    ))
}

/// Maximizer of I[U;Y] − I[U;S] over the grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GpCapacity {
    pub capacity: f64,
    /// `[s][u]`
    pub p_u_given_s: Vec<Vec<f64>>,
    /// x = g(u, s), `[u][s]`
    pub g: Vec<Vec<usize>>,
    pub evaluations: u128,
}

/// All pmfs on k points with entries in {0, 1/steps, ..., 1}.
fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 0..=left {
            cur.push(a);
            rec(k - 1, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, steps, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|v| v.into_iter().map(|a| a as f64 / steps as f64).collect())
        .collect()
}

fn gp_objective(
    ch: &ClassicalChannel,
    pu_s: &[&[f64]],
    rows: &[Vec<&[f64]>],
    joint_us: &mut [Vec<f64>],
    joint_uy: &mut [Vec<f64>],
) -> f64 {
    for r in joint_uy.iter_mut() {
        r.fill(0.0);
    }
    for (s, &ps) in ch.p_s.iter().enumerate() {
        for (u, &pu) in pu_s[s].iter().enumerate() {
            let w = ps * pu;
            joint_us[u][s] = w;
            if w > 0.0 {
                for (y, &py) in rows[u][s].iter().enumerate() {
                    joint_uy[u][y] += w * py;
                }
            }
        }
    }
    mutual_information_joint(joint_uy) - mutual_information_joint(joint_us)
}

/// max over gridded p(u|s) and all deterministic g: U×S → X of I[U;Y] − I[U;S].
pub fn gp_capacity(channel: &ClassicalChannel, u_size: usize, steps: usize) -> Result<GpCapacity> {
    gp_capacity_capped(channel, u_size, steps, DEFAULT_CAP)
}

pub fn gp_capacity_capped(channel: &ClassicalChannel, u_size: usize, steps: usize, cap: u128) -> Result<GpCapacity> {
    if u_size == 0 || u_size > channel.u_size_cap() {
        return Err(Error::InvalidParameter(format!(
            "u_size = {u_size} outside 1..={}",
            channel.u_size_cap()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let (ns, nx) = (channel.s_size(), channel.x_size());
    let grid = simplex_grid(u_size, steps);
    let maps = (nx as u128).checked_pow((u_size * ns) as u32);
    let points = (grid.len() as u128).checked_pow(ns as u32);
    let needed = match (maps, points) {
        (Some(a), Some(b)) => a.checked_mul(b).unwrap_or(u128::MAX),
        _ => u128::MAX,
    };
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let maps = maps.expect("checked") as usize;
    let best = (0..maps)
        .into_par_iter()
        .map(|gi| {
            // g[u][s] from the base-|X| digits of gi.
            let mut code = gi;
            let g: Vec<Vec<usize>> = (0..u_size)
                .map(|_| {
                    (0..ns)
                        .map(|_| {
                            let x = code % nx;
                            code /= nx;
                            x
                        })
                        .collect()
                })
                .collect();
            let rows: Vec<Vec<&[f64]>> = (0..u_size)
                .map(|u| (0..ns).map(|s| channel.p_y_given_xs[g[u][s]][s].as_slice()).collect())
                .collect();
            let mut joint_us = vec![vec![0.0; ns]; u_size];
            let mut joint_uy = vec![vec![0.0; channel.y_size()]; u_size];
            let mut idx = vec![0usize; ns];
            let mut best = (f64::NEG_INFINITY, idx.clone());
            loop {
                let pu_s: Vec<&[f64]> = idx.iter().map(|&i| grid[i].as_slice()).collect();
                let v = gp_objective(channel, &pu_s, &rows, &mut joint_us, &mut joint_uy);
                if v > best.0 {
                    best = (v, idx.clone());
                }
                let mut p = 0;
                while p < ns {
                    idx[p] += 1;
                    if idx[p] < grid.len() {
                        break;
                    }
                    idx[p] = 0;
                    p += 1;
                }
                if p == ns {
                    break;
                }
            }
            (best.0, best.1, g)
        })
        .reduce_with(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one map");
    Ok(GpCapacity {
        capacity: best.0.max(0.0),
        p_u_given_s: best.1.iter().map(|&i| grid[i].clone()).collect(),
        g: best.2,
        evaluations: needed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BlahutArimoto {
    pub capacity: f64,
    pub input: Vec<f64>,
    pub iterations: usize,
    /// Final upper minus lower bound on the capacity.
    pub gap: f64,
}

/// Capacity of p(y|x) in bits; stops when the duality gap is below `tol`.
pub fn blahut_arimoto(p_y_given_x: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<BlahutArimoto> {
    for (x, row) in p_y_given_x.iter().enumerate() {
        check_row(row, &format!("p_y_given_x[{x}]"))?;
    }
    let nx = p_y_given_x.len();
    let ny = p_y_given_x.first().map_or(0, |r| r.len());
    if nx == 0 || p_y_given_x.iter().any(|r| r.len() != ny) {
        return Err(Error::InvalidDistribution("ragged or empty channel matrix".into()));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut r = vec![1.0 / nx as f64; nx];
    for it in 1..=max_iter {
        let mut q = vec![0.0; ny];
        for (x, row) in p_y_given_x.iter().enumerate() {
            for (y, &w) in row.iter().enumerate() {
                q[y] += r[x] * w;
            }
        }
        // D(x) = Σ_y W(y|x) ln(W(y|x)/q(y))
        let d: Vec<f64> = p_y_given_x
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(&w, &qy)| w * (w / qy).ln())
                    .sum()
            })
            .collect();
        let z: f64 = r.iter().zip(&d).map(|(ri, di)| ri * di.exp()).sum();
        let lower = z.ln();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < tol * ln2 {
            return Ok(BlahutArimoto {
                capacity: (lower / ln2).max(0.0),
                input: r,
                iterations: it,
                gap: (upper - lower) / ln2,
            });
        }
        for (ri, di) in r.iter_mut().zip(&d) {
            *ri *= di.exp() / z;
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Minimum eigenvalue of 2(I − S) + 4T − (I − (S+T)^{−1/2} S (S+T)^{−1/2}),
/// with the inverse square root taken on the support.
pub fn hayashi_nagaoka_check(s_op: &HermitianOperator, t_op: &HermitianOperator) -> Result<f64> {
    if s_op.dim() != t_op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "S is {}, T is {}",
            s_op.dim(),
            t_op.dim()
        )));
    }
    let es = eigh(s_op);
    let (hi, lo) = (es.values[0], *es.values.last().expect("non-empty"));
    if lo < -STRUCT_TOL || hi > 1.0 + STRUCT_TOL {
        return Err(Error::InvalidParameter(format!(
            "S must satisfy 0 <= S <= I, spectrum in [{lo}, {hi}]"
        )));
    }
    let tmin = t_op.min_eigenvalue();
    if tmin < -STRUCT_TOL {
        return Err(Error::NotPsd(tmin));
    }
    let d = s_op.dim();
    let id = HermitianOperator::identity(d);
    let x = inv_sqrt_on_support(&s_op.add_scaled(t_op, 1.0)?)?;
    let rhs = id.add_scaled(&s_op.congruence(&x)?, -1.0)?;
    let lhs = id.add_scaled(s_op, -1.0)?.scale(2.0).add_scaled(t_op, 4.0)?;
    Ok(lhs.add_scaled(&rhs, -1.0)?.min_eigenvalue())
}

fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    g.qr().q()
}

/// A random pair with 0 ⪯ S ⪯ I and T ⪰ 0. Spectra of S include the endpoints
/// 0 and 1 with positive probability; T has random rank and scale.
pub fn random_hn_pair<R: Rng + ?Sized>(d: usize, rng: &mut R) -> (HermitianOperator, HermitianOperator) {
    let u = random_unitary(d, rng);
    let lam: Vec<f64> = (0..d)
        .map(|_| match rng.gen_range(0..6) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        })
        .collect();
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        lam.iter().map(|&l| Complex64::new(l, 0.0)),
    ));
    let s = &u * diag * u.adjoint();
    let rank = rng.gen_range(0..=d);
    let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
    let g = CMatrix::from_fn(d, rank, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let t = (&g * g.adjoint()) * Complex64::new(scale, 0.0);
    let herm = |m: CMatrix| HermitianOperator::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).expect("Hermitian");
    (herm(s), herm(t))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct HnSuite {
    pub count: usize,
    pub pass: usize,
    pub worst_min_eig: f64,
}

/// `count` random pairs at dimensions 2..=8, seeded.
pub fn hayashi_nagaoka_suite(count: usize, seed: u64) -> Result<HnSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pass = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let d = rng.gen_range(2..=8);
        let (s, t) = random_hn_pair(d, &mut rng);
        let v = hayashi_nagaoka_check(&s, &t)?;
        worst = worst.min(v);
        if v >= -STRUCT_TOL {
            pass += 1;
        }
    }
    Ok(HnSuite {
        count,
        pass,
        worst_min_eig: worst,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConverseBound {
    pub raw: f64,
    /// max(raw, 0)
    pub clamped: f64,
}

impl ConverseBound {
    fn new(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.max(0.0),
        }
    }
}

/// Σ_u p(u) Tr[ρ_u {ρ_u ⪯ M·2^{−nγ} ρ̄}] − 2^{−nγ}, where
/// {A ⪯ B} = I − (projector onto the strictly positive part of A − B).
pub fn converse_bound(
    ensemble: &[(f64, DensityOperator)],
    messages: f64,
    n: usize,
    gamma: f64,
) -> Result<ConverseBound> {
    if !(messages >= 1.0) {
        return Err(Error::InvalidParameter(format!("message count {messages} below 1")));
    }
    let probs: Vec<f64> = ensemble.iter().map(|e| e.0).collect();
    check_row(&probs, "ensemble weights")?;
    let avg = DensityOperator::mixture(ensemble.iter().map(|(p, r)| (*p, r)))?;
    let slack = -(n as f64 * gamma);
    let c = messages * slack.exp2();
    let mut total = 0.0;
    for (p, rho) in ensemble.iter().filter(|e| e.0 > 0.0) {
        let pos = positive_eigenspace_projector(&rho.add_scaled(&avg, -c)?);
        total += p * (1.0 - trace_product(&pos, rho)).clamp(0.0, 1.0);
    }
    Ok(ConverseBound::new(total - slack.exp2()))
}

/// The same bound for the iid extension of a commuting letter ensemble with
/// M = 2^{nR}, by exact convolution of the letter log-likelihood ratios.
pub fn converse_bound_iid(
    letters: &[(f64, DensityOperator)],
    rate: f64,
    n: usize,
    gamma: f64,
) -> Result<ConverseBound> {
    if letters.iter().any(|(_, r)| !r.is_diagonal()) {
        return Err(Error::InvalidParameter("letter states must be diagonal".into()));
    }
    let probs: Vec<f64> = letters.iter().map(|e| e.0).collect();
    check_row(&probs, "ensemble weights")?;
    let avg = DensityOperator::mixture(letters.iter().map(|(p, r)| (*p, r)))?;
    let d = avg.dim();
    let mut values = Vec::new();
    for (p, rho) in letters.iter().filter(|e| e.0 > 0.0) {
        for y in 0..d {
            let w = rho.matrix()[(y, y)].re;
            if w > 0.0 {
                values.push(((w / avg.matrix()[(y, y)].re).log2(), p * w));
            }
        }
    }
    let per: Vec<&[(f64, f64)]> = vec![values.as_slice(); n];
    let tail = sum_tail(&per, n as f64 * (rate - gamma));
    Ok(ConverseBound::new(1.0 - tail - (-(n as f64 * gamma)).exp2()))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RsConverse {
    /// Pr{(1/n) log₂ 1/p ≥ (1/n) log₂ M + γ}
    pub tail: f64,
    /// 2^{−nγ}
    pub bound: f64,
    pub holds: bool,
}

/// Exact check of Pr{(1/n) log₂ 1/p(V) ≥ (1/n) log₂ M + γ} ≤ 2^{−nγ} for a pmf on M values.
pub fn rs_converse_check(pmf: &[f64], gamma: f64, n: usize) -> Result<RsConverse> {
    check_row(pmf, "pmf")?;
    let m = pmf.len() as f64;
    let cut = m.log2() + n as f64 * gamma;
    let tail = pmf.iter().filter(|&&p| p > 0.0 && -p.log2() >= cut).sum::<f64>();
    let bound = (-(n as f64 * gamma)).exp2();
    Ok(RsConverse {
        tail,
        bound,
        holds: tail <= bound,
    })
}

/// Exact distributions of the encoders' choices for a fixed codebook.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EncoderTables {
    /// s-words in lexicographic order.
    pub s_words: Vec<Vec<usize>>,
    /// `[s-word][k]`: Pr{k* = k | s}.
    pub charlie: Vec<Vec<f64>>,
    /// `[m][k]`: (ℓ, Pr{ℓ* = ℓ | m, k}) over the class of m.
    pub alice: Vec<Vec<Vec<(usize, f64)>>>,
}

/// First success in a sequence of independent trials with success
/// probabilities `q`, the leftover mass going to `fallback`.
fn first_success(q: &[f64], fallback: usize) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    let mut none = 1.0;
    for (k, &qk) in q.iter().enumerate() {
        out[k] += none * qk;
        none *= 1.0 - qk;
    }
    out[fallback] += none;
    out
}

impl EncoderTables {
    pub fn new(proto: &Protocol, codebook: &Codebook) -> Result<Self> {
        let ext = &proto.ext;
        let p = &proto.params;
        let mut gate = Vec::with_capacity(codebook.quant_count());
        for ts in &codebook.ts_words {
            gate.push(if proto.charlie_gate(ts)? { 1.0 } else { 0.0 });
        }
        let s_words = all_words(ext.law.s_size(), ext.n);
        let charlie = s_words
            .iter()
            .map(|s| {
                let q: Vec<f64> = codebook
                    .ts_words
                    .iter()
                    .zip(&gate)
                    .map(|(ts, g)| g * charlie_acceptance(ext, ts, s, p.bound_s_ts, p.gamma))
                    .collect();
                first_success(&q, 0)
            })
            .collect();
        let cut = 1.0 - p.eps.sqrt();
        let mut alice = Vec::with_capacity(codebook.bin_count);
        for m in 0..codebook.bin_count {
            let range = codebook.class_range(m);
            let mut per_k = Vec::with_capacity(codebook.quant_count());
            for ts in &codebook.ts_words {
                let mut q = Vec::with_capacity(range.len());
                for ell in range.clone() {
                    let u = &codebook.u_words[ell];
                    let ok = proto.g(u, ts)? > cut;
                    q.push(if ok {
                        alice_acceptance(ext, u, ts, p.bound_u_ts, p.gamma)
                    } else {
                        0.0
                    });
                }
                let dist = first_success(&q, 0);
                per_k.push(range.clone().zip(dist).filter(|e| e.1 > 0.0).collect());
            }
            alice.push(per_k);
        }
        Ok(Self {
            s_words,
            charlie,
            alice,
        })
    }
}

/// Exact average error (1/M) Σ_m Σ_s p(s) Tr[(I − Σ_{ℓ∈class m} β(ℓ)) ρ_{m,s}] for a
/// fixed codebook and decoder, with the encoders' randomness and x marginalized.
pub fn exact_error_fixed_code(
    proto: &Protocol,
    codebook: &Codebook,
    decoder: &Decoder,
    tables: &EncoderTables,
    cap: u128,
) -> Result<f64> {
    let ext = &proto.ext;
    let n = ext.n as u32;
    let needed = (ext.law.s_size() as u128)
        .checked_pow(n)
        .and_then(|a| a.checked_mul((ext.law.x_size() as u128).checked_pow(n)?))
        .and_then(|a| a.checked_mul(codebook.bin_count as u128))
        .unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    if decoder.len() != codebook.len() {
        return Err(Error::DimensionMismatch(format!(
            "decoder has {} outcomes for {} codewords",
            decoder.len(),
            codebook.len()
        )));
    }
    let mut total = 0.0;
    for m in 0..codebook.bin_count {
        let class = codebook.class_range(m);
        for (si, s) in tables.s_words.iter().enumerate() {
            let ps = ext.p_s_word(s);
            if ps <= 0.0 {
                continue;
            }
            for (k, &pk) in tables.charlie[si].iter().enumerate() {
                if pk <= 0.0 {
                    continue;
                }
                let ts = &codebook.ts_words[k];
                for &(ell, pl) in &tables.alice[m][k] {
                    let u = &codebook.u_words[ell];
                    let letters = (0..ext.n)
                        .map(|i| {
                            let px = &ext.law.p_x_given_u_ts[u[i]][ts[i]];
                            DensityOperator::mixture(
                                px.iter().enumerate().map(|(x, &w)| (w, ext.channel.output(x, s[i]))),
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let rho = crate::qop::tensor_density(letters.iter()).expect("n >= 1");
                    let probs = decoder.probabilities(&rho)?;
                    let success: f64 = class.clone().map(|l| probs[l]).sum();
                    total += ps * pk * pl * (1.0 - success);
                }
            }
        }
    }
    Ok((total / codebook.bin_count as f64).clamp(0.0, 1.0))
}
