#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use cqgp::model::{ChannelFile, CqGpChannel, JointLaw, ProductExtension};
use cqgp::qop::{CMatrix, DensityOperator, HermitianOperator};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn random_matrix<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> HermitianOperator {
    let a = random_matrix(d, rng);
    HermitianOperator::new((&a + a.adjoint()) * c(0.5)).unwrap()
}

pub fn random_density<R: Rng>(d: usize, rng: &mut R) -> DensityOperator {
    let a = random_matrix(d, rng);
    let g = &a * a.adjoint();
    let t = g.trace().re;
    DensityOperator::new(HermitianOperator::new(g * c(1.0 / t)).unwrap()).unwrap()
}

pub fn random_pmf<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Binary symmetric conditional pmf with crossover `p`.
pub fn flip(p: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0 - p, p], vec![p, 1.0 - p]]
}

/// x = u ⊕ s̃.
pub fn xor_input() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    ]
}

/// σ0 = |0⟩, σ1 = sinθ|0⟩ + cosθ|1⟩; ρ_{x,s} = σ_{x⊕s}.
pub fn dirty_paper_channel(theta: f64) -> CqGpChannel {
    let sig = [
        DensityOperator::pure(&[c(1.0), c(0.0)]).unwrap(),
        DensityOperator::pure(&[c(theta.sin()), c(theta.cos())]).unwrap(),
    ];
    let outputs = (0..2).map(|x| (0..2).map(|s| sig[x ^ s].clone()).collect()).collect();
    CqGpChannel::new(vec!["0".into(), "1".into()], vec!["0".into(), "1".into()], outputs).unwrap()
}

/// S uniform, S̃ = S, U uniform and independent of S̃, x = u ⊕ s̃.
pub fn dirty_paper_law() -> JointLaw {
    JointLaw::new(vec![0.5, 0.5], flip(0.0), flip(0.5), xor_input()).unwrap()
}

pub fn dirty_paper(theta: f64, n: usize) -> ProductExtension {
    ProductExtension::new(n, dirty_paper_law(), dirty_paper_channel(theta)).unwrap()
}

/// S uniform, S̃ a noisy copy of S, U correlated with S̃, x = u ⊕ s̃.
pub fn noisy_law() -> JointLaw {
    JointLaw::new(vec![0.5, 0.5], flip(0.1), flip(0.3), xor_input()).unwrap()
}

/// Commuting outputs: ρ_{x,s} = diag(1−δ, δ) if x = s, else diag(δ, 1−δ).
pub fn diagonal_channel(delta: f64) -> CqGpChannel {
    let d0 = DensityOperator::diagonal(&[1.0 - delta, delta]).unwrap();
    let d1 = DensityOperator::diagonal(&[delta, 1.0 - delta]).unwrap();
    let outputs = (0..2)
        .map(|x| (0..2).map(|s| if x == s { d0.clone() } else { d1.clone() }).collect())
        .collect();
    CqGpChannel::new(vec!["0".into(), "1".into()], vec!["0".into(), "1".into()], outputs).unwrap()
}

/// |S| = 1, ρ_x = |x⟩⟨x|, U = X uniform.
pub fn orthogonal_parts() -> (CqGpChannel, JointLaw) {
    let ch = CqGpChannel::stateless(vec![
        DensityOperator::diagonal(&[1.0, 0.0]).unwrap(),
        DensityOperator::diagonal(&[0.0, 1.0]).unwrap(),
    ])
    .unwrap();
    let law = JointLaw::new(
        vec![1.0],
        vec![vec![1.0]],
        vec![vec![0.5, 0.5]],
        vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
    )
    .unwrap();
    (ch, law)
}

pub fn write_channel(dir: &Path, name: &str, channel: &CqGpChannel, law: &JointLaw) -> PathBuf {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&ChannelFile::from_parts(channel, law)).unwrap();
    std::fs::write(&path, text).unwrap();
    path
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// I[A;B] from a joint pmf `[a][b]`.
pub fn mutual_info(joint: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..joint[0].len()).map(|b| joint.iter().map(|r| r[b]).sum()).collect();
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    entropy(&pa) + entropy(&pb) - entropy(&flat)
}

pub fn words(q: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
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

fn draw<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(p).unwrap().sample(rng)
}

/// The random-coding protocol on a commuting channel, written directly in terms
/// of output letters y: Λ_u and the decoder become indicator functions of y-words.
pub struct ClassicalProtocol {
    pub n: usize,
    pub gamma: f64,
    pub eps: f64,
    pub p_s: Vec<f64>,
    pub p_ts_given_s: Vec<Vec<f64>>,
    pub p_u_given_ts: Vec<Vec<f64>>,
    pub p_x_given_u_ts: Vec<Vec<Vec<f64>>>,
    /// `[x][s][y]`
    pub p_y_given_xs: Vec<Vec<Vec<f64>>>,
    pub p_ts: Vec<f64>,
    pub p_u: Vec<f64>,
    /// `[t][s]`
    pub p_s_given_ts: Vec<Vec<f64>>,
    /// `[u][y]`
    pub p_y_given_u: Vec<Vec<f64>>,
    /// `[u][t][y]`
    pub p_y_given_u_ts: Vec<Vec<Vec<f64>>>,
    pub p_y: Vec<f64>,
    pub i_uy: f64,
    pub i_ut: f64,
    pub i_st: f64,
    pub bins: usize,
    pub per_bin: usize,
    pub quant: usize,
    lambda: HashMap<Vec<usize>, Vec<bool>>,
    g1: HashMap<Vec<usize>, f64>,
    g2: HashMap<Vec<usize>, f64>,
    g: HashMap<(Vec<usize>, Vec<usize>), f64>,
}

fn size(n: usize, rate: f64) -> usize {
    (n as f64 * rate).exp2().ceil().max(1.0) as usize
}

impl ClassicalProtocol {
    /// `p_y_given_xs` is read off the diagonals of a commuting channel.
    pub fn new(channel: &CqGpChannel, law: &JointLaw, n: usize, gamma: f64, eps: f64) -> Self {
        let (ns, nt, nu, nx) = (
            law.p_s.len(),
            law.p_u_given_ts.len(),
            law.p_u_given_ts[0].len(),
            law.p_x_given_u_ts[0][0].len(),
        );
        let dy = channel.dim_b;
        let p_y_given_xs: Vec<Vec<Vec<f64>>> = (0..nx)
            .map(|x| {
                (0..ns)
                    .map(|s| (0..dy).map(|y| channel.output(x, s).matrix()[(y, y)].re).collect())
                    .collect()
            })
            .collect();
        let p_ts: Vec<f64> = (0..nt)
            .map(|t| (0..ns).map(|s| law.p_s[s] * law.p_ts_given_s[s][t]).sum())
            .collect();
        let p_u: Vec<f64> = (0..nu)
            .map(|u| (0..nt).map(|t| p_ts[t] * law.p_u_given_ts[t][u]).sum())
            .collect();
        let p_s_given_ts: Vec<Vec<f64>> = (0..nt)
            .map(|t| (0..ns).map(|s| law.p_s[s] * law.p_ts_given_s[s][t] / p_ts[t]).collect())
            .collect();
        let p_y_given_u_ts: Vec<Vec<Vec<f64>>> = (0..nu)
            .map(|u| {
                (0..nt)
                    .map(|t| {
                        (0..dy)
                            .map(|y| {
                                (0..nx)
                                    .map(|x| {
                                        law.p_x_given_u_ts[u][t][x]
                                            * (0..ns).map(|s| p_s_given_ts[t][s] * p_y_given_xs[x][s][y]).sum::<f64>()
                                    })
                                    .sum()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let p_y_given_u: Vec<Vec<f64>> = (0..nu)
            .map(|u| {
                (0..dy)
                    .map(|y| {
                        (0..nt)
                            .map(|t| p_ts[t] * law.p_u_given_ts[t][u] / p_u[u] * p_y_given_u_ts[u][t][y])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let p_y: Vec<f64> = (0..dy)
            .map(|y| (0..nu).map(|u| p_u[u] * p_y_given_u[u][y]).sum())
            .collect();
        let joint_uy: Vec<Vec<f64>> = (0..nu)
            .map(|u| (0..dy).map(|y| p_u[u] * p_y_given_u[u][y]).collect())
            .collect();
        let joint_ut: Vec<Vec<f64>> = (0..nu)
            .map(|u| (0..nt).map(|t| p_ts[t] * law.p_u_given_ts[t][u]).collect())
            .collect();
        let joint_st: Vec<Vec<f64>> = (0..ns)
            .map(|s| (0..nt).map(|t| law.p_s[s] * law.p_ts_given_s[s][t]).collect())
            .collect();
        let (i_uy, i_ut, i_st) = (mutual_info(&joint_uy), mutual_info(&joint_ut), mutual_info(&joint_st));
        Self {
            n,
            gamma,
            eps,
            p_s: law.p_s.clone(),
            p_ts_given_s: law.p_ts_given_s.clone(),
            p_u_given_ts: law.p_u_given_ts.clone(),
            p_x_given_u_ts: law.p_x_given_u_ts.clone(),
            p_y_given_xs,
            p_ts,
            p_u,
            p_s_given_ts,
            p_y_given_u,
            p_y_given_u_ts,
            p_y,
            i_uy,
            i_ut,
            i_st,
            bins: size(n, i_uy - i_ut - 6.0 * gamma),
            per_bin: size(n, i_ut + 2.0 * gamma),
            quant: size(n, i_st + 2.0 * gamma),
            lambda: HashMap::new(),
            g1: HashMap::new(),
            g2: HashMap::new(),
            g: HashMap::new(),
        }
    }

    fn dy(&self) -> usize {
        self.p_y.len()
    }

    /// Λ_u(y) = 1[p(y|u) − 2^{n(a−γ)} p(y) ≥ −1e-10·max_y |·|] with a = I[U;Y].
    fn lambda(&mut self, u: &[usize]) -> Vec<bool> {
        if let Some(v) = self.lambda.get(u) {
            return v.clone();
        }
        let c = (self.n as f64 * (self.i_uy - self.gamma)).exp2();
        let diffs: Vec<f64> = words(self.dy(), self.n)
            .iter()
            .map(|y| {
                let py_u: f64 = y.iter().zip(u).map(|(&yy, &uu)| self.p_y_given_u[uu][yy]).product();
                let py: f64 = y.iter().map(|&yy| self.p_y[yy]).product();
                py_u - c * py
            })
            .collect();
        let scale = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let v: Vec<bool> = diffs.iter().map(|&d| d >= -1e-10 * scale).collect();
        self.lambda.insert(u.to_vec(), v.clone());
        v
    }

    fn ratio_u_t(&self, u: &[usize], t: &[usize]) -> f64 {
        u.iter()
            .zip(t)
            .map(|(&uu, &tt)| (self.p_u_given_ts[tt][uu] / self.p_u[uu]).log2())
            .sum()
    }

    fn p_u_given_t(&self, u: &[usize], t: &[usize]) -> f64 {
        u.iter().zip(t).map(|(&uu, &tt)| self.p_u_given_ts[tt][uu]).product()
    }

    fn g1(&mut self, t: &[usize]) -> f64 {
        if let Some(v) = self.g1.get(t) {
            return *v;
        }
        let cut = self.n as f64 * (self.i_ut + self.gamma);
        let v = words(self.p_u.len(), self.n)
            .iter()
            .filter(|u| self.p_u_given_t(u, t) > 0.0 && self.ratio_u_t(u, t) > cut)
            .map(|u| self.p_u_given_t(u, t))
            .sum();
        self.g1.insert(t.to_vec(), v);
        v
    }

    /// Σ_y p(y|u,t) Λ_u(y)
    fn g(&mut self, u: &[usize], t: &[usize]) -> f64 {
        let key = (u.to_vec(), t.to_vec());
        if let Some(v) = self.g.get(&key) {
            return *v;
        }
        let lam = self.lambda(u);
        let v = words(self.dy(), self.n)
            .iter()
            .zip(&lam)
            .filter(|(_, &l)| l)
            .map(|(y, _)| {
                (0..self.n)
                    .map(|i| self.p_y_given_u_ts[u[i]][t[i]][y[i]])
                    .product::<f64>()
            })
            .sum::<f64>()
            .clamp(0.0, 1.0);
        self.g.insert(key, v);
        v
    }

    fn g2(&mut self, t: &[usize]) -> f64 {
        if let Some(v) = self.g2.get(t) {
            return *v;
        }
        let cut = 1.0 - self.eps.sqrt();
        let mut v = 0.0;
        for u in words(self.p_u.len(), self.n) {
            let p = self.p_u_given_t(&u, t);
            if p > 0.0 && self.g(&u, t) <= cut {
                v += p;
            }
        }
        self.g2.insert(t.to_vec(), v);
        v
    }

    /// One transmission with a freshly drawn codebook; true on error.
    pub fn trial<R: Rng>(&mut self, rng: &mut R) -> bool {
        let n = self.n;
        let u_book: Vec<Vec<usize>> = (0..self.bins * self.per_bin)
            .map(|_| (0..n).map(|_| draw(&self.p_u, rng)).collect())
            .collect();
        let t_book: Vec<Vec<usize>> = (0..self.quant)
            .map(|_| (0..n).map(|_| draw(&self.p_ts, rng)).collect())
            .collect();
        let m = rng.gen_range(0..self.bins);
        let s: Vec<usize> = (0..n).map(|_| draw(&self.p_s, rng)).collect();

        let mut k_star = 0;
        for (k, t) in t_book.iter().enumerate() {
            let z: f64 = rng.gen();
            let log2r: f64 = t
                .iter()
                .zip(&s)
                .map(|(&tt, &ss)| (self.p_ts_given_s[ss][tt] / self.p_ts[tt]).log2())
                .sum::<f64>()
                - n as f64 * (self.i_st + self.gamma);
            if z <= log2r.min(0.0).exp2() && self.g1(t) < self.eps.sqrt() && self.g2(t) < self.eps.powf(0.25) {
                k_star = k;
                break;
            }
        }
        let t = t_book[k_star].clone();

        let class = m * self.per_bin..(m + 1) * self.per_bin;
        let mut ell_star = class.start;
        for ell in class {
            let eta: f64 = rng.gen();
            let u = u_book[ell].clone();
            let log2r = self.ratio_u_t(&u, &t) - n as f64 * (self.i_ut + self.gamma);
            if eta <= log2r.min(0.0).exp2() && self.g(&u, &t) > 1.0 - self.eps.sqrt() {
                ell_star = ell;
                break;
            }
        }
        let u = &u_book[ell_star];
        let x: Vec<usize> = (0..n).map(|i| draw(&self.p_x_given_u_ts[u[i]][t[i]], rng)).collect();
        let y: Vec<usize> = (0..n).map(|i| draw(&self.p_y_given_xs[x[i]][s[i]], rng)).collect();

        let y_index = y.iter().fold(0, |acc, &b| acc * self.dy() + b);
        let hits: Vec<usize> = (0..u_book.len())
            .filter(|&l| self.lambda(&u_book[l].clone())[y_index])
            .collect();
        if hits.is_empty() {
            return true;
        }
        let decoded = hits[rng.gen_range(0..hits.len())];
        decoded / self.per_bin != m
    }
}
