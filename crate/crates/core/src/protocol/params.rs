use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infospec::{holevo_information, mutual_information_joint};
use crate::model::ProductExtension;

/// Largest codebook dimension the simulator will allocate.
pub const MAX_COUNT: f64 = (1u64 << 22) as f64;

/// Single-letter information quantities used to set rates and thresholds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RateOracles {
    /// Holevo quantity of {p(u), ρ_{B|u}}.
    pub i_ub: f64,
    pub i_u_ts: f64,
    pub i_s_ts: f64,
}

impl RateOracles {
    pub fn from_extension(ext: &ProductExtension) -> Result<Self> {
        let pu = ext.p_u_letter();
        let ensemble: Vec<_> = (0..pu.len())
            .filter(|&u| pu[u] > 0.0)
            .map(|u| (pu[u], ext.cond_b_letter(u).clone()))
            .collect();
        let total: f64 = ensemble.iter().map(|e| e.0).sum();
        let ensemble: Vec<_> = ensemble.into_iter().map(|(p, r)| (p / total, r)).collect();
        Ok(Self {
            i_ub: holevo_information(&ensemble)?,
            i_u_ts: mutual_information_joint(&ext.law.joint_u_ts()),
            i_s_ts: mutual_information_joint(&ext.law.joint_s_ts()),
        })
    }
}

/// Block length, slack parameters, rates and the derived codebook sizes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProtocolParams {
    pub n: usize,
    pub gamma: f64,
    pub eps: f64,
    #[serde(rename = "rate_R")]
    pub rate_message: f64,
    #[serde(rename = "rate_r")]
    pub rate_bin: f64,
    #[serde(rename = "rate_RS")]
    pub rate_state: f64,
    pub bin_count: usize,
    pub words_per_bin: usize,
    pub quant_count: usize,
    /// Exponent a in Λ_u = {ρ_{B|u} ⪰ 2^{n(a−γ)} Θ_B}.
    pub lambda_a: f64,
    /// Bound in T_n(p_{US̃}) and in Alice's acceptance ratio.
    pub bound_u_ts: f64,
    /// Bound in Charlie's acceptance ratio.
    pub bound_s_ts: f64,
}

fn count(n: usize, rate: f64, what: &str) -> Result<usize> {
    let v = (n as f64 * rate).exp2().ceil().max(1.0);
    if !v.is_finite() || v > MAX_COUNT {
        return Err(Error::InvalidParameter(format!(
            "{what} = 2^(n·{rate}) at n = {n} exceeds the allocation limit"
        )));
    }
    Ok(v as usize)
}

/// ε ∈ (0,1) with ε + √ε + ε^{1/4} < 1.
pub fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) || eps + eps.sqrt() + eps.powf(0.25) >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} must satisfy eps + sqrt(eps) + eps^(1/4) < 1"
        )));
    }
    Ok(())
}

impl ProtocolParams {
    /// R = I[U;B] − I[U;S̃] − 6γ, r = I[U;S̃] + 2γ, R_S = I[S;S̃] + 2γ.
    pub fn from_oracles(oracles: &RateOracles, n: usize, gamma: f64, eps: f64) -> Result<Self> {
        Self::with_rates(
            oracles,
            n,
            gamma,
            eps,
            oracles.i_ub - oracles.i_u_ts - 6.0 * gamma,
            oracles.i_u_ts + 2.0 * gamma,
            oracles.i_s_ts + 2.0 * gamma,
        )
    }

    pub fn for_extension(ext: &ProductExtension, gamma: f64, eps: f64) -> Result<Self> {
        Self::from_oracles(&RateOracles::from_extension(ext)?, ext.n, gamma, eps)
    }

    pub fn with_rates(
        oracles: &RateOracles,
        n: usize,
        gamma: f64,
        eps: f64,
        rate_message: f64,
        rate_bin: f64,
        rate_state: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        check_eps(eps)?;
        for (v, name) in [(rate_message, "rate_R"), (rate_bin, "rate_r"), (rate_state, "rate_RS")] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        let bin_count = count(n, rate_message, "bin_count")?;
        let words_per_bin = count(n, rate_bin, "words_per_bin")?;
        let quant_count = count(n, rate_state, "quant_count")?;
        if bin_count as f64 * words_per_bin as f64 > MAX_COUNT {
            return Err(Error::InvalidParameter(
                "codebook size exceeds the allocation limit".into(),
            ));
        }
        Ok(Self {
            n,
            gamma,
            eps,
            rate_message,
            rate_bin,
            rate_state,
            bin_count,
            words_per_bin,
            quant_count,
            lambda_a: oracles.i_ub,
            bound_u_ts: oracles.i_u_ts,
            bound_s_ts: oracles.i_s_ts,
        })
    }

    pub fn codeword_count(&self) -> usize {
        self.bin_count * self.words_per_bin
    }

    pub fn error_budget(&self) -> Result<f64> {
        error_budget(self.n, self.gamma, self.eps)
    }
}

/// 6ε + 3√ε + 3ε^{1/4} + 2√ε/(1 − ε − √ε − ε^{1/4}) + 3exp(−2^{nγ}).
pub fn error_budget(n: usize, gamma: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let (s2, s4) = (eps.sqrt(), eps.powf(0.25));
    let denom = 1.0 - eps - s2 - s4;
    Ok(6.0 * eps + 3.0 * s2 + 3.0 * s4 + 2.0 * s2 / denom + 3.0 * (-(n as f64 * gamma).exp2()).exp())
}

/// Upper bound on Pr{E1}: ε + √ε + ε^{1/4} + exp(−2^{nγ}).
pub fn e1_bound(n: usize, gamma: f64, eps: f64) -> f64 {
    eps + eps.sqrt() + eps.powf(0.25) + (-(n as f64 * gamma).exp2()).exp()
}

/// Upper bound on Pr{E1ᶜ ∩ E2}: √ε + ε^{1/4} + exp(−2^{nγ}).
pub fn e2_bound(n: usize, gamma: f64, eps: f64) -> f64 {
    eps.sqrt() + eps.powf(0.25) + (-(n as f64 * gamma).exp2()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracles() -> RateOracles {
        RateOracles {
            i_ub: 0.9,
            i_u_ts: 0.2,
            i_s_ts: 0.5,
        }
    }

    #[test]
    fn default_rates_follow_the_construction() {
        let p = ProtocolParams::from_oracles(&oracles(), 6, 0.05, 1e-4).unwrap();
        assert!((p.rate_message - (0.9 - 0.2 - 0.3)).abs() < 1e-15);
        assert!((p.rate_bin - 0.3).abs() < 1e-15);
        assert!((p.rate_state - 0.6).abs() < 1e-15);
        assert_eq!(p.bin_count, (6.0f64 * 0.4).exp2().ceil() as usize);
        assert_eq!(p.words_per_bin, 4);
        assert_eq!(p.quant_count, 13);
    }

    #[test]
    fn counts_are_at_least_one() {
        let p = ProtocolParams::with_rates(&oracles(), 4, 0.05, 1e-4, -1.0, 0.0, -0.5).unwrap();
        assert_eq!((p.bin_count, p.words_per_bin, p.quant_count), (1, 1, 1));
    }

    #[test]
    fn budget_arithmetic() {
        // nγ = 10
        let eps: f64 = 1e-4;
        let b = error_budget(200, 0.05, eps).unwrap();
        let denom = 1.0 - 1e-4 - 1e-2 - 0.1;
        let want = 6e-4 + 3e-2 + 3e-1 + 2e-2 / denom + 3.0 * (-1024.0f64).exp();
        assert!((b - want).abs() < 1e-15);
        assert!((b - 0.353_074_435_329_812_4).abs() < 1e-12);
        assert!(error_budget(1000, 0.1, 1e-12).unwrap() < 1e-2);
        assert!(error_budget(4, 0.05, 0.2).is_err());
        assert!(error_budget(4, 0.05, 0.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ProtocolParams::from_oracles(&oracles(), 0, 0.05, 1e-4).is_err());
        assert!(ProtocolParams::from_oracles(&oracles(), 4, 0.0, 1e-4).is_err());
        assert!(ProtocolParams::with_rates(&oracles(), 40, 0.05, 1e-4, 1.0, 1.0, 0.0).is_err());
    }
}
