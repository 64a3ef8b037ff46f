use num_complex::Complex64;
use rand::RngCore;

use super::*;
use crate::model::tests::random_instance;
use crate::model::{all_words, CqGpChannel, JointLaw, ProductExtension};
use crate::qop::DensityOperator;

/// Every uniform draw is 0.
struct ZeroRng;

impl RngCore for ZeroRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        dest.fill(0);
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        dest.fill(0);
        Ok(())
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// σ0 = |0⟩, σ1 = sinθ|0⟩ + cosθ|1⟩; ρ_{x,s} = σ_{x⊕s}; S uniform, S̃ = S,
/// U uniform and independent of S̃, x = u ⊕ s̃.
fn dirty_paper(theta: f64, n: usize) -> ProductExtension {
    let sig = [
        DensityOperator::pure(&[c(1.0), c(0.0)]).unwrap(),
        DensityOperator::pure(&[c(theta.sin()), c(theta.cos())]).unwrap(),
    ];
    let outputs = (0..2).map(|x| (0..2).map(|s| sig[x ^ s].clone()).collect()).collect();
    let ch = CqGpChannel::new(vec!["0".into(), "1".into()], vec!["0".into(), "1".into()], outputs).unwrap();
    let law = JointLaw::new(
        vec![0.5, 0.5],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ],
    )
    .unwrap();
    ProductExtension::new(n, law, ch).unwrap()
}

/// |S| = 1, ρ_x = |x⟩⟨x| on a qubit, U = X uniform.
fn orthogonal(n: usize) -> ProductExtension {
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
    ProductExtension::new(n, law, ch).unwrap()
}

fn protocol(ext: ProductExtension) -> Protocol {
    let params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    Protocol::new(ext, params).unwrap()
}

fn brute_g1(ext: &ProductExtension, ts: &[usize], bound: f64, gamma: f64) -> f64 {
    let pu = ext.p_u_letter();
    all_words(ext.law.u_size(), ext.n)
        .into_iter()
        .filter_map(|u| {
            let p = ext.p_u_given_ts_word(&u, ts);
            if p <= 0.0 {
                return None;
            }
            let llr: f64 = u
                .iter()
                .zip(ts)
                .map(|(&a, &t)| (ext.law.p_u_given_ts[t][a] / pu[a]).log2())
                .sum();
            (llr > ext.n as f64 * (bound + gamma)).then_some(p)
        })
        .sum()
}

fn brute_g2(ext: &ProductExtension, ts: &[usize], a: f64, gamma: f64, eps: f64) -> f64 {
    all_words(ext.law.u_size(), ext.n)
        .into_iter()
        .filter(|u| ext.p_u_given_ts_word(u, ts) > 0.0)
        .filter(|u| test_value(ext, u, ts, a, gamma).unwrap() <= 1.0 - eps.sqrt())
        .map(|u| ext.p_u_given_ts_word(&u, ts))
        .sum()
}

#[test]
fn g1_matches_enumeration() {
    for seed in 0..20 {
        for n in [2, 3] {
            let ext = random_instance(seed, n);
            let oracles = RateOracles::from_extension(&ext).unwrap();
            for ts in all_words(2, n) {
                for bound in [0.0, oracles.i_u_ts, 0.3] {
                    let got = g1(&ext, &ts, bound, 0.05).unwrap();
                    let want = brute_g1(&ext, &ts, bound, 0.05);
                    assert!((got - want).abs() < 1e-12, "seed {seed} ts {ts:?}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn g1_trivial_regimes() {
    let ext = dirty_paper(0.3, 4);
    // U independent of S̃: every log-ratio is 0.
    assert_eq!(g1(&ext, &[0, 1, 1, 0], 0.0, 0.05).unwrap(), 0.0);
    assert_eq!(g1(&ext, &[0, 1, 1, 0], -10.0, 0.05).unwrap(), 1.0);
    assert!(matches!(
        g1(&ext, &[0, 1], 0.0, 0.05),
        Err(crate::Error::DimensionMismatch(_))
    ));
}

#[test]
fn g2_matches_enumeration() {
    for seed in 0..10 {
        for n in [1, 2, 3] {
            let ext = random_instance(seed, n);
            let oracles = RateOracles::from_extension(&ext).unwrap();
            for ts in all_words(2, n) {
                for eps in [1e-4, 0.01] {
                    let got = g2(&ext, &ts, oracles.i_ub, 0.05, eps).unwrap();
                    let want = brute_g2(&ext, &ts, oracles.i_ub, 0.05, eps);
                    assert!(
                        got.lower <= want + 1e-12 && want <= got.upper() + 1e-12,
                        "{got:?} vs {want}"
                    );
                    assert!(got.residual < G2_RESIDUAL);
                }
            }
        }
    }
}

#[test]
fn g2_trivial_projectors() {
    let ext = dirty_paper(0.3, 3);
    // Threshold 2^{n(a−γ)} underflows to 0: Λ = I.
    let g = g2(&ext, &[0, 1, 0], -1e6, 0.05, 1e-4).unwrap();
    assert_eq!(g.lower, 0.0);
    // Threshold far above every eigenvalue: Λ = 0.
    let g = g2(&ext, &[0, 1, 0], 50.0, 0.05, 1e-4).unwrap();
    assert!((g.lower - 1.0).abs() < 1e-12);
}

#[test]
fn best_first_visit_is_sorted_and_complete() {
    let letters = vec![
        vec![(0, 0.7), (1, 0.3)],
        vec![(0, 0.2), (1, 0.5), (2, 0.3)],
        vec![(0, 0.9), (1, 0.1)],
    ];
    let mut seen = Vec::new();
    let rest = visit_by_probability(&letters, 0.0, |w, p| {
        seen.push((w.to_vec(), p));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen.len(), 12);
    assert_eq!(rest, 0.0);
    assert!(seen.windows(2).all(|w| w[0].1 >= w[1].1 - 1e-15));
    let mut words: Vec<_> = seen.iter().map(|s| s.0.clone()).collect();
    words.sort();
    words.dedup();
    assert_eq!(words.len(), 12);
}

#[test]
fn charlie_with_zero_draws_takes_first_gated_index() {
    let proto = protocol(random_instance(3, 3));
    for seed in 0..5 {
        let cb = codebook_for_batch(&proto, seed, 0).unwrap();
        let s_word = vec![0, 1, 1];
        let out = charlie_encode(&proto, &cb, &s_word, &mut ZeroRng).unwrap();
        let want = cb.ts_words.iter().position(|t| proto.charlie_gate(t).unwrap());
        match want {
            Some(k) => assert_eq!((out.k, out.found), (k, true)),
            None => assert_eq!((out.k, out.found), (0, false)),
        }
    }
}

#[test]
fn charlie_falls_back_to_first_index() {
    let ext = dirty_paper(0.04, 3);
    let mut params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    // g1 = 1 for every s̃-word.
    params.bound_u_ts = -10.0;
    let proto = Protocol::new(ext, params).unwrap();
    let cb = codebook_for_batch(&proto, 1, 0).unwrap();
    let out = charlie_encode(&proto, &cb, &[1, 0, 1], &mut ZeroRng).unwrap();
    assert_eq!((out.k, out.found), (0, false));
    assert_eq!(out.zeta_hits.len(), cb.quant_count());
    assert!(out.zeta_hits.iter().all(|h| !h.1));
}

#[test]
fn charlie_selection_ignores_later_codewords() {
    let proto = protocol(dirty_paper(0.04, 3));
    for seed in 0..30 {
        let mut cb = codebook_for_batch(&proto, seed, 0).unwrap();
        let s_word = vec![(seed % 2) as usize, 1, 0];
        let a = charlie_encode(&proto, &cb, &s_word, &mut stream_rng(seed, 9, 0)).unwrap();
        if !a.found {
            continue;
        }
        cb.ts_words.extend(vec![vec![0, 0, 0], vec![1, 1, 1]]);
        let b = charlie_encode(&proto, &cb, &s_word, &mut stream_rng(seed, 9, 0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn acceptance_ratio_is_clipped() {
    let ext = dirty_paper(0.04, 2);
    assert_eq!(charlie_acceptance(&ext, &[0, 1], &[0, 1], 0.0, 0.05), 1.0);
    let r = charlie_acceptance(&ext, &[0, 1], &[0, 1], 1.0, 0.05);
    assert!((r - 2f64.powf(2.0 - 2.1)).abs() < 1e-12);
    assert_eq!(charlie_acceptance(&ext, &[0, 1], &[1, 1], 0.0, 0.05), 0.0);
    assert!((alice_acceptance(&ext, &[1, 1], &[0, 1], 0.0, 0.05) - 2f64.powf(-0.1)).abs() < 1e-12);
}

#[test]
fn alice_falls_back_to_first_codeword_of_class() {
    let ext = dirty_paper(0.04, 3);
    let mut params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    // Λ = 0, so g = 0 for every pair.
    params.lambda_a = 50.0;
    let proto = Protocol::new(ext, params).unwrap();
    let cb = codebook_for_batch(&proto, 2, 0).unwrap();
    let m = cb.bin_count - 1;
    let out = alice_encode(&proto, &cb, m, 0, &mut ZeroRng).unwrap();
    assert_eq!((out.ell, out.found), (cb.class_range(m).start, false));
    assert_eq!(out.draws, cb.words_per_bin);
}

#[test]
fn alice_takes_smallest_index_when_everything_qualifies() {
    let ext = dirty_paper(0.04, 3);
    let mut params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    params.bound_u_ts = -10.0;
    params.lambda_a = -1e6;
    let proto = Protocol::new(ext, params).unwrap();
    let cb = codebook_for_batch(&proto, 4, 0).unwrap();
    for m in 0..cb.bin_count {
        let out = alice_encode(&proto, &cb, m, 1, &mut stream_rng(5, 5, m as u64)).unwrap();
        assert_eq!((out.ell, out.found, out.draws), (cb.class_range(m).start, true, 1));
    }
}

#[test]
fn deterministic_input_is_a_function_of_the_words() {
    let proto = protocol(dirty_paper(0.04, 4));
    let cb = codebook_for_batch(&proto, 3, 0).unwrap();
    for seed in 0..20 {
        let out = alice_encode(&proto, &cb, 0, 2, &mut stream_rng(seed, 1, 1)).unwrap();
        let u = &cb.u_words[out.ell];
        let want: Vec<usize> = u.iter().zip(&cb.ts_words[2]).map(|(a, b)| a ^ b).collect();
        assert_eq!(out.x_word, want);
    }
    assert!(alice_encode(&proto, &cb, cb.bin_count, 0, &mut ZeroRng).is_err());
    assert!(alice_encode(&proto, &cb, 0, cb.quant_count(), &mut ZeroRng).is_err());
}

#[test]
fn orthogonal_detectors_are_a_fixed_point() {
    let ext = orthogonal(3);
    let params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    let words = vec![vec![0, 0, 1], vec![1, 0, 1], vec![1, 1, 1], vec![0, 1, 0]];
    let cb = Codebook::new(3, 2, 2, words.clone(), vec![vec![0, 0, 0]]).unwrap();
    let dec = build_decoder(&ext, &cb, params.lambda_a, params.gamma).unwrap();
    let povm = dec.povm().unwrap();
    for (l, w) in words.iter().enumerate() {
        let lam = ext.lambda_operator(w, params.lambda_a, params.gamma).unwrap();
        assert_eq!(lam.rank(), 1);
        assert!(povm.elements[l].max_abs_diff(&lam) < 1e-12);
    }
    let r = dec.validate().unwrap();
    assert!(r.completeness_deviation < 1e-12);
}

#[test]
fn single_codeword_gives_support_projector() {
    let ext = dirty_paper(0.3, 2);
    let params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    let cb = Codebook::new(2, 1, 1, vec![vec![1, 0]], vec![vec![0, 0]]).unwrap();
    let dec = build_decoder(&ext, &cb, params.lambda_a, params.gamma).unwrap();
    let lam = ext.lambda_operator(&[1, 0], params.lambda_a, params.gamma).unwrap();
    let povm = dec.povm().unwrap();
    assert!(povm.elements[0].max_abs_diff(&lam) < 1e-10);
}

#[test]
fn duplicate_codewords_share_elements() {
    let ext = random_instance(8, 2);
    let params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    let words = vec![vec![0, 1], vec![0, 1], vec![1, 1], vec![0, 0]];
    let cb = Codebook::new(2, 2, 2, words, vec![vec![0, 0]]).unwrap();
    let dec = build_decoder(&ext, &cb, params.lambda_a, params.gamma).unwrap();
    let povm = dec.povm().unwrap();
    assert!(povm.elements[0].max_abs_diff(&povm.elements[1]) < 1e-14);
    assert_eq!(dec.counts.iter().sum::<usize>(), 4);
    dec.validate().unwrap();
}

#[test]
fn decoder_probabilities_agree_with_explicit_povm() {
    let proto = protocol(random_instance(5, 3));
    let cb = codebook_for_batch(&proto, 0, 0).unwrap();
    let dec = build_decoder(&proto.ext, &cb, proto.params.lambda_a, proto.params.gamma).unwrap();
    let povm = dec.povm().unwrap();
    let ch = &proto.ext.channel;
    for (x, s) in [([0, 1, 1], [1, 0, 0]), ([1, 1, 1], [0, 0, 1])] {
        let rho = ch.output_word(&x, &s);
        let a = dec.probabilities(&rho).unwrap();
        let b = povm.probabilities(&rho).unwrap();
        let f = dec.probabilities_factored(&ch.output_factor(&x, &s).unwrap()).unwrap();
        for i in 0..a.len() {
            assert!((a[i] - b[i]).abs() < 1e-10);
            assert!((a[i] - f[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn bob_decode_inverts_the_partition() {
    let cb = Codebook::new(1, 4, 3, vec![vec![0]; 12], vec![vec![0]]).unwrap();
    for m in 0..4 {
        for ell in cb.class_range(m) {
            assert_eq!(bob_decode(ell, &cb), Decoded::Message(m));
        }
    }
    assert_eq!(bob_decode(9, &cb), Decoded::Message(3));
    assert_eq!(bob_decode(12, &cb), Decoded::Failure);
    assert!(Codebook::new(1, 4, 3, vec![vec![0]; 11], vec![vec![0]]).is_err());
}

#[test]
fn codebook_letters_follow_the_marginal() {
    let ext = random_instance(12, 1);
    let mut params = ProtocolParams::for_extension(&ext, 0.05, 1e-4).unwrap();
    params.bin_count = 10_000;
    params.words_per_bin = 1;
    params.quant_count = 10_000;
    let cb = generate_codebooks(&ext, &params, &mut stream_rng(3, 3, 3)).unwrap();
    for (words, p) in [
        (&cb.u_words, ext.p_u_letter().to_vec()),
        (&cb.ts_words, ext.p_ts_letter().to_vec()),
    ] {
        let total = words.len() as f64;
        for (a, &pa) in p.iter().enumerate() {
            let k = words.iter().filter(|w| w[0] == a).count() as f64;
            let sigma = (pa * (1.0 - pa) / total).sqrt();
            assert!(
                (k / total - pa).abs() <= 3.0 * sigma,
                "letter {a}: {} vs {pa}",
                k / total
            );
        }
    }
}

#[test]
fn degenerate_u_alphabet_gives_identical_codewords() {
    let ch = CqGpChannel::stateless(vec![DensityOperator::maximally_mixed(2)]).unwrap();
    let law = JointLaw::new(vec![1.0], vec![vec![1.0]], vec![vec![1.0]], vec![vec![vec![1.0]]]).unwrap();
    let proto = protocol(ProductExtension::new(3, law, ch).unwrap());
    let cb = codebook_for_batch(&proto, 0, 0).unwrap();
    assert!(cb.u_words.iter().all(|w| w == &vec![0, 0, 0]));
    assert_eq!(cb, codebook_for_batch(&proto, 0, 0).unwrap());
}

#[test]
fn simulation_is_deterministic() {
    let proto = protocol(dirty_paper(0.04, 3));
    let cfg = SimConfig::new(60, 17);
    let a = simulate(&proto, &cfg).unwrap();
    let b = simulate(&proto, &cfg).unwrap();
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.error, b.error);
    assert!(simulate(&proto, &SimConfig::new(0, 1)).is_err());
}

#[test]
fn traces_are_consistent() {
    let proto = protocol(dirty_paper(0.04, 3));
    let mut cfg = SimConfig::new(80, 2);
    cfg.batch_size = 8;
    let r = simulate(&proto, &cfg).unwrap();
    assert_eq!(r.traces.len(), 80);
    for (i, t) in r.traces.iter().enumerate() {
        let cb = codebook_for_batch(&proto, 2, (i / 8) as u64).unwrap();
        assert_eq!(t.trial, i);
        assert!(t.m < cb.bin_count && t.k_star < cb.quant_count() && t.ell_star < cb.len());
        assert_eq!(cb.class_of(t.ell_star), t.m);
        if t.e1 {
            assert_eq!(t.k_star, 0);
        }
        if t.e2 {
            assert_eq!(t.ell_star, cb.class_range(t.m).start);
        }
        assert_eq!(t.error, t.decoded_m != Some(t.m));
    }
    let mut buf = Vec::new();
    write_traces_csv(&r.traces, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 81);
}

#[test]
fn noiseless_orthogonal_channel_decodes() {
    let ext = orthogonal(8);
    let oracles = RateOracles::from_extension(&ext).unwrap();
    assert!((oracles.i_ub - 1.0).abs() < 1e-12);
    let params = ProtocolParams::with_rates(&oracles, 8, 0.05, 1e-4, 0.2, 0.1, 0.1).unwrap();
    let proto = Protocol::new(ext, params).unwrap();
    let mut cfg = SimConfig::new(1000, 5);
    cfg.batch_size = 10;
    let r = simulate(&proto, &cfg).unwrap();
    assert!(r.error.ci_high < 0.05, "{:?}", r.error);
}

#[test]
fn rate_above_alphabet_size_fails() {
    let ext = orthogonal(4);
    let oracles = RateOracles::from_extension(&ext).unwrap();
    let params = ProtocolParams::with_rates(&oracles, 4, 0.05, 1e-4, 2.0, 0.0, 0.0).unwrap();
    let proto = Protocol::new(ext, params).unwrap();
    let r = simulate(&proto, &SimConfig::new(500, 6)).unwrap();
    assert!(r.error.estimate > 0.5, "{:?}", r.error);
}

#[test]
fn wilson_interval_examples() {
    let (lo, hi) = wilson_interval(0, 1000, 1.96);
    assert_eq!(lo, 0.0);
    assert!((hi - 0.003_826).abs() < 1e-5);
    let (lo, hi) = wilson_interval(50, 100, 1.96);
    assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5);
    assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
}
