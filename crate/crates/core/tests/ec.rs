use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rotcode::channels::{lindblad_oracle, loss_dephasing, KrausChannel, NoiseParams};
use rotcode::codes::{standard_code, CodeParams, Family, RotationCode};
use rotcode::ec::*;
use rotcode::gates::{error_op, ErrorOp};
use rotcode::measurements::{canonical_phase_povm, default_bins};
use rotcode::{CMat, ModeSpace, C64};
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn binomial(k: usize, n: usize) -> RotationCode {
    standard_code(&CodeParams::Binomial { k }, n).unwrap()
}

fn cat(alpha: f64, n: usize) -> RotationCode {
    standard_code(&CodeParams::Cat { alpha }, n).unwrap()
}

fn noise(kt: f64, kp: f64) -> NoiseParams {
    NoiseParams::new(kt, kp).unwrap()
}

fn config(code: RotationCode, kt: f64, kp: f64) -> EcConfig {
    EcConfig::new(code, noise(kt, kp)).unwrap()
}

fn single_loss(code: &RotationCode) -> Noise {
    let space = code.space();
    Noise::Custom(KrausChannel::from_ops(space, vec![error_op(&ErrorOp::new(-1, 0.0), space).unwrap()]).unwrap())
}

#[test]
fn noiseless_ec_is_perfect() {
    for n in [2, 3] {
        for code in [cat(3.0, n), binomial(3, n)] {
            for flavor in [Flavor::Knill, Flavor::Hybrid] {
                for scheme in [Scheme::Ideal, Scheme::PrettyGood] {
                    let cfg = config(code.clone(), 0.0, 0.0).with_flavor(flavor).with_scheme(scheme);
                    let r = telecorrect_channel(&cfg).unwrap();
                    assert!(r.infidelity() <= 1e-10, "{} {}", cfg.describe(), r.infidelity());
                }
            }
        }
    }
}

#[test]
fn single_loss_is_corrected_with_ideal_measurements() {
    let mut codes = vec![cat(4.0, 2)];
    codes.extend([2, 3, 4].map(|n| binomial(3, n)));
    for code in codes {
        for flavor in [Flavor::Knill, Flavor::Hybrid] {
            let cfg = config(code.clone(), 0.0, 0.0).with_noise(single_loss(&code)).with_scheme(Scheme::Ideal).with_flavor(flavor);
            let r = telecorrect_channel(&cfg).unwrap();
            assert!(r.infidelity() <= 1e-9, "{} {}", cfg.describe(), r.infidelity());
        }
    }
}

#[test]
fn hybrid_agrees_with_knill() {
    for k in [2, 4, 8] {
        let cfg = config(binomial(k, 3), 1e-3, 1e-3);
        let knill = telecorrect_channel(&cfg).unwrap().infidelity();
        let hybrid = hybrid_ec_channel(&cfg).unwrap().infidelity();
        assert!((knill - hybrid).abs() <= 2e-3, "K={k}: {knill:e} vs {hybrid:e}");
    }
}

#[test]
fn ml_decode_conventions() {
    assert_eq!(ml_decode(&[vec![0.5, 0.5, 0.0, 0.0]]).unwrap(), vec![0]);
    assert_eq!(ml_decode(&[vec![0.1, 0.2, 0.2, 0.0]]).unwrap(), vec![1]);
    assert_eq!(ml_decode(&[vec![0.0; 4]]).unwrap(), vec![0]);
    assert_eq!(ml_decode(&[vec![0.0, 0.0, 0.0, 1.0], vec![0.3, 0.0, 0.7, 0.0]]).unwrap(), vec![3, 2]);
    assert_eq!(ml_decode(&[vec![-1e-13, 0.5, 0.0, 0.0]]).unwrap(), vec![1]);
    assert!(ml_decode(&[vec![-1e-6, 0.5, 0.0, 0.0]]).is_err());
}

#[test]
fn decoder_frame_on_two_fold_cats() {
    let (n, m) = (2, 2);
    let cfg = config(cat(3.0, n), 0.0, 0.0).with_mid_code(cat(4.0, m)).with_scheme(Scheme::Phase);
    let r = telecorrect_channel(&cfg).unwrap();
    let bin = |theta: f64, theta0: f64, bins: usize| {
        let w = 2.0 * PI / bins as f64;
        ((theta + 0.25 * w - theta0) / w).floor().rem_euclid(bins as f64) as usize
    };
    let (jd, jm) = (default_bins(n), default_bins(n * m));
    let data = |t: f64| bin(t, -PI / (2 * n) as f64, jd);
    let mid = |t: f64| bin(t, -PI / (2 * n * m) as f64, jm);
    let decision = |o: (usize, usize)| r.outcome_stats.iter().find(|s| s.outcome == o).map(|s| s.decision);
    assert_eq!(decision((data(0.0), mid(0.0))), Some(0));
    assert_eq!(decision((data(0.0), mid(PI / m as f64))), Some(2));
    assert_eq!(decision((data(PI / n as f64), mid(0.0))), Some(1));
    assert_eq!(decision((data(PI / n as f64), mid(PI / m as f64))), Some(3));
}

#[test]
fn outcome_statistics_are_normalized() {
    let r = telecorrect_channel(&config(binomial(2, 2), 0.02, 0.01).with_scheme(Scheme::Phase)).unwrap();
    let total: f64 = r.outcome_stats.iter().map(|s| s.probability).sum();
    assert_abs_diff_eq!(total, r.raw_trace, epsilon = 1e-12);
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    for s in &r.outcome_stats {
        let p: f64 = s.posterior.iter().sum();
        assert!((p - 1.0).abs() < 1e-9 || p == 0.0);
        let best = s.posterior.iter().cloned().fold(0.0, f64::max);
        assert_eq!(s.posterior[s.decision], best);
    }
}

#[test]
fn trivial_baseline_examples() {
    assert_eq!(trivial_baseline(noise(0.0, 0.0)), 0.0);
    for kt in [1e-4, 1e-3, 1e-2, 0.3] {
        let g = 1.0 - (-kt as f64).exp();
        let f_ent = (1.0 + (1.0 - g).sqrt()).powi(2) / 4.0;
        assert_abs_diff_eq!(trivial_baseline(noise(kt, 0.0)), 1.0 - (2.0 * f_ent + 1.0) / 3.0, epsilon = 1e-15);
    }
    let kt = 1e-4;
    assert!((1.0 - (1.0 + (-kt as f64 / 2.0).exp()).powi(2) / 4.0 - kt / 2.0).abs() < kt * kt);
    assert!((trivial_baseline(noise(kt, 0.0)) - kt / 3.0).abs() < kt * kt);
}

#[test]
fn trivial_baseline_matches_two_level_master_equation() {
    for (kt, kp) in [(1e-3, 1e-3), (0.05, 0.2)] {
        let s = lindblad_oracle(ModeSpace::new(2).unwrap(), noise(kt, kp), 1.0).unwrap();
        // vec indices of |0⟩⟨0|, |0⟩⟨1|, |1⟩⟨0|, |1⟩⟨1|
        let f_ent = (s[(0, 0)] + s[(1, 1)] + s[(2, 2)] + s[(3, 3)]).re / 4.0;
        assert_abs_diff_eq!(trivial_baseline(noise(kt, kp)), 1.0 - (2.0 * f_ent + 1.0) / 3.0, epsilon = 1e-12);
    }
}

#[test]
fn reports_are_cptp() {
    let cases = [
        config(binomial(2, 2), 0.02, 0.01).with_scheme(Scheme::Phase),
        config(binomial(3, 3), 1e-3, 1e-3),
        config(cat(2.5, 2), 0.05, 0.0).with_flavor(Flavor::Hybrid),
        config(binomial(3, 2), 0.01, 0.01).with_scheme(Scheme::Ideal),
    ];
    for cfg in cases {
        let r = telecorrect_channel(&cfg).unwrap();
        let (lo, tp) = r.cptp_defects().unwrap();
        assert!(lo >= -1e-8 && tp <= 1e-8, "{} {lo:e} {tp:e}", cfg.describe());
        assert_abs_diff_eq!(r.avg_gate_fidelity, (2.0 * r.ent_fidelity + 1.0) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.logical_process.trace().re, 2.0, epsilon = 1e-12);
        assert!(r.config.contains(cfg.scheme.name()));
    }
}

#[test]
fn channel_acts_linearly_on_logical_states() {
    let cfg = config(binomial(3, 2), 0.02, 0.01);
    let r = telecorrect_channel(&cfg).unwrap();
    for (x, y, z) in [(1.0, 0.0, 0.0), (0.0, 0.6, -0.8), (0.3, -0.4, 0.5)] {
        let rho = bloch_density(x, y, z);
        let direct = telecorrect_state(&cfg, &rho).unwrap();
        let via = r.apply(&rho);
        assert!((direct - via).norm() <= 1e-9);
    }
}

#[test]
fn scheme_names_round_trip() {
    for s in [Scheme::Phase, Scheme::PrettyGood, Scheme::Ideal] {
        assert_eq!(Scheme::parse(s.name()), Some(s));
    }
    assert_eq!(Scheme::parse("optimal"), None);
}

#[test]
fn family_grid_steps() {
    assert_eq!(family_grid(Family::Binomial, 3, 6.0), (1..=4).map(|k| CodeParams::Binomial { k }).collect::<Vec<_>>());
    let cats = family_grid(Family::Cat, 3, 4.0);
    assert_eq!(cats.len(), 8);
    assert_eq!(cats[7], CodeParams::Cat { alpha: 2.0 });
    assert!(family_grid(Family::ZeroN, 3, 4.0).is_empty());
}

/// Three-mode simulation of the Knill circuit: data ⊗ |+_M⟩ ⊗ |+_L⟩,
/// two controlled rotations as explicit phases, both rails measured.
fn knill_by_brute_force(cfg: &EcConfig, noise: NoiseParams) -> CMat {
    let (data, mid, out) = (&cfg.data_code, &cfg.mid_ancilla_code, &cfg.out_code);
    let (n, m, l) = (data.order(), mid.order(), out.order());
    let (dd, dm, dout) = (data.space().dim(), mid.space().dim(), out.space().dim());
    let ch = loss_dephasing(data.space(), noise).unwrap();
    let (j1, j2) = (cfg.data_bins.unwrap_or(default_bins(n)), cfg.mid_bins.unwrap_or(default_bins(n * m)));
    let e1 = canonical_phase_povm(data.space(), Some(data), j1, None).unwrap().dense_elements().unwrap();
    let e2 = canonical_phase_povm(mid.space(), Some(mid), j2, Some(-PI / (2 * n * m) as f64))
        .unwrap()
        .dense_elements()
        .unwrap();
    let zs = [data.codeword(0), data.codeword(1)];
    let damaged: Vec<CMat> = (0..4)
        .map(|ab| ch.apply(&(zs[ab / 2].amplitudes() * zs[ab % 2].amplitudes().adjoint())).unwrap())
        .collect();
    let pm = mid.plus();
    let po = out.plus();
    let table: Vec<C64> = (0..dd * dm * dout)
        .map(|i| {
            let (nd, nm, no) = (i / (dm * dout), (i / dout) % dm, i % dout);
            C64::from_polar(1.0, PI * (nd * nm) as f64 / (n * m) as f64 + PI * (nm * no) as f64 / (m * l) as f64)
        })
        .collect();
    let phase = |nd: usize, nm: usize, no: usize| table[(nd * dm + nm) * dout + no];
    let outs = [out.codeword(0), out.codeword(1)];
    let paulis: Vec<CMat> = (0..4).map(pauli).collect();
    let mut total = CMat::zeros(4, 4);
    let mut norm = 0.0;
    for a1 in &e1 {
        for a2 in &e2 {
            let mut choi = CMat::zeros(4, 4);
            for (ab, d_ab) in damaged.iter().enumerate() {
                let (a, b) = (ab / 2, ab % 2);
                let mut o = CMat::zeros(dout, dout);
                for nd in 0..dd {
                    for ndp in 0..dd {
                        let w1 = a1[(ndp, nd)] * d_ab[(nd, ndp)];
                        if w1.norm() == 0.0 {
                            continue;
                        }
                        for nm in 0..dm {
                            for nmp in 0..dm {
                                let w2 = w1 * a2[(nmp, nm)] * pm.amplitudes()[nm] * pm.amplitudes()[nmp].conj();
                                if w2.norm() == 0.0 {
                                    continue;
                                }
                                for no in 0..dout {
                                    for nop in 0..dout {
                                        o[(no, nop)] += w2
                                            * phase(nd, nm, no)
                                            * phase(ndp, nmp, nop).conj()
                                            * po.amplitudes()[no]
                                            * po.amplitudes()[nop].conj();
                                    }
                                }
                            }
                        }
                    }
                }
                for i in 0..2 {
                    for k in 0..2 {
                        choi[(2 * a + i, 2 * b + k)] = (outs[i].amplitudes().adjoint() * &o * outs[k].amplitudes())[(0, 0)];
                    }
                }
            }
            // most likely Pauli frame, ties to the lower index
            let weight = |p: &CMat| {
                let v = rotcode::CVec::from_fn(4, |idx, _| p[(idx % 2, idx / 2)]);
                (v.adjoint() * &choi * &v)[(0, 0)].re
            };
            let mut best = 0;
            for i in 1..4 {
                if weight(&paulis[i]) > weight(&paulis[best]) {
                    best = i;
                }
            }
            let big = CMat::from_fn(4, 4, |r, s| if r / 2 == s / 2 { paulis[best][(s % 2, r % 2)] } else { c(0.0) });
            norm += choi.trace().re;
            total += &big * &choi * big.adjoint();
        }
    }
    total.scale(2.0 / norm)
}

#[test]
fn knill_channel_matches_three_mode_simulation() {
    let p = noise(0.05, 0.02);
    for (data, mid) in [(binomial(2, 2), binomial(3, 1)), (cat(1.5, 2), cat(2.0, 1))] {
        let mut cfg = EcConfig::new(data, p).unwrap().with_mid_code(mid).with_scheme(Scheme::Phase);
        cfg.data_bins = Some(8);
        cfg.mid_bins = Some(8);
        let r = telecorrect_channel(&cfg).unwrap();
        let oracle = knill_by_brute_force(&cfg, p);
        let oracle_f = (oracle[(0, 0)] + oracle[(0, 3)] + oracle[(3, 0)] + oracle[(3, 3)]).re / 4.0;
        assert!((r.ent_fidelity - oracle_f).abs() <= 1e-10, "{} vs {}", r.ent_fidelity, oracle_f);
        let herm = (&oracle + oracle.adjoint()).unscale(2.0);
        assert!((&r.logical_process - herm).norm() <= 1e-10);
    }
}

#[test]
fn optimal_recovery_noiseless_converges_immediately() {
    let r = optimal_recovery(&config(binomial(2, 2), 0.0, 0.0), RecoveryOptions::default()).unwrap();
    assert!(r.infidelity() <= 1e-10);
    assert_eq!(r.iterations, 1);
    assert!(r.lower_bound_on_optimal);
}

#[test]
fn optimal_recovery_orders_the_schemes() {
    let spots = [
        (binomial(2, 2), 0.01, 0.01),
        (binomial(4, 2), 0.02, 0.005),
        (cat(2.0, 2), 0.01, 0.01),
        (binomial(3, 3), 1e-3, 1e-3),
        (binomial(6, 3), 1e-3, 1e-3),
        (cat(3.0, 3), 1e-3, 1e-3),
    ];
    for (code, kt, kp) in spots {
        let cfg = config(code, kt, kp);
        let opt = optimal_recovery(&cfg, RecoveryOptions::default()).unwrap();
        let pg = telecorrect_channel(&cfg).unwrap();
        let phase = telecorrect_channel(&cfg.clone().with_scheme(Scheme::Phase)).unwrap();
        assert!(opt.avg_gate_fidelity >= pg.avg_gate_fidelity - 1e-10, "{}", cfg.describe());
        assert!(pg.avg_gate_fidelity >= phase.avg_gate_fidelity - 1e-9, "{}", cfg.describe());
        assert!(opt.fidelity_history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(opt.iterations, opt.fidelity_history.len());
        assert!(opt.max_iterate_defect <= 1e-9, "{:e}", opt.max_iterate_defect);
    }
}

#[test]
fn ascent_improves_on_a_poor_start() {
    // the phase-decoded recovery is not a fixed point for a cat at strong loss
    let cfg = config(cat(2.0, 2), 0.1, 0.0);
    let r = optimal_recovery(&cfg, RecoveryOptions::default()).unwrap();
    let h = &r.fidelity_history;
    assert!(h.windows(2).all(|w| w[1] >= w[0]));
    assert!(r.ent_fidelity >= h[0] - 1e-12);
    assert!(r.max_iterate_defect <= 1e-9);
}

#[test]
fn phase_scheme_approaches_optimal_at_large_nbar() {
    let cfg = config(binomial(30, 3), 1e-3, 1e-3).with_scheme(Scheme::Phase);
    let opt = optimal_recovery(&cfg, RecoveryOptions { max_dim: 128, ..RecoveryOptions::default() }).unwrap();
    let phase = telecorrect_channel(&cfg).unwrap();
    assert!(phase.infidelity() <= 1.1 * opt.infidelity(), "{:e} vs {:e}", phase.infidelity(), opt.infidelity());
}

#[test]
fn optimal_recovery_rejects_large_spaces() {
    let cfg = config(binomial(30, 3), 1e-3, 1e-3);
    assert!(matches!(optimal_recovery(&cfg, RecoveryOptions::default()), Err(rotcode::Error::DimTooLarge { .. })));
}

#[test]
fn break_even_errors() {
    let base = config(binomial(2, 2), 0.0, 0.0);
    let grid = family_grid(Family::Binomial, 2, 6.0);
    assert!(matches!(break_even_threshold(&base, &grid, 1e-4, 2e-4, 0.05), Err(rotcode::Error::NoSignChange { .. })));
    assert!(matches!(break_even_threshold(&base, &grid, 0.0, 0.1, 0.05), Err(rotcode::Error::InvalidParameter(_))));
    assert!(matches!(break_even_threshold(&base, &grid, 0.1, 0.01, 0.05), Err(rotcode::Error::InvalidParameter(_))));
    assert!(break_even_gap(&base, &[], 1e-3).is_err());
}

#[test]
fn break_even_gap_changes_sign() {
    let base = config(binomial(2, 2), 0.0, 0.0);
    let grid = family_grid(Family::Binomial, 2, 4.0);
    assert!(break_even_gap(&base, &grid, 1e-3).unwrap() < 0.0);
    assert!(break_even_gap(&base, &grid, 0.3).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noisy_reports_stay_cptp(kt in 0.0f64..0.05, kp in 0.0f64..0.05, k in 1usize..4, hybrid in any::<bool>()) {
        let flavor = if hybrid { Flavor::Hybrid } else { Flavor::Knill };
        let r = telecorrect_channel(&config(binomial(k, 2), kt, kp).with_flavor(flavor)).unwrap();
        let (lo, tp) = r.cptp_defects().unwrap();
        prop_assert!(lo >= -1e-8);
        prop_assert!(tp <= 1e-8);
        prop_assert!(r.infidelity() >= -1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.leakage));
    }
}
