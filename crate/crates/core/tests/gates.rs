use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rotcode::codes::{logical_state, standard_code, CodeParams};
use rotcode::gates::*;
use rotcode::{FockVector, ModeSpace, TwoModeVector, C64};
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn gate_set(n: usize, m: usize) -> Vec<GateSpec> {
    vec![
        GateSpec::Z { n },
        GateSpec::S { n },
        GateSpec::T { n },
        GateSpec::Rotation { theta: 0.37 },
        GateSpec::Crot { n, m },
        GateSpec::ControlledR { n, m },
    ]
}

#[test]
fn propagation_identities_hold_below_the_light_cone() {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for m in 1..=4 {
            for g in gate_set(n, m) {
                if !g.is_two_mode() && m > 1 {
                    continue;
                }
                for k in -3..=3 {
                    for theta in [0.0, 0.3] {
                        let r = propagation_residual(&g, &ErrorOp::new(k, theta), 48).unwrap();
                        assert!(r <= 1e-12, "{g:?} k={k} θ={theta}: {r}");
                        worst = worst.max(r);
                    }
                }
            }
        }
    }
    assert!(worst <= 1e-12);
}

#[test]
fn t_gate_needs_the_nonlinear_factor() {
    let g = GateSpec::T { n: 2 };
    let e = ErrorOp::new(-1, 0.0);
    assert!(propagation_residual(&g, &e, 32).unwrap() <= 1e-12);
    let without = propagation_residual_with(&g, &e, 32, ResidualOptions { omit_nonlinear: true }).unwrap();
    assert!(without >= 0.1, "{without}");
}

#[test]
fn crot_spreads_loss_into_ancilla_rotation() {
    // CROT Ê^a_{-1} |n1, n2⟩ against Ê^a_{-1} R_b(−π/NM) CROT |n1, n2⟩, by hand
    let (n, m, d) = (3, 2, 12);
    let s = ModeSpace::new(d).unwrap();
    let crot = GateSpec::Crot { n, m };
    for n1 in 1..d {
        for n2 in 0..d {
            let lhs = crot.phase2(n1 - 1, n2).unwrap();
            let rhs = C64::from_polar(1.0, -PI * n2 as f64 / (n * m) as f64) * crot.phase2(n1, n2).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
    assert!(propagation_residual(&crot, &ErrorOp::new(-1, 0.0), s.dim()).unwrap() <= 1e-12);
}

#[test]
fn gate_phases_have_unit_modulus() {
    for n in 1..=4 {
        for g in gate_set(n, 3) {
            for a in 0..60 {
                if g.is_two_mode() {
                    for b in 0..20 {
                        assert_abs_diff_eq!(g.phase2(a, b).unwrap().norm(), 1.0, epsilon = 1e-15);
                    }
                } else {
                    assert_abs_diff_eq!(g.phase(a).unwrap().norm(), 1.0, epsilon = 1e-15);
                }
            }
        }
    }
}

#[test]
fn crot_is_symmetric_under_mode_swap() {
    for (n, m) in [(1, 2), (2, 3), (4, 1), (3, 3)] {
        for a in 0..30 {
            for b in 0..30 {
                assert_eq!(GateSpec::Crot { n, m }.phase2(a, b).unwrap(), GateSpec::Crot { n: m, m: n }.phase2(b, a).unwrap());
            }
        }
    }
}

#[test]
fn high_power_phases_stay_exact() {
    // n = 50, N = 1: T phase e^{iπ·50⁴/4} = e^{iπ·1562500} = 1
    assert_eq!(GateSpec::T { n: 1 }.phase(50).unwrap(), c(1.0));
    assert_eq!(pi_phase(-3, 2), pi_phase(1, 2));
    assert_abs_diff_eq!(pi_phase(1, 2).im, 1.0, epsilon = 1e-15);
}

#[test]
fn apply_gate_examples() {
    let code = standard_code(&CodeParams::Cat { alpha: 2.5 }, 2).unwrap();
    let one = code.codeword(1);
    let pair = TwoModeVector::product(&one, &one);
    let GateState::Pair(out) = apply_gate(&GateSpec::Crot { n: 2, m: 2 }, &GateState::Pair(pair.clone())).unwrap() else { panic!() };
    assert!((out.amplitudes() + pair.amplitudes()).norm() < 1e-12);

    for (i, j) in [(0, 0), (0, 1), (1, 0)] {
        let p = TwoModeVector::product(&code.codeword(i), &code.codeword(j));
        let GateState::Pair(o) = apply_gate(&GateSpec::Crot { n: 2, m: 2 }, &GateState::Pair(p.clone())).unwrap() else { panic!() };
        assert!((o.amplitudes() - p.amplitudes()).norm() < 1e-12);
    }

    for n in 1..=4 {
        let code = standard_code(&CodeParams::Binomial { k: 3 }, n).unwrap();
        let GateState::Single(s1) = apply_gate(&GateSpec::S { n }, &GateState::Single(code.codeword(1))).unwrap() else { panic!() };
        assert!((s1.amplitudes() - code.codeword(1).amplitudes() * C64::new(0.0, 1.0)).norm() < 1e-12);
        let GateState::Single(t0) = apply_gate(&GateSpec::T { n }, &GateState::Single(code.codeword(0))).unwrap() else { panic!() };
        assert!((t0.amplitudes() - code.codeword(0).amplitudes()).norm() < 1e-12);
        let GateState::Single(t1) = apply_gate(&GateSpec::T { n }, &GateState::Single(code.codeword(1))).unwrap() else { panic!() };
        assert!((t1.amplitudes() - code.codeword(1).amplitudes() * C64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);
    }
}

#[test]
fn apply_gate_rejects_wrong_arity() {
    let v = FockVector::basis(ModeSpace::new(4).unwrap(), 1).unwrap();
    assert!(apply_gate(&GateSpec::Crot { n: 1, m: 1 }, &GateState::Single(v.clone())).is_err());
    let p = TwoModeVector::product(&v, &v);
    assert!(apply_gate(&GateSpec::Z { n: 1 }, &GateState::Pair(p)).is_err());
    assert!(GateSpec::Z { n: 0 }.phase(1).is_err());
}

#[test]
fn error_op_examples() {
    let space = ModeSpace::new(10).unwrap();
    let rot = error_op(&ErrorOp::new(0, 0.4), space).unwrap().to_dense().unwrap();
    for n in 0..10 {
        assert!((rot[(n, n)] - C64::from_polar(1.0, 0.4 * n as f64)).norm() < 1e-15);
    }
    let a = error_op(&ErrorOp::new(-1, 0.0), space).unwrap();
    for n in 1..10 {
        let v = a.apply(&FockVector::basis(space, n).unwrap()).unwrap();
        assert_abs_diff_eq!(v.amplitudes()[n - 1].re, (n as f64).sqrt(), epsilon = 1e-14);
    }
    let g = error_op(&ErrorOp::new(2, 0.1), space).unwrap();
    let v = g.apply(&FockVector::basis(space, 0).unwrap()).unwrap();
    assert!((v.amplitudes()[2] - c(2f64.sqrt())).norm() < 1e-15);
    // loss branch applies the rotation after the shift
    let l = error_op(&ErrorOp::new(-1, 0.1), space).unwrap();
    let v = l.apply(&FockVector::basis(space, 3).unwrap()).unwrap();
    assert!((v.amplitudes()[2] - C64::from_polar(3f64.sqrt(), 0.2)).norm() < 1e-14);
    // gain branch rotates before the shift
    let g = error_op(&ErrorOp::new(1, 0.1), space).unwrap();
    let v = g.apply(&FockVector::basis(space, 3).unwrap()).unwrap();
    assert!((v.amplitudes()[4] - C64::from_polar(2.0, 0.3)).norm() < 1e-14);
    assert!(error_op(&ErrorOp::new(10, 0.0), space).is_err());
}

#[test]
fn mid_gate_ancilla_loss_rotates_data() {
    for (n, m) in [(2, 1), (2, 2), (3, 2)] {
        for tau in [0.0, 0.25, 0.5, 1.0] {
            let (angle, res) = mid_gate_ancilla_loss(16, 16, n, m, tau).unwrap();
            assert_abs_diff_eq!(angle, tau * 2.0 * PI / (n * m) as f64, epsilon = 1e-15);
            assert!(res <= 1e-12, "{res}");
        }
    }
    assert!(mid_gate_ancilla_loss(8, 8, 2, 2, 1.5).is_err());
}

#[test]
fn ideal_hadamard_teleport_is_exact() {
    let data = standard_code(&CodeParams::Binomial { k: 2 }, 2).unwrap();
    let anc = standard_code(&CodeParams::Cat { alpha: 3.0 }, 3).unwrap();
    for (a, b) in [(c(1.0), c(0.0)), (c(0.6), C64::new(0.0, 0.8)), (c(0.0), c(1.0)), (c(0.5f64.sqrt()), c(-(0.5f64.sqrt())))] {
        let input = logical_state(&data, a, b).unwrap();
        let r = teleport_gate(TeleportKind::H, &input, &data, &anc, MeasurementChoice::Ideal, HadamardMode::Teleported).unwrap();
        assert_abs_diff_eq!(r.fidelity(&anc, TeleportKind::H, a, b), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.branches.iter().map(|b| b.probability).sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(r.branches.iter().all(|b| b.frame_is_pauli));
    }
}

#[test]
fn t_and_s_teleports_with_ideal_measurement() {
    let data = standard_code(&CodeParams::Cat { alpha: 3.0 }, 2).unwrap();
    let anc = standard_code(&CodeParams::Binomial { k: 3 }, 2).unwrap();
    let s = 0.5f64.sqrt();
    for mode in [HadamardMode::Oracle, HadamardMode::Teleported] {
        for kind in [TeleportKind::T, TeleportKind::S] {
            for (a, b) in [(c(s), c(s)), (c(1.0), c(0.0)), (c(0.8), C64::new(0.0, -0.6))] {
                let input = logical_state(&data, a, b).unwrap();
                let r = teleport_gate(kind, &input, &data, &anc, MeasurementChoice::Ideal, mode).unwrap();
                assert_abs_diff_eq!(r.fidelity(&anc, kind, a, b), 1.0, epsilon = 1e-10);
            }
        }
    }
    // the T correction after an odd outcome is not a Pauli
    let input = logical_state(&data, c(s), c(s)).unwrap();
    let r = teleport_gate(TeleportKind::T, &input, &data, &anc, MeasurementChoice::Ideal, HadamardMode::Oracle).unwrap();
    for b in &r.branches {
        assert_eq!(b.frame_is_pauli, b.outcome.0 == 0);
    }
}

#[test]
fn hadamard_teleport_with_phase_measurement() {
    let code = standard_code(&CodeParams::Cat { alpha: 4.0 }, 2).unwrap();
    let s = 0.5f64.sqrt();
    for (a, b) in [(c(1.0), c(0.0)), (c(s), c(s)), (c(s), C64::new(0.0, s))] {
        let input = logical_state(&code, a, b).unwrap();
        let r = teleport_gate(TeleportKind::H, &input, &code, &code, MeasurementChoice::CanonicalPhase { bins: None }, HadamardMode::Teleported).unwrap();
        let f = r.fidelity(&code, TeleportKind::H, a, b);
        assert!(f >= 0.99, "{f}");
    }
}

#[test]
fn modular_measurement_of_fock_states() {
    let space = ModeSpace::new(20).unwrap();
    let anc = standard_code(&CodeParams::Cat { alpha: 7.0 }, 1).unwrap();
    for n in 1..=4 {
        for k in 0..12 {
            let v = FockVector::basis(space, k).unwrap();
            let ideal = modular_number_measure(&v, n, &anc, ModularMeasurement::Ideal).unwrap();
            assert_eq!(ideal.len(), 1);
            assert_eq!(ideal[0].ell, k % n);
            assert_abs_diff_eq!(ideal[0].probability, 1.0, epsilon = 1e-14);
            let phase = modular_number_measure(&v, n, &anc, ModularMeasurement::CanonicalPhase { bins: None }).unwrap();
            let p: f64 = phase.iter().filter(|o| o.ell == k % n).map(|o| o.probability).sum();
            assert!(p >= 0.99, "n = {n}, k = {k}: {p}");
        }
    }
}

#[test]
fn modular_measurement_prepares_cat_codeword() {
    let n = 2;
    let code = standard_code(&CodeParams::Cat { alpha: 2.0 }, n).unwrap();
    let coh = FockVector::coherent(code.space(), c(2.0)).normalized().unwrap();
    let anc = standard_code(&CodeParams::Cat { alpha: 6.0 }, 1).unwrap();
    let out = modular_number_measure(&coh, 2 * n, &anc, ModularMeasurement::Ideal).unwrap();
    let zero = out.iter().find(|o| o.ell == 0).unwrap();
    let v = code.codeword(0);
    let f = (v.amplitudes().adjoint() * &zero.post_state * v.amplitudes())[(0, 0)].re;
    assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    assert!(modular_number_measure(&coh, 0, &anc, ModularMeasurement::Ideal).is_err());
}

#[test]
fn decode_x_rounds_to_grid() {
    assert_eq!(decode_x(0.0, 3).unwrap(), 0);
    assert_eq!(decode_x(PI / 3.0, 3).unwrap(), 1);
    assert!(decode_x(0.0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ideal_h_teleport_fidelity_is_one(re in -1.0f64..1.0, im in -1.0f64..1.0, phase in 0.0f64..6.28, n in 1usize..4, m in 1usize..4) {
        let norm = (re * re + im * im).sqrt().max(1e-3);
        let t = (norm / 2.0).min(1.0);
        let a = C64::new(re, im) / norm * t.sqrt();
        let b = C64::from_polar((1.0 - t).sqrt(), phase);
        let data = standard_code(&CodeParams::Binomial { k: 2 }, n).unwrap();
        let anc = standard_code(&CodeParams::Binomial { k: 2 }, m).unwrap();
        let input = logical_state(&data, a, b).unwrap();
        let r = teleport_gate(TeleportKind::H, &input, &data, &anc, MeasurementChoice::Ideal, HadamardMode::Teleported).unwrap();
        prop_assert!((r.fidelity(&anc, TeleportKind::H, a, b) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn propagation_residual_random_theta(theta in -3.0f64..3.0, k in -3i64..=3, n in 1usize..5) {
        for g in [GateSpec::Z { n }, GateSpec::S { n }, GateSpec::T { n }] {
            prop_assert!(propagation_residual(&g, &ErrorOp::new(k, theta), 40).unwrap() <= 1e-12);
        }
    }
}
