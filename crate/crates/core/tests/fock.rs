use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rotcode::codes::{standard_code, CodeParams};
use rotcode::fock::{build_mode_ops, psd_sqrt_pinv, psd_sqrt_pinv_matrix, rotation, wigner_grid, FockOperator, WignerInput};
use rotcode::{CMat, CVec, FockVector, ModeSpace, C64};
use std::f64::consts::PI;

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

#[test]
fn annihilation_lowers_one() {
    let space = ModeSpace::new(3).unwrap();
    let ops = build_mode_ops(space);
    let out = ops.annihilation.apply(&FockVector::basis(space, 1).unwrap()).unwrap();
    assert_abs_diff_eq!(out.amplitudes()[0].re, 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(out.amplitudes()[1].norm() + out.amplitudes()[2].norm(), 0.0);
}

#[test]
fn creation_is_adjoint_of_annihilation() {
    let ops = build_mode_ops(ModeSpace::new(12).unwrap());
    let a = ops.annihilation.to_dense().unwrap();
    let ad = ops.creation.to_dense().unwrap();
    assert_eq!(max_abs(&(a.adjoint() - ad)), 0.0);
}

#[test]
fn commutator_is_identity_below_cutoff() {
    let d = 20;
    let ops = build_mode_ops(ModeSpace::new(d).unwrap());
    let a = ops.annihilation.to_dense().unwrap();
    let ad = ops.creation.to_dense().unwrap();
    let comm = &a * &ad - &ad * &a;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j && i < d - 1 { 1.0 } else { 0.0 };
            if i == d - 1 && j == d - 1 {
                // â â† loses the level above the cutoff
                assert_abs_diff_eq!(comm[(i, j)].re, -((d - 1) as f64), epsilon = 1e-12);
                continue;
            }
            assert_abs_diff_eq!(comm[(i, j)].re, want, epsilon = 1e-12);
        }
    }
}

#[test]
fn rotation_fixes_grid_states() {
    for n in 1..6 {
        let space = ModeSpace::new(40).unwrap();
        let r = rotation(space, 2.0 * PI / n as f64);
        for k in 0..(40 / n) {
            let v = r.apply(&FockVector::basis(space, k * n).unwrap()).unwrap();
            assert!((v.amplitudes()[k * n] - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let half = rotation(space, PI / n as f64);
        for k in 0..(40 / (2 * n)) {
            let m = (2 * k + 1) * n;
            let v = half.apply(&FockVector::basis(space, m).unwrap()).unwrap();
            assert!((v.amplitudes()[m] + C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn pinv_examples() {
    let space = ModeSpace::new(2).unwrap();
    let id = FockOperator::identity(space);
    let m = psd_sqrt_pinv(&id, 1e-12).unwrap().to_dense().unwrap();
    assert!(max_abs(&(m - CMat::identity(2, 2))) < 1e-15);

    let op = FockOperator::diagonal(space, CVec::from_vec(vec![C64::new(4.0, 0.0), C64::new(0.0, 0.0)])).unwrap();
    let m = psd_sqrt_pinv(&op, 1e-12).unwrap().to_dense().unwrap();
    assert_abs_diff_eq!(m[(0, 0)].re, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(m[(1, 1)].norm(), 0.0, epsilon = 1e-15);
}

#[test]
fn pinv_rejects_non_hermitian() {
    let space = ModeSpace::new(2).unwrap();
    let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let err = psd_sqrt_pinv(&FockOperator::dense(space, m).unwrap(), 1e-12).unwrap_err();
    assert!(matches!(err, rotcode::Error::NonHermitian { .. }), "{err}");
}

#[test]
fn pinv_on_damaged_cat_projector() {
    use rotcode::channels::{loss_dephasing, NoiseParams};
    let code = standard_code(&CodeParams::Cat { alpha: 2.5 }, 2).unwrap();
    for (kt, kp) in [(0.01, 0.01), (0.05, 0.01), (0.1, 0.1)] {
        let ch = loss_dephasing(code.space(), NoiseParams::new(kt, kp).unwrap()).unwrap();
        let sigma = ch.apply(&code.projector()).unwrap();
        let (m, p) = psd_sqrt_pinv_matrix(&sigma, 1e-12).unwrap();
        // oracle: projector from a full eigendecomposition of σ
        let eig = nalgebra::SymmetricEigen::new(sigma.clone());
        let lmax = eig.eigenvalues.max();
        let mut p_ref = CMat::zeros(sigma.nrows(), sigma.nrows());
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 1e-10 * lmax {
                let v = eig.eigenvectors.column(k);
                p_ref += &v * v.adjoint();
            }
        }
        // the retained support contains every well-separated eigenvector
        assert!(max_abs(&(&p * &p_ref - &p_ref)) < 1e-8, "({kt}, {kp})");
        assert!(max_abs(&(&m * &sigma * &m - &p)) < 1e-8, "({kt}, {kp})");
    }
}

fn coherent_wigner(alpha: C64, beta: C64) -> f64 {
    2.0 / PI * (-2.0 * (alpha - beta).norm_sqr()).exp()
}

#[test]
fn wigner_vacuum_and_coherent_match_gaussians() {
    let space = ModeSpace::new(40).unwrap();
    let xs: Vec<f64> = (-8..=8).map(|i| 0.25 * i as f64).collect();
    let vac = FockVector::basis(space, 0).unwrap();
    let g = wigner_grid(WignerInput::Vector(&vac), &xs, &xs);
    assert!(g.warning.is_none());
    let peak = g.values.max();
    assert_abs_diff_eq!(g.values[(8, 8)], peak);
    assert_abs_diff_eq!(peak, 2.0 / PI, epsilon = 1e-12);
    for (iy, &y) in xs.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(g.values[(iy, ix)], coherent_wigner(C64::new(x, y), C64::new(0.0, 0.0)), epsilon = 1e-12);
        }
    }
    let beta = C64::new(1.2, -0.7);
    let coh = FockVector::coherent(space, beta).normalized().unwrap();
    let g = wigner_grid(WignerInput::Vector(&coh), &xs, &xs);
    for (iy, &y) in xs.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(g.values[(iy, ix)], coherent_wigner(C64::new(x, y), beta), epsilon = 1e-9);
        }
    }
}

#[test]
fn wigner_integrates_to_one() {
    let space = ModeSpace::new(30).unwrap();
    let v = FockVector::coherent(space, C64::new(1.0, 0.5)).normalized().unwrap();
    let h = 0.1;
    let xs: Vec<f64> = (-60..=60).map(|i| h * i as f64).collect();
    let g = wigner_grid(WignerInput::Vector(&v), &xs, &xs);
    assert_abs_diff_eq!(g.values.sum() * h * h, 1.0, epsilon = 1e-8);
}

#[test]
fn wigner_symmetry_and_negativity_of_cat_plus() {
    let code = standard_code(&CodeParams::Cat { alpha: 4.0 }, 4).unwrap();
    let plus = code.plus();
    let pts: Vec<C64> = (0..12).map(|i| C64::from_polar(0.3 + 0.4 * i as f64, 0.17 * i as f64)).collect();
    for p in pts {
        let q = p * C64::from_polar(1.0, 2.0 * PI / 4.0);
        let a = wigner_grid(WignerInput::Vector(&plus), &[p.re], &[p.im]).values[(0, 0)];
        let b = wigner_grid(WignerInput::Vector(&plus), &[q.re], &[q.im]).values[(0, 0)];
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
    // interference fringes between neighbouring lobes
    let ring: Vec<f64> = (0..400).map(|i| 2.0 * PI * i as f64 / 400.0).collect();
    let mut min = f64::INFINITY;
    for t in ring {
        let z = C64::from_polar(3.0, t);
        min = min.min(wigner_grid(WignerInput::Vector(&plus), &[z.re], &[z.im]).values[(0, 0)]);
    }
    assert!(min < -0.01, "min {min}");
}

#[test]
fn wigner_warns_near_cutoff() {
    let space = ModeSpace::new(10).unwrap();
    let v = FockVector::coherent(space, C64::new(3.0, 0.0)).normalized().unwrap();
    assert!(wigner_grid(WignerInput::Vector(&v), &[0.0], &[0.0]).warning.is_some());
}

proptest! {
    #[test]
    fn rotations_compose(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0, d in 2usize..60) {
        let space = ModeSpace::new(d).unwrap();
        let a = rotation(space, t1).compose(&rotation(space, t2)).unwrap();
        let b = rotation(space, t1 + t2);
        let (da, db) = (a.diagonal_entries().unwrap(), b.diagonal_entries().unwrap());
        for n in 0..d {
            prop_assert!((da[n] - db[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn pinv_gives_support_projector(d in 2usize..24, rank in 1usize..24, seed in 0u64..10_000) {
        let rank = rank.min(d);
        // deterministic pseudo-random generator for the factor matrix
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = CMat::from_fn(d, rank, |_, _| C64::new(next(), next()));
        let m = &b * b.adjoint();
        let (inv, proj) = psd_sqrt_pinv_matrix(&m, 1e-12).unwrap();
        let lhs = &inv * &inv * &m;
        prop_assert!(max_abs(&(lhs - &proj)) < 1e-8);
        prop_assert!(max_abs(&(&proj * &proj - &proj)) < 1e-10);
    }
}
