//! Diagonal gate set, error operators Ê_k(θ), error propagation through
//! gates, one-bit gate teleportation and the modular number measurement.
//!
//! Every gate phase is of the form e^{iπ p/q} with integer p, q. Phases are
//! reduced modulo 2q in integer arithmetic before conversion to floating
//! point, so |n|⁴ phases at n ≈ 50 keep full precision.

use std::f64::consts::PI;

use crate::codes::RotationCode;
use crate::error::{Error, Result};
use crate::fock::{c, cis, hermitian_eigen, CMat, CVec, FockOperator, FockVector, ModeSpace, TwoModeVector, C64};
use crate::measurements::{canonical_phase_povm, default_bins, ideal_logical_povm, phase_decode, pretty_good_povm, Basis, PhaseDecoderConfig, Povm};
use crate::channels::KrausChannel;

/// e^{iπ p/q}, with p reduced modulo 2q first.
pub fn pi_phase(p: i128, q: i128) -> C64 {
    let r = p.rem_euclid(2 * q);
    cis(PI * r as f64 / q as f64)
}

/// Ê_k(θ): k < 0 is e^{iθn̂}â^{|k|}, k ≥ 0 is (â†)^k e^{iθn̂}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorOp {
    pub k: i64,
    pub theta: f64,
}

impl ErrorOp {
    pub fn new(k: i64, theta: f64) -> Self {
        Self { k, theta }
    }
}

/// Gates of the rotation-code gate set. All are diagonal in the Fock basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateSpec {
    /// e^{iπn̂/N}
    Z { n: usize },
    /// e^{iπn̂²/2N²}
    S { n: usize },
    /// e^{iπn̂⁴/4N⁴}
    T { n: usize },
    /// e^{iθn̂}
    Rotation { theta: f64 },
    /// e^{iπ n̂⊗n̂/NM}
    Crot { n: usize, m: usize },
    /// e^{i2π n̂⊗n̂/NM}
    ControlledR { n: usize, m: usize },
}

impl GateSpec {
    pub fn is_two_mode(&self) -> bool {
        matches!(self, GateSpec::Crot { .. } | GateSpec::ControlledR { .. })
    }

    fn check_orders(&self) -> Result<()> {
        let bad = match *self {
            GateSpec::Z { n } | GateSpec::S { n } | GateSpec::T { n } => n == 0,
            GateSpec::Crot { n, m } | GateSpec::ControlledR { n, m } => n == 0 || m == 0,
            GateSpec::Rotation { theta } => !theta.is_finite(),
        };
        if bad {
            return Err(Error::InvalidParameter(format!("invalid gate {self:?}")));
        }
        Ok(())
    }

    /// Phase of a single-mode gate on |n⟩.
    pub fn phase(&self, n: usize) -> Result<C64> {
        self.check_orders()?;
        let ni = n as i128;
        Ok(match *self {
            GateSpec::Z { n: o } => pi_phase(ni, o as i128),
            GateSpec::S { n: o } => pi_phase(ni * ni, 2 * (o as i128).pow(2)),
            GateSpec::T { n: o } => pi_phase(ni.pow(4), 4 * (o as i128).pow(4)),
            GateSpec::Rotation { theta } => cis(theta * n as f64),
            _ => return Err(Error::UnsupportedGate(format!("{self:?} acts on two modes"))),
        })
    }

    /// Phase of a two-mode gate on |n1, n2⟩.
    pub fn phase2(&self, n1: usize, n2: usize) -> Result<C64> {
        self.check_orders()?;
        let p = (n1 as i128) * (n2 as i128);
        Ok(match *self {
            GateSpec::Crot { n, m } => pi_phase(p, (n * m) as i128),
            GateSpec::ControlledR { n, m } => pi_phase(2 * p, (n * m) as i128),
            _ => return Err(Error::UnsupportedGate(format!("{self:?} acts on one mode"))),
        })
    }

    /// The gate as a (one- or two-mode) diagonal operator.
    pub fn operator(&self, a: ModeSpace, b: Option<ModeSpace>) -> Result<FockOperator> {
        if self.is_two_mode() {
            let b = b.ok_or_else(|| Error::InvalidParameter("two-mode gate needs a second space".into()))?;
            let db = b.dim();
            let mut d = CVec::zeros(a.dim() * db);
            for n1 in 0..a.dim() {
                for n2 in 0..db {
                    d[n1 * db + n2] = self.phase2(n1, n2)?;
                }
            }
            FockOperator::two_mode_diagonal(a, b, d)
        } else {
            let mut d = CVec::zeros(a.dim());
            for n in 0..a.dim() {
                d[n] = self.phase(n)?;
            }
            FockOperator::diagonal(a, d)
        }
    }
}

/// CROT_{N,M} as a two-mode phase mask.
pub fn crot_mask(a: ModeSpace, b: ModeSpace, n: usize, m: usize) -> FockOperator {
    GateSpec::Crot { n, m }.operator(a, Some(b)).expect("positive orders")
}

/// A state acted on by a gate.
#[derive(Clone, Debug, PartialEq)]
pub enum GateState {
    Single(FockVector),
    Pair(TwoModeVector),
}

pub fn apply_gate(spec: &GateSpec, state: &GateState) -> Result<GateState> {
    match state {
        GateState::Single(v) => {
            if spec.is_two_mode() {
                return Err(Error::UnsupportedGate(format!("{spec:?} on a single mode")));
            }
            Ok(GateState::Single(spec.operator(v.space(), None)?.apply(v)?))
        }
        GateState::Pair(v) => {
            if !spec.is_two_mode() {
                return Err(Error::UnsupportedGate(format!("{spec:?} on two modes")));
            }
            let (a, b) = v.spaces();
            Ok(GateState::Pair(spec.operator(a, Some(b))?.apply_two_mode(v)?))
        }
    }
}

/// Dense matrix of Ê_k(θ).
pub fn error_op(spec: &ErrorOp, space: ModeSpace) -> Result<FockOperator> {
    let d = space.dim();
    let kk = spec.k.unsigned_abs() as usize;
    if kk >= d {
        return Err(Error::InvalidParameter(format!("|k| = {kk} not below dim {d}")));
    }
    let mut m = CMat::zeros(d, d);
    for n in 0..d {
        let (out, amp) = if spec.k < 0 {
            if n < kk {
                continue;
            }
            let out = n - kk;
            (out, ladder_weight(out, n) * cis(spec.theta * out as f64))
        } else {
            let out = n + kk;
            if out >= d {
                continue;
            }
            (out, ladder_weight(n, out) * cis(spec.theta * n as f64))
        };
        m[(out, n)] = amp;
    }
    FockOperator::dense(space, m)
}

/// √(hi!/lo!)
fn ladder_weight(lo: usize, hi: usize) -> f64 {
    ((lo + 1)..=hi).map(|j| j as f64).product::<f64>().sqrt()
}

/// The propagated error of `error` through a single-mode gate, written
/// as a diagonal phase function on the output Fock level times Ê_k(θ'),
/// θ' = θ + π·num/den. The rational part of the shift is kept exact.
struct Propagated {
    shift: (i128, i128),
    extra: Box<dyn Fn(usize) -> C64>,
}

/// Options for `propagation_residual`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ResidualOptions {
    /// Drop the nonlinear F̂ factor of the T_N rule.
    pub omit_nonlinear: bool,
}

fn propagate_single(gate: &GateSpec, e: &ErrorOp, opts: ResidualOptions) -> Result<Propagated> {
    let k = e.k as i128;
    let gain = e.k > 0;
    match *gate {
        GateSpec::Z { n } => {
            // Z Ê_k = e^{iπk/N} Ê_k Z
            let ph = pi_phase(k, n as i128);
            Ok(Propagated { shift: (0, 1), extra: Box::new(move |_| ph) })
        }
        GateSpec::Rotation { theta } => {
            let ph = cis(theta * e.k as f64);
            Ok(Propagated { shift: (0, 1), extra: Box::new(move |_| ph) })
        }
        GateSpec::S { n } => {
            // S Ê_k(θ) = e^{iπk|k|/2N²} Ê_k(θ + πk/N²) S
            let q = (n as i128).pow(2);
            let ph = pi_phase(k * k.abs(), 2 * q);
            Ok(Propagated { shift: (k, q), extra: Box::new(move |_| ph) })
        }
        GateSpec::T { n } => {
            // T Ê_k(θ) = e^{iφ_k} F̂_k Ê_k(θ + πk³/N⁴) T,
            // F̂_k = e^{i(π/4N⁴)(4kn̂³ − 6k²n̂²)} on the output level
            let q = 4 * (n as i128).pow(4);
            let k4 = k.pow(4);
            let konst = if gain { 3 * k4 } else { -k4 };
            let c0 = pi_phase(konst, q);
            let omit = opts.omit_nonlinear;
            let extra = move |m: usize| {
                if omit {
                    return c0;
                }
                let mi = m as i128;
                c0 * pi_phase(4 * k * mi.pow(3) - 6 * k * k * mi * mi, q)
            };
            Ok(Propagated { shift: (k.pow(3), (n as i128).pow(4)), extra: Box::new(extra) })
        }
        _ => Err(Error::UnsupportedGate(format!("{gate:?}"))),
    }
}

/// Spectral norm of G·Ê − Ê'·G, where Ê' is the propagated error, with the
/// top |k| output Fock rows of the error mode excluded. For two-mode gates
/// the error acts on the first mode with `a` and `b` both of dimension `dim`.
pub fn propagation_residual(gate: &GateSpec, error: &ErrorOp, dim: usize) -> Result<f64> {
    propagation_residual_with(gate, error, dim, ResidualOptions::default())
}

pub fn propagation_residual_with(gate: &GateSpec, error: &ErrorOp, dim: usize, opts: ResidualOptions) -> Result<f64> {
    let space = ModeSpace::new(dim)?;
    let e = error_op(error, space)?.to_dense()?;
    let keep = dim - error.k.unsigned_abs() as usize;
    if gate.is_two_mode() {
        // Everything is diagonal on mode b, so the difference is block
        // diagonal over n2; the norm is the largest block norm.
        let (num, den) = match *gate {
            GateSpec::Crot { n, m } => (1i128, (n * m) as i128),
            GateSpec::ControlledR { n, m } => (2i128, (n * m) as i128),
            _ => unreachable!(),
        };
        let mut worst: f64 = 0.0;
        for n2 in 0..dim {
            let g = CVec::from_fn(dim, |n1, _| gate.phase2(n1, n2).unwrap());
            // Ê^b_0(πk/NM) contributes e^{iπ k n2 num/NM} on this block
            let rot_b = pi_phase(num * error.k as i128 * n2 as i128, den);
            let lhs = CMat::from_fn(dim, dim, |i, j| g[i] * e[(i, j)]);
            let rhs = CMat::from_fn(dim, dim, |i, j| rot_b * e[(i, j)] * g[j]);
            worst = worst.max(block_norm(&(lhs - rhs), keep));
        }
        Ok(worst)
    } else {
        let prop = propagate_single(gate, error, opts)?;
        let g = gate.operator(space, None)?;
        let gd = g.diagonal_entries().unwrap().clone();
        // Ê_k(θ + πa/b): the rotation sits on the output level for k < 0 and
        // on the input level for k ≥ 0
        let (num, den) = prop.shift;
        let level = |i: usize, j: usize| (if error.k < 0 { i } else { j }) as i128;
        let lhs = CMat::from_fn(dim, dim, |i, j| gd[i] * e[(i, j)]);
        let rhs = CMat::from_fn(dim, dim, |i, j| (prop.extra)(i) * pi_phase(num * level(i, j), den) * e[(i, j)] * gd[j]);
        Ok(block_norm(&(lhs - rhs), keep))
    }
}

fn block_norm(m: &CMat, keep_rows: usize) -> f64 {
    let sub = m.rows(0, keep_rows).into_owned();
    spectral_norm(&sub)
}

pub(crate) fn spectral_norm(m: &CMat) -> f64 {
    if m.iter().all(|z| *z == c(0.0)) {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Check of the mid-gate ancilla loss rule for controlled-R_{N,M}: a loss
/// on the ancilla at fraction τ of the gate equals a data rotation by
/// τ·2π/NM after the full gate. Returns (angle, residual spectral norm of
/// U^{1−τ}(I⊗â)U^τ − R_data(angle)·U·(I⊗â)).
pub fn mid_gate_ancilla_loss(dim_data: usize, dim_anc: usize, n: usize, m: usize, tau: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside [0, 1]")));
    }
    let anc = ModeSpace::new(dim_anc)?;
    let a = error_op(&ErrorOp::new(-1, 0.0), anc)?.to_dense()?;
    let phi = 2.0 * PI / (n * m) as f64;
    let angle = tau * phi;
    let mut worst: f64 = 0.0;
    for n1 in 0..dim_data {
        // on the block with data level n1 every factor acts on the ancilla
        let u = |t: f64, n2: usize| cis(t * phi * (n1 * n2) as f64);
        let lhs = CMat::from_fn(dim_anc, dim_anc, |i, j| u(1.0 - tau, i) * a[(i, j)] * u(tau, j));
        let rhs = CMat::from_fn(dim_anc, dim_anc, |i, j| cis(angle * n1 as f64) * u(1.0, i) * a[(i, j)]);
        worst = worst.max(spectral_norm(&(lhs - rhs)));
    }
    Ok((angle, worst))
}

/// Which logical gate a teleportation circuit implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TeleportKind {
    H,
    T,
    S,
}

/// How the X-basis measurement of the teleported rail is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementChoice {
    Ideal,
    CanonicalPhase { bins: Option<usize> },
    PrettyGood,
}

/// How the H̄ before the T and S circuits is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HadamardMode {
    /// A preceding H teleportation stage into the ancilla code.
    Teleported,
    /// The exact logical map with no measurement.
    Oracle,
}

/// One outcome branch of a teleported gate.
#[derive(Clone, Debug)]
pub struct TeleportBranch {
    /// Measured logical bits, last stage first: (i, i_H) with i_H from the
    /// preceding H stage if there was one.
    pub outcome: (usize, Option<usize>),
    pub probability: f64,
    /// Normalized output density operator on the ancilla mode.
    pub output: CMat,
    /// Logical frame W with output = W·G·ψ in the ancilla code.
    pub frame: [[C64; 2]; 2],
    pub frame_is_pauli: bool,
}

#[derive(Clone, Debug)]
pub struct TeleportResult {
    pub branches: Vec<TeleportBranch>,
}

impl TeleportResult {
    /// Average fidelity of the frame-corrected output with the target
    /// a|0_M⟩ + b|1_M⟩ pushed through the ideal gate.
    pub fn fidelity(&self, code: &RotationCode, gate: TeleportKind, a: C64, b: C64) -> f64 {
        let g = logical_matrix(gate);
        let psi = [g[0][0] * a + g[0][1] * b, g[1][0] * a + g[1][1] * b];
        self.branches
            .iter()
            .map(|br| {
                let w = br.frame;
                let t = [w[0][0] * psi[0] + w[0][1] * psi[1], w[1][0] * psi[0] + w[1][1] * psi[1]];
                let v = code.codeword(0).amplitudes() * t[0] + code.codeword(1).amplitudes() * t[1];
                let f = (v.adjoint() * &br.output * &v)[(0, 0)].re;
                br.probability * f
            })
            .sum()
    }
}

type Mat2 = [[C64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut o = [[c(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

fn mat2_adj(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn pauli_x() -> Mat2 {
    [[c(0.0), c(1.0)], [c(1.0), c(0.0)]]
}

fn pauli_z() -> Mat2 {
    [[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]
}

fn id2() -> Mat2 {
    [[c(1.0), c(0.0)], [c(0.0), c(1.0)]]
}

fn pow2(p: Mat2, i: usize) -> Mat2 {
    if i % 2 == 1 {
        p
    } else {
        id2()
    }
}

/// Logical matrix of H̄, T̄ or S̄.
pub fn logical_matrix(kind: TeleportKind) -> Mat2 {
    let h = 1.0 / 2f64.sqrt();
    match kind {
        TeleportKind::H => [[c(h), c(h)], [c(h), c(-h)]],
        TeleportKind::T => [[c(1.0), c(0.0)], [c(0.0), cis(PI / 4.0)]],
        TeleportKind::S => [[c(1.0), c(0.0)], [c(0.0), C64::new(0.0, 1.0)]],
    }
}

/// True if W is a Pauli up to a global phase.
fn is_pauli(w: &Mat2) -> bool {
    [id2(), pauli_x(), pauli_z(), mat2_mul(&pauli_x(), &pauli_z())].iter().any(|p| {
        let ov: C64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| p[i][j].conj() * w[i][j]).sum();
        (ov.norm() - 2.0).abs() < 1e-12
    })
}

/// X-basis effects {E₊, E₋} of a measurement on `code`'s mode.
/// Completion elements and undecodable outcomes count as "+".
pub fn x_basis_effects(code: &RotationCode, choice: MeasurementChoice) -> Result<[CMat; 2]> {
    let povm: Povm = match choice {
        MeasurementChoice::Ideal => ideal_logical_povm(code, Basis::PlusMinus),
        MeasurementChoice::PrettyGood => {
            let id = KrausChannel::identity(code.space());
            pretty_good_povm(&[code.plus(), code.minus()], &id)?
        }
        MeasurementChoice::CanonicalPhase { bins } => {
            let j = bins.unwrap_or_else(|| default_bins(code.order()));
            canonical_phase_povm(code.space(), Some(code), j, None)?
        }
    };
    let cfg = PhaseDecoderConfig::new(code.order(), 0.0)?;
    povm.binary_effects(|label| label.logical_bit(&cfg))
}

fn branch_states(rho: &CMat) -> Result<Vec<(f64, CVec)>> {
    let eig = hermitian_eigen(rho, 1e-9)?;
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-14 * lmax.max(1e-300))
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).into_owned()))
        .collect())
}

/// One CROT teleportation step on a (possibly mixed) input on `in_code`'s
/// mode with ancilla `anc` on `out_code`'s mode. Returns unnormalized
/// outputs for i = 0, 1.
fn teleport_step(rho_in: &CMat, in_code: &RotationCode, out_code: &RotationCode, anc: &FockVector, effects: &[CMat; 2]) -> Result<[CMat; 2]> {
    let gate = crot_mask(in_code.space(), out_code.space(), in_code.order(), out_code.order());
    let d_out = out_code.space().dim();
    let mut out = [CMat::zeros(d_out, d_out), CMat::zeros(d_out, d_out)];
    for (w, v) in branch_states(rho_in)? {
        let fv = FockVector::new(in_code.space(), v)?;
        let joint = gate.apply_two_mode(&TwoModeVector::product(&fv, anc))?;
        for i in 0..2 {
            out[i] += joint.conditional_second(&effects[i]) * c(w);
        }
    }
    Ok(out)
}

/// Gate teleportation from `input_code` into `ancilla_code`.
pub fn teleport_gate(
    kind: TeleportKind,
    input: &FockVector,
    input_code: &RotationCode,
    ancilla_code: &RotationCode,
    measurement: MeasurementChoice,
    h_mode: HadamardMode,
) -> Result<TeleportResult> {
    input_code.space().check(&input.space())?;
    let anc_state = |kind: TeleportKind| -> FockVector {
        let (a, b) = match kind {
            TeleportKind::H => (c(1.0), c(1.0)),
            TeleportKind::T => (c(1.0), cis(PI / 4.0)),
            TeleportKind::S => (c(1.0), C64::new(0.0, 1.0)),
        };
        let s = 1.0 / 2f64.sqrt();
        crate::codes::logical_state(ancilla_code, a * s, b * s).expect("normalized")
    };
    let rho_in = input.density();
    let mut branches = Vec::new();
    match kind {
        TeleportKind::H => {
            let eff = x_basis_effects(input_code, measurement)?;
            let outs = teleport_step(&rho_in, input_code, ancilla_code, &anc_state(TeleportKind::H), &eff)?;
            for (i, o) in outs.into_iter().enumerate() {
                push_branch(&mut branches, (i, None), o, pow2(pauli_x(), i));
            }
        }
        TeleportKind::T | TeleportKind::S => {
            let g = logical_matrix(kind);
            match h_mode {
                HadamardMode::Oracle => {
                    // exact H̄ on the input code, then the CROT step
                    let h = logical_matrix(TeleportKind::H);
                    let z0 = input_code.codeword(0);
                    let z1 = input_code.codeword(1);
                    let a = z0.inner(input);
                    let b = z1.inner(input);
                    let (a2, b2) = (h[0][0] * a + h[0][1] * b, h[1][0] * a + h[1][1] * b);
                    let hv = FockVector::from_fn(input_code.space(), |n| a2 * z0.amplitudes()[n] + b2 * z1.amplitudes()[n]);
                    let eff = x_basis_effects(input_code, measurement)?;
                    let outs = teleport_step(&hv.density(), input_code, ancilla_code, &anc_state(kind), &eff)?;
                    for (i, o) in outs.into_iter().enumerate() {
                        // output G X^i ψ = (G X^i G†) G ψ
                        let w = mat2_mul(&mat2_mul(&g, &pow2(pauli_x(), i)), &mat2_adj(&g));
                        push_branch(&mut branches, (i, None), o, w);
                    }
                }
                HadamardMode::Teleported => {
                    let eff1 = x_basis_effects(input_code, measurement)?;
                    let mid = teleport_step(&rho_in, input_code, ancilla_code, &anc_state(TeleportKind::H), &eff1)?;
                    let eff2 = x_basis_effects(ancilla_code, measurement)?;
                    for (i1, m) in mid.into_iter().enumerate() {
                        let p1 = m.trace().re;
                        if p1 < 1e-14 {
                            continue;
                        }
                        let outs = teleport_step(&m, ancilla_code, ancilla_code, &anc_state(kind), &eff2)?;
                        for (i2, o) in outs.into_iter().enumerate() {
                            // output G X^{i2} H X^{i1} H ψ = G X^{i2} Z^{i1} ψ
                            let p = mat2_mul(&pow2(pauli_x(), i2), &pow2(pauli_z(), i1));
                            let w = mat2_mul(&mat2_mul(&g, &p), &mat2_adj(&g));
                            push_branch(&mut branches, (i2, Some(i1)), o, w);
                        }
                    }
                }
            }
        }
    }
    if branches.is_empty() {
        return Err(Error::ProbabilityTooSmall(0.0));
    }
    Ok(TeleportResult { branches })
}

fn push_branch(out: &mut Vec<TeleportBranch>, outcome: (usize, Option<usize>), rho: CMat, frame: Mat2) {
    let p = rho.trace().re;
    if p < 1e-14 {
        return;
    }
    out.push(TeleportBranch {
        outcome,
        probability: p,
        output: rho.unscale(p),
        frame_is_pauli: is_pauli(&frame),
        frame,
    });
}

/// Measurement model for the modular number measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModularMeasurement {
    /// Projective measurement of n̂ mod N.
    Ideal,
    /// Canonical phase measurement of the ancilla with `bins` bins.
    CanonicalPhase { bins: Option<usize> },
}

#[derive(Clone, Debug)]
pub struct ModularOutcome {
    pub ell: usize,
    pub probability: f64,
    /// Normalized conditional data state.
    pub post_state: CMat,
}

/// Measure n̂ mod N with a controlled-R_{N,M} onto an ancilla in |+_M⟩.
pub fn modular_number_measure(
    input: &FockVector,
    n: usize,
    ancilla: &RotationCode,
    measurement: ModularMeasurement,
) -> Result<Vec<ModularOutcome>> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let space = input.space();
    let mut out = Vec::new();
    match measurement {
        ModularMeasurement::Ideal => {
            for ell in 0..n {
                let v = FockVector::from_fn(space, |k| if k % n == ell { input.amplitudes()[k] } else { c(0.0) });
                let p = v.norm().powi(2);
                if p < 1e-14 {
                    continue;
                }
                out.push(ModularOutcome { ell, probability: p, post_state: v.density().unscale(p) });
            }
        }
        ModularMeasurement::CanonicalPhase { bins } => {
            let m = ancilla.order();
            let j = bins.unwrap_or_else(|| default_bins(n * m));
            let povm = canonical_phase_povm(ancilla.space(), Some(ancilla), j, Some(-PI / (n * m) as f64))?;
            let gate = GateSpec::ControlledR { n, m }.operator(space, Some(ancilla.space()))?;
            let joint = gate.apply_two_mode(&TwoModeVector::product(input, &ancilla.plus()))?;
            let d = space.dim();
            let mut acc = vec![CMat::zeros(d, d); n];
            for (el, label) in povm.dense_elements()?.iter().zip(povm.labels()) {
                let ell = match label.midpoint() {
                    Some(theta) => {
                        let x = theta * (n * m) as f64 / (2.0 * PI);
                        (x.round_ties_even() as i64).rem_euclid(n as i64) as usize
                    }
                    None => 0,
                };
                acc[ell] += joint.conditional_first(el);
            }
            for (ell, rho) in acc.into_iter().enumerate() {
                let p = rho.trace().re;
                if p < 1e-14 {
                    continue;
                }
                out.push(ModularOutcome { ell, probability: p, post_state: rho.unscale(p) });
            }
        }
    }
    Ok(out)
}

/// Decoded logical bit of a phase outcome for an order-N X measurement.
pub fn decode_x(theta: f64, n: usize) -> Result<usize> {
    Ok(phase_decode(theta, &PhaseDecoderConfig::new(n, 0.0)?))
}
