//! Truncated Fock-space linear algebra.
//!
//! States live on `ModeSpace`s holding |0⟩..|dim−1⟩. Operators are either
//! dense or diagonal; diagonal two-mode phases (the controlled rotations) are
//! stored as a `dim₁ × dim₂` mask and never expanded to a square matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::scaled_laguerre;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub(crate) fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// A truncated single-mode Fock space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSpace {
    dim: usize,
    tail_tol: f64,
}

impl ModeSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_tail_tol(dim, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(dim: usize, tail_tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpace(format!("dim must be at least 2, got {dim}")));
        }
        if !(0.0..1.0).contains(&tail_tol) {
            return Err(Error::InvalidSpace(format!("tail_tol {tail_tol} outside [0, 1)")));
        }
        Ok(Self { dim, tail_tol })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub(crate) fn check(&self, other: &ModeSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }
}

/// A state vector Σ a_n |n⟩ on a mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    space: ModeSpace,
    amps: CVec,
}

impl FockVector {
    pub fn new(space: ModeSpace, amps: CVec) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: amps.len() });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(Self { space, amps })
    }

    pub fn from_fn(space: ModeSpace, f: impl Fn(usize) -> C64) -> Self {
        Self { space, amps: CVec::from_fn(space.dim(), |n, _| f(n)) }
    }

    pub fn basis(space: ModeSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: n + 1 });
        }
        Ok(Self::from_fn(space, |m| if m == n { c(1.0) } else { c(0.0) }))
    }

    /// Coherent state |α⟩ truncated to the space (not renormalized).
    pub fn coherent(space: ModeSpace, alpha: C64) -> Self {
        let r = alpha.norm();
        let phase = alpha.arg();
        Self::from_fn(space, |n| {
            if r == 0.0 {
                return if n == 0 { c(1.0) } else { c(0.0) };
            }
            let lm = -0.5 * r * r + n as f64 * r.ln() - 0.5 * crate::special::ln_fact(n);
            C64::from_polar(lm.exp(), n as f64 * phase)
        })
    }

    pub fn space(&self) -> ModeSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVec {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(Self { space: self.space, amps: self.amps.unscale(n) })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space, amps: self.amps.map(|a| a * s) }
    }

    pub fn add(&self, other: &FockVector) -> Result<Self> {
        self.space.check(&other.space)?;
        Ok(Self { space: self.space, amps: &self.amps + &other.amps })
    }

    pub fn density(&self) -> CMat {
        &self.amps * self.amps.adjoint()
    }

    /// Probability outside the lowest `dim − dim/8` levels, used as a
    /// truncation-tail indicator.
    pub fn top_population(&self) -> f64 {
        let d = self.space.dim();
        let cut = d - (d / 8).max(1);
        self.amps.iter().skip(cut).map(|a| a.norm_sqr()).sum()
    }
}

/// Storage for a Fock-space operator.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Dense(CMat),
    Diagonal(CVec),
}

/// The space(s) an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpSpaces {
    Single(ModeSpace),
    Pair(ModeSpace, ModeSpace),
}

/// A linear operator on one mode, or a diagonal operator on two modes.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    spaces: OpSpaces,
    kind: OpKind,
}

impl FockOperator {
    pub fn dense(space: ModeSpace, m: CMat) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: m.nrows() });
        }
        Ok(Self { spaces: OpSpaces::Single(space), kind: OpKind::Dense(m) })
    }

    pub fn diagonal(space: ModeSpace, d: CVec) -> Result<Self> {
        if d.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: d.len() });
        }
        Ok(Self { spaces: OpSpaces::Single(space), kind: OpKind::Diagonal(d) })
    }

    /// Two-mode diagonal operator; entry `n1 * dim2 + n2` multiplies |n1, n2⟩.
    pub fn two_mode_diagonal(a: ModeSpace, b: ModeSpace, d: CVec) -> Result<Self> {
        if d.len() != a.dim() * b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim() * b.dim(), found: d.len() });
        }
        Ok(Self { spaces: OpSpaces::Pair(a, b), kind: OpKind::Diagonal(d) })
    }

    pub fn identity(space: ModeSpace) -> Self {
        Self {
            spaces: OpSpaces::Single(space),
            kind: OpKind::Diagonal(CVec::from_element(space.dim(), c(1.0))),
        }
    }

    pub fn spaces(&self) -> OpSpaces {
        self.spaces
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn space(&self) -> Result<ModeSpace> {
        match self.spaces {
            OpSpaces::Single(s) => Ok(s),
            OpSpaces::Pair(..) => Err(Error::InvalidParameter("two-mode operator".into())),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, OpKind::Diagonal(_))
    }

    /// Dense matrix of a single-mode operator.
    pub fn to_dense(&self) -> Result<CMat> {
        self.space()?;
        Ok(match &self.kind {
            OpKind::Dense(m) => m.clone(),
            OpKind::Diagonal(d) => CMat::from_diagonal(d),
        })
    }

    pub fn diagonal_entries(&self) -> Option<&CVec> {
        match &self.kind {
            OpKind::Diagonal(d) => Some(d),
            OpKind::Dense(_) => None,
        }
    }

    pub fn adjoint(&self) -> Self {
        let kind = match &self.kind {
            OpKind::Dense(m) => OpKind::Dense(m.adjoint()),
            OpKind::Diagonal(d) => OpKind::Diagonal(d.map(|z| z.conj())),
        };
        Self { spaces: self.spaces, kind }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        let s = self.space()?;
        s.check(&v.space)?;
        let amps = match &self.kind {
            OpKind::Dense(m) => m * &v.amps,
            OpKind::Diagonal(d) => d.component_mul(&v.amps),
        };
        Ok(FockVector { space: s, amps })
    }

    pub fn apply_two_mode(&self, v: &TwoModeVector) -> Result<TwoModeVector> {
        match (self.spaces, &self.kind) {
            (OpSpaces::Pair(a, b), OpKind::Diagonal(d)) => {
                a.check(&v.a)?;
                b.check(&v.b)?;
                let db = b.dim();
                let amps = CMat::from_fn(a.dim(), db, |i, j| d[i * db + j] * v.amps[(i, j)]);
                Ok(TwoModeVector { a, b, amps })
            }
            _ => Err(Error::InvalidParameter("expected a two-mode diagonal operator".into())),
        }
    }

    /// self · other for single-mode operators.
    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        let s = self.space()?;
        s.check(&other.space()?)?;
        let kind = match (&self.kind, &other.kind) {
            (OpKind::Diagonal(a), OpKind::Diagonal(b)) => OpKind::Diagonal(a.component_mul(b)),
            (OpKind::Diagonal(a), OpKind::Dense(m)) => {
                OpKind::Dense(CMat::from_fn(m.nrows(), m.ncols(), |i, j| a[i] * m[(i, j)]))
            }
            (OpKind::Dense(m), OpKind::Diagonal(b)) => {
                OpKind::Dense(CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * b[j]))
            }
            (OpKind::Dense(a), OpKind::Dense(b)) => OpKind::Dense(a * b),
        };
        Ok(Self { spaces: self.spaces, kind })
    }
}

/// A pure state of two modes stored as a `dim_a × dim_b` amplitude matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeVector {
    a: ModeSpace,
    b: ModeSpace,
    amps: CMat,
}

impl TwoModeVector {
    pub fn product(x: &FockVector, y: &FockVector) -> Self {
        Self { a: x.space, b: y.space, amps: &x.amps * y.amps.transpose() }
    }

    pub fn new(a: ModeSpace, b: ModeSpace, amps: CMat) -> Result<Self> {
        if amps.nrows() != a.dim() || amps.ncols() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim() * b.dim(), found: amps.len() });
        }
        Ok(Self { a, b, amps })
    }

    pub fn spaces(&self) -> (ModeSpace, ModeSpace) {
        (self.a, self.b)
    }

    pub fn amplitudes(&self) -> &CMat {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &TwoModeVector) -> C64 {
        self.amps.iter().zip(other.amps.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    /// Apply a single-mode operator on the first (`first = true`) or second mode.
    pub fn apply_local(&self, op: &FockOperator, first: bool) -> Result<Self> {
        let m = op.to_dense()?;
        let amps = if first {
            op.space()?.check(&self.a)?;
            &m * &self.amps
        } else {
            op.space()?.check(&self.b)?;
            &self.amps * m.transpose()
        };
        Ok(Self { a: self.a, b: self.b, amps })
    }

    /// Reduced density operator of the second mode after applying `effect`
    /// (a POVM element, or identity) on the first: tr_a[(E ⊗ I)|Ψ⟩⟨Ψ|].
    pub fn conditional_second(&self, effect: &CMat) -> CMat {
        // ρ_b[l, l'] = Σ_{n,n'} Ψ[n,l] E[n',n] conj(Ψ[n',l'])
        self.amps.transpose() * effect.transpose() * self.amps.map(|z| z.conj())
    }

    /// Reduced density operator of the first mode after applying `effect` on the second.
    pub fn conditional_first(&self, effect: &CMat) -> CMat {
        &self.amps * effect.transpose() * self.amps.adjoint()
    }
}

/// Ladder and number operators of a mode.
#[derive(Clone, Debug)]
pub struct ModeOps {
    pub annihilation: FockOperator,
    pub creation: FockOperator,
    pub number: FockOperator,
    space: ModeSpace,
}

impl ModeOps {
    /// e^{iθn̂}
    pub fn rotation(&self, theta: f64) -> FockOperator {
        rotation(self.space, theta)
    }
}

pub fn build_mode_ops(space: ModeSpace) -> ModeOps {
    let d = space.dim();
    let a = CMat::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) });
    let n = CVec::from_fn(d, |i, _| c(i as f64));
    ModeOps {
        creation: FockOperator { spaces: OpSpaces::Single(space), kind: OpKind::Dense(a.adjoint()) },
        annihilation: FockOperator { spaces: OpSpaces::Single(space), kind: OpKind::Dense(a) },
        number: FockOperator { spaces: OpSpaces::Single(space), kind: OpKind::Diagonal(n) },
        space,
    }
}

/// e^{iθn̂} as a diagonal operator.
pub fn rotation(space: ModeSpace, theta: f64) -> FockOperator {
    FockOperator {
        spaces: OpSpaces::Single(space),
        kind: OpKind::Diagonal(CVec::from_fn(space.dim(), |n, _| cis(theta * n as f64))),
    }
}

/// Largest |A − A†| entry.
pub fn max_asymmetry(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix after checking Hermiticity.
pub fn hermitian_eigen(m: &CMat, tol: f64) -> Result<SymmetricEigen<C64, nalgebra::Dyn>> {
    let asym = max_asymmetry(m);
    let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    if asym > tol * scale {
        return Err(Error::NonHermitian { max_asymmetry: asym });
    }
    let h = (m + m.adjoint()).unscale(2.0);
    Ok(SymmetricEigen::new(h))
}

/// Pseudo-inverse square root of a PSD matrix. Eigenvalues below
/// `null_tol · λ_max` are treated as the null space. Also returns the
/// projector onto the retained support.
///
/// Exactly decoupled index blocks (no nonzero entry between them) are
/// diagonalized separately, which keeps rounding from large blocks out
/// of small ones.
pub fn psd_sqrt_pinv_matrix(m: &CMat, null_tol: f64) -> Result<(CMat, CMat)> {
    let asym = max_asymmetry(m);
    let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    if asym > 1e-10 * scale {
        return Err(Error::NonHermitian { max_asymmetry: asym });
    }
    let d = m.nrows();
    let blocks = coupled_blocks(m);
    let mut eigs = Vec::with_capacity(blocks.len());
    let mut lmax = 0.0f64;
    let mut lmin = f64::INFINITY;
    for idx in &blocks {
        let sub = CMat::from_fn(idx.len(), idx.len(), |i, j| 0.5 * (m[(idx[i], idx[j])] + m[(idx[j], idx[i])].conj()));
        let eig = SymmetricEigen::new(sub);
        for &l in eig.eigenvalues.iter() {
            lmax = lmax.max(l);
            lmin = lmin.min(l);
        }
        eigs.push(eig);
    }
    if lmin < -1e-10 * lmax.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: lmin });
    }
    let mut inv = CMat::zeros(d, d);
    let mut proj = CMat::zeros(d, d);
    let cut = null_tol * lmax;
    for (idx, eig) in blocks.iter().zip(&eigs) {
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= cut || lam <= 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let w = 1.0 / lam.sqrt();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    let o = v[a] * v[b].conj();
                    inv[(i, j)] += o * w;
                    proj[(i, j)] += o;
                }
            }
        }
    }
    Ok((inv, proj))
}

/// Connected components of the graph with an edge wherever m[i,j] ≠ 0.
fn coupled_blocks(m: &CMat) -> Vec<Vec<usize>> {
    let d = m.nrows();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if m[(i, j)] != C64::new(0.0, 0.0) || m[(j, i)] != C64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// M with M·op·M equal to the projector onto the support of `op`.
pub fn psd_sqrt_pinv(op: &FockOperator, null_tol: f64) -> Result<FockOperator> {
    let space = op.space()?;
    if let OpKind::Diagonal(d) = &op.kind {
        let asym = d.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
        if asym > 1e-10 {
            return Err(Error::NonHermitian { max_asymmetry: 2.0 * asym });
        }
        let lmax = d.iter().fold(0.0f64, |a, z| a.max(z.re));
        let lmin = d.iter().fold(f64::INFINITY, |a, z| a.min(z.re));
        if lmin < -1e-10 * lmax.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        let out = d.map(|z| if z.re > null_tol * lmax && z.re > 0.0 { c(1.0 / z.re.sqrt()) } else { c(0.0) });
        return FockOperator::diagonal(space, out);
    }
    let (inv, _) = psd_sqrt_pinv_matrix(&op.to_dense()?, null_tol)?;
    FockOperator::dense(space, inv)
}

/// Input accepted by the Wigner evaluator.
pub enum WignerInput<'a> {
    Vector(&'a FockVector),
    Density(&'a CMat),
}

/// Wigner values on a rectangular grid (rows follow `ys`, columns `xs`).
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub values: DMatrix<f64>,
    pub warning: Option<String>,
}

/// Wigner function W(α) = (2/π) tr[ρ D(α) P D(α)†] at α = x + iy, evaluated
/// through Laguerre matrix elements so no displaced operators are built.
/// The normalization gives ∫W dx dy = 1.
pub fn wigner_grid(state: WignerInput<'_>, xs: &[f64], ys: &[f64]) -> WignerGrid {
    let (rho, tail, tol) = match state {
        WignerInput::Vector(v) => (v.density(), v.top_population(), v.space().tail_tol()),
        WignerInput::Density(r) => {
            let d = r.nrows();
            let cut = d - (d / 8).max(1);
            let t: f64 = (cut..d).map(|i| r[(i, i)].re).sum();
            (r.clone(), t, DEFAULT_TAIL_TOL)
        }
    };
    let d = rho.nrows();
    let mut values = DMatrix::<f64>::zeros(ys.len(), xs.len());
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            values[(iy, ix)] = wigner_point(&rho, d, C64::new(x, y));
        }
    }
    let warning = (tail > tol)
        .then(|| format!("population {tail:.3e} near the Fock cutoff exceeds tail tolerance {tol:e}"));
    WignerGrid { values, warning }
}

fn wigner_point(rho: &CMat, d: usize, alpha: C64) -> f64 {
    let x = 4.0 * alpha.norm_sqr();
    let phi = alpha.arg();
    let mut acc = 0.0;
    for k in 0..d {
        let lag = scaled_laguerre(k, x, d - 1 - k);
        let phase = cis(k as f64 * phi);
        for m in 0..d - k {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let term = rho[(m, m + k)] * phase * (sign * lag[m]);
            acc += if k == 0 { term.re } else { 2.0 * term.re };
        }
    }
    2.0 / std::f64::consts::PI * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annihilation_lowers() {
        let s = ModeSpace::new(3).unwrap();
        let ops = build_mode_ops(s);
        let out = ops.annihilation.apply(&FockVector::basis(s, 1).unwrap()).unwrap();
        assert!((out.amplitudes()[0] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_fixes_grid_states() {
        let s = ModeSpace::new(24).unwrap();
        let n_ord = 4;
        let r = rotation(s, 2.0 * std::f64::consts::PI / n_ord as f64);
        for k in 0..6 {
            let v = FockVector::basis(s, k * n_ord).unwrap();
            let w = r.apply(&v).unwrap();
            assert!((w.amplitudes() - v.amplitudes()).norm() < 1e-12);
        }
        let z = rotation(s, std::f64::consts::PI / n_ord as f64);
        let v = FockVector::basis(s, 3 * n_ord).unwrap();
        let w = z.apply(&v).unwrap();
        assert!((w.amplitudes()[3 * n_ord] + c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn sqrt_pinv_examples() {
        let s = ModeSpace::new(2).unwrap();
        let id = FockOperator::identity(s);
        let m = psd_sqrt_pinv(&id, 1e-12).unwrap().to_dense().unwrap();
        assert!((m - CMat::identity(2, 2)).norm() < 1e-14);
        let d = FockOperator::dense(s, CMat::from_diagonal(&CVec::from_vec(vec![c(4.0), c(0.0)]))).unwrap();
        let m = psd_sqrt_pinv(&d, 1e-12).unwrap().to_dense().unwrap();
        assert!((m[(0, 0)] - c(0.5)).norm() < 1e-14);
        assert!(m[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let s = ModeSpace::new(2).unwrap();
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        let op = FockOperator::dense(s, m).unwrap();
        assert!(matches!(psd_sqrt_pinv(&op, 1e-12), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn vacuum_wigner_peak() {
        let s = ModeSpace::new(10).unwrap();
        let v = FockVector::basis(s, 0).unwrap();
        let g = wigner_grid(WignerInput::Vector(&v), &[0.0, 0.5], &[0.0]);
        assert!((g.values[(0, 0)] - 2.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!(g.values[(0, 1)] < g.values[(0, 0)]);
        assert!(g.warning.is_none());
    }
}
