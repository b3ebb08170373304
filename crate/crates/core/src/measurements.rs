//! Phase-estimation POVMs, the Pretty Good Measurement, ideal logical
//! measurements and the phase decoder.

use std::f64::consts::PI;

use crate::channels::KrausChannel;
use crate::codes::RotationCode;
use crate::error::{Error, Result};
use crate::fock::{c, cis, psd_sqrt_pinv_matrix, CMat, CVec, FockVector, ModeSpace, C64};
use crate::special::{gauss_legendre, ln_fact};

/// Null-space tolerance for the PGM normalization.
pub const PGM_NULL_TOL: f64 = 1e-12;

/// Default phase bin count: max(64, 16N), rounded up to a multiple of 2N so
/// that bin edges fall on the decoder's decision boundaries.
pub fn default_bins(n: usize) -> usize {
    let j = 64usize.max(16 * n);
    j.div_ceil(2 * n) * 2 * n
}

/// A POVM element.
#[derive(Clone, Debug, PartialEq)]
pub enum PovmElement {
    Dense(CMat),
    /// |v⟩⟨v|
    Rank1(CVec),
}

impl PovmElement {
    pub fn to_dense(&self) -> CMat {
        match self {
            PovmElement::Dense(m) => m.clone(),
            PovmElement::Rank1(v) => v * v.adjoint(),
        }
    }

    /// tr[E ρ]
    pub fn expectation(&self, rho: &CMat) -> f64 {
        match self {
            PovmElement::Dense(m) => trace_product(m, rho),
            PovmElement::Rank1(v) => (v.adjoint() * rho * v)[(0, 0)].re,
        }
    }
}

/// tr[A B] without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum::<C64>().re
}

/// Outcome label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutcomeLabel {
    /// Phase window [lo, hi).
    PhaseBin { lo: f64, hi: f64 },
    /// Index into the candidate (or basis) list.
    Index(usize),
    /// Residual element I − Σ.
    Completion,
}

impl OutcomeLabel {
    pub fn midpoint(&self) -> Option<f64> {
        match *self {
            OutcomeLabel::PhaseBin { lo, hi } => Some(0.5 * (lo + hi)),
            _ => None,
        }
    }

    /// Logical bit decoded from this outcome: phase bins through the phase
    /// decoder, indices directly, completion as 0.
    pub fn logical_bit(&self, cfg: &PhaseDecoderConfig) -> usize {
        match *self {
            OutcomeLabel::PhaseBin { .. } => phase_decode(self.midpoint().unwrap().rem_euclid(2.0 * PI), cfg),
            OutcomeLabel::Index(i) => i,
            OutcomeLabel::Completion => 0,
        }
    }
}

/// A finite POVM on one mode.
#[derive(Clone, Debug)]
pub struct Povm {
    space: ModeSpace,
    elements: Vec<PovmElement>,
    labels: Vec<OutcomeLabel>,
}

impl Povm {
    /// Build from elements; a completion element I − Σ is appended when
    /// `complete` is set.
    pub fn new(space: ModeSpace, mut elements: Vec<PovmElement>, mut labels: Vec<OutcomeLabel>, complete: bool) -> Result<Self> {
        if elements.len() != labels.len() {
            return Err(Error::InvalidParameter("one label per element required".into()));
        }
        let d = space.dim();
        for e in &elements {
            let n = match e {
                PovmElement::Dense(m) => m.nrows(),
                PovmElement::Rank1(v) => v.len(),
            };
            if n != d {
                return Err(Error::DimensionMismatch { expected: d, found: n });
            }
        }
        if complete {
            let mut rest = CMat::identity(d, d);
            for e in &elements {
                rest -= e.to_dense();
            }
            let herm = (&rest + rest.adjoint()).unscale(2.0);
            elements.push(PovmElement::Dense(herm));
            labels.push(OutcomeLabel::Completion);
        }
        Ok(Self { space, elements, labels })
    }

    pub fn space(&self) -> ModeSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn dense_elements(&self) -> Result<Vec<CMat>> {
        Ok(self.elements.iter().map(|e| e.to_dense()).collect())
    }

    /// Max |entry| of Σ E − I.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.space.dim();
        let mut acc = -CMat::identity(d, d);
        for e in &self.elements {
            acc += e.to_dense();
        }
        acc.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Smallest eigenvalue over the elements.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for e in &self.elements {
            let m = e.to_dense();
            let eig = crate::fock::hermitian_eigen(&m, 1e-9)?;
            lo = lo.min(eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
        }
        Ok(lo)
    }

    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.elements.iter().map(|e| e.expectation(rho)).collect()
    }

    pub fn probabilities_of(&self, v: &FockVector) -> Vec<f64> {
        self.probabilities(&v.density())
    }

    /// Sum the elements into two effects by a binary outcome map.
    pub fn binary_effects(&self, map: impl Fn(&OutcomeLabel) -> usize) -> Result<[CMat; 2]> {
        let d = self.space.dim();
        let mut out = [CMat::zeros(d, d), CMat::zeros(d, d)];
        for (e, l) in self.elements.iter().zip(&self.labels) {
            let b = map(l);
            if b > 1 {
                return Err(Error::InvalidParameter(format!("outcome map returned {b}")));
            }
            out[b] += e.to_dense();
        }
        Ok(out)
    }
}

/// γ_n: phase of the reference code amplitude on its support, 1 elsewhere.
pub fn reference_phases(space: ModeSpace, reference: Option<&RotationCode>) -> CVec {
    CVec::from_fn(space.dim(), |n, _| {
        reference
            .map(|code| code.grid_amplitude(n))
            .filter(|z| z.norm() > 0.0)
            .map(|z| z / z.norm())
            .unwrap_or(c(1.0))
    })
}

/// (1/2π)∫_{lo}^{hi} e^{idθ} dθ
fn window_integral(d: i64, lo: f64, hi: f64) -> C64 {
    if d == 0 {
        c((hi - lo) / (2.0 * PI))
    } else {
        let df = d as f64;
        (cis(df * hi) - cis(df * lo)) / C64::new(0.0, 2.0 * PI * df)
    }
}

/// Binned canonical phase measurement with `bins` windows starting at
/// `theta0` (default −π/2N for a reference of order N, else 0).
pub fn canonical_phase_povm(space: ModeSpace, reference: Option<&RotationCode>, bins: usize, theta0: Option<f64>) -> Result<Povm> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 phase bins, got {bins}")));
    }
    let t0 = theta0.unwrap_or_else(|| reference.map(|r| -PI / (2.0 * r.order() as f64)).unwrap_or(0.0));
    let gamma = reference_phases(space, reference);
    let d = space.dim();
    let width = 2.0 * PI / bins as f64;
    let mut elements = Vec::with_capacity(bins);
    let mut labels = Vec::with_capacity(bins);
    for j in 0..bins {
        let lo = t0 + j as f64 * width;
        let hi = lo + width;
        // the window integral depends only on m − n
        let w: Vec<C64> = (0..2 * d - 1).map(|q| window_integral(q as i64 - (d as i64 - 1), lo, hi)).collect();
        let m = CMat::from_fn(d, d, |a, b| gamma[a] * gamma[b].conj() * w[a + d - 1 - b]);
        elements.push(PovmElement::Dense(m));
        labels.push(OutcomeLabel::PhaseBin { lo, hi });
    }
    Povm::new(space, elements, labels, false)
}

/// Heterodyne measurement binned in angle: each element integrates
/// |α⟩⟨α| d²α/π over a wedge. The angular integral is exact; the radial one
/// uses `radial_nodes` Gauss-Legendre points on [0, √(2·dim) + 8], and the
/// quadrature defect goes into a completion element.
pub fn heterodyne_povm(space: ModeSpace, radial_nodes: usize, angular_bins: usize) -> Result<Povm> {
    if radial_nodes < 16 || angular_bins < 16 {
        return Err(Error::InvalidParameter("heterodyne node counts must be at least 16".into()));
    }
    let d = space.dim();
    let (xs, xw) = gauss_legendre(radial_nodes);
    let r_max = (2.0 * d as f64).sqrt() + 8.0;
    let rs: Vec<f64> = xs.iter().map(|x| 0.5 * r_max * (x + 1.0)).collect();
    let ws: Vec<f64> = xw.iter().map(|w| 0.5 * r_max * w).collect();
    let lf: Vec<f64> = (0..d).map(ln_fact).collect();
    // R[m,n] = 2∫ r^{m+n+1} e^{−r²} dr / √(m!n!)   (the 1/π and 2π cancel into the window factor)
    let mut radial = vec![0.0; 2 * d - 1];
    for (&r, &w) in rs.iter().zip(&ws) {
        if r <= 0.0 {
            continue;
        }
        let lr = r.ln();
        for (s, acc) in radial.iter_mut().enumerate() {
            *acc += 2.0 * w * ((s as f64 + 1.0) * lr - r * r).exp();
        }
    }
    let width = 2.0 * PI / angular_bins as f64;
    let mut elements = Vec::with_capacity(angular_bins + 1);
    let mut labels = Vec::with_capacity(angular_bins + 1);
    for b in 0..angular_bins {
        let lo = b as f64 * width - 0.5 * width;
        let hi = lo + width;
        let m = CMat::from_fn(d, d, |i, j| {
            let rad = radial[i + j] * (-0.5 * (lf[i] + lf[j])).exp();
            window_integral(i as i64 - j as i64, lo, hi) * rad
        });
        elements.push(PovmElement::Dense(m));
        labels.push(OutcomeLabel::PhaseBin { lo, hi });
    }
    Povm::new(space, elements, labels, true)
}

/// Pretty Good Measurement for the candidates after the channel.
pub fn pretty_good_povm(candidates: &[FockVector], channel: &KrausChannel) -> Result<Povm> {
    let space = channel.space();
    let mut states = Vec::with_capacity(candidates.len());
    for v in candidates {
        space.check(&v.space())?;
        if !v.is_normalized(1e-10) {
            return Err(Error::NotNormalized { norm: v.norm() });
        }
        states.push(channel.apply(&v.density())?);
    }
    pretty_good_povm_from_states(space, &states)
}

/// PGM for damaged candidate density operators ρ_i:
/// M_i = σ^{−1/2}ρ_iσ^{−1/2}, σ = Σρ_i, completion I − P_σ.
pub fn pretty_good_povm_from_states(space: ModeSpace, states: &[CMat]) -> Result<Povm> {
    let d = space.dim();
    let mut sigma = CMat::zeros(d, d);
    for s in states {
        sigma += s;
    }
    let (inv, proj) = psd_sqrt_pinv_matrix(&sigma, PGM_NULL_TOL)?;
    let mut elements = Vec::with_capacity(states.len() + 1);
    let mut labels = Vec::with_capacity(states.len() + 1);
    let mut dense = Vec::with_capacity(states.len());
    let mut defect = proj.clone();
    for s in states {
        let m = &inv * s * &inv;
        let m = (&m + m.adjoint()).unscale(2.0);
        defect -= &m;
        dense.push(m);
    }
    // σ^{-1/2} amplifies rounding along eigenvalues near the cutoff; the
    // residual P_σ − ΣM_i lives there and is shared evenly.
    let share = (&defect + defect.adjoint()).unscale(2.0 * states.len().max(1) as f64);
    for (i, m) in dense.into_iter().enumerate() {
        elements.push(PovmElement::Dense(m + &share));
        labels.push(OutcomeLabel::Index(i));
    }
    elements.push(PovmElement::Dense(CMat::identity(d, d) - proj));
    labels.push(OutcomeLabel::Completion);
    Povm::new(space, elements, labels, false)
}

/// Logical basis of an ideal measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    PlusMinus,
    ZeroOne,
}

/// {|b₀⟩⟨b₀|, |b₁⟩⟨b₁|, I − Π_code}
pub fn ideal_logical_povm(code: &RotationCode, basis: Basis) -> Povm {
    let (v0, v1) = match basis {
        Basis::PlusMinus => (code.plus(), code.minus()),
        Basis::ZeroOne => (code.codeword(0), code.codeword(1)),
    };
    let d = code.space().dim();
    let proj = v0.density() + v1.density();
    let elements = vec![
        PovmElement::Rank1(v0.into_amplitudes()),
        PovmElement::Rank1(v1.into_amplitudes()),
        PovmElement::Dense(CMat::identity(d, d) - proj),
    ];
    let labels = vec![OutcomeLabel::Index(0), OutcomeLabel::Index(1), OutcomeLabel::Completion];
    Povm::new(code.space(), elements, labels, false).expect("consistent sizes")
}

/// Phase decoder settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDecoderConfig {
    pub n: usize,
    pub bias: f64,
    pub convention: Basis,
}

impl PhaseDecoderConfig {
    pub fn new(n: usize, bias: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("decoder order must be positive".into()));
        }
        if !(bias.abs() < PI / n as f64) {
            return Err(Error::InvalidParameter(format!("|bias| = {} must be below π/N", bias.abs())));
        }
        Ok(Self { n, bias, convention: Basis::PlusMinus })
    }

    pub fn with_convention(mut self, convention: Basis) -> Self {
        self.convention = convention;
        self
    }
}

/// m = round((θ − bias)N/π) with ties to even m; returns 0 ("+", or "0")
/// for even m and 1 ("−", or "1") for odd m.
pub fn phase_decode(theta: f64, cfg: &PhaseDecoderConfig) -> usize {
    let m = ((theta - cfg.bias) * cfg.n as f64 / PI).round_ties_even() as i64;
    m.rem_euclid(2) as usize
}

/// Printable label of a decoded bit.
pub fn bit_label(bit: usize, convention: Basis) -> &'static str {
    match (convention, bit) {
        (Basis::PlusMinus, 0) => "+",
        (Basis::PlusMinus, _) => "-",
        (Basis::ZeroOne, 0) => "0",
        (Basis::ZeroOne, _) => "1",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_are_multiples_of_2n() {
        assert_eq!(default_bins(2), 64);
        assert_eq!(default_bins(3), 66);
        assert_eq!(default_bins(8), 128);
    }

    #[test]
    fn decode_tie_goes_to_even() {
        let cfg = PhaseDecoderConfig::new(2, 0.0).unwrap();
        assert_eq!(phase_decode(PI / 4.0, &cfg), 0);
        assert_eq!(phase_decode(PI / 2.0 * 1.01, &cfg), 1);
    }
}
