//! Rotation codes: construction from primitives or closed forms, and the
//! code diagnostics (mean excitation number, modular phase uncertainty).

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fock::{c, cis, CMat, CVec, FockOperator, FockVector, ModeSpace, TwoModeVector, C64, DEFAULT_TAIL_TOL};
use crate::special::{half_line_rule, ln_fact, LaguerreTable, displacement_element};

/// Largest Fock cutoff a constructor will pick.
pub const MAX_DIM: usize = 2400;

/// A seed state |Θ⟩ whose rotated superpositions build the codewords.
#[derive(Clone, Debug)]
pub struct Primitive {
    pub state: FockVector,
    pub label: String,
}

impl Primitive {
    pub fn new(state: FockVector, label: impl Into<String>) -> Self {
        Self { state, label: label.into() }
    }

    /// Sector weights 𝒩₀* = Σ|c_{2kN}|², 𝒩₁* = Σ|c_{(2k+1)N}|².
    pub fn sector_norms(&self, order: usize) -> (f64, f64) {
        sector_norms(self.state.amplitudes(), order)
    }

    pub fn check_support(&self, order: usize) -> Result<()> {
        if order == 0 {
            return Err(Error::InvalidParameter("rotation order must be positive".into()));
        }
        let (n0, n1) = self.sector_norms(order);
        if n0 == 0.0 {
            return Err(Error::MissingSector { sector: "even", order });
        }
        if n1 == 0.0 {
            return Err(Error::MissingSector { sector: "odd", order });
        }
        Ok(())
    }
}

fn sector_norms(amps: &CVec, order: usize) -> (f64, f64) {
    let mut n0 = 0.0;
    let mut n1 = 0.0;
    for (n, a) in amps.iter().enumerate() {
        if n % order != 0 {
            continue;
        }
        if (n / order) % 2 == 0 {
            n0 += a.norm_sqr();
        } else {
            n1 += a.norm_sqr();
        }
    }
    (n0, n1)
}

/// Code family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Cat,
    SqueezedCat,
    Binomial,
    PeggBarnett,
    ZeroN,
    Trivial,
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cat => "cat",
            Family::SqueezedCat => "squeezed_cat",
            Family::Binomial => "binomial",
            Family::PeggBarnett => "pegg_barnett",
            Family::ZeroN => "zero_n",
            Family::Trivial => "trivial",
            Family::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Some(match s {
            "cat" => Family::Cat,
            "squeezed_cat" => Family::SqueezedCat,
            "binomial" => Family::Binomial,
            "pegg_barnett" => Family::PeggBarnett,
            "zero_n" => Family::ZeroN,
            "trivial" => Family::Trivial,
            "custom" => Family::Custom,
            _ => return None,
        })
    }
}

/// Family parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum CodeParams {
    Cat { alpha: f64 },
    SqueezedCat { alpha: f64, r: f64 },
    Binomial { k: usize },
    PeggBarnett { s: usize },
    ZeroN,
    Trivial,
    Custom { label: String },
}

impl CodeParams {
    pub fn family(&self) -> Family {
        match self {
            CodeParams::Cat { .. } => Family::Cat,
            CodeParams::SqueezedCat { .. } => Family::SqueezedCat,
            CodeParams::Binomial { .. } => Family::Binomial,
            CodeParams::PeggBarnett { .. } => Family::PeggBarnett,
            CodeParams::ZeroN => Family::ZeroN,
            CodeParams::Trivial => Family::Trivial,
            CodeParams::Custom { .. } => Family::Custom,
        }
    }

    /// Short text form used in records and CSV rows.
    pub fn describe(&self) -> String {
        match self {
            CodeParams::Cat { alpha } => format!("alpha={alpha}"),
            CodeParams::SqueezedCat { alpha, r } => format!("alpha={alpha};r={r}"),
            CodeParams::Binomial { k } => format!("K={k}"),
            CodeParams::PeggBarnett { s } => format!("s={s}"),
            CodeParams::ZeroN | CodeParams::Trivial => String::new(),
            CodeParams::Custom { label } => label.clone(),
        }
    }
}

/// Code-level figures of merit.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeDiagnostics {
    pub nbar: f64,
    pub mean_modular_phase: C64,
    pub delta_canonical: f64,
    pub delta_heterodyne: f64,
    /// |⟨e^{iNθ}⟩_het(200 nodes) − ⟨e^{iNθ}⟩_het(400 nodes)|
    pub heterodyne_quadrature_change: f64,
}

/// An order-N rotation code on a truncated mode.
#[derive(Clone, Debug)]
pub struct RotationCode {
    order: usize,
    space: ModeSpace,
    params: CodeParams,
    f: Vec<C64>,
    norms: (f64, f64),
    diagnostics: CodeDiagnostics,
}

impl RotationCode {
    fn assemble(order: usize, space: ModeSpace, params: CodeParams, f: Vec<C64>, norms: (f64, f64)) -> Self {
        let diagnostics = compute_diagnostics(order, space, &f);
        Self { order, space, params, f, norms, diagnostics }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> ModeSpace {
        self.space
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// f_{kN} for k = 0, 1, …
    pub fn grid_coefficients(&self) -> &[C64] {
        &self.f
    }

    /// (𝒩₀*, 𝒩₁*) of the primitive the code was built from.
    pub fn norms(&self) -> (f64, f64) {
        self.norms
    }

    pub fn diagnostics(&self) -> &CodeDiagnostics {
        &self.diagnostics
    }

    /// Number distance d_n = N.
    pub fn number_distance(&self) -> usize {
        self.order
    }

    /// Rotational distance d_θ = π/N.
    pub fn rotational_distance(&self) -> f64 {
        PI / self.order as f64
    }

    /// Amplitude of |n⟩ in the unnormalized sum |0_N⟩ + |1_N⟩.
    pub fn grid_amplitude(&self, n: usize) -> C64 {
        if n % self.order == 0 {
            self.f.get(n / self.order).copied().unwrap_or(c(0.0))
        } else {
            c(0.0)
        }
    }

    /// |j_N⟩ for j ∈ {0, 1}.
    pub fn codeword(&self, j: usize) -> FockVector {
        let n_ord = self.order;
        FockVector::from_fn(self.space, |n| {
            if n % n_ord == 0 && (n / n_ord) % 2 == j % 2 {
                self.f.get(n / n_ord).copied().unwrap_or(c(0.0))
            } else {
                c(0.0)
            }
        })
    }

    pub fn plus(&self) -> FockVector {
        self.logical_unchecked(c(1.0), c(1.0))
    }

    pub fn minus(&self) -> FockVector {
        self.logical_unchecked(c(1.0), c(-1.0))
    }

    fn logical_unchecked(&self, a: C64, b: C64) -> FockVector {
        let z0 = self.codeword(0);
        let z1 = self.codeword(1);
        let s = (a.norm_sqr() + b.norm_sqr()).sqrt();
        FockVector::from_fn(self.space, |n| (a * z0.amplitudes()[n] + b * z1.amplitudes()[n]) / s)
    }

    /// Π_code = |0_N⟩⟨0_N| + |1_N⟩⟨1_N|
    pub fn projector(&self) -> CMat {
        self.codeword(0).density() + self.codeword(1).density()
    }

    /// Largest Fock level with nonzero codeword amplitude.
    pub fn max_support(&self) -> usize {
        let last = self.f.iter().rposition(|z| z.norm() > 0.0).unwrap_or(0);
        last * self.order
    }

    /// Plain-text record: family, order, parameters, cutoff and coefficients.
    pub fn to_record(&self) -> String {
        let mut s = format!(
            "family={} N={} params={} dim={} f=",
            self.family().name(),
            self.order,
            self.params.describe(),
            self.space.dim()
        );
        for (i, z) in self.f.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{:.16e}{:+.16e}i", z.re, z.im);
        }
        s
    }
}

/// Build the code from a primitive: |0_N⟩ = Π⁰_{2N}|Θ⟩/√𝒩₀*, |1_N⟩ = Π^N_{2N}|Θ⟩/√𝒩₁*.
pub fn code_from_primitive(primitive: &Primitive, order: usize) -> Result<RotationCode> {
    primitive.check_support(order)?;
    let (n0, n1) = primitive.sector_norms(order);
    let space = primitive.state.space();
    let amps = primitive.state.amplitudes();
    let f = grid_from_amplitudes(amps, order, n0, n1);
    Ok(RotationCode::assemble(
        order,
        space,
        CodeParams::Custom { label: primitive.label.clone() },
        f,
        (n0, n1),
    ))
}

fn grid_from_amplitudes(amps: &CVec, order: usize, n0: f64, n1: f64) -> Vec<C64> {
    let kmax = (amps.len() - 1) / order;
    (0..=kmax)
        .map(|k| {
            let a = amps[k * order];
            if k % 2 == 0 {
                a / n0.sqrt()
            } else {
                a / n1.sqrt()
            }
        })
        .collect()
}

/// Standard family constructors. `tail_tol` controls the cutoff choice.
pub fn standard_code(params: &CodeParams, order: usize) -> Result<RotationCode> {
    standard_code_with_tol(params, order, DEFAULT_TAIL_TOL)
}

pub fn standard_code_with_tol(params: &CodeParams, order: usize, tail_tol: f64) -> Result<RotationCode> {
    if order == 0 {
        return Err(Error::InvalidParameter("rotation order must be positive".into()));
    }
    let step = 2 * order;
    match params {
        CodeParams::Trivial => {
            if order != 1 {
                return Err(Error::InvalidParameter("trivial encoding has order 1".into()));
            }
            let space = ModeSpace::with_tail_tol(2, tail_tol)?;
            Ok(RotationCode::assemble(1, space, params.clone(), vec![c(1.0), c(1.0)], (1.0, 1.0)))
        }
        CodeParams::ZeroN => {
            let space = ModeSpace::with_tail_tol(step, tail_tol)?;
            Ok(RotationCode::assemble(order, space, params.clone(), vec![c(1.0), c(1.0)], (0.5, 0.5)))
        }
        CodeParams::Binomial { k } => {
            let k = *k;
            if k < 1 {
                return Err(Error::InvalidParameter("binomial K must be at least 1".into()));
            }
            let dim = round_up(k * order + 1, step);
            let space = ModeSpace::with_tail_tol(dim, tail_tol)?;
            let f = (0..=k)
                .map(|j| c((ln_binom(k, j) - (k as f64 - 1.0) * std::f64::consts::LN_2).exp().sqrt()))
                .collect();
            Ok(RotationCode::assemble(order, space, params.clone(), f, (0.5, 0.5)))
        }
        CodeParams::PeggBarnett { s } => {
            let s = *s;
            if s < order + 1 {
                return Err(Error::InvalidParameter(format!("Pegg-Barnett s = {s} must be at least N + 1")));
            }
            let dim = round_up(s, step);
            let space = ModeSpace::with_tail_tol(dim, tail_tol)?;
            let w = 1.0 / (s as f64).sqrt();
            let state = FockVector::from_fn(space, |n| if n < s { c(w) } else { c(0.0) });
            let prim = Primitive::new(state, format!("phase state s={s}"));
            let mut code = code_from_primitive(&prim, order)?;
            code.params = params.clone();
            Ok(code)
        }
        CodeParams::Cat { alpha } => {
            let alpha = *alpha;
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(format!("cat alpha must be positive, got {alpha}")));
            }
            let nbig = (alpha * alpha + 40.0 * alpha + 80.0).ceil() as usize;
            let amps: Vec<f64> = (0..nbig)
                .map(|n| {
                    (-0.5 * alpha * alpha + n as f64 * alpha.ln() - 0.5 * ln_fact(n)).exp()
                })
                .collect();
            let cv = CVec::from_iterator(nbig, amps.iter().map(|&a| c(a)));
            from_truncated_primitive(&cv, order, tail_tol, params.clone())
        }
        CodeParams::SqueezedCat { alpha, r } => {
            let (alpha, r) = (*alpha, *r);
            if !(alpha > 0.0 || r > 0.0) || alpha < 0.0 || r < 0.0 {
                return Err(Error::InvalidParameter("squeezed cat needs alpha > 0 or r > 0".into()));
            }
            let cv = squeezed_coherent_amplitudes(alpha, r)?;
            from_truncated_primitive(&cv, order, tail_tol, params.clone())
        }
        CodeParams::Custom { .. } => Err(Error::InvalidParameter("custom codes come from code_from_primitive".into())),
    }
}

fn round_up(n: usize, step: usize) -> usize {
    n.div_ceil(step) * step
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Choose the cutoff for a primitive known on a long range of Fock levels,
/// then build the code on that cutoff.
fn from_truncated_primitive(amps: &CVec, order: usize, tail_tol: f64, params: CodeParams) -> Result<RotationCode> {
    let step = 2 * order;
    let (n0, n1) = sector_norms(amps, order);
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::MissingSector { sector: if n0 == 0.0 { "even" } else { "odd" }, order });
    }
    // relative tails per sector beyond each candidate cutoff
    let len = amps.len();
    let mut tail0 = vec![0.0; len + 1];
    let mut tail1 = vec![0.0; len + 1];
    for n in (0..len).rev() {
        tail0[n] = tail0[n + 1];
        tail1[n] = tail1[n + 1];
        if n % order == 0 {
            if (n / order) % 2 == 0 {
                tail0[n] += amps[n].norm_sqr();
            } else {
                tail1[n] += amps[n].norm_sqr();
            }
        }
    }
    let mut dim = step.max(2);
    loop {
        if dim >= len || dim > MAX_DIM {
            let t = tail0[dim.min(len)] / n0 + tail1[dim.min(len)] / n1;
            return Err(Error::TailUnreachable { dim, tail_tol, tail: t });
        }
        if tail0[dim] / n0 < tail_tol && tail1[dim] / n1 < tail_tol {
            break;
        }
        dim += step;
    }
    let space = ModeSpace::with_tail_tol(dim, tail_tol)?;
    let truncated = CVec::from_iterator(dim, amps.iter().take(dim).copied());
    let (t0, t1) = sector_norms(&truncated, order);
    let f = grid_from_amplitudes(&truncated, order, t0, t1);
    Ok(RotationCode::assemble(order, space, params, f, (n0, n1)))
}

/// Amplitudes ⟨n|D(α)S(r)|0⟩ for real α, r, summed over the squeezed-vacuum
/// expansion with Laguerre-form displacement elements.
pub fn squeezed_coherent_amplitudes(alpha: f64, r: f64) -> Result<CVec> {
    let t = r.tanh();
    // squeezed vacuum coefficients on even levels
    let mut lmax = 0usize;
    let mut s_coef = Vec::new();
    loop {
        let l = lmax;
        let v = if l % 2 == 1 {
            0.0
        } else if r == 0.0 {
            if l == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            let h = l / 2;
            let mag = 0.5 * (1.0 / r.cosh()).ln() + h as f64 * (0.5 * t).ln() + 0.5 * ln_fact(l) - ln_fact(h);
            let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
            sign * mag.exp()
        };
        s_coef.push(v);
        if l > 4 && l % 2 == 0 && (v * v < 1e-34 || r == 0.0) {
            break;
        }
        lmax += 1;
        if lmax > MAX_DIM {
            return Err(Error::TailUnreachable { dim: lmax, tail_tol: 1e-34, tail: v * v });
        }
    }
    let mean = alpha * alpha + r.sinh().powi(2);
    let spread = alpha * r.exp() + r.cosh() * r.sinh() + 1.0;
    let nbig = (mean + 40.0 * spread + 80.0).ceil() as usize;
    if nbig > MAX_DIM + 200 {
        return Err(Error::TailUnreachable { dim: nbig, tail_tol: DEFAULT_TAIL_TOL, tail: 1.0 });
    }
    let kmax = nbig.max(lmax) + 1;
    let table = LaguerreTable::new(alpha * alpha, kmax, nbig.min(lmax) + 1);
    let amps = (0..nbig).map(|n| {
        let mut acc = 0.0;
        let mut running: f64 = 0.0;
        for (l, &s) in s_coef.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let term = displacement_element(n, l, alpha, &table) * s;
            running = running.max(term.abs());
            if term.abs() < 1e-18 * running {
                continue;
            }
            acc += term;
        }
        c(acc)
    });
    Ok(CVec::from_iterator(nbig, amps))
}

fn compute_diagnostics(order: usize, space: ModeSpace, f: &[C64]) -> CodeDiagnostics {
    let nbar = 0.5 * f.iter().enumerate().map(|(k, z)| z.norm_sqr() * (k * order) as f64).sum::<f64>();
    let mmp = 0.5 * f.windows(2).map(|w| w[0].norm() * w[1].norm()).sum::<f64>();
    let delta_canonical = 1.0 / (mmp * mmp) - 1.0;
    let plus: Vec<C64> = (0..space.dim())
        .map(|n| {
            if n % order == 0 {
                f.get(n / order).copied().unwrap_or(c(0.0)) / 2f64.sqrt()
            } else {
                c(0.0)
            }
        })
        .collect();
    let h1 = heterodyne_mean_phase(&plus, order, 200);
    let h2 = heterodyne_mean_phase(&plus, order, 400);
    CodeDiagnostics {
        nbar,
        mean_modular_phase: c(mmp),
        delta_canonical,
        delta_heterodyne: 1.0 / h2.norm_sqr() - 1.0,
        heterodyne_quadrature_change: (h1 - h2).norm(),
    }
}

/// ⟨e^{iNθ}⟩ for θ = arg α under the heterodyne POVM |α⟩⟨α| d²α/π.
/// The angular integral picks the Fourier component m − n = N exactly (a
/// uniform angular grid integrates it without error); the radial integral
/// uses the tan-mapped Gauss-Legendre rule.
pub fn heterodyne_mean_phase(psi: &[C64], order: usize, radial_nodes: usize) -> C64 {
    let (rs, ws) = half_line_rule(radial_nodes);
    let d = psi.len();
    let lf: Vec<f64> = (0..d).map(ln_fact).collect();
    let mut total = c(0.0);
    for (&r, &w) in rs.iter().zip(&ws) {
        if r == 0.0 {
            continue;
        }
        let lr = r.ln();
        let mut g = c(0.0);
        for m in 0..d.saturating_sub(order) {
            let p = psi[m + order] * psi[m].conj();
            if p.norm() == 0.0 {
                continue;
            }
            let e = (2 * m + order + 1) as f64 * lr - r * r - 0.5 * (lf[m] + lf[m + order]);
            g += p * e.exp();
        }
        total += g * (2.0 * w);
    }
    total
}

/// Closed form of the same heterodyne expectation:
/// Σ_m ψ_m* ψ_{m+N} Γ(m + N/2 + 1)/√(m!(m+N)!).
pub fn heterodyne_mean_phase_exact(psi: &[C64], order: usize) -> C64 {
    let d = psi.len();
    (0..d.saturating_sub(order))
        .map(|m| {
            let e = crate::special::ln_gamma_fn(m as f64 + order as f64 / 2.0 + 1.0)
                - 0.5 * (ln_fact(m) + ln_fact(m + order));
            psi[m].conj() * psi[m + order] * e.exp()
        })
        .sum()
}

/// a|0_N⟩ + b|1_N⟩
pub fn logical_state(code: &RotationCode, a: C64, b: C64) -> Result<FockVector> {
    let n = a.norm_sqr() + b.norm_sqr();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm: n.sqrt() });
    }
    Ok(code.logical_unchecked(a, b))
}

/// Diagnostics of a code (computed at construction).
pub fn diagnostics(code: &RotationCode) -> CodeDiagnostics {
    code.diagnostics.clone()
}

/// Dual primitive Θ' = (c₊ + c₋ e^{iπn̂/N})Θ/√𝒩_Θ', c_± = √𝒩₁ ± √𝒩₀, 𝒩ᵢ = (2N)²𝒩ᵢ*.
pub fn dual_primitive(primitive: &Primitive, order: usize) -> Result<Primitive> {
    primitive.check_support(order)?;
    let (s0, s1) = primitive.sector_norms(order);
    let scale = (2 * order) as f64;
    let (n0, n1) = (scale * scale * s0, scale * scale * s1);
    let cp = n1.sqrt() + n0.sqrt();
    let cm = n1.sqrt() - n0.sqrt();
    let amps = primitive.state.amplitudes();
    let raw = CVec::from_fn(amps.len(), |n, _| {
        amps[n] * (c(cp) + cis(PI * n as f64 / order as f64) * cm)
    });
    let norm2 = raw.norm_squared();
    if norm2 < 1e-14 {
        return Err(Error::DegenerateNormalization(norm2));
    }
    let state = FockVector::new(primitive.state.space(), raw.unscale(norm2.sqrt()))?;
    Ok(Primitive::new(state, format!("dual of {}", primitive.label)))
}

/// |±_N⟩ rebuilt from a dual primitive:
/// plus: Σ_{m<N} e^{i2mπn̂/N}|Θ'⟩, minus: Σ_{m<N} e^{i(2m+1)πn̂/N}|Θ'⟩, normalized.
pub fn dual_basis_state(dual: &Primitive, order: usize, plus: bool) -> Result<FockVector> {
    let amps = dual.state.amplitudes();
    let off = if plus { 0.0 } else { 1.0 };
    let v = FockVector::from_fn(dual.state.space(), |n| {
        let s: C64 = (0..order)
            .map(|m| cis((2.0 * m as f64 + off) * PI * n as f64 / order as f64))
            .sum();
        s * amps[n]
    });
    v.normalized()
}

/// Diagonal projector onto Fock states with n ≡ ℓ (mod n2).
pub fn rotation_projector(space: ModeSpace, n2: usize, l: usize) -> Result<FockOperator> {
    if n2 == 0 || l >= n2 {
        return Err(Error::InvalidParameter(format!("need 0 <= l < N2, got l={l}, N2={n2}")));
    }
    FockOperator::diagonal(
        space,
        CVec::from_fn(space.dim(), |n, _| if n % n2 == l { c(1.0) } else { c(0.0) }),
    )
}

/// Result of one breeding round.
#[derive(Clone, Debug)]
pub struct BreedOutcome {
    pub state: FockVector,
    pub p_plus: f64,
}

/// One breeding round: CROT_{2N,M} between |0_{N,Θ}⟩ and an ancilla |+_M⟩,
/// then projection of the ancilla onto |+_M⟩. The plus outcome leaves
/// ½(I + Ẑ_{2N})|0_{N,Θ}⟩/√P₊.
pub fn breed(code_state: &FockVector, order: usize, ancilla: &RotationCode) -> Result<BreedOutcome> {
    let amps = code_state.amplitudes();
    let off: f64 = amps
        .iter()
        .enumerate()
        .filter(|(n, _)| n % (2 * order) != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    if off > 1e-12 || !code_state.is_normalized(1e-10) {
        return Err(Error::InvalidParameter(format!(
            "input is not a normalized |0_N> state of order {order} (off-grid weight {off:e})"
        )));
    }
    let plus = ancilla.plus();
    let m = ancilla.order();
    let joint = TwoModeVector::product(code_state, &plus);
    let gate = crate::gates::crot_mask(code_state.space(), ancilla.space(), 2 * order, m);
    let joint = gate.apply_two_mode(&joint)?;
    let psi = joint.amplitudes();
    let proj = psi * plus.amplitudes().map(|z| z.conj());
    let p_plus = proj.norm_squared();
    if p_plus < 1e-14 {
        return Err(Error::DegenerateBreeding(p_plus));
    }
    let state = FockVector::new(code_state.space(), proj.unscale(p_plus.sqrt()))?;
    Ok(BreedOutcome { state, p_plus })
}

/// Resolve a mean-excitation target to family parameters. Discrete families
/// take the nearest admissible value (ties round down); cat codes solve for α.
pub fn params_for_nbar(family: Family, order: usize, target: f64) -> Result<CodeParams> {
    let nf = order as f64;
    match family {
        Family::Binomial => {
            let x = 2.0 * target / nf;
            Ok(CodeParams::Binomial { k: nearest_round_down(x).max(1) })
        }
        Family::PeggBarnett => {
            let x = 2.0 * target / nf + 1.0;
            let cnt = nearest_round_down(x).max(2);
            Ok(CodeParams::PeggBarnett { s: cnt * order })
        }
        Family::Cat => {
            let lo_n = standard_code(&CodeParams::Cat { alpha: 1e-3 }, order)?.diagnostics.nbar;
            if target <= lo_n {
                return Err(Error::InvalidParameter(format!(
                    "cat codes of order {order} cannot reach nbar {target} (minimum {lo_n})"
                )));
            }
            let (mut lo, mut hi) = (1e-3, target.sqrt() + 2.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let nb = standard_code(&CodeParams::Cat { alpha: mid }, order)?.diagnostics.nbar;
                if nb < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(CodeParams::Cat { alpha: 0.5 * (lo + hi) })
        }
        Family::ZeroN => Ok(CodeParams::ZeroN),
        Family::Trivial => Ok(CodeParams::Trivial),
        _ => Err(Error::InvalidParameter(format!("no nbar resolution for family {}", family.name()))),
    }
}

fn nearest_round_down(x: f64) -> usize {
    let fl = x.floor();
    let v = if x - fl > 0.5 { fl + 1.0 } else { fl };
    v.max(0.0) as usize
}
