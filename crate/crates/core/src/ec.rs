//! Teleportation-based error correction as a logical qubit channel.
//!
//! Knill flavor: data (order N) → CROT → middle ancilla |+_M⟩ → CROT →
//! output ancilla |+_L⟩; the data and middle rails are measured in the X
//! basis. After the first CROT the middle rail for data level n is
//! χ_r = e^{iπr n̂/NM}|+_M⟩ with r = n mod 2N. The middle rail stays on the
//! M-grid, so the second CROT acts as Z_L^j for middle level jM and the
//! output is exactly in the L codespace. The conditional output in the ±
//! basis of L is
//!
//!   O(x)[p,p'] = Σ_{r,r'} T_{x₁}[r',r] ⟨χ^{(p')}_{r'}|M_{x₂}|χ^{(p)}_r⟩,
//!   T_{x₁}[r',r] = Σ_{n≡r, n'≡r'} ρ[n,n'] M_{x₁}[n',n],
//!
//! where χ^{(p)} keeps the levels with j ≡ p (mod 2).
//!
//! Hybrid flavor: a top ancilla |0_M⟩ picks up τ_q = e^{iπq n̂/NM}|0_M⟩ with
//! q = n mod N, the output ancilla picks up e^{iπr n̂/NL}|+_L⟩, and the
//! decoder undoes a rotation e^{−iπk n̂/NL} together with H̄ or X̄H̄.

use std::f64::consts::PI;

use crate::channels::{loss_dephasing, KrausChannel, NoiseParams};
use crate::codes::{standard_code, CodeParams, RotationCode};
use crate::error::{Error, Result};
use crate::fock::{c, hermitian_eigen, psd_sqrt_pinv_matrix, CMat, CVec, FockVector, ModeSpace, C64};
use crate::measurements::{canonical_phase_povm, default_bins, pretty_good_povm_from_states, Povm};

/// Default coherent amplitude of the M = 1 cat on the middle rail.
pub const DEFAULT_MID_ALPHA: f64 = 6.0;
/// POVM completeness tolerance.
pub const POVM_TOL: f64 = 1e-6;
/// CPTP tolerance of the assembled logical process.
pub const CPTP_TOL: f64 = 1e-8;

/// Measurement scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Canonical phase measurements on both measured rails.
    Phase,
    /// PGM on the data rail, canonical phase on the ancilla rail.
    PrettyGood,
    /// PGM on the data rail, PGM over the rotated ancilla states.
    Ideal,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Phase => "phase",
            Scheme::PrettyGood => "pretty_good",
            Scheme::Ideal => "ideal",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "phase" => Some(Scheme::Phase),
            "pretty_good" => Some(Scheme::PrettyGood),
            "ideal" => Some(Scheme::Ideal),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Knill,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decoder {
    MaxLikelihood,
}

/// Noise on the data rail.
#[derive(Clone, Debug)]
pub enum Noise {
    LossDephasing(NoiseParams),
    /// Any Kraus family on the data space; trace-decreasing families are
    /// renormalized by the total output trace.
    Custom(KrausChannel),
}

/// One error-correction configuration.
#[derive(Clone, Debug)]
pub struct EcConfig {
    pub data_code: RotationCode,
    pub mid_ancilla_code: RotationCode,
    pub out_code: RotationCode,
    pub noise: Noise,
    pub scheme: Scheme,
    pub decoder: Decoder,
    pub flavor: Flavor,
    /// Phase bins on the data rail (default from the data order).
    pub data_bins: Option<usize>,
    /// Phase bins on the ancilla rail (default from N·M).
    pub mid_bins: Option<usize>,
}

impl EcConfig {
    /// Defaults: M = 1 cat with α = 6 on the middle rail, trivial output code,
    /// Knill flavor, pretty_good scheme.
    pub fn new(data_code: RotationCode, noise: NoiseParams) -> Result<Self> {
        Ok(Self {
            data_code,
            mid_ancilla_code: default_mid_code(DEFAULT_MID_ALPHA)?,
            out_code: standard_code(&CodeParams::Trivial, 1)?,
            noise: Noise::LossDephasing(noise),
            scheme: Scheme::PrettyGood,
            decoder: Decoder::MaxLikelihood,
            flavor: Flavor::Knill,
            data_bins: None,
            mid_bins: None,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn with_mid_code(mut self, code: RotationCode) -> Self {
        self.mid_ancilla_code = code;
        self
    }

    pub fn with_out_code(mut self, code: RotationCode) -> Self {
        self.out_code = code;
        self
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = noise;
        self
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        match &self.noise {
            Noise::LossDephasing(p) => loss_dephasing(self.data_code.space(), *p),
            Noise::Custom(k) => {
                self.data_code.space().check(&k.space())?;
                Ok(k.clone())
            }
        }
    }

    /// Text echo of the configuration.
    pub fn describe(&self) -> String {
        let noise = match &self.noise {
            Noise::LossDephasing(p) => format!("loss_dephasing({:e},{:e})", p.kappa_t, p.kappa_phi_t),
            Noise::Custom(_) => "custom".to_string(),
        };
        format!(
            "flavor={:?} scheme={} data=[{} N={} {}] mid=[{} M={} {}] out=[{} L={}] noise={} bins={:?}/{:?}",
            self.flavor,
            self.scheme.name(),
            self.data_code.family().name(),
            self.data_code.order(),
            self.data_code.params().describe(),
            self.mid_ancilla_code.family().name(),
            self.mid_ancilla_code.order(),
            self.mid_ancilla_code.params().describe(),
            self.out_code.family().name(),
            self.out_code.order(),
            noise,
            self.data_bins,
            self.mid_bins,
        )
    }
}

/// M = 1 cat code used on the ancilla rails.
pub fn default_mid_code(alpha: f64) -> Result<RotationCode> {
    standard_code(&CodeParams::Cat { alpha }, 1)
}

/// Decoder statistics for one measurement outcome pair.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeStat {
    /// (data-rail outcome, ancilla-rail outcome) indices.
    pub outcome: (usize, usize),
    /// Probability for a maximally mixed logical input.
    pub probability: f64,
    /// Chosen correction index.
    pub decision: usize,
    /// Normalized candidate weights.
    pub posterior: Vec<f64>,
}

/// Logical channel of one EC configuration.
#[derive(Clone, Debug)]
pub struct LogicalChannelReport {
    /// Choi matrix Σ_{ab}|a⟩⟨b| ⊗ 𝓔(|a⟩⟨b|), index 2·a + i, normalized to trace 2.
    pub logical_process: CMat,
    pub ent_fidelity: f64,
    pub avg_gate_fidelity: f64,
    /// Output weight outside the output codespace before renormalization.
    pub leakage: f64,
    /// Total output trace before renormalization (averaged over inputs).
    pub raw_trace: f64,
    pub outcome_stats: Vec<OutcomeStat>,
    pub config: String,
    pub cache_key: Option<String>,
    /// Set for the iterative optimal recovery.
    pub lower_bound_on_optimal: bool,
    /// Accepted recovery iterates (iterative recovery only).
    pub iterations: usize,
    /// Entanglement fidelity after each accepted iterate.
    pub fidelity_history: Vec<f64>,
    /// Worst CPTP defect over the accepted iterates.
    pub max_iterate_defect: f64,
}

impl LogicalChannelReport {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.avg_gate_fidelity
    }

    /// Apply the logical channel to a 2×2 logical density operator.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let j = &self.logical_process;
        CMat::from_fn(2, 2, |i, k| {
            let mut s = c(0.0);
            for a in 0..2 {
                for b in 0..2 {
                    s += rho[(a, b)] * j[(2 * a + i, 2 * b + k)];
                }
            }
            s
        })
    }

    /// Smallest Choi eigenvalue and the partial-trace defect.
    pub fn cptp_defects(&self) -> Result<(f64, f64)> {
        let eig = hermitian_eigen(&self.logical_process, 1e-8)?;
        let lo = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let j = &self.logical_process;
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let t = j[(2 * a, 2 * b)] + j[(2 * a + 1, 2 * b + 1)];
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((t - c(target)).norm());
            }
        }
        Ok((lo, worst))
    }
}

/// Logical Pauli matrices in decoder order I, Z, X, XZ.
pub fn pauli(i: usize) -> CMat {
    let z = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let x = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    match i {
        0 => CMat::identity(2, 2),
        1 => z,
        2 => x,
        _ => x * z,
    }
}

fn hadamard() -> CMat {
    let h = 1.0 / 2f64.sqrt();
    CMat::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
}

/// vec(U) = Σ_a |a⟩ ⊗ U|a⟩
fn choi_vec(u: &CMat) -> CVec {
    CVec::from_fn(4, |idx, _| u[(idx % 2, idx / 2)])
}

fn choi_weight(choi: &CMat, u: &CMat) -> f64 {
    let v = choi_vec(u);
    (v.adjoint() * choi * &v)[(0, 0)].re
}

/// (I ⊗ U†) C (I ⊗ U)
fn undo(choi: &CMat, u: &CMat) -> CMat {
    let big = CMat::from_fn(4, 4, |r, s| if r / 2 == s / 2 { u[(s % 2, r % 2)].conj() } else { c(0.0) });
    &big * choi * big.adjoint()
}

/// Most likely correction per outcome: argmax, ties to the lower index;
/// a row with no positive weight maps to 0.
pub fn ml_decode(weights: &[Vec<f64>]) -> Result<Vec<usize>> {
    weights
        .iter()
        .map(|row| {
            if let Some(w) = row.iter().find(|&&w| w < -1e-12) {
                return Err(Error::InvalidParameter(format!("negative decoder weight {w:e}")));
            }
            let mut best = 0;
            for (i, &w) in row.iter().enumerate() {
                if w > row[best] {
                    best = i;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Effects and their indices for one measured rail.
struct RailEffects {
    effects: Vec<CMat>,
}

impl RailEffects {
    fn from_povm(p: &Povm) -> Result<Self> {
        let defect = p.completeness_defect();
        if defect > POVM_TOL {
            return Err(Error::PovmIncomplete(defect));
        }
        Ok(Self { effects: p.dense_elements()? })
    }
}

/// Damaged logical operators D_ab = 𝒩(|a_N⟩⟨b_N|).
fn damaged_operators(code: &RotationCode, channel: &KrausChannel) -> Result<Vec<CMat>> {
    let z = [code.codeword(0), code.codeword(1)];
    let mut out = Vec::with_capacity(4);
    for a in 0..2 {
        for b in 0..2 {
            let op = z[a].amplitudes() * z[b].amplitudes().adjoint();
            out.push(channel.apply(&op)?);
        }
    }
    Ok(out)
}

/// X-basis effects of the data rail for the scheme.
fn data_effects(cfg: &EcConfig, damaged: &[CMat]) -> Result<RailEffects> {
    let code = &cfg.data_code;
    match cfg.scheme {
        Scheme::Phase => {
            let j = cfg.data_bins.unwrap_or_else(|| default_bins(code.order()));
            RailEffects::from_povm(&canonical_phase_povm(code.space(), Some(code), j, None)?)
        }
        Scheme::PrettyGood | Scheme::Ideal => {
            // 𝒩(|±⟩⟨±|) = ½(D00 + D11 ± D01 ± D10)
            let plus = (&damaged[0] + &damaged[3] + &damaged[1] + &damaged[2]).unscale(2.0);
            let minus = (&damaged[0] + &damaged[3] - &damaged[1] - &damaged[2]).unscale(2.0);
            RailEffects::from_povm(&pretty_good_povm_from_states(code.space(), &[plus, minus])?)
        }
    }
}

/// Ancilla-rail effects: canonical phase, or a PGM over the given
/// ancilla states for the ideal scheme.
fn ancilla_effects(cfg: &EcConfig, states: &[FockVector], order: usize) -> Result<RailEffects> {
    let code = &cfg.mid_ancilla_code;
    match cfg.scheme {
        Scheme::Phase | Scheme::PrettyGood => {
            let j = cfg.mid_bins.unwrap_or_else(|| default_bins(order));
            let t0 = -PI / (2.0 * order as f64);
            RailEffects::from_povm(&canonical_phase_povm(code.space(), Some(code), j, Some(t0))?)
        }
        Scheme::Ideal => {
            let rhos: Vec<CMat> = states.iter().map(|v| v.density()).collect();
            RailEffects::from_povm(&pretty_good_povm_from_states(code.space(), &rhos)?)
        }
    }
}

/// T[r',r] = Σ_{n≡r, n'≡r' (mod m)} ρ[n,n'] E[n',n]
fn residue_contraction(rho: &CMat, effect: &CMat, m: usize) -> CMat {
    let d = rho.nrows();
    let mut t = CMat::zeros(m, m);
    for np in 0..d {
        for n in 0..d {
            let v = rho[(n, np)];
            if v == c(0.0) {
                continue;
            }
            t[(np % m, n % m)] += v * effect[(np, n)];
        }
    }
    t
}

/// Channel of the Knill or hybrid EC circuit, decoded by maximum likelihood.
pub fn telecorrect_channel(config: &EcConfig) -> Result<LogicalChannelReport> {
    match config.flavor {
        Flavor::Knill => knill(config),
        Flavor::Hybrid => hybrid(config),
    }
}

/// Hybrid Steane/Knill flavor.
pub fn hybrid_ec_channel(config: &EcConfig) -> Result<LogicalChannelReport> {
    hybrid(config)
}

/// Per-outcome raw outputs for the Knill circuit: for each (x₁, x₂) and
/// each logical input operator, the 2×2 output in the 0/1 basis of L.
struct KnillParts {
    /// T[x₁][ab] (2N × 2N)
    t: Vec<Vec<CMat>>,
    /// G[x₂] (4N × 4N), index 2r + p
    g: Vec<CMat>,
    n2: usize,
}

fn knill_parts(cfg: &EcConfig, inputs: &[CMat]) -> Result<KnillParts> {
    let n = cfg.data_code.order();
    let mid = &cfg.mid_ancilla_code;
    let m = mid.order();
    let n2 = 2 * n;
    let channel = cfg.channel()?;
    let damaged = damaged_operators(&cfg.data_code, &channel)?;
    let de = data_effects(cfg, &damaged)?;
    // χ_r and its parity components
    let plus = mid.plus();
    let chis: Vec<FockVector> = (0..n2)
        .map(|r| crate::fock::rotation(mid.space(), PI * r as f64 / (n * m) as f64).apply(&plus))
        .collect::<Result<_>>()?;
    let me = ancilla_effects(cfg, &chis, n * m)?;
    let dm = mid.space().dim();
    let x = CMat::from_fn(dm, 2 * n2, |lvl, col| {
        let (r, p) = (col / 2, col % 2);
        if lvl % m == 0 && (lvl / m) % 2 == p {
            chis[r].amplitudes()[lvl]
        } else {
            c(0.0)
        }
    });
    let g: Vec<CMat> = me.effects.iter().map(|e| x.adjoint() * e * &x).collect();
    let t: Vec<Vec<CMat>> = de
        .effects
        .iter()
        .map(|e| inputs.iter().map(|rho| residue_contraction(rho, e, n2)).collect())
        .collect();
    Ok(KnillParts { t, g, n2 })
}

/// O[p,p'] = Σ_{r,r'} T[r',r] G[(r',p'),(r,p)], returned in the 0/1 basis.
fn knill_output(t: &CMat, g: &CMat, n2: usize, h: &CMat) -> CMat {
    let mut o = CMat::zeros(2, 2);
    for rp in 0..n2 {
        for r in 0..n2 {
            let tv = t[(rp, r)];
            if tv == c(0.0) {
                continue;
            }
            for p in 0..2 {
                for pp in 0..2 {
                    o[(p, pp)] += tv * g[(2 * rp + pp, 2 * r + p)];
                }
            }
        }
    }
    h * o * h
}

fn choi_from_outputs(outs: &[CMat]) -> CMat {
    let mut j = CMat::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            let o = &outs[2 * a + b];
            for i in 0..2 {
                for k in 0..2 {
                    j[(2 * a + i, 2 * b + k)] = o[(i, k)];
                }
            }
        }
    }
    j
}

fn knill(cfg: &EcConfig) -> Result<LogicalChannelReport> {
    let channel = cfg.channel()?;
    let damaged = damaged_operators(&cfg.data_code, &channel)?;
    let parts = knill_parts(cfg, &damaged)?;
    let h = hadamard();
    let paulis: Vec<CMat> = (0..4).map(pauli).collect();
    let mut total = CMat::zeros(4, 4);
    let mut stats = Vec::new();
    for (x1, tx) in parts.t.iter().enumerate() {
        if tx.iter().all(|m| m.iter().all(|z| z.norm() == 0.0)) {
            continue;
        }
        for (x2, gx) in parts.g.iter().enumerate() {
            let outs: Vec<CMat> = tx.iter().map(|t| knill_output(t, gx, parts.n2, &h)).collect();
            let choi = choi_from_outputs(&outs);
            let w: Vec<f64> = paulis.iter().map(|p| choi_weight(&choi, p).max(0.0)).collect();
            let i = ml_decode(std::slice::from_ref(&w))?[0];
            total += undo(&choi, &paulis[i]);
            record(&mut stats, (x1, x2), &choi, i, &w);
        }
    }
    finish(cfg, total, 0.0, stats)
}

fn record(stats: &mut Vec<OutcomeStat>, outcome: (usize, usize), choi: &CMat, decision: usize, w: &[f64]) {
    let p = choi.trace().re / 2.0;
    if p <= 1e-15 {
        return;
    }
    let s: f64 = w.iter().sum();
    let posterior = w.iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect();
    stats.push(OutcomeStat { outcome, probability: p, decision, posterior });
}

fn finish(cfg: &EcConfig, total: CMat, leaked: f64, stats: Vec<OutcomeStat>) -> Result<LogicalChannelReport> {
    let kept = total.trace().re;
    let raw = kept + leaked;
    if raw <= 1e-300 {
        return Err(Error::ProbabilityTooSmall(raw));
    }
    let choi = total.scale(2.0 / raw);
    let choi = (&choi + choi.adjoint()).unscale(2.0);
    let f_ent = (choi[(0, 0)] + choi[(0, 3)] + choi[(3, 0)] + choi[(3, 3)]).re / 4.0;
    let report = LogicalChannelReport {
        avg_gate_fidelity: (2.0 * f_ent + 1.0) / 3.0,
        ent_fidelity: f_ent,
        leakage: leaked / raw,
        raw_trace: raw / 2.0,
        logical_process: choi,
        outcome_stats: stats,
        config: cfg.describe(),
        cache_key: None,
        lower_bound_on_optimal: false,
        iterations: 0,
        fidelity_history: Vec::new(),
        max_iterate_defect: 0.0,
    };
    let (lo, _) = report.cptp_defects()?;
    if lo < -CPTP_TOL {
        return Err(Error::NotCompletelyPositive(lo));
    }
    Ok(report)
}

fn hybrid(cfg: &EcConfig) -> Result<LogicalChannelReport> {
    let n = cfg.data_code.order();
    let n2 = 2 * n;
    let top = &cfg.mid_ancilla_code;
    let m = top.order();
    let out = &cfg.out_code;
    let l = out.order();
    let channel = cfg.channel()?;
    let damaged = damaged_operators(&cfg.data_code, &channel)?;
    let de = data_effects(cfg, &damaged)?;
    // top rail τ_q
    let zero = top.codeword(0);
    let taus: Vec<FockVector> = (0..n)
        .map(|q| crate::fock::rotation(top.space(), PI * q as f64 / (n * m) as f64).apply(&zero))
        .collect::<Result<_>>()?;
    let te = ancilla_effects(cfg, &taus, n * m)?;
    let tau_mat = CMat::from_fn(top.space().dim(), n, |lvl, q| taus[q].amplitudes()[lvl]);
    let gt: Vec<CMat> = te.effects.iter().map(|e| tau_mat.adjoint() * e * &tau_mat).collect();
    // output rail: logical coordinates of e^{iπt n̂/NL}|+_L⟩ for t in (−2N, 2N)
    let plus_l = out.plus();
    let z0 = out.codeword(0);
    let z1 = out.codeword(1);
    let coords = |t: i64| -> Result<(CVec, f64)> {
        let v = crate::fock::rotation(out.space(), PI * t as f64 / (n * l) as f64).apply(&plus_l)?;
        let cv = CVec::from_vec(vec![z0.inner(&v), z1.inner(&v)]);
        let leak = 1.0 - cv.norm_squared();
        Ok((cv, leak))
    };
    let mut w_of = Vec::with_capacity(2 * n2 - 1);
    for t in -(n2 as i64 - 1)..=(n2 as i64 - 1) {
        w_of.push(coords(t)?);
    }
    let widx = |t: i64| (t + n2 as i64 - 1) as usize;
    // unprojected overlaps ⟨χ_{r'}|χ_r⟩ for the trace bookkeeping
    let chi: Vec<FockVector> = (0..n2)
        .map(|r| crate::fock::rotation(out.space(), PI * r as f64 / (n * l) as f64).apply(&plus_l))
        .collect::<Result<_>>()?;
    let h = hadamard();
    let cliffords = [h.clone(), pauli(2) * &h];
    let mut total = CMat::zeros(4, 4);
    let mut leaked = 0.0;
    let mut stats = Vec::new();
    for (xd, ed) in de.effects.iter().enumerate() {
        let tx: Vec<CMat> = damaged.iter().map(|rho| residue_contraction(rho, ed, n2)).collect();
        if tx.iter().all(|t| t.iter().all(|z| z.norm() == 0.0)) {
            continue;
        }
        for (xt, g) in gt.iter().enumerate() {
            // combined coefficient A_ab[r',r] = T_ab[r',r] Gt[r' mod N, r mod N]
            let coef: Vec<CMat> = tx.iter().map(|t| CMat::from_fn(n2, n2, |rp, r| t[(rp, r)] * g[(rp % n, r % n)])).collect();
            let raw_trace: f64 = {
                let a = &coef[0] + &coef[3];
                let mut s = c(0.0);
                for rp in 0..n2 {
                    for r in 0..n2 {
                        s += a[(rp, r)] * chi[rp].inner(&chi[r]);
                    }
                }
                s.re
            };
            if raw_trace <= 0.0 {
                continue;
            }
            let mut best: Option<(f64, usize, usize, CMat)> = None;
            let mut weights = Vec::with_capacity(2 * n2);
            for k in 0..n2 {
                let outs: Vec<CMat> = coef
                    .iter()
                    .map(|a| {
                        let mut o = CMat::zeros(2, 2);
                        for rp in 0..n2 {
                            for r in 0..n2 {
                                let v = a[(rp, r)];
                                if v == c(0.0) {
                                    continue;
                                }
                                let wr = &w_of[widx(r as i64 - k as i64)].0;
                                let wrp = &w_of[widx(rp as i64 - k as i64)].0;
                                o += (wr * wrp.adjoint()) * v;
                            }
                        }
                        o
                    })
                    .collect();
                let choi = choi_from_outputs(&outs);
                for (ai, cl) in cliffords.iter().enumerate() {
                    let w = choi_weight(&choi, cl).max(0.0);
                    weights.push(w);
                    if best.as_ref().map_or(true, |b| w > b.0) {
                        best = Some((w, k, ai, choi.clone()));
                    }
                }
            }
            let (_, k, ai, choi) = best.unwrap();
            let corrected = undo(&choi, &cliffords[ai]);
            leaked += raw_trace - choi.trace().re;
            record(&mut stats, (xd, xt), &choi, 2 * k + ai, &weights);
            total += corrected;
        }
    }
    finish(cfg, total, leaked.max(0.0), stats)
}

/// Average gate infidelity of the bare {|0⟩, |1⟩} qubit under the noise.
pub fn trivial_baseline(noise: NoiseParams) -> f64 {
    let g = noise.gamma();
    let f_ent = (1.0 + (1.0 - g) + 2.0 * (1.0 - g).sqrt() * (-0.5 * noise.kappa_phi_t).exp()) / 4.0;
    1.0 - (2.0 * f_ent + 1.0) / 3.0
}

/// Discrete parameter grid of a family up to a mean excitation number.
pub fn family_grid(family: crate::codes::Family, order: usize, nbar_max: f64) -> Vec<CodeParams> {
    use crate::codes::Family;
    let nf = order as f64;
    match family {
        Family::Binomial => (1..).map(|k| CodeParams::Binomial { k }).take_while(|p| matches!(p, CodeParams::Binomial { k } if nf * *k as f64 / 2.0 <= nbar_max)).collect(),
        Family::PeggBarnett => (2..)
            .map(|m| CodeParams::PeggBarnett { s: m * order })
            .take_while(|p| matches!(p, CodeParams::PeggBarnett { s } if (*s as f64 - 1.0) / 2.0 <= nbar_max))
            .collect(),
        Family::Cat => (1..)
            .map(|i| CodeParams::Cat { alpha: 0.25 * i as f64 })
            .take_while(|p| matches!(p, CodeParams::Cat { alpha } if alpha * alpha <= nbar_max))
            .collect(),
        _ => Vec::new(),
    }
}

/// Result of a break-even search.
#[derive(Clone, Debug, PartialEq)]
pub struct BreakEven {
    pub kappa_t: f64,
    /// Bracket of the crossing at termination.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// min over `grid` of infidelity − trivial baseline, at κt = κ_φt = `kt`.
pub fn break_even_gap(base: &EcConfig, grid: &[CodeParams], kt: f64) -> Result<f64> {
    let noise = NoiseParams::new(kt, kt)?;
    let mut best = f64::INFINITY;
    for p in grid {
        let code = match standard_code(p, base.data_code.order()) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let cfg = EcConfig { data_code: code, noise: Noise::LossDephasing(noise), ..base.clone() };
        let r = telecorrect_channel(&cfg)?;
        best = best.min(r.infidelity());
    }
    if !best.is_finite() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    Ok(best - trivial_baseline(noise))
}

/// Log-space bisection for the κt (with κ_φt = κt) where the best code on
/// the grid matches the trivial encoding. `base` supplies order, scheme,
/// flavor and ancillas; its data code is replaced by each grid entry.
pub fn break_even_threshold(base: &EcConfig, grid: &[CodeParams], lo: f64, hi: f64, rel_tol: f64) -> Result<BreakEven> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("invalid bounds [{lo}, {hi}]")));
    }
    let f_lo = break_even_gap(base, grid, lo)?;
    let f_hi = break_even_gap(base, grid, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut evals = 2;
    while b / a > 1.0 + rel_tol {
        let mid = (a * b).sqrt();
        let f = break_even_gap(base, grid, mid)?;
        evals += 1;
        if f.signum() == f_lo.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(BreakEven { kappa_t: (a * b).sqrt(), bracket: (a, b), evaluations: evals })
}

/// Settings of the iterative recovery search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryOptions {
    pub max_iterations: usize,
    pub tol: f64,
    pub max_dim: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tol: 1e-10, max_dim: 64 }
    }
}

/// Fixed-point ascent over CPTP recoveries 𝓡: data mode → qubit, seeded
/// with the better of the first iterate from the completely depolarizing
/// map and the Choi of the Knill pretty_good recovery. The result is a
/// lower bound on the optimum.
pub fn optimal_recovery(config: &EcConfig, opts: RecoveryOptions) -> Result<LogicalChannelReport> {
    let code = &config.data_code;
    let d = code.space().dim();
    if d > opts.max_dim {
        return Err(Error::DimTooLarge { dim: d, limit: opts.max_dim });
    }
    let channel = config.channel()?;
    let damaged = damaged_operators(code, &channel)?;
    // W[(x,a),(y,b)] = conj(D_ab[x,y]); F_ent(𝓡∘𝒩∘𝓢) = tr(W J_R)/4
    let w = CMat::from_fn(2 * d, 2 * d, |r, s| damaged[2 * (r % 2) + s % 2][(r / 2, s / 2)].conj());
    let fid = |j: &CMat| trace_product_c(&w, j) / 4.0;

    let depol = CMat::identity(2 * d, 2 * d).unscale(2.0);
    let mut seeds = vec![ascend_step(&depol, &w, d)?];
    let pg = EcConfig { scheme: Scheme::PrettyGood, flavor: Flavor::Knill, ..config.clone() };
    seeds.push(cptp_clean(&knill_recovery_choi(&pg)?, d)?);
    let mut j = seeds.into_iter().max_by(|a, b| fid(a).total_cmp(&fid(b))).unwrap();
    let mut f = fid(&j);
    let mut history = vec![f];
    let mut worst = recovery_defect(&j, d)?;
    let mut steps = 1;
    while steps < opts.max_iterations {
        steps += 1;
        let next = ascend_step(&j, &w, d)?;
        let fnext = fid(&next);
        // converged: a gain below tol is not taken as a new iterate
        if fnext - f < opts.tol {
            break;
        }
        worst = worst.max(recovery_defect(&next, d)?);
        j = next;
        f = fnext;
        history.push(f);
    }
    // logical Choi of 𝓡∘𝒩∘𝓢
    let outs: Vec<CMat> = damaged.iter().map(|dab| apply_choi(&j, dab, d)).collect();
    let mut report = finish(config, choi_from_outputs(&outs), 0.0, Vec::new())?;
    // the telecorrection channel is itself a recovery; keep whichever is better
    let tele = telecorrect_channel(&pg)?;
    if tele.ent_fidelity > report.ent_fidelity {
        report.logical_process = tele.logical_process;
        report.ent_fidelity = tele.ent_fidelity;
        report.avg_gate_fidelity = tele.avg_gate_fidelity;
    }
    report.lower_bound_on_optimal = true;
    report.iterations = history.len();
    report.fidelity_history = history;
    report.max_iterate_defect = worst;
    report.config = format!("{} recovery=iterative", report.config);
    Ok(report)
}

/// max(−λ_min(J), ‖tr_out J − I‖_max) for a recovery Choi matrix.
fn recovery_defect(j: &CMat, d: usize) -> Result<f64> {
    let eig = hermitian_eigen(j, 1e-8)?;
    let lo = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut tp: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let t = j[(2 * a, 2 * b)] + j[(2 * a + 1, 2 * b + 1)];
            tp = tp.max((t - c(if a == b { 1.0 } else { 0.0 })).norm());
        }
    }
    Ok((-lo).max(tp).max(0.0))
}

fn trace_product_c(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum::<C64>().re
}

/// 𝓡(ρ) from its Choi J[(x,i),(y,k)]: out[i,k] = Σ ρ[x,y] J[(x,i),(y,k)].
fn apply_choi(j: &CMat, rho: &CMat, d: usize) -> CMat {
    CMat::from_fn(2, 2, |i, k| {
        let mut s = c(0.0);
        for x in 0..d {
            for y in 0..d {
                s += rho[(x, y)] * j[(2 * x + i, 2 * y + k)];
            }
        }
        s
    })
}

/// J' = (Λ^{−1/2}⊗I) J W J (Λ^{−1/2}⊗I) + (I − P_Λ)⊗|0⟩⟨0|, Λ = tr_out(J W J).
fn ascend_step(j: &CMat, w: &CMat, d: usize) -> Result<CMat> {
    let x = j * w * j;
    let x = (&x + x.adjoint()).unscale(2.0);
    let lam = CMat::from_fn(d, d, |a, b| x[(2 * a, 2 * b)] + x[(2 * a + 1, 2 * b + 1)]);
    let (inv, proj) = psd_sqrt_pinv_matrix(&lam, 1e-12)?;
    let big = CMat::from_fn(2 * d, 2 * d, |r, s| if r % 2 == s % 2 { inv[(r / 2, s / 2)] } else { c(0.0) });
    let mut out = &big * x * &big;
    let rest = CMat::identity(d, d) - proj;
    for a in 0..d {
        for b in 0..d {
            out[(2 * a, 2 * b)] += rest[(a, b)];
        }
    }
    cptp_clean(&out, d)
}

/// Clip negative Choi eigenvalues, then restore tr_out J = I with the
/// inverse square root of the partial trace. Rounding amplified by
/// Λ^{-1/2} near the cutoff is removed this way; the partial trace is
/// close to I, so the renormalization is well conditioned.
fn cptp_clean(j: &CMat, d: usize) -> Result<CMat> {
    let eig = nalgebra::SymmetricEigen::new((j + j.adjoint()).unscale(2.0));
    let v = &eig.eigenvectors;
    let lam = CMat::from_diagonal(&eig.eigenvalues.map(|x| c(x.max(0.0))));
    let j = v * lam * v.adjoint();
    let t = CMat::from_fn(d, d, |a, b| j[(2 * a, 2 * b)] + j[(2 * a + 1, 2 * b + 1)]);
    let (tinv, _) = psd_sqrt_pinv_matrix(&t, 1e-12)?;
    let big = CMat::from_fn(2 * d, 2 * d, |r, s| if r % 2 == s % 2 { tinv[(r / 2, s / 2)] } else { c(0.0) });
    let out = &big * j * &big;
    Ok((&out + out.adjoint()).unscale(2.0))
}

/// Choi of the decoded Knill recovery as a map from the data mode to the
/// logical qubit: J[(n,i),(n',k)] = output for input |n⟩⟨n'|.
pub fn knill_recovery_choi(cfg: &EcConfig) -> Result<CMat> {
    let channel = cfg.channel()?;
    let damaged = damaged_operators(&cfg.data_code, &channel)?;
    let parts = knill_parts(cfg, &damaged)?;
    let h = hadamard();
    let paulis: Vec<CMat> = (0..4).map(pauli).collect();
    let n2 = parts.n2;
    let d = cfg.data_code.space().dim();
    let channel_effects = {
        let de = data_effects(cfg, &damaged)?;
        de.effects
    };
    let mut j = CMat::zeros(2 * d, 2 * d);
    for (x1, tx) in parts.t.iter().enumerate() {
        let e = &channel_effects[x1];
        for gx in &parts.g {
            let outs: Vec<CMat> = tx.iter().map(|t| knill_output(t, gx, n2, &h)).collect();
            let choi = choi_from_outputs(&outs);
            let w: Vec<f64> = paulis.iter().map(|p| choi_weight(&choi, p).max(0.0)).collect();
            let i = ml_decode(std::slice::from_ref(&w))?[0];
            let pi = &paulis[i];
            // K(r',r) = output for a unit residue pair, already Pauli-undone
            let mut kr = vec![CMat::zeros(2, 2); n2 * n2];
            for rp in 0..n2 {
                for r in 0..n2 {
                    let mut t = CMat::zeros(n2, n2);
                    t[(rp, r)] = c(1.0);
                    let o = knill_output(&t, gx, n2, &h);
                    kr[rp * n2 + r] = pi.adjoint() * o * pi;
                }
            }
            for n in 0..d {
                for np in 0..d {
                    let v = e[(np, n)];
                    if v == c(0.0) {
                        continue;
                    }
                    let o = &kr[(np % n2) * n2 + n % n2];
                    for i in 0..2 {
                        for k in 0..2 {
                            j[(2 * n + i, 2 * np + k)] += v * o[(i, k)];
                        }
                    }
                }
            }
        }
    }
    Ok(j)
}

/// Decoded Knill output for one logical input, obtained by pushing the
/// encoded state itself through the circuit. Decisions come from the
/// basis operators, as in [`telecorrect_channel`].
pub fn telecorrect_state(config: &EcConfig, rho_logical: &CMat) -> Result<CMat> {
    let channel = config.channel()?;
    let damaged = damaged_operators(&config.data_code, &channel)?;
    let z = [config.data_code.codeword(0), config.data_code.codeword(1)];
    let mut enc = CMat::zeros(config.data_code.space().dim(), config.data_code.space().dim());
    for a in 0..2 {
        for b in 0..2 {
            enc += (z[a].amplitudes() * z[b].amplitudes().adjoint()) * rho_logical[(a, b)];
        }
    }
    let rho_data = channel.apply(&enc)?;
    let mut inputs = damaged.clone();
    inputs.push(rho_data);
    let parts = knill_parts(config, &inputs)?;
    let h = hadamard();
    let paulis: Vec<CMat> = (0..4).map(pauli).collect();
    let mut out = CMat::zeros(2, 2);
    let mut norm = 0.0;
    for tx in &parts.t {
        for gx in &parts.g {
            let outs: Vec<CMat> = tx.iter().map(|t| knill_output(t, gx, parts.n2, &h)).collect();
            let choi = choi_from_outputs(&outs[..4]);
            let w: Vec<f64> = paulis.iter().map(|p| choi_weight(&choi, p).max(0.0)).collect();
            let i = ml_decode(std::slice::from_ref(&w))?[0];
            norm += choi.trace().re;
            out += paulis[i].adjoint() * &outs[4] * &paulis[i];
        }
    }
    Ok(out.scale(2.0 / norm))
}

/// Logical density operator of a Bloch vector.
pub fn bloch_density(x: f64, y: f64, z: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.5 * (1.0 + z)), C64::new(0.5 * x, -0.5 * y), C64::new(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z))])
}

/// Custom noise from explicit Kraus operators on the data space.
pub fn custom_noise(space: ModeSpace, ops: Vec<crate::fock::FockOperator>) -> Result<Noise> {
    Ok(Noise::Custom(KrausChannel::from_ops(space, ops)?))
}
