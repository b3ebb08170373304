//! Noise channels. The loss + dephasing channel is kept in factored form
//! (loss Kraus weights and a dephasing mask); composite Kraus operators
//! B̂_ℓÂ_k are only materialized on request.

use nalgebra::DMatrix;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::fock::{c, CMat, FockOperator, FockVector, ModeSpace};
use crate::special::ln_fact;

/// Completeness target for automatic cutoffs.
pub const AUTO_DEFECT: f64 = 1e-10;
/// Largest dephasing index the automatic search will use.
pub const MAX_DEPHASING_INDEX: usize = 100_000;
/// Largest dimension accepted by the dense Lindblad oracle.
pub const ORACLE_DIM_LIMIT: usize = 40;

/// Dimensionless noise strengths κt and κ_φt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub kappa_t: f64,
    pub kappa_phi_t: f64,
}

impl NoiseParams {
    pub fn new(kappa_t: f64, kappa_phi_t: f64) -> Result<Self> {
        for (name, v) in [("kappa_t", kappa_t), ("kappa_phi_t", kappa_phi_t)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { kappa_t, kappa_phi_t })
    }

    pub fn noiseless() -> Self {
        Self { kappa_t: 0.0, kappa_phi_t: 0.0 }
    }

    /// Loss probability γ = 1 − e^{−κt}.
    pub fn gamma(&self) -> f64 {
        -(-self.kappa_t).exp_m1()
    }
}

/// Cutoff choice for the Kraus expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cutoff {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug)]
enum Repr {
    LossDephasing { params: NoiseParams, k_max: usize, l_max: usize },
    Explicit { ops: Vec<FockOperator> },
}

/// A Kraus channel on one mode.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    space: ModeSpace,
    repr: Repr,
    completeness_defect: f64,
}

impl KrausChannel {
    pub fn identity(space: ModeSpace) -> Self {
        Self {
            space,
            repr: Repr::LossDephasing { params: NoiseParams::noiseless(), k_max: 0, l_max: 0 },
            completeness_defect: 0.0,
        }
    }

    /// Channel from an explicit operator list. The defect is the spectral
    /// norm of Σ K†K − I (trace-decreasing families are allowed).
    pub fn from_ops(space: ModeSpace, ops: Vec<FockOperator>) -> Result<Self> {
        let d = space.dim();
        let mut acc = CMat::zeros(d, d);
        for op in &ops {
            space.check(&op.space()?)?;
            let m = op.to_dense()?;
            acc += m.adjoint() * &m;
        }
        acc -= CMat::identity(d, d);
        let defect = crate::gates::spectral_norm(&acc);
        Ok(Self { space, repr: Repr::Explicit { ops }, completeness_defect: defect })
    }

    pub fn space(&self) -> ModeSpace {
        self.space
    }

    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }

    /// (k_max, l_max) for the loss + dephasing family.
    pub fn cutoffs(&self) -> Option<(usize, usize)> {
        match self.repr {
            Repr::LossDephasing { k_max, l_max, .. } => Some((k_max, l_max)),
            Repr::Explicit { .. } => None,
        }
    }

    pub fn params(&self) -> Option<NoiseParams> {
        match self.repr {
            Repr::LossDephasing { params, .. } => Some(params),
            Repr::Explicit { .. } => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.repr, Repr::LossDephasing { params, .. } if params.kappa_t == 0.0 && params.kappa_phi_t == 0.0)
    }

    /// Labels (k, ℓ) of the composite operators in `ops()` order.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        match self.repr {
            Repr::LossDephasing { params, k_max, l_max } => {
                let lmax = if params.kappa_phi_t == 0.0 { 0 } else { l_max };
                let kmax = if params.kappa_t == 0.0 { 0 } else { k_max };
                (0..=kmax).flat_map(|k| (0..=lmax).map(move |l| (k, l))).collect()
            }
            Repr::Explicit { ref ops } => (0..ops.len()).map(|i| (i, 0)).collect(),
        }
    }

    /// Materialize the Kraus operators.
    pub fn ops(&self) -> Result<Vec<FockOperator>> {
        match &self.repr {
            Repr::Explicit { ops } => Ok(ops.clone()),
            Repr::LossDephasing { params, .. } => {
                let d = self.space.dim();
                let mut out = Vec::new();
                for (k, l) in self.labels() {
                    let a = loss_kraus_matrix(d, params, k);
                    let b = dephasing_diag(d, params.kappa_phi_t, l);
                    let m = CMat::from_fn(d, d, |i, j| c(b[i]) * a[(i, j)]);
                    out.push(FockOperator::dense(self.space, m)?);
                }
                Ok(out)
            }
        }
    }

    /// Dense superoperator on column-stacked vec(ρ) (index col·dim + row).
    pub fn superoperator(&self) -> Result<CMat> {
        let d = self.space.dim();
        let mut s = CMat::zeros(d * d, d * d);
        for k in 0..d {
            for l in 0..d {
                let mut e = CMat::zeros(d, d);
                e[(k, l)] = c(1.0);
                let out = self.apply(&e)?;
                for j in 0..d {
                    for i in 0..d {
                        s[(j * d + i, l * d + k)] = out[(i, j)];
                    }
                }
            }
        }
        Ok(s)
    }

    /// N(ρ) = Σ K ρ K†.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        let d = self.space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        match &self.repr {
            Repr::Explicit { ops } => {
                let mut out = CMat::zeros(d, d);
                for op in ops {
                    let m = op.to_dense()?;
                    out += &m * rho * m.adjoint();
                }
                Ok(out)
            }
            Repr::LossDephasing { params, k_max, l_max } => {
                let mut out = if params.kappa_t == 0.0 { rho.clone() } else { apply_loss(rho, params, *k_max) };
                if params.kappa_phi_t > 0.0 {
                    let mask = dephasing_mask(d, params.kappa_phi_t, *l_max);
                    out.component_mul_assign(&mask);
                }
                Ok(out)
            }
        }
    }

    /// The pure branches K|ψ⟩ for every Kraus operator.
    pub fn branches(&self, v: &FockVector) -> Result<Vec<FockVector>> {
        self.space.check(&v.space())?;
        self.ops()?.iter().map(|k| k.apply(v)).collect()
    }
}

/// N(|ψ⟩⟨ψ|)
pub fn apply_channel_to_state(channel: &KrausChannel, v: &FockVector) -> Result<CMat> {
    channel.apply(&v.density())
}

/// N(ρ)
pub fn apply_channel(channel: &KrausChannel, rho: &CMat) -> Result<CMat> {
    channel.apply(rho)
}

/// |Â_k[n−k, n]|² = Binom(n, k; γ), as amplitude.
fn loss_amp(n: usize, k: usize, gamma: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if gamma == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if gamma == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let lb = ln_fact(n) - ln_fact(k) - ln_fact(n - k);
    (0.5 * (lb + k as f64 * gamma.ln() + (n - k) as f64 * (1.0 - gamma).ln())).exp()
}

fn loss_kraus_matrix(d: usize, params: &NoiseParams, k: usize) -> CMat {
    let g = params.gamma();
    CMat::from_fn(d, d, |i, j| if j == i + k { c(loss_amp(j, k, g)) } else { c(0.0) })
}

fn dephasing_diag(d: usize, x: f64, l: usize) -> Vec<f64> {
    (0..d)
        .map(|n| {
            let nf = n as f64;
            if x == 0.0 {
                return if l == 0 { 1.0 } else { 0.0 };
            }
            if n == 0 {
                return if l == 0 { 1.0 } else { 0.0 };
            }
            (0.5 * l as f64 * x.ln() - 0.5 * ln_fact(l) - 0.5 * x * nf * nf + l as f64 * nf.ln()).exp()
        })
        .collect()
}

fn apply_loss(rho: &CMat, params: &NoiseParams, k_max: usize) -> CMat {
    let d = rho.nrows();
    let g = params.gamma();
    let mut out = CMat::zeros(d, d);
    for k in 0..=k_max.min(d - 1) {
        let w: Vec<f64> = (0..d - k).map(|m| loss_amp(m + k, k, g)).collect();
        for j in 0..d - k {
            for i in 0..d - k {
                out[(i, j)] += rho[(i + k, j + k)] * (w[i] * w[j]);
            }
        }
    }
    out
}

/// P(X ≤ l) for X ~ Poisson(λ).
fn poisson_cdf(l: usize, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    Poisson::new(lambda).map(|p| p.cdf(l as u64)).unwrap_or(1.0)
}

/// Σ_{ℓ≤L} B_ℓ ρ B_ℓ† = mask ∘ ρ with mask[m,n] = e^{−x(m−n)²/2}·PoissonCDF(L; x·m·n).
fn dephasing_mask(d: usize, x: f64, l_max: usize) -> CMat {
    CMat::from_fn(d, d, |m, n| {
        let diff = m as f64 - n as f64;
        c((-0.5 * x * diff * diff).exp() * poisson_cdf(l_max, x * (m * n) as f64))
    })
}

/// 1 − Σ_{k≤K} Binom(n,k;γ)·PoissonCDF(L; x(n−k)²), worst over n < dim.
fn composite_defect(d: usize, params: &NoiseParams, k_max: usize, l_max: usize) -> f64 {
    let g = params.gamma();
    let mut worst: f64 = 0.0;
    for n in 0..d {
        let mut s = 0.0;
        for k in 0..=k_max.min(n) {
            let b = loss_amp(n, k, g).powi(2);
            let m = (n - k) as f64;
            s += b * poisson_cdf(l_max, params.kappa_phi_t * m * m);
        }
        worst = worst.max((1.0 - s).abs());
    }
    worst
}

/// Composite loss + dephasing Kraus family {B̂_ℓÂ_k}.
pub fn loss_dephasing_kraus(space: ModeSpace, params: NoiseParams, k_max: Cutoff, l_max: Cutoff) -> Result<KrausChannel> {
    let params = NoiseParams::new(params.kappa_t, params.kappa_phi_t)?;
    let d = space.dim();
    let k = match k_max {
        Cutoff::Fixed(k) => k.min(d - 1),
        Cutoff::Auto => {
            let mut k = 0;
            while k < d - 1 && composite_defect(d, &NoiseParams { kappa_phi_t: 0.0, ..params }, k, 0) > 0.1 * AUTO_DEFECT {
                k += 1;
            }
            k
        }
    };
    let l = match l_max {
        Cutoff::Fixed(l) => l,
        Cutoff::Auto => {
            if params.kappa_phi_t == 0.0 {
                0
            } else {
                // the dephasing tail is worst on the top level
                let lam = params.kappa_phi_t * ((d - 1) * (d - 1)) as f64;
                let mut l = lam.floor() as usize;
                while 1.0 - poisson_cdf(l, lam) >= 0.1 * AUTO_DEFECT {
                    l += 1;
                    if l > MAX_DEPHASING_INDEX {
                        return Err(Error::CutoffExceeded { achieved: 1.0 - poisson_cdf(l, lam) });
                    }
                }
                l
            }
        }
    };
    let defect = composite_defect(d, &params, k, l);
    if (k_max == Cutoff::Auto || l_max == Cutoff::Auto) && defect > AUTO_DEFECT {
        return Err(Error::CutoffExceeded { achieved: defect });
    }
    Ok(KrausChannel { space, repr: Repr::LossDephasing { params, k_max: k, l_max: l }, completeness_defect: defect })
}

/// Default channel: automatic cutoffs.
pub fn loss_dephasing(space: ModeSpace, params: NoiseParams) -> Result<KrausChannel> {
    loss_dephasing_kraus(space, params, Cutoff::Auto, Cutoff::Auto)
}

/// exp(tL) for the Liouvillian L = κD[â] + κ_φD[n̂], with the rates read
/// from `rates` (κ = kappa_t, κ_φ = kappa_phi_t per unit time). Acts on
/// column-stacked vec(ρ). Dense; test use only.
pub fn lindblad_oracle(space: ModeSpace, rates: NoiseParams, t: f64) -> Result<CMat> {
    let d = space.dim();
    if d > ORACLE_DIM_LIMIT {
        return Err(Error::DimTooLarge { dim: d, limit: ORACLE_DIM_LIMIT });
    }
    let l = liouvillian(d, rates);
    // the generator preserves the coherence order m − n; exponentiate per block
    let mut out = DMatrix::<f64>::zeros(d * d, d * d);
    for q in -(d as i64 - 1)..=(d as i64 - 1) {
        let idx: Vec<usize> = (0..d)
            .filter_map(|j| {
                let i = j as i64 + q;
                (0..d as i64).contains(&i).then(|| j * d + i as usize)
            })
            .collect();
        let blk = DMatrix::from_fn(idx.len(), idx.len(), |r, s| l[(idx[r], idx[s])] * t);
        let e = blk.exp();
        for (r, &ir) in idx.iter().enumerate() {
            for (s, &is) in idx.iter().enumerate() {
                out[(ir, is)] = e[(r, s)];
            }
        }
    }
    Ok(out.map(c))
}

/// Same as `lindblad_oracle` but exponentiating the full generator at once.
pub fn lindblad_oracle_dense(space: ModeSpace, rates: NoiseParams, t: f64) -> Result<CMat> {
    let d = space.dim();
    if d > ORACLE_DIM_LIMIT {
        return Err(Error::DimTooLarge { dim: d, limit: ORACLE_DIM_LIMIT });
    }
    Ok((liouvillian(d, rates) * t).exp().map(c))
}

/// Vectorized Liouvillian (real in the Fock basis).
pub fn liouvillian(d: usize, rates: NoiseParams) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let n = DMatrix::<f64>::from_fn(d, d, |i, j| if i == j { i as f64 } else { 0.0 });
    let id = DMatrix::<f64>::identity(d, d);
    let diss = |op: &DMatrix<f64>| {
        let ld = op.transpose() * op;
        op.kronecker(op) - (id.kronecker(&ld) + ld.transpose().kronecker(&id)) * 0.5
    };
    diss(&a) * rates.kappa_t + diss(&n) * rates.kappa_phi_t
}

/// Largest |entry| of the block structure violation: entries of the
/// Liouvillian coupling different coherence orders.
pub fn coherence_block_leak(d: usize, rates: NoiseParams) -> f64 {
    let l = liouvillian(d, rates);
    let order = |v: usize| (v % d) as i64 - (v / d) as i64;
    let mut worst: f64 = 0.0;
    for r in 0..d * d {
        for s in 0..d * d {
            if order(r) != order(s) {
                worst = worst.max(l[(r, s)].abs());
            }
        }
    }
    worst
}

/// ‖vec‖ helper: Frobenius norm of a superoperator difference.
pub fn superoperator_distance(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}

/// ⟨n̂⟩ of a density operator.
pub fn mean_number(rho: &CMat) -> f64 {
    (0..rho.nrows()).map(|n| rho[(n, n)].re * n as f64).sum()
}
