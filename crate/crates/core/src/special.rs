//! Small special-function helpers shared by the code constructors,
//! the Wigner evaluator and the quadrature rules.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

pub fn ln_fact(n: usize) -> f64 {
    ln_factorial(n as u64)
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let k = i as f64;
        let b = k / (4.0 * k * k - 1.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule for ∫_0^∞ g(r) dr using r = tan(xπ/2), x ∈ [0, 1).
/// Returns (r_q, w_q) with the Jacobian folded into the weights.
pub fn half_line_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = std::f64::consts::FRAC_PI_2;
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let u = 0.5 * (xi + 1.0);
            let r = (u * half).tan();
            let sec = 1.0 / (u * half).cos();
            (r, 0.5 * wi * half * sec * sec)
        })
        .unzip()
}

/// Scaled associated Laguerre functions
/// ℓ_j = √(j!/(j+k)!) x^{k/2} e^{-x/2} L_j^{(k)}(x) for j = 0..=jmax,
/// evaluated by upward recurrence. These are bounded by one in magnitude
/// and equal |⟨j+k|D(√x)|j⟩| up to sign.
pub fn scaled_laguerre(k: usize, x: f64, jmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(jmax + 1);
    let l0 = if x == 0.0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (0.5 * k as f64 * x.ln() - 0.5 * x - 0.5 * ln_fact(k)).exp()
    };
    out.push(l0);
    if jmax == 0 {
        return out;
    }
    let kf = k as f64;
    let l1 = (kf + 1.0 - x) * l0 / (kf + 1.0).sqrt();
    out.push(l1);
    for j in 1..jmax {
        let jf = j as f64;
        let a = 2.0 * jf + kf + 1.0 - x;
        let b = (jf * (jf + kf)).sqrt();
        let next = (a * out[j] - b * out[j - 1]) / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
        out.push(next);
    }
    out
}

/// ⟨n|D(α)|m⟩ for real α, built from the scaled Laguerre functions.
pub fn displacement_element(n: usize, m: usize, alpha: f64, table: &LaguerreTable) -> f64 {
    let (k, j) = if n >= m { (n - m, m) } else { (m - n, n) };
    let base = table.get(k, j);
    let mut sign = if alpha < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    if n < m && k % 2 == 1 {
        sign = -sign;
    }
    sign * base
}

/// Cache of scaled Laguerre rows for a fixed argument x = α².
pub struct LaguerreTable {
    rows: Vec<Vec<f64>>,
}

impl LaguerreTable {
    pub fn new(x: f64, kmax: usize, jmax: usize) -> Self {
        let rows = (0..=kmax).map(|k| scaled_laguerre(k, x, jmax)).collect();
        Self { rows }
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.rows[k][j]
    }
}
