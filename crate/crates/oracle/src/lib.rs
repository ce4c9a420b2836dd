//! Brute-force verifiers for small instances.
//!
//! Everything here is exponential or slow on purpose and is meant for tests.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use qcs_core::matrices::{gauss_sum, is_prime};
use qcs_core::recover::ConicProblem;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle budget exceeded: {0}")]
    Budget(String),
    #[error("invalid oracle input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] qcs_core::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Limits that keep the oracles tractable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBudget {
    pub max_n: usize,
    pub max_k: usize,
    /// Upper bound on the number of enumerated supports.
    pub max_supports: u64,
    /// Points per axis for the two-dimensional grid search.
    pub grid_resolution: usize,
    /// Columns accepted by the reference solver.
    pub max_dense: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_n: 24,
            max_k: 3,
            max_supports: 100_000,
            grid_resolution: 2001,
            max_dense: 40,
        }
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Result of the exhaustive decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct L0Decode {
    pub x: Vec<f64>,
    pub support: Vec<usize>,
    pub residual: f64,
}

/// Least squares restricted to `support`; returns the coefficients and the
/// residual norm.
pub fn support_least_squares(phi: &DMatrix<f64>, y: &[f64], support: &[usize]) -> (Vec<f64>, f64) {
    let yv = DVector::from_column_slice(y);
    if support.is_empty() {
        return (Vec::new(), yv.norm());
    }
    let a = phi.select_columns(support);
    let svd = a.clone().svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE) * support.len().max(y.len()) as f64;
    let coef = svd.solve(&yv, tol).expect("U and V were requested");
    let res = (&a * &coef - &yv).norm();
    (coef.iter().copied().collect(), res)
}

/// Tries every support of size at most `k` and keeps the least-squares fit
/// with the smallest residual. Ties keep the first support in lexicographic
/// order of increasing size.
pub fn exhaustive_l0_decode(phi: &DMatrix<f64>, y: &[f64], k: usize, budget: &OracleBudget) -> Result<L0Decode> {
    let (m, n) = phi.shape();
    if y.len() != m {
        return Err(OracleError::Invalid(format!("y has length {}, expected {m}", y.len())));
    }
    if k > n {
        return Err(OracleError::Invalid(format!("k = {k} exceeds n = {n}")));
    }
    if n > budget.max_n {
        return Err(OracleError::Budget(format!("n = {n} exceeds {}", budget.max_n)));
    }
    if k > budget.max_k && k < n {
        return Err(OracleError::Budget(format!("k = {k} exceeds {}", budget.max_k)));
    }
    let total: u64 = (0..=k).map(|s| binomial(n, s)).fold(0u64, u64::saturating_add);
    if total > budget.max_supports {
        return Err(OracleError::Budget(format!("{total} supports exceed {}", budget.max_supports)));
    }
    let (_, r0) = support_least_squares(phi, y, &[]);
    let mut best = L0Decode {
        x: vec![0.0; n],
        support: Vec::new(),
        residual: r0,
    };
    for size in 1..=k {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            let (coef, res) = support_least_squares(phi, y, &comb);
            if res < best.residual {
                let mut x = vec![0.0; n];
                for (&j, &c) in comb.iter().zip(&coef) {
                    x[j] = c;
                }
                best = L0Decode {
                    x,
                    support: comb.clone(),
                    residual: res,
                };
            }
            // Next combination in lexicographic order.
            let mut i = size;
            while i > 0 && comb[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..size {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    Ok(best)
}

/// Output of the reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
    pub objective: f64,
    /// `||K_z z + K_nu nu - c||` at the returned point.
    pub residual: f64,
    pub lambda: f64,
}

/// `min ||K_nu nu - b||` over `||nu|| <= radius`, from the eigenpairs of
/// `K_nu^T K_nu`. Returns the minimizer.
struct TrustRegion {
    kn: DMatrix<f64>,
    vecs: DMatrix<f64>,
    vals: DVector<f64>,
    radius: f64,
}

impl TrustRegion {
    fn new(kn: DMatrix<f64>, radius: f64) -> Self {
        let eig = SymmetricEigen::new(kn.tr_mul(&kn));
        Self {
            kn,
            vecs: eig.eigenvectors,
            vals: eig.eigenvalues.map(|v| v.max(0.0)),
            radius,
        }
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let g = self.vecs.tr_mul(&self.kn.tr_mul(b));
        let top = self.vals.max().max(f64::MIN_POSITIVE);
        let cut = 1e-12 * top;
        let norm2 = |mu: f64| -> f64 {
            g.iter()
                .zip(self.vals.iter())
                .map(|(gi, li)| if *li + mu > cut { (gi / (li + mu)).powi(2) } else { 0.0 })
                .sum()
        };
        let r2 = self.radius * self.radius;
        let mu = if norm2(0.0) <= r2 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, top);
            while norm2(hi) > r2 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if norm2(mid) > r2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hi
        };
        let coef = g.zip_map(&self.vals, |gi, li| if li + mu > cut { gi / (li + mu) } else { 0.0 });
        &self.vecs * coef
    }
}

struct Penalized<'a> {
    kz: &'a DMatrix<f64>,
    c: &'a DVector<f64>,
    tr: Option<TrustRegion>,
    step: f64,
    weight: f64,
}

impl Penalized<'_> {
    /// Residual of the best noise for `z`, and that noise.
    fn residual(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let b = self.c - self.kz * z;
        match &self.tr {
            Some(tr) => {
                let nu = tr.solve(&b);
                (&tr.kn * &nu - b, nu)
            }
            None => (-b, DVector::zeros(0)),
        }
    }

    /// Duality gap of the penalized problem at `z`.
    fn gap(&self, lambda: f64, z: &DVector<f64>) -> f64 {
        let (res, _) = self.residual(z);
        let primal = 0.5 * res.norm_squared() + lambda * self.weight * z.lp_norm(1);
        let corr = self.kz.tr_mul(&res).amax();
        let theta = -res * (lambda * self.weight / corr.max(f64::MIN_POSITIVE)).min(1.0);
        let support = self.tr.as_ref().map_or(0.0, |tr| tr.radius * tr.kn.tr_mul(&theta).norm());
        let dual = theta.dot(self.c) - 0.5 * theta.norm_squared() - support;
        primal - dual
    }

    /// FISTA with restarts on `0.5 f(z)^2 + lambda w ||z||_1`, stopped on the
    /// relative duality gap.
    fn minimize(&self, lambda: f64, start: &DVector<f64>, iters: usize) -> DVector<f64> {
        let thr = lambda * self.weight * self.step;
        let prox = |v: DVector<f64>| v.map(|t| t.signum() * (t.abs() - thr).max(0.0));
        let value = |z: &DVector<f64>| 0.5 * self.residual(z).0.norm_squared() + lambda * self.weight * z.lp_norm(1);
        let mut x = start.clone();
        let mut yk = x.clone();
        let mut t = 1.0f64;
        let mut fx = value(&x);
        for k in 0..iters {
            let (r, _) = self.residual(&yk);
            let xn = prox(&yk - self.kz.tr_mul(&r) * self.step);
            let fn_ = value(&xn);
            if fn_ > fx {
                yk = x.clone();
                t = 1.0;
                continue;
            }
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            yk = &xn + (&xn - &x) * ((t - 1.0) / tn);
            x = xn;
            t = tn;
            fx = fn_;
            if k % 20 == 0 && self.gap(lambda, &x) <= 1e-9 * fx {
                break;
            }
        }
        x
    }
}

/// Independent solver for the conic program: the noise variable is eliminated
/// by an exact trust-region step, the penalized problem
/// `0.5 f(z)^2 + lambda ||z||_1` is minimized by accelerated proximal
/// gradient, and `lambda` is bisected until `f(z) = tau1`.
pub fn dense_reference_solve(p: &ConicProblem, budget: &OracleBudget) -> Result<ReferenceSolution> {
    let (mm, n) = p.kz.shape();
    if n > budget.max_dense {
        return Err(OracleError::Budget(format!("{n} columns exceed {}", budget.max_dense)));
    }
    if p.c.len() != mm || !(p.tau1 >= 0.0) || !(p.tau2 >= 0.0) {
        return Err(OracleError::Invalid("inconsistent problem".into()));
    }
    let tr = match (&p.knu, p.tau2 > 0.0) {
        (Some(kn), true) => Some(TrustRegion::new(kn.clone(), p.tau2)),
        _ => None,
    };
    let lip = p.kz.tr_mul(&p.kz).symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let pen = Penalized {
        kz: &p.kz,
        c: &p.c,
        tr,
        step: 1.0 / lip,
        weight: p.weight.max(f64::MIN_POSITIVE),
    };
    let finish = |z: DVector<f64>, lambda: f64| {
        let (r, nu) = pen.residual(&z);
        let nu = if nu.is_empty() { vec![0.0; p.knu.as_ref().map_or(0, |k| k.ncols())] } else { nu.iter().copied().collect() };
        ReferenceSolution {
            objective: p.weight * z.lp_norm(1),
            residual: r.norm(),
            z: z.iter().copied().collect(),
            nu,
            lambda,
        }
    };
    let zero = DVector::zeros(n);
    if pen.residual(&zero).0.norm() <= p.tau1 {
        return Ok(finish(zero, f64::INFINITY));
    }
    let iters = 20_000;
    // f(z_lambda) increases with lambda; find a bracket around tau1.
    let hi = pen.kz.tr_mul(&p.c).amax() / pen.weight;
    let mut lo = hi;
    let mut z_lo = pen.minimize(lo, &zero, iters);
    while pen.residual(&z_lo).0.norm() > p.tau1 {
        lo /= 4.0;
        if lo < 1e-14 * hi {
            return Err(OracleError::Core(qcs_core::Error::Infeasible {
                certificate: pen.residual(&z_lo).0.norm() - p.tau1,
            }));
        }
        z_lo = pen.minimize(lo, &z_lo, iters);
    }
    // Illinois regula falsi on ln(lambda), keeping the feasible endpoint.
    let excess = |z: &DVector<f64>| pen.residual(z).0.norm() - p.tau1;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut fa = excess(&z_lo);
    let mut fb = excess(&pen.minimize(hi, &z_lo, iters));
    let mut side = 0;
    for _ in 0..100 {
        if -fa <= 1e-8 * p.tau1 || b - a < 1e-12 {
            break;
        }
        let t = (a * fb - b * fa) / (fb - fa);
        let z = pen.minimize(t.exp(), &z_lo, iters);
        let ft = excess(&z);
        if ft > 0.0 {
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            fa = ft;
            z_lo = z;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    lo = a.exp();
    Ok(finish(z_lo, lo))
}

/// Grid search of `min w ||z||_1` over a box for two-column problems without
/// a noise variable. Returns the best feasible grid point.
pub fn grid_solve_2d(p: &ConicProblem, half_width: f64, budget: &OracleBudget) -> Result<Option<(f64, f64)>> {
    if p.kz.ncols() != 2 {
        return Err(OracleError::Invalid("grid search needs exactly two columns".into()));
    }
    let g = budget.grid_resolution.max(2);
    let mut best: Option<(f64, (f64, f64))> = None;
    for i in 0..g {
        for j in 0..g {
            let a = -half_width + 2.0 * half_width * i as f64 / (g - 1) as f64;
            let b = -half_width + 2.0 * half_width * j as f64 / (g - 1) as f64;
            let r = p.kz.column(0) * a + p.kz.column(1) * b - &p.c;
            if r.norm() <= p.tau1 {
                let v = p.weight * (a.abs() + b.abs());
                if best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, (a, b)));
                }
            }
        }
    }
    Ok(best.map(|b| b.1))
}

/// Chirp column `omega^(r x^2 + m x)` on the rows `x = 0..ell`, scaled by
/// `1 / sqrt(ell)`, evaluated straight from the formula.
pub fn chirp_column(p: u64, ell: usize, r: u64, m: u64) -> Vec<Complex64> {
    let s = 1.0 / (ell as f64).sqrt();
    (0..ell as u128)
        .map(|x| {
            let e = (r as u128 * x * x + m as u128 * x) % p as u128;
            Complex64::from_polar(s, 2.0 * PI * e as f64 / p as f64)
        })
        .collect()
}

/// `| |<v_a, v_b>| - |S(r_b - r_a, m_b - m_a, p, ell)| / ell |` for the chirp
/// columns `a = (r_a, m_a)` and `b = (r_b, m_b)`.
pub fn direct_gauss_check(p: u64, ell: usize, pair: ((u64, u64), (u64, u64))) -> Result<f64> {
    let ((ra, ma), (rb, mb)) = pair;
    if !is_prime(p) || ra >= p || ma >= p || rb >= p || mb >= p || ell == 0 || ell as u64 > p {
        return Err(OracleError::Invalid(format!("invalid pair {pair:?} for p = {p}, ell = {ell}")));
    }
    let va = chirp_column(p, ell, ra, ma);
    let vb = chirp_column(p, ell, rb, mb);
    let ip: Complex64 = va.iter().zip(&vb).map(|(a, b)| a.conj() * b).sum();
    let s = gauss_sum(rb as i64 - ra as i64, mb as i64 - ma as i64, p, ell)?;
    Ok((ip.norm() - s.norm() / ell as f64).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(24, 3), 2024);
        assert_eq!(binomial(4, 0), 1);
        assert_eq!(binomial(4, 4), 1);
    }

    #[test]
    fn trust_region_projects() {
        let tr = TrustRegion::new(DMatrix::identity(2, 2), 1.0);
        let nu = tr.solve(&DVector::from_vec(vec![3.0, 4.0]));
        assert!((nu[0] - 0.6).abs() < 1e-12 && (nu[1] - 0.8).abs() < 1e-12);
        let inside = tr.solve(&DVector::from_vec(vec![0.3, 0.4]));
        assert!((inside[0] - 0.3).abs() < 1e-12);
    }
}
