//! Coherence and restricted-isometry probes on row-restricted ensembles.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::chirp::{chirp_columns, is_prime};
use super::{Entries, MeasurementEnsemble};
use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub argpair: (usize, usize),
    pub ell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipProxy {
    pub k_mu_bound: f64,
    pub mc_delta: f64,
}

/// First `ell` rows as `(Re, Im)`.
fn restrict(entries: &Entries, ell: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    match entries {
        Entries::Real(a) => {
            let re = a.rows(0, ell).into_owned();
            let im = DMatrix::zeros(ell, a.ncols());
            (re, im)
        }
        Entries::Complex(a) => {
            let s = a.rows(0, ell);
            (s.map(|z| z.re), s.map(|z| z.im))
        }
    }
}

fn check_ell(a: &MeasurementEnsemble, ell: usize) -> Result<()> {
    if ell == 0 || ell > a.m {
        return invalid(format!("ell = {ell} outside 1..={}", a.m));
    }
    Ok(())
}

/// Largest `|<a_i, a_j>|` over column pairs of the unit-normalized `ell`-row restriction.
pub fn coherence(a: &MeasurementEnsemble, ell: usize) -> Result<CoherenceReport> {
    check_ell(a, ell)?;
    let n = a.n;
    let (re, im) = restrict(&a.entries, ell);
    // Stacked [Re; Im] and its quarter turn [Im; -Re]; R^T R gives Re<a_i,a_j>, R^T T gives Im.
    let mut r = DMatrix::zeros(2 * ell, n);
    let mut t = DMatrix::zeros(2 * ell, n);
    for j in 0..n {
        let norm = (re.column(j).norm_squared() + im.column(j).norm_squared()).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateColumn(j));
        }
        for i in 0..ell {
            let (x, y) = (re[(i, j)] / norm, im[(i, j)] / norm);
            r[(i, j)] = x;
            r[(ell + i, j)] = y;
            t[(i, j)] = y;
            t[(ell + i, j)] = -x;
        }
    }
    let mut best = (0.0f64, (0usize, 1usize.min(n.saturating_sub(1))));
    const BLOCK: usize = 256;
    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + BLOCK).min(n);
        let left = r.columns(0, j1);
        let g_re = left.tr_mul(&r.columns(j0, j1 - j0));
        let g_im = left.tr_mul(&t.columns(j0, j1 - j0));
        for jj in 0..j1 - j0 {
            let j = j0 + jj;
            for i in 0..j {
                let v = g_re[(i, jj)].hypot(g_im[(i, jj)]);
                if v > best.0 {
                    best = (v, (i, j));
                }
            }
        }
        j0 = j1;
    }
    Ok(CoherenceReport {
        mu: best.0.min(1.0),
        argpair: best.1,
        ell,
    })
}

/// Extreme eigenvalues of the Gram matrix of the chosen columns, restricted to
/// `ell` rows and scaled by `1/sqrt(ell)`.
fn gram_extremes_parts(re: &DMatrix<f64>, im: &DMatrix<f64>, cols: &[usize], ell: usize) -> (f64, f64) {
    let k = cols.len();
    // Real symmetric embedding [[G_re, -G_im], [G_im, G_re]] of the Hermitian Gram.
    let mut e = DMatrix::zeros(2 * k, 2 * k);
    let scale = 1.0 / ell as f64;
    for (a, &ca) in cols.iter().enumerate() {
        for (b, &cb) in cols.iter().enumerate() {
            let mut gr = 0.0;
            let mut gi = 0.0;
            for x in 0..ell {
                let (ar, ai) = (re[(x, ca)], im[(x, ca)]);
                let (br, bi) = (re[(x, cb)], im[(x, cb)]);
                gr += ar * br + ai * bi;
                gi += ar * bi - ai * br;
            }
            gr *= scale;
            gi *= scale;
            e[(a, b)] = gr;
            e[(k + a, k + b)] = gr;
            e[(a, k + b)] = -gi;
            e[(k + a, b)] = gi;
        }
    }
    let ev = SymmetricEigen::new(e).eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn gram_extremes(a: &MeasurementEnsemble, cols: &[usize], ell: usize) -> Result<(f64, f64)> {
    check_ell(a, ell)?;
    if cols.is_empty() || cols.iter().any(|&c| c >= a.n) {
        return invalid("column index out of range");
    }
    let (re, im) = restrict(&a.entries, ell);
    Ok(gram_extremes_parts(&re, &im, cols, ell))
}

/// `k mu` next to a Monte-Carlo lower estimate of the restricted isometry constant.
pub fn rip_proxy(a: &MeasurementEnsemble, k: usize, ell: usize, trials: usize, seed: u64) -> Result<RipProxy> {
    check_ell(a, ell)?;
    if k == 0 || 2 * k > ell || k > a.n {
        return invalid(format!("need 1 <= k and 2k <= ell, got k = {k}, ell = {ell}"));
    }
    let mu = coherence(a, ell)?.mu;
    let (re, im) = restrict(&a.entries, ell);
    let mut mc = 0.0f64;
    for t in 0..trials {
        let mut rng = seed::rng(seed::stable_hash(&[seed, t as u64]));
        let cols = seed::sample_without_replacement(&mut rng, a.n, k);
        let (lo, hi) = gram_extremes_parts(&re, &im, &cols, ell);
        mc = mc.max((1.0 - lo).abs()).max((hi - 1.0).abs());
    }
    Ok(RipProxy {
        k_mu_bound: k as f64 * mu,
        mc_delta: mc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P1Witness {
    pub p: u64,
    pub ell: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub delta2: f64,
}

/// Gram spectrum of the first two plain chirp columns restricted to
/// `floor(p^exponent)` rows.
pub fn non_p1_witness(p: u64, exponent: f64) -> Result<P1Witness> {
    if !is_prime(p) {
        return invalid(format!("{p} is not prime"));
    }
    let ell = ((p as f64).powf(exponent).floor() as usize).clamp(1, p as usize);
    let cols = chirp_columns(p, &[(0, 0), (0, 1)]);
    let re = cols.map(|z| z.re);
    let im = cols.map(|z| z.im);
    let (lo, hi) = gram_extremes_parts(&re, &im, &[0, 1], ell);
    Ok(P1Witness {
        p,
        ell,
        lambda_min: lo,
        lambda_max: hi,
        delta2: (1.0 - lo).max(hi - 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(a: DMatrix<f64>) -> MeasurementEnsemble {
        MeasurementEnsemble::from_entries(EnsembleKind::Gaussian, 0, Entries::Real(a))
    }

    #[test]
    fn identical_and_orthogonal_columns() {
        let a = real(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 1.0, 2.0, 1.0]));
        let c = coherence(&a, 2).unwrap();
        assert_abs_diff_eq!(c.mu, 1.0, epsilon = 1e-15);
        assert_eq!(c.argpair, (0, 1));
        let f = gen_partial_bos(16, 16, 3, Transform::Dft).unwrap();
        assert!(coherence(&f, 16).unwrap().mu < 1e-12);
        let z = real(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]));
        assert!(matches!(coherence(&z, 1), Err(Error::DegenerateColumn(1))));
        assert!(coherence(&z, 3).is_err());
    }

    #[test]
    fn coherence_block_boundary() {
        let a = gen_subgaussian(10, 600, 4, SubGaussian::Gaussian).unwrap();
        let c = coherence(&a, 10).unwrap();
        let Entries::Real(m) = &a.entries else { panic!() };
        let mut best: f64 = 0.0;
        for i in 0..600 {
            for j in i + 1..600 {
                let (u, v) = (m.column(i), m.column(j));
                best = best.max(u.dot(&v).abs() / (u.norm() * v.norm()));
            }
        }
        assert_abs_diff_eq!(c.mu, best, epsilon = 1e-12);
    }

    #[test]
    fn chirp_sub_coherence_is_gauss_sum_maximum() {
        let p = 61;
        let a = gen_chirp_sub(p).unwrap();
        let (ell, capped) = ell_cap(p, 0.75, p as usize, LogBase::default());
        assert!(capped);
        let c = coherence(&a, ell).unwrap();
        let params = chirp_sub_params(p);
        let mut best: f64 = 0.0;
        for i in 0..params.len() {
            for j in i + 1..params.len() {
                let dr = params[j].0 as i64 - params[i].0 as i64;
                let dm = params[j].1 as i64 - params[i].1 as i64;
                best = best.max(gauss_sum(dr, dm, p, ell).unwrap().norm() / ell as f64);
            }
        }
        assert_abs_diff_eq!(c.mu, best, epsilon = 1e-12);
        let (ell2, _) = (30, false);
        let c2 = coherence(&a, ell2).unwrap();
        let (i, j) = c2.argpair;
        let s = gauss_sum(
            params[j].0 as i64 - params[i].0 as i64,
            params[j].1 as i64 - params[i].1 as i64,
            p,
            ell2,
        )
        .unwrap();
        assert_abs_diff_eq!(c2.mu, s.norm() / ell2 as f64, epsilon = 1e-12);
    }

    #[test]
    fn rip_proxy_examples() {
        let f = gen_partial_bos(16, 16, 3, Transform::Dft).unwrap();
        let r = rip_proxy(&f, 3, 16, 20, 1).unwrap();
        assert!(r.k_mu_bound < 1e-11 && r.mc_delta <= 1e-10);

        let g = gen_subgaussian(20, 40, 2, SubGaussian::Gaussian).unwrap();
        let r1 = rip_proxy(&g, 1, 20, 500, 7).unwrap();
        let Entries::Real(m) = &g.entries else { panic!() };
        let worst = m
            .column_iter()
            .map(|c| (c.norm_squared() / 20.0 - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(r1.mc_delta <= worst + 1e-12);
        assert!(r1.mc_delta > 0.0);
        assert!(rip_proxy(&g, 11, 20, 1, 0).is_err());
        assert_eq!(rip_proxy(&g, 3, 20, 10, 5).unwrap(), rip_proxy(&g, 3, 20, 10, 5).unwrap());
    }

    #[test]
    fn gaussian_rip_proxy_ordering() {
        let mut ok = 0;
        let seeds = 20;
        for s in 0..seeds {
            let g = gen_subgaussian(100, 200, s, SubGaussian::Gaussian).unwrap();
            let r = rip_proxy(&g, 5, 100, 200, s).unwrap();
            assert!(r.mc_delta < 1.0, "{r:?}");
            if r.k_mu_bound >= r.mc_delta {
                ok += 1;
            }
        }
        assert!(ok * 100 >= 95 * seeds, "{ok}");
    }

    #[test]
    fn non_p1_witness_degrades() {
        let w: Vec<P1Witness> = [101, 401, 1009].iter().map(|&p| non_p1_witness(p, 0.9).unwrap()).collect();
        assert!(w[0].lambda_min > w[1].lambda_min && w[1].lambda_min > w[2].lambda_min);
        assert!(w[2].delta2 > 1.0 / 9.0);
        let full = gen_chirp(101).unwrap();
        let (lo, hi) = gram_extremes(&full, &[0, 1], w[0].ell).unwrap();
        assert_abs_diff_eq!(lo, w[0].lambda_min, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, w[0].lambda_max, epsilon = 1e-12);
    }
}
