//! Measurement ensembles and the analytic probes run on them.
//!
//! Every generator uses the unnormalized convention: columns have (expected)
//! squared norm equal to the number of rows. Normalization by `1/sqrt(ell)`
//! only happens inside [`probes`].

mod chirp;
mod probes;

pub use chirp::{
    chirp_sub_params, ell_cap, gauss_sum, gen_chirp, gen_chirp_sub, is_prime, k_max, weyl_bound,
    LogBase, WeylBound, WeylPart,
};
pub use probes::{coherence, gram_extremes, non_p1_witness, rip_proxy, CoherenceReport, P1Witness, RipProxy};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::lift_matrix;
use crate::operators::{build_h, svd_orthogonal_factor, GREEDY_CR};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gaussian,
    Bernoulli,
    PartialDft,
    PartialDct,
    PartialDst,
    Chirp,
    ChirpSub,
    Modified,
}

impl EnsembleKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        use EnsembleKind::*;
        [Gaussian, Bernoulli, PartialDft, PartialDct, PartialDst, Chirp, ChirpSub, Modified]
            .get(c as usize)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubGaussian {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Dft,
    Dct,
    Dst,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl Entries {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Entries::Real(a) => a.shape(),
            Entries::Complex(a) => a.shape(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Entries::Complex(_))
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            Entries::Real(a) => a.map(|x| Complex64::new(x, 0.0)),
            Entries::Complex(a) => a.clone(),
        }
    }

    /// Real matrix seen by the solver: the entries themselves, or `[Re; Im]`.
    pub fn lifted(&self) -> DMatrix<f64> {
        match self {
            Entries::Real(a) => a.clone(),
            Entries::Complex(a) => lift_matrix(a),
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        match self {
            Entries::Real(a) => a.column_iter().map(|c| c.norm()).collect(),
            Entries::Complex(a) => a.column_iter().map(|c| c.norm()).collect(),
        }
    }

    /// Left multiplication by a real matrix.
    pub fn left_mul(&self, u: &DMatrix<f64>) -> Entries {
        match self {
            Entries::Real(a) => Entries::Real(u * a),
            Entries::Complex(a) => {
                let re = u * a.map(|z| z.re);
                let im = u * a.map(|z| z.im);
                Entries::Complex(DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
                    Complex64::new(re[(i, j)], im[(i, j)])
                }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    pub kind: EnsembleKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub entries: Entries,
    /// Sampled row indices for partial transforms.
    pub rows: Option<Vec<usize>>,
    /// Prime for chirp ensembles.
    pub prime: Option<u64>,
    pub base: Option<Box<MeasurementEnsemble>>,
}

impl MeasurementEnsemble {
    pub fn from_entries(kind: EnsembleKind, seed: u64, entries: Entries) -> Self {
        let (m, n) = entries.shape();
        Self {
            kind,
            m,
            n,
            seed,
            entries,
            rows: None,
            prime: None,
            base: None,
        }
    }

    pub fn is_complex(&self) -> bool {
        self.entries.is_complex()
    }

    /// `A x` for a real signal, as complex measurements.
    pub fn measure(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return invalid(format!("signal has length {}, matrix has {} columns", x.len(), self.n));
        }
        let xv = nalgebra::DVector::from_column_slice(x);
        Ok(match &self.entries {
            Entries::Real(a) => (a * xv).iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            Entries::Complex(a) => {
                let xc = xv.map(|v| Complex64::new(v, 0.0));
                (a * xc).iter().copied().collect()
            }
        })
    }

    /// `A x` for a real signal when the ensemble is real.
    pub fn measure_real(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_complex() {
            return invalid("ensemble is complex");
        }
        Ok(self.measure(x)?.iter().map(|z| z.re).collect())
    }
}

fn check_cs(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return invalid("dimensions must be positive");
    }
    if m > n {
        return invalid(format!("m = {m} exceeds n = {n}"));
    }
    Ok(())
}

pub fn gen_subgaussian(m: usize, n: usize, seed: u64, flavor: SubGaussian) -> Result<MeasurementEnsemble> {
    check_cs(m, n)?;
    let mut rng = seed::rng(seed);
    // Column-major fill so a prefix of columns does not depend on n.
    let a = match flavor {
        SubGaussian::Gaussian => DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng)),
        SubGaussian::Bernoulli => {
            DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        }
    };
    let kind = match flavor {
        SubGaussian::Gaussian => EnsembleKind::Gaussian,
        SubGaussian::Bernoulli => EnsembleKind::Bernoulli,
    };
    Ok(MeasurementEnsemble::from_entries(kind, seed, Entries::Real(a)))
}

/// Entry `(k, j)` of the full transform, scaled so that columns have norm `sqrt(n)`.
fn transform_entry(t: Transform, n: usize, k: usize, j: usize) -> Complex64 {
    let nf = n as f64;
    match t {
        Transform::Dft => {
            let e = ((k as u128 * j as u128) % n as u128) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * e / nf)
        }
        Transform::Dct => {
            let alpha = if k == 0 { 1.0 } else { 2f64.sqrt() };
            let arg = PI * ((2 * j + 1) * k) as f64 / (2.0 * nf);
            Complex64::new(alpha * arg.cos(), 0.0)
        }
        Transform::Dst => {
            let weight = if j + 1 == n { 1.0 } else { 2f64.sqrt() };
            let arg = PI * ((2 * k + 1) * (j + 1)) as f64 / (2.0 * nf);
            Complex64::new(weight * arg.sin(), 0.0)
        }
    }
}

pub fn gen_partial_bos(m: usize, n: usize, seed: u64, transform: Transform) -> Result<MeasurementEnsemble> {
    check_cs(m, n)?;
    let mut rng = seed::rng(seed);
    let rows = seed::sample_without_replacement(&mut rng, n, m);
    let entries = match transform {
        Transform::Dft => Entries::Complex(DMatrix::from_fn(m, n, |i, j| transform_entry(transform, n, rows[i], j))),
        _ => Entries::Real(DMatrix::from_fn(m, n, |i, j| transform_entry(transform, n, rows[i], j).re)),
    };
    let kind = match transform {
        Transform::Dft => EnsembleKind::PartialDft,
        Transform::Dct => EnsembleKind::PartialDct,
        Transform::Dst => EnsembleKind::PartialDst,
    };
    let mut e = MeasurementEnsemble::from_entries(kind, seed, entries);
    e.rows = Some(rows);
    Ok(e)
}

/// `U Phi` with `U` the left singular factor of `H = [C_r D^r | (eps/delta) I]`, `C_r = 1/2`.
pub fn modify_with_u(base: &MeasurementEnsemble, r: usize, delta: f64, eps: f64) -> Result<MeasurementEnsemble> {
    let h = build_h(GREEDY_CR, delta, eps, base.m, r)?;
    let u = svd_orthogonal_factor(&h)?.u;
    modify_with_factor(base, &u)
}

/// `U Phi` for a precomputed orthogonal factor.
pub fn modify_with_factor(base: &MeasurementEnsemble, u: &DMatrix<f64>) -> Result<MeasurementEnsemble> {
    if u.nrows() != base.m || u.ncols() != base.m {
        return invalid(format!(
            "factor is {}x{}, base has {} rows",
            u.nrows(),
            u.ncols(),
            base.m
        ));
    }
    let mut e = MeasurementEnsemble::from_entries(EnsembleKind::Modified, base.seed, base.entries.left_mul(u));
    e.base = Some(Box::new(base.clone()));
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::fast_u_apply;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_entries_and_norms() {
        let a = gen_subgaussian(30, 60, 3, SubGaussian::Bernoulli).unwrap();
        let Entries::Real(m) = &a.entries else { panic!() };
        assert!(m.iter().all(|x| *x == 1.0 || *x == -1.0));
        for c in a.entries.column_norms() {
            assert_eq!(c, 30f64.sqrt());
        }
        assert_eq!(a, gen_subgaussian(30, 60, 3, SubGaussian::Bernoulli).unwrap());
        assert!(gen_subgaussian(61, 60, 3, SubGaussian::Bernoulli).is_err());
    }

    #[test]
    fn gaussian_column_norms_concentrate() {
        let a = gen_subgaussian(50, 200, 11, SubGaussian::Gaussian).unwrap();
        let mean = a.entries.column_norms().iter().map(|c| c * c).sum::<f64>() / 200.0;
        assert!((40.0..=60.0).contains(&mean), "{mean}");
    }

    #[test]
    fn dft_examples() {
        let a = gen_partial_bos(1, 1, 0, Transform::Dft).unwrap();
        assert_eq!(a.entries.to_complex()[(0, 0)], Complex64::new(1.0, 0.0));
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (j, (re, im)) in expect.iter().enumerate() {
            let z = transform_entry(Transform::Dft, 4, 1, j);
            assert_abs_diff_eq!(z.re, re, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, im, epsilon = 1e-15);
        }
    }

    #[test]
    fn bos_column_norms() {
        let m = 40;
        let a = gen_partial_bos(m, 128, 5, Transform::Dft).unwrap();
        for c in a.entries.column_norms() {
            assert_abs_diff_eq!(c, (m as f64).sqrt(), epsilon = 1e-10);
        }
        for t in [Transform::Dct, Transform::Dst] {
            let a = gen_partial_bos(m, 128, 5, t).unwrap();
            for c in a.entries.column_norms() {
                let s = (m as f64).sqrt();
                assert!(c >= 0.5 * s && c <= 1.5 * s, "{t:?} {c}");
            }
        }
        let rows = a.rows.unwrap();
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), m);
    }

    #[test]
    fn full_transforms_are_orthogonal() {
        let n = 12;
        for t in [Transform::Dft, Transform::Dct, Transform::Dst] {
            let f = DMatrix::from_fn(n, n, |k, j| transform_entry(t, n, k, j));
            let g = (f.adjoint() * &f).map(|z| z / n as f64);
            assert!((g - DMatrix::<Complex64>::identity(n, n)).iter().all(|z| z.norm() < 1e-12), "{t:?}");
        }
    }

    #[test]
    fn modified_identity_and_isometry() {
        let m = 9;
        let base = MeasurementEnsemble::from_entries(
            EnsembleKind::Gaussian,
            0,
            Entries::Real(DMatrix::identity(m, m)),
        );
        let h = build_h(0.5, 0.1, 0.0, m, 2).unwrap();
        let u = svd_orthogonal_factor(&h).unwrap().u;
        let got = modify_with_u(&base, 2, 0.1, 0.0).unwrap();
        assert_eq!(got.entries, Entries::Real(u));

        let phi = gen_partial_bos(20, 64, 1, Transform::Dft).unwrap();
        let mod_ = modify_with_u(&phi, 1, 0.1, 0.0).unwrap();
        for (a, b) in phi.entries.column_norms().iter().zip(mod_.entries.column_norms()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert!(modify_with_factor(&phi, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn modified_matches_fast_path() {
        let m = 32;
        let phi = gen_partial_bos(m, 100, 2, Transform::Dft).unwrap();
        let dense = modify_with_u(&phi, 1, 0.1, 0.0).unwrap().entries.to_complex();
        let base = phi.entries.to_complex();
        for j in 0..phi.n {
            let re: Vec<f64> = base.column(j).iter().map(|z| z.re).collect();
            let im: Vec<f64> = base.column(j).iter().map(|z| z.im).collect();
            let fr = fast_u_apply(1, 0.0, &re).unwrap();
            let fi = fast_u_apply(1, 0.0, &im).unwrap();
            for i in 0..m {
                assert_abs_diff_eq!(dense[(i, j)].re, fr[i], epsilon = 1e-10);
                assert_abs_diff_eq!(dense[(i, j)].im, fi[i], epsilon = 1e-10);
            }
        }
    }
}
