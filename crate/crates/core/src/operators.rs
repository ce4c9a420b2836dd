//! Difference operators, the noise-shaping matrix and its orthogonal factor.
//!
//! `D` is the `m x m` first-order difference matrix (ones on the diagonal, minus
//! ones on the first subdiagonal). Its powers are applied matrix-free: `D^r` as a
//! banded convolution with signed binomial weights and `D^{-r}` as `r` running sums.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// Default stability constant of the greedy sigma-delta quantizer.
pub const GREEDY_CR: f64 = 0.5;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Signed band weights `(-1)^j C(r, j)` for `j = 0..=r`.
pub(crate) fn diff_weights(r: usize) -> Vec<f64> {
    (0..=r)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(r, j).round())
        .collect()
}

fn check_args(r: usize, len: usize) -> Result<()> {
    if r == 0 {
        return invalid("difference order must be at least 1");
    }
    if len == 0 {
        return invalid("difference operator applied to an empty vector");
    }
    Ok(())
}

/// `D^r v` with zero history (`v_t = 0` for `t <= 0`).
pub fn apply_diff(r: usize, v: &[f64]) -> Result<Vec<f64>> {
    check_args(r, v.len())?;
    let w = diff_weights(r);
    Ok((0..v.len())
        .map(|i| {
            w.iter()
                .enumerate()
                .take(i + 1)
                .map(|(j, wj)| wj * v[i - j])
                .sum()
        })
        .collect())
}

/// `D^{-r} v`, computed as `r` successive cumulative sums.
pub fn apply_diff_inv(r: usize, v: &[f64]) -> Result<Vec<f64>> {
    check_args(r, v.len())?;
    let mut out = v.to_vec();
    cumsum_in_place(r, &mut out);
    Ok(out)
}

pub(crate) fn cumsum_in_place(r: usize, v: &mut [f64]) {
    for _ in 0..r {
        let mut acc = 0.0;
        for x in v.iter_mut() {
            acc += *x;
            *x = acc;
        }
    }
}

/// Applies `D^{-r}` to every column of `a` in place.
pub(crate) fn diff_inv_columns(r: usize, a: &mut DMatrix<f64>) {
    for mut col in a.column_iter_mut() {
        cumsum_in_place(r, col.as_mut_slice());
    }
}

/// The `r`-th power of the first-order difference matrix in dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOperator {
    pub order: usize,
    pub dim: usize,
}

impl DifferenceOperator {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        check_args(order, dim)?;
        Ok(Self { order, dim })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        apply_diff(self.order, v)
    }

    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        apply_diff_inv(self.order, v)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return invalid(format!("expected length {}, got {len}", self.dim));
        }
        Ok(())
    }

    /// Dense `D^r`.
    pub fn dense(&self) -> DMatrix<f64> {
        let w = diff_weights(self.order);
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if j <= i && i - j <= self.order {
                w[i - j]
            } else {
                0.0
            }
        })
    }

    /// Dense `D^{-r}`; entries are `C(i - j + r - 1, r - 1)` below the diagonal.
    pub fn dense_inverse(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.dim, self.dim);
        diff_inv_columns(self.order, &mut m);
        m
    }
}

/// `H = [C_r D^r | (eps/delta) I]`, or `C_r D^r` alone when `eps = 0`.
#[derive(Debug, Clone)]
pub struct NoiseShapingMatrix {
    pub cr: f64,
    pub delta: f64,
    pub eps: f64,
    pub dim: usize,
    pub order: usize,
    pub h: DMatrix<f64>,
}

pub fn build_h(cr: f64, delta: f64, eps: f64, m: usize, r: usize) -> Result<NoiseShapingMatrix> {
    if !(delta > 0.0) {
        return invalid("quantizer step must be positive");
    }
    if !(eps >= 0.0) {
        return invalid("noise level must be nonnegative");
    }
    if !(cr > 0.0) {
        return invalid("stability constant must be positive");
    }
    let dr = DifferenceOperator::new(r, m)?.dense() * cr;
    let h = if eps == 0.0 {
        dr
    } else {
        let mut h = DMatrix::zeros(m, 2 * m);
        h.view_mut((0, 0), (m, m)).copy_from(&dr);
        h.view_mut((0, m), (m, m))
            .copy_from(&(DMatrix::<f64>::identity(m, m) * (eps / delta)));
        h
    };
    Ok(NoiseShapingMatrix {
        cr,
        delta,
        eps,
        dim: m,
        order: r,
        h,
    })
}

/// `H = U diag(s) V^T` with `s` nonincreasing.
///
/// Columns are sign-canonicalized so that the first nonzero entry of every
/// column of `V` is positive.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

const SVD_EPS: f64 = 1e-15;

fn svd_sorted(h: &DMatrix<f64>) -> Result<SvdFactors> {
    let svd = nalgebra::SVD::try_new(h.clone(), true, true, SVD_EPS, 0).ok_or_else(|| {
        Error::Computation {
            what: "SVD did not converge".into(),
            residual: f64::NAN,
        }
    })?;
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V").transpose();
    Ok(SvdFactors {
        u,
        s: svd.singular_values.iter().copied().collect(),
        v,
    })
}

pub fn svd_orthogonal_factor(h: &NoiseShapingMatrix) -> Result<SvdFactors> {
    let mut f = svd_sorted(&h.h)?;
    let tiny = 1e-12 * f.v.amax().max(f64::MIN_POSITIVE);
    for k in 0..f.s.len() {
        let lead = f.v.column(k).iter().copied().find(|x| x.abs() > tiny);
        if matches!(lead, Some(x) if x < 0.0) {
            f.v.column_mut(k).neg_mut();
            f.u.column_mut(k).neg_mut();
        }
    }
    let rebuilt = &f.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.s.clone()))
        * f.v.transpose();
    let residual = (rebuilt - &h.h).amax();
    if residual > 1e-8 * h.h.amax() {
        return Err(Error::Computation {
            what: "SVD reconstruction".into(),
            residual,
        });
    }
    Ok(f)
}

/// Singular values of an arbitrary dense matrix, nonincreasing.
pub fn singular_values(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = nalgebra::SVD::try_new(h.clone(), false, false, SVD_EPS, 0).ok_or_else(|| {
        Error::Computation {
            what: "SVD did not converge".into(),
            residual: f64::NAN,
        }
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Closed-form left factor for `r = 1`, `eps = 0`:
/// `U_{kl} = sqrt(2/(m+1/2)) (-1)^{k+1} sin((2k-1) l pi / (2m+1))`.
pub fn closed_form_u(m: usize) -> DMatrix<f64> {
    let c = (2.0 / (m as f64 + 0.5)).sqrt();
    let denom = (2 * m + 1) as f64;
    DMatrix::from_fn(m, m, |i, j| {
        let (k, l) = ((i + 1) as f64, (j + 1) as f64);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        c * sign * ((2.0 * k - 1.0) * l * PI / denom).sin()
    })
}

/// Type-III DST, `out_k = sum_l sqrt(2/N) sin((2k-1) l pi / (2N)) v_l`, evaluated directly.
pub fn dst3(v: &[f64], n: usize) -> Result<Vec<f64>> {
    if v.len() != n {
        return invalid(format!("dst3 expects length {n}, got {}", v.len()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = (2.0 / n as f64).sqrt();
    let two_n = 2.0 * n as f64;
    Ok((1..=n)
        .map(|k| {
            let a = (2 * k - 1) as f64 * PI / two_n;
            scale
                * v.iter()
                    .enumerate()
                    .map(|(l, x)| (a * (l + 1) as f64).sin() * x)
                    .sum::<f64>()
        })
        .collect())
}

/// Same transform as [`dst3`] through a length-`4N` FFT: the odd-index
/// outputs of the inverse DFT of the zero-embedded input carry the sine sums
/// in their imaginary parts.
pub fn dst3_fast(v: &[f64], n: usize) -> Result<Vec<f64>> {
    if v.len() != n {
        return invalid(format!("dst3 expects length {n}, got {}", v.len()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let len = 4 * n;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (l, x) in v.iter().enumerate() {
        buf[l + 1] = Complex::new(*x, 0.0);
    }
    FftPlanner::<f64>::new().plan_fft_inverse(len).process(&mut buf);
    let scale = (2.0 / n as f64).sqrt();
    Ok((1..=n).map(|k| scale * buf[2 * k - 1].im).collect())
}

/// `U y` for the closed-form first-order factor without materializing `U`:
/// `(U y)_j = (-1)^{j+1} sqrt(2) (S^{(2m+1)} y~)_j` where `y~` carries `y_k`
/// at position `2k` and zeros elsewhere.
pub fn fast_u_apply(order: usize, eps: f64, y: &[f64]) -> Result<Vec<f64>> {
    if order != 1 || eps != 0.0 {
        return Err(Error::Unsupported(format!(
            "fast U application needs r = 1 and eps = 0 (got r = {order}, eps = {eps}); use the dense factor"
        )));
    }
    let m = y.len();
    let big = 2 * m + 1;
    let mut embedded = vec![0.0; big];
    for (k, yk) in y.iter().enumerate() {
        embedded[2 * k + 1] = *yk;
    }
    let s = dst3_fast(&embedded, big)?;
    Ok(s[..m]
        .iter()
        .enumerate()
        .map(|(j, x)| if j % 2 == 0 { 1.0 } else { -1.0 } * std::f64::consts::SQRT_2 * x)
        .collect())
}
