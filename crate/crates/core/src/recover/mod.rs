//! One-stage convex decoders for Σ∆-quantized measurements and the two-stage
//! baseline.
//!
//! Complex measurements enter as real-lifted data `[Re; Im]` with
//! `channels = 2`; `D^{-r}` then acts on each channel separately.

mod conic;

pub use conic::{conic_solve, ConicProblem, ConicSolution, SolverSettings};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operators::{cumsum_in_place, GREEDY_CR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Buffer,
    Encoded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExtras {
    /// `L x m` sign matrix, applied to each channel.
    pub b: DMatrix<f64>,
    /// Relative tolerance on the reported equality residual.
    pub tol_eq: f64,
}

#[derive(Debug, Clone)]
pub struct OneStageProblem {
    pub phi_eff: DMatrix<f64>,
    pub q_eff: Vec<f64>,
    pub r: usize,
    /// 1 for real measurements, 2 for lifted complex ones.
    pub channels: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub variant: Variant,
    pub encoded: Option<EncodedExtras>,
    pub settings: SolverSettings,
}

impl OneStageProblem {
    /// `tau1 = C_r delta sqrt(M)` and `tau2 = noise sqrt(M)` with `M` lifted rows.
    pub fn new(
        phi_eff: DMatrix<f64>,
        q_eff: Vec<f64>,
        r: usize,
        channels: usize,
        delta: f64,
        noise: f64,
        variant: Variant,
    ) -> Result<Self> {
        let mm = phi_eff.nrows() as f64;
        Ok(Self {
            tau1: GREEDY_CR * delta * mm.sqrt(),
            tau2: noise * mm.sqrt(),
            phi_eff,
            q_eff,
            r,
            channels,
            variant,
            encoded: None,
            settings: SolverSettings::default(),
        })
    }

    /// Encoded program with `||B D^{-r}(Phi x + e - q)|| <= 3 C m` per channel.
    pub fn encoded(
        phi_eff: DMatrix<f64>,
        q_eff: Vec<f64>,
        r: usize,
        channels: usize,
        b: DMatrix<f64>,
        c_const: f64,
        eps: f64,
    ) -> Result<Self> {
        if channels == 0 || !phi_eff.nrows().is_multiple_of(channels) {
            return invalid("row count is not a multiple of the channel count");
        }
        let m = phi_eff.nrows() / channels;
        let ch = (channels as f64).sqrt();
        Ok(Self {
            tau1: 3.0 * c_const * m as f64 * ch,
            tau2: eps * (m as f64).sqrt() * ch,
            phi_eff,
            q_eff,
            r,
            channels,
            variant: Variant::Encoded,
            encoded: Some(EncodedExtras { b, tol_eq: 1e-8 }),
            settings: SolverSettings::default(),
        })
    }

    fn validate(&self) -> Result<usize> {
        let mm = self.phi_eff.nrows();
        if self.r == 0 {
            return invalid("order must be at least 1");
        }
        if self.channels == 0 || !mm.is_multiple_of(self.channels) {
            return invalid("row count is not a multiple of the channel count");
        }
        if self.q_eff.len() != mm {
            return invalid(format!("q has length {}, matrix has {mm} rows", self.q_eff.len()));
        }
        if !(self.tau1 >= 0.0) || !(self.tau2 >= 0.0) {
            return invalid("radii must be nonnegative");
        }
        if self.phi_eff.iter().any(|v| !v.is_finite()) {
            return invalid("effective matrix has non-finite entries");
        }
        Ok(mm / self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySolution {
    pub x_hat: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub objective: f64,
    /// Slack of the residual ball and of the noise ball (negative means violated).
    pub feas_residuals: [f64; 2],
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Least-norm `u` and the relative equality residual (encoded variant only).
    pub u_tilde: Option<Vec<f64>>,
    pub eq_residual: Option<f64>,
}

/// `D^{-r}` on each channel block of every column.
pub fn diff_inv_rows(r: usize, channels: usize, a: &mut DMatrix<f64>) {
    let m = a.nrows() / channels;
    for mut col in a.column_iter_mut() {
        for ch in col.as_mut_slice().chunks_mut(m) {
            cumsum_in_place(r, ch);
        }
    }
}

pub fn diff_inv_channels(r: usize, channels: usize, v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    let m = v.len() / channels;
    for ch in out.chunks_mut(m) {
        cumsum_in_place(r, ch);
    }
    out
}

fn block_diag(b: &DMatrix<f64>, channels: usize) -> DMatrix<f64> {
    let (l, m) = b.shape();
    let mut out = DMatrix::zeros(l * channels, m * channels);
    for c in 0..channels {
        out.view_mut((c * l, c * m), (l, m)).copy_from(b);
    }
    out
}

fn finish(sol: ConicSolution, mm: usize) -> RecoverySolution {
    let nu_hat = if sol.nu.is_empty() { vec![0.0; mm] } else { sol.nu };
    RecoverySolution {
        x_hat: sol.z,
        nu_hat,
        objective: sol.objective,
        feas_residuals: sol.slack,
        gap: sol.gap,
        iterations: sol.iterations,
        converged: sol.converged,
        u_tilde: None,
        eq_residual: None,
    }
}

/// `min ||z||_1` s.t. `||D^{-r}(Phi z + nu - q)|| <= tau1`, `||nu|| <= tau2`.
pub fn solve_one_stage(p: &OneStageProblem) -> Result<RecoverySolution> {
    if p.variant == Variant::Encoded {
        return invalid("use solve_encoded for the encoded variant");
    }
    p.validate()?;
    let mm = p.phi_eff.nrows();
    let mut kz = p.phi_eff.clone();
    diff_inv_rows(p.r, p.channels, &mut kz);
    let c = DVector::from_vec(diff_inv_channels(p.r, p.channels, &p.q_eff));
    let knu = (p.tau2 > 0.0).then(|| {
        let mut d = DMatrix::identity(mm, mm);
        diff_inv_rows(p.r, p.channels, &mut d);
        d
    });
    let settings = SolverSettings {
        feas_scale: p.q_eff.iter().map(|v| v * v).sum::<f64>().sqrt(),
        ..p.settings
    };
    let cp = ConicProblem {
        kz,
        knu,
        c,
        tau1: p.tau1,
        tau2: p.tau2,
        weight: 1.0,
    };
    Ok(finish(conic_solve(&cp, &settings)?, mm))
}

/// Encoded program: `min ||x||_1` over `(x, u, e)` with
/// `B D^{-r}(Phi x + e) - B u = B D^{-r} q`, `||B u|| <= 3 C m`, `||e|| <= sqrt(m) eps`.
///
/// `u` is eliminated through its image `B u`; the least-norm `u` is reported.
pub fn solve_encoded(p: &OneStageProblem) -> Result<RecoverySolution> {
    let Some(extras) = &p.encoded else {
        return invalid("encoded variant needs the matrix B");
    };
    let m = p.validate()?;
    let b = &extras.b;
    if b.ncols() != m || b.nrows() == 0 || b.nrows() > m {
        return invalid(format!("B is {}x{}, expected L x {m} with L <= {m}", b.nrows(), b.ncols()));
    }
    if b.iter().any(|v| v.abs() != 1.0) {
        return invalid("B must have entries in {-1, +1}");
    }
    let mm = p.phi_eff.nrows();
    let bb = block_diag(b, p.channels);
    let mut dphi = p.phi_eff.clone();
    diff_inv_rows(p.r, p.channels, &mut dphi);
    let kz = &bb * dphi;
    let dq = DVector::from_vec(diff_inv_channels(p.r, p.channels, &p.q_eff));
    let c = &bb * dq;
    let knu = (p.tau2 > 0.0).then(|| {
        let mut d = DMatrix::identity(mm, mm);
        diff_inv_rows(p.r, p.channels, &mut d);
        &bb * d
    });
    let settings = SolverSettings {
        feas_scale: c.norm(),
        ..p.settings
    };
    let cp = ConicProblem {
        kz: kz.clone(),
        knu: knu.clone(),
        c: c.clone(),
        tau1: p.tau1,
        tau2: p.tau2,
        weight: 1.0,
    };
    let sol = conic_solve(&cp, &settings)?;
    let z = DVector::from_column_slice(&sol.z);
    let mut image = &kz * &z - &c;
    if let Some(kn) = &knu {
        image += kn * DVector::from_column_slice(&sol.nu);
    }
    // Least-norm u with B u = image, per channel.
    let bbt = b * b.transpose();
    let chol = bbt
        .cholesky()
        .ok_or_else(|| Error::Rank("B B^T is singular".into()))?;
    let l = b.nrows();
    let mut u = Vec::with_capacity(mm);
    for ch in 0..p.channels {
        let w = image.rows(ch * l, l).into_owned();
        u.extend((b.tr_mul(&chol.solve(&w))).iter().copied());
    }
    let bu = &bb * DVector::from_column_slice(&u);
    let eq = (image - bu).norm() / c.norm().max(f64::MIN_POSITIVE);
    let mut out = finish(sol, mm);
    out.u_tilde = Some(u);
    out.eq_residual = Some(eq);
    Ok(out)
}

/// `||D^{-r}(Phi x + nu - q)||` and `||nu||` for a candidate pair.
pub fn constraint_values(p: &OneStageProblem, x: &[f64], nu: &[f64]) -> Result<(f64, f64)> {
    p.validate()?;
    if x.len() != p.phi_eff.ncols() || nu.len() != p.phi_eff.nrows() {
        return invalid("candidate has the wrong dimensions");
    }
    let v = &p.phi_eff * DVector::from_column_slice(x) + DVector::from_column_slice(nu)
        - DVector::from_column_slice(&p.q_eff);
    let d = diff_inv_channels(p.r, p.channels, v.as_slice());
    Ok((
        d.iter().map(|t| t * t).sum::<f64>().sqrt(),
        nu.iter().map(|t| t * t).sum::<f64>().sqrt(),
    ))
}

/// `(D^{-r} Phi_T)^+ D^{-r} q`, supported on `T`.
pub fn two_stage_decode(phi: &DMatrix<f64>, q: &[f64], support: &[usize], r: usize, channels: usize) -> Result<Vec<f64>> {
    let (mm, n) = phi.shape();
    if r == 0 || channels == 0 || mm % channels != 0 || q.len() != mm {
        return invalid("inconsistent two-stage inputs");
    }
    if support.len() > mm || support.iter().any(|&j| j >= n) {
        return invalid("support out of range");
    }
    let mut out = vec![0.0; n];
    if support.is_empty() {
        return Ok(out);
    }
    let mut a = phi.select_columns(support);
    diff_inv_rows(r, channels, &mut a);
    let rhs = DVector::from_vec(diff_inv_channels(r, channels, q));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Rank(format!("D^-r Phi_T has condition {:e}", smax / smin)));
    }
    let xt = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    for (v, &j) in xt.iter().zip(support) {
        out[j] = *v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::matrices::{gen_subgaussian, SubGaussian};
    use crate::quantize::{sigma_delta, MidriseAlphabet};
    use crate::signal::SparseSignal;
    use approx::assert_abs_diff_eq;

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        gen_subgaussian(m, n, seed, SubGaussian::Gaussian).unwrap().entries.lifted()
    }

    #[test]
    fn identity_pins_solution() {
        let q = vec![0.3, -1.0, 2.0, 0.0, 0.7];
        let mut p = OneStageProblem::new(DMatrix::identity(5, 5), q.clone(), 1, 1, 0.1, 0.0, Variant::Standard).unwrap();
        p.tau1 = 0.0;
        let s = solve_one_stage(&p).unwrap();
        assert!(s.converged);
        for (a, b) in s.x_hat.iter().zip(&q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert_eq!(s.nu_hat, vec![0.0; 5]);
    }

    #[test]
    fn quantized_gaussian_recovery_dominates_truth() {
        let (m, n, k, r, delta) = (40, 80, 3, 2, 0.05);
        let phi = gaussian(m, n, 5);
        let x = SparseSignal::random(n, k, n, 6).unwrap();
        let y = (&phi * DVector::from_column_slice(&x.values)).data.as_vec().clone();
        let a = MidriseAlphabet::with_headroom(delta, crate::linalg::max_abs(&y), r).unwrap();
        let t = sigma_delta(&y, r, &a).unwrap();
        assert!(!t.overload_flag);
        let p = OneStageProblem::new(phi, t.q.clone(), r, 1, delta, 0.0, Variant::Standard).unwrap();
        let (res, _) = constraint_values(&p, &x.values, &vec![0.0; m]).unwrap();
        assert!(res <= p.tau1);
        let s = solve_one_stage(&p).unwrap();
        assert!(s.converged);
        assert!(s.objective <= x.values.iter().map(|v| v.abs()).sum::<f64>() + 1e-6);
        assert!(s.feas_residuals[0] >= -1e-6 * (1.0 + norm2(&t.q)));
        let err: f64 = s.x_hat.iter().zip(&x.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.1 * norm2(&x.values), "{err}");
    }

    #[test]
    fn scaling_equivariance() {
        let phi = gaussian(20, 40, 1);
        let x = SparseSignal::random(40, 2, 40, 2).unwrap();
        let y = (&phi * DVector::from_column_slice(&x.values)).data.as_vec().clone();
        let a = MidriseAlphabet::with_headroom(0.1, crate::linalg::max_abs(&y), 1).unwrap();
        let q = sigma_delta(&y, 1, &a).unwrap().q;
        let p1 = OneStageProblem::new(phi.clone(), q.clone(), 1, 1, 0.1, 0.01, Variant::Standard).unwrap();
        let c = 3.0;
        let q3: Vec<f64> = q.iter().map(|v| v * c).collect();
        let p3 = OneStageProblem::new(phi, q3, 1, 1, 0.1 * c, 0.01 * c, Variant::Standard).unwrap();
        let s1 = solve_one_stage(&p1).unwrap();
        let s3 = solve_one_stage(&p3).unwrap();
        assert!(s1.converged && s3.converged);
        for (a, b) in s1.x_hat.iter().zip(&s3.x_hat) {
            assert_abs_diff_eq!(a * c, *b, epsilon = 1e-4 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn encoded_identity_instance() {
        let q = vec![0.25, -0.05, 0.15, 0.05];
        let b = DMatrix::from_row_slice(4, 4, &[
            1.0, 1.0, 1.0, 1.0, //
            1.0, -1.0, 1.0, -1.0, //
            1.0, 1.0, -1.0, -1.0, //
            1.0, -1.0, -1.0, 1.0,
        ]);
        let mut p = OneStageProblem::encoded(DMatrix::identity(4, 4), q.clone(), 1, 1, b, 0.05, 0.0).unwrap();
        p.tau1 = 0.0;
        let s = solve_encoded(&p).unwrap();
        assert!(s.converged);
        for (a, b) in s.x_hat.iter().zip(&q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert!(s.eq_residual.unwrap() < 1e-8);
        assert!(s.u_tilde.unwrap().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn two_stage_examples() {
        let phi = gaussian(30, 60, 3);
        let x = SparseSignal::random(60, 4, 60, 4).unwrap();
        let y = (&phi * DVector::from_column_slice(&x.values)).data.as_vec().clone();
        for r in 1..=2 {
            let xh = two_stage_decode(&phi, &y, &x.support, r, 1).unwrap();
            for (a, b) in xh.iter().zip(&x.values) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
        let other: Vec<usize> = (0..60).filter(|j| !x.support.contains(j)).take(4).collect();
        let xh = two_stage_decode(&phi, &y, &other, 1, 1).unwrap();
        assert!(x.support.iter().all(|&j| xh[j] == 0.0));
        let dup = vec![x.support[0], x.support[0]];
        assert!(matches!(two_stage_decode(&phi, &y, &dup, 1, 1), Err(Error::Rank(_))));
    }

    #[test]
    fn two_stage_error_decays() {
        let (n, k, delta) = (400, 5, 0.1);
        let ms = [50usize, 100, 200];
        let mut logs = Vec::new();
        for &m in &ms {
            let mut total = 0.0;
            for t in 0..10u64 {
                let phi = gaussian(m, n, 100 + t);
                let x = SparseSignal::random(n, k, n, 200 + t).unwrap();
                let y = (&phi * DVector::from_column_slice(&x.values)).data.as_vec().clone();
                let a = MidriseAlphabet::with_headroom(delta, crate::linalg::max_abs(&y), 1).unwrap();
                let q = sigma_delta(&y, 1, &a).unwrap().q;
                let xh = two_stage_decode(&phi, &q, &x.support, 1, 1).unwrap();
                total += xh.iter().zip(&x.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            }
            logs.push(((m as f64).ln(), (total / 10.0).ln()));
        }
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope <= -0.5, "{slope}");
    }
}
