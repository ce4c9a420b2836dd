//! Memoryless scalar quantization, greedy Σ∆ quantization and the
//! digital-buffer pipeline `MSQ -> U -> Σ∆`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::max_abs;
use crate::operators::diff_weights;

/// Levels `(j + 1/2) delta` for `j = -K..K-1`, i.e. `{±(2j-1) delta / 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidriseAlphabet {
    pub delta: f64,
    pub levels_per_side: u64,
}

impl MidriseAlphabet {
    pub fn new(delta: f64, levels_per_side: u64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || levels_per_side == 0 {
            return invalid(format!("bad alphabet: delta = {delta}, K = {levels_per_side}"));
        }
        Ok(Self { delta, levels_per_side })
    }

    /// Smallest alphabet with the headroom `ceil(|y|_inf / delta) + 2^r` used for order-`r` Σ∆.
    pub fn with_headroom(delta: f64, y_inf: f64, r: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid("delta must be positive");
        }
        let k = (y_inf / delta).ceil() as u64 + (1u64 << r.min(31));
        Self::new(delta, k)
    }

    pub fn k(&self) -> i64 {
        self.levels_per_side as i64
    }

    /// Level index `j` in `-K..K`, rounding ties toward +inf.
    pub fn index(&self, y: f64) -> i64 {
        let k = self.k();
        let j = (y / self.delta).floor();
        if j >= k as f64 {
            k - 1
        } else if j < -(k as f64) {
            -k
        } else {
            j as i64
        }
    }

    pub fn value(&self, j: i64) -> f64 {
        (j as f64 + 0.5) * self.delta
    }

    pub fn saturates(&self, y: f64) -> bool {
        y.abs() > self.k() as f64 * self.delta
    }

    pub fn levels(&self) -> Vec<f64> {
        (-self.k()..self.k()).map(|j| self.value(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsqOutput {
    pub q: Vec<f64>,
    pub saturated: bool,
}

pub fn msq(y: &[f64], a: &MidriseAlphabet) -> MsqOutput {
    let q = y.iter().map(|&v| a.value(a.index(v))).collect();
    MsqOutput {
        q,
        saturated: y.iter().any(|&v| a.saturates(v)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaDeltaTrace {
    pub q: Vec<f64>,
    /// Level indices of `q` in the alphabet.
    pub levels: Vec<i64>,
    pub u: Vec<f64>,
    pub order: usize,
    pub alphabet: MidriseAlphabet,
    pub overload_flag: bool,
}

/// Greedy `r`-th order Σ∆ with zero initial state.
pub fn sigma_delta(y: &[f64], r: usize, a: &MidriseAlphabet) -> Result<SigmaDeltaTrace> {
    if r == 0 {
        return invalid("order must be at least 1");
    }
    let w = diff_weights(r);
    let m = y.len();
    let mut u = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut levels = vec![0; m];
    for i in 0..m {
        let mut s = y[i];
        for j in 1..=r.min(i) {
            // w[j] = (-1)^j C(r, j)
            s -= w[j] * u[i - j];
        }
        let lv = a.index(s);
        levels[i] = lv;
        q[i] = a.value(lv);
        u[i] = s - q[i];
    }
    let overload_flag = max_abs(&u) > a.delta / 2.0;
    Ok(SigmaDeltaTrace {
        q,
        levels,
        u,
        order: r,
        alphabet: *a,
        overload_flag,
    })
}

/// Independent Σ∆ on the real and imaginary channels.
pub fn sigma_delta_complex(
    y: &[Complex64],
    r: usize,
    a: &MidriseAlphabet,
) -> Result<(SigmaDeltaTrace, SigmaDeltaTrace)> {
    let re: Vec<f64> = y.iter().map(|z| z.re).collect();
    let im: Vec<f64> = y.iter().map(|z| z.im).collect();
    Ok((sigma_delta(&re, r, a)?, sigma_delta(&im, r, a)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferConfig {
    pub delta: f64,
    pub r: usize,
    pub m_max: usize,
    pub eps: f64,
    pub delta_prime: f64,
    pub delta_dprime: f64,
}

impl BufferConfig {
    pub fn new(delta: f64, r: usize, m_max: usize, eps: f64) -> Result<Self> {
        if !(delta > 0.0) || r == 0 || m_max == 0 || eps < 0.0 {
            return invalid("buffer config needs delta > 0, r >= 1, m_max >= 1, eps >= 0");
        }
        let delta_prime = delta * (3.0 * PI * r as f64 / m_max as f64).powi(r as i32);
        Ok(Self {
            delta,
            r,
            m_max,
            eps,
            delta_prime,
            delta_dprime: eps + delta_prime / 2.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferOutput {
    pub q: SigmaDeltaTrace,
    pub y_msq_discarded: bool,
}

/// `Σ∆_r(U msq(y))` with MSQ step `delta'` and Σ∆ step `delta`.
pub fn buffer_pipeline(y: &[f64], cfg: &BufferConfig, u: &DMatrix<f64>) -> Result<BufferOutput> {
    let m = y.len();
    if m > cfg.m_max {
        return invalid(format!("m = {m} exceeds m_max = {}", cfg.m_max));
    }
    if u.shape() != (m, m) {
        return invalid(format!("U is {:?}, expected {m}x{m}", u.shape()));
    }
    let fine = MidriseAlphabet::with_headroom(cfg.delta_prime, max_abs(y), 0)?;
    let y_msq = DVector::from_vec(msq(y, &fine).q);
    let rotated = u * y_msq;
    let coarse = MidriseAlphabet::with_headroom(cfg.delta, rotated.amax(), cfg.r)?;
    let q = sigma_delta(rotated.as_slice(), cfg.r, &coarse)?;
    Ok(BufferOutput {
        q,
        y_msq_discarded: true,
    })
}

/// Per-channel buffer pipeline for complex measurements with a real `U`.
pub fn buffer_pipeline_complex(
    y: &[Complex64],
    cfg: &BufferConfig,
    u: &DMatrix<f64>,
) -> Result<(BufferOutput, BufferOutput)> {
    let re: Vec<f64> = y.iter().map(|z| z.re).collect();
    let im: Vec<f64> = y.iter().map(|z| z.im).collect();
    Ok((buffer_pipeline(&re, cfg, u)?, buffer_pipeline(&im, cfg, u)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{apply_diff, build_h, svd_orthogonal_factor};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn alphabet(delta: f64, k: u64) -> MidriseAlphabet {
        MidriseAlphabet::new(delta, k).unwrap()
    }

    #[test]
    fn msq_examples() {
        let a = alphabet(0.1, 3);
        assert_abs_diff_eq!(msq(&[0.23], &a).q[0], 0.25, epsilon = 1e-15);
        assert_eq!(msq(&[0.0], &a).q[0], 0.05);
        assert_abs_diff_eq!(msq(&[0.04], &a).q[0], 0.05, epsilon = 1e-15);
        let sat = msq(&[0.31, -5.0], &a);
        assert!(sat.saturated);
        assert_abs_diff_eq!(sat.q[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sat.q[1], -0.25, epsilon = 1e-15);
        assert!(!msq(&[0.3, -0.3], &a).saturated);
        let lv = a.levels();
        assert_eq!(lv.len(), 6);
        assert!(lv.iter().all(|v| *v != 0.0));
        assert!(MidriseAlphabet::new(0.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn msq_cell_radius(y in -0.3f64..0.3) {
            let a = alphabet(0.1, 3);
            prop_assert!((y - msq(&[y], &a).q[0]).abs() <= 0.05 + 1e-15);
        }

        #[test]
        fn recursion_is_exact(r in 1usize..=3, ys in proptest::collection::vec(-1.0f64..1.0, 1..64)) {
            let a = MidriseAlphabet::with_headroom(0.1, 1.0, r).unwrap();
            let t = sigma_delta(&ys, r, &a).unwrap();
            let du = apply_diff(r, &t.u).unwrap();
            for i in 0..ys.len() {
                prop_assert!(((ys[i] - t.q[i]) - du[i]).abs() <= 1e-12);
            }
            prop_assert!(!t.overload_flag);
        }
    }

    #[test]
    fn sigma_delta_hand_example() {
        let t = sigma_delta(&[0.07, 0.07], 1, &alphabet(0.1, 1)).unwrap();
        assert_abs_diff_eq!(t.q[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(t.q[1], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(t.u[0], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(t.u[1], 0.04, epsilon = 1e-15);
        assert!(!t.overload_flag);
        let on = [0.05, -0.15, 0.25];
        let t = sigma_delta(&on, 1, &alphabet(0.1, 3)).unwrap();
        assert!(t.u.iter().all(|v| v.abs() < 1e-15));
        assert!(sigma_delta(&on, 0, &alphabet(0.1, 3)).is_err());
    }

    #[test]
    fn second_order_stability() {
        let mut rng = crate::seed::rng(17);
        for _ in 0..50 {
            let y: Vec<f64> = (0..200).map(|_| rng.random_range(-0.3..0.3)).collect();
            let a = MidriseAlphabet::with_headroom(0.1, max_abs(&y), 2).unwrap();
            let t = sigma_delta(&y, 2, &a).unwrap();
            assert!(!t.overload_flag);
            let du = apply_diff(2, &t.u).unwrap();
            for i in 0..200 {
                assert!(((y[i] - t.q[i]) - du[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn overload_is_flagged() {
        let t = sigma_delta(&[3.0; 5], 1, &alphabet(0.1, 1)).unwrap();
        assert!(t.overload_flag);
    }

    #[test]
    fn complex_channels() {
        let mut rng = crate::seed::rng(3);
        let y: Vec<Complex64> = (0..40)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let a = MidriseAlphabet::with_headroom(0.1, 1.5, 2).unwrap();
        let (re, im) = sigma_delta_complex(&y, 2, &a).unwrap();
        let dre = apply_diff(2, &re.u).unwrap();
        let dim = apply_diff(2, &im.u).unwrap();
        for i in 0..40 {
            assert!((y[i].re - re.q[i] - dre[i]).abs() <= 1e-12);
            assert!((y[i].im - im.q[i] - dim[i]).abs() <= 1e-12);
        }
        let conj: Vec<Complex64> = y.iter().map(|z| z.conj()).collect();
        let (cre, cim) = sigma_delta_complex(&conj, 2, &a).unwrap();
        assert_eq!(cre.q, re.q);
        for (a, b) in cim.q.iter().zip(&im.q) {
            assert_abs_diff_eq!(*a, -*b, epsilon = 1e-15);
        }
        let real: Vec<Complex64> = y.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        let (_, zero) = sigma_delta_complex(&real, 1, &a).unwrap();
        let expect = sigma_delta(&[0.0; 40], 1, &a).unwrap();
        assert_eq!(zero.q, expect.q);
    }

    #[test]
    fn buffer_config_values() {
        let c = BufferConfig::new(0.1, 1, 70, 0.0).unwrap();
        assert_abs_diff_eq!(c.delta_prime, 0.1 * 3.0 * PI / 70.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.delta_prime, 0.013464, epsilon = 1e-6);
        assert_abs_diff_eq!(c.delta_dprime, c.delta_prime / 2.0, epsilon = 1e-18);
    }

    #[test]
    fn buffer_pipeline_behaviour() {
        let m = 50;
        let mut rng = crate::seed::rng(8);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let u = svd_orthogonal_factor(&build_h(0.5, 0.1, 0.0, m, 1).unwrap()).unwrap().u;
        let cfg = BufferConfig::new(0.1, 1, 70, 0.0).unwrap();

        let fine = MidriseAlphabet::with_headroom(cfg.delta_prime, max_abs(&y), 0).unwrap();
        let ym = DVector::from_vec(msq(&y, &fine).q);
        let yv = DVector::from_vec(y.clone());
        assert!((&u * ym - &u * yv).norm() <= cfg.delta_prime / 2.0 * (m as f64).sqrt());

        let out = buffer_pipeline(&y, &cfg, &u).unwrap();
        assert!(out.y_msq_discarded && !out.q.overload_flag);

        let tiny = BufferConfig { delta_prime: 1e-12, ..cfg };
        let direct = (&u * DVector::from_vec(y.clone())).data.as_vec().clone();
        let a = MidriseAlphabet::with_headroom(0.1, max_abs(&direct), 1).unwrap();
        let reference = sigma_delta(&direct, 1, &a).unwrap();
        let buffered = buffer_pipeline(&y, &tiny, &u).unwrap();
        assert_eq!(buffered.q.q, reference.q);

        let long: Vec<f64> = vec![0.0; 71];
        let u71 = DMatrix::identity(71, 71);
        assert!(buffer_pipeline(&long, &cfg, &u71).is_err());
    }
}
