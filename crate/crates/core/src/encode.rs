//! Bernoulli further-encoding `E(q) = B D^{-r} q` of Σ∆ output, exact bit
//! accounting and a fixed-rate payload format.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{lift_matrix, max_abs, norm2};
use crate::matrices::{ell_cap, gen_chirp_sub, LogBase};
use crate::operators::diff_inv_columns;
use crate::quantize::{sigma_delta, MidriseAlphabet};
use crate::recover::{diff_inv_channels, solve_encoded, OneStageProblem, SolverSettings};
use crate::seed;
use crate::signal::SparseSignal;

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    /// `L x m` matrix with entries in `{-1, +1}`.
    pub b: DMatrix<f64>,
    pub l: usize,
    pub m: usize,
    pub r: usize,
    pub seed: u64,
}

impl Encoder {
    /// Rows are drawn in order, so the encoder with `L` rows is the `L`-row
    /// prefix of any larger encoder with the same seed.
    pub fn new(l: usize, m: usize, r: usize, seed: u64) -> Result<Self> {
        if l == 0 || l > m || r == 0 {
            return invalid(format!("need 1 <= L <= m and r >= 1, got L = {l}, m = {m}, r = {r}"));
        }
        let mut rng = seed::rng(seed);
        let mut rows = Vec::with_capacity(l * m);
        for _ in 0..l * m {
            rows.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        }
        Ok(Self {
            b: DMatrix::from_row_slice(l, m, &rows),
            l,
            m,
            r,
            seed,
        })
    }

    pub fn truncated(&self, l: usize) -> Result<Self> {
        if l == 0 || l > self.l {
            return invalid(format!("cannot keep {l} of {} rows", self.l));
        }
        Ok(Self {
            b: self.b.rows(0, l).into_owned(),
            l,
            ..*self
        })
    }

    /// `B D^{-r}`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::identity(self.m, self.m);
        diff_inv_columns(self.r, &mut d);
        &self.b * d
    }

    /// Full `m x m` orthogonal right factor `R` of `B D^{-r} = T S R^T`.
    pub fn right_factor(&self) -> Result<DMatrix<f64>> {
        let mut padded = DMatrix::zeros(self.m, self.m);
        padded.rows_mut(0, self.l).copy_from(&self.matrix());
        let svd = nalgebra::SVD::try_new(padded, false, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("SVD of B D^-r did not converge".into()))?;
        let vt = svd.v_t.expect("requested V^T");
        Ok(vt.transpose())
    }
}

/// `B D^{-r} q`.
pub fn encode(enc: &Encoder, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != enc.m {
        return invalid(format!("q has length {}, encoder expects {}", q.len(), enc.m));
    }
    let d = diff_inv_channels(enc.r, 1, q);
    Ok((&enc.b * DVector::from_vec(d)).data.into())
}

/// Exact integer image `B D^{-r} o` of odd level codes `o = 2j + 1`, so that
/// `encode(q) = (delta / 2) * encode_levels(levels)`.
pub fn encode_levels(enc: &Encoder, levels: &[i64]) -> Result<Vec<i64>> {
    if levels.len() != enc.m {
        return invalid(format!("got {} levels, encoder expects {}", levels.len(), enc.m));
    }
    let mut v: Vec<i128> = levels.iter().map(|&j| 2 * j as i128 + 1).collect();
    for _ in 0..enc.r {
        let mut acc = 0i128;
        for x in v.iter_mut() {
            acc += *x;
            *x = acc;
        }
    }
    (0..enc.l)
        .map(|i| {
            let s: i128 = (0..enc.m).map(|j| if enc.b[(i, j)] > 0.0 { v[j] } else { -v[j] }).sum();
            i64::try_from(s).map_err(|_| Error::Numerical("encoded value overflows i64".into()))
        })
        .collect()
}

/// `2K m^{r+1}`, the size of the per-entry code alphabet.
fn code_base(m: usize, r: usize, k: u64) -> BigUint {
    BigUint::from(2 * k) * BigUint::from(m).pow(r as u32 + 1)
}

/// `ceil(L ((r + 1) log2 m + log2 2K))`, evaluated exactly.
pub fn bits_required(l: usize, m: usize, r: usize, k: u64) -> u64 {
    let total = code_base(m, r, k).pow(l as u32);
    (total - 1u32).bits()
}

/// Floating-point evaluation of the same count.
pub fn bits_required_float(l: usize, m: usize, r: usize, k: u64) -> u64 {
    (l as f64 * ((r + 1) as f64 * (m as f64).log2() + (2.0 * k as f64).log2())).ceil() as u64
}

/// Bits for sending `q` directly, `m log2 2K`.
pub fn bits_direct(m: usize, k: u64) -> u64 {
    (BigUint::from(2 * k).pow(m as u32) - 1u32).bits()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub l: usize,
    pub m: usize,
    pub r: usize,
    pub k: u64,
    pub delta: f64,
    pub seed: u64,
    /// `B D^{-r} o` for odd codes `o`.
    pub values: Vec<i64>,
}

const PAYLOAD_MAGIC: &[u8; 4] = b"QCSE";

/// Size of the payload header in bytes.
pub const PAYLOAD_HEADER_LEN: usize = 46;

impl Payload {
    fn bound(&self) -> Result<i128> {
        let mr = (self.m as i128)
            .checked_pow(self.r as u32 + 1)
            .ok_or_else(|| Error::Format("m^(r+1) overflows".into()))?;
        Ok((2 * self.k as i128 - 1) * mr)
    }

    /// Header followed by the values packed as `L` mixed-radix digits in base
    /// `2K m^{r+1}`, i.e. exactly [`bits_required`] bits, byte-padded.
    ///
    /// Header (little-endian): magic `QCSE`, `L: u32`, `m: u32`, `r: u8`,
    /// `K: u64`, `delta: f64`, `seed: u64`, parity `u8`, bit count `u64`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.values.len() != self.l {
            return invalid("payload length differs from L");
        }
        let a = self.bound()?;
        let parity = self.values.first().map_or(0, |v| v.rem_euclid(2)) as i128;
        let offset = if a.rem_euclid(2) == parity { a } else { a - 1 };
        let base = code_base(self.m, self.r, self.k);
        let mut acc = BigUint::from(0u32);
        for &v in self.values.iter().rev() {
            let v = v as i128;
            if v.abs() > a || v.rem_euclid(2) != parity {
                return Err(Error::Format(format!("value {v} outside the code range")));
            }
            let digit = ((v + offset) / 2) as u128;
            acc = acc * &base + BigUint::from(digit);
        }
        let nbits = bits_required(self.l, self.m, self.r, self.k);
        let nbytes = nbits.div_ceil(8) as usize;
        let mut body = acc.to_bytes_le();
        if body.len() > nbytes {
            return Err(Error::Format("packed value exceeds the bit budget".into()));
        }
        body.resize(nbytes, 0);

        let mut out = Vec::with_capacity(PAYLOAD_HEADER_LEN + nbytes);
        out.extend_from_slice(PAYLOAD_MAGIC);
        out.extend_from_slice(&(self.l as u32).to_le_bytes());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.push(self.r as u8);
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(parity as u8);
        out.extend_from_slice(&nbits.to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = crate::io::Cursor::new(bytes);
        if cur.take(4)? != PAYLOAD_MAGIC {
            return Err(Error::Format("bad payload magic".into()));
        }
        let l = cur.u32()? as usize;
        let m = cur.u32()? as usize;
        let r = cur.u8()? as usize;
        let k = cur.u64()?;
        let delta = cur.f64()?;
        let seed = cur.u64()?;
        let parity = cur.u8()? as i128;
        let nbits = cur.u64()?;
        if l == 0 || m == 0 || r == 0 || k == 0 || parity > 1 {
            return Err(Error::Format("invalid payload header".into()));
        }
        if nbits != bits_required(l, m, r, k) {
            return Err(Error::Format("bit count does not match header".into()));
        }
        let body = cur.take(nbits.div_ceil(8) as usize)?;
        cur.finish()?;
        let mut p = Payload {
            l,
            m,
            r,
            k,
            delta,
            seed,
            values: Vec::with_capacity(l),
        };
        let a = p.bound()?;
        let offset = if a.rem_euclid(2) == parity { a } else { a - 1 };
        let base = code_base(m, r, k);
        let mut acc = BigUint::from_bytes_le(body);
        for _ in 0..l {
            let digit = &acc % &base;
            acc /= &base;
            let d: u128 = digit
                .try_into()
                .map_err(|_| Error::Format("digit overflows".into()))?;
            p.values.push((2 * d as i128 - offset) as i64);
        }
        if acc != BigUint::from(0u32) {
            return Err(Error::Format("trailing bits in payload".into()));
        }
        Ok(p)
    }

    /// `E(q) = (delta / 2) B D^{-r} o`.
    pub fn decoded(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64 * self.delta / 2.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRateConfig {
    pub p: u64,
    pub r: usize,
    pub k: usize,
    pub delta: f64,
    /// Encoded dimensions to sweep; defaults to a ladder up to the theorem value.
    pub l_list: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    /// Constant `C` in the radius `3 C m`; defaults to `delta / 2`.
    pub encoded_c: Option<f64>,
    pub eps: f64,
    pub log_base: LogBase,
    pub settings: SolverSettings,
}

impl DistortionRateConfig {
    pub fn theorem_l(&self) -> (usize, bool) {
        ell_cap(self.p, 0.625, self.p as usize, self.log_base)
    }

    pub fn l_values(&self) -> Vec<usize> {
        if let Some(l) = &self.l_list {
            return l.clone();
        }
        let (top, _) = self.theorem_l();
        let mut out: Vec<usize> = [0.125, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|f| ((top as f64 * f).round() as usize).max(2 * self.k.max(1)))
            .filter(|&l| l <= top)
            .collect();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionTrial {
    pub l: usize,
    pub trial: usize,
    pub error: f64,
    pub signal_norm: f64,
    pub bits: u64,
    pub iterations: usize,
    pub converged: bool,
    pub overload: bool,
    pub eq_residual: f64,
    /// `||B u||` over both channels is within the residual radius.
    pub truth_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionPoint {
    pub l: usize,
    /// Bits for both channels of one measurement vector.
    pub rate: u64,
    /// `R / (k log p)`.
    pub normalized_rate: f64,
    /// Maximum error over converged trials.
    pub distortion: f64,
    pub median_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRateReport {
    pub points: Vec<DistortionPoint>,
    pub trials: Vec<DistortionTrial>,
    /// Slope of `log2 D` against `R / (k log p)`.
    pub exponent: Option<f64>,
    pub bits_direct: u64,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distortion against rate on the chirp-submatrix pipeline.
///
/// For each `L` the measurement matrix is `R Phi_bar` with `R` the right
/// factor of `B_L D^{-r}`, where `B_L` are the first `L` rows of one master
/// encoder. Each trial signal is shared across all `L`.
pub fn distortion_rate_sweep(cfg: &DistortionRateConfig) -> Result<DistortionRateReport> {
    if cfg.trials == 0 {
        return invalid("trials must be positive");
    }
    let phi = gen_chirp_sub(cfg.p)?;
    let m = phi.m;
    let n = phi.n;
    let base = phi.entries.to_complex();
    let master = Encoder::new(m, m, cfg.r, seed::stable_hash(&[cfg.seed, seed::tag_hash("encoder")]))?;
    let c_const = cfg.encoded_c.unwrap_or(cfg.delta / 2.0);
    let signals: Vec<SparseSignal> = (0..cfg.trials)
        .map(|t| SparseSignal::random(n, cfg.k, n, seed::stable_hash(&[cfg.seed, seed::tag_hash("signal"), t as u64])))
        .collect::<Result<_>>()?;
    let log_p = cfg.log_base.log(cfg.p as f64);

    let mut points = Vec::new();
    let mut trials = Vec::new();
    let mut bits_direct_max = 0;
    for l in cfg.l_values() {
        let enc = master.truncated(l)?;
        let rf = enc.right_factor()?;
        let rc = rf.map(|v| Complex64::new(v, 0.0));
        let a = &rc * &base;
        let lifted = lift_matrix(&a);
        let mut errs = Vec::new();
        let mut failures = 0;
        let mut rate = 0;
        for (t, x) in signals.iter().enumerate() {
            let y = &a * DVector::from_iterator(n, x.values.iter().map(|v| Complex64::new(*v, 0.0)));
            let re: Vec<f64> = y.iter().map(|z| z.re).collect();
            let im: Vec<f64> = y.iter().map(|z| z.im).collect();
            let alph = MidriseAlphabet::with_headroom(cfg.delta, max_abs(&re).max(max_abs(&im)), cfg.r)?;
            let tr = sigma_delta(&re, cfg.r, &alph)?;
            let ti = sigma_delta(&im, cfg.r, &alph)?;
            let bits = 2 * bits_required(l, m, cfg.r, alph.levels_per_side);
            rate = rate.max(bits);
            bits_direct_max = bits_direct_max.max(2 * bits_direct(m, alph.levels_per_side));
            let q: Vec<f64> = tr.q.iter().chain(&ti.q).copied().collect();
            let mut prob = OneStageProblem::encoded(lifted.clone(), q, cfg.r, 2, enc.b.clone(), c_const, cfg.eps)?;
            prob.settings = cfg.settings;
            let shaped: f64 = [&tr.u, &ti.u]
                .iter()
                .map(|u| (&enc.b * DVector::from_column_slice(u)).norm_squared())
                .sum::<f64>()
                .sqrt();
            let truth_feasible = shaped <= prob.tau1 * (1.0 + 1e-9);
            let (error, iterations, converged, eq) = match solve_encoded(&prob) {
                Ok(s) => {
                    let e = norm2(&s.x_hat.iter().zip(&x.values).map(|(a, b)| a - b).collect::<Vec<_>>());
                    (e, s.iterations, s.converged, s.eq_residual.unwrap_or(f64::NAN))
                }
                Err(Error::Infeasible { .. }) => (f64::NAN, 0, false, f64::NAN),
                Err(e) => return Err(e),
            };
            if converged {
                errs.push(error);
            } else {
                failures += 1;
            }
            trials.push(DistortionTrial {
                l,
                trial: t,
                error,
                signal_norm: norm2(&x.values),
                bits,
                iterations,
                converged,
                overload: tr.overload_flag || ti.overload_flag,
                eq_residual: eq,
                truth_feasible,
            });
        }
        let distortion = errs.iter().cloned().fold(f64::NAN, f64::max);
        let median_error = median(&mut errs.clone());
        points.push(DistortionPoint {
            l,
            rate,
            normalized_rate: rate as f64 / (cfg.k.max(1) as f64 * log_p),
            distortion,
            median_error,
            failures,
        });
    }
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.distortion > 0.0)
        .map(|p| (p.normalized_rate, p.distortion.log2()))
        .collect();
    let exponent = (fit.len() >= 2).then(|| {
        let n = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / fit.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    });
    Ok(DistortionRateReport {
        points,
        trials,
        exponent,
        bits_direct: bits_direct_max,
    })
}
