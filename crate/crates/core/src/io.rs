//! Little-endian binary containers for matrices, quantizer output, problems
//! and solutions.
//!
//! Every container starts with a 4-byte magic and a version byte:
//!
//! * `QCSM` matrix: `kind: u8`, `m: u64`, `n: u64`, `seed: u64`,
//!   `complex: u8`, then `m * n` entries in row-major order as `f64`
//!   (`re, im` pairs when complex).
//! * `QCSQ` quantized vector: `delta: f64`, `K: u64`, `r: u8`, `len: u64`,
//!   then `len` level indices as `i64`; level `j` has value `(j + 1/2) delta`.
//! * `QCSP` problem: `variant: u8`, `r: u8`, `channels: u8`, `tau1: f64`,
//!   `tau2: f64`, a real matrix body for `phi_eff` (`M: u64`, `N: u64`,
//!   entries), `q_eff` (`M` values), then `L: u64` and an `L x (M / channels)`
//!   matrix `B` when `L > 0`.
//! * `QCSS` solution: `converged: u8`, `iterations: u64`, `objective`,
//!   `gap`, two slacks, then `x_hat` and `nu_hat` each as `len: u64` plus values.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrices::{EnsembleKind, Entries, MeasurementEnsemble};
use crate::quantize::MidriseAlphabet;
use crate::recover::{EncodedExtras, OneStageProblem, RecoverySolution, SolverSettings, Variant};

const VERSION: u8 = 1;

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Format(format!("declared length {n} exceeds the buffer")));
        }
        Ok(n)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!("expected {} container", String::from_utf8_lossy(magic))));
        }
        let v = self.u8()?;
        if v != VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }
}

fn put_header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.push(VERSION);
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_real_matrix(out: &mut Vec<u8>, a: &DMatrix<f64>) {
    put_u64(out, a.nrows() as u64);
    put_u64(out, a.ncols() as u64);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            put_f64(out, a[(i, j)]);
        }
    }
}

fn get_real_matrix(cur: &mut Cursor) -> Result<DMatrix<f64>> {
    let m = cur.u64()? as usize;
    let n = cur.len(8)?;
    if m.saturating_mul(n).saturating_mul(8) > cur.buf.len() - cur.pos {
        return Err(Error::Format("matrix body exceeds the buffer".into()));
    }
    let mut vals = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        vals.push(cur.f64()?);
    }
    Ok(DMatrix::from_row_slice(m, n, &vals))
}

fn put_vec(out: &mut Vec<u8>, v: &[f64]) {
    put_u64(out, v.len() as u64);
    v.iter().for_each(|x| put_f64(out, *x));
}

fn get_vec(cur: &mut Cursor) -> Result<Vec<f64>> {
    let n = cur.len(8)?;
    (0..n).map(|_| cur.f64()).collect()
}

pub fn matrix_to_bytes(e: &MeasurementEnsemble) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, b"QCSM");
    out.push(e.kind.code());
    put_u64(&mut out, e.m as u64);
    put_u64(&mut out, e.n as u64);
    put_u64(&mut out, e.seed);
    match &e.entries {
        Entries::Real(a) => {
            out.push(0);
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    put_f64(&mut out, a[(i, j)]);
                }
            }
        }
        Entries::Complex(a) => {
            out.push(1);
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    put_f64(&mut out, a[(i, j)].re);
                    put_f64(&mut out, a[(i, j)].im);
                }
            }
        }
    }
    out
}

/// Reads a matrix container; recipe metadata beyond the header is not stored.
pub fn matrix_from_bytes(bytes: &[u8]) -> Result<MeasurementEnsemble> {
    let mut cur = Cursor::new(bytes);
    cur.header(b"QCSM")?;
    let kind = EnsembleKind::from_code(cur.u8()?).ok_or_else(|| Error::Format("unknown ensemble kind".into()))?;
    let m = cur.u64()? as usize;
    let n = cur.u64()? as usize;
    let seed = cur.u64()?;
    let complex = match cur.u8()? {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("bad complex flag {f}"))),
    };
    let per = if complex { 16 } else { 8 };
    if m.saturating_mul(n).saturating_mul(per) != bytes.len() - cur.pos {
        return Err(Error::Format("matrix body length does not match m x n".into()));
    }
    let entries = if complex {
        let mut vals = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let re = cur.f64()?;
            vals.push(Complex64::new(re, cur.f64()?));
        }
        Entries::Complex(DMatrix::from_row_slice(m, n, &vals))
    } else {
        let mut vals = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            vals.push(cur.f64()?);
        }
        Entries::Real(DMatrix::from_row_slice(m, n, &vals))
    };
    cur.finish()?;
    Ok(MeasurementEnsemble::from_entries(kind, seed, entries))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedRecord {
    pub alphabet: MidriseAlphabet,
    pub r: usize,
    pub levels: Vec<i64>,
}

impl QuantizedRecord {
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|&j| self.alphabet.value(j)).collect()
    }
}

pub fn quantized_to_bytes(q: &QuantizedRecord) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, b"QCSQ");
    put_f64(&mut out, q.alphabet.delta);
    put_u64(&mut out, q.alphabet.levels_per_side);
    out.push(q.r as u8);
    put_u64(&mut out, q.levels.len() as u64);
    for &j in &q.levels {
        out.extend_from_slice(&j.to_le_bytes());
    }
    out
}

pub fn quantized_from_bytes(bytes: &[u8]) -> Result<QuantizedRecord> {
    let mut cur = Cursor::new(bytes);
    cur.header(b"QCSQ")?;
    let delta = cur.f64()?;
    let k = cur.u64()?;
    let alphabet = MidriseAlphabet::new(delta, k).map_err(|e| Error::Format(e.to_string()))?;
    let r = cur.u8()? as usize;
    let n = cur.len(8)?;
    let levels = (0..n).map(|_| cur.i64()).collect::<Result<Vec<_>>>()?;
    cur.finish()?;
    if levels.iter().any(|&j| j < -alphabet.k() || j >= alphabet.k()) {
        return Err(Error::Format("level index outside the alphabet".into()));
    }
    Ok(QuantizedRecord { alphabet, r, levels })
}

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Standard => 0,
        Variant::Buffer => 1,
        Variant::Encoded => 2,
    }
}

pub fn problem_to_bytes(p: &OneStageProblem) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, b"QCSP");
    out.push(variant_code(p.variant));
    out.push(p.r as u8);
    out.push(p.channels as u8);
    put_f64(&mut out, p.tau1);
    put_f64(&mut out, p.tau2);
    put_real_matrix(&mut out, &p.phi_eff);
    p.q_eff.iter().for_each(|v| put_f64(&mut out, *v));
    match &p.encoded {
        Some(e) => put_real_matrix(&mut out, &e.b),
        None => put_u64(&mut out, 0),
    }
    out
}

/// Solver settings are not stored; the defaults are restored.
pub fn problem_from_bytes(bytes: &[u8]) -> Result<OneStageProblem> {
    let mut cur = Cursor::new(bytes);
    cur.header(b"QCSP")?;
    let variant = match cur.u8()? {
        0 => Variant::Standard,
        1 => Variant::Buffer,
        2 => Variant::Encoded,
        v => return Err(Error::Format(format!("unknown variant {v}"))),
    };
    let r = cur.u8()? as usize;
    let channels = cur.u8()? as usize;
    let tau1 = cur.f64()?;
    let tau2 = cur.f64()?;
    let phi_eff = get_real_matrix(&mut cur)?;
    let q_eff = (0..phi_eff.nrows()).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let save = cur.pos;
    let l = cur.u64()?;
    let encoded = if l == 0 {
        None
    } else {
        cur.pos = save;
        Some(EncodedExtras {
            b: get_real_matrix(&mut cur)?,
            tol_eq: 1e-8,
        })
    };
    cur.finish()?;
    Ok(OneStageProblem {
        phi_eff,
        q_eff,
        r,
        channels,
        tau1,
        tau2,
        variant,
        encoded,
        settings: SolverSettings::default(),
    })
}

pub fn solution_to_bytes(s: &RecoverySolution) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, b"QCSS");
    out.push(s.converged as u8);
    put_u64(&mut out, s.iterations as u64);
    put_f64(&mut out, s.objective);
    put_f64(&mut out, s.gap);
    put_f64(&mut out, s.feas_residuals[0]);
    put_f64(&mut out, s.feas_residuals[1]);
    put_vec(&mut out, &s.x_hat);
    put_vec(&mut out, &s.nu_hat);
    out
}

pub fn solution_from_bytes(bytes: &[u8]) -> Result<RecoverySolution> {
    let mut cur = Cursor::new(bytes);
    cur.header(b"QCSS")?;
    let converged = cur.u8()? != 0;
    let iterations = cur.u64()? as usize;
    let objective = cur.f64()?;
    let gap = cur.f64()?;
    let feas_residuals = [cur.f64()?, cur.f64()?];
    let x_hat = get_vec(&mut cur)?;
    let nu_hat = get_vec(&mut cur)?;
    cur.finish()?;
    Ok(RecoverySolution {
        x_hat,
        nu_hat,
        objective,
        feas_residuals,
        gap,
        iterations,
        converged,
        u_tilde: None,
        eq_residual: None,
    })
}
