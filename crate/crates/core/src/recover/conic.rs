//! First-order solver for
//!
//! ```text
//! minimize    w ||z||_1
//! subject to  ||K_z z + K_nu nu - c||_2 <= tau1,   ||nu||_2 <= tau2
//! ```
//!
//! ADMM over the graph of `K = [K_z K_nu]`, followed by an active-set polish
//! that is accepted only under a primal-dual gap certificate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::spectral_norm;

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub kz: DMatrix<f64>,
    /// Map applied to the noise variable; ignored when `tau2 = 0`.
    pub knu: Option<DMatrix<f64>>,
    pub c: DVector<f64>,
    pub tau1: f64,
    pub tau2: f64,
    /// Weight of the l1 objective; zero turns the solve into a feasibility search.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub tol_feas: f64,
    pub tol_obj: f64,
    /// Scale of the data; the feasibility tolerance is `tol_feas * (1 + feas_scale)`.
    pub feas_scale: f64,
    pub polish_every: usize,
    pub power_iters: usize,
    pub relaxation: f64,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol_feas: 1e-6,
            tol_obj: 1e-5,
            feas_scale: 0.0,
            polish_every: 25,
            power_iters: 100,
            relaxation: 1.6,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
    pub objective: f64,
    /// `tau1 - ||K_z z + K_nu nu - c||` and `tau2 - ||nu||`.
    pub slack: [f64; 2],
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub polished: bool,
}

/// Candidate `(z, nu)`.
type Pair = (DVector<f64>, DVector<f64>);

struct Solver<'a> {
    settings: &'a SolverSettings,
    /// `[K_z K_nu] / scale`.
    k: DMatrix<f64>,
    c: DVector<f64>,
    tau1: f64,
    tau2: f64,
    weight: f64,
    scale: f64,
    /// The noise variable is stored as `nu / nu_scale`.
    nu_scale: f64,
    n: usize,
    pn: usize,
    /// Eigenpairs of `K_nu K_nu^T`, present when the noise ball is.
    noise: Option<(DMatrix<f64>, DVector<f64>)>,
}

struct Certificate {
    violation: f64,
    gap: f64,
    objective: f64,
    slack: [f64; 2],
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn project_ball(v: &mut [f64], radius: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > radius {
        let s = if n > 0.0 { radius / n } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what} has non-finite entries"))
    }
}

impl<'a> Solver<'a> {
    fn zcols(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.k.columns(0, self.n)
    }

    fn residual(&self, z: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        let mut r = self.zcols() * z - &self.c;
        if self.pn > 0 {
            r += self.k.columns(self.n, self.pn) * nu;
        }
        r
    }

    fn dual_value(&self, y: &DVector<f64>) -> Option<f64> {
        let kt = self.k.tr_mul(y);
        let zinf = kt.rows(0, self.n).amax();
        let nun = if self.pn > 0 { kt.rows(self.n, self.pn).norm() } else { 0.0 };
        let coeff = self.c.dot(y) - self.tau1 * y.norm() - self.tau2 * nun;
        if zinf == 0.0 {
            return if coeff > 0.0 { None } else { Some(0.0) };
        }
        Some((self.weight / zinf * coeff).max(0.0))
    }

    fn certify(&self, z: &DVector<f64>, nu: &DVector<f64>, extra: Option<&DVector<f64>>) -> Certificate {
        let r = self.residual(z, nu);
        let rn = r.norm();
        let nun = nu.norm();
        let slack = [(self.tau1 - rn) * self.scale, (self.tau2 - nun) * self.nu_scale];
        let violation = (-slack[0]).max(-slack[1]).max(0.0);
        let objective = self.weight * z.lp_norm(1);
        let mut dual: f64 = 0.0;
        if self.weight > 0.0 {
            let d = -r;
            for y in std::iter::once(&d).chain(extra) {
                if let Some(g) = self.dual_value(y) {
                    dual = dual.max(g);
                }
            }
        }
        Certificate {
            violation,
            gap: objective - dual,
            objective,
            slack,
        }
    }

    fn accepts(&self, c: &Certificate) -> bool {
        let s = self.settings;
        c.violation <= s.tol_feas * (1.0 + s.feas_scale) && c.gap <= s.tol_obj * (1.0 + c.objective)
    }

    /// Sign-constrained least-squares polish without a noise variable.
    /// Returns the candidate and the dual direction that certifies it.
    fn polish_plain(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        active_set(self.zcols(), &self.c, self.tau1, x)
    }

    /// Multiplier `lambda` of `min ||K_nu nu - b||` over `||nu|| <= tau2`, with
    /// `nu = K_nu^T (G + lambda I)^{-1} b`. Zero when the ball is inactive.
    fn trust_multiplier(&self, beta: &DVector<f64>, lam: &DVector<f64>) -> f64 {
        let t2 = self.tau2 * self.tau2;
        let excess = |l: f64| {
            beta.iter()
                .zip(lam.iter())
                .filter(|(_, g)| **g > 0.0)
                .map(|(b, g)| g * b * b / ((g + l) * (g + l)))
                .sum::<f64>()
                - t2
        };
        if excess(0.0) <= 0.0 {
            return 0.0;
        }
        let mut hi = lam.max().max(1e-300);
        while excess(hi) > 0.0 {
            hi *= 4.0;
        }
        let mut lo = hi / 4.0;
        while lo > 1e-300 && excess(lo) <= 0.0 {
            lo /= 4.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }

    /// Saddle-point polish: for a trial multiplier `lambda` the noise variable
    /// is eliminated, leaving `||W (K_z z - c)|| <= sqrt(tau1^2 + lambda tau2^2)`
    /// with `W = (I + G / lambda)^{-1/2}`. The saddle point is the `lambda` that
    /// reproduces itself as the trust-region multiplier of the residual.
    fn polish_saddle(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (e, lam) = self.noise.as_ref()?;
        let n = self.n;
        let kz = self.zcols();
        let kn = self.k.columns(n, self.pn);
        let floor = 1e-14 * lam.max().max(1e-300);
        let multiplier = |z: &DVector<f64>| {
            let b = &self.c - kz * z;
            let beta = e.tr_mul(&b);
            (self.trust_multiplier(&beta, lam).max(floor), beta)
        };
        let mut seed = x.rows(0, n).into_owned();
        // Evaluates the trial multiplier exp(t); returns the log-ratio of the
        // refreshed multiplier and a certified candidate when one is found.
        let mut eval = |t: f64| -> Option<(f64, Option<Pair>)> {
            let lt = t.exp();
            let d = lam.map(|g| (1.0 + g / lt).powf(-0.5));
            let w = e * DMatrix::from_diagonal(&d) * e.transpose();
            let kw = &w * kz;
            let cw = &w * &self.c;
            let rad = (self.tau1 * self.tau1 + lt * self.tau2 * self.tau2).sqrt();
            let (z, _) = active_set(kw.columns(0, n), &cw, rad, &seed)?;
            let (ln, beta) = multiplier(&z);
            let coef = beta.zip_map(lam, |b, g| b / (g + ln));
            let nu = kn.tr_mul(&(e * coef));
            let cert = self.certify(&z, &nu, None);
            seed = z.clone();
            let found = self.accepts(&cert).then(|| {
                let mut full = DVector::zeros(n + self.pn);
                full.rows_mut(0, n).copy_from(&z);
                full.rows_mut(n, self.pn).copy_from(&nu);
                (full, -self.residual(&z, &nu))
            });
            Some((ln.ln() - t, found))
        };
        let (l0, _) = multiplier(&x.rows(0, n).into_owned());
        let mut a = l0.ln();
        let (mut fa, found) = eval(a)?;
        if found.is_some() {
            return found;
        }
        let step = if fa > 0.0 { 2.0 } else { -2.0 };
        let mut b = a;
        let mut fb = fa;
        for _ in 0..40 {
            b += step;
            let (v, found) = eval(b)?;
            if found.is_some() {
                return found;
            }
            fb = v;
            if fb.signum() != fa.signum() {
                break;
            }
            a = b;
            fa = fb;
        }
        if fb.signum() == fa.signum() {
            return None;
        }
        let mut side = 0;
        for _ in 0..80 {
            let t = (a * fb - b * fa) / (fb - fa);
            let (ft, found) = eval(t)?;
            if found.is_some() {
                return found;
            }
            if ft.signum() == fb.signum() {
                b = t;
                fb = ft;
                if side == -1 {
                    fa /= 2.0;
                }
                side = -1;
            } else {
                a = t;
                fa = ft;
                if side == 1 {
                    fb /= 2.0;
                }
                side = 1;
            }
            if (b - a).abs() < 1e-13 {
                break;
            }
        }
        None
    }

    /// Newton polish on the KKT system when both balls are active.
    fn polish_noise(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.n;
        let pn = self.pn;
        let idx: Vec<usize> = (0..n).filter(|&j| x[j] != 0.0).collect();
        let s = idx.len();
        if s == 0 {
            return None;
        }
        let sigma = DVector::from_iterator(s, idx.iter().map(|&j| x[j].signum()));
        let ks = self.k.select_columns(&idx);
        let kn = self.k.columns(self.n, pn).into_owned();
        let mut zs = DVector::from_iterator(s, idx.iter().map(|&j| x[j]));
        let mut nu = x.rows(n, pn).into_owned();
        let resid = |zs: &DVector<f64>, nu: &DVector<f64>| &ks * zs + &kn * nu - &self.c;
        let r0 = resid(&zs, &nu);
        let mut t = -sigma.dot(&ks.tr_mul(&r0)) / s as f64;
        let nn = nu.norm_squared();
        if nn == 0.0 {
            return None;
        }
        let mut kap = -nu.dot(&kn.tr_mul(&r0)) / nn;
        let dim = s + pn + 2;
        let eval = |zs: &DVector<f64>, nu: &DVector<f64>, t: f64, kap: f64| {
            let r = resid(zs, nu);
            let mut f = DVector::zeros(dim);
            f.rows_mut(0, s).copy_from(&(&sigma * t + ks.tr_mul(&r)));
            f.rows_mut(s, pn).copy_from(&(kn.tr_mul(&r) + nu * kap));
            f[s + pn] = 0.5 * (r.norm_squared() - self.tau1 * self.tau1);
            f[s + pn + 1] = 0.5 * (nu.norm_squared() - self.tau2 * self.tau2);
            (f, r)
        };
        let kss = ks.tr_mul(&ks);
        let ksn = ks.tr_mul(&kn);
        let knn = kn.tr_mul(&kn);
        let (mut f, mut r) = eval(&zs, &nu, t, kap);
        let scale = 1.0 + self.c.norm();
        for _ in 0..50 {
            let fnorm = f.norm();
            if fnorm <= 1e-13 * scale {
                break;
            }
            let mut jac = DMatrix::zeros(dim, dim);
            jac.view_mut((0, 0), (s, s)).copy_from(&kss);
            jac.view_mut((0, s), (s, pn)).copy_from(&ksn);
            jac.view_mut((s, 0), (pn, s)).copy_from(&ksn.transpose());
            let mut b22 = knn.clone();
            for i in 0..pn {
                b22[(i, i)] += kap;
            }
            jac.view_mut((s, s), (pn, pn)).copy_from(&b22);
            jac.view_mut((0, s + pn), (s, 1)).copy_from(&sigma);
            jac.view_mut((s, s + pn + 1), (pn, 1)).copy_from(&nu);
            jac.view_mut((s + pn, 0), (1, s)).copy_from(&ks.tr_mul(&r).transpose());
            jac.view_mut((s + pn, s), (1, pn)).copy_from(&kn.tr_mul(&r).transpose());
            jac.view_mut((s + pn + 1, s), (1, pn)).copy_from(&nu.transpose());
            let step = jac.lu().solve(&(-&f))?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let zn = &zs + step.rows(0, s) * alpha;
                let nn = &nu + step.rows(s, pn) * alpha;
                let tn = t + alpha * step[s + pn];
                let kn_ = kap + alpha * step[s + pn + 1];
                let (fnew, rnew) = eval(&zn, &nn, tn, kn_);
                if fnew.norm() < (1.0 - 1e-4 * alpha) * fnorm {
                    zs = zn;
                    nu = nn;
                    t = tn;
                    kap = kn_;
                    f = fnew;
                    r = rnew;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !(t > 0.0 && kap >= 0.0) || zs.iter().zip(sigma.iter()).any(|(v, s)| v * s <= 0.0) {
            return None;
        }
        let mut out = DVector::zeros(n + pn);
        for (v, &j) in zs.iter().zip(&idx) {
            out[j] = *v;
        }
        out.rows_mut(n, pn).copy_from(&nu);
        Some((out, -r))
    }

    fn solution(&self, x: &DVector<f64>, cert: &Certificate, iterations: usize, converged: bool, polished: bool) -> ConicSolution {
        ConicSolution {
            z: x.rows(0, self.n).iter().copied().collect(),
            nu: x.rows(self.n, self.pn).iter().map(|v| v * self.nu_scale).collect(),
            objective: cert.objective,
            slack: cert.slack,
            gap: cert.gap,
            iterations,
            converged,
            polished,
        }
    }

    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (x.rows(0, self.n).into_owned(), x.rows(self.n, self.pn).into_owned())
    }

    fn try_polish(&self, x: &DVector<f64>) -> Option<(DVector<f64>, Certificate)> {
        if self.weight == 0.0 {
            return None;
        }
        let (full, y) = if self.pn == 0 {
            let (z, y) = self.polish_plain(x)?;
            (z, y)
        } else {
            match self.polish_saddle(x) {
                Some(found) => found,
                None => self.polish_noise(x)?,
            }
        };
        let (z, nu) = self.split(&full);
        let cert = self.certify(&z, &nu, Some(&y));
        if self.accepts(&cert) {
            Some((full, cert))
        } else {
            None
        }
    }
}

/// Active-set solve of `min ||z||_1` s.t. `||K z - c|| <= tau1`, seeded with
/// the support and signs of `x`.
fn active_set(k: nalgebra::DMatrixView<'_, f64>, c: &DVector<f64>, tau1: f64, x: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = k.ncols();
    let mm = k.nrows();
    let mut sup: Vec<(usize, f64)> = (0..n).filter(|&j| x[j] != 0.0).map(|j| (j, x[j].signum())).collect();
    let budget = (4 * (sup.len() + 10)).min(400);
    for _ in 0..budget {
        if sup.is_empty() {
            if c.norm() <= tau1 {
                return Some((DVector::zeros(n), DVector::zeros(mm)));
            }
            let g = k.tr_mul(c);
            let j = g.iamax();
            if g[j] == 0.0 {
                return None;
            }
            sup.push((j, g[j].signum()));
            continue;
        }
        if sup.len() > mm {
            return None;
        }
        let idx: Vec<usize> = sup.iter().map(|s| s.0).collect();
        let ks = k.select_columns(&idx);
        let qr = ks.clone().qr();
        let rmat = qr.r();
        let diag: Vec<f64> = rmat.diagonal().iter().map(|v| v.abs()).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(dmin > 1e-10 * dmax) {
            return None;
        }
        let qtc = qr.q().tr_mul(c);
        let z_ls = rmat.solve_upper_triangular(&qtc)?;
        let rho_ls = &ks * &z_ls - c;
        let nr = rho_ls.norm();
        if nr > tau1 + 1e-12 * c.norm() {
            let g = k.tr_mul(&rho_ls);
            let mut best = None;
            let mut bv = 0.0;
            for j in 0..n {
                if !idx.contains(&j) && g[j].abs() > bv {
                    bv = g[j].abs();
                    best = Some(j);
                }
            }
            let j = best?;
            if bv <= 1e-14 * (nr + c.norm()) {
                return None;
            }
            sup.push((j, -g[j].signum()));
            continue;
        }
        let sigma = DVector::from_iterator(sup.len(), sup.iter().map(|s| s.1));
        let p = rmat.solve_upper_triangular(&rmat.tr_solve_upper_triangular(&sigma)?)?;
        let sp = sigma.dot(&p);
        if !(sp > 0.0) {
            return None;
        }
        let t = ((tau1 * tau1 - nr * nr).max(0.0) / sp).sqrt();
        let zs = &z_ls - &p * t;
        let before = sup.len();
        let kept: Vec<(usize, f64)> = sup
            .iter()
            .zip(zs.iter())
            .filter(|((_, s), v)| **v * *s > 0.0)
            .map(|(s, _)| *s)
            .collect();
        if kept.len() < before {
            sup = kept;
            continue;
        }
        // Dual direction with K_S^T y = sigma.
        let y = if t > 1e-12 * (z_ls.norm() + 1e-300) {
            -(&ks * &zs - c) / t
        } else {
            &ks * &p
        };
        let gy = k.tr_mul(&y);
        let mut worst = None;
        let mut wv = 1.0 + 1e-9;
        for j in 0..n {
            if !idx.contains(&j) && gy[j].abs() > wv {
                wv = gy[j].abs();
                worst = Some(j);
            }
        }
        if let Some(j) = worst {
            sup.push((j, gy[j].signum()));
            continue;
        }
        let mut z = DVector::zeros(n);
        for (v, &j) in zs.iter().zip(&idx) {
            z[j] = *v;
        }
        return Some((z, y));
    }
    None
}

/// Solves the conic program; see the module documentation.
pub fn conic_solve(p: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    let (mm, n) = p.kz.shape();
    if p.c.len() != mm {
        return invalid(format!("c has length {}, K_z has {mm} rows", p.c.len()));
    }
    if !(p.tau1 >= 0.0 && p.tau2 >= 0.0 && p.weight >= 0.0) || !p.tau1.is_finite() || !p.tau2.is_finite() {
        return invalid("radii and weight must be finite and nonnegative");
    }
    check_finite(&p.kz, "K_z")?;
    if p.c.iter().any(|v| !v.is_finite()) {
        return invalid("c has non-finite entries");
    }
    let knu = match (&p.knu, p.tau2 > 0.0) {
        (Some(k), true) => {
            if k.nrows() != mm {
                return invalid("K_nu row count differs from K_z");
            }
            check_finite(k, "K_nu")?;
            Some(k)
        }
        _ => None,
    };
    let pn = knu.map_or(0, |k| k.ncols());
    let mut k = DMatrix::zeros(mm, n + pn);
    k.columns_mut(0, n).copy_from(&p.kz);
    let mut nu_scale = 1.0;
    if let Some(kn) = knu {
        let nz = spectral_norm(&p.kz, settings.power_iters, settings.seed);
        let nn = spectral_norm(kn, settings.power_iters, settings.seed);
        if nz > 0.0 && nn > 0.0 {
            nu_scale = nz / nn;
        }
        k.columns_mut(n, pn).copy_from(&(kn * nu_scale));
    }
    let scale = spectral_norm(&k, settings.power_iters, settings.seed);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    k /= scale;
    let solver = Solver {
        settings,
        k,
        c: &p.c / scale,
        tau1: p.tau1 / scale,
        tau2: p.tau2 / nu_scale,
        weight: p.weight,
        scale,
        nu_scale,
        n,
        pn,
        noise: None,
    };
    let solver = if pn > 0 {
        let kn = solver.k.columns(n, pn);
        let eig = (kn * kn.transpose()).symmetric_eigen();
        let lam = eig.eigenvalues.map(|v| v.max(0.0));
        Solver {
            noise: Some((eig.eigenvectors, lam)),
            ..solver
        }
    } else {
        solver
    };
    run(&solver)
}

fn run(sv: &Solver) -> Result<ConicSolution> {
    let s = sv.settings;
    let (mm, dim) = sv.k.shape();
    let n = sv.n;
    let kkt = &sv.k * sv.k.transpose();
    let mut gram = kkt.clone();
    for i in 0..mm {
        gram[(i, i)] += 1.0;
    }
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(gram).ok_or_else(|| Error::Numerical("I + K K^T is not positive definite".into()))?;

    let alpha = s.relaxation;
    let mut rho = 1.0;
    let mut x = DVector::zeros(dim);
    let mut w = DVector::zeros(mm);
    let mut a = DVector::zeros(dim);
    let mut b = DVector::zeros(mm);
    let mut last_cert = None;

    for it in 1..=s.max_iter {
        let d = &x - &a;
        let e = &w - &b;
        let rhs = &sv.k * &d + &kkt * &e;
        let eta = chol.solve(&rhs);
        let xi = &d + sv.k.tr_mul(&(&e - &eta));
        let xh = &xi * alpha + &x * (1.0 - alpha);
        let wh = &eta * alpha + &w * (1.0 - alpha);
        let x_old = std::mem::replace(&mut x, &xh + &a);
        let w_old = std::mem::replace(&mut w, &wh + &b);

        let thr = sv.weight / rho;
        for j in 0..n {
            x[j] = soft(x[j], thr);
        }
        if sv.pn > 0 {
            project_ball(x.rows_mut(n, sv.pn).as_mut_slice(), sv.tau2);
        }
        w -= &sv.c;
        project_ball(w.as_mut_slice(), sv.tau1);
        w += &sv.c;

        a += &xh - &x;
        b += &wh - &w;

        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("iterate diverged at iteration {it}")));
        }

        if it % 10 == 0 {
            let rp = ((&xi - &x).norm_squared() + (&eta - &w).norm_squared()).sqrt();
            let rd = rho * ((&x - &x_old).norm_squared() + (&w - &w_old).norm_squared()).sqrt();
            if rp > 10.0 * rd {
                rho *= 2.0;
                a /= 2.0;
                b /= 2.0;
            } else if rd > 10.0 * rp {
                rho /= 2.0;
                a *= 2.0;
                b *= 2.0;
            }
        }

        if it % s.polish_every == 0 || it == s.max_iter {
            let (z, nu) = sv.split(&x);
            let cert = sv.certify(&z, &nu, None);
            if sv.accepts(&cert) {
                return Ok(sv.solution(&x, &cert, it, true, false));
            }
            if let Some((full, pc)) = sv.try_polish(&x) {
                return Ok(sv.solution(&full, &pc, it, true, true));
            }
            last_cert = Some(cert);
        }
    }

    let cert = last_cert.expect("at least one certification pass");
    infeasibility_check(sv)?;
    Ok(sv.solution(&x, &cert, s.max_iter, false, false))
}

/// Errors when `c` is farther from the reachable set than both radii allow.
fn infeasibility_check(sv: &Solver) -> Result<()> {
    let kz = sv.zcols().into_owned();
    let (mm, n) = kz.shape();
    if n >= mm {
        // Generic full row rank: every c is reachable.
        let svd = kz.clone().svd(false, false);
        let smin = svd.singular_values.min();
        if smin > 1e-10 * svd.singular_values.max() {
            return Ok(());
        }
    }
    let svd = kz.svd(true, false);
    let u = svd.u.expect("requested U");
    let tol = 1e-10 * svd.singular_values.max();
    let mut proj = DVector::zeros(mm);
    for (i, sv_) in svd.singular_values.iter().enumerate() {
        if *sv_ > tol {
            let col = u.column(i);
            proj += col * col.dot(&sv.c);
        }
    }
    let dist = (&sv.c - proj).norm();
    let reach = if sv.pn > 0 { sv.tau2 * sv.k.columns(n, sv.pn).norm() } else { 0.0 };
    let excess = dist - sv.tau1 - reach;
    if excess > 1e-9 * (1.0 + sv.c.norm()) {
        return Err(Error::Infeasible {
            certificate: excess * sv.scale,
        });
    }
    Ok(())
}
