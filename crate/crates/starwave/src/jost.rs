//! Jost solutions of -f'' + V f = z^2 f on one branch, via Picard iteration
//! of the Volterra equations for m_{+} and m_{-}, and the scattering data
//! they determine.

use crate::error::{Error, Result};
use crate::netmodel::{NetworkSpec, PotentialSpec, DEFAULT_TAIL_TOL};
use crate::numerics::{gauss_legendre, interp_cubic, lagrange4, omega_constant, stencil_start};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct JostOptions {
    pub volterra_tol: f64,
    pub max_iter: usize,
    pub tail_tol: f64,
    pub class_tol: f64,
    pub assume_tol: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions { volterra_tol: 1e-10, max_iter: 200, tail_tol: DEFAULT_TAIL_TOL, class_tol: 1e-8, assume_tol: 1e-8 }
    }
}

/// sqrt with the branch cut on the negative real axis and Im >= 0 on it.
pub fn sqrt_plus(w: C64) -> C64 {
    let (r, mut phi) = w.to_polar();
    if phi >= std::f64::consts::PI {
        phi -= 2.0 * std::f64::consts::PI;
    }
    if w.im == 0.0 && w.re < 0.0 {
        return C64::new(0.0, (-w.re).sqrt());
    }
    C64::from_polar(r.sqrt(), 0.5 * phi)
}

#[derive(Clone, Copy, Debug)]
struct QPoint {
    u: f64,
    wv: f64,
    l: [f64; 4],
}

/// z-independent quadrature data for one branch.
#[derive(Clone, Debug)]
pub struct BranchSolver {
    pub x: Arc<Vec<f64>>,
    pub potential: PotentialSpec,
    /// Nodes with index > active carry no potential.
    pub active: usize,
    starts: Vec<usize>,
    offsets: Vec<usize>,
    points: Vec<QPoint>,
    cb: Vec<[f64; 4]>,
    pub opts: JostOptions,
}

/// Sampled Jost data on one branch at one spectral point.
#[derive(Clone, Debug)]
pub struct JostSolution {
    pub branch: usize,
    pub z: C64,
    pub sign: Sign,
    pub x: Arc<Vec<f64>>,
    pub m: Vec<C64>,
    pub dm: Vec<C64>,
    pub f: Vec<C64>,
    pub df: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    /// For sign +: int V m_+ and int e^{2izy} V m_+; for sign -: the
    /// coefficients (A, B) with f_- = A e^{-izx} + B e^{izx} beyond the support.
    pub moments: (C64, C64),
}

impl JostSolution {
    pub fn m_at(&self, x: f64) -> C64 {
        if x <= 0.0 && self.sign == Sign::Minus {
            return C64::new(1.0, 0.0);
        }
        interp_cubic(&self.x, &self.m, x)
    }
    pub fn f_at(&self, x: f64) -> C64 {
        (I * self.z * self.sign.as_f64() * x).exp() * self.m_at(x)
    }
    pub fn f0(&self) -> C64 {
        self.f[0]
    }
    pub fn df0(&self) -> C64 {
        self.df[0]
    }
}

impl BranchSolver {
    pub fn new(x: Arc<Vec<f64>>, potential: PotentialSpec, opts: JostOptions) -> Self {
        let n = x.len();
        let zero = potential.is_zero();
        let active = if zero {
            0
        } else {
            let end = potential.support_end(1e-17 * (1.0 + potential.gamma_integral()));
            match x.iter().position(|&xi| xi >= end) {
                Some(k) => k.max(3).min(n - 1),
                None => n - 1,
            }
        };
        let (gx, gw) = gauss_legendre(4);
        let bps = potential.breakpoints();
        let mut starts = Vec::with_capacity(active);
        let mut offsets = Vec::with_capacity(active + 1);
        let mut points = Vec::new();
        let mut cb = Vec::with_capacity(active);
        offsets.push(0);
        for i in 0..active {
            let (a, b) = (x[i], x[i + 1]);
            let s = stencil_start(i, active);
            let xs = [x[s], x[s + 1], x[s + 2], x[s + 3]];
            let mut cuts = vec![a];
            for &p in &bps {
                if p > a && p < b {
                    cuts.push(p);
                }
            }
            cuts.push(b);
            let mut acc = [0.0; 4];
            for c in cuts.windows(2) {
                let mid = 0.5 * (c[0] + c[1]);
                let h = 0.5 * (c[1] - c[0]);
                for (gxi, gwi) in gx.iter().zip(&gw) {
                    let y = mid + h * gxi;
                    let wv = gwi * h * potential.eval(y);
                    let l = lagrange4(&xs, y);
                    for k in 0..4 {
                        acc[k] += wv * l[k];
                    }
                    points.push(QPoint { u: y - a, wv, l });
                }
            }
            starts.push(s);
            offsets.push(points.len());
            cb.push(acc);
        }
        BranchSolver { x, potential, active, starts, offsets, points, cb, opts }
    }

    pub fn is_free(&self) -> bool {
        self.active == 0
    }

    /// Solve for m_{sign}(z, .) on the grid.
    pub fn solve(&self, branch: usize, z: C64, sign: Sign) -> Result<JostSolution> {
        self.solve_tol(branch, z, sign, self.opts.volterra_tol)
    }

    pub fn solve_tol(&self, branch: usize, z: C64, sign: Sign, tol: f64) -> Result<JostSolution> {
        if z.im < 0.0 {
            return Err(Error::Domain(format!("Im z must be >= 0, got {z}")));
        }
        let n = self.x.len();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut m = vec![one; n];
        let mut dm = vec![zero; n];
        let mut iterations = 1;
        let mut residual = 0.0;
        let two_iz = 2.0 * I * z;
        let mut moments = (zero, zero);
        if !self.is_free() {
            let act = self.active;
            // per-interval coefficient vectors on the stencil
            let mut ci = vec![[zero; 4]; act];
            let mut ca = vec![[zero; 4]; act];
            let mut e = vec![zero; act];
            let mut dh = vec![zero; act];
            for i in 0..act {
                let h = self.x[i + 1] - self.x[i];
                let (dd, ee) = d_and_e(two_iz, h);
                e[i] = ee;
                dh[i] = dd;
                for p in &self.points[self.offsets[i]..self.offsets[i + 1]] {
                    let u = match sign {
                        Sign::Plus => p.u,
                        Sign::Minus => h - p.u,
                    };
                    let (d, ex) = d_and_e(two_iz, u);
                    for k in 0..4 {
                        ci[i][k] += d * (p.wv * p.l[k]);
                        ca[i][k] += ex * (p.wv * p.l[k]);
                    }
                }
            }
            let dot = |c: &[C64; 4], m: &[C64], s: usize| c[0] * m[s] + c[1] * m[s + 1] + c[2] * m[s + 2] + c[3] * m[s + 3];
            let dotr = |c: &[f64; 4], m: &[C64], s: usize| m[s] * c[0] + m[s + 1] * c[1] + m[s + 2] * c[2] + m[s + 3] * c[3];
            let mut converged = false;
            iterations = 0;
            while iterations < self.opts.max_iter {
                iterations += 1;
                let mut change = 0.0f64;
                match sign {
                    Sign::Plus => {
                        let (mut ii, mut bb, mut aa) = (zero, zero, zero);
                        for i in (0..act).rev() {
                            let s = self.starts[i];
                            let li = dot(&ci[i], &m, s);
                            let lb = dotr(&self.cb[i], &m, s);
                            let la = dot(&ca[i], &m, s);
                            ii = li + e[i] * ii + dh[i] * bb;
                            bb += lb;
                            aa = la + e[i] * aa;
                            let new = one + ii;
                            change = change.max((new - m[i]).norm());
                            m[i] = new;
                            dm[i] = -aa;
                        }
                        moments = (bb, aa);
                    }
                    Sign::Minus => {
                        let (mut jj, mut bb, mut aa) = (zero, zero, zero);
                        for i in 0..act {
                            let s = self.starts[i];
                            let lj = dot(&ci[i], &m, s);
                            let lb = dotr(&self.cb[i], &m, s);
                            let la = dot(&ca[i], &m, s);
                            jj = e[i] * jj + dh[i] * bb + lj;
                            bb += lb;
                            aa = e[i] * aa + la;
                            let new = one + jj;
                            change = change.max((new - m[i + 1]).norm());
                            m[i + 1] = new;
                            dm[i + 1] = aa;
                        }
                        moments = (jj, bb);
                    }
                }
                residual = change;
                if change < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NonConvergence { iterations, residual });
            }
            if sign == Sign::Minus {
                // free continuation beyond the support
                let (mut jj, bb) = moments;
                let mut aa = dm[act];
                for i in act..n - 1 {
                    let h = self.x[i + 1] - self.x[i];
                    let (d, ee) = d_and_e(two_iz, h);
                    jj = ee * jj + d * bb;
                    aa = ee * aa;
                    m[i + 1] = one + jj;
                    dm[i + 1] = aa;
                }
            }
        }
        if sign == Sign::Minus {
            let xe = self.x[n - 1];
            let b = if z == zero { zero } else { dm[n - 1] / two_iz * (-two_iz * xe).exp() };
            let a = if z == zero { m[n - 1] } else { m[n - 1] - dm[n - 1] / two_iz };
            moments = (a, b);
        }
        let sg = sign.as_f64();
        let mut f = Vec::with_capacity(n);
        let mut df = Vec::with_capacity(n);
        for k in 0..n {
            let ph = (I * z * sg * self.x[k]).exp();
            f.push(ph * m[k]);
            df.push(ph * (I * z * sg * m[k] + dm[k]));
        }
        Ok(JostSolution { branch, z, sign, x: self.x.clone(), m, dm, f, df, iterations, residual, moments })
    }
}

/// D(u) = (e^{wu} - 1)/w and e^{wu} for w = 2iz.
#[inline]
fn d_and_e(w: C64, u: f64) -> (C64, C64) {
    let a = w * u;
    if a.norm() < 0.5 {
        (u * crate::numerics::phi1(a), a.exp())
    } else {
        let e = a.exp();
        ((e - 1.0) / w, e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Generic,
    Exceptional,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringData {
    pub branch: usize,
    pub z: Vec<f64>,
    pub t: Vec<C64>,
    pub r2: Vec<C64>,
    pub r1: Vec<C64>,
    pub unitarity_defect: Vec<f64>,
    /// |A - 1/T| where A is read off the far-field form of f_-.
    pub far_field_mismatch: Vec<f64>,
    pub nu: C64,
    pub gamma_coef: C64,
    pub classification: Classification,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZeroEnergy {
    pub nu: C64,
    pub gamma_coef: C64,
    pub classification: Classification,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointScattering {
    pub z: C64,
    pub inv_t: C64,
    pub r2_over_t: C64,
    pub t: C64,
    pub r2: C64,
}

/// Jost machinery for a whole network.
#[derive(Clone, Debug)]
pub struct Network {
    pub spec: NetworkSpec,
    pub x: Arc<Vec<f64>>,
    pub branches: Vec<BranchSolver>,
    pub opts: JostOptions,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        Self::with_options(spec, JostOptions::default())
    }

    pub fn with_options(spec: NetworkSpec, opts: JostOptions) -> Result<Self> {
        spec.validate()?;
        spec.check_tail(opts.tail_tol)?;
        let x = spec.nodes();
        let branches = spec.potentials.iter().map(|p| BranchSolver::new(x.clone(), p.clone(), opts)).collect();
        Ok(Network { spec, x, branches, opts })
    }

    pub fn n(&self) -> usize {
        self.branches.len()
    }

    pub fn solve_m(&self, j: usize, z: C64, sign: Sign) -> Result<JostSolution> {
        self.branches[j].solve(j, z, sign)
    }

    /// 1/T and R2/T at one point (z != 0).
    pub fn point_scattering(&self, j: usize, z: C64) -> Result<PointScattering> {
        let s = self.solve_m(j, z, Sign::Plus)?;
        Ok(point_from_plus(&s))
    }

    pub fn zero_energy(&self, j: usize) -> Result<ZeroEnergy> {
        let s = self.solve_m(j, C64::new(0.0, 0.0), Sign::Plus)?;
        let nu = s.moments.0;
        let gamma_coef = s.m[0];
        let l1 = self.spec.potentials[j].weighted_norm(0.0)?;
        let classification =
            if nu.norm() < self.opts.class_tol * (1.0 + l1) { Classification::Exceptional } else { Classification::Generic };
        if classification == Classification::Generic && nu.norm() < 1e3 * self.opts.class_tol * (1.0 + l1) {
            log::warn!("branch {j}: nearly exceptional potential, |nu| = {:.3e}", nu.norm());
        }
        Ok(ZeroEnergy { nu, gamma_coef, classification })
    }

    pub fn scattering(&self, j: usize, z_grid: &[f64]) -> Result<ScatteringData> {
        let ze = self.zero_energy(j)?;
        let n = z_grid.len();
        let mut out = ScatteringData {
            branch: j,
            z: z_grid.to_vec(),
            t: Vec::with_capacity(n),
            r2: Vec::with_capacity(n),
            r1: Vec::with_capacity(n),
            unitarity_defect: Vec::with_capacity(n),
            far_field_mismatch: Vec::with_capacity(n),
            nu: ze.nu,
            gamma_coef: ze.gamma_coef,
            classification: ze.classification,
        };
        let rows: Vec<Result<(C64, C64, C64, f64)>> = crate::par_map(z_grid, |&zr| self.scattering_row(j, zr, &ze));
        for r in rows {
            let (t, r2, r1, mism) = r?;
            out.unitarity_defect.push((t.norm_sqr() + r2.norm_sqr() - 1.0).abs());
            out.t.push(t);
            out.r2.push(r2);
            out.r1.push(r1);
            out.far_field_mismatch.push(mism);
        }
        Ok(out)
    }

    fn scattering_row(&self, j: usize, zr: f64, ze: &ZeroEnergy) -> Result<(C64, C64, C64, f64)> {
        if zr == 0.0 {
            if ze.classification == Classification::Generic {
                return Ok((C64::new(0.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0), 0.0));
            }
            // exceptional: 1/T and R2/T have finite limits given by z-derivatives
            let d = 1e-5;
            let p = self.solve_m(j, C64::new(d, 0.0), Sign::Plus)?;
            let q = self.solve_m(j, C64::new(-d, 0.0), Sign::Plus)?;
            let db = (p.moments.0 - q.moments.0) / (2.0 * d);
            let da = (p.moments.1 - q.moments.1) / (2.0 * d);
            let inv_t = 1.0 - db / (2.0 * I);
            let r2t = da / (2.0 * I);
            let t = 1.0 / inv_t;
            let r1a = self.far_field(j, d)?.0;
            let r1b = self.far_field(j, -d)?.0;
            return Ok((t, r2t * t, 0.5 * (r1a + r1b), 0.0));
        }
        let s = self.solve_m(j, C64::new(zr, 0.0), Sign::Plus)?;
        let ps = point_from_plus(&s);
        if ps.inv_t.norm() < 1e-12 {
            return Err(Error::PoleProximity(ps.inv_t.norm(), format!("{zr}")));
        }
        let (r1, a) = self.far_field(j, zr)?;
        Ok((ps.t, ps.r2, r1, (a - ps.inv_t).norm()))
    }

    /// R1 and the incoming amplitude A read off from f_- = A e^{-izx} + B e^{izx}.
    fn far_field(&self, j: usize, zr: f64) -> Result<(C64, C64)> {
        let s = self.solve_m(j, C64::new(zr, 0.0), Sign::Minus)?;
        let (a, b) = s.moments;
        Ok((b / a, a))
    }

    pub fn check_assumption(&self) -> Result<Vec<AssumptionReport>> {
        let rho = omega_constant();
        (0..self.n())
            .map(|j| {
                let s = self.solve_m(j, C64::new(0.0, 0.0), Sign::Plus)?;
                let gamma_coef = s.m[0];
                let gamma_quad = C64::new(1.0, 0.0) + first_moment(&self.branches[j], &s.m);
                let p = &self.spec.potentials[j];
                let x_abs = moment_abs(p);
                Ok(AssumptionReport {
                    branch: j,
                    gamma_coef,
                    gamma_quadrature: gamma_quad,
                    holds: gamma_coef.norm() > self.opts.assume_tol,
                    first_moment_abs: x_abs,
                    small_moment: x_abs <= rho,
                    nonnegative: nonnegative(p),
                })
            })
            .collect()
    }

    /// d m_{j,+}/dz at (z, x) by a central difference with relative step.
    pub fn dm_dz(&self, j: usize, z: C64, x: f64, rel_step: f64) -> Result<C64> {
        let h = if z.norm() > 0.0 { rel_step * z.norm() } else { rel_step };
        let tol = 1e-14;
        let p = self.branches[j].solve_tol(j, z + h, Sign::Plus, tol)?;
        let q = self.branches[j].solve_tol(j, z - h, Sign::Plus, tol)?;
        Ok((p.m_at(x) - q.m_at(x)) / (2.0 * h))
    }

    /// Empirical min and max of |f_{j,+}(z,0)| over a rectangular band.
    pub fn vertex_value_band(&self, j: usize, r0: f64, kappa: f64, n_re: usize, n_im: usize) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for a in 0..n_re {
            for b in 0..n_im {
                let zr = -r0 + 2.0 * r0 * a as f64 / (n_re - 1).max(1) as f64;
                let zi = kappa * b as f64 / (n_im - 1).max(1) as f64;
                let s = self.solve_m(j, C64::new(zr, zi), Sign::Plus)?;
                let v = s.f[0].norm();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }
}

fn point_from_plus(s: &JostSolution) -> PointScattering {
    let two_iz = 2.0 * I * s.z;
    let inv_t = 1.0 - s.moments.0 / two_iz;
    let r2_over_t = s.moments.1 / two_iz;
    let t = 1.0 / inv_t;
    PointScattering { z: s.z, inv_t, r2_over_t, t, r2: r2_over_t * t }
}

/// int x V(x) m(x) dx using the branch quadrature points.
fn first_moment(b: &BranchSolver, m: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..b.active {
        let s = b.starts[i];
        for p in &b.points[b.offsets[i]..b.offsets[i + 1]] {
            let y = b.x[i] + p.u;
            let mv = m[s] * p.l[0] + m[s + 1] * p.l[1] + m[s + 2] * p.l[2] + m[s + 3] * p.l[3];
            acc += mv * (p.wv * y);
        }
    }
    acc
}

fn moment_abs(p: &PotentialSpec) -> f64 {
    // int x|V| = int (1+x)|V| - int |V|
    p.gamma_integral() - p.weighted_norm(0.0).unwrap_or(f64::INFINITY)
}

fn nonnegative(p: &PotentialSpec) -> bool {
    use crate::netmodel::PotentialKind::*;
    match &p.kind {
        Zero => true,
        ExpDecay { amplitude, .. } => *amplitude >= 0.0,
        SquareBump { height, .. } => *height >= 0.0,
        GaussianBump { amplitude, .. } => *amplitude >= 0.0,
        Table { values, .. } => values.iter().all(|v| *v >= 0.0),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssumptionReport {
    pub branch: usize,
    pub gamma_coef: C64,
    pub gamma_quadrature: C64,
    pub holds: bool,
    pub first_moment_abs: f64,
    pub small_moment: bool,
    pub nonnegative: bool,
}

/// Defect -u'' + V u - z^2 u by second differences, in the L^2 sense over interior
/// nodes whose stencil does not straddle a breakpoint of V. Returns the defect and the
/// norm of (V - z^2) u, the size of the terms that should cancel against u''.
pub fn ode_defect(x: &[f64], u: &[C64], v: &PotentialSpec, z2: C64) -> (f64, f64) {
    let bps = v.breakpoints();
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 1..x.len() - 1 {
        if bps.iter().any(|&p| p > x[i - 1] && p < x[i + 1]) || bps.iter().any(|&p| p == x[i]) {
            continue;
        }
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let d2 = 2.0 * ((u[i + 1] - u[i]) / hp - (u[i] - u[i - 1]) / hm) / (hp + hm);
        let r = -d2 + (v.eval(x[i]) - z2) * u[i];
        let w = 0.5 * (hp + hm);
        err += w * r.norm_sqr();
        scale += w * ((v.eval(x[i]) - z2) * u[i]).norm_sqr();
    }
    (err.sqrt(), scale.sqrt())
}
