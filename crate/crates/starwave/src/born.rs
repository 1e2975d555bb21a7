//! High-frequency analysis: the free kernel, the cutoff family and the Born series.

fn psi(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / s).exp();
    let s2 = s * s;
    (e, e / s2, e * (1.0 / (s2 * s2) - 2.0 / (s2 * s)))
}

/// The plateau phi: 1 on [-1, 1], 0 off (-2, 2), C-infinity, with its first two derivatives.
pub fn phi_derivs(lambda: f64) -> (f64, f64, f64) {
    let s = lambda.abs();
    if s <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let (u, du, ddu) = psi(2.0 - s);
    let (v, dv, ddv) = psi(s - 1.0);
    // derivatives in s: u' = -psi'(2 - s), u'' = psi''(2 - s)
    let (du, ddu) = (-du, ddu);
    let d = u + v;
    let dd = du + dv;
    let num = du * v - u * dv;
    let dnum = ddu * v - u * ddv;
    let p = u / d;
    let p1 = num / (d * d);
    let p2 = (dnum * d - 2.0 * num * dd) / (d * d * d);
    let sg = lambda.signum();
    (p, sg * p1, p2)
}

pub fn phi(lambda: f64) -> f64 {
    phi_derivs(lambda).0
}

use crate::error::{Error, Result};
use crate::netmodel::{NetworkFunction, NetworkSpec, PotentialSpec};
use crate::numerics::{fourier_l1_norm, gauss_legendre, phi1, phi2};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// 1 - phi(lambda / lambda0).
pub fn theta(lambda: f64, lambda0: f64) -> f64 {
    1.0 - phi(lambda / lambda0)
}

/// (1 - phi(lambda / lambda0)) phi(lambda / l).
pub fn theta_l(lambda: f64, lambda0: f64, l: f64) -> f64 {
    theta(lambda, lambda0) * phi(lambda / l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Plus,
    Minus,
}

/// Free kernel K0(x_j, x'_k, lambda +- i0) on the N-star; the cross-branch phase uses x + x'.
pub fn free_kernel(n: usize, j: usize, x: f64, k: usize, xp: f64, lambda: f64, side: Side) -> Result<C64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("free kernel needs lambda > 0, got {lambda}")));
    }
    if n < 2 {
        return Err(Error::Config("a star needs at least two branches".into()));
    }
    let s = if side == Side::Plus { 1.0 } else { -1.0 };
    let r = lambda.sqrt();
    let pre = -s * I / (n as f64 * r);
    let nf = n as f64;
    let v = if j == k {
        (1.0 - nf / 2.0) * C64::from_polar(1.0, s * (x + xp) * r) + nf / 2.0 * C64::from_polar(1.0, s * (x - xp).abs() * r)
    } else {
        C64::from_polar(1.0, s * (x + xp) * r)
    };
    Ok(pre * v)
}

/// (N - 1) / (N sqrt(lambda)).
pub fn free_kernel_bound(n: usize, lambda: f64) -> f64 {
    (n as f64 - 1.0) / (n as f64 * lambda.sqrt())
}

/// The plateau function behind the cutoff family.
#[derive(Clone)]
pub enum Bump {
    Standard,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Bump {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bump::Standard => write!(f, "Standard"),
            Bump::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Bump {
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Bump::Standard => phi(lambda),
            Bump::Custom(g) => g(lambda),
        }
    }

    /// Checks plateau, support and range on a sample grid.
    pub fn validate(&self) -> Result<()> {
        for i in 0..=4000 {
            let l = -3.0 + 6.0 * i as f64 / 4000.0;
            let v = self.eval(l);
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Config(format!("bump leaves [0, 1] at {l}: {v}")));
            }
            if l.abs() <= 1.0 && (v - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("bump is not 1 at {l}: {v}")));
            }
            if l.abs() >= 2.0 && v.abs() > 1e-12 {
                return Err(Error::Config(format!("bump is not 0 at {l}: {v}")));
            }
        }
        Ok(())
    }

    /// sup|phi| + sup|phi'| + sup|phi''|.
    pub fn c2_norm(&self) -> Result<f64> {
        match self {
            Bump::Standard => {
                let (mut d1, mut d2) = (0.0f64, 0.0f64);
                let n = 200_000;
                for i in 0..=n {
                    let (_, a, b) = phi_derivs(1.0 + i as f64 / n as f64);
                    d1 = d1.max(a.abs());
                    d2 = d2.max(b.abs());
                }
                Ok(1.0 + d1 + d2)
            }
            Bump::Custom(_) => {
                let sup = |h: f64| {
                    let (mut d1, mut d2) = (0.0f64, 0.0f64);
                    let n = (1.2 / h) as usize;
                    for i in 0..=n {
                        let l = 0.9 + i as f64 * h;
                        let (a, b, c) = (self.eval(l - h), self.eval(l), self.eval(l + h));
                        d1 = d1.max((c - a).abs() / (2.0 * h));
                        d2 = d2.max((c - 2.0 * b + a).abs() / (h * h));
                    }
                    (d1, d2)
                };
                let (a1, a2) = sup(2e-3);
                let (b1, b2) = sup(1e-3);
                if !(b2.is_finite() && b2 < 1.5 * a2 + 1e-6 && b1 < 1.5 * a1 + 1e-6) {
                    return Err(Error::Config(format!(
                        "bump is not C2: second differences grow from {a2:.3e} to {b2:.3e} under refinement"
                    )));
                }
                Ok(1.0 + b1 + b2)
            }
        }
    }
}

/// phi, the band window and the constants N1, N2, M, c(n), with the measured
/// norms ||[Theta_L(lambda^2) lambda^-n]^v||_1 (unitary inverse Fourier transform).
#[derive(Clone, Debug, Serialize)]
pub struct CutoffFamily {
    #[serde(skip)]
    pub phi: Bump,
    pub lambda0: f64,
    pub l: f64,
    pub n1: f64,
    pub n2: f64,
    pub m: f64,
    pub c: Vec<f64>,
    /// measured norms with lambda^-n
    pub norms: Vec<f64>,
    /// measured norms with |lambda|^-n
    pub abs_norms: Vec<f64>,
    /// c(n) lambda0^{-n/2} / measured norm
    pub margins: Vec<f64>,
    /// whether c(n) <= M n for every n >= 1
    pub linear_bound_holds: bool,
}

impl CutoffFamily {
    pub fn window(&self, lambda: f64) -> f64 {
        (1.0 - self.phi.eval(lambda / self.lambda0)) * self.phi.eval(lambda / self.l)
    }

    pub fn bound(&self, n: usize) -> f64 {
        self.c[n] * self.lambda0.powf(-(n as f64) / 2.0)
    }

    pub fn bounds_hold(&self) -> bool {
        self.margins.iter().all(|&m| m >= 1.0)
    }

    pub fn mu_range(&self) -> (f64, f64) {
        (self.lambda0.sqrt(), (2.0 * self.l).sqrt())
    }
}

const FOURIER_SAMPLES: usize = 1 << 15;

pub fn c_constants(n1: f64, n2: f64, n_max: usize) -> (Vec<f64>, f64) {
    let a = n1 + n1 * n1;
    let k = 32.0 * 2f64.sqrt();
    let c = (0..=n_max)
        .map(|n| match n {
            0 => a,
            1 => 2.0 * a + k * n2,
            _ => 4.0 / (n as f64 - 1.0) + k * n2 * n as f64,
        })
        .collect();
    (c, k * a.max(n2))
}

pub fn cutoff_constants(lambda0: f64, l: f64, n_max: usize) -> Result<CutoffFamily> {
    cutoff_constants_with(Bump::Standard, lambda0, l, n_max)
}

pub fn cutoff_constants_with(bump: Bump, lambda0: f64, l: f64, n_max: usize) -> Result<CutoffFamily> {
    if !(lambda0 >= 1.0) || !(l > 2.0 * lambda0) {
        return Err(Error::Config(format!("cutoff family needs lambda0 >= 1 and L > 2 lambda0, got {lambda0}, {l}")));
    }
    bump.validate()?;
    let n2 = bump.c2_norm()?;
    let n1 = fourier_l1_norm(&|x| bump.eval(x * x), 2f64.sqrt(), FOURIER_SAMPLES).value;
    let (c, m) = c_constants(n1, n2, n_max);
    let top = (2.0 * l).sqrt();
    let win = |x: f64| (1.0 - bump.eval(x * x / lambda0)) * bump.eval(x * x / l);
    let mut norms = Vec::with_capacity(n_max + 1);
    let mut abs_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let p = n as i32;
        let r = fourier_l1_norm(&|x| if x == 0.0 { 0.0 } else { win(x) * x.powi(-p) }, top, FOURIER_SAMPLES);
        if r.aliased {
            return Err(Error::Quadrature(format!("Fourier norm for n = {n} is under-resolved")));
        }
        norms.push(r.value);
        abs_norms.push(if n % 2 == 0 {
            r.value
        } else {
            fourier_l1_norm(&|x| if x == 0.0 { 0.0 } else { win(x) * x.abs().powi(-p) }, top, FOURIER_SAMPLES).value
        });
    }
    let margins = (0..=n_max).map(|n| c[n] * lambda0.powf(-(n as f64) / 2.0) / norms[n]).collect();
    let linear_bound_holds = (1..=n_max).all(|n| c[n] <= m * n as f64);
    Ok(CutoffFamily { phi: bump, lambda0, l, n1, n2, m, c, norms, abs_norms, margins, linear_bound_holds })
}

/// sup over `ds` of |int e^{i(t mu^2 + d mu)} Theta_L(mu^2) mu^-k dmu| over the real line.
pub fn s_k(family: &CutoffFamily, k: usize, t: f64, ds: &[f64]) -> f64 {
    let (a, b) = family.mu_range();
    let (gx, gw) = gauss_legendre(8);
    ds.iter()
        .map(|&d| {
            let rate = 2.0 * t.abs() * b + d.abs() + 1.0;
            let width = (4.0 / rate).min(0.25);
            let panels = ((b - a) / width).ceil() as usize;
            let h = (b - a) / panels as f64;
            let mut s = C64::new(0.0, 0.0);
            for p in 0..panels {
                let c = a + (p as f64 + 0.5) * h;
                for q in 0..8 {
                    let mu = c + 0.5 * h * gx[q];
                    let w = 0.5 * h * gw[q] * family.window(mu * mu) * mu.powi(-(k as i32));
                    // mu and -mu together
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    s += w * (C64::from_polar(1.0, t * mu * mu + d * mu) + sign * C64::from_polar(1.0, t * mu * mu - d * mu));
                }
            }
            s.norm()
        })
        .fold(0.0, f64::max)
}

pub const K_MAX_CAP: usize = 16;

#[derive(Clone, Debug, Serialize)]
pub struct BornParams {
    pub q_star: f64,
    pub lambda_star: f64,
    pub v_l1: f64,
    pub n_branches: usize,
    /// fixed truncation; chosen from the tail bound when None
    pub k_max: Option<usize>,
    pub series_tol: f64,
    /// step of the uniform x grid
    pub h: f64,
    /// width and order of the Chebyshev panels sampling the mu dependence
    pub panel_width: f64,
    pub cheb_order: usize,
    /// |V| below this is cut
    pub support_tol: f64,
    #[serde(skip)]
    pub potentials: Vec<PotentialSpec>,
}

impl BornParams {
    pub fn new(spec: &NetworkSpec, q_star: f64) -> Result<Self> {
        if !(q_star > 0.0 && q_star < 1.0) {
            return Err(Error::Config(format!("q_star must lie in (0, 1), got {q_star}")));
        }
        let n = spec.potentials.len();
        let v_l1 = spec.l1_norm();
        let nf = n as f64;
        let lambda_star = 4.0 * (nf - 1.0).powi(2) * v_l1 * v_l1 / (nf * nf * q_star * q_star);
        Ok(BornParams {
            q_star,
            lambda_star,
            v_l1,
            n_branches: n,
            k_max: None,
            series_tol: 1e-8,
            h: 5e-3,
            panel_width: 0.125,
            cheb_order: 16,
            support_tol: 1e-13,
            potentials: spec.potentials.clone(),
        })
    }

    pub fn with_k_max(mut self, k: usize) -> Self {
        self.k_max = Some(k);
        self
    }

    /// (N - 1) ||V||_1 / (N sqrt(lambda)).
    pub fn q(&self, lambda: f64) -> f64 {
        let nf = self.n_branches as f64;
        (nf - 1.0) * self.v_l1 / (nf * lambda.sqrt())
    }

    pub fn check(&self, lambda0: f64) -> Result<()> {
        if !(lambda0 > self.lambda_star) {
            return Err(Error::SeriesPrecondition { lambda0, required: self.lambda_star });
        }
        Ok(())
    }

    /// Smallest k with q^{k+1}/(1 - q) below the series tolerance, capped at K_MAX_CAP.
    pub fn truncation(&self, lambda0: f64) -> Result<usize> {
        if let Some(k) = self.k_max {
            return Ok(k);
        }
        let q = self.q(lambda0);
        if self.v_l1 == 0.0 {
            return Ok(0);
        }
        for k in 0..=K_MAX_CAP {
            if q.powi(k as i32 + 1) / (1.0 - q) < self.series_tol {
                return Ok(k);
            }
        }
        Err(Error::Quality(format!(
            "Born tail q = {q:.3} needs more than {K_MAX_CAP} terms for tolerance {:.1e}",
            self.series_tol
        )))
    }

    pub fn tail_bound(&self, lambda0: f64, k_max: usize) -> f64 {
        let q = self.q(lambda0);
        q.powi(k_max as i32 + 1) / (1.0 - q)
    }

    /// M (N - 1) / (N (1 - q_*)^2).
    pub fn b_constant(&self, family: &CutoffFamily) -> f64 {
        let nf = self.n_branches as f64;
        family.m * (nf - 1.0) / (nf * (1.0 - self.q_star).powi(2))
    }
}

/// Uniform grid and sampled data for the iterated free kernels.
struct BornGrid {
    h: f64,
    x: Vec<f64>,
    v: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

fn sample(fun: &NetworkFunction, x: &[f64]) -> Vec<Vec<f64>> {
    let last = *fun.x.last().unwrap();
    fun.values
        .iter()
        .map(|b| {
            x.iter()
                .map(|&y| if y > last { 0.0 } else { crate::numerics::interp_cubic(&fun.x, b, y).re })
                .collect()
        })
        .collect()
}

impl BornGrid {
    fn new(f: &NetworkFunction, g: &NetworkFunction, params: &BornParams) -> Result<Self> {
        let n = params.n_branches;
        if f.n_branches() != n || g.n_branches() != n {
            return Err(Error::Config("data and potential have different branch counts".into()));
        }
        if !f.is_real() || !g.is_real() {
            return Err(Error::Config("the Born pairing needs real data".into()));
        }
        let vend = params.potentials.iter().map(|p| p.support_end(params.support_tol)).fold(0.0, f64::max);
        let end = vend.max(crate::propagate::support_end(f)).max(crate::propagate::support_end(g));
        if end == 0.0 {
            return Err(Error::Config("data vanish identically".into()));
        }
        let cells = (end / params.h).ceil().max(4.0) as usize;
        let h = end / cells as f64;
        let x: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let v = params.potentials.iter().map(|p| x.iter().map(|&y| p.eval(y)).collect()).collect();
        Ok(BornGrid { h, f: sample(f, &x), g: sample(g, &x), x, v })
    }
}

/// One wave component c(x) e^{i nu mu x}, nu in {-1, 0, 1}, on every branch.
struct Wave {
    nu: i32,
    c: Vec<Vec<C64>>,
}

struct Phases {
    /// e^{i m mu x_i} for m = -2..=2
    p: [Vec<C64>; 5],
    /// linear-interpolant cell weights for each m
    w: [(C64, C64); 5],
}

impl Phases {
    fn new(x: &[f64], h: f64, mu: f64) -> Self {
        let e1: Vec<C64> = x.iter().map(|&y| C64::from_polar(1.0, mu * y)).collect();
        let e2: Vec<C64> = e1.iter().map(|e| e * e).collect();
        let ones = vec![C64::new(1.0, 0.0); x.len()];
        let c1: Vec<C64> = e1.iter().map(|e| e.conj()).collect();
        let c2: Vec<C64> = e2.iter().map(|e| e.conj()).collect();
        let w = |m: i32| {
            let z = I * (m as f64 * mu * h);
            let a = phi2(z);
            (a * h, (phi1(z) - a) * h)
        };
        Phases { p: [c2, c1, ones, e1, e2], w: [w(-2), w(-1), w(0), w(1), w(2)] }
    }
    fn idx(m: i32) -> usize {
        (m + 2) as usize
    }
}

/// int over each cell of c(y) e^{i m mu y}, accumulated forward (from 0) or backward (to the end).
fn accumulate(c: &[C64], ph: &Phases, m: i32, forward: bool, out: &mut [C64]) {
    let p = &ph.p[Phases::idx(m)];
    let (w0, w1) = ph.w[Phases::idx(m)];
    let n = c.len();
    if forward {
        let mut s = C64::new(0.0, 0.0);
        out[0] += s;
        for i in 0..n - 1 {
            s += p[i] * (c[i] * w0 + c[i + 1] * w1);
            out[i + 1] += s;
        }
    } else {
        let mut s = C64::new(0.0, 0.0);
        out[n - 1] += s;
        for i in (0..n - 1).rev() {
            s += p[i] * (c[i] * w0 + c[i + 1] * w1);
            out[i] += s;
        }
    }
}

/// K0(mu^2 + i0) applied to a sum of wave components; returns the e^{+i mu x} and e^{-i mu x} parts.
fn apply_free(waves: &[Wave], ph: &Phases, mu: f64, n: usize) -> [Wave; 2] {
    let len = ph.p[0].len();
    let nf = n as f64;
    let mut fwd = vec![vec![C64::new(0.0, 0.0); len]; n];
    let mut bwd = vec![vec![C64::new(0.0, 0.0); len]; n];
    for w in waves {
        for j in 0..n {
            accumulate(&w.c[j], ph, w.nu - 1, true, &mut fwd[j]);
            accumulate(&w.c[j], ph, w.nu + 1, false, &mut bwd[j]);
        }
    }
    let total: C64 = bwd.iter().map(|b| b[0]).sum();
    let pre = -I / (nf * mu);
    let half = -I / (2.0 * mu);
    let a = (0..n)
        .map(|j| {
            let base = pre * (total - nf / 2.0 * bwd[j][0]);
            fwd[j].iter().map(|&v| base + half * v).collect()
        })
        .collect();
    let b = bwd.into_iter().map(|v| v.into_iter().map(|e| half * e).collect()).collect();
    [Wave { nu: 1, c: a }, Wave { nu: -1, c: b }]
}

/// Bilinear pairing of a wave sum with real g.
fn pair_waves(waves: &[Wave], g: &[Vec<f64>], ph: &Phases) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for w in waves {
        let k = Phases::idx(w.nu);
        let (p, (w0, w1)) = (&ph.p[k], ph.w[k]);
        for (c, gj) in w.c.iter().zip(g) {
            for i in 0..c.len() - 1 {
                s += p[i] * (c[i] * gj[i] * w0 + c[i + 1] * gj[i + 1] * w1);
            }
        }
    }
    s
}

fn series_terms(grid: &BornGrid, mu: f64, k_max: usize, forward: bool) -> Vec<C64> {
    let n = grid.v.len();
    let ph = Phases::new(&grid.x, grid.h, mu);
    let (src, dst) = if forward { (&grid.f, &grid.g) } else { (&grid.g, &grid.f) };
    let start = Wave { nu: 0, c: src.iter().map(|b| b.iter().map(|&v| C64::new(v, 0.0)).collect()).collect() };
    let mut cur = apply_free(std::slice::from_ref(&start), &ph, mu, n);
    let mut terms = Vec::with_capacity(k_max + 1);
    terms.push(-pair_waves(&cur, dst, &ph));
    for _ in 0..k_max {
        for w in cur.iter_mut() {
            for (c, v) in w.c.iter_mut().zip(&grid.v) {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci *= vi;
                }
            }
        }
        cur = apply_free(&cur, &ph, mu, n);
        terms.push(-pair_waves(&cur, dst, &ph));
    }
    terms
}

/// <R0 (-V R0)^k f, g> at lambda = mu^2 + i0 for k = 0..=k_max, with R0 = (H0 - lambda)^{-1}.
pub fn born_terms(f: &NetworkFunction, g: &NetworkFunction, mu: f64, k_max: usize, params: &BornParams) -> Result<Vec<C64>> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("Born terms need mu > 0, got {mu}")));
    }
    let grid = BornGrid::new(f, g, params)?;
    Ok(series_terms(&grid, mu, k_max, true))
}

#[derive(Clone, Debug, Serialize)]
pub struct FubiniCheck {
    pub mu: f64,
    pub forward: C64,
    pub reverse: C64,
    pub relative_gap: f64,
}

/// The k = 1 term integrated from f towards g and from g towards f.
pub fn fubini_check(f: &NetworkFunction, g: &NetworkFunction, mu: f64, params: &BornParams) -> Result<FubiniCheck> {
    let grid = BornGrid::new(f, g, params)?;
    let a = series_terms(&grid, mu, 1, true)[1];
    let b = series_terms(&grid, mu, 1, false)[1];
    Ok(FubiniCheck { mu, forward: a, reverse: b, relative_gap: (a - b).norm() / a.norm().max(1e-300) })
}

#[derive(Clone, Debug, Serialize)]
pub struct BornResult {
    pub t: f64,
    pub pairing: C64,
    /// contribution of each k after the mu integration
    pub terms: Vec<C64>,
    /// change of each contribution between two Chebyshev panel widths
    pub term_errors: Vec<f64>,
    pub k_max: usize,
    pub tail_bound: f64,
    pub error_estimate: f64,
    pub mu_samples: usize,
}

struct ChebPanels {
    a: f64,
    width: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// per panel, per node, per k
    values: Vec<Vec<Vec<f64>>>,
}

impl ChebPanels {
    fn build(grid: &BornGrid, a: f64, b: f64, width: f64, order: usize, k_max: usize) -> Self {
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let width = (b - a) / panels as f64;
        let nodes: Vec<f64> = (0..order).map(|j| -(((2 * j + 1) as f64) * PI / (2 * order) as f64).cos()).collect();
        let weights: Vec<f64> = (0..order)
            .map(|j| {
                let s = (((2 * j + 1) as f64) * PI / (2 * order) as f64).sin();
                if j % 2 == 0 { s } else { -s }
            })
            .collect();
        let mus: Vec<f64> = (0..panels)
            .flat_map(|p| {
                let c = a + (p as f64 + 0.5) * width;
                nodes.iter().map(move |&s| c + 0.5 * width * s).collect::<Vec<_>>()
            })
            .collect();
        let samples = crate::par_map(&mus, |&mu| {
            series_terms(grid, mu, k_max, true).into_iter().map(|v| v.im).collect::<Vec<f64>>()
        });
        let values = samples.chunks(order).map(|c| c.to_vec()).collect();
        ChebPanels { a, width, nodes, weights, values }
    }

    fn len(&self) -> usize {
        self.values.len() * self.nodes.len()
    }

    fn eval(&self, mu: f64, out: &mut [f64]) {
        let p = (((mu - self.a) / self.width) as usize).min(self.values.len() - 1);
        let s = 2.0 * (mu - self.a) / self.width - (2 * p + 1) as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut den = 0.0;
        for (j, (&xj, &wj)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let d = s - xj;
            if d.abs() < 1e-14 {
                out.copy_from_slice(&self.values[p][j]);
                return;
            }
            let c = wj / d;
            den += c;
            for (o, v) in out.iter_mut().zip(&self.values[p][j]) {
                *o += c * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= den);
    }
}

/// (2/pi) int e^{it mu^2} Theta_L(mu^2) Im(term_k(mu)) mu dmu for every k.
fn integrate(panels: &ChebPanels, family: &CutoffFamily, t: f64, reach: f64, k_max: usize) -> Vec<C64> {
    let (a, b) = family.mu_range();
    let rate = 2.0 * t.abs() * b + reach + 1.0;
    let width = (4.0 / rate).min(0.25);
    let count = ((b - a) / width).ceil() as usize;
    let h = (b - a) / count as f64;
    let (gx, gw) = gauss_legendre(8);
    let idx: Vec<usize> = (0..count).collect();
    let parts = crate::par_map(&idx, |&p| {
        let mut acc = vec![C64::new(0.0, 0.0); k_max + 1];
        let mut buf = vec![0.0; k_max + 1];
        let c = a + (p as f64 + 0.5) * h;
        for q in 0..8 {
            let mu = c + 0.5 * h * gx[q];
            let w = family.window(mu * mu);
            if w == 0.0 {
                continue;
            }
            panels.eval(mu, &mut buf);
            let e = C64::from_polar(0.5 * h * gw[q] * w * mu * 2.0 / PI, t * mu * mu);
            for (s, v) in acc.iter_mut().zip(&buf) {
                *s += e * v;
            }
        }
        acc
    });
    let mut out = vec![C64::new(0.0, 0.0); k_max + 1];
    for part in parts {
        for (o, v) in out.iter_mut().zip(part) {
            *o += v;
        }
    }
    out
}

/// <e^{itH} Theta_L(H) f, g> from the Born series, for several times at once.
pub fn born_series(
    f: &NetworkFunction,
    g: &NetworkFunction,
    times: &[f64],
    family: &CutoffFamily,
    params: &BornParams,
) -> Result<Vec<BornResult>> {
    params.check(family.lambda0)?;
    let k_max = params.truncation(family.lambda0)?;
    let grid = BornGrid::new(f, g, params)?;
    let (a, b) = family.mu_range();
    let reach = 2.0 * grid.x[grid.x.len() - 1];
    let coarse = ChebPanels::build(&grid, a, b, 2.0 * params.panel_width, params.cheb_order, k_max);
    let fine = ChebPanels::build(&grid, a, b, params.panel_width, params.cheb_order, k_max);
    let tail = params.tail_bound(family.lambda0, k_max);
    Ok(times
        .iter()
        .map(|&t| {
            let terms = integrate(&fine, family, t, reach, k_max);
            let rough = integrate(&coarse, family, t, reach, k_max);
            let pairing: C64 = terms.iter().sum();
            let other: C64 = rough.iter().sum();
            let term_errors: Vec<f64> = terms.iter().zip(&rough).map(|(p, q)| (p - q).norm()).collect();
            let err = term_errors.iter().sum::<f64>().max((pairing - other).norm());
            BornResult { t, pairing, terms, term_errors, k_max, tail_bound: tail, error_estimate: err, mu_samples: fine.len() + coarse.len() }
        })
        .collect())
}

pub fn born_apply(
    f: &NetworkFunction,
    g: &NetworkFunction,
    t: f64,
    family: &CutoffFamily,
    params: &BornParams,
) -> Result<BornResult> {
    Ok(born_series(f, g, &[t], family, params)?.remove(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct GapResult {
    pub t: f64,
    pub lambda0: f64,
    pub gap: C64,
    pub bound: f64,
    pub b_constant: f64,
    pub holds: bool,
    pub error_estimate: f64,
}

/// 4 B ||V||_1 lambda0^{-1/2} |t|^{-1/2} ||f||_1 ||g||_1.
pub fn gap_bound(f: &NetworkFunction, g: &NetworkFunction, t: f64, family: &CutoffFamily, params: &BornParams) -> f64 {
    4.0 * params.b_constant(family) * params.v_l1 / family.lambda0.sqrt() / t.abs().sqrt() * f.norms().l1 * g.norms().l1
}

/// The k >= 1 part of the Born pairing against its bound, for several times.
pub fn perturbation_gaps(
    f: &NetworkFunction,
    g: &NetworkFunction,
    times: &[f64],
    family: &CutoffFamily,
    params: &BornParams,
) -> Result<Vec<GapResult>> {
    let res = born_series(f, g, times, family, params)?;
    Ok(res
        .into_iter()
        .map(|r| {
            let gap: C64 = r.terms[1..].iter().sum();
            let bound = gap_bound(f, g, r.t, family, params);
            GapResult {
                t: r.t,
                lambda0: family.lambda0,
                gap,
                bound,
                b_constant: params.b_constant(family),
                holds: gap.norm() <= bound,
                error_estimate: r.term_errors[1..].iter().sum(),
            }
        })
        .collect())
}

pub fn perturbation_gap(
    f: &NetworkFunction,
    g: &NetworkFunction,
    t: f64,
    family: &CutoffFamily,
    params: &BornParams,
) -> Result<GapResult> {
    Ok(perturbation_gaps(f, g, &[t], family, params)?.remove(0))
}

/// (sum_k (2(N-1)/N)^k ||V||_1^k ||[Theta_L(lambda^2)|lambda|^-k]^v||_1) ||f||_1 ||g||_1 |t|^{-1/2}.
pub fn pairing_bound(
    f: &NetworkFunction,
    g: &NetworkFunction,
    t: f64,
    family: &CutoffFamily,
    params: &BornParams,
    k_max: usize,
) -> Result<f64> {
    if family.abs_norms.len() <= k_max {
        return Err(Error::Config(format!("cutoff family has norms up to {} only", family.abs_norms.len() - 1)));
    }
    let nf = params.n_branches as f64;
    let r = 2.0 * (nf - 1.0) / nf * params.v_l1;
    let s: f64 = (0..=k_max).map(|k| r.powi(k as i32) * family.abs_norms[k]).sum();
    Ok(s * f.norms().l1 * g.norms().l1 / t.abs().sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub born: C64,
    pub spectral: C64,
    pub difference: f64,
}

/// Compares the k = 0 contribution with <e^{itH0} Theta_L(H0) f, g> from the spectral module
/// on the free network `free`; fails when they differ by more than `tol` ||f||_1 ||g||_1.
pub fn k0_cross_check(
    free: &crate::jost::Network,
    f: &NetworkFunction,
    g: &NetworkFunction,
    result: &BornResult,
    family: &CutoffFamily,
    tol: f64,
) -> Result<CrossCheck> {
    if !free.spec.potentials.iter().all(|p| p.is_zero()) {
        return Err(Error::Config("the cross check needs the free network".into()));
    }
    let window = crate::propagate::SpectralWindow::band(family.lambda0, family.l).with_time(result.t);
    let opts = crate::propagate::SpectralOptions { lambda_max: 2.0 * family.l, ..Default::default() };
    let (u, _) = crate::propagate::spectral_apply(free, &window, f, &opts)?;
    let spectral = u.pair(g);
    let born = result.terms[0];
    let difference = (born - spectral).norm();
    let scale = f.norms().l1 * g.norms().l1;
    if difference > tol * scale {
        return Err(Error::Quality(format!(
            "k = 0 term disagrees with the spectral evaluation: {born} vs {spectral} (|diff| = {difference:.3e})"
        )));
    }
    Ok(CrossCheck { born, spectral, difference })
}
