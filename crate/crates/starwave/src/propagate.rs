//! The Schrodinger group e^{itH}: spectral propagation through the boundary
//! values of the resolvent kernel, exact free propagation by reflection, and
//! the low-energy correction term.

use crate::born::phi;
use crate::error::{Error, Result};
use crate::jost::{Network, Sign};
use crate::neteigen::{p_coefficient, SpectralData};
use crate::netmodel::NetworkFunction;
use crate::numerics::{gauss_legendre, interp_cubic, linear_fit, QuadratureResult};
use crate::resolvent::KernelContext;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const GL_ORDER: usize = 8;

/// The scalar function h(lambda) = e^{it lambda} (1 - phi(lambda / high_pass)) phi(lambda / cutoff)
/// restricted to (a, b).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralWindow {
    pub a: f64,
    pub b: f64,
    pub t: Option<f64>,
    pub cutoff: Option<f64>,
    pub high_pass: Option<f64>,
}

impl SpectralWindow {
    pub fn new(a: f64, b: f64) -> Self {
        SpectralWindow { a, b, t: None, cutoff: None, high_pass: None }
    }
    pub fn with_time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
    pub fn with_cutoff(mut self, l: f64) -> Self {
        self.cutoff = Some(l);
        self
    }

    pub fn with_high_pass(mut self, lambda0: f64) -> Self {
        self.high_pass = Some(lambda0);
        self
    }

    /// The band-limited window (1 - phi(lambda / lambda0)) phi(lambda / l) on (lambda0, 2l).
    pub fn band(lambda0: f64, l: f64) -> Self {
        SpectralWindow::new(lambda0, 2.0 * l).with_high_pass(lambda0).with_cutoff(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a < self.b && self.b.is_finite()) {
            return Err(Error::Config(format!("spectral window needs 0 <= a < b < inf, got ({}, {})", self.a, self.b)));
        }
        for l in [self.cutoff, self.high_pass].into_iter().flatten() {
            if !(l > 0.0) {
                return Err(Error::Config(format!("cutoff scale must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn h(&self, lambda: f64) -> C64 {
        if lambda <= self.a || lambda >= self.b {
            return C64::new(0.0, 0.0);
        }
        let mut v = C64::new(1.0, 0.0);
        if let Some(t) = self.t {
            v *= C64::from_polar(1.0, t * lambda);
        }
        if let Some(l) = self.cutoff {
            v *= phi(lambda / l);
        }
        if let Some(l) = self.high_pass {
            v *= 1.0 - phi(lambda / l);
        }
        v
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralOptions {
    pub lambda_min_cut: f64,
    pub lambda_max: f64,
    /// largest phase change of the integrand across one panel
    pub panel_phase: f64,
    pub max_panel: f64,
    /// relative sup-norm change accepted between two panel doublings
    pub tol: f64,
    pub refine: bool,
    pub max_doublings: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            lambda_min_cut: 2.5e-3,
            lambda_max: 400.0,
            panel_phase: 4.0,
            max_panel: 0.25,
            tol: 1e-4,
            refine: true,
            max_doublings: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralOutput {
    #[serde(skip)]
    pub states: Vec<NetworkFunction>,
    pub nodes: usize,
    pub doublings: usize,
    pub error_estimate: f64,
    pub converged: bool,
    /// L2 norm of E(0, lambda_min_cut) f, integrated rather than dropped
    pub low_window_norm: f64,
    /// L2 norm of E(b/2, b) f for the largest b, a proxy for the truncated tail
    pub tail_window_norm: f64,
}

pub(crate) fn support_end(f: &NetworkFunction) -> f64 {
    let mut end = 0.0f64;
    for v in &f.values {
        if let Some(i) = v.iter().rposition(|c| c.norm() > 0.0) {
            end = end.max(f.x[i]);
        }
    }
    end
}

/// Panel breakpoints in mu over [0, mu_hi], respecting the segment boundaries.
fn panels(bounds: &[f64], rate: impl Fn(f64) -> f64, opts: &SpectralOptions, level: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for s in bounds.windows(2) {
        let (p, q) = (s[0], s[1]);
        if q <= p {
            continue;
        }
        let mut a = p;
        while a < q - 1e-15 {
            let probe = (a + opts.max_panel).min(q);
            let w = (opts.panel_phase / rate(probe)).min(opts.max_panel).min(q - a);
            let b = if q - (a + w) < 1e-3 * w { q } else { a + w };
            let sub = 1usize << level;
            let hw = (b - a) / sub as f64;
            for k in 0..sub {
                out.push((a + k as f64 * hw, if k + 1 == sub { b } else { a + (k + 1) as f64 * hw }));
            }
            a = b;
        }
    }
    out
}

struct Accum {
    states: Vec<Vec<Vec<C64>>>,
    low: Vec<Vec<C64>>,
    tail: Vec<Vec<C64>>,
}

fn integrate_once(
    net: &Network,
    f: &NetworkFunction,
    windows: &[SpectralWindow],
    opts: &SpectralOptions,
    level: usize,
) -> Result<(Accum, usize)> {
    let n = f.n_branches();
    let len = f.x.len();
    let mu_hi = windows.iter().map(|w| w.b.sqrt()).fold(0.0, f64::max);
    let mut bounds = vec![0.0, opts.lambda_min_cut.sqrt().min(mu_hi), mu_hi / 2f64.sqrt(), mu_hi];
    for w in windows {
        bounds.push(w.a.sqrt());
        bounds.push(w.b.sqrt());
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let t_max = windows.iter().filter_map(|w| w.t).map(f64::abs).fold(0.0, f64::max);
    let x_ext = f.x[len - 1] + support_end(f);
    let rate = |mu: f64| 2.0 * t_max * mu + x_ext + 1.0;
    let pans = panels(&bounds, rate, opts, level);
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut nodes = Vec::with_capacity(pans.len() * GL_ORDER);
    for &(a, b) in &pans {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for k in 0..GL_ORDER {
            nodes.push((c + r * gx[k], r * gw[k]));
        }
    }
    let zero = vec![vec![C64::new(0.0, 0.0); len]; n];
    let mut acc = Accum { states: vec![zero.clone(); windows.len()], low: zero.clone(), tail: zero };
    let real = f.is_real();
    let fc = if real { None } else { Some(f.conj()) };
    let mu_cut = opts.lambda_min_cut.sqrt();
    let mu_tail = mu_hi / 2f64.sqrt();
    for chunk in nodes.chunks(32) {
        let diffs: Vec<Result<NetworkFunction>> = crate::par_map(chunk, |&(mu, _)| {
            let ctx = KernelContext::new(net, C64::new(mu, 0.0))?;
            let kf = ctx.apply(f);
            let km = match &fc {
                None => kf.conj(),
                Some(g) => ctx.apply(g).conj(),
            };
            Ok(kf.sub(&km))
        });
        for (&(mu, w), d) in chunk.iter().zip(diffs) {
            let d = d?;
            let base = I / PI * w * mu;
            let lam = mu * mu;
            for (wi, win) in windows.iter().enumerate() {
                let hv = win.h(lam);
                if hv == C64::new(0.0, 0.0) {
                    continue;
                }
                let c = base * hv;
                for k in 0..n {
                    for (o, v) in acc.states[wi][k].iter_mut().zip(&d.values[k]) {
                        *o += c * v;
                    }
                }
            }
            let target = if mu < mu_cut {
                Some(&mut acc.low)
            } else if mu > mu_tail {
                Some(&mut acc.tail)
            } else {
                None
            };
            if let Some(t) = target {
                for k in 0..n {
                    for (o, v) in t[k].iter_mut().zip(&d.values[k]) {
                        *o += base * v;
                    }
                }
            }
        }
    }
    Ok((acc, nodes.len()))
}

fn sup(v: &[Vec<C64>]) -> f64 {
    v.iter().flat_map(|b| b.iter()).map(|c| c.norm()).fold(0.0, f64::max)
}

/// h(H) E(a, b) f for several windows sharing one set of kernel evaluations.
pub fn spectral_apply_many(
    net: &Network,
    windows: &[SpectralWindow],
    f: &NetworkFunction,
    opts: &SpectralOptions,
) -> Result<SpectralOutput> {
    if windows.is_empty() {
        return Err(Error::Config("no spectral windows".into()));
    }
    for w in windows {
        w.validate()?;
    }
    if f.x.len() != net.x.len() {
        return Err(Error::Config("function and network grids differ".into()));
    }
    let (mut acc, mut nodes) = integrate_once(net, f, windows, opts, 0)?;
    let mut error_estimate = f64::NAN;
    let mut converged = !opts.refine;
    let mut doublings = 0;
    if opts.refine {
        for level in 1..=opts.max_doublings {
            let (next, m) = integrate_once(net, f, windows, opts, level)?;
            nodes += m;
            doublings = level;
            let mut err = 0.0f64;
            for (a, b) in acc.states.iter().zip(&next.states) {
                let diff: Vec<Vec<C64>> =
                    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
                err = err.max(sup(&diff) / sup(b).max(1e-300));
            }
            acc = next;
            error_estimate = err;
            if err < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("spectral quadrature not converged: relative change {error_estimate:.3e}");
        }
    }
    let wrap = |v: Vec<Vec<C64>>| NetworkFunction { x: f.x.clone(), values: v };
    let low_window_norm = wrap(acc.low).norms().l2;
    let tail_window_norm = wrap(acc.tail).norms().l2;
    let states = acc.states.into_iter().map(wrap).collect();
    Ok(SpectralOutput { states, nodes, doublings, error_estimate, converged, low_window_norm, tail_window_norm })
}

pub fn spectral_apply(
    net: &Network,
    window: &SpectralWindow,
    f: &NetworkFunction,
    opts: &SpectralOptions,
) -> Result<(NetworkFunction, SpectralOutput)> {
    let mut out = spectral_apply_many(net, std::slice::from_ref(window), f, opts)?;
    let state = out.states.remove(0);
    Ok((state, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    Free,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<NetworkFunction>,
    pub sup_norms: Vec<f64>,
    pub l1_norms: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub slope: Option<f64>,
    pub fit_window: (f64, f64),
    pub method: Method,
    pub lambda_max: Option<f64>,
    pub quadrature: Option<SpectralOutput>,
}

impl EvolutionResult {
    fn from_states(times: &[f64], states: Vec<NetworkFunction>, method: Method, fit_window: (f64, f64)) -> Self {
        let norms: Vec<_> = states.iter().map(|s| s.norms()).collect();
        let mut r = EvolutionResult {
            times: times.to_vec(),
            sup_norms: norms.iter().map(|n| n.linf).collect(),
            l1_norms: norms.iter().map(|n| n.l1).collect(),
            l2_norms: norms.iter().map(|n| n.l2).collect(),
            states,
            slope: None,
            fit_window,
            method,
            lambda_max: None,
            quadrature: None,
        };
        r.slope = r.fit(fit_window).map(|f| f.0);
        r
    }

    /// (slope, intercept, rms) of log sup-norm against log t over the window.
    pub fn fit(&self, window: (f64, f64)) -> Option<(f64, f64, f64)> {
        let (lt, ls): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.sup_norms)
            .filter(|(t, s)| **t >= window.0 && **t <= window.1 && **t > 0.0 && **s > 0.0)
            .map(|(t, s)| (t.ln(), s.ln()))
            .unzip();
        if lt.len() < 2 {
            return None;
        }
        Some(linear_fit(&lt, &ls))
    }
}

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (5.0, 100.0);

/// e^{itH} P_ac f on the network grid at each time, through the spectral
/// representation over (0, lambda_max).
pub fn evolve_spectral(net: &Network, f: &NetworkFunction, times: &[f64], opts: &SpectralOptions) -> Result<EvolutionResult> {
    let windows: Vec<SpectralWindow> = times.iter().map(|&t| SpectralWindow::new(0.0, opts.lambda_max).with_time(t)).collect();
    let out = spectral_apply_many(net, &windows, f, opts)?;
    let mut r = EvolutionResult::from_states(times, out.states.clone(), Method::Spectral, DEFAULT_FIT_WINDOW);
    r.lambda_max = Some(opts.lambda_max);
    r.quadrature = Some(SpectralOutput { states: Vec::new(), ..out });
    Ok(r)
}

/// Free kernel of e^{itH0} on the line: (-4 pi i t)^{-1/2} e^{-i s^2 / (4t)}.
fn free_line_kernel(t: f64) -> impl Fn(f64) -> C64 {
    let pre = (C64::new(0.0, -4.0 * PI * t)).sqrt().inv();
    move |s: f64| pre * C64::from_polar(1.0, -s * s / (4.0 * t))
}

/// e^{itH0} f for V = 0 on every branch.
///
/// w1 = sum_j f_j evolves with the Neumann (even) reflection, w_j = f_j - f_1 with
/// the Dirichlet (odd) one; then v_1 = (w1 - sum_{j>1} w_j)/N and v_j = w_j + v_1.
pub fn free_evolve(f: &NetworkFunction, t: f64) -> NetworkFunction {
    if t == 0.0 {
        return f.clone();
    }
    let n = f.n_branches();
    let x = f.x.clone();
    let len = x.len();
    let ysup = support_end(f);
    if ysup == 0.0 {
        return NetworkFunction::zeros(x, n);
    }
    let rate = (x[len - 1] + ysup) / (2.0 * t.abs()) + 1.0;
    let width = (3.0 / rate).min(0.25);
    let panels = (ysup / width).ceil().max(1.0) as usize;
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut ys = Vec::with_capacity(panels * GL_ORDER);
    let h = ysup / panels as f64;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for k in 0..GL_ORDER {
            ys.push((c + 0.5 * h * gx[k], 0.5 * h * gw[k]));
        }
    }
    let sample = |k: usize| -> Vec<C64> { ys.iter().map(|&(y, _)| interp_cubic(&x, &f.values[k], y)).collect() };
    let v: Vec<Vec<C64>> = (0..n).map(sample).collect();
    let mut w: Vec<Vec<C64>> = Vec::with_capacity(n);
    w.push((0..ys.len()).map(|i| v.iter().map(|b| b[i]).sum()).collect());
    for j in 1..n {
        w.push((0..ys.len()).map(|i| v[j][i] - v[0][i]).collect());
    }
    let k = free_line_kernel(t);
    let xs: Vec<f64> = x.to_vec();
    let evolved: Vec<Vec<C64>> = crate::par_map(&xs, |&xo| {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, &(y, wy)) in ys.iter().enumerate() {
            let a = k(xo - y);
            let b = k(xo + y);
            let even = (a + b) * wy;
            let odd = (a - b) * wy;
            out[0] += even * w[0][i];
            for j in 1..n {
                out[j] += odd * w[j][i];
            }
        }
        out
    });
    let mut values = vec![vec![C64::new(0.0, 0.0); len]; n];
    for (i, e) in evolved.iter().enumerate() {
        let others: C64 = e[1..].iter().sum();
        let v1 = (e[0] - others) / n as f64;
        values[0][i] = v1;
        for j in 1..n {
            values[j][i] = e[j] + v1;
        }
    }
    NetworkFunction { x, values }
}

pub fn evolve_free(f: &NetworkFunction, times: &[f64]) -> EvolutionResult {
    let states = times.iter().map(|&t| free_evolve(f, t)).collect();
    EvolutionResult::from_states(times, states, Method::Free, DEFAULT_FIT_WINDOW)
}

/// Samples of p(mu) chi(mu^2) m_{j,+}(mu, x) on a uniform mu grid, for the
/// low-energy term T2(t, x, x') = int e^{it mu^2} p q e^{i mu (x + x')} dmu.
#[derive(Clone, Debug)]
pub struct T2Table {
    pub branch: usize,
    pub cutoff: f64,
    pub mu: Vec<f64>,
    pub p: Vec<C64>,
    pub xs: Vec<f64>,
    /// m[i][a] = m_{j,+}(mu_i, xs[a])
    pub m: Vec<Vec<C64>>,
    pub chi: Vec<f64>,
}

impl T2Table {
    /// chi(lambda) = phi(lambda / cutoff), so mu ranges over [-sqrt(2 cutoff), sqrt(2 cutoff)].
    pub fn new(net: &Network, j: usize, cutoff: f64, xs: &[f64], n_mu: usize) -> Result<Self> {
        if !(cutoff > 0.0) || n_mu < 16 {
            return Err(Error::Config("T2 needs a positive cutoff and at least 16 nodes".into()));
        }
        let m_max = (2.0 * cutoff).sqrt();
        // an even node count keeps mu = 0 off the grid
        let n_mu = n_mu + n_mu % 2;
        let h = 2.0 * m_max / n_mu as f64;
        let mu: Vec<f64> = (0..n_mu).map(|i| -m_max + (i as f64 + 0.5) * h).collect();
        let rows: Vec<Result<(C64, Vec<C64>)>> = crate::par_map(&mu, |&m| {
            let sd = SpectralData::new(net, C64::new(m, 0.0))?;
            let p = p_coefficient(&sd, j)?;
            let sol = sd.sol(j, Sign::Plus);
            Ok((p, xs.iter().map(|&x| sol.m_at(x)).collect()))
        });
        let mut p = Vec::with_capacity(n_mu);
        let mut mm = Vec::with_capacity(n_mu);
        for r in rows {
            let (a, b) = r?;
            p.push(a);
            mm.push(b);
        }
        let chi = mu.iter().map(|m| phi(m * m / cutoff)).collect();
        Ok(T2Table { branch: j, cutoff, mu, p, xs: xs.to_vec(), m: mm, chi })
    }

    /// Rectangle sums on the full grid and on every other node; for an integrand
    /// that vanishes smoothly at both ends their difference estimates the error.
    pub fn eval(&self, t: f64, a: usize, b: usize) -> QuadratureResult {
        let xsum = self.xs[a] + self.xs[b];
        let h = self.mu[1] - self.mu[0];
        let mut full = C64::new(0.0, 0.0);
        let mut even = C64::new(0.0, 0.0);
        for (i, &m) in self.mu.iter().enumerate() {
            let v = C64::from_polar(1.0, t * m * m + m * xsum) * self.p[i] * self.chi[i] * self.m[i][a] * self.m[i][b];
            full += v;
            if i % 2 == 0 {
                even += v;
            }
        }
        let value = full * h;
        let err = (value - even * 2.0 * h).norm();
        QuadratureResult { value, error_estimate: err, evaluations: self.mu.len(), converged: err < 1e-6 * value.norm().max(1e-3) }
    }
}

/// T2(t, x, x') on branch j with chi(lambda) = phi(lambda / cutoff).
pub fn t2_term(net: &Network, j: usize, t: f64, x: f64, xp: f64, cutoff: f64) -> Result<QuadratureResult> {
    let m_max = (2.0 * cutoff).sqrt();
    let rate = 2.0 * t.abs() * m_max + x + xp + 1.0;
    let n_mu = ((8.0 * rate * m_max / PI).ceil() as usize).max(256);
    Ok(T2Table::new(net, j, cutoff, &[x, xp], n_mu)?.eval(t, 0, 1))
}
