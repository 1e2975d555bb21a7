//! Shared numerical kernels: entire-function helpers for exponential
//! quadrature weights, Gauss-Legendre rules, oscillatory integrals and the
//! Fourier L1 norm used by the cutoff constants.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 26;

/// (e^w - 1)/w, with the removable singularity at 0 filled in.
pub fn phi1(w: C64) -> C64 {
    if w.norm() < SERIES_RADIUS {
        series(w, &COEFS.0)
    } else {
        (w.exp() - 1.0) / w
    }
}

/// (e^w - 1 - w)/w^2 = integral of e^{ws}(1 - s) over [0, 1].
pub fn phi2(w: C64) -> C64 {
    if w.norm() < SERIES_RADIUS {
        series(w, &COEFS.1)
    } else {
        (w.exp() - 1.0 - w) / (w * w)
    }
}

/// phi1 - phi2 = integral of e^{ws} s over [0, 1].
pub fn psi(w: C64) -> C64 {
    if w.norm() < SERIES_RADIUS {
        series(w, &COEFS.2)
    } else {
        let e = w.exp();
        (w * e - e + 1.0) / (w * w)
    }
}

/// Both product-trapezoid weights (phi2, psi) and e^w, sharing one exponential.
#[inline]
pub fn exp_weights(w: C64) -> (C64, C64, C64) {
    if w.norm() < SERIES_RADIUS {
        (w.exp(), phi2(w), psi(w))
    } else {
        let e = w.exp();
        let w2 = w * w;
        (e, (e - 1.0 - w) / w2, (w * e - e + 1.0) / w2)
    }
}

type Coefs = [f64; SERIES_TERMS + 1];

/// Taylor coefficients of phi1, phi2 and psi.
const COEFS: (Coefs, Coefs, Coefs) = {
    let mut a = [0.0; SERIES_TERMS + 1];
    let mut b = [0.0; SERIES_TERMS + 1];
    let mut c = [0.0; SERIES_TERMS + 1];
    // inverse factorials 1/(k+1)! and 1/(k+2)!
    let mut f1 = 1.0;
    let mut k = 0;
    while k <= SERIES_TERMS {
        f1 /= (k + 1) as f64;
        let f2 = f1 / (k + 2) as f64;
        a[k] = f1;
        b[k] = f2;
        c[k] = (k + 1) as f64 * f2;
        k += 1;
    }
    (a, b, c)
};

fn series(w: C64, coef: &Coefs) -> C64 {
    // truncation below 1e-17 relative: |w|^K / K! for |w| < 0.05, 0.3, 1
    let r = w.norm();
    let terms = if r < 0.05 { 9 } else if r < 0.3 { 14 } else { SERIES_TERMS };
    // Horner from the highest term.
    let mut acc = C64::new(coef[terms], 0.0);
    for k in (0..terms).rev() {
        acc = acc * w + coef[k];
    }
    acc
}


/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A Gauss-Legendre rule mapped onto a set of equal panels.
#[derive(Clone, Debug)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (xi, wi) in gx.iter().zip(&gw) {
                nodes.push(c + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        PanelRule { nodes, weights }
    }
}

/// Trapezoid weights on an arbitrary increasing grid.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Adaptive Gauss-Legendre integration of a real function on [a, b].
pub fn adaptive_integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (gx, gw) = gauss_legendre(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        gx.iter().zip(&gw).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    };
    fn rec(
        rule: &dyn Fn(f64, f64) -> f64,
        lo: f64,
        hi: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let mid = 0.5 * (lo + hi);
        let l = rule(lo, mid);
        let r = rule(mid, hi);
        if depth == 0 || (l + r - whole).abs() <= tol {
            l + r
        } else {
            rec(rule, lo, mid, l, 0.5 * tol, depth - 1) + rec(rule, mid, hi, r, 0.5 * tol, depth - 1)
        }
    }
    let whole = rule(a, b);
    rec(&rule, a, b, whole, tol, 40)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscMode {
    Plain,
    Refine,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureResult {
    pub value: C64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct OscOptions {
    pub tol: f64,
    pub initial_points: usize,
    pub max_points: usize,
}

impl Default for OscOptions {
    fn default() -> Self {
        OscOptions { tol: 1e-7, initial_points: 1 << 10, max_points: 1 << 20 }
    }
}

/// Integral of e^{i t mu^2} g(mu) over [-m, m] by the composite trapezoid rule.
/// In refine mode the step is halved until two successive values agree.
pub fn oscillatory_integral(
    g: &dyn Fn(f64) -> C64,
    m: f64,
    t: f64,
    mode: OscMode,
    opts: OscOptions,
) -> QuadratureResult {
    let f = |mu: f64| C64::from_polar(1.0, t * mu * mu) * g(mu);
    let mut n = opts.initial_points.max(2);
    let h = 2.0 * m / n as f64;
    let mut sum = 0.5 * (f(-m) + f(m));
    for i in 1..n {
        sum += f(-m + i as f64 * h);
    }
    let mut evals = n + 1;
    let mut value = sum * h;
    if mode == OscMode::Plain {
        return QuadratureResult { value, error_estimate: 0.0, evaluations: evals, converged: true };
    }
    loop {
        if 2 * n > opts.max_points {
            return QuadratureResult {
                value,
                error_estimate: f64::INFINITY,
                evaluations: evals,
                converged: false,
            };
        }
        let h = 2.0 * m / (2 * n) as f64;
        for i in 0..n {
            sum += f(-m + (2 * i + 1) as f64 * h);
        }
        evals += n;
        n *= 2;
        let next = sum * h;
        let diff = (next - value).norm();
        value = next;
        if diff < opts.tol {
            return QuadratureResult { value, error_estimate: diff, evaluations: evals, converged: true };
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FourierNorm {
    pub value: f64,
    pub tail_fraction: f64,
    pub aliased: bool,
}

/// L1 norm of the inverse Fourier transform (2 pi)^{-1/2} int g(l) e^{i l tau} dl
/// of a function supported in [-m, m], using n samples and 8x zero padding.
pub fn fourier_l1_norm(g: &dyn Fn(f64) -> f64, m: f64, n: usize) -> FourierNorm {
    let pad = 8;
    let total = n * pad;
    let dl = 2.0 * m / n as f64;
    let mut buf: Vec<C64> = (0..total)
        .map(|j| if j < n { C64::new(g(-m + j as f64 * dl), 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(total).process(&mut buf);
    let scale = dl / (2.0 * PI).sqrt();
    let dtau = 2.0 * PI / (total as f64 * dl);
    let mut sum = 0.0;
    let mut tail = 0.0;
    let half = total / 2;
    for (k, v) in buf.iter().enumerate() {
        let a = v.norm() * scale * dtau;
        sum += a;
        let kk = if k < half { k } else { total - k };
        if kk as f64 > 0.9 * half as f64 {
            tail += a;
        }
    }
    let tail_fraction = if sum > 0.0 { tail / sum } else { 0.0 };
    FourierNorm { value: sum, tail_fraction, aliased: tail_fraction > 0.01 }
}

/// Cubic Lagrange weights for evaluating at `y` from the four nodes `xs`.
#[inline]
pub fn lagrange4(xs: &[f64; 4], y: f64) -> [f64; 4] {
    let mut l = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                l[i] *= (y - xs[j]) / (xs[i] - xs[j]);
            }
        }
    }
    l
}

/// Index of the first node of the 4-point stencil around interval [x_i, x_{i+1}].
#[inline]
pub fn stencil_start(i: usize, last: usize) -> usize {
    let s = i.saturating_sub(1);
    s.min(last.saturating_sub(3))
}

/// Cubic interpolation of complex samples on a grid.
pub fn interp_cubic(x: &[f64], v: &[C64], y: f64) -> C64 {
    let n = x.len();
    if y <= x[0] {
        return v[0];
    }
    if y >= x[n - 1] {
        return v[n - 1];
    }
    let i = match x.binary_search_by(|p| p.partial_cmp(&y).unwrap()) {
        Ok(k) => return v[k],
        Err(k) => k - 1,
    };
    if n < 4 {
        let t = (y - x[i]) / (x[i + 1] - x[i]);
        return v[i] * (1.0 - t) + v[i + 1] * t;
    }
    let s = stencil_start(i, n - 1);
    let xs = [x[s], x[s + 1], x[s + 2], x[s + 3]];
    let l = lagrange4(&xs, y);
    v[s] * l[0] + v[s + 1] * l[1] + v[s + 2] * l[2] + v[s + 3] * l[3]
}

/// Least-squares line through (x, y): returns (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Solve rho e^rho = 1 by bisection.
pub fn omega_constant() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
