//! Star network description: branch potentials, the shared radial grid and
//! sampled network functions.

use crate::error::{Error, Result};
use crate::numerics::{adaptive_integrate, gauss_legendre, trapezoid_weights};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    ExpDecay { amplitude: f64, rate: f64 },
    SquareBump { height: f64, left: f64, right: f64 },
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    Table { x: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    3.0
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Self {
        PotentialSpec { kind, gamma: default_gamma() }
    }
    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero)
    }
    pub fn exp_decay(amplitude: f64, rate: f64) -> Self {
        Self::new(PotentialKind::ExpDecay { amplitude, rate })
    }
    pub fn square(height: f64, left: f64, right: f64) -> Self {
        Self::new(PotentialKind::SquareBump { height, left, right })
    }
    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Self {
        Self::new(PotentialKind::GaussianBump { amplitude, center, width })
    }
    pub fn table(x: Vec<f64>, values: Vec<f64>) -> Self {
        Self::new(PotentialKind::Table { x, values })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match &self.kind {
            PotentialKind::Zero => {}
            PotentialKind::ExpDecay { amplitude, rate } => {
                if !amplitude.is_finite() || !(*rate > 0.0) {
                    return bad("exp_decay needs finite amplitude and rate > 0");
                }
            }
            PotentialKind::SquareBump { height, left, right } => {
                if !height.is_finite() || !(*left >= 0.0) || !(right > left) {
                    return bad("square_bump needs 0 <= left < right");
                }
            }
            PotentialKind::GaussianBump { amplitude, center, width } => {
                if !amplitude.is_finite() || !(*center >= 0.0) || !(*width > 0.0) {
                    return bad("gaussian_bump needs center >= 0 and width > 0");
                }
            }
            PotentialKind::Table { x, values } => {
                if x.len() != values.len() || x.len() < 2 {
                    return bad("table needs matching x/values arrays of length >= 2");
                }
                if x[0] < 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("table x samples must be increasing and >= 0");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("table values must be finite");
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::ExpDecay { amplitude, .. } => *amplitude == 0.0,
            PotentialKind::SquareBump { height, .. } => *height == 0.0,
            PotentialKind::GaussianBump { amplitude, .. } => *amplitude == 0.0,
            PotentialKind::Table { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// V(x); zero for x < 0.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::ExpDecay { amplitude, rate } => amplitude * (-rate * x).exp(),
            PotentialKind::SquareBump { height, left, right } => {
                if x >= *left && x <= *right {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::GaussianBump { amplitude, center, width } => {
                let u = (x - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
            PotentialKind::Table { x: xs, values } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
                    Ok(k) => return values[k],
                    Err(k) => k - 1,
                };
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] * (1.0 - t) + values[k + 1] * t
            }
        }
    }

    /// Points where V or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::SquareBump { left, right, .. } => vec![*left, *right],
            PotentialKind::Table { x, .. } => x.clone(),
            _ => vec![],
        }
    }

    /// Integral of (1 + y)|V(y)| over [x, infinity).
    pub fn tail_bound(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::ExpDecay { amplitude, rate } => {
                amplitude.abs() * (-rate * x).exp() * ((1.0 + x) / rate + 1.0 / (rate * rate))
            }
            PotentialKind::SquareBump { height, left, right } => {
                let a = left.max(x);
                if a >= *right {
                    0.0
                } else {
                    height.abs() * ((right - a) + 0.5 * (right * right - a * a))
                }
            }
            PotentialKind::GaussianBump { amplitude, center, width } => {
                // int_x^inf (1+y) e^{-(y-c)^2/(2w^2)} dy in closed form.
                let s2 = std::f64::consts::SQRT_2 * width;
                let u = (x - center) / s2;
                let gauss_tail = 0.5 * s2 * std::f64::consts::PI.sqrt() * libm::erfc(u);
                let mom = width * width * (-u * u).exp();
                amplitude.abs() * ((1.0 + center) * gauss_tail + mom)
            }
            PotentialKind::Table { x: xs, .. } => {
                let b = xs[xs.len() - 1];
                if x >= b {
                    0.0
                } else {
                    self.piecewise_integral(x, b, &|y| 1.0 + y)
                }
            }
        }
    }

    /// Integral of |V(y)| w(y) on [a, b] for a table potential, exact per segment.
    fn piecewise_integral(&self, a: f64, b: f64, w: &dyn Fn(f64) -> f64) -> f64 {
        let (gx, gw) = gauss_legendre(8);
        let mut pts = vec![a];
        for p in self.breakpoints() {
            if p > a && p < b {
                pts.push(p);
            }
        }
        pts.push(b);
        let mut total = 0.0;
        for seg in pts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let (vl, vh) = (self.eval(lo), self.eval(hi));
            // split at a sign change so |V| is linear on each piece
            let mut cuts = vec![lo];
            if vl * vh < 0.0 {
                cuts.push(lo + (hi - lo) * vl / (vl - vh));
            }
            cuts.push(hi);
            for c in cuts.windows(2) {
                let m = 0.5 * (c[0] + c[1]);
                let h = 0.5 * (c[1] - c[0]);
                total += gx.iter().zip(&gw).map(|(x, wt)| {
                    let y = m + h * x;
                    wt * self.eval(y).abs() * w(y)
                }).sum::<f64>() * h;
            }
        }
        total
    }

    /// int_0^inf (1+y)|V|: the constant controlling the Jost function bounds.
    pub fn gamma_integral(&self) -> f64 {
        self.tail_bound(0.0)
    }

    /// int_0^inf |V(x)| (1+x^2)^{s/2} dx.
    pub fn weighted_norm(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("weighted_norm needs s >= 0, got {s}")));
        }
        let w = |y: f64| (1.0 + y * y).powf(0.5 * s);
        Ok(match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::ExpDecay { amplitude, rate } if s == 0.0 => amplitude.abs() / rate,
            PotentialKind::ExpDecay { amplitude, rate } if s == 2.0 => {
                amplitude.abs() * (1.0 / rate + 2.0 / rate.powi(3))
            }
            PotentialKind::SquareBump { height, left, right } if s == 0.0 => height.abs() * (right - left),
            PotentialKind::SquareBump { height, left, right } => {
                let f = |y: f64| w(y);
                height.abs() * adaptive_integrate(&f, *left, *right, 1e-13 * (1.0 + right))
            }
            PotentialKind::ExpDecay { amplitude, rate } => {
                let f = |y: f64| (-rate * y).exp() * w(y);
                amplitude.abs() * integrate_half_line(&f, 1.0 / rate)
            }
            PotentialKind::GaussianBump { amplitude, center, width } => {
                let f = |y: f64| {
                    let u = (y - center) / width;
                    (-0.5 * u * u).exp() * w(y)
                };
                let hi = center + 40.0 * width;
                let lo = (center - 40.0 * width).max(0.0);
                amplitude.abs() * adaptive_integrate(&f, lo, hi, 1e-14 * (1.0 + hi).powf(s))
            }
            PotentialKind::Table { x, values } => {
                let n = x.len();
                let vmax = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let (vl, vp) = (values[n - 1].abs(), values[n - 2].abs());
                if vl > 1e-12 * vmax && vp > 0.0 {
                    let slope = (vl / vp).ln() / (x[n - 1] / x[n - 2].max(1e-300)).ln();
                    if !(slope < -(1.0 + s)) {
                        return Err(Error::NotIntegrable(format!(
                            "table tail decays like x^{slope:.2}, weight exponent {s}"
                        )));
                    }
                }
                self.piecewise_integral(x[0], x[n - 1], &w)
            }
        })
    }

    /// Radius beyond which (1+y)|V| integrates to less than `eps`.
    pub fn support_end(&self, eps: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareBump { right, .. } => *right,
            PotentialKind::Table { x, .. } => x[x.len() - 1],
            _ => {
                if self.is_zero() {
                    return 0.0;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.tail_bound(hi) > eps {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return hi;
                    }
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail_bound(mid) > eps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }
}

fn integrate_half_line(f: &dyn Fn(f64) -> f64, scale: f64) -> f64 {
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = scale;
    loop {
        let part = adaptive_integrate(f, a, b, 1e-15 * (1.0 + total));
        total += part;
        if b > 50.0 * scale && part.abs() < 1e-16 * total.abs().max(1e-300) {
            break;
        }
        if b > 1e7 {
            break;
        }
        a = b;
        b *= 2.0;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    Uniform,
    Graded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchGrid {
    pub x_max: f64,
    pub n_points: usize,
    #[serde(default = "default_scheme")]
    pub scheme: GridScheme,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_scheme() -> GridScheme {
    GridScheme::Graded
}
fn default_grading() -> f64 {
    1.5
}

impl Default for BranchGrid {
    fn default() -> Self {
        BranchGrid { x_max: 40.0, n_points: 4001, scheme: GridScheme::Graded, grading: 1.5 }
    }
}

impl BranchGrid {
    pub fn uniform(x_max: f64, n_points: usize) -> Self {
        BranchGrid { x_max, n_points, scheme: GridScheme::Uniform, grading: 1.0 }
    }
    pub fn graded(x_max: f64, n_points: usize) -> Self {
        BranchGrid { x_max, n_points, scheme: GridScheme::Graded, grading: 1.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0) || self.n_points < 16 {
            return Err(Error::Config("grid needs x_max > 0 and n_points >= 16".into()));
        }
        if self.scheme == GridScheme::Graded && !(self.grading >= 1.0) {
            return Err(Error::Config("grading exponent must be >= 1".into()));
        }
        Ok(())
    }

    /// The grid with (roughly) twice the resolution, containing all the old nodes.
    pub fn refined(&self) -> Self {
        BranchGrid { n_points: 2 * self.n_points - 1, ..self.clone() }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_points - 1;
        (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                match self.scheme {
                    GridScheme::Uniform => self.x_max * s,
                    GridScheme::Graded => self.x_max * s.powf(self.grading),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_branches: usize,
    pub potentials: Vec<PotentialSpec>,
    #[serde(default)]
    pub grid: BranchGrid,
}

impl NetworkSpec {
    pub fn new(potentials: Vec<PotentialSpec>, grid: BranchGrid) -> Result<Self> {
        let s = NetworkSpec { n_branches: potentials.len(), potentials, grid };
        s.validate()?;
        Ok(s)
    }

    pub fn free(n: usize, grid: BranchGrid) -> Result<Self> {
        Self::new(vec![PotentialSpec::zero(); n], grid)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: NetworkSpec = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_branches < 2 {
            return Err(Error::Config(format!("need N >= 2 branches, got {}", self.n_branches)));
        }
        if self.potentials.len() != self.n_branches {
            return Err(Error::Config(format!(
                "{} potentials given for {} branches",
                self.potentials.len(),
                self.n_branches
            )));
        }
        self.grid.validate()?;
        for (j, p) in self.potentials.iter().enumerate() {
            p.validate()?;
            if p.gamma <= 2.5 {
                log::warn!("branch {j}: decay exponent {} <= 5/2, dispersive estimate not covered", p.gamma);
            }
            match p.weighted_norm(p.gamma) {
                Ok(v) if v.is_finite() => {}
                Ok(_) | Err(_) => log::warn!("branch {j}: weighted norm with exponent {} is not finite", p.gamma),
            }
        }
        Ok(())
    }

    /// Verify that every branch potential is negligible beyond x_max.
    pub fn check_tail(&self, tail_tol: f64) -> Result<()> {
        for (j, p) in self.potentials.iter().enumerate() {
            let v = p.tail_bound(self.grid.x_max);
            if v >= tail_tol {
                return Err(Error::Tail { branch: j, value: v, tol: tail_tol });
            }
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.potentials.iter().map(|p| p.weighted_norm(0.0).unwrap_or(f64::INFINITY)).sum()
    }

    pub fn nodes(&self) -> Arc<Vec<f64>> {
        Arc::new(self.grid.nodes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Complex samples of f = (f_k) on the shared radial grid.
#[derive(Clone, Debug)]
pub struct NetworkFunction {
    pub x: Arc<Vec<f64>>,
    pub values: Vec<Vec<C64>>,
}

impl NetworkFunction {
    pub fn zeros(x: Arc<Vec<f64>>, n_branches: usize) -> Self {
        let n = x.len();
        NetworkFunction { x, values: vec![vec![C64::new(0.0, 0.0); n]; n_branches] }
    }

    pub fn from_fn(x: Arc<Vec<f64>>, n_branches: usize, f: impl Fn(usize, f64) -> C64) -> Self {
        let values = (0..n_branches).map(|k| x.iter().map(|&xi| f(k, xi)).collect()).collect();
        NetworkFunction { x, values }
    }

    pub fn from_real(x: Arc<Vec<f64>>, n_branches: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        Self::from_fn(x, n_branches, |k, y| C64::new(f(k, y), 0.0))
    }

    pub fn n_branches(&self) -> usize {
        self.values.len()
    }

    pub fn norms(&self) -> Norms {
        let w = trapezoid_weights(&self.x);
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf = 0.0f64;
        for b in &self.values {
            for (v, wi) in b.iter().zip(&w) {
                let a = v.norm();
                l1 += wi * a;
                l2 += wi * a * a;
                linf = linf.max(a);
            }
        }
        Norms { l1, l2: l2.sqrt(), linf }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().flatten().all(|v| v.im == 0.0)
    }

    pub fn conj(&self) -> Self {
        NetworkFunction {
            x: self.x.clone(),
            values: self.values.iter().map(|b| b.iter().map(|v| v.conj()).collect()).collect(),
        }
    }

    pub fn scale(&self, a: C64) -> Self {
        NetworkFunction {
            x: self.x.clone(),
            values: self.values.iter().map(|b| b.iter().map(|v| v * a).collect()).collect(),
        }
    }

    /// a*self + b*other.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        NetworkFunction {
            x: self.x.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// Bilinear pairing sum_k int f_k g_k (no conjugation), by trapezoid.
    pub fn pair(&self, other: &Self) -> C64 {
        let w = trapezoid_weights(&self.x);
        let mut s = C64::new(0.0, 0.0);
        for (u, v) in self.values.iter().zip(&other.values) {
            for ((p, q), wi) in u.iter().zip(v).zip(&w) {
                s += p * q * wi;
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["branch", "x", "re", "im"])?;
        for (k, b) in self.values.iter().enumerate() {
            for (x, v) in self.x.iter().zip(b) {
                wr.write_record(&[k.to_string(), x.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut rows: Vec<(usize, f64, C64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let p = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad CSV field {i} in {:?}", rec)))
            };
            rows.push((p(0)? as usize, p(1)?, C64::new(p(2)?, p(3)?)));
        }
        let nb = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1);
        let x: Vec<f64> = rows.iter().filter(|r| r.0 == 0).map(|r| r.1).collect();
        let mut values = vec![Vec::with_capacity(x.len()); nb];
        for (k, xi, v) in &rows {
            let b = &mut values[*k];
            if b.len() >= x.len() || (x[b.len()] - xi).abs() > 1e-12 * (1.0 + xi.abs()) {
                return Err(Error::Config("network function branches must share one grid".into()));
            }
            b.push(*v);
        }
        if values.iter().any(|b| b.len() != x.len()) {
            return Err(Error::Config("network function branches must share one grid".into()));
        }
        Ok(NetworkFunction { x: Arc::new(x), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(PotentialSpec::zero().weighted_norm(2.0).unwrap(), 0.0);
        assert!((PotentialSpec::exp_decay(1.0, 1.0).weighted_norm(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((PotentialSpec::square(2.0, 0.0, 1.0).weighted_norm(0.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        // s = 2 has a closed form; recompute it through the generic quadrature path
        let p = PotentialSpec::exp_decay(1.5, 0.7);
        let closed = p.weighted_norm(2.0).unwrap();
        let f = |y: f64| (-0.7 * y).exp() * (1.0 + y * y);
        let quad = 1.5 * integrate_half_line(&f, 1.0 / 0.7);
        assert!((closed - quad).abs() < 1e-8 * closed);
    }

    #[test]
    fn negative_x_is_zero() {
        for p in [PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::square(2.0, 0.0, 1.0),
                  PotentialSpec::gaussian(1.0, 0.0, 1.0), PotentialSpec::table(vec![0.0, 1.0], vec![1.0, 0.0])] {
            assert_eq!(p.eval(-1e-9), 0.0);
        }
    }

    #[test]
    fn tail_bounds() {
        let p = PotentialSpec::gaussian(1.0, 2.0, 0.5);
        let x0 = 1.0;
        let f = |y: f64| (1.0 + y) * p.eval(y);
        let q = adaptive_integrate(&f, x0, 30.0, 1e-14);
        assert!((p.tail_bound(x0) - q).abs() < 1e-10);
        let t = PotentialSpec::table(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0]);
        let f = |y: f64| (1.0 + y) * t.eval(y).abs();
        let q = adaptive_integrate(&f, 0.0, 0.5, 1e-14) + adaptive_integrate(&f, 0.5, 1.0, 1e-14)
            + adaptive_integrate(&f, 1.0, 2.0, 1e-14);
        assert!((t.tail_bound(0.0) - q).abs() < 1e-12);
    }

    #[test]
    fn table_tail_not_integrable() {
        let t = PotentialSpec::table(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]);
        assert!(matches!(t.weighted_norm(0.0), Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::free(1, BranchGrid::default()).is_err());
        let s = NetworkSpec { n_branches: 3, potentials: vec![PotentialSpec::zero(); 2], grid: BranchGrid::default() };
        assert!(s.validate().is_err());
        let json = r#"{"n_branches": 2, "potentials": [{"kind": "zero"}, {"kind": "exp_decay", "amplitude": 1.0, "rate": 1.0}],
                       "grid": {"x_max": 40.0, "n_points": 101, "scheme": "graded"}}"#;
        let s = NetworkSpec::from_json(json).unwrap();
        assert_eq!(s.potentials[1].gamma, 3.0);
        assert!(s.check_tail(DEFAULT_TAIL_TOL).is_ok());
        let short = NetworkSpec { grid: BranchGrid::graded(5.0, 101), ..s };
        assert!(matches!(short.check_tail(DEFAULT_TAIL_TOL), Err(Error::Tail { .. })));
    }

    #[test]
    fn norms_examples() {
        let x = Arc::new(BranchGrid::uniform(2.0, 201).nodes());
        let z = NetworkFunction::zeros(x.clone(), 3);
        assert_eq!(z.norms(), Norms { l1: 0.0, l2: 0.0, linf: 0.0 });
        let ind = NetworkFunction::from_real(x.clone(), 2, |_, y| if y <= 1.0 { 1.0 } else { 0.0 });
        // trapezoid smears the jump over one cell: half a cell per branch
        assert!((ind.norms().l1 - 2.0 - 0.01).abs() < 1e-12);
        let e = NetworkFunction::from_real(x, 3, |k, y| if k == 0 { (-y).exp() } else { 0.0 });
        assert_eq!(e.norms().linf, 1.0);
    }

    #[test]
    fn csv_roundtrip() {
        let x = Arc::new(BranchGrid::graded(3.0, 20).nodes());
        let f = NetworkFunction::from_fn(x, 2, |k, y| C64::new(y, k as f64));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = NetworkFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.values, f.values);
    }
}
