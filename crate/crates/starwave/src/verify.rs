//! Experiment drivers: the weighted chain counterexample, dispersive decay
//! scans and the invariant check suite behind `starwave check`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::born::cutoff_constants;
use crate::jost::{Network, Sign};
use crate::neteigen::{build_family, SpectralData};
use crate::netmodel::{BranchGrid, NetworkFunction, NetworkSpec};
use crate::numerics::gauss_legendre;
use crate::propagate::{evolve_free, evolve_spectral, free_evolve, EvolutionResult, Method, SpectralOptions};
use crate::resolvent::{fd_residual, resolve, KernelContext};
use crate::{Error, Result, C64};

/// Edges e_n = (n, n+1) with weights alpha_n, joined end to end.
#[derive(Clone, Debug, Serialize)]
pub struct ChainNetwork {
    pub alphas: Vec<f64>,
    /// sum of 1/alpha_n, with the tail past the last edge from a geometric fit
    pub s_sum: f64,
    pub partial_sum: f64,
    pub tail_ratio: f64,
}

impl ChainNetwork {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 3 {
            return Err(Error::Config(format!("chain needs at least 3 edges, got {}", alphas.len())));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::Config(format!("chain weights must be positive, got {a}")));
        }
        let inv: Vec<f64> = alphas.iter().map(|a| 1.0 / a).collect();
        let partial_sum: f64 = inv.iter().sum();
        let m = inv.len();
        let w = 5.min((m - 1) / 2);
        // geometric mean of the ratios of consecutive terms over the last two windows
        let ratio = |end: usize| ((inv[end] / inv[end - w]).ln() / w as f64).exp();
        let tail_ratio = ratio(m - 1);
        let previous = ratio(m - 1 - w);
        if !(tail_ratio < 0.999) || (tail_ratio - previous).abs() > 0.01 {
            return Err(Error::Config(format!(
                "no geometric tail for the sum of 1/alpha_n: ratios {previous:.4}, {tail_ratio:.4}"
            )));
        }
        let s_sum = partial_sum + inv[m - 1] * tail_ratio / (1.0 - tail_ratio);
        Ok(ChainNetwork { alphas, s_sum, partial_sum, tail_ratio })
    }

    /// alpha_n = ratio^n for n = 0..=n_max.
    pub fn geometric(ratio: f64, n_max: usize) -> Result<Self> {
        Self::new((0..=n_max).map(|n| ratio.powi(n as i32)).collect())
    }

    pub fn n_edges(&self) -> usize {
        self.alphas.len()
    }
}

pub const CHAIN_N_MAX: usize = 30;

#[derive(Clone, Debug, Serialize)]
pub struct ChainEigenfunction {
    pub k: usize,
    /// eigenvalue of -Delta_alpha, +k^2 pi^2
    pub eigenvalue: f64,
    /// local coordinate x - n on every edge
    pub s: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub h0_residual: f64,
    pub continuity_residual: f64,
    /// weighted flux mismatch from the closed-form derivative, relative to k pi sqrt(2/s)
    pub flux_residual: f64,
    /// the same from one-sided second-order differences of the samples
    pub fd_flux_residual: f64,
    /// relative l2 defect of -D^2 phi - k^2 pi^2 phi over interior samples
    pub eigen_defect: f64,
    pub sup_norm: f64,
    pub sup_norm_closed: f64,
    pub l1_norm: f64,
}

fn parity(n: usize, k: usize) -> f64 {
    if ((n as i64 - 1) * k as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// phi^{[k]} sampled at `samples` equispaced points on each edge.
pub fn chain_eigenfunction(chain: &ChainNetwork, k: usize, samples: usize) -> Result<ChainEigenfunction> {
    if k == 0 {
        return Err(Error::Config("chain eigenfunction index k must be >= 1".into()));
    }
    if samples < 5 {
        return Err(Error::Config(format!("need at least 5 samples per edge, got {samples}")));
    }
    let c = (2.0 / chain.s_sum).sqrt();
    let kp = k as f64 * PI;
    let h = 1.0 / (samples - 1) as f64;
    let s: Vec<f64> = (0..samples).map(|i| i as f64 * h).collect();
    let amp: Vec<f64> = chain.alphas.iter().enumerate().map(|(n, a)| c * parity(n, k) / a).collect();
    let values: Vec<Vec<f64>> = amp.iter().map(|a| s.iter().map(|x| a * (kp * x).sin()).collect()).collect();

    let h0_residual = values[0][0].abs();
    let scale = c * kp;
    let mut continuity_residual = 0.0f64;
    let mut flux_residual = 0.0f64;
    let mut fd_flux_residual = 0.0f64;
    let last = samples - 1;
    for n in 0..chain.n_edges() - 1 {
        let (an, am) = (chain.alphas[n], chain.alphas[n + 1]);
        continuity_residual = continuity_residual.max((values[n][last] - values[n + 1][0]).abs());
        let left = an * amp[n] * kp * kp.cos();
        let right = am * amp[n + 1] * kp;
        flux_residual = flux_residual.max((left - right).abs() / scale);
        let u = &values[n];
        let v = &values[n + 1];
        let dl = (3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * h);
        let dr = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        fd_flux_residual = fd_flux_residual.max((an * dl - am * dr).abs() / scale);
    }

    let (mut err, mut norm) = (0.0f64, 0.0f64);
    for u in &values {
        for i in 1..last {
            let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            err += (-d2 - kp * kp * u[i]).powi(2);
            norm += (kp * kp * u[i]).powi(2);
        }
    }
    let eigen_defect = (err / norm).sqrt();

    let sup_norm = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_norm_closed = c * chain.alphas.iter().map(|a| 1.0 / a).fold(0.0, f64::max);
    // |sin| integrated by Gauss-Legendre on each of the k half-waves of an edge
    let (gx, gw) = gauss_legendre(16);
    let half = 1.0 / k as f64;
    let mut edge = 0.0;
    for w in 0..k {
        let a = w as f64 * half;
        for (x, wt) in gx.iter().zip(&gw) {
            edge += 0.5 * half * wt * (kp * (a + 0.5 * half * (x + 1.0))).sin().abs();
        }
    }
    let l1_norm = amp.iter().map(|a| a.abs()).sum::<f64>() * edge;

    Ok(ChainEigenfunction {
        k,
        eigenvalue: kp * kp,
        s,
        values,
        h0_residual,
        continuity_residual,
        flux_residual,
        fd_flux_residual,
        eigen_defect,
        sup_norm,
        sup_norm_closed,
        l1_norm,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainEvolution {
    pub k: usize,
    pub times: Vec<f64>,
    pub linf: Vec<f64>,
    pub l1_0: f64,
    /// sqrt(2 s)
    pub l1_bound: f64,
}

/// Norms of u(t) = e^{-it k^2 pi^2} phi^{[k]}.
pub fn chain_evolution_norms(chain: &ChainNetwork, k: usize, times: &[f64]) -> Result<ChainEvolution> {
    let phi = chain_eigenfunction(chain, k, 100 * k + 1)?;
    let linf = times
        .iter()
        .map(|&t| {
            let ph = C64::from_polar(1.0, -t * phi.eigenvalue);
            phi.values.iter().flatten().fold(0.0f64, |m, &v| m.max((ph * v).norm()))
        })
        .collect();
    Ok(ChainEvolution { k, times: times.to_vec(), linf, l1_0: phi.l1_norm, l1_bound: (2.0 * chain.s_sum).sqrt() })
}

#[derive(Clone, Debug, Serialize)]
pub struct Contrast {
    pub times: Vec<f64>,
    /// sup-norms normalised by their value at the smallest positive time
    pub chain: Vec<f64>,
    pub star: Vec<f64>,
    pub ratio: f64,
    pub required: f64,
    pub star_decreasing: bool,
    pub chain_constant: bool,
    pub holds: bool,
}

/// Chain sup-norm against the free star (N = 3, data e^{-x^2} on every branch).
pub fn counterexample_contrast(chain: &ChainNetwork, k: usize, times: &[f64]) -> Result<Contrast> {
    let pos: Vec<f64> = times.iter().cloned().filter(|&t| t > 0.0).collect();
    if pos.len() < 2 {
        return Err(Error::Config("contrast needs at least two positive times".into()));
    }
    let ch = chain_evolution_norms(chain, k, &pos)?;
    let x = Arc::new(BranchGrid::default().nodes());
    let f = NetworkFunction::from_real(x, 3, |_, x| (-x * x).exp());
    let star = evolve_free(&f, &pos);
    let c: Vec<f64> = ch.linf.iter().map(|v| v / ch.linf[0]).collect();
    let s: Vec<f64> = star.sup_norms.iter().map(|v| v / star.sup_norms[0]).collect();
    let last = pos.len() - 1;
    let ratio = c[last] / s[last];
    let required = (pos[last] / pos[0]).powf(0.4);
    let star_decreasing = s.windows(2).all(|w| w[1] < w[0]);
    let chain_constant = c.iter().all(|v| (v - 1.0).abs() < 1e-12);
    Ok(Contrast {
        times: pos,
        chain: c,
        star: s,
        ratio,
        required,
        star_decreasing,
        chain_constant,
        holds: ratio > required && star_decreasing && chain_constant,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub slope: f64,
    /// empirical C = sup_t ||u(t)||_inf t^{1/2} / ||f||_1
    pub intercept: f64,
    /// intercept of the log-log fit
    pub fit_intercept: f64,
    pub window: (f64, f64),
    /// rms residual of the fit
    pub residual: f64,
    pub accepted: bool,
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub method: Method,
    /// set when the propagation did not meet its tolerance
    pub flagged: Option<String>,
}

pub const ACCEPT_RESIDUAL: f64 = 0.05;

/// Run e^{itH} on f at every time and fit log ||u||_inf against log t on the window.
pub fn decay_scan(
    net: &Network,
    f: &NetworkFunction,
    times: &[f64],
    method: Method,
    window: (f64, f64),
    opts: &SpectralOptions,
) -> Result<(DecayReport, EvolutionResult)> {
    if let Some(a) = net.check_assumption()?.iter().find(|a| !a.holds) {
        return Err(Error::Config(format!("branch {}: the vertex assumption fails (|gamma| = {:.3e})", a.branch, a.gamma_coef.norm())));
    }
    let (r, flagged) = match method {
        Method::Free => {
            if !net.spec.potentials.iter().all(|p| p.is_zero()) {
                return Err(Error::Config("the free method needs V = 0 on every branch".into()));
            }
            (evolve_free(f, times), None)
        }
        Method::Spectral => {
            let r = evolve_spectral(net, f, times, opts)?;
            let q = r.quadrature.as_ref().expect("spectral result carries quadrature info");
            let flag = (!q.converged).then(|| format!("spectral quadrature unconverged, estimate {:.3e}", q.error_estimate));
            (r, flag)
        }
    };
    let (slope, fit_intercept, residual) = r
        .fit(window)
        .ok_or_else(|| Error::Config(format!("fewer than two positive times in the window {window:?}")))?;
    let l1 = f.norms().l1;
    let intercept =
        r.times.iter().zip(&r.sup_norms).filter(|(t, _)| **t > 0.0).map(|(t, s)| s * t.sqrt() / l1).fold(0.0, f64::max);
    if let Some(msg) = &flagged {
        log::warn!("{msg}");
    }
    let report = DecayReport {
        slope,
        intercept,
        fit_intercept,
        window,
        residual,
        accepted: residual < ACCEPT_RESIDUAL && flagged.is_none(),
        times: r.times.clone(),
        sup_norms: r.sup_norms.clone(),
        method,
        flagged,
    };
    Ok((report, r))
}

/// Initial data profile on one branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataProfile {
    Zero,
    /// a exp(-(x - c)^2 / (2 w^2))
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// a exp(-1 / (1 - s^2)) with s = (x - c)/r, zero for |s| >= 1
    Bump { amplitude: f64, center: f64, radius: f64 },
}

impl DataProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            DataProfile::Zero => 0.0,
            DataProfile::Gaussian { amplitude, center, width } => {
                amplitude * (-(x - center) * (x - center) / (2.0 * width * width)).exp()
            }
            DataProfile::Bump { amplitude, center, radius } => {
                let s = (x - center) / radius;
                if s.abs() < 1.0 {
                    amplitude * (-1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DataProfile::Zero => true,
            DataProfile::Gaussian { amplitude, width, .. } => amplitude.is_finite() && width > 0.0,
            DataProfile::Bump { amplitude, radius, .. } => amplitude.is_finite() && radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bad data profile {self:?}")))
        }
    }
}

/// A network spec plus optional initial data and spectral cutoff.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub data: Option<Vec<DataProfile>>,
    #[serde(default)]
    pub lambda_max: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.network.validate()?;
        if let Some(d) = &c.data {
            if d.len() != c.network.n_branches {
                return Err(Error::Config(format!("{} data profiles for {} branches", d.len(), c.network.n_branches)));
            }
            d.iter().try_for_each(|p| p.validate())?;
        }
        if let Some(l) = c.lambda_max {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda_max must be positive, got {l}")));
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The configured data, or e^{-x^2/2} on every branch.
    pub fn data_function(&self, x: Arc<Vec<f64>>) -> NetworkFunction {
        let n = self.network.n_branches;
        match &self.data {
            Some(d) => NetworkFunction::from_real(x, n, |k, x| d[k].eval(x)),
            None => NetworkFunction::from_real(x, n, |_, x| (-x * x / 2.0).exp()),
        }
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        let mut o = SpectralOptions::default();
        if let Some(l) = self.lambda_max {
            o.lambda_max = l;
        }
        o
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub checks: Vec<CheckItem>,
}

impl CheckReport {
    pub fn failures(&self) -> Vec<&CheckItem> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn item(name: &str, tol: f64, r: Result<f64>) -> CheckItem {
    match r {
        Ok(value) => CheckItem { name: name.into(), value, tol, passed: value < tol, error: None },
        Err(e) => CheckItem { name: name.into(), value: f64::NAN, tol, passed: false, error: Some(e.to_string()) },
    }
}

fn bump_data(x: Arc<Vec<f64>>, n: usize) -> NetworkFunction {
    let b = |c: f64, r: f64, x: f64| DataProfile::Bump { amplitude: 1.0, center: c, radius: r }.eval(x);
    NetworkFunction::from_real(x, n, move |k, x| match k {
        0 => b(3.0, 1.5, x),
        1 => 0.5 * b(2.0, 1.0, x),
        _ => 0.0,
    })
}

/// The invariant suite for one network, plus the network-independent chain and
/// cutoff checks.
pub fn run_checks(spec: &NetworkSpec) -> Result<CheckReport> {
    let net = Network::new(spec.clone())?;
    let n = net.n();
    let mut checks = Vec::new();

    let zs: Vec<f64> = (0..40).map(|i| 0.05 + (20.0 - 0.05) * i as f64 / 39.0).collect();
    checks.push(item(
        "unitarity",
        1e-6,
        (0..n).try_fold(0.0f64, |m, j| {
            let sd = net.scattering(j, &zs)?;
            Ok(sd.unitarity_defect.iter().fold(m, |a, &b| a.max(b)))
        }),
    ));

    let mut vertex = Ok(0.0f64);
    let mut paths = Ok(0.0f64);
    for i in 0..12 {
        let z = C64::new(0.1 + 1.7 * i as f64, 0.01 * (i % 3) as f64);
        let sign = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let r = SpectralData::new(&net, z).and_then(|sd| build_family(&sd, i % n, sign));
        match r {
            Ok(fam) => {
                vertex = vertex.map(|m| m.max(fam.continuity_residual).max(fam.kirchhoff_residual));
                paths = paths.map(|m| m.max(fam.path_mismatch()));
            }
            Err(e) => {
                let msg = e.to_string();
                vertex = Err(Error::Quality(msg.clone()));
                paths = Err(Error::Quality(msg));
                break;
            }
        }
    }
    checks.push(item("vertex_residual", 1e-10, vertex));
    checks.push(item("coefficient_paths", 1e-9, paths));

    let z = C64::new(1.0, 0.5);
    let f = bump_data(net.x.clone(), n);
    checks.push(item("resolvent_fd_residual", 1e-3, resolve(&net, &f, z).map(|u| fd_residual(spec, &u, &f, z))));

    checks.push(item(
        "kernel_symmetry",
        1e-8,
        KernelContext::new(&net, C64::new(1.3, 0.2)).map(|ctx| {
            let pts = [(0, 0.4, n - 1, 3.0), (0, 1.5, 0, 7.0), (n - 1, 0.0, 1, 12.0)];
            pts.iter().fold(0.0f64, |m, &(j, x, k, xp)| {
                let a = ctx.kernel(j, x, k, xp).value;
                let b = ctx.kernel(k, xp, j, x).value;
                m.max((a - b).norm() / a.norm().max(1e-3))
            })
        }),
    ));

    if spec.potentials.iter().all(|p| p.is_zero()) {
        let g = NetworkFunction::from_real(net.x.clone(), n, |k, x| if k == 0 { (-(x - 5.0) * (x - 5.0)).exp() } else { 0.0 });
        let opts = SpectralOptions { lambda_max: 100.0, refine: false, ..Default::default() };
        checks.push(item(
            "free_vs_spectral",
            1e-3,
            evolve_spectral(&net, &g, &[5.0], &opts).map(|r| r.states[0].sub(&free_evolve(&g, 5.0)).norms().linf),
        ));
    }

    let chain = ChainNetwork::geometric(2.0, CHAIN_N_MAX)?;
    let t: Vec<f64> = (0..11).map(|i| 5.0 * i as f64).collect();
    let ev = chain_evolution_norms(&chain, 1, &t)?;
    checks.push(item("chain_linf_constant", 1e-12, Ok(ev.linf.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs())))));
    checks.push(item("chain_l1", 1e-6, Ok((ev.l1_0 - 4.0 / PI).abs())));
    let phi = chain_eigenfunction(&chain, 1, 101)?;
    checks.push(item("chain_flux", 1e-8, Ok(phi.flux_residual.max(phi.h0_residual).max(phi.continuity_residual))));

    checks.push(item(
        "cutoff_constants",
        1.0,
        cutoff_constants(1.0, 4.0, 6).map(|c| c.margins.iter().fold(0.0f64, |m, &v| m.max(1.0 / v))),
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(CheckReport { passed, checks })
}
