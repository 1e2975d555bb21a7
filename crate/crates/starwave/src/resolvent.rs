//! The resolvent kernel of the network and its application to functions.
//!
//! `kernel` returns K with the normalization in which K equals the free kernel
//! K0 at V = 0 (the kernel of (z^2 - H)^{-1}); `resolve` returns (H - z^2)^{-1} f.

use crate::error::{Error, Result};
use crate::jost::{sqrt_plus, JostSolution, Network, Sign};
use crate::neteigen::{build_family, SpectralData};
use crate::netmodel::{NetworkFunction, NetworkSpec};
use crate::numerics::{exp_weights, trapezoid_weights};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest number of kernel entries materialized at once.
pub const MAX_KERNEL_ENTRIES: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelCase {
    SameBranchXpGtX,
    SameBranchXpLtX,
    CrossBranch,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelEval {
    pub branch: usize,
    pub x: f64,
    pub branch_p: usize,
    pub xp: f64,
    pub z: C64,
    pub value: C64,
    pub case: KernelCase,
}

/// Everything the kernel needs at one spectral point z.
#[derive(Clone, Debug)]
pub struct KernelContext {
    pub z: C64,
    pub x: Arc<Vec<f64>>,
    pub plus: Vec<JostSolution>,
    pub minus: Vec<JostSolution>,
    /// f_{k,+}(z, 0)
    pub a: Vec<C64>,
    /// f'_{k,+}(z, 0) / f_{k,+}(z, 0)
    pub rho: Vec<C64>,
    /// W_{k,-} = f'_{k,+}(0) + iz f_{k,+}(0)
    pub omega: Vec<C64>,
    pub sum_rho: C64,
    /// per cell: e^{izh}, h phi2(izh), h psi(izh)
    cells: Vec<(C64, C64, C64)>,
    phase: Vec<C64>,
}

impl KernelContext {
    pub fn new(net: &Network, z: C64) -> Result<Self> {
        if z.norm() == 0.0 {
            return Err(Error::Domain("the kernel is not defined at z = 0".into()));
        }
        if z.im < 0.0 {
            return Err(Error::Domain(format!("kernel needs Im z >= 0, got {z}")));
        }
        let n = net.n();
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for j in 0..n {
            plus.push(net.solve_m(j, z, Sign::Plus)?);
            minus.push(net.solve_m(j, z, Sign::Minus)?);
        }
        Self::from_solutions(z, plus, minus)
    }

    pub fn from_spectral(sd: &SpectralData) -> Result<Self> {
        Self::from_solutions(sd.z, sd.plus.clone(), sd.minus.clone())
    }

    fn from_solutions(z: C64, plus: Vec<JostSolution>, minus: Vec<JostSolution>) -> Result<Self> {
        let x = plus[0].x.clone();
        let a: Vec<C64> = plus.iter().map(|s| s.f[0]).collect();
        let b: Vec<C64> = plus.iter().map(|s| s.df[0]).collect();
        if let Some(k) = a.iter().position(|v| v.norm() < 1e-14) {
            return Err(Error::PoleProximity(z.norm(), format!("f_(k={k},+)(z,0) vanishes")));
        }
        let rho: Vec<C64> = a.iter().zip(&b).map(|(a, b)| b / a).collect();
        let omega: Vec<C64> = a.iter().zip(&b).map(|(a, b)| b + I * z * a).collect();
        let sum_rho: C64 = rho.iter().sum();
        if sum_rho.norm() < 1e-14 {
            return Err(Error::PoleProximity(z.norm(), "s(z) vanishes".into()));
        }
        if let Some(k) = omega.iter().position(|w| w.norm() < 1e-14) {
            return Err(Error::DegenerateWronskian(omega[k].norm()));
        }
        let cells = x.windows(2).map(|w| {
            let h = w[1] - w[0];
            let (e, p2, ps) = exp_weights(I * z * h);
            (e, h * p2, h * ps)
        }).collect();
        let phase = x.iter().map(|&xi| (I * z * xi).exp()).collect();
        Ok(KernelContext { z, x, plus, minus, a, rho, omega, sum_rho, cells, phase })
    }

    pub fn n(&self) -> usize {
        self.plus.len()
    }

    /// -(sum_{k != j} rho_k - iz) / (a_j sum(rho) W_{j,-}), the weight of f_{j,+} f_{j,+}.
    fn same_coef(&self, j: usize) -> C64 {
        let others = self.sum_rho - self.rho[j];
        -(others - I * self.z) / (self.a[j] * self.sum_rho * self.omega[j])
    }

    fn combine(&self, j: usize, x: f64, k: usize, xp: f64, fp: (C64, C64), fq: (C64, C64)) -> (C64, KernelCase) {
        // fp = (f_{j,-}(x), f_{j,+}(x)), fq = (f_{k,-}(x'), f_{k,+}(x'))
        if j != k {
            return (fp.1 * fq.1 / (self.a[j] * self.a[k] * self.sum_rho), KernelCase::CrossBranch);
        }
        let c = self.same_coef(j);
        if xp >= x {
            (fp.0 * fq.1 / self.omega[j] + c * fp.1 * fq.1, KernelCase::SameBranchXpGtX)
        } else {
            (fq.0 * fp.1 / self.omega[j] + c * fp.1 * fq.1, KernelCase::SameBranchXpLtX)
        }
    }

    /// K(x, x') at arbitrary points, by interpolation of the Jost factors.
    pub fn kernel(&self, j: usize, x: f64, k: usize, xp: f64) -> KernelEval {
        let fp = (self.minus[j].f_at(x), self.plus[j].f_at(x));
        let fq = (self.minus[k].f_at(xp), self.plus[k].f_at(xp));
        let (value, case) = self.combine(j, x, k, xp, fp, fq);
        KernelEval { branch: j, x, branch_p: k, xp, z: self.z, value, case }
    }

    /// K at grid nodes i (branch j) and l (branch k).
    pub fn kernel_nodes(&self, j: usize, i: usize, k: usize, l: usize) -> C64 {
        let fp = (self.minus[j].f[i], self.plus[j].f[i]);
        let fq = (self.minus[k].f[l], self.plus[k].f[l]);
        self.combine(j, self.x[i], k, self.x[l], fp, fq).0
    }

    /// (K g)(x) = integral of K(x, x') g(x') dx' over the network, in O(n) per branch.
    ///
    /// With S+(x) = int_x^inf e^{iz(y-x)} m_+ g and S-(x) = int_0^x e^{iz(x-y)} m_- g,
    /// (Kg)_j = (m_- S+ + m_+ S-)/W_j + e^{izx} m_+ Q_j for a constant Q_j.
    pub fn apply(&self, g: &NetworkFunction) -> NetworkFunction {
        let n = self.n();
        let len = self.x.len();
        let mut sp = vec![vec![C64::new(0.0, 0.0); len]; n];
        let mut sm = vec![vec![C64::new(0.0, 0.0); len]; n];
        for j in 0..n {
            let gp: Vec<C64> = self.plus[j].m.iter().zip(&g.values[j]).map(|(m, v)| m * v).collect();
            let gm: Vec<C64> = self.minus[j].m.iter().zip(&g.values[j]).map(|(m, v)| m * v).collect();
            let (p, q) = (&mut sp[j], &mut sm[j]);
            for i in (0..len - 1).rev() {
                let (e, w2, ws) = self.cells[i];
                p[i] = e * p[i + 1] + w2 * gp[i] + ws * gp[i + 1];
            }
            for i in 0..len - 1 {
                let (e, w2, ws) = self.cells[i];
                q[i + 1] = e * q[i] + w2 * gm[i + 1] + ws * gm[i];
            }
        }
        // J_k = int f_{k,+} g_k = S+_k(0)
        let jk: Vec<C64> = sp.iter().map(|s| s[0]).collect();
        let sum_j: C64 = (0..n).map(|k| jk[k] / self.a[k]).sum();
        let mut values = Vec::with_capacity(n);
        for j in 0..n {
            let others = self.sum_rho - self.rho[j];
            let qj = ((sum_j - jk[j] / self.a[j]) - (others - I * self.z) * jk[j] / self.omega[j])
                / (self.a[j] * self.sum_rho);
            let (mp, mm) = (&self.plus[j].m, &self.minus[j].m);
            let out: Vec<C64> = (0..len)
                .map(|i| (mm[i] * sp[j][i] + mp[i] * sm[j][i]) / self.omega[j] + self.phase[i] * mp[i] * qj)
                .collect();
            values.push(out);
        }
        NetworkFunction { x: self.x.clone(), values }
    }

    /// K(x, x') through the eigenfunction families F^{-,j} and F^{-,j+1}, at grid nodes.
    pub fn kernel_via_families(&self, sd: &SpectralData, j: usize, i: usize, k: usize, l: usize) -> Result<C64> {
        let n = self.n();
        let jn = (j + 1) % n;
        let fj = build_family(sd, j, Sign::Minus)?;
        let fjn = build_family(sd, jn, Sign::Minus)?;
        // W_j = c_{j,-,1} d_{j+1,j,-} W_{j,-}
        let w = fj.c1 * fjn.d[j] * fj.w_pm;
        let comp = |fam: &crate::neteigen::EigenFamily, b: usize, idx: usize| fam.components.values[b][idx];
        let x = self.x[i];
        let xp = self.x[l];
        let v = if k == j {
            if xp >= x {
                comp(&fj, j, i) * comp(&fjn, j, l)
            } else {
                comp(&fjn, j, i) * comp(&fj, j, l)
            }
        } else {
            comp(&fjn, j, i) * comp(&fj, k, l)
        };
        Ok(v / w)
    }
}

/// sqrt of a spectral parameter lambda + i eps on the physical sheet.
pub fn spectral_point(lambda: f64, eps: f64) -> C64 {
    sqrt_plus(C64::new(lambda, eps))
}

/// (H - z^2)^{-1} f.
pub fn resolve(net: &Network, f: &NetworkFunction, z: C64) -> Result<NetworkFunction> {
    let ctx = KernelContext::new(net, z)?;
    Ok(ctx.apply(f).scale(C64::new(-1.0, 0.0)))
}

/// (H - z^2)^{-1} f by direct trapezoid quadrature of the kernel, O(n^2) per branch pair.
pub fn resolve_direct(net: &Network, f: &NetworkFunction, z: C64) -> Result<NetworkFunction> {
    let ctx = KernelContext::new(net, z)?;
    let n = ctx.n();
    let w = trapezoid_weights(&ctx.x);
    let len = ctx.x.len();
    let support: Vec<Vec<usize>> =
        f.values.iter().map(|v| (0..len).filter(|&l| v[l] != C64::new(0.0, 0.0)).collect()).collect();
    let outputs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..len).map(move |i| (j, i))).collect();
    let vals = crate::par_map(&outputs, |&(j, i)| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            for &l in &support[k] {
                acc += w[l] * ctx.kernel_nodes(j, i, k, l) * f.values[k][l];
            }
        }
        -acc
    });
    let values = vals.chunks(len).map(|c| c.to_vec()).collect();
    Ok(NetworkFunction { x: ctx.x.clone(), values })
}

/// Kernel samples on a product grid, refusing more than MAX_KERNEL_ENTRIES entries.
pub fn kernel_table(ctx: &KernelContext, xs: &[(usize, f64)], xps: &[(usize, f64)]) -> Result<Vec<KernelEval>> {
    let total = xs.len().saturating_mul(xps.len());
    if total > MAX_KERNEL_ENTRIES {
        return Err(Error::MemoryGuard(total));
    }
    let mut out = Vec::with_capacity(total);
    for &(j, x) in xs {
        for &(k, xp) in xps {
            out.push(ctx.kernel(j, x, k, xp));
        }
    }
    Ok(out)
}

/// Im K(x, x', lambda + i0).
pub fn im_kernel(net: &Network, j: usize, x: f64, k: usize, xp: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("im_kernel needs lambda > 0, got {lambda}")));
    }
    let ctx = KernelContext::new(net, C64::new(lambda.sqrt(), 0.0))?;
    Ok(ctx.kernel(j, x, k, xp).value.im)
}

/// Relative L^2 defect of (-D^2 + V - z^2) u - f over interior nodes whose
/// stencils avoid the breakpoints of V.
pub fn fd_residual(spec: &NetworkSpec, u: &NetworkFunction, f: &NetworkFunction, z: C64) -> f64 {
    let x = &u.x;
    let z2 = z * z;
    let mut err = 0.0f64;
    let mut norm = 0.0f64;
    for (k, p) in spec.potentials.iter().enumerate() {
        let bps = p.breakpoints();
        let (uk, fk) = (&u.values[k], &f.values[k]);
        for i in 1..x.len() - 1 {
            let w = 0.5 * (x[i + 1] - x[i - 1]);
            norm += w * fk[i].norm_sqr();
            if bps.iter().any(|&b| b > x[i - 1] && b < x[i + 1]) {
                continue;
            }
            let hm = x[i] - x[i - 1];
            let hp = x[i + 1] - x[i];
            let d2 = 2.0 * ((uk[i + 1] - uk[i]) / hp - (uk[i] - uk[i - 1]) / hm) / (hp + hm);
            let r = -d2 + (p.eval(x[i]) - z2) * uk[i] - fk[i];
            err += w * r.norm_sqr();
        }
    }
    (err / norm).sqrt()
}
