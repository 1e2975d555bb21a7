//! Generalized eigenfunctions of the network built from branch Jost data.

use crate::error::{Error, Result};
use crate::jost::{JostSolution, Network, Sign};
use crate::netmodel::NetworkFunction;
use num_complex::Complex64 as C64;
use serde::Serialize;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Jost solutions of every branch, both signs, at one spectral point.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub z: C64,
    pub plus: Vec<JostSolution>,
    pub minus: Vec<JostSolution>,
}

impl SpectralData {
    pub fn new(net: &Network, z: C64) -> Result<Self> {
        let mut plus = Vec::with_capacity(net.n());
        let mut minus = Vec::with_capacity(net.n());
        for j in 0..net.n() {
            plus.push(net.solve_m(j, z, Sign::Plus)?);
            minus.push(net.solve_m(j, z, Sign::Minus)?);
        }
        Ok(SpectralData { z, plus, minus })
    }

    pub fn n(&self) -> usize {
        self.plus.len()
    }

    pub fn sol(&self, k: usize, sign: Sign) -> &JostSolution {
        match sign {
            Sign::Plus => &self.plus[k],
            Sign::Minus => &self.minus[k],
        }
    }

    /// f_{k,sign}(z, 0) and its derivative.
    pub fn vertex(&self, k: usize, sign: Sign) -> (C64, C64) {
        let s = self.sol(k, sign);
        (s.f[0], s.df[0])
    }

    /// f_{j,s} f'_{j,-s} - f_{j,-s} f'_{j,s} at the vertex.
    pub fn wronskian0(&self, j: usize, sign: Sign) -> C64 {
        let (a, da) = self.vertex(j, sign);
        let (b, db) = self.vertex(j, sign.flip());
        a * db - b * da
    }

    /// The Wronskian sampled at 8 grid points; fails if it is not constant.
    pub fn wronskian(&self, j: usize, sign: Sign) -> Result<C64> {
        let p = self.sol(j, sign);
        let q = self.sol(j, sign.flip());
        let n = p.x.len();
        let idx: Vec<usize> = (0..8).map(|k| (k * (n - 1)) / 7).collect();
        let vals: Vec<C64> = idx.iter().map(|&i| p.f[i] * q.df[i] - q.f[i] * p.df[i]).collect();
        let mean = vals.iter().sum::<C64>() / 8.0;
        let dev = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
        if dev > 1e-8 * mean.norm() {
            return Err(Error::Quality(format!("Wronskian varies by {dev:.3e} around {mean}")));
        }
        Ok(mean)
    }

    /// s(z) = sum_k (1 - R_{k,2})/(1 + R_{k,2}) = sum_k f'_{k,+}(0)/(iz f_{k,+}(0)).
    pub fn s(&self) -> C64 {
        (0..self.n()).map(|k| self.rho(k)).sum::<C64>() / (I * self.z)
    }

    /// f'_{k,+}(z,0)/f_{k,+}(z,0).
    pub fn rho(&self, k: usize) -> C64 {
        let (a, b) = self.vertex(k, Sign::Plus);
        b / a
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Coefficients {
    pub c1: C64,
    pub c2: C64,
}

#[derive(Clone, Debug)]
pub struct EigenFamily {
    pub z: C64,
    pub j: usize,
    pub sign: Sign,
    pub c1: C64,
    pub c2: C64,
    /// d_{j,k}: entry j is unused and set to zero.
    pub d: Vec<C64>,
    pub w_pm: C64,
    pub closed: Coefficients,
    pub closed_d: Vec<C64>,
    pub components: NetworkFunction,
    pub continuity_residual: f64,
    pub kirchhoff_residual: f64,
}

impl EigenFamily {
    /// Largest relative difference between the linear-solve and closed-form coefficients.
    pub fn path_mismatch(&self) -> f64 {
        let rel = |a: C64, b: C64| (a - b).norm() / a.norm().max(b.norm()).max(1e-300);
        let mut m = rel(self.c1, self.closed.c1).max(rel(self.c2, self.closed.c2));
        for (k, (a, b)) in self.d.iter().zip(&self.closed_d).enumerate() {
            if k != self.j {
                m = m.max(rel(*a, *b));
            }
        }
        m
    }

    /// F on branch k at the vertex, and its derivative.
    pub fn vertex(&self, sd: &SpectralData, k: usize) -> (C64, C64) {
        if k == self.j {
            let (a, da) = sd.vertex(k, self.sign);
            let (b, db) = sd.vertex(k, self.sign.flip());
            (self.c1 * a + self.c2 * b, self.c1 * da + self.c2 * db)
        } else {
            let (b, db) = sd.vertex(k, self.sign.flip());
            (self.d[k] * b, self.d[k] * db)
        }
    }
}

/// Gaussian elimination with partial pivoting for a 2x2 system.
fn solve2(a: [[C64; 2]; 2], rhs: [C64; 2]) -> [C64; 2] {
    let (r0, r1) = if a[0][0].norm() >= a[1][0].norm() { (0, 1) } else { (1, 0) };
    let l = a[r1][0] / a[r0][0];
    let u11 = a[r1][1] - l * a[r0][1];
    let y1 = rhs[r1] - l * rhs[r0];
    let x1 = y1 / u11;
    let x0 = (rhs[r0] - a[r0][1] * x1) / a[r0][0];
    [x0, x1]
}

pub fn build_family(sd: &SpectralData, j: usize, sign: Sign) -> Result<EigenFamily> {
    let n = sd.n();
    let z = sd.z;
    if z.norm() == 0.0 {
        return Err(Error::Domain("eigenfunctions need z != 0".into()));
    }
    let jn = (j + 1) % n;
    let w = sd.wronskian0(j, sign);
    if w.norm() < 1e-12 {
        return Err(Error::DegenerateWronskian(w.norm()));
    }
    let (fs, dfs) = sd.vertex(j, sign);
    let (fm, dfm) = sd.vertex(j, sign.flip());
    let v = sd.vertex(jn, sign.flip()).0;
    let mut sum = C64::new(0.0, 0.0);
    let mut d = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        if k != j {
            let (fk, dfk) = sd.vertex(k, sign.flip());
            if fk.norm() == 0.0 {
                return Err(Error::Quality(format!("f_(k={k}) vanishes at the vertex")));
            }
            sum += dfk / fk;
            d[k] = v / fk;
        }
    }
    // continuity + Kirchhoff with d_{j+1} = 1
    let [c1, c2] = solve2([[fs, fm], [dfs, dfm]], [v, -v * sum]);
    // closed formulas
    let cc1 = v / w * (dfm + fm * sum);
    let cc2 = -v / w * (dfs + fs * sum);
    let closed_d = d.clone();
    let x = sd.plus[0].x.clone();
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        if k == j {
            let p = sd.sol(k, sign);
            let q = sd.sol(k, sign.flip());
            values.push(p.f.iter().zip(&q.f).map(|(a, b)| c1 * a + c2 * b).collect());
        } else {
            let q = sd.sol(k, sign.flip());
            values.push(q.f.iter().map(|b| d[k] * b).collect());
        }
    }
    let mut fam = EigenFamily {
        z,
        j,
        sign,
        c1,
        c2,
        d,
        w_pm: w,
        closed: Coefficients { c1: cc1, c2: cc2 },
        closed_d,
        components: NetworkFunction { x, values },
        continuity_residual: 0.0,
        kirchhoff_residual: 0.0,
    };
    let (f_j, _) = fam.vertex(sd, j);
    let mut cont = 0.0f64;
    let mut flux = C64::new(0.0, 0.0);
    let mut scale = 0.0f64;
    for k in 0..n {
        let (fk, dk) = fam.vertex(sd, k);
        cont = cont.max((fk - f_j).norm());
        flux += dk;
        scale = scale.max(dk.norm());
    }
    fam.continuity_residual = cont / f_j.norm().max(1e-300);
    fam.kirchhoff_residual = flux.norm() / scale.max(1e-300);
    Ok(fam)
}

/// c_{j,-,2}(mu) / (f_{j+1,+}(mu,0) s(mu)).
pub fn p_coefficient(sd: &SpectralData, j: usize) -> Result<C64> {
    let fam = build_family(sd, j, Sign::Minus)?;
    let jn = (j + 1) % sd.n();
    Ok(fam.c2 / (sd.vertex(jn, Sign::Plus).0 * sd.s()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SFunction {
    pub z: Vec<f64>,
    pub s: Vec<C64>,
    pub lower_bound: f64,
    pub min_re: f64,
    /// Re s(0) extrapolated quadratically from the three smallest grid points.
    pub re_s0_extrapolated: f64,
}

pub fn s_function(net: &Network, z_grid: &[f64]) -> Result<SFunction> {
    let rows: Vec<Result<C64>> = crate::par_map(z_grid, |&zr| {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..net.n() {
            let p = net.point_scattering(j, C64::new(zr, 0.0))?;
            let den = p.inv_t + p.r2_over_t;
            if den.norm() < 1e-12 * p.inv_t.norm().max(1.0) {
                return Err(Error::Quality(format!("1 + R2 vanishes on branch {j} at z = {zr}: outside the band")));
            }
            s += (p.inv_t - p.r2_over_t) / den;
        }
        Ok(s)
    });
    let s: Vec<C64> = rows.into_iter().collect::<Result<_>>()?;
    let lower_bound = s.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let min_re = s.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..z_grid.len()).collect();
    order.sort_by(|&a, &b| z_grid[a].abs().partial_cmp(&z_grid[b].abs()).unwrap());
    let re_s0_extrapolated = if order.len() >= 3 {
        let (x0, x1, x2) = (z_grid[order[0]], z_grid[order[1]], z_grid[order[2]]);
        let (y0, y1, y2) = (s[order[0]].re, s[order[1]].re, s[order[2]].re);
        // Lagrange interpolation at 0
        y0 * (x1 * x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (x0 * x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (x0 * x1) / ((x2 - x0) * (x2 - x1))
    } else {
        f64::NAN
    };
    Ok(SFunction { z: z_grid.to_vec(), s, lower_bound, min_re, re_s0_extrapolated })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoeffReport {
    /// inf over the grid of |c_{j,-,1} W_{j,-}| / |z|
    pub c1: f64,
    /// sup over the grid of |c_{j,-,2}| / |s|
    pub c2: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

pub fn coeff_bounds(net: &Network, z_grid: &[C64]) -> Result<CoeffReport> {
    let rows: Vec<Result<(f64, f64)>> = crate::par_map(z_grid, |&z| {
        let sd = SpectralData::new(net, z)?;
        let s = sd.s();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for j in 0..net.n() {
            let fam = build_family(&sd, j, Sign::Minus)?;
            lo = lo.min((fam.c1 * fam.w_pm).norm() / z.norm());
            hi = hi.max(fam.c2.norm() / s.norm());
        }
        Ok((lo, hi))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let c1 = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let c2 = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let ratio_max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    if !(c1 > 0.0) {
        return Err(Error::Quality(format!("coefficient lower bound c1 = {c1} is not positive")));
    }
    Ok(CoeffReport { c1, c2, ratio_min: c1, ratio_max })
}
