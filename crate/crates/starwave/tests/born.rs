use num_complex::Complex64 as C64;
use proptest::prelude::*;
use starwave::born::*;
use starwave::jost::Network;
use starwave::netmodel::{BranchGrid, NetworkFunction, NetworkSpec, PotentialSpec};
use starwave::numerics::fourier_l1_norm;
use starwave::resolvent::KernelContext;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn bump(c: f64, r: f64, x: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn exp_spec() -> NetworkSpec {
    NetworkSpec::new(vec![PotentialSpec::exp_decay(0.2, 1.0); 3], BranchGrid::default()).unwrap()
}

fn data(x: Arc<Vec<f64>>) -> (NetworkFunction, NetworkFunction) {
    let f = NetworkFunction::from_real(x.clone(), 3, |k, x| if k == 0 { bump(2.0, 1.0, x) } else { 0.0 });
    let g = NetworkFunction::from_real(x, 3, |k, x| match k {
        1 => bump(3.0, 1.0, x),
        0 => 0.5 * bump(2.0, 1.0, x),
        _ => 0.0,
    });
    (f, g)
}

#[test]
fn free_kernel_on_the_line() {
    for &(x, xp, l) in &[(0.3, 2.0, 1.5), (4.0, 1.0, 9.0)] {
        let r = f64::sqrt(l);
        for (side, s) in [(Side::Plus, 1.0), (Side::Minus, -1.0)] {
            let k = free_kernel(2, 0, x, 0, xp, l, side).unwrap();
            let line = -s * I / (2.0 * r) * C64::from_polar(1.0, s * r * (x - xp).abs());
            assert!((k - line).norm() < 1e-15);
            let cross = free_kernel(2, 0, x, 1, xp, l, side).unwrap();
            assert!((cross + s * I / (2.0 * r) * C64::from_polar(1.0, s * r * (x + xp))).norm() < 1e-15);
        }
    }
    assert!(free_kernel(3, 0, 1.0, 0, 1.0, 0.0, Side::Plus).is_err());
    assert!(free_kernel(3, 0, 1.0, 0, 1.0, -1.0, Side::Minus).is_err());
}

#[test]
fn free_kernel_matches_vertex_construction() {
    let net = Network::new(NetworkSpec::free(3, BranchGrid::default()).unwrap()).unwrap();
    for &mu in &[0.7, 2.0, 5.0] {
        let ctx = KernelContext::new(&net, C64::new(mu, 0.0)).unwrap();
        for &(j, x, k, xp) in &[(0, 0.5, 0, 2.0), (0, 3.0, 0, 1.0), (1, 0.2, 2, 4.0), (2, 7.0, 0, 0.0)] {
            let a = ctx.kernel(j, x, k, xp).value;
            let b = free_kernel(3, j, x, k, xp, mu * mu, Side::Plus).unwrap();
            assert!((a - b).norm() < 1e-8, "mu={mu}: {a} vs {b}");
        }
    }
}

#[test]
fn born_series_sums_to_the_resolvent() {
    let spec = exp_spec();
    let net = Network::new(spec.clone()).unwrap();
    let (f, g) = data(net.x.clone());
    let params = BornParams::new(&spec, 0.5).unwrap();
    for &mu in &[3.0, 6.0] {
        let terms = born_terms(&f, &g, mu, 12, &params).unwrap();
        let sum: C64 = terms.iter().sum();
        let ctx = KernelContext::new(&net, C64::new(mu, 0.0)).unwrap();
        // the kernel inverts z^2 - H
        let exact = -ctx.apply(&f).pair(&g);
        assert!((sum - exact).norm() < 1e-4 * exact.norm(), "mu={mu}: {sum} vs {exact}");
        let q = params.q(mu * mu);
        for k in 1..terms.len() {
            assert!(terms[k].norm() <= q.powi(k as i32) * f.norms().l1 * g.norms().l1);
        }
    }
}

#[test]
fn fubini_orders_agree() {
    let spec = exp_spec();
    let (f, g) = data(spec.nodes());
    let params = BornParams::new(&spec, 0.5).unwrap();
    for &mu in &[3.0, 6.0, 10.0] {
        let c = fubini_check(&f, &g, mu, &params).unwrap();
        assert!(c.relative_gap < 1e-8, "mu={mu}: {:.3e}", c.relative_gap);
    }
}

#[test]
fn x_grid_convergence() {
    let spec = exp_spec();
    let (f, g) = data(spec.nodes());
    let mut params = BornParams::new(&spec, 0.5).unwrap();
    let mut errs = Vec::new();
    let reference = {
        let mut p = params.clone();
        p.h = 5e-4;
        born_terms(&f, &g, 4.0, 2, &p).unwrap()
    };
    for h in [4e-3, 2e-3] {
        params.h = h;
        let t = born_terms(&f, &g, 4.0, 2, &params).unwrap();
        errs.push((t[1] - reference[1]).norm() / reference[1].norm());
    }
    assert!(errs[0] < 1e-4 && errs[1] < 0.3 * errs[0], "{errs:?}");
}

#[test]
fn cutoff_family_constants() {
    for &l0 in &[1.0, 4.0, 16.0] {
        let fam = cutoff_constants(l0, 4.0 * l0, 6).unwrap();
        assert!(fam.norms[0] <= fam.n1 + fam.n1 * fam.n1);
        for n in 0..=6 {
            assert!(fam.norms[n] <= fam.bound(n), "lambda0={l0}, n={n}");
        }
        assert!(fam.bounds_hold());
        for n in 1..=6 {
            assert!(fam.c[n] <= fam.m * n as f64);
        }
        assert_eq!(fam.c[0], fam.n1 + fam.n1 * fam.n1);
        let k = 32.0 * 2f64.sqrt();
        assert!((fam.c[1] - 2.0 * fam.c[0] - k * fam.n2).abs() < 1e-12);
        assert!((fam.c[3] - 2.0 - 3.0 * k * fam.n2).abs() < 1e-9);
        assert!((fam.m - k * fam.c[0].max(fam.n2)).abs() < 1e-9);
    }
    assert!(cutoff_constants(0.5, 4.0, 2).is_err());
    assert!(cutoff_constants(4.0, 8.0, 2).is_err());
}

#[test]
fn norms_scale_with_lambda0() {
    let a = cutoff_constants(1.0, 4.0, 4).unwrap();
    let b = cutoff_constants(16.0, 64.0, 4).unwrap();
    for n in 0..=4 {
        let r = b.norms[n] / a.norms[n] * 4f64.powi(n as i32);
        assert!((r - 1.0).abs() < 1e-4, "n={n}: {r}");
    }
    let base = fourier_l1_norm(&|l| phi(l * l), 2f64.sqrt(), 1 << 15).value;
    for &alpha in &[0.25, 4.0, 16.0] {
        let v = fourier_l1_norm(&|l| phi(l * l / alpha), (2.0 * alpha).sqrt(), 1 << 15).value;
        assert!((v - base).abs() < 1e-4 * base, "alpha={alpha}: {v} vs {base}");
    }
}

#[test]
fn custom_bumps() {
    let same = Bump::Custom(Arc::new(phi));
    let fam = cutoff_constants_with(same, 4.0, 16.0, 2).unwrap();
    let std = cutoff_constants(4.0, 16.0, 2).unwrap();
    assert!((fam.n2 - std.n2).abs() < 1e-2 * std.n2);
    let ramp = Bump::Custom(Arc::new(|l: f64| (2.0 - l.abs()).clamp(0.0, 1.0)));
    assert!(cutoff_constants_with(ramp, 4.0, 16.0, 2).is_err());
    let wide = Bump::Custom(Arc::new(|l: f64| if l.abs() < 2.5 { 1.0 } else { 0.0 }));
    assert!(cutoff_constants_with(wide, 4.0, 16.0, 2).is_err());
}

#[test]
fn oscillatory_suprema_obey_the_fourier_bound() {
    let fam = cutoff_constants(4.0, 16.0, 4).unwrap();
    let mut state = 7u64;
    let ds: Vec<f64> = (0..20)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 200.0
        })
        .collect();
    for &t in &[4.0, 16.0] {
        for k in 0..=4 {
            let s = s_k(&fam, k, t, &ds);
            assert!(s <= fam.norms[k] / f64::sqrt(t) * (1.0 + 1e-3), "k={k}, t={t}: {s}");
        }
    }
}

#[test]
fn series_parameters() {
    let spec = exp_spec();
    let p = BornParams::new(&spec, 0.5).unwrap();
    let v1 = spec.l1_norm();
    assert!((v1 - 0.6).abs() < 1e-6);
    assert!((p.lambda_star - 4.0 * 4.0 * v1 * v1 / (9.0 * 0.25)).abs() < 1e-12);
    assert!(p.check(2.0).is_err());
    assert!(p.check(16.0).is_ok());
    for &l0 in &[16.0, 64.0, 256.0] {
        let k = p.truncation(l0).unwrap();
        assert!(p.tail_bound(l0, k) < 1e-8);
        assert!(k == 0 || p.tail_bound(l0, k - 1) >= 1e-8);
    }
    assert!(BornParams::new(&spec, 1.0).is_err());
    let (f, g) = data(spec.nodes());
    let fam = cutoff_constants(1.0, 4.0, 2).unwrap();
    assert!(matches!(born_apply(&f, &g, 1.0, &fam, &p), Err(starwave::Error::SeriesPrecondition { .. })));
}

#[test]
fn free_network_has_no_gap() {
    let spec = NetworkSpec::free(3, BranchGrid::default()).unwrap();
    let net = Network::new(spec.clone()).unwrap();
    let (f, g) = data(net.x.clone());
    let params = BornParams::new(&spec, 0.5).unwrap();
    let fam = cutoff_constants(4.0, 16.0, 4).unwrap();
    let r = born_apply(&f, &g, 1.0, &fam, &params).unwrap();
    assert_eq!(r.k_max, 0);
    let gap = perturbation_gap(&f, &g, 1.0, &fam, &params).unwrap();
    assert_eq!(gap.gap, C64::new(0.0, 0.0));
    let c = k0_cross_check(&net, &f, &g, &r, &fam, 1e-4).unwrap();
    assert!(c.difference < 1e-4 * c.spectral.norm(), "{c:?}");
}

#[test]
fn pairing_and_gap_bounds() {
    let spec = exp_spec();
    let net = Network::new(spec.clone()).unwrap();
    let f = NetworkFunction::from_real(net.x.clone(), 3, |k, x| if k == 0 { bump(2.0, 1.0, x) } else { 0.0 });
    let g = NetworkFunction::from_real(net.x.clone(), 3, |k, x| if k == 1 { bump(40.0, 2.0, x) } else { 0.0 });
    let params = BornParams::new(&spec, 0.5).unwrap();
    let fam = cutoff_constants(16.0, 64.0, 10).unwrap();
    let times = [4.0, 16.0, 64.0];
    let res = born_series(&f, &g, &times, &fam, &params).unwrap();
    for r in &res {
        let b = pairing_bound(&f, &g, r.t, &fam, &params, r.k_max).unwrap();
        assert!(r.pairing.norm() <= b, "t={}: {} > {b}", r.t, r.pairing.norm());
        assert!(r.error_estimate < 1e-8);
    }
    let gaps = perturbation_gaps(&f, &g, &times, &fam, &params).unwrap();
    for gp in &gaps {
        assert!(gp.holds && gp.gap.norm() <= gp.bound);
    }
    // the stationary point sits inside the band at t = 4
    assert!(gaps[0].gap.norm() > 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn free_kernel_sup(
        n in 2usize..5, j in 0usize..4, k in 0usize..4,
        x in 0.0f64..50.0, xp in 0.0f64..50.0, l in 1e-3f64..1e3, plus in any::<bool>()
    ) {
        let (j, k) = (j % n, k % n);
        let side = if plus { Side::Plus } else { Side::Minus };
        let v = free_kernel(n, j, x, k, xp, l, side).unwrap();
        prop_assert!(v.norm() <= free_kernel_bound(n, l) * (1.0 + 1e-12));
        let w = free_kernel(n, k, xp, j, x, l, side).unwrap();
        prop_assert!((v - w).norm() < 1e-14 * (1.0 + v.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn plateau_properties(l in -3.0f64..3.0, l0 in 1.0f64..100.0, lam in 1.0f64..1e4) {
        let (p, d1, d2) = phi_derivs(l);
        prop_assert!((0.0..=1.0).contains(&p));
        if l.abs() <= 1.0 { prop_assert_eq!(p, 1.0); }
        if l.abs() >= 2.0 { prop_assert_eq!(p, 0.0); }
        let h = 1e-5;
        let fd1 = (phi(l + h) - phi(l - h)) / (2.0 * h);
        let fd2 = (phi(l + h) - 2.0 * p + phi(l - h)) / (h * h);
        prop_assert!((fd1 - d1).abs() < 1e-4 * (1.0 + d1.abs()));
        prop_assert!((fd2 - d2).abs() < 1e-2 * (1.0 + d2.abs()));
        prop_assert_eq!(phi(l), phi(-l));
        prop_assert_eq!(theta(lam, l0) + phi(lam / l0), 1.0);
    }
}
