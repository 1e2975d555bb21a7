use num_complex::Complex64 as C64;
use proptest::prelude::*;
use starwave::jost::Network;
use starwave::neteigen::SpectralData;
use starwave::netmodel::{BranchGrid, NetworkFunction, NetworkSpec, PotentialSpec};
use starwave::resolvent::{fd_residual, kernel_table, resolve, resolve_direct, spectral_point, KernelContext};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn mixed_spec(grid: BranchGrid) -> NetworkSpec {
    NetworkSpec::new(
        vec![PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::exp_decay(0.5, 2.0), PotentialSpec::square(2.0, 0.0, 1.0)],
        grid,
    )
    .unwrap()
}

fn bump(c: f64, r: f64, x: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn data(x: std::sync::Arc<Vec<f64>>) -> NetworkFunction {
    NetworkFunction::from_real(x, 3, |k, x| match k {
        0 => bump(3.0, 1.5, x),
        1 => 0.5 * bump(2.0, 1.0, x),
        _ => 0.0,
    })
}

#[test]
fn kernel_matches_family_construction() {
    let net = Network::new(mixed_spec(BranchGrid::default())).unwrap();
    for &z in &[C64::new(1.2, 0.1), C64::new(0.4, 0.0), C64::new(3.0, 0.0)] {
        let sd = SpectralData::new(&net, z).unwrap();
        let ctx = KernelContext::from_spectral(&sd).unwrap();
        for &(j, i, k, l) in &[(0, 100, 0, 900), (0, 900, 0, 100), (1, 50, 2, 700), (2, 1200, 0, 30), (1, 400, 1, 400)] {
            let a = ctx.kernel_nodes(j, i, k, l);
            let b = ctx.kernel_via_families(&sd, j, i, k, l).unwrap();
            assert!((a - b).norm() < 1e-8 * a.norm().max(1e-3), "z={z} ({j},{i},{k},{l}): {a} vs {b}");
            // symmetry of the family form
            let c = ctx.kernel_via_families(&sd, k, l, j, i).unwrap();
            assert!((b - c).norm() < 1e-8 * b.norm().max(1e-3));
        }
    }
}

#[test]
fn diagonal_case_consistency() {
    let net = Network::new(mixed_spec(BranchGrid::default())).unwrap();
    let ctx = KernelContext::new(&net, C64::new(2.0, 0.2)).unwrap();
    for j in 0..3 {
        for &x in &[0.0, 0.4, 1.0, 7.3] {
            let above = ctx.kernel(j, x, j, x).value;
            let below = ctx.kernel(j, x + 1e-13, j, x).value;
            assert!((above - below).norm() < 1e-8);
        }
    }
}

#[test]
fn finite_difference_residual() {
    let z = C64::new(1.0, 0.5);
    let mut defects = Vec::new();
    for grid in [BranchGrid::default(), BranchGrid::default().refined()] {
        let spec = mixed_spec(grid);
        let net = Network::new(spec.clone()).unwrap();
        let f = data(net.x.clone());
        let u = resolve(&net, &f, z).unwrap();
        defects.push(fd_residual(&spec, &u, &f, z));
    }
    assert!(defects[0] < 1e-3, "default grid defect {:.3e}", defects[0]);
    assert!(defects[1] < 2.5e-4, "refined grid defect {:.3e}", defects[1]);
}

#[test]
fn fast_and_direct_quadrature_agree() {
    let mut diffs = Vec::new();
    let z = C64::new(1.3, 0.2);
    for n in [401, 801] {
        let net = Network::new(mixed_spec(BranchGrid::graded(40.0, n))).unwrap();
        let f = data(net.x.clone());
        let a = resolve(&net, &f, z).unwrap();
        let b = resolve_direct(&net, &f, z).unwrap();
        diffs.push(a.sub(&b).norms().l2 / a.norms().l2);
    }
    assert!(diffs[0] < 5e-3, "{diffs:?}");
    assert!(diffs[1] < 0.35 * diffs[0], "{diffs:?}");
}

#[test]
fn free_line_green_function() {
    let net = Network::new(NetworkSpec::free(2, BranchGrid::default()).unwrap()).unwrap();
    let z = C64::new(1.1, 0.3);
    let (x0, w) = (3.0, 0.02);
    let f = NetworkFunction::from_real(net.x.clone(), 2, |k, x| if k == 0 { bump(x0, w, x) } else { 0.0 });
    let mass = f.values[0].iter().zip(starwave::numerics::trapezoid_weights(&net.x)).map(|(v, w)| v.re * w).sum::<f64>();
    let u = resolve(&net, &f, z).unwrap();
    for (k, i) in [(0usize, 800usize), (0, 2500), (1, 300), (1, 1500)] {
        let x = net.x[i];
        let d = if k == 0 { (x - x0).abs() } else { x + x0 };
        let expect = I / (2.0 * z) * (I * z * d).exp() * mass;
        assert!((u.values[k][i] - expect).norm() < 1e-3 * expect.norm(), "{} vs {expect}", u.values[k][i]);
    }
}

#[test]
fn output_decays_off_the_spectrum() {
    let net = Network::new(mixed_spec(BranchGrid::default())).unwrap();
    let f = data(net.x.clone());
    let z = C64::new(1.0, 0.5);
    let u = resolve(&net, &f, z).unwrap();
    let bound = 10.0 * (-z.im * 40.0 / 2.0).exp() * f.norms().l1;
    for k in 0..3 {
        assert!(u.values[k].last().unwrap().norm() < bound);
    }
}

#[test]
fn limiting_absorption() {
    let net = Network::new(mixed_spec(BranchGrid::default())).unwrap();
    let lambda = 2.0;
    let pts = [(0, 0.5, 0, 1.5), (1, 2.0, 2, 0.3)];
    let edge = KernelContext::new(&net, spectral_point(lambda, 0.0)).unwrap();
    let mut last = vec![f64::INFINITY; pts.len()];
    for &alpha in &[1e-1, 1e-2, 1e-3, 1e-4] {
        let ctx = KernelContext::new(&net, spectral_point(lambda, alpha)).unwrap();
        for (p, &(j, x, k, xp)) in pts.iter().enumerate() {
            let d = (ctx.kernel(j, x, k, xp).value - edge.kernel(j, x, k, xp).value).norm();
            assert!(d < last[p], "no monotone approach at alpha = {alpha}");
            last[p] = d;
        }
    }
    assert!(last.iter().all(|&d| d < 1e-3));
}

#[test]
fn weighted_kernel_bound_is_finite() {
    let net = Network::new(mixed_spec(BranchGrid::default())).unwrap();
    let mut sup = 0.0f64;
    for &lambda in &[0.01, 0.1, 1.0, 10.0, 100.0] {
        for &eps in &[0.0, 1e-3, 1e-1] {
            let z = spectral_point(lambda, eps);
            let ctx = KernelContext::new(&net, z).unwrap();
            for j in 0..3 {
                for &(x, xp) in &[(0.0, 0.0), (0.5, 3.0), (10.0, 2.0), (30.0, 30.0)] {
                    for k in 0..3 {
                        let v = ctx.kernel(j, x, k, xp).value.norm() * lambda.sqrt() * (-(x + xp)).exp();
                        sup = sup.max(v);
                    }
                }
            }
        }
    }
    assert!(sup.is_finite() && sup < 1e3, "{sup}");
}

#[test]
fn kernel_table_memory_guard() {
    let net = Network::new(NetworkSpec::free(2, BranchGrid::graded(40.0, 101)).unwrap()).unwrap();
    let ctx = KernelContext::new(&net, C64::new(1.0, 0.0)).unwrap();
    let pts: Vec<(usize, f64)> = (0..100).map(|i| (0, i as f64 * 1e-2)).collect();
    assert_eq!(kernel_table(&ctx, &pts, &pts).unwrap().len(), 10_000);
    let many: Vec<(usize, f64)> = (0..4473).map(|i| (0, i as f64 * 1e-3)).collect();
    assert!(kernel_table(&ctx, &many, &many).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linearity(ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, c in 1.0f64..6.0) {
        thread_local!(static NET: Network = Network::new(mixed_spec(BranchGrid::default())).unwrap());
        NET.with(|net| {
            let z = C64::new(0.8, 0.2);
            let f = data(net.x.clone());
            let g = NetworkFunction::from_real(net.x.clone(), 3, |k, x| if k == 2 { bump(c, 0.8, x) } else { 0.0 });
            let (a, b) = (C64::new(ar, ai), C64::new(br, 0.0));
            let lhs = resolve(net, &f.combine(a, &g, b), z).unwrap();
            let rhs = resolve(net, &f, z).unwrap().combine(a, &resolve(net, &g, z).unwrap(), b);
            prop_assert!(lhs.sub(&rhs).norms().linf < 1e-12 * (1.0 + rhs.norms().linf));
            Ok(())
        })?;
    }

    #[test]
    fn kernel_symmetry(j in 0usize..3, k in 0usize..3, x in 0.0f64..20.0, xp in 0.0f64..20.0, zr in 0.1f64..8.0, zi in 0.0f64..0.5) {
        thread_local!(static NET: Network = Network::new(mixed_spec(BranchGrid::default())).unwrap());
        NET.with(|net| {
            let ctx = KernelContext::new(net, C64::new(zr, zi)).unwrap();
            let a = ctx.kernel(j, x, k, xp).value;
            let b = ctx.kernel(k, xp, j, x).value;
            prop_assert!((a - b).norm() < 1e-8 * a.norm().max(1e-3));
            Ok(())
        })?;
    }
}
