use num_complex::Complex64 as C64;
use starwave::born::phi;
use starwave::jost::Network;
use starwave::netmodel::{BranchGrid, NetworkFunction, NetworkSpec, PotentialSpec};
use starwave::numerics::adaptive_integrate;
use starwave::propagate::{
    evolve_free, evolve_spectral, free_evolve, spectral_apply, spectral_apply_many, t2_term, SpectralOptions,
    SpectralWindow, T2Table,
};

fn gaussian(c: f64, a: f64) -> impl Fn(usize, f64) -> f64 {
    move |k, x| if k == 0 { (-a * (x - c) * (x - c)).exp() } else { 0.0 }
}

/// Line solution of e^{-a x^2} after time t under e^{itH0}.
fn line_gaussian(a: f64, y: f64, t: f64) -> C64 {
    let d = C64::new(1.0, -4.0 * a * t);
    d.sqrt().inv() * (-a * y * y / d).exp()
}

#[test]
fn free_evolution_matches_line_gaussian() {
    let x = std::sync::Arc::new(BranchGrid::default().nodes());
    let (c, a) = (5.0, 1.0);
    let f = NetworkFunction::from_real(x.clone(), 2, gaussian(c, a));
    for &t in &[0.5, 2.0, 10.0] {
        let u = free_evolve(&f, t);
        let mut err = 0.0f64;
        for (i, &xi) in x.iter().enumerate() {
            // branch 1 is the positive half-line, branch 2 the negative one
            err = err.max((u.values[0][i] - line_gaussian(a, xi - c, t)).norm());
            err = err.max((u.values[1][i] - line_gaussian(a, -xi - c, t)).norm());
        }
        assert!(err < 1e-6, "t={t}: {err:.3e}");
    }
    assert_eq!(free_evolve(&f, 0.0).values, f.values);
}

#[test]
fn free_evolution_decay_and_conservation() {
    let x = std::sync::Arc::new(BranchGrid::default().nodes());
    // equal data on every branch keeps the peak at the vertex
    let f = NetworkFunction::from_real(x, 3, |_, x| (-x * x).exp());
    let times: Vec<f64> = (0..10).map(|i| 5.0 * 40f64.powf(i as f64 / 9.0)).collect();
    let r = evolve_free(&f, &times);
    let (slope, _, _) = r.fit((5.0, 200.0)).unwrap();
    assert!((slope + 0.5).abs() < 0.02, "slope {slope}");
    let l1 = f.norms().l1;
    let c = r.times.iter().zip(&r.sup_norms).map(|(t, s)| s * t.sqrt() / l1).fold(0.0, f64::max);
    assert!(c.is_finite() && c < 1.0);
    for (t, s) in r.times.iter().zip(&r.sup_norms) {
        let exact = (1.0 + 16.0 * t * t).powf(-0.25);
        assert!((s - exact).abs() < 1e-6 * exact.max(1e-2), "t={t}: {s} vs {exact}");
    }
    // conservation while the packet is inside the box
    let r = evolve_free(&f, &[1.0, 3.0]);
    for l2 in r.l2_norms {
        assert!((l2 / f.norms().l2 - 1.0).abs() < 5e-3);
    }
}

#[test]
fn spectral_matches_free_for_five_branches() {
    let net = Network::new(NetworkSpec::free(5, BranchGrid::default()).unwrap()).unwrap();
    let f = NetworkFunction::from_real(net.x.clone(), 5, |k, x| match k {
        0 => (-(x - 5.0) * (x - 5.0)).exp(),
        3 => 0.5 * (-2.0 * (x - 4.0) * (x - 4.0)).exp(),
        _ => 0.0,
    });
    let opts = SpectralOptions { lambda_max: 100.0, refine: false, ..Default::default() };
    let r = evolve_spectral(&net, &f, &[5.0], &opts).unwrap();
    let d = r.states[0].sub(&free_evolve(&f, 5.0)).norms().linf;
    assert!(d < 1e-3, "{d:.3e}");
}

#[test]
fn completeness_and_window_additivity() {
    let spec = NetworkSpec::new(
        vec![PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::exp_decay(0.5, 2.0), PotentialSpec::square(2.0, 0.0, 1.0)],
        BranchGrid::default(),
    )
    .unwrap();
    let net = Network::new(spec).unwrap();
    let f = NetworkFunction::from_real(net.x.clone(), 3, |k, x| match k {
        0 => (-(x - 5.0) * (x - 5.0)).exp(),
        2 => 0.5 * (-(x - 6.0) * (x - 6.0)).exp(),
        _ => 0.0,
    });
    let opts = SpectralOptions::default();
    let windows = [SpectralWindow::new(0.0, 400.0), SpectralWindow::new(0.0, 4.0), SpectralWindow::new(4.0, 16.0), SpectralWindow::new(0.0, 16.0)];
    let out = spectral_apply_many(&net, &windows, &f, &opts).unwrap();
    assert!(out.converged && out.error_estimate < 1e-3);
    let rel = out.states[0].sub(&f).norms().l2 / f.norms().l2;
    assert!(rel < 0.02, "reconstruction error {rel:.3e}");
    let sum = out.states[1].combine(C64::new(1.0, 0.0), &out.states[2], C64::new(1.0, 0.0));
    let gap = sum.sub(&out.states[3]).norms().linf;
    assert!(gap < 1e-6 * out.states[3].norms().linf.max(1e-3), "additivity {gap:.3e}");
    // the projector leaves the data real
    assert!(out.states[0].values.iter().flatten().all(|v| v.im.abs() < 1e-6));
}

#[test]
fn spectral_group_is_unitary() {
    let net = Network::new(
        NetworkSpec::new(vec![PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::zero(), PotentialSpec::zero()], BranchGrid::default())
            .unwrap(),
    )
    .unwrap();
    let f = NetworkFunction::from_real(net.x.clone(), 3, |_, x| (-(x * x) / 2.0).exp());
    let opts = SpectralOptions { lambda_max: 36.0, refine: false, ..Default::default() };
    let window = SpectralWindow::new(0.0, 36.0).with_time(3.0);
    let (u, out) = spectral_apply(&net, &window, &f, &opts).unwrap();
    assert!((u.norms().l2 / f.norms().l2 - 1.0).abs() < 0.01);
    assert!(out.low_window_norm > 0.0 && out.low_window_norm < f.norms().l2);
    assert!(out.tail_window_norm < 0.01 * f.norms().l2);
}

#[test]
fn window_validation() {
    assert!(SpectralWindow::new(2.0, 1.0).validate().is_err());
    assert!(SpectralWindow::new(-1.0, 1.0).validate().is_err());
    assert!(SpectralWindow::new(0.0, 1.0).with_cutoff(0.0).validate().is_err());
    let w = SpectralWindow::new(1.0, 4.0).with_time(2.0);
    assert_eq!(w.h(0.5), C64::new(0.0, 0.0));
    assert!((w.h(2.0) - C64::from_polar(1.0, 4.0)).norm() < 1e-15);
}

#[test]
fn t2_free_reduction() {
    let net = Network::new(NetworkSpec::free(3, BranchGrid::default()).unwrap()).unwrap();
    let (x, xp, t, l) = (0.7, 1.9, 6.0, 1.0);
    let got = t2_term(&net, 0, t, x, xp, l).unwrap();
    // at V = 0, p = -(N - 2)/(2N) and m = 1
    let p = -1.0 / 6.0;
    let m = (2.0 * l).sqrt();
    let phase = |mu: f64| t * mu * mu + mu * (x + xp);
    let re = adaptive_integrate(&|mu| phi(mu * mu / l) * phase(mu).cos(), -m, m, 1e-12);
    let im = adaptive_integrate(&|mu| phi(mu * mu / l) * phase(mu).sin(), -m, m, 1e-12);
    let expect = C64::new(re, im) * p;
    assert!((got.value - expect).norm() < 1e-6, "{} vs {expect}", got.value);
    assert!(got.converged);
}

#[test]
fn t2_decay() {
    let net = Network::new(
        NetworkSpec::new(vec![PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::zero(), PotentialSpec::zero()], BranchGrid::default())
            .unwrap(),
    )
    .unwrap();
    let xs = [0.0, 0.3, 0.8, 1.5, 2.5];
    let tab = T2Table::new(&net, 0, 1.0, &xs, 2048).unwrap();
    let mut sup = 0.0f64;
    for i in 0..12 {
        let t = 5.0 * 20f64.powf(i as f64 / 11.0);
        for a in 0..xs.len() {
            sup = sup.max(tab.eval(t, a, a).value.norm() * t.sqrt());
        }
    }
    assert!(sup.is_finite() && sup < 10.0);
    let mut ratios = Vec::new();
    for a in 0..xs.len() {
        for b in a..xs.len() {
            for &t in &[10.0, 40.0] {
                let r = tab.eval(2.0 * t, a, b).value.norm() / tab.eval(t, a, b).value.norm();
                ratios.push(r);
            }
        }
    }
    assert!(ratios.len() >= 20);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean <= 1.2 / 2f64.sqrt(), "mean ratio {mean}");
}
