//! The acceptance criteria, one pass/fail line each. Run with
//! `cargo test -p starwave --test acceptance`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use starwave::born::{cutoff_constants, perturbation_gaps, BornParams};
use starwave::jost::{Network, Sign};
use starwave::neteigen::{build_family, SpectralData};
use starwave::netmodel::{BranchGrid, NetworkFunction, NetworkSpec, PotentialSpec};
use starwave::propagate::{evolve_spectral, free_evolve, spectral_apply, Method, SpectralOptions, SpectralWindow};
use starwave::resolvent::{fd_residual, resolve};
use starwave::verify::{chain_evolution_norms, decay_scan, ChainNetwork, RunConfig, CHAIN_N_MAX};
use starwave::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

type Outcome = Result<(bool, String), String>;

fn bump(c: f64, r: f64, x: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn mixed(grid: BranchGrid) -> NetworkSpec {
    NetworkSpec::new(
        vec![PotentialSpec::exp_decay(1.0, 1.0), PotentialSpec::exp_decay(0.5, 2.0), PotentialSpec::square(2.0, 0.0, 1.0)],
        grid,
    )
    .unwrap()
}

fn e<T>(r: starwave::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn unitarity() -> Outcome {
    let net = e(Network::new(mixed(BranchGrid::default())))?;
    let z: Vec<f64> = (0..200).map(|i| 0.05 + (20.0 - 0.05) * i as f64 / 199.0).collect();
    let mut worst = 0.0f64;
    for j in 0..3 {
        let sd = e(net.scattering(j, &z))?;
        worst = sd.unitarity_defect.iter().fold(worst, |m, &v| m.max(v));
    }
    Ok((worst < 1e-6, format!("max ||T|^2 + |R2|^2 - 1| = {worst:.2e}")))
}

fn square_barrier() -> Outcome {
    let net = e(Network::new(e(NetworkSpec::new(vec![PotentialSpec::square(2.0, 0.0, 1.0), PotentialSpec::zero()], BranchGrid::default()))?))?;
    let (v0, a) = (2.0, 1.0);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let k = 0.05 + (20.0 - 0.05) * i as f64 / 49.0;
        // transfer through the barrier from the free solution e^{ikx} beyond x = a
        let q = C64::new(k * k - v0, 0.0).sqrt();
        let c = (I * k * a).exp();
        let f0 = c * (q * a).cos() - I * k * c / q * (q * a).sin();
        let df0 = c * q * (q * a).sin() + I * k * c * (q * a).cos();
        let inv_t = (f0 + df0 / (I * k)) / 2.0;
        let p = e(net.point_scattering(0, C64::new(k, 0.0)))?;
        worst = worst.max((p.t - 1.0 / inv_t).norm());
    }
    Ok((worst < 1e-6, format!("max |T - T_exact| = {worst:.2e} at 50 points")))
}

fn vertex() -> Outcome {
    let net = e(Network::new(mixed(BranchGrid::default())))?;
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let (mut res, mut paths) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let z = C64::new(0.05 + 19.95 * next(), 0.1 * next());
        let j = (3.0 * next()) as usize % 3;
        let sign = if next() < 0.5 { Sign::Plus } else { Sign::Minus };
        let sd = e(SpectralData::new(&net, z))?;
        let fam = e(build_family(&sd, j, sign))?;
        res = res.max(fam.continuity_residual).max(fam.kirchhoff_residual);
        paths = paths.max(fam.path_mismatch());
    }
    Ok((res < 1e-10 && paths < 1e-9, format!("residual {res:.2e}, path mismatch {paths:.2e}")))
}

fn fd_resolvent() -> Outcome {
    let z = C64::new(1.0, 0.5);
    let mut d = Vec::new();
    for grid in [BranchGrid::default(), BranchGrid::default().refined()] {
        let spec = mixed(grid);
        let net = e(Network::new(spec.clone()))?;
        let f = NetworkFunction::from_real(net.x.clone(), 3, |k, x| match k {
            0 => bump(3.0, 1.5, x),
            1 => 0.5 * bump(2.0, 1.0, x),
            _ => 0.0,
        });
        let u = e(resolve(&net, &f, z))?;
        d.push(fd_residual(&spec, &u, &f, z));
    }
    Ok((d[0] < 1e-3 && d[1] < 2.5e-4, format!("defect {:.2e} default, {:.2e} refined", d[0], d[1])))
}

fn free_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3] {
        let net = e(Network::new(e(NetworkSpec::free(n, BranchGrid::default()))?))?;
        let f = NetworkFunction::from_real(net.x.clone(), n, |k, x| match k {
            0 => (-(x - 5.0) * (x - 5.0)).exp(),
            1 => 0.5 * bump(3.0, 2.0, x),
            _ => 0.0,
        });
        let times = [1.0, 5.0, 20.0];
        let opts = SpectralOptions { lambda_max: 100.0, ..Default::default() };
        let r = e(evolve_spectral(&net, &f, &times, &opts))?;
        for (i, &t) in times.iter().enumerate() {
            worst = worst.max(r.states[i].sub(&free_evolve(&f, t)).norms().linf);
        }
    }
    Ok((worst < 1e-3, format!("max sup-norm difference {worst:.2e}")))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn decay() -> Outcome {
    let c = e(RunConfig::from_file(&configs().join("exp_n3.json")))?;
    let net = e(Network::new(c.network.clone()))?;
    let f = c.data_function(net.x.clone());
    let times: Vec<f64> = (0..20).map(|i| 5.0 * 20f64.powf(i as f64 / 19.0)).collect();
    let (rep, _) = e(decay_scan(&net, &f, &times, Method::Spectral, (5.0, 100.0), &c.spectral_options()))?;
    let ok = (rep.slope + 0.5).abs() <= 0.05 && rep.intercept.is_finite() && rep.flagged.is_none();
    Ok((ok, format!("slope {:.4}, rms {:.1e}, empirical C {:.4}", rep.slope, rep.residual, rep.intercept)))
}

fn cutoff() -> Outcome {
    let mut worst = f64::INFINITY;
    for lambda0 in [1.0, 4.0, 16.0] {
        let fam = e(cutoff_constants(lambda0, 4.0 * lambda0, 6))?;
        if !fam.linear_bound_holds {
            return Ok((false, format!("c(n) <= M n fails at lambda0 = {lambda0}")));
        }
        worst = fam.margins.iter().fold(worst, |m, &v| m.min(v));
    }
    Ok((worst >= 1.0, format!("smallest margin c(n) lambda0^(-n/2) / norm = {worst:.3}")))
}

fn born_gap() -> Outcome {
    let spec = e(NetworkSpec::new(vec![PotentialSpec::exp_decay(0.2, 1.0); 3], BranchGrid::default()))?;
    let x = spec.nodes();
    let f = NetworkFunction::from_real(x.clone(), 3, |k, x| if k == 0 { bump(2.0, 1.0, x) } else { 0.0 });
    let g = NetworkFunction::from_real(x, 3, |k, x| if k == 1 { bump(40.0, 2.0, x) } else { 0.0 });
    let params = e(BornParams::new(&spec, 0.5))?;
    let times = [4.0, 16.0, 64.0];
    let mut rows = Vec::new();
    for lambda0 in [16.0, 64.0, 256.0] {
        let fam = e(cutoff_constants(lambda0, 4.0 * lambda0, 16))?;
        rows.push(e(perturbation_gaps(&f, &g, &times, &fam, &params))?);
    }
    let bounded = rows.iter().flatten().all(|r| r.holds);
    let mut decreasing = true;
    for w in rows.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            let allowed = 2.0 * (a.lambda0 / b.lambda0).sqrt() * a.gap.norm() + b.error_estimate;
            decreasing &= b.gap.norm() <= allowed;
        }
    }
    let worst = rows.iter().flatten().map(|r| r.gap.norm() / r.bound).fold(0.0, f64::max);
    let g16 = rows[0][0].gap.norm();
    Ok((bounded && decreasing, format!("max |gap|/bound {worst:.1e}, |gap(16, t=4)| {g16:.2e}, rate ok {decreasing}")))
}

fn chain() -> Outcome {
    let c = e(ChainNetwork::geometric(2.0, CHAIN_N_MAX))?;
    let t: Vec<f64> = (0..=50).map(|i| i as f64).collect();
    let ev = e(chain_evolution_norms(&c, 1, &t))?;
    let dev = ev.linf.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let l1 = ev.l1_0;
    let ok = dev < 1e-12 && (l1 - 4.0 / PI).abs() < 1e-6 && l1 <= (2.0 * c.s_sum).sqrt();
    Ok((ok, format!("max | ||u||_inf - 1 | = {dev:.1e}, L1 = {l1:.8}, s = {}", c.s_sum)))
}

fn completeness() -> Outcome {
    let net = e(Network::new(mixed(BranchGrid::default())))?;
    let f = NetworkFunction::from_real(net.x.clone(), 3, |k, x| match k {
        0 => bump(5.0, 1.5, x),
        2 => 0.5 * bump(6.0, 1.0, x),
        _ => 0.0,
    });
    let (u, out) = e(spectral_apply(&net, &SpectralWindow::new(0.0, 400.0), &f, &SpectralOptions::default()))?;
    let rel = u.sub(&f).norms().l2 / f.norms().l2;
    Ok((rel < 0.02, format!("relative L2 error {rel:.2e}, quadrature estimate {:.1e}", out.error_estimate)))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("unitarity", 60, unitarity),
        ("square barrier", 10, square_barrier),
        ("vertex construction", 60, vertex),
        ("resolvent residual", 120, fd_resolvent),
        ("free propagator", 300, free_equivalence),
        ("dispersive decay", 1800, decay),
        ("cutoff constants", 60, cutoff),
        ("perturbation bound", 1200, born_gap),
        ("counterexample", 10, chain),
        ("completeness", 600, completeness),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let dt = start.elapsed();
        let in_time = dt <= Duration::from_secs(*limit);
        let (pass, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { format!(", over the {limit} s limit") };
        println!(
            "{} {:>2} {:<20} {} ({:.1} s{timing})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            detail,
            dt.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
