//! The `starwave` command line. Every subcommand writes CSV preceded by one
//! `# {json}` metadata line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::born::{born_series, cutoff_constants, gap_bound, BornParams, K_MAX_CAP};
use crate::jost::{Network, Sign};
use crate::neteigen::{build_family, s_function, SpectralData};
use crate::propagate::{evolve_free, evolve_spectral, EvolutionResult, Method, DEFAULT_FIT_WINDOW};
use crate::resolvent::KernelContext;
use crate::verify::{chain_evolution_norms, counterexample_contrast, decay_scan, run_checks, ChainNetwork, RunConfig};
use crate::{Error, Result, C64};

#[derive(Parser, Debug)]
#[command(name = "starwave", version, about = "Scattering and dispersive decay on star-shaped networks")]
struct Cli {
    /// Write the CSV here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Network JSON (potentials, grid, optional data and lambda_max)
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Jost data f_{j,+}(z, 0), 1/T and R2/T on a real z grid
    Jost {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value_t = 0)]
        branch: usize,
        /// a:b:n or a comma list
        #[arg(long, default_value = "0.05:20:40")]
        z: String,
    },
    /// T, R1, R2 and the unitarity defect for every branch
    Scattering {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value = "0.05:20:200")]
        z: String,
    },
    /// s(z) and the vertex residuals of the eigenfamilies
    Eigen {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value = "0.1:10:20")]
        z: String,
        /// imaginary part added to every z
        #[arg(long, default_value_t = 0.0)]
        im: f64,
    },
    /// Resolvent kernel K(x, x'; z) along x on one branch
    Kernel {
        #[command(flatten)]
        cfg: ConfigArg,
        /// re,im
        #[arg(long, default_value = "1,0.1")]
        z: String,
        /// branch of x
        #[arg(long, default_value_t = 0)]
        branch: usize,
        #[arg(long, default_value = "0:10:101")]
        x: String,
        /// source point branch:x'
        #[arg(long, default_value = "0:1")]
        source: String,
    },
    /// e^{itH} applied to the configured data
    Evolve {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value = "5:100:20")]
        t_grid: String,
        /// fit window a,b for the decay slope
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
        method: MethodArg,
        /// cutoff scale for the born method
        #[arg(long, default_value_t = 16.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 0.5)]
        q_star: f64,
    },
    /// Born series terms, pairing and perturbation gap against its bound
    Born {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value_t = 16.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 0.5)]
        q_star: f64,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long, default_value = "4,16,64")]
        t_grid: String,
    },
    /// Sup-norm decay scan with a log-log fit
    Decay {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value = "5:100:20")]
        t: String,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
        method: MethodArg,
    },
    /// Non-decaying eigenfunction of the weighted chain against the free star
    Counterexample {
        /// geometric:r or a comma list of weights
        #[arg(long, default_value = "geometric:2")]
        alphas: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "0:50:11")]
        t: String,
        #[arg(long, default_value_t = crate::verify::CHAIN_N_MAX)]
        n_max: usize,
    },
    /// Full invariant suite; exit 1 on any failure
    Check {
        #[command(flatten)]
        cfg: ConfigArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Spectral,
    Free,
    Born,
}

/// Points from "a:b:n" (inclusive linspace) or "v1,v2,...".
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect(),
        3 => {
            let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
            match n {
                0 => Err(bad()),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => Err(bad()),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let v = parse_grid(s)?;
    if v.len() != 2 {
        return Err(Error::Config(format!("expected two comma-separated numbers, got '{s}'")));
    }
    Ok((v[0], v[1]))
}

fn parse_alphas(s: &str, n_max: usize) -> Result<ChainNetwork> {
    match s.strip_prefix("geometric:") {
        Some(r) => {
            let r: f64 = r.parse().map_err(|_| Error::Config(format!("bad ratio in '{s}'")))?;
            ChainNetwork::geometric(r, n_max)
        }
        None => ChainNetwork::new(parse_grid(s)?),
    }
}

struct Output {
    out: Box<dyn Write>,
}

impl Output {
    fn open(path: &Option<PathBuf>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
            None => Box::new(io::BufWriter::new(io::stdout())),
        };
        Ok(Output { out })
    }

    fn table(mut self, meta: serde_json::Value, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        writeln!(self.out, "# {meta}")?;
        let mut w = csv::Writer::from_writer(self.out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn e(v: f64) -> String {
    format!("{v:.12e}")
}

fn load(cfg: &ConfigArg) -> Result<(RunConfig, Network)> {
    let c = RunConfig::from_file(&cfg.config)?;
    let net = Network::new(c.network.clone())?;
    Ok((c, net))
}

fn check_branch(net: &Network, j: usize) -> Result<()> {
    if j >= net.n() {
        return Err(Error::Config(format!("branch {j} out of range for N = {}", net.n())));
    }
    Ok(())
}

fn evolution_rows(r: &EvolutionResult) -> Vec<Vec<String>> {
    (0..r.times.len()).map(|i| vec![e(r.times[i]), e(r.sup_norms[i]), e(r.l1_norms[i]), e(r.l2_norms[i])]).collect()
}

fn run(cli: Cli) -> Result<i32> {
    let out = Output::open(&cli.out)?;
    match cli.command {
        Command::Jost { cfg, branch, z } => {
            let (_, net) = load(&cfg)?;
            check_branch(&net, branch)?;
            let zs = parse_grid(&z)?;
            let ze = net.zero_energy(branch)?;
            let assumption = net.check_assumption()?;
            let rows = zs
                .iter()
                .map(|&z| {
                    let s = net.solve_m(branch, C64::new(z, 0.0), Sign::Plus)?;
                    let p = net.point_scattering(branch, C64::new(z, 0.0))?;
                    Ok(vec![e(z), e(s.f[0].re), e(s.f[0].im), e(p.inv_t.re), e(p.inv_t.im), e(p.r2_over_t.re), e(p.r2_over_t.im)])
                })
                .collect::<Result<Vec<_>>>()?;
            let meta = json!({"command": "jost", "branch": branch, "zero_energy": ze, "assumption": assumption});
            out.table(meta, &["z", "f0_re", "f0_im", "inv_t_re", "inv_t_im", "r2_over_t_re", "r2_over_t_im"], rows)?;
        }
        Command::Scattering { cfg, z } => {
            let (_, net) = load(&cfg)?;
            let zs = parse_grid(&z)?;
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            let mut classes = Vec::new();
            for j in 0..net.n() {
                let sd = net.scattering(j, &zs)?;
                classes.push(sd.classification);
                for i in 0..zs.len() {
                    worst = worst.max(sd.unitarity_defect[i]);
                    rows.push(vec![
                        j.to_string(),
                        e(zs[i]),
                        e(sd.t[i].re),
                        e(sd.t[i].im),
                        e(sd.r1[i].re),
                        e(sd.r1[i].im),
                        e(sd.r2[i].re),
                        e(sd.r2[i].im),
                        e(sd.unitarity_defect[i]),
                    ]);
                }
            }
            let meta = json!({"command": "scattering", "max_unitarity_defect": worst, "classification": classes});
            out.table(meta, &["branch", "z", "t_re", "t_im", "r1_re", "r1_im", "r2_re", "r2_im", "unitarity_defect"], rows)?;
        }
        Command::Eigen { cfg, z, im } => {
            let (_, net) = load(&cfg)?;
            let zs = parse_grid(&z)?;
            let sf = s_function(&net, &zs)?;
            let mut rows = Vec::new();
            for (i, &zr) in zs.iter().enumerate() {
                let zc = C64::new(zr, im);
                let sd = SpectralData::new(&net, zc)?;
                for j in 0..net.n() {
                    for sign in [Sign::Plus, Sign::Minus] {
                        let fam = build_family(&sd, j, sign)?;
                        rows.push(vec![
                            e(zr),
                            j.to_string(),
                            if sign == Sign::Plus { "+".into() } else { "-".into() },
                            e(sf.s[i].re),
                            e(sf.s[i].im),
                            e(fam.continuity_residual),
                            e(fam.kirchhoff_residual),
                            e(fam.path_mismatch()),
                        ]);
                    }
                }
            }
            let meta = json!({"command": "eigen", "im": im, "s_lower_bound": sf.lower_bound, "s_min_re": sf.min_re});
            out.table(meta, &["z", "branch", "sign", "s_re", "s_im", "continuity", "kirchhoff", "path_mismatch"], rows)?;
        }
        Command::Kernel { cfg, z, branch, x, source } => {
            let (_, net) = load(&cfg)?;
            check_branch(&net, branch)?;
            let (zr, zi) = parse_pair(&z)?;
            let (k, xp) = match source.split_once(':') {
                Some((a, b)) => (
                    a.parse::<usize>().map_err(|_| Error::Config(format!("bad source '{source}'")))?,
                    b.parse::<f64>().map_err(|_| Error::Config(format!("bad source '{source}'")))?,
                ),
                None => return Err(Error::Config(format!("source must be branch:x, got '{source}'"))),
            };
            check_branch(&net, k)?;
            let ctx = KernelContext::new(&net, C64::new(zr, zi))?;
            let rows = parse_grid(&x)?
                .iter()
                .map(|&xv| {
                    let v = ctx.kernel(branch, xv, k, xp).value;
                    vec![e(xv), e(v.re), e(v.im)]
                })
                .collect();
            let meta = json!({"command": "kernel", "z": [zr, zi], "branch": branch, "source": [k, xp]});
            out.table(meta, &["x", "re", "im"], rows)?;
        }
        Command::Evolve { cfg, t_grid, window, method, lambda0, q_star } => {
            let (c, net) = load(&cfg)?;
            let times = parse_grid(&t_grid)?;
            let f = c.data_function(net.x.clone());
            let window = window.as_deref().map(parse_pair).transpose()?.unwrap_or(DEFAULT_FIT_WINDOW);
            match method {
                MethodArg::Born => {
                    let params = BornParams::new(&c.network, q_star)?;
                    let family = cutoff_constants(lambda0, 4.0 * lambda0, 6)?;
                    let res = born_series(&f, &f, &times, &family, &params)?;
                    let rows =
                        res.iter().map(|r| vec![e(r.t), e(r.pairing.re), e(r.pairing.im), e(r.error_estimate)]).collect();
                    let meta = json!({"command": "evolve", "method": "born", "lambda0": lambda0, "l": 4.0 * lambda0,
                        "k_max": res.first().map(|r| r.k_max), "tail_bound": res.first().map(|r| r.tail_bound)});
                    out.table(meta, &["t", "pairing_re", "pairing_im", "error_estimate"], rows)?;
                }
                MethodArg::Spectral | MethodArg::Free => {
                    let r = if method == MethodArg::Free {
                        if !c.network.potentials.iter().all(|p| p.is_zero()) {
                            return Err(Error::Config("the free method needs V = 0 on every branch".into()));
                        }
                        evolve_free(&f, &times)
                    } else {
                        evolve_spectral(&net, &f, &times, &c.spectral_options())?
                    };
                    let fit = r.fit(window);
                    let meta = json!({"command": "evolve", "method": r.method, "window": window,
                        "slope": fit.map(|f| f.0), "lambda_max": r.lambda_max,
                        "converged": r.quadrature.as_ref().map(|q| q.converged),
                        "error_estimate": r.quadrature.as_ref().map(|q| q.error_estimate)});
                    out.table(meta, &["t", "linf", "l1", "l2"], evolution_rows(&r))?;
                }
            }
        }
        Command::Born { cfg, lambda0, q_star, k_max, t_grid } => {
            let (c, net) = load(&cfg)?;
            let times = parse_grid(&t_grid)?;
            let f = c.data_function(net.x.clone());
            let mut params = BornParams::new(&c.network, q_star)?;
            if let Some(k) = k_max {
                if k > K_MAX_CAP {
                    return Err(Error::Config(format!("k_max {k} exceeds the cap {K_MAX_CAP}")));
                }
                params = params.with_k_max(k);
            }
            let family = cutoff_constants(lambda0, 4.0 * lambda0, 6)?;
            let res = born_series(&f, &f, &times, &family, &params)?;
            let km = res.first().map(|r| r.k_max).unwrap_or(0);
            let mut header: Vec<String> =
                ["t", "pairing_re", "pairing_im", "gap_abs", "bound", "holds", "error_estimate"].iter().map(|s| s.to_string()).collect();
            header.extend((0..=km).map(|k| format!("term_{k}")));
            let mut all_hold = true;
            let rows = res
                .iter()
                .map(|r| {
                    let gap: C64 = r.terms[1..].iter().sum();
                    let bound = gap_bound(&f, &f, r.t, &family, &params);
                    let holds = gap.norm() <= bound;
                    all_hold &= holds;
                    let mut row = vec![
                        e(r.t),
                        e(r.pairing.re),
                        e(r.pairing.im),
                        e(gap.norm()),
                        e(bound),
                        holds.to_string(),
                        e(r.error_estimate),
                    ];
                    row.extend(r.terms.iter().map(|v| e(v.norm())));
                    row
                })
                .collect();
            let meta = json!({"command": "born", "lambda0": lambda0, "l": 4.0 * lambda0, "q_star": q_star,
                "lambda_star": params.lambda_star, "k_max": km, "tail_bound": params.tail_bound(lambda0, km),
                "b_constant": params.b_constant(&family), "bounds_hold": all_hold});
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            out.table(meta, &header, rows)?;
        }
        Command::Decay { cfg, t, window, method } => {
            let (c, net) = load(&cfg)?;
            let times = parse_grid(&t)?;
            let window = match window {
                Some(w) => parse_pair(&w)?,
                None => (times.iter().cloned().fold(f64::INFINITY, f64::min).max(DEFAULT_FIT_WINDOW.0), times.iter().cloned().fold(0.0, f64::max)),
            };
            let m = match method {
                MethodArg::Spectral => Method::Spectral,
                MethodArg::Free => Method::Free,
                MethodArg::Born => return Err(Error::Config("decay supports the spectral and free methods".into())),
            };
            let f = c.data_function(net.x.clone());
            let (rep, r) = decay_scan(&net, &f, &times, m, window, &c.spectral_options())?;
            let meta = json!({"command": "decay", "slope": rep.slope, "intercept": rep.intercept,
                "fit_intercept": rep.fit_intercept, "window": rep.window, "residual": rep.residual,
                "accepted": rep.accepted, "method": rep.method, "flagged": rep.flagged});
            out.table(meta, &["t", "linf", "l1", "l2"], evolution_rows(&r))?;
            if rep.flagged.is_some() {
                return Ok(1);
            }
        }
        Command::Counterexample { alphas, k, t, n_max } => {
            let chain = parse_alphas(&alphas, n_max)?;
            let times = parse_grid(&t)?;
            let ev = chain_evolution_norms(&chain, k, &times)?;
            let contrast = counterexample_contrast(&chain, k, &times).ok();
            let star: Vec<Option<f64>> = times
                .iter()
                .map(|t| contrast.as_ref().and_then(|c| c.times.iter().position(|s| s == t).map(|i| c.star[i])))
                .collect();
            let rows = (0..times.len())
                .map(|i| vec![e(times[i]), e(ev.linf[i]), star[i].map(e).unwrap_or_default()])
                .collect();
            let meta = json!({"command": "counterexample", "k": k, "s": chain.s_sum, "eigenvalue": (k as f64 * std::f64::consts::PI).powi(2),
                "l1_0": ev.l1_0, "l1_bound": ev.l1_bound,
                "contrast_ratio": contrast.as_ref().map(|c| c.ratio), "contrast_required": contrast.as_ref().map(|c| c.required),
                "contrast_holds": contrast.as_ref().map(|c| c.holds)});
            out.table(meta, &["t", "linf", "star_linf_relative"], rows)?;
        }
        Command::Check { cfg } => {
            let c = RunConfig::from_file(&cfg.config)?;
            let rep = run_checks(&c.network)?;
            let rows = rep
                .checks
                .iter()
                .map(|c| vec![c.name.clone(), e(c.value), e(c.tol), c.passed.to_string()])
                .collect();
            out.table(json!({"command": "check", "passed": rep.passed}), &["name", "value", "tol", "passed"], rows)?;
            if !rep.passed {
                eprintln!("{}", json!({"status": "failed", "failures": rep.failures()}));
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn init_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("STARWAVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("STARWAVE_THREADS ignored: {e}");
        }
    }
}

/// Parse arguments and run; returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let usage = matches!(err, Error::Config(_) | Error::Json(_) | Error::Io(_));
            eprintln!("{}", json!({"status": if usage { "usage" } else { "failed" }, "error": err.to_string()}));
            if usage {
                2
            } else {
                1
            }
        }
    }
}
