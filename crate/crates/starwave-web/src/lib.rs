//! Browser bindings for a few quick starwave computations.

use std::sync::Arc;

use starwave::jost::Network;
use starwave::netmodel::{BranchGrid, NetworkFunction, NetworkSpec, PotentialSpec};
use starwave::propagate::evolve_free;
use starwave::verify::{chain_evolution_norms, ChainNetwork};
use wasm_bindgen::prelude::*;

fn js(e: starwave::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Scattering on branch 0 of an N-branch network with V = a e^{-r x} + h 1_[0,w].
/// Returns [z, |T|^2, |R2|^2, defect] repeated for each of `n` points in (0, z_max].
#[wasm_bindgen]
pub fn scattering(n_branches: usize, amplitude: f64, rate: f64, height: f64, width: f64, z_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    let mut ps = vec![PotentialSpec::zero(); n_branches.max(2)];
    ps[0] = if height != 0.0 {
        PotentialSpec::square(height, 0.0, width)
    } else {
        PotentialSpec::exp_decay(amplitude, rate)
    };
    if height != 0.0 && amplitude != 0.0 {
        ps[1] = PotentialSpec::exp_decay(amplitude, rate);
    }
    let net = Network::new(NetworkSpec::new(ps, BranchGrid::graded(40.0, 1001)).map_err(js)?).map_err(js)?;
    let z: Vec<f64> = (1..=n.max(1)).map(|i| z_max * i as f64 / n.max(1) as f64).collect();
    let sd = net.scattering(0, &z).map_err(js)?;
    let mut out = Vec::with_capacity(4 * z.len());
    for i in 0..z.len() {
        out.extend([z[i], sd.t[i].norm_sqr(), sd.r2[i].norm_sqr(), sd.unitarity_defect[i]]);
    }
    Ok(out)
}

/// Sup-norm of e^{itH0} applied to e^{-x^2} on every branch, at `n` times in [t_min, t_max].
/// Returns [t, sup, fitted slope] rows; the slope is repeated on every row.
#[wasm_bindgen]
pub fn free_decay(n_branches: usize, t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    if !(t_min > 0.0 && t_max > t_min) || n < 2 {
        return Err(JsValue::from_str("need 0 < t_min < t_max and at least two times"));
    }
    let x = Arc::new(BranchGrid::graded(20.0, 801).nodes());
    let f = NetworkFunction::from_real(x, n_branches.max(2), |_, x| (-x * x).exp());
    let times: Vec<f64> = (0..n).map(|i| t_min * (t_max / t_min).powf(i as f64 / (n - 1) as f64)).collect();
    let r = evolve_free(&f, &times);
    let slope = r.fit((t_min, t_max)).map(|f| f.0).unwrap_or(f64::NAN);
    Ok(times.iter().zip(&r.sup_norms).flat_map(|(t, s)| [*t, *s, slope]).collect())
}

/// Chain alpha_n = ratio^n: [s, ||u(0)||_1, sqrt(2 s), then ||u(t)||_inf at n times in [0, t_max]].
#[wasm_bindgen]
pub fn chain_norms(ratio: f64, k: usize, t_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    let chain = ChainNetwork::geometric(ratio, 30).map_err(js)?;
    let times: Vec<f64> = (0..n.max(1)).map(|i| t_max * i as f64 / (n.max(2) - 1) as f64).collect();
    let ev = chain_evolution_norms(&chain, k, &times).map_err(js)?;
    let mut out = vec![chain.s_sum, ev.l1_0, ev.l1_bound];
    out.extend(ev.linf);
    Ok(out)
}
