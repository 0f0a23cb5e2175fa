//! wasm-bindgen bindings behind `www/index.html`.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;
use walkcount::collision::{choose_r, lambda_for};
use walkcount::counting::{approx_count, params};
use walkcount::engine::{Diagonal, C64};
use walkcount::markov::{complete_graph_chain, MarkedSet};
use walkcount::phase::distribution;
use walkcount::rng::seeded;
use walkcount::walk::{validated, Backend};

fn js_err(e: walkcount::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Outcome distribution of `t`-qubit phase estimation on the eigenvector
/// of a single phase gate with eigenphase `phi` (in turns).
#[wasm_bindgen]
pub fn phase_distribution(phi: f64, t: u32) -> Result<Vec<f64>, JsError> {
    if !(1..=12).contains(&t) {
        return Err(JsError::new("t must be between 1 and 12"));
    }
    let gate = Diagonal::new(vec![C64::new(1.0, 0.0), C64::from_polar(1.0, 2.0 * PI * phi)]);
    distribution(&gate, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], t).map_err(js_err)
}

#[wasm_bindgen]
pub struct CountingView {
    estimate: f64,
    success_mass: f64,
    t1: u32,
    t: u32,
    applications: u64,
    distribution: Vec<f64>,
}

#[wasm_bindgen]
impl CountingView {
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> f64 {
        self.estimate
    }
    #[wasm_bindgen(getter, js_name = successMass)]
    pub fn success_mass(&self) -> f64 {
        self.success_mass
    }
    #[wasm_bindgen(getter)]
    pub fn t1(&self) -> u32 {
        self.t1
    }
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> u32 {
        self.t
    }
    #[wasm_bindgen(getter)]
    pub fn applications(&self) -> f64 {
        self.applications as f64
    }
    #[wasm_bindgen(getter)]
    pub fn distribution(&self) -> Vec<f64> {
        self.distribution.clone()
    }
}

/// Counts `marked` of the `n` vertices of the complete graph with loops,
/// using the ideal search operator and `lambda = marked / n`.
#[wasm_bindgen]
pub fn count_complete_graph(n: usize, marked: usize, epsilon: f64, seed: u64) -> Result<CountingView, JsError> {
    if !(2..=64).contains(&n) || marked == 0 || marked > n {
        return Err(JsError::new("need 2 <= n <= 64 and 1 <= marked <= n"));
    }
    let walk = validated(complete_graph_chain(n).map_err(js_err)?).map_err(js_err)?;
    let set = MarkedSet::new(n, 0..marked).map_err(js_err)?;
    let p = params(epsilon, marked as f64 / n as f64, Backend::Ideal).map_err(js_err)?;
    if p.t > 16 {
        return Err(JsError::new("epsilon too small for an interactive run"));
    }
    let res = approx_count(&walk, &set, &p, &mut seeded(seed), None).map_err(js_err)?;
    Ok(CountingView {
        estimate: res.estimate,
        success_mass: res.success_mass,
        t1: p.t1,
        t: p.t,
        applications: res.meter.applications,
        distribution: res.distribution,
    })
}

/// `[r, lambda, lambda_for_r = 2, ..., lambda_for_r = 2N]` for the
/// collision reduction: the chosen subset size followed by the marked
/// fraction of every Johnson graph `J(2N, r)`.
#[wasm_bindgen]
pub fn collision_profile(n: usize, m: usize, epsilon: f64) -> Result<Vec<f64>, JsError> {
    if !(2..=500).contains(&n) || m == 0 || m > n {
        return Err(JsError::new("need 2 <= N <= 500 and 1 <= m <= N"));
    }
    let choice = choose_r(epsilon, m, n).map_err(js_err)?;
    let mut out = vec![choice.r as f64, lambda_for(m, n, choice.r).map_err(js_err)?];
    for r in 2..=2 * n {
        out.push(lambda_for(m, n, r).map_err(js_err)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_phase_is_sharp() {
        let d = phase_distribution(0.25, 4).ok().unwrap();
        assert!((d[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counting_view_matches_meter() {
        let v = count_complete_graph(16, 4, 0.5, 1).ok().unwrap();
        assert_eq!(v.applications(), ((1u64 << v.t()) - 1) as f64);
        assert!(v.success_mass() > 0.95);
        assert_eq!(v.distribution().len(), 1 << v.t());
    }

    #[test]
    fn profile_grows_with_r() {
        let p = collision_profile(4, 2, 0.3).ok().unwrap();
        assert_eq!(p.len(), 2 + 7);
        assert!(p[2..].windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(p[1], p[2 + p[0] as usize - 2]);
    }
}
