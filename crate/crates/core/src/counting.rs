//! Approximate counting of marked states: phase estimation on the search
//! operator with input `|pi>|0>`, readout `y = b / 2^t`, estimate
//! `N sin^2(y pi)` (or `sin^2(y pi)` for the marked fraction).

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::engine::{sample_outcome, C64};
use crate::error::{Error, Result};
use crate::markov::{marked_fraction, MarkedSet};
use crate::meter::{MeterSnapshot, QueryMeter};
use crate::phase::{self, circular_distance};
use crate::walk::{distance, geometry, Backend, SearchOperator, WalkOperators};

/// Extra phase qubits on top of `t1`: `ceil(log2(2 + 1/0.02))`.
pub const EXTRA_BITS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub t1: u32,
    pub t: u32,
    pub k: u32,
    #[serde(skip)]
    pub backend: Backend,
}

/// `t1 = ceil(log2(5 pi / (eps sqrt(lambda))) - 1)`, `t = t1 + 6`,
/// `k = 2t + t1 + 1`.
pub fn params(epsilon: f64, lambda: f64, backend: Backend) -> Result<CountingParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Parameter(format!("lambda {lambda} outside (0, 1]")));
    }
    let t1 = ((5.0 * PI / (epsilon * lambda.sqrt())).log2() - 1.0).ceil().max(0.0) as u32;
    let t = t1 + EXTRA_BITS;
    Ok(CountingParams { epsilon, lambda, t1, t, k: 2 * t + t1 + 1, backend })
}

/// The perturbed-ideal backend at the reflection error bound `2^{1-k}`.
pub fn perturbed_backend(k: u32, seed: u64) -> Backend {
    Backend::PerturbedIdeal { eta: 2f64.powi(1 - k as i32), seed }
}

/// `scale * sin^2(y pi)`.
pub fn estimate_from_readout(y: f64, scale: f64) -> f64 {
    let s = (y * PI).sin();
    scale * s * s
}

/// Outcomes `b` whose readout lies within `2^{-t1}` of `phi / pi` or
/// `-phi / pi` on the circle.
pub fn window_outcomes(t: u32, t1: u32, phi: f64) -> Vec<usize> {
    let n = 1usize << t;
    let w = 2f64.powi(-(t1 as i32));
    let target = phi / PI;
    (0..n)
        .filter(|&b| {
            let y = b as f64 / n as f64;
            circular_distance(y, target) <= w || circular_distance(y, -target) <= w
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingResult {
    pub params: CountingParams,
    pub backend: &'static str,
    pub sample: usize,
    pub y: f64,
    /// `M_hat` for counts, `p_hat` for fractions.
    pub estimate: f64,
    /// `N` for counts, 1 for fractions.
    pub scale: f64,
    /// `M` or `p_M`.
    pub truth: f64,
    pub p_marked: f64,
    /// Mass of outcomes with `|estimate - truth| < eps truth`.
    pub success_mass: f64,
    /// Mass of outcomes inside [`window_outcomes`].
    pub window_mass: f64,
    pub meter: MeterSnapshot,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub distribution: Vec<f64>,
}

impl CountingResult {
    pub fn succeeded(&self) -> bool {
        (self.estimate - self.truth).abs() < self.params.epsilon * self.truth
    }
}

/// Estimates `M` for a chain with uniform stationary distribution.
pub fn approx_count<R: Rng + ?Sized>(
    walk: &WalkOperators,
    marked: &MarkedSet,
    params: &CountingParams,
    rng: &mut R,
    meter: Option<Arc<QueryMeter>>,
) -> Result<CountingResult> {
    if !walk.chain().is_uniform() {
        return Err(Error::Parameter(
            "stationary distribution is not uniform; use approx_fraction to estimate p_M".into(),
        ));
    }
    run(walk, marked, params, walk.n() as f64, rng, meter)
}

/// Estimates `p_M` for any reversible ergodic chain.
pub fn approx_fraction<R: Rng + ?Sized>(
    walk: &WalkOperators,
    marked: &MarkedSet,
    params: &CountingParams,
    rng: &mut R,
    meter: Option<Arc<QueryMeter>>,
) -> Result<CountingResult> {
    run(walk, marked, params, 1.0, rng, meter)
}

fn run<R: Rng + ?Sized>(
    walk: &WalkOperators,
    marked: &MarkedSet,
    params: &CountingParams,
    scale: f64,
    rng: &mut R,
    meter: Option<Arc<QueryMeter>>,
) -> Result<CountingResult> {
    if marked.n() != walk.n() {
        return Err(Error::Validation(format!("marked set over {} states for a chain of {}", marked.n(), walk.n())));
    }
    let meter = meter.unwrap_or_default();
    let before = meter.snapshot();
    let p_marked = marked_fraction(walk.chain().pi(), marked);
    let mut warnings = Vec::new();
    if params.lambda > p_marked * (1.0 + 1e-9) {
        warnings.push(format!("lambda {} exceeds p_M {p_marked}; the error bound does not apply", params.lambda));
    }
    let phi = if p_marked >= 1.0 { PI / 2.0 } else { geometry(walk, marked)?.phi };
    let u = SearchOperator::new(walk, marked, params.backend, params.k, Some(meter.clone()))?;
    let input = u.pad(&walk.pi_state(Some(&meter)));
    let distribution = phase::distribution(&u, &input, params.t)?;
    let sample = sample_outcome(&distribution, rng)?;
    let n = distribution.len() as f64;
    let y = sample as f64 / n;
    let truth = scale * p_marked;
    let success_mass = distribution
        .iter()
        .enumerate()
        .filter(|(b, _)| (estimate_from_readout(*b as f64 / n, scale) - truth).abs() < params.epsilon * truth)
        .map(|(_, p)| p)
        .sum();
    let window_mass = window_outcomes(params.t, params.t1, phi).iter().map(|&b| distribution[b]).sum();
    Ok(CountingResult {
        params: *params,
        backend: params.backend.label(),
        sample,
        y,
        estimate: estimate_from_readout(y, scale),
        scale,
        truth,
        p_marked,
        success_mass,
        window_mass,
        meter: MeterSnapshot::diff(&before, &meter.snapshot()),
        warnings,
        distribution,
    })
}

/// Largest `|| (C_t(U) - C_t(Ubar)) |0^t>|psi>|0> ||` over `trials` seeded
/// random `psi` in `A + B`, where `U` uses `backend` with `k` rounds and
/// `Ubar` is its ideal twin.
pub fn lemma6_deviation(
    walk: &WalkOperators,
    marked: &MarkedSet,
    t: u32,
    k: u32,
    backend: Backend,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let u = SearchOperator::new(walk, marked, backend, k, None)?;
    let ideal = u.ideal_twin(walk);
    let mut rng = crate::rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let psi = walk.random_sum_space_state(&mut rng);
        let padded: Vec<C64> = u.pad(&psi);
        let a = phase::output_state(&u, &padded, t)?;
        let b = phase::output_state(&ideal, &padded, t)?;
        worst = worst.max(distance(&a, &b));
    }
    Ok(worst)
}

/// `2^{2t - k + 1}`.
pub fn lemma6_bound(t: u32, k: u32) -> f64 {
    2f64.powi(2 * t as i32 - k as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{complete_graph_chain, johnson_chain, MarkovChain};
    use crate::rng::seeded;
    use crate::walk::validated;

    #[test]
    fn parameter_examples() {
        let p = params(0.1, 0.25, Backend::Ideal).unwrap();
        assert_eq!((p.t1, p.t, p.k), (8, 14, 37));
        let p = params(0.5, 1.0, Backend::Ideal).unwrap();
        assert_eq!((p.t1, p.t, p.k), (4, 10, 25));
        let a = params(0.3, 0.25, Backend::Ideal).unwrap();
        let b = params(0.3, 0.0625, Backend::Ideal).unwrap();
        assert_eq!(b.t1, a.t1 + 1);
        assert!(params(1.0, 0.5, Backend::Ideal).is_err());
        assert!(params(0.5, 1.5, Backend::Ideal).is_err());
        assert_eq!(EXTRA_BITS, (2.0f64 + 1.0 / 0.02).log2().ceil() as u32);
    }

    #[test]
    fn readout_arithmetic() {
        assert!((estimate_from_readout(1.0 / 6.0, 16.0) - 4.0).abs() < 1e-12);
        assert_eq!(estimate_from_readout(0.0, 16.0), 0.0);
        // y and 1 - y give the same estimate
        for b in 0..64 {
            let y = b as f64 / 64.0;
            assert!((estimate_from_readout(y, 10.0) - estimate_from_readout(1.0 - y, 10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn error_chain_inside_the_window() {
        for (eps, p_m) in [(0.25, 0.25), (0.1, 0.05), (1.0 / 3.0, 0.3), (0.2, 0.01)] {
            let p = params(eps, p_m, Backend::Ideal).unwrap();
            let phi = p_m.sqrt().asin();
            let window = window_outcomes(p.t, p.t1, phi);
            assert!(!window.is_empty());
            for b in window {
                let y = b as f64 / (1u64 << p.t) as f64;
                let est = estimate_from_readout(y, 1.0);
                assert!((est.sqrt() - p_m.sqrt()).abs() < 0.4 * eps * p_m.sqrt());
                assert!((est - p_m).abs() < 24.0 / 25.0 * eps * p_m);
            }
        }
    }

    #[test]
    fn complete_graph_count_succeeds() {
        let walk = validated(complete_graph_chain(16).unwrap()).unwrap();
        let marked = MarkedSet::new(16, [0, 5, 9, 12]).unwrap();
        let p = params(0.25, 0.25, Backend::Ideal).unwrap();
        let r = approx_count(&walk, &marked, &p, &mut seeded(1), None).unwrap();
        assert!(r.success_mass >= 0.95, "{}", r.success_mass);
        assert!(r.window_mass >= 0.99, "{}", r.window_mass);
        assert!((0.0..=16.0).contains(&r.estimate));
        assert_eq!(r.meter.setup, 1);
        assert_eq!(r.meter.applications, (1u64 << p.t) - 1);
        assert_eq!(r.meter.checking, r.meter.applications);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn johnson_collision_count() {
        // 2N = 8 over f-values 0,0,1,2 and g-values 3,4,5,6: one collision
        let chain = johnson_chain(8, 2).unwrap();
        let labels = chain.labels().unwrap().to_vec();
        let values = [0, 0, 1, 2, 3, 4, 5, 6];
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, s)| values[s[0]] == values[s[1]])
            .map(|(i, _)| i)
            .collect();
        assert_eq!(members.len(), 1);
        let walk = validated(chain).unwrap();
        let marked = MarkedSet::new(28, members).unwrap();
        let p = params(1.0 / 3.0, 1.0 / 28.0, Backend::Ideal).unwrap();
        let r = approx_count(&walk, &marked, &p, &mut seeded(2), None).unwrap();
        assert!(r.success_mass >= 0.95, "{}", r.success_mass);
    }

    #[test]
    fn two_state_fraction() {
        let chain = MarkovChain::from_rows("two", &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        let walk = validated(chain).unwrap();
        let marked = MarkedSet::new(2, [1]).unwrap();
        let p = params(0.3, 0.3, Backend::Ideal).unwrap();
        assert!(approx_count(&walk, &marked, &p, &mut seeded(3), None).is_err());
        let r = approx_fraction(&walk, &marked, &p, &mut seeded(3), None).unwrap();
        assert!((r.truth - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.success_mass >= 0.95, "{}", r.success_mass);
    }

    #[test]
    fn fraction_is_count_over_n_for_uniform_chains() {
        let walk = validated(complete_graph_chain(8).unwrap()).unwrap();
        let marked = MarkedSet::new(8, [2, 3]).unwrap();
        let p = params(0.4, 0.25, Backend::Ideal).unwrap();
        let c = approx_count(&walk, &marked, &p, &mut seeded(4), None).unwrap();
        let f = approx_fraction(&walk, &marked, &p, &mut seeded(4), None).unwrap();
        assert_eq!(c.sample, f.sample);
        assert!((c.estimate / 8.0 - f.estimate).abs() < 1e-12);
    }

    #[test]
    fn lambda_above_p_marked_warns() {
        let walk = validated(complete_graph_chain(8).unwrap()).unwrap();
        let marked = MarkedSet::new(8, [2]).unwrap();
        let p = params(0.4, 0.5, Backend::Ideal).unwrap();
        let r = approx_count(&walk, &marked, &p, &mut seeded(5), None).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn perturbed_backend_keeps_the_window() {
        let walk = validated(complete_graph_chain(16).unwrap()).unwrap();
        let marked = MarkedSet::new(16, [0, 5, 9, 12]).unwrap();
        let base = params(0.25, 0.25, Backend::Ideal).unwrap();
        let p = CountingParams { backend: perturbed_backend(base.k, 7), ..base };
        let r = approx_count(&walk, &marked, &p, &mut seeded(6), None).unwrap();
        assert!(r.window_mass >= 0.99 - 2f64.powi(1 - 2 * p.t1 as i32));
    }

    #[test]
    fn lemma6_on_small_chains() {
        let walk = validated(complete_graph_chain(3).unwrap()).unwrap();
        let marked = MarkedSet::new(3, [2]).unwrap();
        let d = lemma6_deviation(&walk, &marked, 1, 6, Backend::Full { s: None }, 4, 11).unwrap();
        assert!(d <= lemma6_bound(1, 6), "{d}");
        assert_eq!(lemma6_bound(1, 6), 0.125);
        let zero = lemma6_deviation(&walk, &marked, 0, 6, Backend::Full { s: None }, 2, 11).unwrap();
        assert!(zero < 1e-12);
        for (t, eta) in [(1u32, 1e-3), (2, 1e-3), (3, 1e-4)] {
            let d = lemma6_deviation(&walk, &marked, t, 0, Backend::PerturbedIdeal { eta, seed: 9 }, 4, 12).unwrap();
            let bound = (1u64 << t) as f64 * ((1u64 << t) - 1) as f64 * eta;
            assert!(d <= bound * (1.0 + 1e-9), "t={t} d={d} bound={bound}");
        }
    }
}
