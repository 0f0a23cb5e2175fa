use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::reflection::{reflection_bits, ApproxReflection, ReflectionConfig};
use super::spectrum::WalkSpectrum;
use super::{dot, geometry, MarkFlip, PairOperator, WalkOperators, ZERO};
use crate::engine::{Operator, C64};
use crate::error::{Error, Result};
use crate::markov::MarkedSet;
use crate::meter::{ChargeKind, QueryMeter};

/// How the reflection inside the search operator is realized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Exact reflection, no workspace.
    Ideal,
    /// The ideal operator preceded by a seeded unitary that moves every
    /// vector of `span{mu, mu_perp}` by exactly `eta`.
    PerturbedIdeal { eta: f64, seed: u64 },
    /// Phase-estimation reflection with `k` rounds of `s` bits (`None`
    /// picks [`reflection_bits`]).
    Full { s: Option<u32> },
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::Ideal => "ideal",
            Backend::PerturbedIdeal { .. } => "perturbed-ideal",
            Backend::Full { .. } => "full",
        }
    }
}

/// Update units charged per search-operator application:
/// `ceil(k / sqrt(delta))`.
pub fn update_charge(k: u32, delta: f64) -> u64 {
    (k as f64 / delta.sqrt() - 1e-9).ceil().max(0.0) as u64
}

enum Inner {
    Ideal(PairOperator),
    Perturbed { ideal: PairOperator, mu: Vec<C64>, mu_perp: Vec<C64>, e: [[C64; 2]; 2] },
    Full(Arc<ApproxReflection>),
}

/// `U = R (V_0 (x) I)`, metered per application.
pub struct SearchOperator {
    flip: MarkFlip,
    inner: Inner,
    pair_dim: usize,
    width: usize,
    k: u32,
    update_cost: u64,
    meter: Option<Arc<QueryMeter>>,
    backend: Backend,
}

impl std::fmt::Debug for SearchOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchOperator")
            .field("backend", &self.backend)
            .field("k", &self.k)
            .field("width", &self.width)
            .field("update_cost", &self.update_cost)
            .finish()
    }
}

/// `exp(i a n.sigma)` with `a = 2 asin(eta / 2)` and a seeded random axis.
fn perturbation(eta: f64, seed: u64) -> Result<[[C64; 2]; 2]> {
    if !(0.0..=2.0).contains(&eta) {
        return Err(Error::Parameter(format!("perturbation size {eta} outside [0, 2]")));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut axis = [0.0f64; 3];
    loop {
        axis.iter_mut().for_each(|a| *a = rng.sample(StandardNormal));
        let n = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            axis.iter_mut().for_each(|a| *a /= n);
            break;
        }
    }
    let a = 2.0 * (eta / 2.0).asin();
    let (c, s) = (a.cos(), a.sin());
    let i = C64::new(0.0, 1.0);
    let [nx, ny, nz] = axis;
    Ok([
        [C64::new(c, 0.0) + i * s * nz, i * s * C64::new(nx, -ny)],
        [i * s * C64::new(nx, ny), C64::new(c, 0.0) - i * s * nz],
    ])
}

impl SearchOperator {
    pub fn new(
        walk: &WalkOperators,
        marked: &MarkedSet,
        backend: Backend,
        k: u32,
        meter: Option<Arc<QueryMeter>>,
    ) -> Result<Self> {
        let inner = match backend {
            Backend::Ideal => Inner::Ideal(walk.ideal_reflection()),
            Backend::PerturbedIdeal { eta, seed } => {
                let g = geometry(walk, marked)?;
                Inner::Perturbed {
                    ideal: walk.ideal_reflection(),
                    mu: g.mu,
                    mu_perp: g.mu_perp,
                    e: perturbation(eta, seed)?,
                }
            }
            Backend::Full { s } => {
                let s = s.unwrap_or_else(|| reflection_bits(walk.spectral_gap()));
                let spectrum = WalkSpectrum::new(walk);
                Inner::Full(Arc::new(ApproxReflection::new(walk, &spectrum, ReflectionConfig { k, s })?))
            }
        };
        let width = match &inner {
            Inner::Full(r) => r.workspace_dim(),
            _ => 1,
        };
        Ok(Self {
            flip: walk.v0(marked, None),
            inner,
            pair_dim: walk.pair_dim(),
            width,
            k,
            update_cost: update_charge(k, walk.spectral_gap()),
            meter,
            backend,
        })
    }

    /// `Ubar (x) I` on the same workspace, without a meter.
    pub fn ideal_twin(&self, walk: &WalkOperators) -> SearchOperator {
        SearchOperator {
            flip: self.flip.clone(),
            inner: Inner::Ideal(walk.ideal_reflection()),
            pair_dim: self.pair_dim,
            width: self.width,
            k: self.k,
            update_cost: self.update_cost,
            meter: None,
            backend: Backend::Ideal,
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn update_cost(&self) -> u64 {
        self.update_cost
    }

    /// Workspace dimension carried next to the pair space.
    pub fn workspace_dim(&self) -> usize {
        self.width
    }

    pub fn pair_dim(&self) -> usize {
        self.pair_dim
    }

    pub fn reflection(&self) -> Option<&ApproxReflection> {
        match &self.inner {
            Inner::Full(r) => Some(r),
            _ => None,
        }
    }

    /// `|v>|0>` in this operator's layout.
    pub fn pad(&self, pair: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; pair.len() * self.width];
        for (p, z) in pair.iter().enumerate() {
            out[p * self.width] = *z;
        }
        out
    }
}

impl Operator for SearchOperator {
    fn dim(&self) -> usize {
        self.pair_dim * self.width
    }

    fn apply_slice(&self, v: &mut [C64]) {
        let m = self.width;
        match &self.inner {
            Inner::Ideal(r) => {
                self.flip.apply_wide(v, m);
                r.apply_wide(v, m);
            }
            Inner::Perturbed { ideal, mu, mu_perp, e } => {
                let (a, b) = (dot(mu, v), dot(mu_perp, v));
                let (a2, b2) = (e[0][0] * a + e[0][1] * b, e[1][0] * a + e[1][1] * b);
                let (da, db) = (a2 - a, b2 - b);
                for ((z, x), y) in v.iter_mut().zip(mu).zip(mu_perp) {
                    *z += da * x + db * y;
                }
                self.flip.apply_wide(v, m);
                ideal.apply_wide(v, m);
            }
            Inner::Full(r) => {
                self.flip.apply_wide(v, m);
                r.apply_wide(v);
            }
        }
    }

    fn charge(&self, applications: u64) {
        if let Some(meter) = &self.meter {
            meter.charge(ChargeKind::Update, applications * self.update_cost);
            meter.charge(ChargeKind::Checking, applications);
            meter.charge(ChargeKind::Application, applications);
        }
    }
}
