//! Classical collision-counting baselines: Bernoulli sampling of both
//! domains, the two-stage sampling estimator, and the doubling
//! constant-factor estimator whose inner collision count stands in for an
//! element-distinctness subroutine.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::collision::CollisionInstance;
use crate::error::{Error, Result};
use crate::meter::{ChargeKind, QueryMeter};

/// Meter label of the modelled element-distinctness charge.
pub const ED_LABEL: &str = "element_distinctness";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingRun {
    /// Requested inclusion probability.
    pub p: f64,
    /// `min(p, 1)`, the probability actually used.
    pub p_eff: f64,
    pub s_f: Vec<usize>,
    pub s_g: Vec<usize>,
    pub m_s: usize,
    /// `m_s / p_eff^2`.
    pub m_hat: f64,
}

impl SamplingRun {
    pub fn evaluations(&self) -> usize {
        self.s_f.len() + self.s_g.len()
    }
}

fn bernoulli_subset<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<usize> {
    (0..n).filter(|_| p >= 1.0 || rng.random::<f64>() < p).collect()
}

fn sampled_collisions(inst: &CollisionInstance, s_f: &[usize], s_g: &[usize]) -> usize {
    let fv: HashSet<u64> = s_f.iter().map(|&i| inst.f(i)).collect();
    s_g.iter().filter(|&&j| fv.contains(&inst.g(j))).count()
}

/// One run of the sampling estimator. Charges one oracle evaluation per
/// sampled index.
pub fn sample_count<R: Rng + ?Sized>(
    inst: &CollisionInstance,
    p: f64,
    rng: &mut R,
    meter: Option<&QueryMeter>,
) -> Result<SamplingRun> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("inclusion probability {p} must be positive")));
    }
    let p_eff = p.min(1.0);
    let s_f = bernoulli_subset(inst.n(), p_eff, rng);
    let s_g = bernoulli_subset(inst.n(), p_eff, rng);
    let m_s = sampled_collisions(inst, &s_f, &s_g);
    if let Some(m) = meter {
        m.charge(ChargeKind::Oracle, (s_f.len() + s_g.len()) as u64);
    }
    Ok(SamplingRun { p, p_eff, m_hat: m_s as f64 / (p_eff * p_eff), s_f, s_g, m_s })
}

/// `(1/eps) sqrt((3/m) ln(2/nu))`, unclamped.
pub fn lemma9_p_raw(epsilon: f64, m_lower: f64, nu: f64) -> f64 {
    (3.0 / m_lower * (2.0 / nu).ln()).sqrt() / epsilon
}

/// [`lemma9_p_raw`] clamped to 1.
pub fn lemma9_p(epsilon: f64, m_lower: f64, nu: f64) -> f64 {
    lemma9_p_raw(epsilon, m_lower, nu).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStageRun {
    pub stage1: SamplingRun,
    pub retried: bool,
    pub stage2: SamplingRun,
    pub m_hat: f64,
    pub evaluations: u64,
    /// Whether either stage had its probability clamped to 1.
    pub clamped: bool,
}

/// Stage 1 at `eps_0 = 1/2` from `m_bar`, stage 2 at `eps` from
/// `2 m_hat_1 / 3`, each with failure budget `delta / 2`.
pub fn two_stage_classical<R: Rng + ?Sized>(
    inst: &CollisionInstance,
    epsilon: f64,
    m_bar: usize,
    delta: f64,
    rng: &mut R,
    meter: Option<&QueryMeter>,
) -> Result<TwoStageRun> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) || m_bar == 0 {
        return Err(Error::Parameter(format!("need delta in (0, 1] and m_bar >= 1, got {delta}, {m_bar}")));
    }
    let local = QueryMeter::new();
    let p1 = lemma9_p_raw(0.5, m_bar as f64, delta / 2.0);
    let mut stage1 = sample_count(inst, p1, rng, Some(&local))?;
    let mut retried = false;
    if stage1.m_s == 0 {
        retried = true;
        stage1 = sample_count(inst, 2.0 * p1, rng, Some(&local))?;
        if stage1.m_s == 0 {
            return Err(Error::EstimationFailed("stage 1 sampled no collision, even after a retry".into()));
        }
    }
    let m_lower = (2.0 * stage1.m_hat / 3.0).max(1.0);
    let p2 = lemma9_p_raw(epsilon, m_lower, delta / 2.0);
    let stage2 = sample_count(inst, p2, rng, Some(&local))?;
    let snap = local.snapshot();
    if let Some(m) = meter {
        m.merge(&snap);
    }
    Ok(TwoStageRun {
        clamped: stage1.p > 1.0 || stage2.p > 1.0,
        m_hat: stage2.m_hat,
        evaluations: snap.oracle_evaluations,
        stage1,
        retried,
        stage2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfRound {
    pub p: f64,
    pub p_eff: f64,
    pub size_f: usize,
    pub size_g: usize,
    pub guard: bool,
    /// Collisions in the samples, when the guard passed.
    pub m_s: Option<usize>,
    pub updated: bool,
    pub modeled_cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantFactorTrace {
    pub m_hat: f64,
    pub p0: f64,
    pub p_stop: f64,
    /// `floor(100 (ln N)^2)`.
    pub threshold: usize,
    pub rounds: Vec<CfRound>,
    /// Whether any round updated the estimate.
    pub updated: bool,
}

/// The doubling estimator. `p` starts at `2 sqrt((3/N) ln(2N))` and doubles
/// while below `4 sqrt((3/m_bar) ln(2N))`. A round whose sample sizes pass
/// the `10 ln N * N p` guard and whose collision count is below
/// `floor(100 (ln N)^2)` sets `m_hat = m_s / p_eff^2`.
///
/// Sampling costs no queries; each guarded round charges the modelled
/// element-distinctness cost `ceil((|S_f| + |S_g|)^{2/3}) * min(m_s + 1,
/// threshold)` under [`ED_LABEL`].
pub fn constant_factor<R: Rng + ?Sized>(
    inst: &CollisionInstance,
    m_bar: usize,
    rng: &mut R,
    meter: Option<&QueryMeter>,
) -> Result<ConstantFactorTrace> {
    let n = inst.n();
    if n < 2 || m_bar == 0 {
        return Err(Error::Parameter(format!("need N >= 2 and m_bar >= 1, got N = {n}, m_bar = {m_bar}")));
    }
    let nf = n as f64;
    let log2n = (2.0 * nf).ln();
    let p0 = 2.0 * (3.0 / nf * log2n).sqrt();
    let p_stop = 4.0 * (3.0 / m_bar as f64 * log2n).sqrt();
    let threshold = (100.0 * nf.ln().powi(2)).floor() as usize;
    let mut m_hat = 0.0;
    let mut updated = false;
    let mut rounds = Vec::new();
    let mut p = p0;
    while p < p_stop {
        let p_eff = p.min(1.0);
        let s_f = bernoulli_subset(n, p_eff, rng);
        let s_g = bernoulli_subset(n, p_eff, rng);
        let cap = 10.0 * nf.ln() * nf * p;
        let guard = s_f.len() as f64 <= cap && s_g.len() as f64 <= cap;
        let mut round = CfRound {
            p,
            p_eff,
            size_f: s_f.len(),
            size_g: s_g.len(),
            guard,
            m_s: None,
            updated: false,
            modeled_cost: 0,
        };
        if guard {
            let m_s = sampled_collisions(inst, &s_f, &s_g);
            let cost = ((s_f.len() + s_g.len()) as f64).powf(2.0 / 3.0).ceil() as u64
                * (m_s + 1).min(threshold.max(1)) as u64;
            if let Some(m) = meter {
                m.charge(ChargeKind::Modeled(ED_LABEL.into()), cost);
            }
            round.m_s = Some(m_s);
            round.modeled_cost = cost;
            if m_s < threshold {
                m_hat = m_s as f64 / (p_eff * p_eff);
                round.updated = true;
                updated = true;
            }
        }
        rounds.push(round);
        p *= 2.0;
    }
    Ok(ConstantFactorTrace { m_hat, p0, p_stop, threshold, rounds, updated })
}
