//! Collision counting for two injective functions `f, g: [N] -> [K]`.
//!
//! The Johnson-graph domain is `0..2N`: element `e < N` stands for the
//! f-side index `e`, element `N + j` for the g-side index `j`. An `r`-subset
//! is marked when it holds both sides of some collision.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::classical::{constant_factor, ConstantFactorTrace};
use crate::counting::{approx_count, params, CountingResult};
use crate::engine::sample_outcome;
use crate::error::{Error, Result};
use crate::markov::{johnson_chain, MarkedSet, MarkovChain};
use crate::meter::{MeterSnapshot, QueryMeter};
use crate::walk::{validated, Backend};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollisionInstance {
    n: usize,
    k: u64,
    f: Vec<u64>,
    g: Vec<u64>,
}

fn check_injective(name: &str, values: &[u64], k: u64) -> Result<()> {
    let mut seen = HashSet::new();
    for &v in values {
        if v == 0 || v > k {
            return Err(Error::Validation(format!("{name} takes value {v} outside 1..={k}")));
        }
        if !seen.insert(v) {
            return Err(Error::Validation(format!("{name} is not injective: value {v} repeats")));
        }
    }
    Ok(())
}

impl CollisionInstance {
    pub fn new(k: u64, f: Vec<u64>, g: Vec<u64>) -> Result<Self> {
        if f.len() != g.len() {
            return Err(Error::Validation(format!("f has {} values but g has {}", f.len(), g.len())));
        }
        if f.is_empty() {
            return Err(Error::Validation("empty instance".into()));
        }
        if k <= f.len() as u64 {
            return Err(Error::Validation(format!("codomain size {k} must exceed N = {}", f.len())));
        }
        check_injective("f", &f, k)?;
        check_injective("g", &g, k)?;
        Ok(Self { n: f.len(), k, f, g })
    }

    /// Random instance with exactly `m` collisions: `m` shared values, the
    /// rest of `f` and `g` drawn from disjoint pools.
    pub fn generate<R: Rng + ?Sized>(n: usize, k: u64, m: usize, rng: &mut R) -> Result<Self> {
        if m > n {
            return Err(Error::Parameter(format!("m = {m} exceeds N = {n}")));
        }
        let needed = (2 * n - m) as u64;
        if k <= n as u64 || k < needed {
            return Err(Error::Parameter(format!(
                "K = {k} too small: need K > N and K >= 2N - m = {needed}"
            )));
        }
        let mut pool: Vec<u64> = (1..=k).collect();
        let (chosen, _) = pool.partial_shuffle(rng, needed as usize);
        let shared = &chosen[..m];
        let only_f = &chosen[m..n];
        let only_g = &chosen[n..];
        let mut f: Vec<u64> = shared.iter().chain(only_f).copied().collect();
        let mut g: Vec<u64> = shared.iter().chain(only_g).copied().collect();
        f.shuffle(rng);
        g.shuffle(rng);
        Self::new(k, f, g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn f(&self, i: usize) -> u64 {
        self.f[i]
    }

    pub fn g(&self, j: usize) -> u64 {
        self.g[j]
    }

    pub fn f_values(&self) -> &[u64] {
        &self.f
    }

    pub fn g_values(&self) -> &[u64] {
        &self.g
    }

    /// Text form: `N`, `K`, `f` and `g` lines; `#` starts a comment.
    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "N {}", self.n);
        let _ = writeln!(s, "K {}", self.k);
        let _ = writeln!(s, "f {}", join(&self.f));
        let _ = writeln!(s, "g {}", join(&self.g));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut n, mut k, mut f, mut g) = (None, None, None, None);
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: no + 1, message };
            let mut parts = line.split_whitespace();
            let key = parts.next().expect("nonempty line");
            let nums: Vec<u64> = parts
                .map(|p| p.parse::<u64>().map_err(|e| bad(format!("`{p}`: {e}"))))
                .collect::<Result<_>>()?;
            match key {
                "N" | "K" if nums.len() != 1 => return Err(bad(format!("`{key}` takes one number"))),
                "N" => n = Some(nums[0] as usize),
                "K" => k = Some(nums[0]),
                "f" => f = Some(nums),
                "g" => g = Some(nums),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, message: format!("missing `{what}` line") };
        let (f, g) = (f.ok_or_else(|| missing("f"))?, g.ok_or_else(|| missing("g"))?);
        let inst = Self::new(k.ok_or_else(|| missing("K"))?, f, g)?;
        if let Some(n) = n {
            if n != inst.n {
                return Err(Error::Validation(format!("header says N = {n} but f has {} values", inst.n)));
            }
        }
        Ok(inst)
    }
}

/// Brute-force collision count.
pub fn exact_collisions(inst: &CollisionInstance) -> usize {
    let fv: HashSet<u64> = inst.f.iter().copied().collect();
    inst.g.iter().filter(|v| fv.contains(v)).count()
}

/// Whether `subset` of `0..2N` contains both sides of a collision.
pub fn is_marked(inst: &CollisionInstance, subset: &[usize]) -> bool {
    let n = inst.n;
    let fv: HashSet<u64> = subset.iter().filter(|&&e| e < n).map(|&e| inst.f[e]).collect();
    subset.iter().any(|&e| e >= n && fv.contains(&inst.g[e - n]))
}

/// `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if k < 0 || n < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= BigUint::from((n - i) as u64);
        acc /= BigUint::from((i + 1) as u64);
    }
    acc
}

/// `l_j = C(m, j) C(2N - 2j, r - 2j)`.
pub fn ell(m: usize, n: usize, r: usize, j: usize) -> BigUint {
    binomial(m as i64, j as i64) * binomial(2 * n as i64 - 2 * j as i64, r as i64 - 2 * j as i64)
}

/// Number of marked `r`-subsets when the instance has `m` collisions:
/// `sum_{j>=1} (-1)^{j+1} l_j`.
pub fn m_r(m: usize, n: usize, r: usize) -> BigUint {
    let mut acc = BigInt::zero();
    for j in 1..=m {
        let term = BigInt::from(ell(m, n, r, j));
        if j % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc.to_biguint().expect("inclusion-exclusion count is nonnegative")
}

fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    // shift both down together so huge binomials keep their ratio
    let bits = a.bits().max(b.bits());
    let shift = bits.saturating_sub(1000);
    let (a, b) = (a >> shift, b >> shift);
    a.to_f64().unwrap_or(f64::INFINITY) / b.to_f64().unwrap_or(f64::INFINITY)
}

/// `((m - 1)/2) (r - 2)(r - 3) / ((2N - 2)(2N - 3))`.
pub fn r1(m: usize, n: usize, r: usize) -> f64 {
    if r < 4 || n < 2 {
        return 0.0;
    }
    let d = 2.0 * n as f64;
    (m as f64 - 1.0) / 2.0 * ((r - 2) * (r - 3)) as f64 / ((d - 2.0) * (d - 3.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ratios {
    pub r1: f64,
    /// `R1` evaluated at `m_up`.
    pub r_prime: f64,
    /// `R_j = l_{j+1} / l_j` for `j = 1, 2, ...` until `l_j` or `l_{j+1}` vanishes.
    pub r_seq: Vec<f64>,
}

pub fn ratios(m: usize, m_up: usize, n: usize, r: usize) -> Ratios {
    let mut r_seq = Vec::new();
    for j in 1..m {
        let (a, b) = (ell(m, n, r, j), ell(m, n, r, j + 1));
        if a.is_zero() || b.is_zero() {
            break;
        }
        r_seq.push(big_ratio(&b, &a));
    }
    Ratios { r1: r1(m, n, r), r_prime: r1(m_up, n, r), r_seq }
}

/// `m_hat = (1 + R') M_hat_r / C(2N - 2, r - 2)`.
pub fn estimator_from_mr(mr_hat: f64, r_prime: f64, n: usize, r: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::Parameter(format!("r = {r} must be at least 2")));
    }
    let denom = binomial(2 * n as i64 - 2, r as i64 - 2);
    let denom = denom.to_f64().filter(|d| d.is_finite() && *d > 0.0).ok_or_else(|| {
        Error::Parameter(format!("C(2N - 2, r - 2) unusable for N = {n}, r = {r}"))
    })?;
    Ok((1.0 + r_prime) * mr_hat / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RChoice {
    pub r: usize,
    /// `max(2, floor(eps^{1/12} (2N / sqrt(m_up))^{2/3}))` before repair.
    pub candidate: usize,
    pub conditions_hold: bool,
}

fn r_conditions(epsilon: f64, m_up: usize, n: usize, r: usize) -> bool {
    let rp = r1(m_up, n, r);
    rp <= epsilon.sqrt() && rp < (epsilon / 2.0).sqrt()
}

pub fn choose_r(epsilon: f64, m_up: usize, n: usize) -> Result<RChoice> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1]")));
    }
    if m_up == 0 || n < 2 {
        return Err(Error::Parameter(format!("need m_up >= 1 and N >= 2, got m_up = {m_up}, N = {n}")));
    }
    let raw = epsilon.powf(1.0 / 12.0) * (2.0 * n as f64 / (m_up as f64).sqrt()).powf(2.0 / 3.0);
    let candidate = (raw.floor() as usize).max(2);
    let mut r = candidate.min(2 * n - 1).max(2);
    while r > 2 && !r_conditions(epsilon, m_up, n, r) {
        r -= 1;
    }
    Ok(RChoice { r, candidate, conditions_hold: r_conditions(epsilon, m_up, n, r) })
}

/// `M_r(m_low) / C(2N, r)`.
pub fn lambda_for(m_low: usize, n: usize, r: usize) -> Result<f64> {
    if m_low == 0 {
        return Err(Error::Parameter("m_low = 0 gives lambda = 0".into()));
    }
    Ok(big_ratio(&m_r(m_low, n, r), &binomial(2 * n as i64, r as i64)))
}

/// `J(2N, r)` with the collision-induced marking.
pub fn johnson_marking(inst: &CollisionInstance, r: usize) -> Result<(MarkovChain, MarkedSet)> {
    let chain = johnson_chain(2 * inst.n, r)?;
    let members: Vec<usize> = chain
        .labels()
        .expect("Johnson chains are labelled")
        .iter()
        .enumerate()
        .filter(|(_, s)| is_marked(inst, s))
        .map(|(i, _)| i)
        .collect();
    let marked = MarkedSet::new(chain.n(), members)?;
    Ok((chain, marked))
}

type CacheKey = (usize, usize, Vec<usize>, u64, u64, String);

/// Memoizes exact counting distributions across pipeline runs that share
/// a Johnson chain, a marking and counting parameters. A hit resamples the
/// stored distribution and replays the stored meter charges.
#[derive(Debug, Default)]
pub struct DistributionCache {
    entries: Mutex<HashMap<CacheKey, Arc<CountingResult>>>,
}

impl DistributionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionTrace {
    pub n: usize,
    pub epsilon: f64,
    pub m_bar: usize,
    pub m_true: usize,
    pub stage1: ConstantFactorTrace,
    pub m_low: usize,
    pub m_up: usize,
    pub r: RChoice,
    pub lambda: f64,
    pub r_prime: f64,
    pub johnson_states: usize,
    pub marked_states: usize,
    pub counting: CountingResult,
    pub m_hat: f64,
    /// Setup, update and checking charged by the counting stage.
    pub main_stage: MeterSnapshot,
    pub total: MeterSnapshot,
    pub notes: Vec<String>,
}

impl CollisionTrace {
    pub fn succeeded(&self) -> bool {
        (self.m_hat - self.m_true as f64).abs() < self.epsilon * self.m_true as f64
    }
}

/// The full pipeline: constant-factor bracket, choice of `r` and `lambda`,
/// counting on `J(2N, r)` with `eps / 3`, and the `M_r` estimator.
pub fn count_collisions<R: Rng + ?Sized>(
    inst: &CollisionInstance,
    epsilon: f64,
    m_bar: usize,
    backend: Backend,
    rng: &mut R,
    cache: Option<&DistributionCache>,
) -> Result<CollisionTrace> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if m_bar == 0 {
        return Err(Error::Parameter("the lower bound m_bar must be at least 1".into()));
    }
    let n = inst.n;
    let meter = Arc::new(QueryMeter::new());
    let stage1 = constant_factor(inst, m_bar, rng, Some(&meter))?;
    let m_low = ((2.0 * stage1.m_hat / 3.0).floor() as usize).max(m_bar);
    let m_up = ((2.0 * stage1.m_hat).ceil() as usize).max(m_low);
    let r = choose_r(epsilon, m_up, n)?;
    let lambda = lambda_for(m_low, n, r.r)?;
    let mut notes = Vec::new();
    if epsilon <= 1.0 / m_up as f64 {
        notes.push(format!("epsilon {epsilon} <= 1/m_up = {}", 1.0 / m_up as f64));
    }
    if (n as f64 / m_up as f64) < (n as f64).ln() {
        notes.push(format!("N/m_up = {} below ln N", n as f64 / m_up as f64));
    }
    if !r.conditions_hold {
        notes.push(format!("r = {} does not meet the ratio conditions", r.r));
    }
    let (chain, marked) = johnson_marking(inst, r.r)?;
    let states = chain.n();
    let counting_params = params(epsilon / 3.0, lambda.min(1.0), backend)?;
    let before = meter.snapshot();
    let key: CacheKey = (
        n,
        r.r,
        marked.members().to_vec(),
        counting_params.epsilon.to_bits(),
        counting_params.lambda.to_bits(),
        format!("{backend:?}"),
    );
    let cached = cache.and_then(|c| c.entries.lock().expect("cache lock poisoned").get(&key).cloned());
    let counting = match cached {
        Some(hit) => {
            meter.merge(&hit.meter);
            let mut res = (*hit).clone();
            let sample = sample_outcome(&res.distribution, rng)?;
            res.sample = sample;
            res.y = sample as f64 / res.distribution.len() as f64;
            res.estimate = crate::counting::estimate_from_readout(res.y, res.scale);
            res
        }
        None => {
            let walk = validated(chain)?;
            let res = approx_count(&walk, &marked, &counting_params, rng, Some(meter.clone()))?;
            if let Some(c) = cache {
                c.entries.lock().expect("cache lock poisoned").insert(key, Arc::new(res.clone()));
            }
            res
        }
    };
    let main_stage = MeterSnapshot::diff(&before, &meter.snapshot());
    let ratios = ratios(m_up, m_up, n, r.r);
    let m_hat = estimator_from_mr(counting.estimate, ratios.r_prime, n, r.r)?;
    notes.extend(counting.warnings.iter().cloned());
    Ok(CollisionTrace {
        n,
        epsilon,
        m_bar,
        m_true: exact_collisions(inst),
        m_low,
        m_up,
        r,
        lambda,
        r_prime: ratios.r_prime,
        johnson_states: states,
        marked_states: marked.len(),
        counting,
        m_hat,
        main_stage,
        total: meter.snapshot(),
        notes,
        stage1,
    })
}
