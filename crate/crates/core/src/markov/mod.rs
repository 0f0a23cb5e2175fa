//! Finite Markov chains: validation, stationary distribution, spectral gap,
//! marked sets and the two graph builders used by the experiments.

mod io;

pub use io::{parse_chain, parse_marked, write_chain, write_marked};

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const ROW_SUM_TOL: f64 = 1e-9;
pub const BALANCE_TOL: f64 = 1e-8;
pub const STATIONARY_TOL: f64 = 1e-10;
/// Largest chain whose stationary distribution is found by a dense solve.
pub const DENSE_SOLVE_CAP: usize = 4096;
pub const JOHNSON_STATE_CAP: usize = 5000;

/// Per-state payload, e.g. the subset a Johnson vertex stands for.
pub type StateLabel = Vec<usize>;

/// Row-stochastic transition matrix, `transition[(x, y)] = p_xy`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub name: String,
    transition: DMatrix<f64>,
    labels: Option<Vec<StateLabel>>,
}

impl MarkovChain {
    pub fn new(name: impl Into<String>, transition: DMatrix<f64>) -> Result<Self> {
        if transition.nrows() != transition.ncols() || transition.nrows() == 0 {
            return Err(Error::Validation(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        Ok(Self { name: name.into(), transition, labels: None })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("transition rows have inconsistent lengths".into()));
        }
        Self::new(name, DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<StateLabel>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Validation(format!("{} labels for {} states", labels.len(), self.n())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.transition.nrows()
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.transition[(x, y)]
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn labels(&self) -> Option<&[StateLabel]> {
        self.labels.as_deref()
    }

    /// `(P + I) / 2`.
    pub fn lazy(&self) -> Self {
        let n = self.n();
        let t = (&self.transition + DMatrix::<f64>::identity(n, n)) * 0.5;
        Self { name: format!("lazy-{}", self.name), transition: t, labels: self.labels.clone() }
    }

    /// Checks every structural property and reports each failure.
    pub fn validate(&self) -> ValidationReport {
        let n = self.n();
        let mut failures = Vec::new();
        for x in 0..n {
            for y in 0..n {
                let p = self.p(x, y);
                if !(p >= 0.0) || !p.is_finite() {
                    failures.push(ValidationFailure::BadEntry { row: x, col: y, value: p });
                }
            }
            let s: f64 = self.transition.row(x).sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                failures.push(ValidationFailure::RowSum { row: x, sum: s });
            }
        }
        if !failures.is_empty() {
            return ValidationReport { failures, balance_residual: None };
        }
        let (components, bipartite) = support_structure(self);
        if components > 1 {
            failures.push(ValidationFailure::Disconnected { components });
        }
        if bipartite {
            failures.push(ValidationFailure::Bipartite);
        }
        let mut balance_residual = None;
        if failures.is_empty() {
            match stationary_of(self) {
                Ok(pi) => {
                    let r = balance_residual_of(self, &pi);
                    balance_residual = Some(r);
                    if r > BALANCE_TOL {
                        failures.push(ValidationFailure::NotReversible { residual: r });
                    }
                }
                Err(e) => failures.push(ValidationFailure::NoStationary(e.to_string())),
            }
        }
        ValidationReport { failures, balance_residual }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationFailure {
    BadEntry { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Disconnected { components: usize },
    Bipartite,
    NotReversible { residual: f64 },
    NoStationary(String),
}

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BadEntry { row, col, value } => write!(f, "entry ({row},{col}) = {value} is not a probability"),
            Self::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Self::Disconnected { components } => write!(f, "support graph has {components} components"),
            Self::Bipartite => write!(f, "support graph is bipartite"),
            Self::NotReversible { residual } => write!(f, "detailed balance residual {residual:.3e}"),
            Self::NoStationary(e) => write!(f, "stationary distribution: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
    /// `max |pi_x p_xy - pi_y p_yx|`, when it could be computed.
    pub balance_residual: Option<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Number of connected components of the undirected support graph, and
/// whether it is bipartite.
fn support_structure(chain: &MarkovChain) -> (usize, bool) {
    let n = chain.n();
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut components = 0;
    let mut bipartite = true;
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        components += 1;
        color[start] = Some(false);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let cx = color[x].expect("colored on push");
            for y in 0..n {
                if chain.p(x, y) <= 0.0 && chain.p(y, x) <= 0.0 {
                    continue;
                }
                match color[y] {
                    None => {
                        color[y] = Some(!cx);
                        queue.push_back(y);
                    }
                    Some(cy) if cy == cx => bipartite = false,
                    Some(_) => {}
                }
            }
        }
    }
    (components, bipartite)
}

fn balance_residual_of(chain: &MarkovChain, pi: &[f64]) -> f64 {
    let n = chain.n();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in 0..x {
            worst = worst.max((pi[x] * chain.p(x, y) - pi[y] * chain.p(y, x)).abs());
        }
    }
    worst
}

/// `max_y |(pi P)_y - pi_y|`.
pub fn stationary_residual(chain: &MarkovChain, pi: &[f64]) -> f64 {
    let v = DVector::from_column_slice(pi);
    let r = chain.transition.tr_mul(&v) - &v;
    r.amax()
}

fn normalize(mut pi: Vec<f64>) -> Vec<f64> {
    pi.iter_mut().for_each(|p| *p = p.max(0.0));
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    pi
}

fn stationary_of(chain: &MarkovChain) -> Result<Vec<f64>> {
    let n = chain.n();
    let mut pi = if n <= DENSE_SOLVE_CAP {
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
        let mut a = chain.transition.transpose() - DMatrix::<f64>::identity(n, n);
        a.row_mut(n - 1).fill(1.0);
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let sol = a.lu().solve(&b).ok_or_else(|| Error::Numeric {
            message: "singular stationary system".into(),
            residual: f64::INFINITY,
        })?;
        normalize(sol.as_slice().to_vec())
    } else {
        vec![1.0 / n as f64; n]
    };
    // Lazy power iteration polishes the dense answer and is the whole
    // method for large chains.
    let lazy = chain.lazy();
    let mut residual = stationary_residual(chain, &pi);
    let mut iters = 0;
    while residual > STATIONARY_TOL {
        if iters == 200_000 {
            return Err(Error::Numeric { message: "stationary iteration did not converge".into(), residual });
        }
        let v = DVector::from_column_slice(&pi);
        pi = normalize(lazy.transition.tr_mul(&v).as_slice().to_vec());
        residual = stationary_residual(chain, &pi);
        iters += 1;
    }
    Ok(pi)
}

/// A chain that passed [`MarkovChain::validate`], with its stationary
/// distribution.
#[derive(Debug, Clone)]
pub struct ValidChain {
    chain: Arc<MarkovChain>,
    pi: Arc<Vec<f64>>,
    gap: Arc<OnceLock<f64>>,
}

impl ValidChain {
    pub fn new(chain: MarkovChain) -> Result<Self> {
        let report = chain.validate();
        if !report.is_valid() {
            let msgs: Vec<String> = report.failures.iter().map(|f| f.to_string()).collect();
            return Err(Error::Validation(format!("chain `{}` rejected: {}", chain.name, msgs.join("; "))));
        }
        let pi = stationary_of(&chain)?;
        Ok(Self { chain: Arc::new(chain), pi: Arc::new(pi), gap: Arc::new(OnceLock::new()) })
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn n(&self) -> usize {
        self.chain.n()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.n() as f64;
        self.pi.iter().all(|p| (p - u).abs() <= 1e-12)
    }

    /// `1 - max_{i >= 2} |lambda_i|`.
    pub fn spectral_gap(&self) -> f64 {
        *self.gap.get_or_init(|| spectral_gap_of(&self.chain, &self.pi))
    }

    /// Eigenvalues of `P`, sorted by decreasing magnitude.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = symmetrized(&self.chain, &self.pi).symmetric_eigenvalues().as_slice().to_vec();
        ev.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        ev
    }
}

/// `diag(pi)^{1/2} P diag(pi)^{-1/2}`, symmetrized to remove rounding.
pub fn symmetrized(chain: &MarkovChain, pi: &[f64]) -> DMatrix<f64> {
    let n = chain.n();
    let d = DMatrix::from_fn(n, n, |x, y| chain.p(x, y) * (pi[x] / pi[y]).sqrt());
    (&d + d.transpose()) * 0.5
}

fn spectral_gap_of(chain: &MarkovChain, pi: &[f64]) -> f64 {
    if chain.n() == 1 {
        return 1.0;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrized(chain, pi)).eigenvalues.as_slice().to_vec();
    ev.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    1.0 - ev[1].abs()
}

/// Nonempty set of marked states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSet {
    n: usize,
    members: Vec<usize>,
}

impl MarkedSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::Validation("marked set must be nonempty".into()));
        }
        if let Some(&x) = members.iter().find(|&&x| x >= n) {
            return Err(Error::Validation(format!("marked state {x} outside 0..{n}")));
        }
        Ok(Self { n, members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Membership flags indexed by state.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &x in &self.members {
            m[x] = true;
        }
        m
    }
}

/// `p_M = sum_{x in M} pi_x`.
pub fn marked_fraction(pi: &[f64], marked: &MarkedSet) -> f64 {
    marked.members.iter().map(|&x| pi[x]).sum()
}

/// Random walk on the complete graph `K_n`.
pub fn complete_graph_chain(n: usize) -> Result<MarkovChain> {
    if n < 3 {
        return Err(Error::Parameter(format!("complete graph needs at least 3 vertices, got {n}")));
    }
    let q = 1.0 / (n - 1) as f64;
    MarkovChain::new(format!("K{n}"), DMatrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { q }))
}

/// `C(n, k)` as `u128`, or `None` on overflow.
pub fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All `r`-subsets of `0..d` in lexicographic order.
pub fn subsets(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > d {
        return out;
    }
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(cur.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < d - r + i {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..r {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Walk on the Johnson graph `J(d, r)` with the default state cap.
pub fn johnson_chain(domain: usize, r: usize) -> Result<MarkovChain> {
    johnson_chain_capped(domain, r, JOHNSON_STATE_CAP)
}

/// Walk on `J(d, r)`: vertices are the `r`-subsets of `0..d`, each moving to
/// one of its `r(d - r)` neighbours uniformly.
pub fn johnson_chain_capped(domain: usize, r: usize, cap: usize) -> Result<MarkovChain> {
    if r < 2 || r + 1 > domain {
        return Err(Error::Parameter(format!("Johnson chain needs 2 <= r <= d - 1, got d={domain}, r={r}")));
    }
    let size = binomial_u128(domain, r).filter(|&b| b <= cap as u128).ok_or_else(|| {
        Error::Size(format!("C({domain}, {r}) states exceeds the Johnson state cap {cap}"))
    })? as usize;
    let verts = subsets(domain, r);
    debug_assert_eq!(verts.len(), size);
    let index: std::collections::HashMap<&[usize], usize> =
        verts.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let q = 1.0 / (r * (domain - r)) as f64;
    let mut t = DMatrix::<f64>::zeros(size, size);
    let mut scratch = Vec::with_capacity(r);
    for (i, s) in verts.iter().enumerate() {
        for out_pos in 0..r {
            for e in (0..domain).filter(|e| s.binary_search(e).is_err()) {
                scratch.clear();
                scratch.extend(s.iter().enumerate().filter(|&(p, _)| p != out_pos).map(|(_, &v)| v));
                let at = scratch.partition_point(|&v| v < e);
                scratch.insert(at, e);
                t[(i, index[scratch.as_slice()])] = q;
            }
        }
    }
    MarkovChain::new(format!("J({domain},{r})"), t)?.with_labels(verts)
}
