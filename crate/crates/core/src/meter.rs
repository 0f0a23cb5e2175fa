//! Query accounting in the setup / update / checking cost model of
//! walk-based search, plus the closed-form complexity bodies the measured
//! counts are compared against.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// What a charge is for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChargeKind {
    /// Preparing the stationary superposition.
    Setup,
    /// Calls to the update unitaries (one walk step each).
    Update,
    /// Marked-state phase flips.
    Checking,
    /// Classical evaluations of the input functions.
    Oracle,
    /// Applications of a search operator, whatever their query cost.
    Application,
    /// Labelled extra, e.g. the modelled cost of an element-distinctness call.
    Modeled(String),
}

/// Per-unit costs of the three primitive operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub setup: u64,
    pub update: u64,
    pub checking: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { setup: 1, update: 1, checking: 1 }
    }
}

/// Thread-safe counter bundle. Counters only grow.
#[derive(Debug, Default)]
pub struct QueryMeter {
    setup: AtomicU64,
    update: AtomicU64,
    checking: AtomicU64,
    oracle: AtomicU64,
    applications: AtomicU64,
    modeled: Mutex<BTreeMap<String, u64>>,
}

/// Immutable copy of a meter's counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterSnapshot {
    pub setup: u64,
    pub update: u64,
    pub checking: u64,
    pub oracle_evaluations: u64,
    pub applications: u64,
    pub modeled: BTreeMap<String, u64>,
}

impl QueryMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&self, kind: ChargeKind, amount: u64) {
        let counter = match kind {
            ChargeKind::Setup => &self.setup,
            ChargeKind::Update => &self.update,
            ChargeKind::Checking => &self.checking,
            ChargeKind::Oracle => &self.oracle,
            ChargeKind::Application => &self.applications,
            ChargeKind::Modeled(label) => {
                let mut map = self.modeled.lock().expect("meter lock poisoned");
                *map.entry(label).or_insert(0) += amount;
                return;
            }
        };
        counter.fetch_add(amount, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        MeterSnapshot {
            setup: self.setup.load(Ordering::Relaxed),
            update: self.update.load(Ordering::Relaxed),
            checking: self.checking.load(Ordering::Relaxed),
            oracle_evaluations: self.oracle.load(Ordering::Relaxed),
            applications: self.applications.load(Ordering::Relaxed),
            modeled: self.modeled.lock().expect("meter lock poisoned").clone(),
        }
    }

    /// Adds every counter of `snapshot` into this meter.
    pub fn merge(&self, snapshot: &MeterSnapshot) {
        self.charge(ChargeKind::Setup, snapshot.setup);
        self.charge(ChargeKind::Update, snapshot.update);
        self.charge(ChargeKind::Checking, snapshot.checking);
        self.charge(ChargeKind::Oracle, snapshot.oracle_evaluations);
        self.charge(ChargeKind::Application, snapshot.applications);
        for (label, amount) in &snapshot.modeled {
            self.charge(ChargeKind::Modeled(label.clone()), *amount);
        }
    }
}

impl MeterSnapshot {
    /// Counter-wise `later - earlier`. Both must come from the same meter.
    pub fn diff(earlier: &MeterSnapshot, later: &MeterSnapshot) -> MeterSnapshot {
        let modeled = later
            .modeled
            .iter()
            .map(|(k, v)| (k.clone(), v - earlier.modeled.get(k).copied().unwrap_or(0)))
            .collect();
        MeterSnapshot {
            setup: later.setup - earlier.setup,
            update: later.update - earlier.update,
            checking: later.checking - earlier.checking,
            oracle_evaluations: later.oracle_evaluations - earlier.oracle_evaluations,
            applications: later.applications - earlier.applications,
            modeled,
        }
    }

    /// Setup + update + checking queries: the walk-search query total.
    pub fn walk_queries(&self) -> u64 {
        self.setup + self.update + self.checking
    }

    /// Every query-like counter, including modelled extras.
    pub fn total_queries(&self) -> u64 {
        self.walk_queries() + self.oracle_evaluations + self.modeled.values().sum::<u64>()
    }
}

/// Closed-form complexity bodies with all constants set to 1 and polylog
/// factors dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formula {
    /// `S + (1/sqrt(lambda)) ((1/sqrt(delta)) U + C)`
    WalkSearch { setup: f64, update: f64, checking: f64, lambda: f64, delta: f64 },
    /// `S + (1/eps)(1/sqrt(lambda)) ((1/sqrt(delta)) U + C)`
    MarkovCounting { setup: f64, update: f64, checking: f64, lambda: f64, delta: f64, epsilon: f64 },
    /// `(1/eps^(25/24)) (N/sqrt(m))^(2/3) + (N/sqrt(m_bar))^(2/3)`
    CollisionCounting { n: f64, m: f64, m_bar: f64, epsilon: f64 },
    /// `(1/eps) N/sqrt(m) + N/sqrt(m_bar)`
    ClassicalSampling { n: f64, m: f64, m_bar: f64, epsilon: f64 },
    /// `(N/sqrt(m_bar))^(2/3)`
    ConstantFactor { n: f64, m_bar: f64 },
}

pub fn predicted(formula: Formula) -> f64 {
    match formula {
        Formula::WalkSearch { setup, update, checking, lambda, delta } => {
            setup + (update / delta.sqrt() + checking) / lambda.sqrt()
        }
        Formula::MarkovCounting { setup, update, checking, lambda, delta, epsilon } => {
            setup + (update / delta.sqrt() + checking) / (epsilon * lambda.sqrt())
        }
        Formula::CollisionCounting { n, m, m_bar, epsilon } => {
            epsilon.powf(-25.0 / 24.0) * (n / m.sqrt()).powf(2.0 / 3.0)
                + (n / m_bar.sqrt()).powf(2.0 / 3.0)
        }
        Formula::ClassicalSampling { n, m, m_bar, epsilon } => n / (epsilon * m.sqrt()) + n / m_bar.sqrt(),
        Formula::ConstantFactor { n, m_bar } => (n / m_bar.sqrt()).powf(2.0 / 3.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_meter_is_zero() {
        assert_eq!(QueryMeter::new().snapshot(), MeterSnapshot::default());
    }

    #[test]
    fn charges_accumulate_and_diff() {
        let meter = QueryMeter::new();
        meter.charge(ChargeKind::Setup, 1);
        let a = meter.snapshot();
        meter.charge(ChargeKind::Update, 5);
        meter.charge(ChargeKind::Checking, 1);
        meter.charge(ChargeKind::Modeled("ed".into()), 3);
        let b = meter.snapshot();
        let d = MeterSnapshot::diff(&a, &b);
        assert_eq!(d.setup, 0);
        assert_eq!(d.update, 5);
        assert_eq!(d.checking, 1);
        assert_eq!(d.modeled["ed"], 3);
        assert_eq!(b.walk_queries(), 7);
        assert_eq!(b.total_queries(), 10);
    }

    #[test]
    fn concurrent_charging_is_exact() {
        let meter = std::sync::Arc::new(QueryMeter::new());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let m = meter.clone();
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        m.charge(ChargeKind::Update, 1);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(meter.snapshot().update, 8000);
    }

    #[test]
    fn counting_body_example() {
        // 1 + 4*2*(2/sqrt(2/3))
        let v = predicted(Formula::MarkovCounting {
            setup: 1.0,
            update: 2.0,
            checking: 0.0,
            lambda: 0.25,
            delta: 2.0 / 3.0,
            epsilon: 0.25,
        });
        assert!((v - (1.0 + 8.0 * 2.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
        assert!((v - 20.5959).abs() < 1e-3);
    }

    #[test]
    fn walk_search_body_at_unit_parameters() {
        let v = predicted(Formula::WalkSearch { setup: 3.0, update: 5.0, checking: 7.0, lambda: 1.0, delta: 1.0 });
        assert_eq!(v, 15.0);
    }

    #[test]
    fn halving_epsilon_doubles_the_counting_body() {
        let body = |epsilon| {
            predicted(Formula::MarkovCounting { setup: 0.0, update: 2.0, checking: 1.0, lambda: 0.1, delta: 0.3, epsilon })
        };
        assert!((body(0.125) / body(0.25) - 2.0).abs() < 1e-12);
    }
}
