//! The quantum walk of a reversible chain on the pair space `C^{n x n}`.
//!
//! Pair index `x * n + y` holds `|x>|y>`. Every routine here also works on
//! "wide" vectors holding `m` pair-space columns side by side, with entry
//! `(pair, w)` stored at `pair * m + w`; that is the layout of a pair
//! register followed by an `m`-dimensional workspace.

mod geometry;
mod reflection;
mod search;
mod spectrum;

pub use geometry::{geometry, SearchGeometry};
pub use reflection::{
    approx_reflection, literal_layout, literal_reflection, reflection_bits, uncomputed_register, ApproxReflection,
    ReflectionConfig, FULL_BUDGET,
};
pub use search::{update_charge, Backend, SearchOperator};
pub use spectrum::{Eigencluster, WalkSpectrum};

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::engine::{Operator, RegisterLayout, C64};
use crate::error::Result;
use crate::markov::{MarkedSet, ValidChain};
use crate::meter::{ChargeKind, QueryMeter};

const ZERO: C64 = C64::new(0.0, 0.0);
/// Gram eigenvalues below this are treated as zero.
const GRAM_TOL: f64 = 1e-10;

pub(crate) struct WalkData {
    chain: ValidChain,
    n: usize,
    /// `sqrt(p_xy)`, row-major.
    sqrt_p: Vec<f64>,
    /// `sqrt(pi_x p_xy)`, the amplitudes of `|pi>`.
    pi_amps: Vec<f64>,
    /// Eigenvectors (columns) and eigenvalues of `D_xy = sqrt(p_xy p_yx)`.
    d_vecs: DMatrix<f64>,
    d_vals: Vec<f64>,
}

/// Walk operators of a validated chain. Cheap to clone.
#[derive(Clone)]
pub struct WalkOperators {
    data: Arc<WalkData>,
}

impl std::fmt::Debug for WalkOperators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WalkOperators").field("chain", &self.data.chain.chain().name).field("n", &self.data.n).finish()
    }
}

pub fn build_walk(chain: &ValidChain) -> WalkOperators {
    let n = chain.n();
    let c = chain.chain();
    let mut sqrt_p = vec![0.0; n * n];
    let mut pi_amps = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            sqrt_p[x * n + y] = c.p(x, y).sqrt();
            pi_amps[x * n + y] = (chain.pi()[x] * c.p(x, y)).sqrt();
        }
    }
    let d = DMatrix::from_fn(n, n, |x, y| sqrt_p[x * n + y] * sqrt_p[y * n + x]);
    let eig = SymmetricEigen::new(d);
    let data = WalkData {
        chain: chain.clone(),
        n,
        sqrt_p,
        pi_amps,
        d_vals: eig.eigenvalues.as_slice().to_vec(),
        d_vecs: eig.eigenvectors,
    };
    WalkOperators { data: Arc::new(data) }
}

impl WalkData {
    fn s(&self, x: usize, y: usize) -> f64 {
        self.sqrt_p[x * self.n + y]
    }

    /// Row coefficients `<x|<p_x| v` and column coefficients `<p*_y|<y| v`,
    /// each `n * m` values indexed `x * m + w`.
    fn coefficients(&self, v: &[C64], m: usize) -> (Vec<C64>, Vec<C64>) {
        let n = self.n;
        let mut rows = vec![ZERO; n * m];
        let mut cols = vec![ZERO; n * m];
        for x in 0..n {
            for y in 0..n {
                let (a, b) = (self.s(x, y), self.s(y, x));
                let base = (x * n + y) * m;
                for w in 0..m {
                    let z = v[base + w];
                    rows[x * m + w] += a * z;
                    cols[y * m + w] += b * z;
                }
            }
        }
        (rows, cols)
    }

    fn ref_a(&self, v: &mut [C64], m: usize) {
        let n = self.n;
        for x in 0..n {
            let mut c = vec![ZERO; m];
            for y in 0..n {
                let a = self.s(x, y);
                let base = (x * n + y) * m;
                for w in 0..m {
                    c[w] += a * v[base + w];
                }
            }
            for y in 0..n {
                let a = 2.0 * self.s(x, y);
                let base = (x * n + y) * m;
                for w in 0..m {
                    v[base + w] = c[w] * a - v[base + w];
                }
            }
        }
    }

    fn ref_b(&self, v: &mut [C64], m: usize) {
        let n = self.n;
        let (_, cols) = self.coefficients(v, m);
        for x in 0..n {
            for y in 0..n {
                let b = 2.0 * self.s(y, x);
                let base = (x * n + y) * m;
                for w in 0..m {
                    v[base + w] = cols[y * m + w] * b - v[base + w];
                }
            }
        }
    }

    fn flip(&self, v: &mut [C64], m: usize, mask: &[bool]) {
        let block = self.n * m;
        for (x, &marked) in mask.iter().enumerate() {
            if marked {
                v[x * block..(x + 1) * block].iter_mut().for_each(|z| *z = -*z);
            }
        }
    }

    /// Orthogonal projection onto `(A + B) (x) C^m`.
    fn project_sum(&self, v: &[C64], m: usize) -> Vec<C64> {
        let n = self.n;
        let (u, w) = self.coefficients(v, m);
        let q = &self.d_vecs;
        // coordinates in the eigenbasis of D
        let mut alpha = vec![ZERO; n * m];
        let mut beta = vec![ZERO; n * m];
        for j in 0..n {
            let lam = self.d_vals[j];
            let plus_scale = if 1.0 + lam > GRAM_TOL { 1.0 / (1.0 + lam) } else { 0.0 };
            let minus_scale = if 1.0 - lam > GRAM_TOL { 1.0 / (1.0 - lam) } else { 0.0 };
            for c in 0..m {
                let mut s = ZERO;
                let mut r = ZERO;
                for x in 0..n {
                    s += q[(x, j)] * u[x * m + c];
                    r += q[(x, j)] * w[x * m + c];
                }
                let plus = (s + r) * (0.5 * plus_scale);
                let minus = (s - r) * (0.5 * minus_scale);
                let (a, b) = (plus + minus, plus - minus);
                for x in 0..n {
                    alpha[x * m + c] += a * q[(x, j)];
                    beta[x * m + c] += b * q[(x, j)];
                }
            }
        }
        let mut out = vec![ZERO; v.len()];
        for x in 0..n {
            for y in 0..n {
                let (sa, sb) = (self.s(x, y), self.s(y, x));
                let base = (x * n + y) * m;
                for c in 0..m {
                    out[base + c] = alpha[x * m + c] * sa + beta[y * m + c] * sb;
                }
            }
        }
        out
    }

    /// Reflection about the `+1` eigenspace of `W`: fixes `|pi>` and the
    /// complement of `A + B`, negates the rest of `A + B`.
    fn ideal_reflection(&self, v: &mut [C64], m: usize) {
        let proj = self.project_sum(v, m);
        let mut c = vec![ZERO; m];
        for (p, &a) in self.pi_amps.iter().enumerate() {
            for w in 0..m {
                c[w] += a * v[p * m + w];
            }
        }
        for (p, &a) in self.pi_amps.iter().enumerate() {
            for w in 0..m {
                let i = p * m + w;
                v[i] += c[w] * (2.0 * a) - proj[i] * 2.0;
            }
        }
    }
}

impl WalkOperators {
    pub fn chain(&self) -> &ValidChain {
        &self.data.chain
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn pair_dim(&self) -> usize {
        self.data.n * self.data.n
    }

    pub fn pair_layout(&self) -> RegisterLayout {
        RegisterLayout::new([("x", self.n()), ("y", self.n())]).expect("n >= 1")
    }

    pub fn spectral_gap(&self) -> f64 {
        self.data.chain.spectral_gap()
    }

    pub fn ref_a(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::RefA }
    }

    pub fn ref_b(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::RefB }
    }

    /// `W = ref(B) ref(A)`.
    pub fn walk(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::Walk }
    }

    /// `W^dagger = ref(A) ref(B)`.
    pub fn walk_adjoint(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::WalkAdjoint }
    }

    /// Orthogonal projector onto `A + B`.
    pub fn sum_projector(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::SumProjector }
    }

    /// Reflection used as the ideal `ref(pi)`; see [`WalkData::ideal_reflection`].
    pub fn ideal_reflection(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::IdealReflection }
    }

    /// `2|pi><pi| - I` on the whole pair space.
    pub fn pi_reflection(&self) -> PairOperator {
        PairOperator { data: self.data.clone(), kind: PairKind::PiReflection }
    }

    /// Marked-row phase flip `V_0`, charging one checking query per
    /// application when a meter is attached.
    pub fn v0(&self, marked: &MarkedSet, meter: Option<Arc<QueryMeter>>) -> MarkFlip {
        MarkFlip { data: self.data.clone(), mask: marked.mask(), meter }
    }

    /// `V_0` from raw flags; an all-false mask gives the identity.
    pub fn v0_from_mask(&self, mask: Vec<bool>) -> MarkFlip {
        assert_eq!(mask.len(), self.n());
        MarkFlip { data: self.data.clone(), mask, meter: None }
    }

    /// `|pi> = sum_x sqrt(pi_x) |x>|p_x>`, charging one setup unit.
    pub fn pi_state(&self, meter: Option<&QueryMeter>) -> Vec<C64> {
        if let Some(m) = meter {
            m.charge(ChargeKind::Setup, 1);
        }
        self.data.pi_amps.iter().map(|&a| C64::new(a, 0.0)).collect()
    }

    /// `|x>|p_x>`.
    pub fn row_vector(&self, x: usize) -> Vec<C64> {
        let n = self.n();
        let mut v = vec![ZERO; n * n];
        for y in 0..n {
            v[x * n + y] = C64::new(self.data.s(x, y), 0.0);
        }
        v
    }

    /// `|p*_y>|y>`.
    pub fn column_vector(&self, y: usize) -> Vec<C64> {
        let n = self.n();
        let mut v = vec![ZERO; n * n];
        for x in 0..n {
            v[x * n + y] = C64::new(self.data.s(y, x), 0.0);
        }
        v
    }

    /// Normalized `sum_x a_x |x>|p_x> + sum_y b_y |p*_y>|y>` with Gaussian
    /// complex coefficients.
    pub fn random_sum_space_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<C64> {
        let n = self.n();
        let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let a: Vec<C64> = (0..n).map(|_| g()).collect();
        let b: Vec<C64> = (0..n).map(|_| g()).collect();
        let mut v = vec![ZERO; n * n];
        for x in 0..n {
            for y in 0..n {
                v[x * n + y] = a[x] * self.data.s(x, y) + b[y] * self.data.s(y, x);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        v
    }

    pub(crate) fn data(&self) -> &Arc<WalkData> {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    RefA,
    RefB,
    Walk,
    WalkAdjoint,
    SumProjector,
    IdealReflection,
    PiReflection,
}

/// One of the structured pair-space operators. Not metered.
#[derive(Clone)]
pub struct PairOperator {
    data: Arc<WalkData>,
    kind: PairKind,
}

impl PairOperator {
    /// Applies the operator to each of the `m` interleaved pair-space columns.
    pub fn apply_wide(&self, v: &mut [C64], m: usize) {
        let d = &self.data;
        match self.kind {
            PairKind::RefA => d.ref_a(v, m),
            PairKind::RefB => d.ref_b(v, m),
            PairKind::Walk => {
                d.ref_a(v, m);
                d.ref_b(v, m);
            }
            PairKind::WalkAdjoint => {
                d.ref_b(v, m);
                d.ref_a(v, m);
            }
            PairKind::SumProjector => {
                let p = d.project_sum(v, m);
                v.copy_from_slice(&p);
            }
            PairKind::IdealReflection => d.ideal_reflection(v, m),
            PairKind::PiReflection => {
                let mut c = vec![ZERO; m];
                for (p, &a) in d.pi_amps.iter().enumerate() {
                    for w in 0..m {
                        c[w] += a * v[p * m + w];
                    }
                }
                for (p, &a) in d.pi_amps.iter().enumerate() {
                    for w in 0..m {
                        let i = p * m + w;
                        v[i] = c[w] * (2.0 * a) - v[i];
                    }
                }
            }
        }
    }
}

impl Operator for PairOperator {
    fn dim(&self) -> usize {
        self.data.n * self.data.n
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        self.apply_wide(amps, 1);
    }
}

/// `V_0`: `-|x>|y>` for marked `x`.
#[derive(Clone)]
pub struct MarkFlip {
    data: Arc<WalkData>,
    mask: Vec<bool>,
    meter: Option<Arc<QueryMeter>>,
}

impl MarkFlip {
    pub fn apply_wide(&self, v: &mut [C64], m: usize) {
        self.data.flip(v, m, &self.mask);
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

impl Operator for MarkFlip {
    fn dim(&self) -> usize {
        self.data.n * self.data.n
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        self.apply_wide(amps, 1);
    }
    fn charge(&self, applications: u64) {
        if let Some(m) = &self.meter {
            m.charge(ChargeKind::Checking, applications);
        }
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn validated(chain: crate::markov::MarkovChain) -> Result<WalkOperators> {
    Ok(build_walk(&ValidChain::new(chain)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{max_abs_entry, to_dense, unitarity_defect, StateVector};
    use crate::markov::{complete_graph_chain, MarkovChain};

    fn k(n: usize) -> WalkOperators {
        validated(complete_graph_chain(n).unwrap()).unwrap()
    }

    fn two_state() -> WalkOperators {
        validated(MarkovChain::from_rows("two", &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()).unwrap()
    }

    #[test]
    fn reflections_are_involutions_fixing_their_spans() {
        for w in [k(3), k(4), two_state()] {
            let a = to_dense(&w.ref_a()).unwrap();
            let b = to_dense(&w.ref_b()).unwrap();
            let id = DMatrix::<C64>::identity(a.nrows(), a.nrows());
            assert!(max_abs_entry(&(&a * &a - &id)) < 1e-9);
            assert!(max_abs_entry(&(&b * &b - &id)) < 1e-9);
            for x in 0..w.n() {
                let mut v = w.row_vector(x);
                let orig = v.clone();
                w.ref_a().apply_slice(&mut v);
                assert!(distance(&v, &orig) < 1e-12);
                let mut u = w.column_vector(x);
                let orig = u.clone();
                w.ref_b().apply_slice(&mut u);
                assert!(distance(&u, &orig) < 1e-12);
            }
        }
    }

    #[test]
    fn walk_is_unitary_and_fixes_pi() {
        for w in [k(3), k(4), two_state()] {
            assert!(unitarity_defect(&w.walk()).unwrap() < 1e-9);
            let pi = w.pi_state(None);
            let mut v = pi.clone();
            w.walk().apply_slice(&mut v);
            assert!(distance(&v, &pi) < 1e-8);
        }
    }

    #[test]
    fn walk_eigenvalues_on_sum_space_come_in_conjugate_pairs() {
        for w in [k(3), k(4), two_state()] {
            // oracle: dense W restricted through the dense projector
            let wm = to_dense(&w.walk()).unwrap();
            let p = to_dense(&w.sum_projector()).unwrap();
            let restricted = (&p * &wm * &p).map(|z| z.re);
            let ev = restricted.complex_eigenvalues();
            for z in ev.iter().filter(|z| z.norm() > 0.5) {
                assert!((z.norm() - 1.0).abs() < 1e-6);
                assert!(ev.iter().any(|u| (u - z.conj()).norm() < 1e-6));
            }
        }
    }

    #[test]
    fn sum_projector_is_a_projector_onto_a_plus_b() {
        for w in [k(3), k(4), two_state()] {
            let p = to_dense(&w.sum_projector()).unwrap();
            assert!(max_abs_entry(&(&p * &p - &p)) < 1e-9);
            assert!(max_abs_entry(&(&p - p.adjoint())) < 1e-9);
            let rank: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
            assert!((rank - (2 * w.n() - 1) as f64).abs() < 1e-8);
            for x in 0..w.n() {
                let mut v = w.column_vector(x);
                let orig = v.clone();
                w.sum_projector().apply_slice(&mut v);
                assert!(distance(&v, &orig) < 1e-10);
            }
        }
    }

    #[test]
    fn walk_preserves_the_sum_space() {
        let w = k(4);
        let mut rng = crate::rng::seeded(1);
        for _ in 0..20 {
            let mut v = w.random_sum_space_state(&mut rng);
            w.walk().apply_slice(&mut v);
            let mut p = v.clone();
            w.sum_projector().apply_slice(&mut p);
            assert!(distance(&p, &v) < 1e-8);
        }
    }

    #[test]
    fn ideal_reflection_agrees_with_pi_reflection_on_sum_space() {
        let w = two_state();
        let mut rng = crate::rng::seeded(2);
        for _ in 0..20 {
            let v = w.random_sum_space_state(&mut rng);
            let (mut a, mut b) = (v.clone(), v.clone());
            w.ideal_reflection().apply_slice(&mut a);
            w.pi_reflection().apply_slice(&mut b);
            assert!(distance(&a, &b) < 1e-9);
        }
        assert!(unitarity_defect(&w.ideal_reflection()).unwrap() < 1e-9);
    }

    #[test]
    fn ideal_reflection_matches_walk_fixed_space() {
        // oracle: dense eigendecomposition of W, +1 on eigenvalue-1 vectors
        let w = k(3);
        let wm = to_dense(&w.walk()).unwrap();
        let r = to_dense(&w.ideal_reflection()).unwrap();
        let id = DMatrix::<C64>::identity(9, 9);
        // (W - I) R = (W - I)(2 Pi_1 - I) = -(W - I)
        assert!(max_abs_entry(&((&wm - &id) * &r + (&wm - &id))) < 1e-9);
        let fixed = {
            let h = (&wm + wm.adjoint()) * C64::new(0.5, 0.0);
            h.map(|z| z.re)
        };
        let eig = SymmetricEigen::new(fixed);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if (l - 1.0).abs() < 1e-9 {
                let v: Vec<C64> = eig.eigenvectors.column(i).iter().map(|&a| C64::new(a, 0.0)).collect();
                let mut rv = v.clone();
                w.ideal_reflection().apply_slice(&mut rv);
                assert!(distance(&rv, &v) < 1e-8);
            }
        }
    }

    #[test]
    fn pi_state_amplitudes() {
        let w = k(4);
        let meter = QueryMeter::new();
        let pi = w.pi_state(Some(&meter));
        assert_eq!(meter.snapshot().setup, 1);
        for x in 0..4 {
            for y in 0..4 {
                let want = if x == y { 0.0 } else { 0.5 / 3f64.sqrt() };
                assert!((pi[x * 4 + y].re - want).abs() < 1e-15);
            }
        }
        assert!((norm(&two_state().pi_state(None)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn v0_cases() {
        let w = k(4);
        let id = w.v0_from_mask(vec![false; 4]);
        let neg = w.v0(&MarkedSet::new(4, 0..4).unwrap(), None);
        let mut rng = crate::rng::seeded(3);
        let v = w.random_sum_space_state(&mut rng);
        let (mut a, mut b) = (v.clone(), v.clone());
        id.apply_slice(&mut a);
        neg.apply_slice(&mut b);
        assert_eq!(a, v);
        assert!(b.iter().zip(&v).all(|(p, q)| *p == -*q));
        let one = w.v0(&MarkedSet::new(4, [2]).unwrap(), None);
        let mut r = w.row_vector(2);
        one.apply_slice(&mut r);
        assert!(distance(&r, &w.row_vector(2).iter().map(|z| -z).collect::<Vec<_>>()) < 1e-15);
    }

    #[test]
    fn wide_application_matches_columnwise() {
        let w = two_state();
        let mut rng = crate::rng::seeded(4);
        let cols: Vec<Vec<C64>> = (0..3).map(|_| w.random_sum_space_state(&mut rng)).collect();
        let mut wide = vec![ZERO; 4 * 3];
        for (c, col) in cols.iter().enumerate() {
            for p in 0..4 {
                wide[p * 3 + c] = col[p];
            }
        }
        for op in [w.walk(), w.sum_projector(), w.ideal_reflection()] {
            let mut wv = wide.clone();
            op.apply_wide(&mut wv, 3);
            for (c, col) in cols.iter().enumerate() {
                let mut cv = col.clone();
                op.apply_slice(&mut cv);
                for p in 0..4 {
                    assert!((wv[p * 3 + c] - cv[p]).norm() < 1e-12);
                }
            }
        }
        let layout = RegisterLayout::new([("x", 2), ("y", 2), ("ws", 3)]).unwrap();
        let mut s = StateVector::from_amplitudes(layout, wide.clone()).unwrap();
        s.apply(&w.walk(), &[crate::engine::reg("x"), crate::engine::reg("y")]).unwrap();
        let mut wv = wide;
        w.walk().apply_wide(&mut wv, 3);
        assert!(s.amplitudes().iter().zip(&wv).all(|(a, b)| (a - b).norm() < 1e-12));
    }
}
