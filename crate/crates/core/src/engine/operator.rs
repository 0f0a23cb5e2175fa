use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use super::C64;
use crate::error::{Error, Result};

/// Largest dimension for which operators are ever realized as dense matrices.
pub const DENSE_CAP: usize = 4096;

/// A linear map on a space of fixed dimension, applied in place.
///
/// `apply_slice` is pure; query accounting happens only through `charge`,
/// which the state-level application calls once per logical application.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply_slice(&self, amps: &mut [C64]);

    /// Records `applications` logical applications with whatever meter the
    /// operator carries. Defaults to nothing.
    fn charge(&self, _applications: u64) {}
}

impl<T: Operator + ?Sized> Operator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        (**self).apply_slice(amps)
    }
    fn charge(&self, applications: u64) {
        (**self).charge(applications)
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        (**self).apply_slice(amps)
    }
    fn charge(&self, applications: u64) {
        (**self).charge(applications)
    }
}

/// Dense matrix of `op`, or `None` above `cap`.
pub fn to_dense_capped(op: &dyn Operator, cap: usize) -> Option<DMatrix<C64>> {
    let d = op.dim();
    if d > cap {
        return None;
    }
    let mut m = DMatrix::zeros(d, d);
    let mut col = vec![C64::new(0.0, 0.0); d];
    for j in 0..d {
        col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        col[j] = C64::new(1.0, 0.0);
        op.apply_slice(&mut col);
        for i in 0..d {
            m[(i, j)] = col[i];
        }
    }
    Some(m)
}

pub fn to_dense(op: &dyn Operator) -> Option<DMatrix<C64>> {
    to_dense_capped(op, DENSE_CAP)
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |(O^† O - I)_ij|` for densely realizable operators.
pub fn unitarity_defect(op: &dyn Operator) -> Option<f64> {
    let m = to_dense(op)?;
    let g = m.adjoint() * &m;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    Some(worst)
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub dim: usize,
}

impl Operator for Identity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_slice(&self, _amps: &mut [C64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Layout(format!(
                "dense operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Layout(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }
}

impl Operator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += self.matrix[(i, j)] * amps[j];
            }
            *o = acc;
        }
        amps.copy_from_slice(&out);
    }
}

pub fn hadamard() -> DenseOperator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DenseOperator::from_row_slice(2, &[C64::new(h, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)])
        .expect("2x2")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal {
    entries: Vec<C64>,
}

impl Diagonal {
    pub fn new(entries: Vec<C64>) -> Self {
        Self { entries }
    }

    /// `diag(1, -1)`.
    pub fn phase_flip() -> Self {
        Self::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }
}

impl Operator for Diagonal {
    fn dim(&self) -> usize {
        self.entries.len()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        for (a, d) in amps.iter_mut().zip(&self.entries) {
            *a *= d;
        }
    }
}

/// `2 Pi - I` for the orthogonal projector `Pi` onto the span of an
/// orthonormal set.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    dim: usize,
    basis: Vec<Vec<C64>>,
}

/// Gram-matrix tolerance accepted by [`reflection_through`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

pub fn reflection_through(dim: usize, basis: Vec<Vec<C64>>) -> Result<Reflection> {
    for (i, v) in basis.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Layout(format!("basis vector {i} has length {}, expected {dim}", v.len())));
        }
    }
    for i in 0..basis.len() {
        for j in 0..=i {
            let g: C64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a.conj() * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            let err = (g - C64::new(target, 0.0)).norm();
            if err > ORTHONORMAL_TOL {
                return Err(Error::Validation(format!(
                    "basis is not orthonormal: Gram entry ({i},{j}) off by {err:.3e}"
                )));
            }
        }
    }
    Ok(Reflection { dim, basis })
}

impl Operator for Reflection {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        let coeffs: Vec<C64> =
            self.basis.iter().map(|b| b.iter().zip(amps.iter()).map(|(x, y)| x.conj() * y).sum()).collect();
        for a in amps.iter_mut() {
            *a = -*a;
        }
        for (b, c) in self.basis.iter().zip(coeffs) {
            for (a, x) in amps.iter_mut().zip(b) {
                *a += 2.0 * c * x;
            }
        }
    }
}

/// Quantum Fourier transform on `qubits` qubits, unitarily normalized.
///
/// The inverse transform maps `|b>` to `2^{-t/2} sum_j e^{-2 pi i b j / 2^t} |j>`.
#[derive(Clone)]
pub struct Fourier {
    qubits: u32,
    inverse: bool,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("qubits", &self.qubits).field("inverse", &self.inverse).finish()
    }
}

impl Fourier {
    fn build(qubits: u32, inverse: bool) -> Self {
        let n = 1usize << qubits;
        let mut planner = FftPlanner::new();
        // FT^dagger carries the negative exponent, which is rustfft's forward sign.
        let fft = if inverse { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) };
        Self { qubits, inverse, fft }
    }

    pub fn inverse(qubits: u32) -> Self {
        Self::build(qubits, true)
    }

    pub fn forward(qubits: u32) -> Self {
        Self::build(qubits, false)
    }

    /// The inverse transform sized for register `name` of `layout`.
    pub fn inverse_for(layout: &super::RegisterLayout, name: &str) -> Result<Self> {
        Ok(Self::inverse(layout.qubits(name)?))
    }

    pub fn adjoint(&self) -> Self {
        Self::build(self.qubits, !self.inverse)
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }
}

impl Operator for Fourier {
    fn dim(&self) -> usize {
        1 << self.qubits
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        self.fft.process(amps);
        let scale = 1.0 / (self.dim() as f64).sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
    }
}

/// Entry `(j, b)` of the inverse Fourier matrix, straight from the definition.
pub fn inverse_fourier_entry(qubits: u32, j: usize, b: usize) -> C64 {
    let n = (1usize << qubits) as f64;
    C64::from_polar(1.0 / n.sqrt(), -2.0 * PI * ((b * j) as f64) / n)
}

enum PowerMode {
    Iterated,
    Dense(DMatrix<C64>),
}

/// `|0><0| (x) I + |1><1| (x) op^exponent` on `2 * op.dim()` amplitudes; the
/// control is the most significant local digit.
pub struct ControlledPower {
    inner: Arc<dyn Operator>,
    exponent: u64,
    mode: PowerMode,
}

impl std::fmt::Debug for ControlledPower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlledPower")
            .field("dim", &self.inner.dim())
            .field("exponent", &self.exponent)
            .field("dense", &matches!(self.mode, PowerMode::Dense(_)))
            .finish()
    }
}

/// Controlled power realized by iterated application of `op`.
pub fn controlled_power(op: Arc<dyn Operator>, exponent: u64) -> ControlledPower {
    ControlledPower { inner: op, exponent, mode: PowerMode::Iterated }
}

/// Controlled power realized by dense repeated squaring. Requires
/// `op.dim() <= DENSE_CAP`.
pub fn controlled_power_squared(op: Arc<dyn Operator>, exponent: u64) -> Result<ControlledPower> {
    let base = to_dense(op.as_ref())
        .ok_or_else(|| Error::Size(format!("dimension {} above the dense cap {DENSE_CAP}", op.dim())))?;
    let d = base.nrows();
    let mut acc = DMatrix::<C64>::identity(d, d);
    let mut sq = base;
    let mut e = exponent;
    while e > 0 {
        if e & 1 == 1 {
            acc = &sq * &acc;
        }
        e >>= 1;
        if e > 0 {
            sq = &sq * &sq;
        }
    }
    Ok(ControlledPower { inner: op, exponent, mode: PowerMode::Dense(acc) })
}

impl Operator for ControlledPower {
    fn dim(&self) -> usize {
        2 * self.inner.dim()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        let d = self.inner.dim();
        let target = &mut amps[d..];
        match &self.mode {
            PowerMode::Iterated => {
                for _ in 0..self.exponent {
                    self.inner.apply_slice(target);
                }
            }
            PowerMode::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(target);
                let out = m * v;
                target.copy_from_slice(out.as_slice());
            }
        }
    }
    fn charge(&self, applications: u64) {
        self.inner.charge(applications * self.exponent);
    }
}

/// `factors[0] * factors[1] * ... ` (the last factor acts first).
pub struct Product {
    factors: Vec<Arc<dyn Operator>>,
}

impl Product {
    pub fn new(factors: Vec<Arc<dyn Operator>>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(Error::Layout("empty operator product".into()));
        };
        let d = first.dim();
        if factors.iter().any(|f| f.dim() != d) {
            return Err(Error::Layout("operator product with mismatched dimensions".into()));
        }
        Ok(Self { factors })
    }
}

impl Operator for Product {
    fn dim(&self) -> usize {
        self.factors[0].dim()
    }
    fn apply_slice(&self, amps: &mut [C64]) {
        for f in self.factors.iter().rev() {
            f.apply_slice(amps);
        }
    }
    fn charge(&self, applications: u64) {
        for f in &self.factors {
            f.charge(applications);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_unitary_2x2(seed: u64) -> DenseOperator {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let (a, b, g, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let (a, b, g, d) = (a * 6.0, b * 6.0, g * 6.0, d * 3.0);
        let m = [
            C64::from_polar(d.cos(), a),
            C64::from_polar(d.sin(), b),
            -C64::from_polar(d.sin(), g - b),
            C64::from_polar(d.cos(), g - a),
        ];
        DenseOperator::from_row_slice(2, &m).unwrap()
    }

    #[test]
    fn identity_and_phase_flip() {
        let mut v = vec![c(0.6, 0.0), c(0.0, 0.8)];
        Identity { dim: 2 }.apply_slice(&mut v);
        assert_eq!(v, vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let mut one = vec![c(0.0, 0.0), c(1.0, 0.0)];
        Diagonal::phase_flip().apply_slice(&mut one);
        assert_eq!(one, vec![c(0.0, 0.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn reflection_through_zero_state() {
        let r = reflection_through(2, vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![c(h, 0.0), c(h, 0.0)];
        r.apply_slice(&mut v);
        assert!((v[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((v[1] - c(-h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reflection_edge_spans() {
        let full = reflection_through(2, vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        let empty = reflection_through(2, vec![]).unwrap();
        let mut v = vec![c(0.3, 0.1), c(-0.2, 0.9)];
        let orig = v.clone();
        full.apply_slice(&mut v);
        assert_eq!(v, orig);
        empty.apply_slice(&mut v);
        assert_eq!(v, orig.iter().map(|x| -x).collect::<Vec<_>>());
        assert!(matches!(
            reflection_through(2, vec![vec![c(1.0, 0.0), c(0.1, 0.0)]]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn one_qubit_inverse_fourier_is_hadamard() {
        let f = to_dense(&Fourier::inverse(1)).unwrap();
        let h = to_dense(&hadamard()).unwrap();
        assert!((f - h).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn inverse_fourier_matches_definition() {
        for t in 0..=6u32 {
            let m = to_dense(&Fourier::inverse(t)).unwrap();
            for j in 0..(1 << t) {
                for b in 0..(1 << t) {
                    assert!((m[(j, b)] - inverse_fourier_entry(t, j, b)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_fourier_reads_dyadic_phase() {
        // 8^{-1/2} sum_j e^{2 pi i 5 j / 8} |j>  ->  |5>
        let mut v: Vec<C64> = (0..8).map(|j| C64::from_polar(1.0 / 8f64.sqrt(), 2.0 * PI * 5.0 * j as f64 / 8.0)).collect();
        Fourier::inverse(3).apply_slice(&mut v);
        assert!((v[5].norm_sqr() - 1.0).abs() < 1e-12);
        let mut u = vec![c(0.25, 0.0); 16];
        Fourier::inverse(4).apply_slice(&mut u);
        assert!((u[0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fourier_round_trip() {
        for t in 0..=10u32 {
            let n = 1usize << t;
            let mut v: Vec<C64> = (0..n).map(|i| c((i as f64).sin(), (i as f64 * 0.37).cos())).collect();
            let orig = v.clone();
            let f = Fourier::inverse(t);
            f.apply_slice(&mut v);
            f.adjoint().apply_slice(&mut v);
            let dev = v.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-9, "t={t} dev={dev}");
        }
    }

    #[test]
    fn controlled_power_exponent_zero_is_identity() {
        let u: Arc<dyn Operator> = Arc::new(random_unitary_2x2(3));
        let cp = controlled_power(u, 0);
        let m = to_dense(&cp).unwrap();
        assert!((m - DMatrix::<C64>::identity(4, 4)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn controlled_diagonal_power() {
        let theta = 0.37;
        let u: Arc<dyn Operator> = Arc::new(Diagonal::new(vec![c(1.0, 0.0), C64::from_polar(1.0, theta)]));
        let cp = controlled_power(u, 4);
        // control = 1, target = |1>  ->  index 3
        let mut v = vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        cp.apply_slice(&mut v);
        assert!((v[3] - C64::from_polar(1.0, 4.0 * theta)).norm() < 1e-12);
    }

    #[test]
    fn squared_and_iterated_powers_agree() {
        for seed in 0..5 {
            let u = random_unitary_2x2(seed);
            let arc: Arc<dyn Operator> = Arc::new(u.clone());
            let iter = to_dense(&controlled_power(arc.clone(), 3)).unwrap();
            let sq = to_dense(&controlled_power_squared(arc, 3).unwrap()).unwrap();
            // oracle: naive repeated application of the 2x2 matrix
            let mut naive = DMatrix::<C64>::identity(2, 2);
            for _ in 0..3 {
                naive = u.matrix() * naive;
            }
            for i in 0..2 {
                for j in 0..2 {
                    assert!((iter[(2 + i, 2 + j)] - naive[(i, j)]).norm() < 1e-9);
                    assert!((sq[(2 + i, 2 + j)] - naive[(i, j)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unitarity_of_standard_gates() {
        assert!(unitarity_defect(&hadamard()).unwrap() < 1e-15);
        assert!(unitarity_defect(&Fourier::inverse(5)).unwrap() < 1e-12);
        assert!(unitarity_defect(&random_unitary_2x2(9)).unwrap() < 1e-12);
        let bad = DenseOperator::from_row_slice(2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(unitarity_defect(&bad).unwrap() > 0.5);
    }

    #[test]
    fn product_applies_right_to_left() {
        let x = Arc::new(DenseOperator::from_row_slice(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap());
        let z = Arc::new(Diagonal::phase_flip());
        // X * Z |0> = X |0> = |1>;  Z * X |0> = Z |1> = -|1>
        let xz = Product::new(vec![x.clone(), z.clone()]).unwrap();
        let zx = Product::new(vec![z, x]).unwrap();
        let mut a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let mut b = a.clone();
        xz.apply_slice(&mut a);
        zx.apply_slice(&mut b);
        assert_eq!(a[1], c(1.0, 0.0));
        assert_eq!(b[1], c(-1.0, 0.0));
    }
}
