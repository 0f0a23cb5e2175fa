//! A dense state-vector simulator over named registers.

mod layout;
mod measure;
mod operator;

pub use layout::{qubit, reg, RegisterLayout, Target};
pub use measure::{measure_distribution, sample_outcome};
pub use operator::{
    controlled_power, controlled_power_squared, hadamard, max_abs_entry, inverse_fourier_entry, reflection_through, to_dense,
    to_dense_capped, unitarity_defect, ControlledPower, DenseOperator, Diagonal, Fourier, Identity, Operator,
    Product, Reflection, DENSE_CAP, ORTHONORMAL_TOL,
};

use layout::Fibers;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Amplitudes of a pure state over a [`RegisterLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<C64>,
}

impl StateVector {
    /// The computational basis state with the given digit per register.
    pub fn basis(layout: RegisterLayout, digits: &[(&str, usize)]) -> Result<Self> {
        let mut index = 0;
        for (name, d) in digits {
            let dim = layout.dim(name)?;
            if *d >= dim {
                return Err(Error::Layout(format!("digit {d} out of range for register `{name}` of dimension {dim}")));
            }
            index += d * layout.stride(name)?;
        }
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { layout, amps })
    }

    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(Error::Layout(format!(
                "{} amplitudes for a layout of dimension {}",
                amps.len(),
                layout.total_dim()
            )));
        }
        Ok(Self { layout, amps })
    }

    /// Tensor product; registers of `self` stay most significant.
    pub fn product(&self, other: &StateVector) -> Result<Self> {
        let regs = self
            .layout
            .registers()
            .chain(other.layout.registers())
            .map(|(n, d)| (n.to_string(), d))
            .collect::<Vec<_>>();
        let layout = RegisterLayout::new(regs)?;
        let mut amps = Vec::with_capacity(layout.total_dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(Self { layout, amps })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Euclidean distance `|| self - other ||`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    pub fn max_deviation(&self, other: &StateVector) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_same(&self, other: &StateVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout("states have different layouts".into()));
        }
        Ok(())
    }

    /// Applies `op` to `targets` and charges one application.
    pub fn apply(&mut self, op: &dyn Operator, targets: &[Target]) -> Result<()> {
        self.apply_uncharged(op, targets)?;
        op.charge(1);
        Ok(())
    }

    /// Applies `op` to `targets` without touching any meter.
    pub fn apply_uncharged(&mut self, op: &dyn Operator, targets: &[Target]) -> Result<()> {
        let fibers = Fibers::new(&self.layout, targets)?;
        if fibers.local_dim() != op.dim() {
            return Err(Error::Layout(format!(
                "operator of dimension {} applied to targets of dimension {}",
                op.dim(),
                fibers.local_dim()
            )));
        }
        if fibers.outer.len() == 1 && fibers.contiguous {
            op.apply_slice(&mut self.amps);
            return Ok(());
        }
        let mut buf = vec![C64::new(0.0, 0.0); fibers.local_dim()];
        for &base in &fibers.outer {
            for (b, &off) in buf.iter_mut().zip(&fibers.inner) {
                *b = self.amps[base + off];
            }
            op.apply_slice(&mut buf);
            for (b, &off) in buf.iter().zip(&fibers.inner) {
                self.amps[base + off] = *b;
            }
        }
        Ok(())
    }

    /// One line per non-negligible amplitude, for dimensions up to 1024.
    pub fn debug_table(&self) -> Option<String> {
        if self.amps.len() > 1024 {
            return None;
        }
        let names: Vec<&str> = self.layout.registers().map(|(n, _)| n).collect();
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            let digits: Vec<String> = names
                .iter()
                .map(|n| format!("{n}={}", self.layout.digit(i, n).expect("own register")))
                .collect();
            out.push_str(&format!("{:>6} [{}] {:+.6}{:+.6}i\n", i, digits.join(" "), a.re, a.im));
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::meter::{ChargeKind, QueryMeter};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    struct Metered<'a> {
        inner: Diagonal,
        meter: &'a QueryMeter,
    }

    impl Operator for Metered<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn apply_slice(&self, amps: &mut [C64]) {
            self.inner.apply_slice(amps)
        }
        fn charge(&self, n: u64) {
            self.meter.charge(ChargeKind::Update, n)
        }
    }

    #[test]
    fn basis_state_index() {
        let l = RegisterLayout::new([("a", 3), ("b", 4)]).unwrap();
        let s = StateVector::basis(l, &[("a", 2), ("b", 1)]).unwrap();
        assert_eq!(s.amplitudes()[9], c(1.0));
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hadamard_on_each_qubit_gives_uniform() {
        let l = RegisterLayout::new([("q", 8)]).unwrap();
        let mut s = StateVector::basis(l, &[]).unwrap();
        let h = hadamard();
        for b in 0..3 {
            s.apply(&h, &[qubit("q", b)]).unwrap();
        }
        for a in s.amplitudes() {
            assert!((a - c(1.0 / 8f64.sqrt())).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_to_second_register_matches_kronecker() {
        // I (x) X on a 2x2 layout
        let l = RegisterLayout::new([("a", 2), ("b", 2)]).unwrap();
        let x = DenseOperator::from_row_slice(2, &[c(0.0), c(1.0), c(1.0), c(0.0)]).unwrap();
        let amps = vec![c(0.1), c(0.2), c(0.3), c(0.4)];
        let mut s = StateVector::from_amplitudes(l, amps).unwrap();
        s.apply(&x, &[reg("b")]).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.2), c(0.1), c(0.4), c(0.3)]);
    }

    #[test]
    fn target_order_sets_local_significance() {
        // CNOT with control = first target
        let l = RegisterLayout::new([("a", 2), ("b", 2)]).unwrap();
        let x: Arc<dyn Operator> =
            Arc::new(DenseOperator::from_row_slice(2, &[c(0.0), c(1.0), c(1.0), c(0.0)]).unwrap());
        let cnot = controlled_power(x, 1);
        let mut s = StateVector::basis(l.clone(), &[("b", 1)]).unwrap();
        s.apply(&cnot, &[reg("b"), reg("a")]).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0));
        let mut t = StateVector::basis(l, &[("b", 1)]).unwrap();
        t.apply(&cnot, &[reg("a"), reg("b")]).unwrap();
        assert_eq!(t.amplitudes()[1], c(1.0));
    }

    #[test]
    fn dimension_mismatch_is_a_layout_error() {
        let l = RegisterLayout::new([("a", 3)]).unwrap();
        let mut s = StateVector::basis(l, &[]).unwrap();
        assert!(matches!(s.apply(&hadamard(), &[reg("a")]), Err(Error::Layout(_))));
        assert!(matches!(s.apply(&hadamard(), &[reg("zz")]), Err(Error::Layout(_))));
    }

    #[test]
    fn apply_charges_once_per_call() {
        let meter = QueryMeter::new();
        let op = Metered { inner: Diagonal::phase_flip(), meter: &meter };
        let l = RegisterLayout::new([("a", 2), ("b", 2), ("c", 2)]).unwrap();
        let mut s = StateVector::basis(l, &[]).unwrap();
        s.apply(&op, &[reg("b")]).unwrap();
        assert_eq!(meter.snapshot().update, 1);
        s.apply_uncharged(&op, &[reg("b")]).unwrap();
        assert_eq!(meter.snapshot().update, 1);
    }

    #[test]
    fn product_state_layout() {
        let a = StateVector::basis(RegisterLayout::new([("a", 2)]).unwrap(), &[("a", 1)]).unwrap();
        let b = StateVector::basis(RegisterLayout::new([("b", 3)]).unwrap(), &[("b", 2)]).unwrap();
        let ab = a.product(&b).unwrap();
        assert_eq!(ab.amplitudes()[5], c(1.0));
        assert!(a.product(&a).is_err());
    }

    #[test]
    fn debug_table_lists_support() {
        let s = StateVector::basis(RegisterLayout::new([("a", 2), ("b", 3)]).unwrap(), &[("a", 1), ("b", 2)]).unwrap();
        let t = s.debug_table().unwrap();
        assert_eq!(t.lines().count(), 1);
        assert!(t.contains("a=1 b=2"));
    }
}
