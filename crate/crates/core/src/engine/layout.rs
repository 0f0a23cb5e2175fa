use crate::error::{Error, Result};

/// Ordered registers of a tensor-product space.
///
/// The leftmost register is the most significant digit of the flattened
/// index: with registers `(a, 3), (b, 4)` the basis state `|i>_a |j>_b`
/// lives at index `4 * i + j`. Inside a register whose dimension is a power
/// of two, qubit `0` is the least significant bit of the register index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    names: Vec<String>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

/// A part of a layout an operator can act on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Register(String),
    Qubit { register: String, bit: u32 },
}

pub fn reg(name: &str) -> Target {
    Target::Register(name.to_string())
}

pub fn qubit(register: &str, bit: u32) -> Target {
    Target::Qubit { register: register.to_string(), bit }
}

/// One mixed-radix digit of the flattened index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Axis {
    pub stride: usize,
    pub dim: usize,
    register: usize,
    /// Bit mask within the register, `None` for the whole register.
    bits: Option<usize>,
}

impl RegisterLayout {
    pub fn new<I, S>(registers: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let (names, dims): (Vec<String>, Vec<usize>) =
            registers.into_iter().map(|(n, d)| (n.into(), d)).unzip();
        for (i, name) in names.iter().enumerate() {
            if dims[i] == 0 {
                return Err(Error::Layout(format!("register `{name}` has dimension 0")));
            }
            if names[..i].contains(name) {
                return Err(Error::Layout(format!("duplicate register name `{name}`")));
            }
        }
        let mut strides = vec![1usize; dims.len()];
        let mut total = 1usize;
        for i in (0..dims.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(dims[i])
                .ok_or_else(|| Error::Size("layout dimension overflows usize".into()))?;
        }
        Ok(Self { names, dims, strides, total })
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, usize)> {
        self.names.iter().map(String::as_str).zip(self.dims.iter().copied())
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Layout(format!("no register named `{name}`")))
    }

    pub fn dim(&self, name: &str) -> Result<usize> {
        Ok(self.dims[self.position(name)?])
    }

    pub fn stride(&self, name: &str) -> Result<usize> {
        Ok(self.strides[self.position(name)?])
    }

    /// Number of qubits of a register whose dimension is a power of two.
    pub fn qubits(&self, name: &str) -> Result<u32> {
        let d = self.dim(name)?;
        if !d.is_power_of_two() {
            return Err(Error::Layout(format!("register `{name}` has dimension {d}, not a power of two")));
        }
        Ok(d.trailing_zeros())
    }

    /// Digit of register `name` in the flattened index `index`.
    pub fn digit(&self, index: usize, name: &str) -> Result<usize> {
        let p = self.position(name)?;
        Ok((index / self.strides[p]) % self.dims[p])
    }

    pub(crate) fn axis(&self, target: &Target) -> Result<Axis> {
        match target {
            Target::Register(name) => {
                let p = self.position(name)?;
                Ok(Axis { stride: self.strides[p], dim: self.dims[p], register: p, bits: None })
            }
            Target::Qubit { register, bit } => {
                let p = self.position(register)?;
                let q = self.qubits(register)?;
                if *bit >= q {
                    return Err(Error::Layout(format!(
                        "qubit {bit} out of range for {q}-qubit register `{register}`"
                    )));
                }
                Ok(Axis {
                    stride: self.strides[p] << bit,
                    dim: 2,
                    register: p,
                    bits: Some(1 << bit),
                })
            }
        }
    }
}

/// Precomputed gather/scatter offsets for applying a local operator to a
/// set of targets.
#[derive(Debug, Clone)]
pub(crate) struct Fibers {
    /// Offset of each local basis index relative to a fiber base.
    pub inner: Vec<usize>,
    /// Base index of every fiber.
    pub outer: Vec<usize>,
    pub contiguous: bool,
}

impl Fibers {
    pub fn new(layout: &RegisterLayout, targets: &[Target]) -> Result<Self> {
        let axes = targets.iter().map(|t| layout.axis(t)).collect::<Result<Vec<_>>>()?;
        for (i, a) in axes.iter().enumerate() {
            for b in &axes[..i] {
                let overlap = a.register == b.register
                    && match (a.bits, b.bits) {
                        (Some(x), Some(y)) => x & y != 0,
                        _ => true,
                    };
                if overlap {
                    return Err(Error::Layout(format!("targets {targets:?} overlap")));
                }
            }
        }
        let local: usize = axes.iter().map(|a| a.dim).product();
        let mut inner = Vec::with_capacity(local);
        for l in 0..local {
            let mut rem = l;
            let mut off = 0;
            for a in axes.iter().rev() {
                off += (rem % a.dim) * a.stride;
                rem /= a.dim;
            }
            inner.push(off);
        }
        let outer: Vec<usize> = (0..layout.total_dim())
            .filter(|&i| axes.iter().all(|a| (i / a.stride) % a.dim == 0))
            .collect();
        let contiguous = inner.iter().enumerate().all(|(l, &o)| l == o);
        Ok(Self { inner, outer, contiguous })
    }

    pub fn local_dim(&self) -> usize {
        self.inner.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_follow_leftmost_most_significant() {
        let l = RegisterLayout::new([("a", 3), ("b", 4), ("c", 2)]).unwrap();
        assert_eq!(l.total_dim(), 24);
        assert_eq!(l.stride("a").unwrap(), 8);
        assert_eq!(l.stride("b").unwrap(), 2);
        assert_eq!(l.stride("c").unwrap(), 1);
        assert_eq!(l.digit(8 * 2 + 2 * 3 + 1, "b").unwrap(), 3);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(RegisterLayout::new([("a", 0)]).is_err());
        assert!(RegisterLayout::new([("a", 2), ("a", 3)]).is_err());
        let l = RegisterLayout::new([("a", 3)]).unwrap();
        assert!(l.qubits("a").is_err());
        assert!(l.dim("zz").is_err());
    }

    #[test]
    fn qubit_fibers() {
        let l = RegisterLayout::new([("p", 4), ("s", 3)]).unwrap();
        let f = Fibers::new(&l, &[qubit("p", 1), reg("s")]).unwrap();
        assert_eq!(f.local_dim(), 6);
        assert_eq!(f.inner, vec![0, 1, 2, 6, 7, 8]);
        assert_eq!(f.outer, vec![0, 3]);
        assert!(Fibers::new(&l, &[qubit("p", 1), reg("p")]).is_err());
        assert!(Fibers::new(&l, &[qubit("p", 2)]).is_err());
        assert!(Fibers::new(&l, &[qubit("p", 0), qubit("p", 1)]).is_ok());
    }
}
