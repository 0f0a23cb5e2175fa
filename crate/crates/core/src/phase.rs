//! Phase estimation: Hadamards on a `t`-qubit phase register, controlled
//! `U^{2^j}` from phase qubit `j`, inverse Fourier transform, measurement.
//!
//! [`distribution`] and [`output_state`] compute the same circuit by
//! streaming: the state before the Fourier transform is
//! `2^{-t/2} sum_j |j> U^j |psi>`, so each system amplitude's phase-register
//! column is a length-`2^t` FFT of its orbit under `U`. [`circuit_state`]
//! builds the circuit gate by gate instead.

use std::sync::Arc;

use rand::Rng;
use rustfft::FftPlanner;

use crate::engine::{
    controlled_power, hadamard, measure_distribution, qubit, reg, sample_outcome, Fourier, Operator,
    RegisterLayout, StateVector, C64,
};
use crate::error::{Error, Result};

/// Most complex amplitudes held at once by the streaming routes.
pub const STREAM_BUDGET: usize = 1 << 24;
/// Largest phase register accepted.
pub const MAX_T: u32 = 24;

/// `t = t1 + ceil(log2(2 + 1/(2 xi)))`.
pub fn precision_for(t1: u32, xi: f64) -> Result<u32> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Parameter(format!("failure probability {xi} outside (0, 1]")));
    }
    Ok(t1 + (2.0 + 1.0 / (2.0 * xi)).log2().ceil() as u32)
}

/// Distance between two phases on the unit circle of circumference 1.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Mass of outcomes `b` with `circular_distance(b / 2^t, target) < 2^{-t1}`.
pub fn success_probability(distribution: &[f64], target: f64, t1: u32) -> f64 {
    let scale = distribution.len() as f64;
    let window = 2f64.powi(-(t1 as i32));
    distribution
        .iter()
        .enumerate()
        .filter(|(b, _)| circular_distance(*b as f64 / scale, target) < window)
        .map(|(_, p)| p)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRun {
    pub t: u32,
    pub distribution: Vec<f64>,
    pub sample: usize,
    /// `sample / 2^t`.
    pub estimate: f64,
}

fn check_t(t: u32) -> Result<usize> {
    if t > MAX_T {
        return Err(Error::Size(format!("{t} phase qubits exceed the limit {MAX_T}")));
    }
    Ok(1usize << t)
}

/// Streams `U^j |input>` for `j < 2^t` over the components in `range`,
/// filling `buf[c * 2^t + j]`, then transforms each component's column.
fn orbit_chunk(u: &dyn Operator, input: &[C64], t: u32, range: std::ops::Range<usize>, buf: &mut [C64]) {
    let n = 1usize << t;
    let mut v = input.to_vec();
    for j in 0..n {
        if j > 0 {
            u.apply_slice(&mut v);
        }
        for (c, i) in range.clone().enumerate() {
            buf[c * n + j] = v[i];
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
}

fn check_input(u: &dyn Operator, input: &[C64]) -> Result<()> {
    if input.len() != u.dim() {
        return Err(Error::Layout(format!("input of length {} for an operator of dimension {}", input.len(), u.dim())));
    }
    Ok(())
}

/// Exact outcome distribution of the phase register. Charges `2^t - 1`
/// applications of `u`.
pub fn distribution(u: &dyn Operator, input: &[C64], t: u32) -> Result<Vec<f64>> {
    check_input(u, input)?;
    let n = check_t(t)?;
    let dim = input.len();
    let chunk = (STREAM_BUDGET / n).max(1).min(dim);
    let mut probs = vec![0.0; n];
    let mut buf = vec![C64::new(0.0, 0.0); chunk * n];
    let mut start = 0;
    while start < dim {
        let end = (start + chunk).min(dim);
        let len = (end - start) * n;
        orbit_chunk(u, input, t, start..end, &mut buf[..len]);
        for col in buf[..len].chunks(n) {
            for (p, z) in probs.iter_mut().zip(col) {
                *p += z.norm_sqr();
            }
        }
        start = end;
    }
    u.charge(n as u64 - 1);
    Ok(probs)
}

/// The full output state, phase register most significant (`b * dim + i`).
/// Charges `2^t - 1` applications of `u`.
pub fn output_state(u: &dyn Operator, input: &[C64], t: u32) -> Result<Vec<C64>> {
    check_input(u, input)?;
    let n = check_t(t)?;
    let dim = input.len();
    if n.saturating_mul(dim) > STREAM_BUDGET {
        return Err(Error::Size(format!("output state of {n} x {dim} amplitudes exceeds {STREAM_BUDGET}")));
    }
    let mut buf = vec![C64::new(0.0, 0.0); n * dim];
    orbit_chunk(u, input, t, 0..dim, &mut buf);
    let mut out = vec![C64::new(0.0, 0.0); n * dim];
    for i in 0..dim {
        for b in 0..n {
            out[b * dim + i] = buf[i * n + b];
        }
    }
    u.charge(n as u64 - 1);
    Ok(out)
}

/// Runs phase estimation and draws one outcome.
pub fn estimate<R: Rng + ?Sized>(u: &dyn Operator, input: &[C64], t: u32, rng: &mut R) -> Result<PhaseRun> {
    let distribution = distribution(u, input, t)?;
    let sample = sample_outcome(&distribution, rng)?;
    Ok(PhaseRun { t, estimate: sample as f64 / (1usize << t) as f64, sample, distribution })
}

/// The circuit built gate by gate on layout `(phase: 2^t, sys: dim)`.
/// Each controlled power charges its exponent in applications of `u`.
pub fn circuit_state(u: Arc<dyn Operator>, input: &[C64], t: u32) -> Result<StateVector> {
    check_input(u.as_ref(), input)?;
    let n = check_t(t)?;
    let dim = input.len();
    let layout = RegisterLayout::new([("phase", n), ("sys", dim)])?;
    let mut amps = vec![C64::new(0.0, 0.0); n * dim];
    amps[..dim].copy_from_slice(input);
    let mut state = StateVector::from_amplitudes(layout, amps)?;
    let h = hadamard();
    for j in 0..t {
        state.apply_uncharged(&h, &[qubit("phase", j)])?;
    }
    for j in 0..t {
        let cp = controlled_power(u.clone(), 1u64 << j);
        state.apply(&cp, &[qubit("phase", j), reg("sys")])?;
    }
    state.apply_uncharged(&Fourier::inverse(t), &[reg("phase")])?;
    Ok(state)
}

/// Phase-register distribution of [`circuit_state`].
pub fn circuit_distribution(u: Arc<dyn Operator>, input: &[C64], t: u32) -> Result<Vec<f64>> {
    measure_distribution(&circuit_state(u, input, t)?, "phase")
}
