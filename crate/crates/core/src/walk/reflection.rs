//! Phase-estimation based approximate reflection about `|pi>`.
//!
//! For `k` rounds, phase estimation of `W` with `s` bits writes into its own
//! `s`-qubit workspace register; every basis state whose workspace is not
//! all zero picks up a `-1`; the phase estimations are then undone. On a `W`
//! eigenvector with phase `theta` this acts on the workspace as
//! `2|w_theta><w_theta| - I`, where `w_theta = c_theta^{(x) k}` and `c_theta`
//! is the uncomputed-phase-estimation image of `|0^s>`:
//! `c_theta(b) = 2^{-s} sum_j (-1)^{popcount(b & j)} e^{-2 pi i theta j}`.
//!
//! Starting from `|0^tau>` the workspace never leaves
//! `span{|0^tau>, w_theta}`, so [`ApproxReflection`] stores it in that
//! subspace, orthonormalized. [`literal_reflection`] runs the same circuit
//! gate by gate on the full `2^{k s}` workspace.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::spectrum::WalkSpectrum;
use super::{WalkOperators, ZERO};
use crate::engine::{
    controlled_power, qubit, reg, DenseOperator, Diagonal, Fourier, Operator, RegisterLayout, StateVector, C64,
};
use crate::error::{Error, Result};

/// Residual norm below which a workspace vector counts as dependent.
const GS_TOL: f64 = 1e-10;
/// Largest `n^2 * workspace` the compressed reflection will hold.
pub const FULL_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReflectionConfig {
    pub k: u32,
    pub s: u32,
}

impl ReflectionConfig {
    pub fn tau(&self) -> u32 {
        self.k * self.s
    }
}

/// Bits per phase-detection round for spectral gap `delta`:
/// `ceil(log2(pi / sqrt(2 delta))) + 2`.
pub fn reflection_bits(delta: f64) -> u32 {
    let b = (PI / (2.0 * delta).sqrt()).log2().ceil();
    (b.max(0.0) as u32) + 2
}

/// `c_theta` of the module docs, length `2^s`.
pub fn uncomputed_register(theta: f64, s: u32) -> Vec<C64> {
    let n = 1usize << s;
    let mut v: Vec<C64> =
        (0..n).map(|j| C64::from_polar(1.0 / n as f64, -2.0 * PI * theta * j as f64)).collect();
    // in-place Walsh-Hadamard transform
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    v
}

struct Cluster {
    /// Orthonormal pair-space eigenvectors.
    vectors: Vec<Vec<C64>>,
    /// `M_theta - M_0` in compressed workspace coordinates.
    delta_m: DMatrix<C64>,
}

/// Compressed-workspace realization of the phase-estimation reflection.
pub struct ApproxReflection {
    config: ReflectionConfig,
    pair_dim: usize,
    workspace: usize,
    clusters: Vec<Cluster>,
    phases: Vec<f64>,
    /// `c_theta` per cluster, kept for expanding to the literal workspace.
    registers: Vec<Vec<C64>>,
    /// Row `i` expresses orthonormal workspace vector `i` as a combination
    /// of `(|0^tau>, w_1, w_2, ...)`.
    combination: DMatrix<C64>,
}

impl std::fmt::Debug for ApproxReflection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApproxReflection")
            .field("config", &self.config)
            .field("workspace", &self.workspace)
            .field("phases", &self.phases)
            .finish()
    }
}

pub fn approx_reflection(walk: &WalkOperators, config: ReflectionConfig) -> Result<ApproxReflection> {
    ApproxReflection::new(walk, &WalkSpectrum::new(walk), config)
}

impl ApproxReflection {
    pub fn new(walk: &WalkOperators, spectrum: &WalkSpectrum, config: ReflectionConfig) -> Result<Self> {
        if config.k == 0 || config.s == 0 {
            return Err(Error::Parameter(format!("reflection needs k, s >= 1, got {config:?}")));
        }
        if config.s > 20 {
            return Err(Error::Size(format!("{} bits per round is beyond the simulator", config.s)));
        }
        let k = config.k as i32;
        let registers: Vec<Vec<C64>> =
            spectrum.clusters.iter().map(|c| uncomputed_register(c.phase, config.s)).collect();
        let m = registers.len();
        // Gram matrix of (|0^tau>, w_1, ..., w_m)
        let mut gram = DMatrix::<C64>::identity(m + 1, m + 1);
        for a in 0..m {
            gram[(0, a + 1)] = registers[a][0].powi(k);
            gram[(a + 1, 0)] = gram[(0, a + 1)].conj();
            for b in 0..a {
                let ip: C64 = registers[a].iter().zip(&registers[b]).map(|(x, y)| x.conj() * y).sum();
                gram[(a + 1, b + 1)] = ip.powi(k);
                gram[(b + 1, a + 1)] = gram[(a + 1, b + 1)].conj();
            }
        }
        // Gram-Schmidt in coefficient space; coords[:, j] = <u_i | v_j>
        let mut comb: Vec<Vec<C64>> = Vec::new();
        let mut coords = DMatrix::<C64>::zeros(m + 1, m + 1);
        for j in 0..=m {
            let proj: Vec<C64> = comb
                .iter()
                .map(|row: &Vec<C64>| (0..=m).map(|l| row[l].conj() * gram[(l, j)]).sum())
                .collect();
            let res2 = gram[(j, j)].re - proj.iter().map(|z| z.norm_sqr()).sum::<f64>();
            for (i, p) in proj.iter().enumerate() {
                coords[(i, j)] = *p;
            }
            if res2 > GS_TOL * GS_TOL {
                let res = res2.sqrt();
                let mut row = vec![ZERO; m + 1];
                row[j] = C64::new(1.0, 0.0);
                for (i, p) in proj.iter().enumerate() {
                    for l in 0..=m {
                        row[l] -= *p * comb[i][l];
                    }
                }
                row.iter_mut().for_each(|z| *z /= res);
                coords[(comb.len(), j)] = C64::new(res, 0.0);
                comb.push(row);
            }
        }
        let workspace = comb.len();
        if walk.pair_dim().saturating_mul(workspace) > FULL_BUDGET {
            return Err(Error::Size(format!(
                "pair dimension {} times workspace {workspace} exceeds the budget {FULL_BUDGET}",
                walk.pair_dim()
            )));
        }
        let reflect = |col: usize| {
            let w: Vec<C64> = (0..workspace).map(|i| coords[(i, col)]).collect();
            let mut mm = DMatrix::<C64>::from_fn(workspace, workspace, |i, j| w[i] * w[j].conj() * 2.0);
            for i in 0..workspace {
                mm[(i, i)] -= 1.0;
            }
            mm
        };
        let m0 = reflect(0);
        let clusters = spectrum
            .clusters
            .iter()
            .enumerate()
            .map(|(a, c)| Cluster { vectors: c.vectors.clone(), delta_m: reflect(a + 1) - &m0 })
            .collect();
        let combination = DMatrix::from_fn(workspace, m + 1, |i, l| comb[i][l]);
        Ok(Self {
            config,
            pair_dim: walk.pair_dim(),
            workspace,
            clusters,
            phases: spectrum.clusters.iter().map(|c| c.phase).collect(),
            registers,
            combination,
        })
    }

    pub fn config(&self) -> ReflectionConfig {
        self.config
    }

    /// Dimension of the compressed workspace.
    pub fn workspace_dim(&self) -> usize {
        self.workspace
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `max |<0^s|c_theta>|` over the nonzero eigenphases; the reflection is
    /// within `2 * bound^k` of the ideal one on `A + B`.
    pub fn zero_read_bound(&self) -> f64 {
        self.registers.iter().map(|r| r[0].norm()).fold(0.0, f64::max)
    }

    /// Applies the reflection to a `pair_dim x workspace` wide vector.
    pub fn apply_wide(&self, v: &mut [C64]) {
        let d = self.workspace;
        let mut coeffs: Vec<Vec<C64>> = Vec::with_capacity(self.clusters.len());
        for cl in &self.clusters {
            let mut c = vec![ZERO; cl.vectors.len() * d];
            for (i, vec) in cl.vectors.iter().enumerate() {
                for (p, q) in vec.iter().enumerate() {
                    if *q == ZERO {
                        continue;
                    }
                    let qc = q.conj();
                    for w in 0..d {
                        c[i * d + w] += qc * v[p * d + w];
                    }
                }
            }
            coeffs.push(c);
        }
        // base action 2|0><0| - I on the workspace
        for p in 0..self.pair_dim {
            for w in 1..d {
                v[p * d + w] = -v[p * d + w];
            }
        }
        for (cl, c) in self.clusters.iter().zip(&coeffs) {
            for (i, vec) in cl.vectors.iter().enumerate() {
                let mut z = vec![ZERO; d];
                for (w, zw) in z.iter_mut().enumerate() {
                    for u in 0..d {
                        *zw += cl.delta_m[(w, u)] * c[i * d + u];
                    }
                }
                for (p, q) in vec.iter().enumerate() {
                    if *q == ZERO {
                        continue;
                    }
                    for w in 0..d {
                        v[p * d + w] += q * z[w];
                    }
                }
            }
        }
    }

    /// Literal `2^{k s}`-dimensional workspace vector of compressed
    /// coordinates `coords`. Registers are ordered round 1 first.
    pub fn expand_workspace(&self, coords: &[C64]) -> Result<Vec<C64>> {
        let tau = self.config.tau();
        if tau > 24 {
            return Err(Error::Size(format!("literal workspace of {tau} qubits")));
        }
        let dim = 1usize << tau;
        let s_dim = 1usize << self.config.s;
        let mut out = vec![ZERO; dim];
        let weights: Vec<C64> = (0..=self.registers.len())
            .map(|l| (0..self.workspace).map(|i| coords[i] * self.combination[(i, l)]).sum())
            .collect();
        out[0] += weights[0];
        for (a, reg) in self.registers.iter().enumerate() {
            for (idx, o) in out.iter_mut().enumerate() {
                let mut amp = weights[a + 1];
                let mut rest = idx;
                for _ in 0..self.config.k {
                    amp *= reg[rest % s_dim];
                    rest /= s_dim;
                }
                *o += amp;
            }
        }
        Ok(out)
    }
}

/// Walsh-Hadamard matrix on `s` qubits.
fn hadamard_layer(s: u32) -> DenseOperator {
    let d = 1usize << s;
    let scale = 1.0 / (d as f64).sqrt();
    let entries: Vec<C64> = (0..d * d)
        .map(|i| {
            let sign = if ((i / d) & (i % d)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(sign * scale, 0.0)
        })
        .collect();
    DenseOperator::from_row_slice(d, &entries).expect("square")
}

/// Runs the reflection circuit gate by gate on a state with layout
/// `x, y, w1, ..., wk` (each `w_i` of dimension `2^s`).
pub fn literal_reflection(walk: &WalkOperators, config: ReflectionConfig, state: &mut StateVector) -> Result<()> {
    let names: Vec<String> = (1..=config.k).map(|i| format!("w{i}")).collect();
    let h = hadamard_layer(config.s);
    let ft = Fourier::inverse(config.s);
    let ft_adj = ft.adjoint();
    let w: Arc<dyn Operator> = Arc::new(walk.walk());
    let w_adj: Arc<dyn Operator> = Arc::new(walk.walk_adjoint());
    let pair = [reg("x"), reg("y")];
    let powers = |op: &Arc<dyn Operator>, name: &str, state: &mut StateVector| -> Result<()> {
        for j in 0..config.s {
            let cp = controlled_power(op.clone(), 1u64 << j);
            let mut targets = vec![qubit(name, j)];
            targets.extend(pair.iter().cloned());
            state.apply_uncharged(&cp, &targets)?;
        }
        Ok(())
    };
    for name in &names {
        state.apply_uncharged(&h, &[reg(name)])?;
        powers(&w, name, state)?;
        state.apply_uncharged(&ft, &[reg(name)])?;
    }
    let ws_dim = 1usize << config.tau();
    let mut flip = vec![C64::new(-1.0, 0.0); ws_dim];
    flip[0] = C64::new(1.0, 0.0);
    let targets: Vec<_> = names.iter().map(|n| reg(n)).collect();
    state.apply_uncharged(&Diagonal::new(flip), &targets)?;
    for name in &names {
        state.apply_uncharged(&ft_adj, &[reg(name)])?;
        powers(&w_adj, name, state)?;
        state.apply_uncharged(&h, &[reg(name)])?;
    }
    Ok(())
}

/// Layout `x, y, w1, ..., wk` for [`literal_reflection`].
pub fn literal_layout(walk: &WalkOperators, config: ReflectionConfig) -> Result<RegisterLayout> {
    let mut regs = vec![("x".to_string(), walk.n()), ("y".to_string(), walk.n())];
    regs.extend((1..=config.k).map(|i| (format!("w{i}"), 1usize << config.s)));
    RegisterLayout::new(regs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{complete_graph_chain, MarkovChain};
    use crate::walk::{distance, norm, validated};

    fn pad(v: &[C64], d: usize) -> Vec<C64> {
        let mut out = vec![ZERO; v.len() * d];
        for (p, z) in v.iter().enumerate() {
            out[p * d] = *z;
        }
        out
    }

    fn deviation(walk: &WalkOperators, r: &ApproxReflection, psi: &[C64]) -> f64 {
        let d = r.workspace_dim();
        let mut a = pad(psi, d);
        r.apply_wide(&mut a);
        let mut b = psi.to_vec();
        walk.ideal_reflection().apply_slice(&mut b);
        distance(&a, &pad(&b, d))
    }

    #[test]
    fn bits_formula() {
        // K_3: delta = 1/2, pi / 1 -> ceil(1.65) + 2
        assert_eq!(reflection_bits(0.5), 4);
        assert_eq!(reflection_bits(2.0 / 3.0), 4);
        assert_eq!(reflection_bits(1.0), 4);
        assert_eq!(reflection_bits(2.0), 3);
    }

    #[test]
    fn uncomputed_register_is_normalized_and_exact_at_zero() {
        for s in 1..7 {
            let c0 = uncomputed_register(0.0, s);
            assert!((c0[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
            let c = uncomputed_register(0.3141, s);
            assert!((norm(&c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixes_pi_exactly() {
        for k in 1..4 {
            let walk = validated(complete_graph_chain(3).unwrap()).unwrap();
            let r = approx_reflection(&walk, ReflectionConfig { k, s: 4 }).unwrap();
            let pi = walk.pi_state(None);
            let mut v = pad(&pi, r.workspace_dim());
            r.apply_wide(&mut v);
            assert!(distance(&v, &pad(&pi, r.workspace_dim())) < 1e-8);
        }
    }

    #[test]
    fn bound_holds_on_random_sum_space_states() {
        let walk = validated(complete_graph_chain(3).unwrap()).unwrap();
        let s = reflection_bits(walk.spectral_gap());
        let r = approx_reflection(&walk, ReflectionConfig { k: 3, s }).unwrap();
        assert!(r.zero_read_bound() <= 0.5);
        let mut rng = crate::rng::seeded(11);
        for _ in 0..100 {
            let psi = walk.random_sum_space_state(&mut rng);
            assert!(deviation(&walk, &r, &psi) <= 0.25);
        }
    }

    #[test]
    fn compressed_is_unitary_even_at_k_one() {
        let walk = validated(MarkovChain::from_rows("two", &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap()).unwrap();
        let r = approx_reflection(&walk, ReflectionConfig { k: 1, s: 3 }).unwrap();
        let d = r.workspace_dim();
        let mut rng = crate::rng::seeded(12);
        for _ in 0..10 {
            let psi = walk.random_sum_space_state(&mut rng);
            let mut v = pad(&psi, d);
            // spread over all workspace coordinates too
            for (i, z) in v.iter_mut().enumerate() {
                *z += C64::new(0.01 * (i as f64).sin(), 0.0);
            }
            let before = norm(&v);
            r.apply_wide(&mut v);
            assert!((norm(&v) - before).abs() < 1e-9);
        }
    }

    #[test]
    fn literal_circuit_matches_compressed() {
        for (chain, k, s) in [
            (complete_graph_chain(3).unwrap(), 2, 4),
            (MarkovChain::from_rows("two", &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap(), 2, 3),
        ] {
            let walk = validated(chain).unwrap();
            let config = ReflectionConfig { k, s };
            let r = approx_reflection(&walk, config).unwrap();
            let layout = literal_layout(&walk, config).unwrap();
            let ws = 1usize << config.tau();
            let mut rng = crate::rng::seeded(13);
            for _ in 0..3 {
                let psi = walk.random_sum_space_state(&mut rng);
                // V_0 first so the input leaves A + B
                let mut psi2 = psi.clone();
                walk.v0_from_mask((0..walk.n()).map(|x| x == 0).collect()).apply_slice(&mut psi2);
                let mut amps = vec![ZERO; walk.pair_dim() * ws];
                for (p, z) in psi2.iter().enumerate() {
                    amps[p * ws] = *z;
                }
                let mut state = StateVector::from_amplitudes(layout.clone(), amps).unwrap();
                literal_reflection(&walk, config, &mut state).unwrap();
                let d = r.workspace_dim();
                let mut wide = pad(&psi2, d);
                r.apply_wide(&mut wide);
                let mut expanded = Vec::with_capacity(walk.pair_dim() * ws);
                for p in 0..walk.pair_dim() {
                    expanded.extend(r.expand_workspace(&wide[p * d..(p + 1) * d]).unwrap());
                }
                let dev = distance(state.amplitudes(), &expanded);
                assert!(dev < 1e-9, "dev {dev}");
            }
        }
    }
}
