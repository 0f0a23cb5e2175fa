use nalgebra::{DMatrix, SymmetricEigen};

use super::{WalkOperators, GRAM_TOL, ZERO};
use crate::engine::{Operator, C64};

const CLUSTER_TOL: f64 = 1e-8;

/// Eigenvectors of `W` sharing the eigenvalue `e^{2 pi i phase}`.
#[derive(Debug, Clone)]
pub struct Eigencluster {
    /// Eigenphase as a fraction of a full turn, in `[0, 1)`.
    pub phase: f64,
    /// Orthonormal pair-space eigenvectors.
    pub vectors: Vec<Vec<C64>>,
}

/// Eigendecomposition of `W` on `A + B`, minus its `+1` eigenspace.
///
/// `W` acts as the identity on the complement of `A + B` and on `|pi>`, so
/// the clusters listed here together with one implicit phase-0 cluster
/// cover the whole pair space.
#[derive(Debug, Clone)]
pub struct WalkSpectrum {
    pub clusters: Vec<Eigencluster>,
    pub pair_dim: usize,
}

fn group(values: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if (values[i] - values[*g.last().expect("nonempty")]).abs() <= CLUSTER_TOL => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

impl WalkSpectrum {
    pub fn new(walk: &WalkOperators) -> Self {
        let data = walk.data();
        let n = walk.n();
        let pair_dim = n * n;
        // orthonormal basis of A + B from the eigenvectors of D
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            let lam = data.d_vals[j];
            let q = data.d_vecs.column(j);
            for sign in [1.0, -1.0] {
                let scale = 1.0 + sign * lam;
                if scale <= GRAM_TOL {
                    continue;
                }
                let norm = (2.0 * scale).sqrt();
                let mut f = vec![0.0; pair_dim];
                for x in 0..n {
                    for y in 0..n {
                        f[x * n + y] = (q[x] * data.s(x, y) + sign * q[y] * data.s(y, x)) / norm;
                    }
                }
                basis.push(f);
            }
        }
        let r = basis.len();
        let w = walk.walk();
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|f| {
                let mut v: Vec<C64> = f.iter().map(|&a| C64::new(a, 0.0)).collect();
                w.apply_slice(&mut v);
                v.iter().map(|z| z.re).collect()
            })
            .collect();
        let h = DMatrix::from_fn(r, r, |i, j| basis[i].iter().zip(&images[j]).map(|(a, b)| a * b).sum::<f64>());
        let sym = (&h + h.transpose()) * 0.5;
        let skew = (&h - h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let cosines = eig.eigenvalues.as_slice().to_vec();
        let mut clusters = Vec::new();
        for g in group(&cosines) {
            let cos = g.iter().map(|&i| cosines[i]).sum::<f64>() / g.len() as f64;
            if cos >= 1.0 - CLUSTER_TOL {
                continue;
            }
            let vc = DMatrix::from_fn(r, g.len(), |a, b| eig.eigenvectors[(a, g[b])]);
            let sc = vc.transpose() * &skew * &vc;
            // -i S is Hermitian with eigenvalues sin(2 pi phase)
            let herm = sc.map(|a| C64::new(0.0, -a));
            let sub = SymmetricEigen::new(herm);
            let sines = sub.eigenvalues.as_slice().to_vec();
            let vcc = vc.map(|a| C64::new(a, 0.0));
            for sg in group(&sines) {
                let sin = sg.iter().map(|&i| sines[i]).sum::<f64>() / sg.len() as f64;
                let phase = (sin.atan2(cos) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
                let vectors = sg
                    .iter()
                    .map(|&i| {
                        let coords = &vcc * sub.eigenvectors.column(i);
                        let mut v = vec![ZERO; pair_dim];
                        for (a, f) in basis.iter().enumerate() {
                            for (p, &fa) in f.iter().enumerate() {
                                v[p] += coords[a] * fa;
                            }
                        }
                        v
                    })
                    .collect();
                clusters.push(Eigencluster { phase, vectors });
            }
        }
        Self { clusters, pair_dim }
    }

    /// Smallest circular distance of a listed eigenphase from 0.
    pub fn min_phase(&self) -> f64 {
        self.clusters.iter().map(|c| c.phase.min(1.0 - c.phase)).fold(0.5, f64::min)
    }
}
