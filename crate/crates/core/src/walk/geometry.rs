use super::{dot, norm, WalkOperators, ZERO};
use crate::engine::C64;
use crate::error::{Error, Result};
use crate::markov::{marked_fraction, MarkedSet};

/// The two-dimensional picture of walk search: `|pi> = sin(phi)|mu> +
/// cos(phi)|mu_perp>`, with the ideal search operator rotating the plane by
/// `2 phi`.
#[derive(Debug, Clone)]
pub struct SearchGeometry {
    pub pi_state: Vec<C64>,
    pub mu: Vec<C64>,
    pub mu_perp: Vec<C64>,
    pub phi: f64,
    pub p_marked: f64,
}

pub fn geometry(walk: &WalkOperators, marked: &MarkedSet) -> Result<SearchGeometry> {
    let n = walk.n();
    if marked.n() != n {
        return Err(Error::Validation(format!("marked set over {} states for a chain of {n}", marked.n())));
    }
    let pi = walk.chain().pi();
    let p_marked = marked_fraction(pi, marked);
    if p_marked >= 1.0 - 1e-15 {
        return Err(Error::Geometry("every state is marked; mu_perp is undefined".into()));
    }
    let pi_state = walk.pi_state(None);
    let mut mu = vec![ZERO; n * n];
    for &x in marked.members() {
        let row = x * n..(x + 1) * n;
        mu[row.clone()].copy_from_slice(&pi_state[row]);
    }
    mu.iter_mut().for_each(|z| *z /= p_marked.sqrt());
    let phi = p_marked.sqrt().asin();
    let mu_perp: Vec<C64> =
        pi_state.iter().zip(&mu).map(|(p, m)| (p - m * phi.sin()) / phi.cos()).collect();
    Ok(SearchGeometry { pi_state, mu, mu_perp, phi, p_marked })
}

impl SearchGeometry {
    /// `(|mu> + sign i |mu_perp>) / sqrt 2`, padded with workspace
    /// coordinate 0 of a `workspace`-dimensional register.
    pub fn psi(&self, sign: f64, workspace: usize) -> Vec<C64> {
        let i = C64::new(0.0, sign);
        let mut out = vec![ZERO; self.mu.len() * workspace];
        for (p, (m, q)) in self.mu.iter().zip(&self.mu_perp).enumerate() {
            out[p * workspace] = (m + i * q) / 2f64.sqrt();
        }
        out
    }

    pub fn psi_plus(&self, workspace: usize) -> Vec<C64> {
        self.psi(1.0, workspace)
    }

    pub fn psi_minus(&self, workspace: usize) -> Vec<C64> {
        self.psi(-1.0, workspace)
    }

    /// Coefficients of `|pi>` along `|Psi+>` and `|Psi->`.
    pub fn decomposition(&self) -> (C64, C64) {
        let i = C64::new(0.0, 1.0);
        let s = 2f64.sqrt();
        (-i * C64::from_polar(1.0, self.phi) / s, i * C64::from_polar(1.0, -self.phi) / s)
    }

    /// `(<mu_perp|v>, <mu|v>)`.
    pub fn plane_coordinates(&self, v: &[C64]) -> (C64, C64) {
        (dot(&self.mu_perp, v), dot(&self.mu, v))
    }

    pub fn unit_check(&self) -> f64 {
        (norm(&self.mu) - 1.0).abs().max((norm(&self.mu_perp) - 1.0).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Operator;
    use crate::markov::{complete_graph_chain, johnson_chain, MarkovChain};
    use crate::walk::{distance, validated};
    use std::f64::consts::PI;

    fn ideal_u(w: &WalkOperators, marked: &MarkedSet, v: &mut [C64]) {
        w.v0(marked, None).apply_slice(v);
        w.ideal_reflection().apply_slice(v);
    }

    #[test]
    fn complete_graph_angles() {
        let w = validated(complete_graph_chain(4).unwrap()).unwrap();
        let g = geometry(&w, &MarkedSet::new(4, [3]).unwrap()).unwrap();
        assert!((g.phi - PI / 6.0).abs() < 1e-12);
        let w16 = validated(complete_graph_chain(16).unwrap()).unwrap();
        let g16 = geometry(&w16, &MarkedSet::new(16, 0..4).unwrap()).unwrap();
        assert!((g16.phi - PI / 6.0).abs() < 1e-12);
        assert!(matches!(geometry(&w, &MarkedSet::new(4, 0..4).unwrap()), Err(Error::Geometry(_))));
    }

    #[test]
    fn plane_is_orthonormal_and_spans_pi() {
        let chains = [
            complete_graph_chain(4).unwrap(),
            MarkovChain::from_rows("two", &[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap(),
            johnson_chain(6, 2).unwrap(),
        ];
        for c in chains {
            let n = c.n();
            let w = validated(c).unwrap();
            let g = geometry(&w, &MarkedSet::new(n, [n - 1]).unwrap()).unwrap();
            assert!(dot(&g.mu, &g.mu_perp).norm() < 1e-9);
            assert!(g.unit_check() < 1e-9);
            let rebuilt: Vec<C64> =
                g.mu.iter().zip(&g.mu_perp).map(|(m, q)| m * g.phi.sin() + q * g.phi.cos()).collect();
            assert!(distance(&rebuilt, &g.pi_state) < 1e-9);
            assert!((norm(&g.psi_plus(1)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_states_are_eigenvectors_of_the_ideal_operator() {
        let w = validated(complete_graph_chain(4).unwrap()).unwrap();
        let m = MarkedSet::new(4, [3]).unwrap();
        let g = geometry(&w, &m).unwrap();
        for sign in [1.0, -1.0] {
            let psi = g.psi(sign, 1);
            let mut v = psi.clone();
            ideal_u(&w, &m, &mut v);
            let want: Vec<C64> = psi.iter().map(|z| z * C64::from_polar(1.0, sign * 2.0 * g.phi)).collect();
            assert!(distance(&v, &want) < 1e-8);
        }
    }

    #[test]
    fn decomposition_into_rotation_eigenvectors() {
        let w = validated(complete_graph_chain(5).unwrap()).unwrap();
        let m = MarkedSet::new(5, [1, 4]).unwrap();
        let g = geometry(&w, &m).unwrap();
        let (a, b) = g.decomposition();
        assert!((a.norm_sqr() - 0.5).abs() < 1e-12 && (b.norm_sqr() - 0.5).abs() < 1e-12);
        let (pp, pm) = (g.psi_plus(1), g.psi_minus(1));
        let rebuilt: Vec<C64> = pp.iter().zip(&pm).map(|(p, q)| a * p + b * q).collect();
        assert!(distance(&rebuilt, &g.pi_state) < 1e-8);
        // with doubled phases the same combination misses |pi>
        let i = C64::new(0.0, 1.0);
        let s = 2f64.sqrt();
        let (a2, b2) = (-i * C64::from_polar(1.0, 2.0 * g.phi) / s, i * C64::from_polar(1.0, -2.0 * g.phi) / s);
        let doubled: Vec<C64> = pp.iter().zip(&pm).map(|(p, q)| a2 * p + b2 * q).collect();
        assert!(distance(&doubled, &g.pi_state) > 0.1);
    }

    #[test]
    fn ideal_operator_rotates_the_plane() {
        let w = validated(complete_graph_chain(4).unwrap()).unwrap();
        let m = MarkedSet::new(4, [3]).unwrap();
        let g = geometry(&w, &m).unwrap();
        let (c2, s2) = ((2.0 * g.phi).cos(), (2.0 * g.phi).sin());
        let mut u = g.mu_perp.clone();
        ideal_u(&w, &m, &mut u);
        let (a, b) = g.plane_coordinates(&u);
        assert!((a - C64::new(c2, 0.0)).norm() < 1e-8 && (b - C64::new(s2, 0.0)).norm() < 1e-8);
        let mut v = g.mu.clone();
        ideal_u(&w, &m, &mut v);
        let (a, b) = g.plane_coordinates(&v);
        assert!((a - C64::new(-s2, 0.0)).norm() < 1e-8 && (b - C64::new(c2, 0.0)).norm() < 1e-8);
        // one step from |pi> lands on |mu> since sin(3 pi/6) = 1
        let mut p = g.pi_state.clone();
        ideal_u(&w, &m, &mut p);
        assert!((dot(&g.mu, &p).norm_sqr() - 1.0).abs() < 1e-9);
        // two steps on |mu_perp>
        let mut q = g.mu_perp.clone();
        ideal_u(&w, &m, &mut q);
        ideal_u(&w, &m, &mut q);
        assert!((dot(&g.mu_perp, &q).re + 0.5).abs() < 1e-9);
    }
}
