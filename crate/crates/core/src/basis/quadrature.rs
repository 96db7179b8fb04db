use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen_first_components;

use super::hermite_functions;

pub const MAX_ORDER: usize = 512;

/// Gauss–Hermite rule for the weight `e^{-x²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `weights[k]·e^{nodes[k]²}`, the weights against Hermite functions
    /// (which carry their own Gaussian factor). These stay representable
    /// when the plain weights underflow.
    pub scaled_weights: Vec<f64>,
    pub order: usize,
}

/// Golub–Welsch rule of order `m`: nodes are eigenvalues of the Jacobi
/// matrix with off-diagonals `√(k/2)`, refined by Newton on `h_m`.
/// Weights come from the Christoffel function `1/Σ h_n(x)²`, which equals
/// `√π·(first eigenvector component)²` but keeps full relative accuracy
/// in the tails.
pub fn gauss_hermite(m: usize) -> Result<QuadratureRule> {
    if !(2..=MAX_ORDER).contains(&m) {
        return Err(Error::InvalidInput(format!(
            "quadrature order {m} outside 2..={MAX_ORDER}"
        )));
    }
    let off: Vec<f64> = (1..m).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (mut nodes, _) = tridiagonal_eigen_first_components(&vec![0.0; m], &off)?;

    let sqrt_2m = (2.0 * m as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_functions(m + 1, *x);
            let step = h[m] / (sqrt_2m * h[m - 1]);
            if !step.is_finite() {
                break;
            }
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    for i in 0..m / 2 {
        let a = 0.5 * (nodes[m - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[m - 1 - i] = a;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }

    let mut scaled_weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / hermite_functions(m, x).iter().map(|h| h * h).sum::<f64>())
        .collect();
    for i in 0..m / 2 {
        let w = 0.5 * (scaled_weights[i] + scaled_weights[m - 1 - i]);
        scaled_weights[i] = w;
        scaled_weights[m - 1 - i] = w;
    }
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(x, w)| w * (-x * x).exp())
        .collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        scaled_weights,
        order: m,
    })
}

impl QuadratureRule {
    /// `Σ w_k f(x_k)`, approximating `∫ f(x) e^{-x²} dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_point_rule() {
        let q = gauss_hermite(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q.nodes[0] + r).abs() < 1e-15 && (q.nodes[1] - r).abs() < 1e-15);
        for w in &q.weights {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fourth_moment_with_five_points() {
        let q = gauss_hermite(5).unwrap();
        let got = q.integrate(|x| x.powi(4));
        assert!((got - 3.0 * PI.sqrt() / 4.0).abs() < 1e-13);
    }

    #[test]
    fn second_moment_with_64_points() {
        let q = gauss_hermite(64).unwrap();
        assert!((q.integrate(|x| x * x) - PI.sqrt() / 2.0).abs() < 1e-12);
        assert!((q.weights.iter().sum::<f64>() - PI.sqrt()).abs() < 1e-12 * PI.sqrt());
    }

    #[test]
    fn nodes_increasing_and_symmetric() {
        for m in [3, 16, 97, 200, MAX_ORDER] {
            let q = gauss_hermite(m).unwrap();
            assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
            for i in 0..m {
                assert_eq!(q.nodes[i], -q.nodes[m - 1 - i]);
            }
            assert!(q.scaled_weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn christoffel_weights_match_eigenvector_weights() {
        let m = 40;
        let off: Vec<f64> = (1..m).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let (_, first) = tridiagonal_eigen_first_components(&vec![0.0; m], &off).unwrap();
        let q = gauss_hermite(m).unwrap();
        for (w, z) in q.weights.iter().zip(&first) {
            let golub_welsch = PI.sqrt() * z * z;
            assert!((w - golub_welsch).abs() <= 1e-10 * w.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert!(gauss_hermite(1).is_err());
        assert!(gauss_hermite(MAX_ORDER + 1).is_err());
    }
}
