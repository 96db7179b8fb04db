//! Hermite-function spectral bases, Gauss–Hermite quadrature, and a
//! finite-difference grid used as an independent check.

mod fd;
mod hermite;
mod quadrature;

pub use fd::{richardson_eigenvalues, FdGrid};
pub use hermite::HermiteBasis;
pub use quadrature::{gauss_hermite, QuadratureRule, MAX_ORDER};

/// Orthonormal Hermite functions `h_0(x) .. h_{n-1}(x)`, with
/// `h_n(x) = H_n(x) e^{-x²/2} / √(2ⁿ n! √π)`.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n);
    if n == 0 {
        return h;
    }
    h.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n > 1 {
        h.push(std::f64::consts::SQRT_2 * x * h[0]);
    }
    for k in 2..n {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * x * h[k - 1] - ((kf - 1.0) / kf).sqrt() * h[k - 2];
        h.push(next);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let q = gauss_hermite(60).unwrap();
        let n = 25;
        let table: Vec<Vec<f64>> = q.nodes.iter().map(|&x| hermite_functions(n, x)).collect();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = table
                    .iter()
                    .zip(&q.scaled_weights)
                    .map(|(h, w)| w * h[i] * h[j])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-13, "({i},{j}) = {s}");
            }
        }
    }

    #[test]
    fn low_order_closed_forms() {
        let x = 0.7_f64;
        let h = hermite_functions(3, x);
        let g = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
        assert!((h[0] - g).abs() < 1e-16);
        assert!((h[1] - std::f64::consts::SQRT_2 * x * g).abs() < 1e-16);
        assert!((h[2] - (2.0 * x * x - 1.0) / std::f64::consts::SQRT_2 * g).abs() < 1e-15);
    }
}
