use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Expr;

pub const DEFAULT_PARITY_SEED: u64 = 0x5eed_0f_9a7e;

const RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

/// Coordinate reflection `x_i -> 2 c_i - x_i` on the flagged coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub flags: Vec<bool>,
    pub center: Vec<f64>,
}

impl Reflection {
    pub fn about_origin(flags: &[bool]) -> Self {
        Reflection {
            flags: flags.to_vec(),
            center: vec![0.0; flags.len()],
        }
    }

    pub fn new(flags: &[bool], center: &[f64]) -> Self {
        assert_eq!(flags.len(), center.len(), "reflection flags/center length");
        Reflection {
            flags: flags.to_vec(),
            center: center.to_vec(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.flags.len()
    }

    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.flags.iter().zip(&self.center))
            .map(|(&x, (&flip, &c))| if flip { 2.0 * c - x } else { x })
            .collect()
    }
}

/// Numerical parity test: compares `f(x)` and `f(σx)` at pseudo-random
/// points. A function that is identically zero reports `Even`.
///
/// Points where evaluation fails are redrawn; if too many fail the
/// classification is `Neither`.
pub fn detect_parity(
    ast: &Expr,
    reflection: &Reflection,
    sample_count: usize,
    seed: u64,
) -> Parity {
    let samples = sample_count.max(32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut even = true;
    let mut odd = true;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < samples {
        attempts += 1;
        if attempts > 8 * samples {
            return Parity::Neither;
        }
        let point: Vec<f64> = reflection
            .flags
            .iter()
            .zip(&reflection.center)
            .map(|(&flip, &c)| {
                let magnitude = if flip {
                    rng.random_range(0.25..3.0)
                } else {
                    rng.random_range(0.0..3.0)
                };
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                c + sign * magnitude
            })
            .collect();
        let mirrored = reflection.apply(&point);
        let (a, b) = match (ast.evaluate(&point), ast.evaluate(&mirrored)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => continue,
        };
        accepted += 1;
        let scale = a.abs().max(b.abs());
        if (a - b).abs() > RELATIVE_TOLERANCE * scale {
            even = false;
        }
        if (a + b).abs() > RELATIVE_TOLERANCE * scale {
            odd = false;
        }
        if !even && !odd {
            return Parity::Neither;
        }
    }
    if even {
        Parity::Even
    } else if odd {
        Parity::Odd
    } else {
        Parity::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity(src: &str, dim: usize, r: &Reflection) -> Parity {
        detect_parity(&Expr::parse(src, dim).unwrap(), r, 64, DEFAULT_PARITY_SEED)
    }

    #[test]
    fn two_dimensional_perturbation_is_odd_in_x2() {
        let w = "x1^2*x2/(1+x1^2+x2^2)";
        assert_eq!(parity(w, 2, &Reflection::about_origin(&[false, true])), Parity::Odd);
        assert_eq!(parity(w, 2, &Reflection::about_origin(&[true, true])), Parity::Odd);
        assert_eq!(parity(w, 2, &Reflection::about_origin(&[true, false])), Parity::Even);
    }

    #[test]
    fn double_well_is_not_parity_symmetric_about_origin() {
        let r = Reflection::about_origin(&[true]);
        assert_eq!(parity("x^2*(1+x)^2", 1, &r), Parity::Neither);
        // but it is even about the barrier top
        let mid = Reflection::new(&[true], &[-0.5]);
        assert_eq!(parity("x^2*(1+x)^2", 1, &mid), Parity::Even);
        assert_eq!(parity("(x + 1/2)/(1 + (x + 1/2)^2)", 1, &mid), Parity::Odd);
    }

    #[test]
    fn zero_function_reports_even() {
        let r = Reflection::about_origin(&[true]);
        assert_eq!(parity("0", 1, &r), Parity::Even);
        assert_eq!(parity("x - x", 1, &r), Parity::Even);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let r = Reflection::about_origin(&[true]);
        let e = Expr::parse("x^3 + 0.1*x^2", 1).unwrap();
        let a = detect_parity(&e, &r, 40, 7);
        let b = detect_parity(&e, &r, 40, 7);
        assert_eq!(a, b);
        assert_eq!(a, Parity::Neither);
    }

    #[test]
    fn singular_points_are_skipped() {
        let r = Reflection::about_origin(&[true]);
        assert_eq!(parity("1/x", 1, &r), Parity::Odd);
    }
}
