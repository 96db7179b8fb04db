use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{ExprError, Expression};
use crate::linalg::RMat;

use super::{gauss_hermite, hermite_functions, QuadratureRule, MAX_ORDER};

/// Tensor-product basis of scaled Hermite functions
/// `h_n((x - c)/ℓ)/√ℓ`, `n < modes`, in each coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasis {
    dimension: usize,
    modes: usize,
    scales: Vec<f64>,
    centers: Vec<f64>,
    kinetic_coefficient: f64,
    quadrature_order: usize,
}

impl HermiteBasis {
    /// Basis centered at the origin with the default quadrature order
    /// `2·modes + 16`.
    pub fn new(dimension: usize, modes: usize, scales: &[f64], kinetic_coefficient: f64) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidInput(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if modes < 4 {
            return Err(Error::InvalidInput(format!("need at least 4 modes, got {modes}")));
        }
        if scales.len() != dimension || scales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "need {dimension} positive length scales, got {scales:?}"
            )));
        }
        if !(kinetic_coefficient > 0.0 && kinetic_coefficient.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kinetic coefficient must be positive, got {kinetic_coefficient}"
            )));
        }
        let quadrature_order = (2 * modes + 16).min(MAX_ORDER);
        if quadrature_order < 2 * modes {
            return Err(Error::InvalidInput(format!("{modes} modes exceed the quadrature limit")));
        }
        Ok(HermiteBasis {
            dimension,
            modes,
            scales: scales.to_vec(),
            centers: vec![0.0; dimension],
            kinetic_coefficient,
            quadrature_order,
        })
    }

    pub fn with_centers(mut self, centers: &[f64]) -> Result<Self> {
        if centers.len() != self.dimension || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need {} finite centers, got {centers:?}",
                self.dimension
            )));
        }
        self.centers = centers.to_vec();
        Ok(self)
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Result<Self> {
        if order < 2 * self.modes || order > MAX_ORDER {
            return Err(Error::InvalidInput(format!(
                "quadrature order {order} must lie in {}..={MAX_ORDER}",
                2 * self.modes
            )));
        }
        self.quadrature_order = order;
        Ok(self)
    }

    /// Same parameters with a different number of modes; the quadrature
    /// order keeps its margin over `2·modes`.
    pub fn with_modes(&self, modes: usize) -> Result<Self> {
        let margin = self.quadrature_order.saturating_sub(2 * self.modes);
        HermiteBasis::new(self.dimension, modes, &self.scales, self.kinetic_coefficient)?
            .with_centers(&self.centers)?
            .with_quadrature_order((2 * modes + margin).min(MAX_ORDER))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn kinetic_coefficient(&self) -> f64 {
        self.kinetic_coefficient
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    /// Total number of basis functions, `modes^dimension`.
    pub fn size(&self) -> usize {
        self.modes.pow(self.dimension as u32)
    }

    /// Per-coordinate mode numbers of basis index `i`; the last coordinate
    /// varies fastest.
    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        match self.dimension {
            1 => vec![i],
            _ => vec![i / self.modes, i % self.modes],
        }
    }

    /// Matrix of `c·(-Δ)`, exact in the truncated basis.
    pub fn kinetic_matrix(&self) -> RMat {
        let factors: Vec<RMat> = self.scales.iter().map(|&l| self.kinetic_1d(l)).collect();
        if self.dimension == 1 {
            return factors[0].clone();
        }
        let eye = RMat::identity(self.modes, self.modes);
        factors[0].kronecker(&eye) + eye.kronecker(&factors[1])
    }

    fn kinetic_1d(&self, scale: f64) -> RMat {
        let n = self.modes;
        let c = self.kinetic_coefficient / (scale * scale);
        let mut k = RMat::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = c * (2.0 * i as f64 + 1.0) / 2.0;
            if i + 2 < n {
                let v = -c * (((i + 1) * (i + 2)) as f64).sqrt() / 2.0;
                k[(i, i + 2)] = v;
                k[(i + 2, i)] = v;
            }
        }
        k
    }

    pub fn quadrature(&self) -> Result<QuadratureRule> {
        gauss_hermite(self.quadrature_order)
    }

    /// Physical quadrature nodes `c + ℓ ξ_k` along one axis.
    pub fn axis_nodes(&self, rule: &QuadratureRule, axis: usize) -> Vec<f64> {
        rule.nodes
            .iter()
            .map(|&xi| self.centers[axis] + self.scales[axis] * xi)
            .collect()
    }

    /// Every tensor quadrature point in physical coordinates.
    pub fn quadrature_points(&self) -> Result<Vec<Vec<f64>>> {
        let rule = self.quadrature()?;
        let axes: Vec<Vec<f64>> = (0..self.dimension).map(|d| self.axis_nodes(&rule, d)).collect();
        Ok(match self.dimension {
            1 => axes[0].iter().map(|&x| vec![x]).collect(),
            _ => axes[0]
                .iter()
                .flat_map(|&x1| axes[1].iter().map(move |&x2| vec![x1, x2]))
                .collect(),
        })
    }

    /// Galerkin matrix of multiplication by `f`.
    pub fn potential_matrix(&self, f: &Expression) -> Result<RMat> {
        if f.dimension() != self.dimension {
            return Err(Error::InvalidInput(format!(
                "expression is {}-dimensional, basis is {}-dimensional",
                f.dimension(),
                self.dimension
            )));
        }
        self.potential_matrix_with(|p| f.evaluate(p))
    }

    /// Galerkin matrix of multiplication by an arbitrary function, by
    /// tensor Gauss–Hermite quadrature.
    pub fn potential_matrix_with<F>(&self, f: F) -> Result<RMat>
    where
        F: Fn(&[f64]) -> std::result::Result<f64, ExprError> + Sync,
    {
        let rule = self.quadrature()?;
        let m = rule.order;
        let n = self.modes;
        // table[k, i] = h_i(ξ_k)
        let mut table = RMat::zeros(m, n);
        for (k, &xi) in rule.nodes.iter().enumerate() {
            for (i, h) in hermite_functions(n, xi).into_iter().enumerate() {
                table[(k, i)] = h;
            }
        }
        let check = |v: f64, p: &[f64]| -> Result<f64> {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Assembly(format!("non-finite value {v} at {p:?}")))
            }
        };
        let mut out = if self.dimension == 1 {
            let nodes = self.axis_nodes(&rule, 0);
            let mut weighted = table.clone();
            for k in 0..m {
                let p = [nodes[k]];
                let v = check(f(&p)?, &p)?;
                let s = rule.scaled_weights[k] * v;
                weighted.row_mut(k).scale_mut(s);
            }
            table.transpose() * weighted
        } else {
            let x1 = self.axis_nodes(&rule, 0);
            let x2 = self.axis_nodes(&rule, 1);
            // g[k1, i2*n + j2] = Σ_{k2} w_{k2} f(x1_{k1}, x2_{k2}) h_{i2} h_{j2}
            let rows: Vec<Result<Vec<f64>>> = (0..m)
                .into_par_iter()
                .map(|k1| {
                    let mut weighted = table.clone();
                    for k2 in 0..m {
                        let p = [x1[k1], x2[k2]];
                        let v = check(f(&p)?, &p)?;
                        weighted.row_mut(k2).scale_mut(rule.scaled_weights[k2] * v);
                    }
                    let g = table.transpose() * weighted;
                    Ok((0..n * n).map(|idx| g[(idx / n, idx % n)]).collect())
                })
                .collect();
            let mut g = RMat::zeros(m, n * n);
            for (k1, row) in rows.into_iter().enumerate() {
                for (idx, v) in row?.into_iter().enumerate() {
                    g[(k1, idx)] = v;
                }
            }
            let p = RMat::from_fn(n * n, m, |idx, k1| {
                rule.scaled_weights[k1] * table[(k1, idx / n)] * table[(k1, idx % n)]
            });
            let r = p * g;
            RMat::from_fn(n * n, n * n, |row, col| {
                let (i1, i2) = (row / n, row % n);
                let (j1, j2) = (col / n, col % n);
                r[(i1 * n + j1, i2 * n + j2)]
            })
        };
        let sym = 0.5 * (&out + out.transpose());
        out.copy_from(&sym);
        Ok(out)
    }

    /// Parity eigenvalue `(-1)^{Σ n_d}` over the flagged coordinates for
    /// each basis function; exact representation of the reflection about
    /// the basis centers.
    pub fn parity_signs(&self, flags: &[bool]) -> Vec<f64> {
        (0..self.size())
            .map(|i| {
                let total: usize = self
                    .multi_index(i)
                    .iter()
                    .zip(flags)
                    .filter(|(_, &f)| f)
                    .map(|(n, _)| n)
                    .sum();
                if total % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    /// Values of all basis functions at a physical point.
    pub fn basis_values(&self, point: &[f64]) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dimension)
            .map(|d| {
                let l = self.scales[d];
                hermite_functions(self.modes, (point[d] - self.centers[d]) / l)
                    .into_iter()
                    .map(|h| h / l.sqrt())
                    .collect()
            })
            .collect();
        (0..self.size())
            .map(|i| {
                self.multi_index(i)
                    .iter()
                    .enumerate()
                    .map(|(d, &k)| per_axis[d][k])
                    .product()
            })
            .collect()
    }
}
