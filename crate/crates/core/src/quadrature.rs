//! Gauss–Legendre rules mapped to `[0, 1]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    /// Nodes on `[-1, 1]`.
    pub points: Vec<f64>,
    /// Weights on `[-1, 1]`, summing to 2.
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order).expect("quadrature order must be positive");
        let rule = GaussLegendre::new(order);
        let (points, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Self { points, weights }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// `(t, w)` pairs with `Σ w f(t) ≈ ∫₀^b f`.
    pub fn scaled(&self, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&p, &w)| (0.5 * (1.0 + p) * b, 0.5 * w * b))
    }

    pub fn integrate_unit(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.scaled(1.0).map(|(t, w)| w * f(t)).sum()
    }
}
