use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Analytic test functions with known global minima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// Minimum 0 at the origin.
    Sphere,
    /// Minimum 0 at the origin.
    Rastrigin,
    /// Minimum 0 at all-ones.
    Rosenbrock,
}

impl BenchmarkKind {
    /// Conventional search box per coordinate.
    pub fn domain(self) -> (f64, f64) {
        match self {
            BenchmarkKind::Sphere => (-5.0, 5.0),
            BenchmarkKind::Rastrigin => (-5.12, 5.12),
            BenchmarkKind::Rosenbrock => (-2.048, 2.048),
        }
    }
}

pub fn benchmark(kind: BenchmarkKind, x: &[f64]) -> f64 {
    match kind {
        BenchmarkKind::Sphere => x.iter().map(|v| v * v).sum(),
        BenchmarkKind::Rastrigin => {
            10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
        }
        BenchmarkKind::Rosenbrock => x
            .windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum(),
    }
}
