use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    WeightedBce,
    Focal,
}

/// Mean loss over a batch and its gradient with respect to the logits.
///
/// `class_weights` is `[negative, positive]`. For focal loss the class
/// weight plays the role of `alpha_y`. Probabilities are clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn loss(
    kind: LossKind,
    probs: &[f64],
    labels: &[bool],
    class_weights: &[f64],
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    if class_weights.len() != 2 {
        return Err(Error::InvalidWeights(format!(
            "expected 2 class weights, got {}",
            class_weights.len()
        )));
    }
    if class_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights(format!("{class_weights:?}")));
    }
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let n = probs.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let w = class_weights[y as usize];
        // probability of the true class and d p_t / d z = s p_t (1 - p_t)
        let (p_t, s) = if y { (p, 1.0) } else { (1.0 - p, -1.0) };
        match kind {
            LossKind::WeightedBce => {
                total -= w * p_t.ln();
                grad.push(w * (p - y as u8 as f64) / n);
            }
            LossKind::Focal => {
                let q = 1.0 - p_t;
                total -= w * q.powf(gamma) * p_t.ln();
                let g = w * s * (gamma * q.powf(gamma) * p_t * p_t.ln() - q.powf(gamma + 1.0));
                grad.push(g / n);
            }
        }
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn focal_gamma_zero_is_bce() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs: Vec<f64> = (0..50).map(|_| rng.random_range(0.01..0.99)).collect();
        let labels: Vec<bool> = (0..50).map(|_| rng.random()).collect();
        let (a, ga) = loss(LossKind::Focal, &probs, &labels, &[1.0, 1.0], 0.0).unwrap();
        let (b, gb) = loss(LossKind::WeightedBce, &probs, &labels, &[1.0, 1.0], 2.0).unwrap();
        assert_eq!(a, b);
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn focal_vanishes_on_perfect_prediction() {
        let (v, _) = loss(LossKind::Focal, &[1.0, 0.0], &[true, false], &[1.0, 1.0], 2.0).unwrap();
        assert!(v < 1e-20);
    }

    #[test]
    fn wrong_weight_arity() {
        assert!(matches!(
            loss(LossKind::WeightedBce, &[0.5], &[true], &[1.0], 2.0),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [LossKind::WeightedBce, LossKind::Focal] {
            for _ in 0..20 {
                let z: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
                let labels: Vec<bool> = (0..8).map(|_| rng.random()).collect();
                let w = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
                let gamma = rng.random_range(0.0..3.0);
                let f = |z: &[f64]| {
                    let p: Vec<f64> = z.iter().map(|v| sigmoid(*v)).collect();
                    loss(kind, &p, &labels, &w, gamma).unwrap()
                };
                let (_, g) = f(&z);
                for i in 0..8 {
                    let h = 1e-5;
                    let mut zp = z.clone();
                    zp[i] += h;
                    let mut zm = z.clone();
                    zm[i] -= h;
                    let fd = (f(&zp).0 - f(&zm).0) / (2.0 * h);
                    let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs());
                    assert!(rel < 1e-4, "{kind:?} grad {} vs fd {fd}", g[i]);
                }
            }
        }
    }
}
