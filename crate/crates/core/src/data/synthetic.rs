//! Seeded synthetic binary-classification data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Features};
use crate::{Error, Result};

/// Generates `n` examples of dimension `dim`: features are standard Gaussian,
/// labels are `sign(<w*, x>)` for a hidden seeded `w*`, each flipped with
/// probability `label_noise`. Deterministic per seed.
pub fn generate_synthetic_logistic(
    n: usize,
    dim: usize,
    seed: u64,
    label_noise: f64,
) -> Result<Dataset> {
    if n == 0 || dim == 0 {
        return Err(Error::invalid("n and dim must be at least 1"));
    }
    if !(0.0..1.0).contains(&label_noise) {
        return Err(Error::invalid("label_noise must lie in [0, 1)"));
    }
    // Independent sub-streams for the hidden separator, the features, and the
    // label flips, all derived from the one seed.
    let mut w_rng = ChaCha8Rng::seed_from_u64(super::stream_key(seed, 0, 0, 0));
    let mut x_rng = ChaCha8Rng::seed_from_u64(super::stream_key(seed, 1, 0, 0));
    let mut flip_rng = ChaCha8Rng::seed_from_u64(super::stream_key(seed, 2, 0, 0));

    let w_star: Vec<f64> = (0..dim).map(|_| w_rng.sample(StandardNormal)).collect();

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..dim).map(|_| x_rng.sample(StandardNormal)).collect();
        let margin = crate::vecmath::dot(&w_star, &row);
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if flip_rng.random::<f64>() < label_noise {
            label = -label;
        }
        rows.push(row);
        labels.push(label);
    }
    Dataset::new(dim, Features::Dense(rows), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic_logistic(4, 2, 7, 0.0).unwrap();
        let b = generate_synthetic_logistic(4, 2, 7, 0.0).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_logistic(4, 2, 8, 0.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flip_fraction_matches_noise() {
        let n = 20_000;
        let clean = generate_synthetic_logistic(n, 5, 11, 0.0).unwrap();
        let noisy = generate_synthetic_logistic(n, 5, 11, 0.5).unwrap();
        // Same feature stream, so labels differ exactly where a flip fired.
        let flips = clean
            .labels()
            .iter()
            .zip(noisy.labels())
            .filter(|(a, b)| a != b)
            .count();
        let frac = flips as f64 / n as f64;
        let se = (0.5 * 0.5 / n as f64).sqrt();
        assert!(
            (frac - 0.5).abs() <= 4.0 * se,
            "flip fraction {frac} outside 4 SE of 0.5"
        );
    }

    #[test]
    fn noiseless_data_is_linearly_separable() {
        // train-and-check oracle: an unregularized logistic fit reaches
        // training accuracy 1.0 on noise-free data
        let ds = generate_synthetic_logistic(64, 4, 23, 0.0).unwrap();
        let accuracy = |w: &[f64]| {
            (0..ds.n())
                .filter(|&i| {
                    let pred = if ds.row_dot(i, w) >= 0.0 { 1.0 } else { -1.0 };
                    pred == ds.labels()[i]
                })
                .count() as f64
                / ds.n() as f64
        };
        let l = (0..ds.n())
            .map(|i| ds.row_norm_sq(i))
            .fold(0.0f64, f64::max)
            / 4.0;
        let eta = 1.0 / l;
        let mut w = vec![0.0; 4];
        let mut acc = accuracy(&w);
        for _ in 0..50_000 {
            if acc == 1.0 {
                break;
            }
            let mut g = vec![0.0; 4];
            for i in 0..ds.n() {
                let y = ds.labels()[i];
                let z = y * ds.row_dot(i, &w);
                let s = 1.0 / (1.0 + z.exp());
                ds.row_axpy(i, -y * s / ds.n() as f64, &mut g);
            }
            for (wk, gk) in w.iter_mut().zip(&g) {
                *wk -= eta * gk;
            }
            acc = accuracy(&w);
        }
        assert_eq!(acc, 1.0, "separable data must be fit exactly");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_synthetic_logistic(0, 2, 1, 0.0).is_err());
        assert!(generate_synthetic_logistic(2, 0, 1, 0.0).is_err());
        assert!(generate_synthetic_logistic(2, 2, 1, 1.0).is_err());
        assert!(generate_synthetic_logistic(2, 2, 1, -0.1).is_err());
    }
}
