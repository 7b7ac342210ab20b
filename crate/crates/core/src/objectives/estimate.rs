//! Empirical estimation of the declared constants from probe points.

use super::{full_gradient, value, Objective, SmoothnessConstants};
use crate::data::SamplerStream;
use crate::{Error, Result};

const BATCH_SIZES: [usize; 4] = [1, 2, 4, 8];

/// Estimates `(L, mu, C, sigma_sq)` empirically:
///
/// * `L^` — maximum of `||grad F(x) - grad F(y)|| / ||x - y||` over all probe
///   pairs,
/// * `mu^` — minimum of `(1/2) ||grad F||^2 / (F - F*)` over probes (requires
///   a declared `F*`),
/// * `(C^, sigma^2^)` — least-squares fit of the Monte-Carlo variance
///   `E||g~ - g||^2` against `||g||^2` and `1/B` across probes and batch
///   sizes, clamped to be nonnegative.
///
/// The returned constants carry the objective's declared `F*` through.
pub fn estimate_constants(
    obj: &dyn Objective,
    probe_points: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<SmoothnessConstants> {
    if probe_points.len() < 2 {
        return Err(Error::invalid("need at least 2 probe points"));
    }
    if trials < 100 {
        return Err(Error::invalid("need at least 100 trials"));
    }
    let f_star = obj.constants().f_star.ok_or(Error::FStarUnknown)?;

    let grads: Vec<Vec<f64>> = probe_points
        .iter()
        .map(|x| full_gradient(obj, x))
        .collect::<Result<_>>()?;

    let mut l_hat = 0.0f64;
    for i in 0..probe_points.len() {
        for j in (i + 1)..probe_points.len() {
            let dx = crate::vecmath::dist_sq(&probe_points[i], &probe_points[j]).sqrt();
            if dx < 1e-12 {
                continue;
            }
            let dg = crate::vecmath::dist_sq(&grads[i], &grads[j]).sqrt();
            l_hat = l_hat.max(dg / dx);
        }
    }

    let mut mu_hat = f64::MAX;
    for (x, g) in probe_points.iter().zip(&grads) {
        let gap = value(obj, x)? - f_star;
        if gap <= 1e-12 {
            continue; // 0/0 at the optimum
        }
        mu_hat = mu_hat.min(0.5 * crate::vecmath::norm_sq(g) / gap);
    }
    if mu_hat == f64::MAX {
        return Err(Error::invalid(
            "all probe points sit at the optimum; cannot estimate mu",
        ));
    }

    let (c_hat, sigma_sq_hat) = if obj.n_points() == 0 {
        (0.0, 0.0) // the stochastic gradient is exact
    } else {
        fit_variance_model(obj, probe_points, &grads, trials, seed)?
    };

    SmoothnessConstants::new(
        l_hat.max(mu_hat),
        mu_hat,
        c_hat,
        sigma_sq_hat,
        Some(f_star),
    )
}

/// Least squares for `v ~= C u + s w` with `u = ||g||^2`, `w = 1/B`.
fn fit_variance_model(
    obj: &dyn Objective,
    probes: &[Vec<f64>],
    grads: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = obj.n_points();
    let mut suu = 0.0;
    let mut suw = 0.0;
    let mut sww = 0.0;
    let mut suv = 0.0;
    let mut swv = 0.0;
    let mut sg = vec![0.0; obj.dim()];
    for (pi, (x, g)) in probes.iter().zip(grads).enumerate() {
        let u = crate::vecmath::norm_sq(g);
        for &b in &BATCH_SIZES {
            let w = 1.0 / b as f64;
            let stream = SamplerStream::new(seed, pi as u32, b as u64);
            let mut v = 0.0;
            for t in 0..trials {
                let batch = stream.draw_batch(t as u64, n, b)?;
                super::stochastic_gradient_into(obj, x, &batch, &mut sg)?;
                v += crate::vecmath::dist_sq(&sg, g);
            }
            v /= trials as f64;
            suu += u * u;
            suw += u * w;
            sww += w * w;
            suv += u * v;
            swv += w * v;
        }
    }
    let det = suu * sww - suw * suw;
    let (c, s) = if det.abs() > 1e-12 * suu.max(sww).max(1.0) {
        (
            (suv * sww - swv * suw) / det,
            (swv * suu - suv * suw) / det,
        )
    } else {
        // degenerate design (e.g. all gradients equal): attribute everything
        // to the additive term
        (0.0, if sww > 0.0 { swv / sww } else { 0.0 })
    };
    Ok((c.max(0.0), s.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{EnsembleObjective, QuadraticObjective};

    #[test]
    fn recovers_quadratic_spectrum() {
        // F(x) = 1/2 x^T diag(1,4) x: L^ in [3.9, 4.0], mu^ in [0.95, 1.0]
        // on a probe set containing the axis directions.
        let q = QuadraticObjective::new(vec![1.0, 4.0], None).unwrap();
        let mut probes = crate::objectives::test_util::seeded_points(2, 20, 2.0, 3);
        probes.push(vec![0.0, 0.0]);
        probes.push(vec![1.0, 0.0]);
        probes.push(vec![0.0, 1.0]);
        let est = estimate_constants(&q, &probes, 100, 1).unwrap();
        assert!(
            (3.9..=4.0 + 1e-9).contains(&est.l),
            "L estimate {} out of range",
            est.l
        );
        assert!(
            (0.95..=1.0 + 1e-9).contains(&est.mu),
            "mu estimate {} out of range",
            est.mu
        );
        assert_eq!(est.c, 0.0);
        assert_eq!(est.sigma_sq, 0.0);
    }

    #[test]
    fn deterministic_ensemble_has_zero_variance() {
        // every f_i identical -> sigma^2 ~ 0, C ~ 0
        let centers = vec![vec![1.5, -0.5]; 12];
        let ens = EnsembleObjective::new(centers).unwrap();
        let probes = crate::objectives::test_util::seeded_points(2, 4, 2.0, 5);
        let est = estimate_constants(&ens, &probes, 200, 2).unwrap();
        assert!(est.sigma_sq < 1e-12);
        assert!(est.c < 1e-12);
    }

    #[test]
    fn recovers_ensemble_variance_within_ten_percent() {
        // centers sampled from a known distribution: the analytic additive
        // variance is the trace population variance of the centers.
        let ens = EnsembleObjective::seeded(200, 4, 1.0, 42).unwrap();
        let analytic = ens.constants().sigma_sq;
        let probes = crate::objectives::test_util::seeded_points(4, 4, 1.5, 6);
        let est = estimate_constants(&ens, &probes, 2000, 3).unwrap();
        assert!(
            (est.sigma_sq - analytic).abs() <= 0.1 * analytic,
            "sigma_sq estimate {} vs analytic {analytic}",
            est.sigma_sq
        );
        // C is 0 for the ensemble; the fitted coefficient must stay near it
        // relative to the probe gradient scale (||g||^2 ~ a few).
        assert!(est.c.abs() <= 0.1, "C estimate {} too large", est.c);
    }

    #[test]
    fn requires_probes_trials_and_f_star() {
        let q = QuadraticObjective::unit(2);
        let probes = crate::objectives::test_util::seeded_points(2, 3, 1.0, 4);
        assert!(estimate_constants(&q, &probes[..1], 100, 0).is_err());
        assert!(estimate_constants(&q, &probes, 99, 0).is_err());

        let data = crate::data::generate_synthetic_logistic(10, 2, 1, 0.0).unwrap();
        let mut logit = crate::objectives::LogisticObjective::new(data, 1e-2).unwrap();
        // forget F* to exercise the error path
        logit.constants_mut().f_star = None;
        let probes2 = crate::objectives::test_util::seeded_points(2, 3, 1.0, 4);
        assert!(matches!(
            estimate_constants(&logit, &probes2, 100, 0),
            Err(Error::FStarUnknown)
        ));
    }
}
