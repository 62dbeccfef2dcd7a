//! Shared low-level samplers.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniform draw from the closed Euclidean unit ball: a normalized Gaussian
/// direction scaled by `U^{1/d}`.
pub fn uniform_ball<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    assert!(d >= 1, "dimension must be positive");
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            let u: f64 = rng.gen::<f64>();
            let r = u.powf(1.0 / d as f64);
            return g * (r / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn samples_stay_in_the_ball() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for d in [1usize, 2, 7] {
            for _ in 0..200 {
                assert!(uniform_ball(d, &mut rng).norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn radius_moment_matches_uniform_law() {
        // E||v|| = d / (d + 1) for the uniform ball.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for d in [2usize, 5] {
            let n = 40_000;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let r = uniform_ball(d, &mut rng).norm();
                sum += r;
                sum2 += r * r;
            }
            let mean = sum / n as f64;
            let sd = (sum2 / n as f64 - mean * mean).sqrt();
            let expect = d as f64 / (d as f64 + 1.0);
            assert!(
                (mean - expect).abs() <= 4.0 * sd / (n as f64).sqrt(),
                "d={d}: mean {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn coordinate_means_vanish() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let d = 3;
        let n = 40_000;
        let mut acc = DVector::zeros(d);
        for _ in 0..n {
            acc += uniform_ball(d, &mut rng);
        }
        acc /= n as f64;
        // per-coordinate SD is about 1/sqrt(d + 2)
        let se = (1.0 / (d as f64 + 2.0)).sqrt() / (n as f64).sqrt();
        for j in 0..d {
            assert!(acc[j].abs() <= 4.0 * se, "coordinate {j} mean {}", acc[j]);
        }
    }
}
