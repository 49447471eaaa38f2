use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub const DEFAULT_OU_THETA: f64 = 0.15;
pub const DEFAULT_OU_SIGMA: f64 = 0.2;

/// Discrete Ornstein-Uhlenbeck process around zero:
/// `x ← x + θ·(0 − x) + σ·N(0, 1)`.
#[derive(Debug, Clone)]
pub struct OuNoise<T> {
    state: T,
    theta: T,
    sigma: T,
    rng: ChaCha8Rng,
}

impl<T: Scalar> OuNoise<T> {
    pub fn new(theta: T, sigma: T, seed: u64) -> Self {
        OuNoise {
            state: T::zero(),
            theta,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reset(&mut self) {
        self.state = T::zero();
    }

    pub fn state(&self) -> T {
        self.state
    }

    pub fn sample(&mut self) -> T {
        let g: f64 = StandardNormal.sample(&mut self.rng);
        self.state = self.state - self.theta * self.state + self.sigma * T::lit(g);
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_the_recurrence() {
        let mut noise = OuNoise::<f64>::new(0.15, 0.2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = 0.0f64;
        for _ in 0..100 {
            let g: f64 = StandardNormal.sample(&mut rng);
            x = x + 0.15 * (0.0 - x) + 0.2 * g;
            assert!((noise.sample() - x).abs() < 1e-15);
        }
    }

    #[test]
    fn reset_zeroes_state() {
        let mut noise = OuNoise::<f32>::new(0.15, 0.2, 1);
        noise.sample();
        assert_ne!(noise.state(), 0.0);
        noise.reset();
        assert_eq!(noise.state(), 0.0);
    }

    #[test]
    fn stationary_variance() {
        // Var = σ² / (1 − (1 − θ)²)
        let mut noise = OuNoise::<f64>::new(0.15, 0.2, 2);
        for _ in 0..1000 {
            noise.sample();
        }
        let n = 400_000;
        let mean_sq = (0..n).map(|_| noise.sample().powi(2)).sum::<f64>() / n as f64;
        let expected = 0.04 / (1.0 - 0.85f64.powi(2));
        assert!((mean_sq / expected - 1.0).abs() < 0.05, "{mean_sq} vs {expected}");
    }
}
