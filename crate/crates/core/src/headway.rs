//! Log-normal headway spacings.

use rand::Rng;
use rand_distr::StandardNormal;

/// Spacing law for the points of one lane: i.i.d. log-normal(mu, sigma).
/// `sigma == 0` is the deterministic lattice with spacing `e^mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingLaw {
    mu: f64,
    sigma: f64,
    fixed: f64,
}

impl SpacingLaw {
    pub fn new(mu: f64, sigma: f64) -> Self {
        debug_assert!(sigma >= 0.0);
        SpacingLaw { mu, sigma, fixed: mu.exp() }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            self.fixed
        } else {
            let z: f64 = rng.sample(StandardNormal);
            (self.mu + self.sigma * z).exp()
        }
    }

    /// Length of the spacing that covers a fixed observation point.
    ///
    /// A point dropped at random onto a renewal process lands in a spacing
    /// chosen proportionally to its length. For log-normal(mu, sigma) that
    /// length-biased law is log-normal(mu + sigma^2, sigma).
    #[inline]
    pub fn draw_covering<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            self.fixed
        } else {
            let z: f64 = rng.sample(StandardNormal);
            (self.mu + self.sigma * self.sigma + self.sigma * z).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn fixed_law_is_deterministic() {
        let law = SpacingLaw::new(1.0, 0.0);
        let mut rng = stream_rng(1, 0);
        assert_eq!(law.draw(&mut rng), 1f64.exp());
        assert_eq!(law.draw_covering(&mut rng), 1f64.exp());
        assert_eq!(law.mean(), 1f64.exp());
    }

    #[test]
    fn covering_law_matches_length_biased_mean() {
        // E[L_cover] = E[L^2] / E[L] = exp(mu + 3 sigma^2 / 2)
        let law = SpacingLaw::new(0.3, 0.5);
        let mut rng = stream_rng(9, 0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| law.draw_covering(&mut rng)).sum::<f64>() / n as f64;
        let expect = (0.3f64 + 1.5 * 0.25).exp();
        assert!((m / expect - 1.0).abs() < 0.01, "{m} vs {expect}");
    }
}
