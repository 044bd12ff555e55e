//! Spherical noise: symmetric multivariate Laplace and isotropic Gaussian.
//!
//! Both kinds are parameterised by the coordinate-wise standard deviation
//! `σ`, so their covariance is `σ²·I`. An SML vector is `√W·Z` with
//! `Z ~ N(0, σ²I)` and a single `W ~ Exp(1)` shared by all coordinates: the
//! coordinates are uncorrelated but not independent, and every
//! one-dimensional marginal is Laplace with density
//! `exp(−√2|x|/σ) / (√2σ)`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Sml,
    Gaussian,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sml" | "laplace" => Ok(NoiseKind::Sml),
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown noise kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::Sml => "sml",
            NoiseKind::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Coordinate-wise standard deviation. Zero disables noise.
    pub sigma: f64,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("noise dimension must be at least 1".into()));
        }
        Ok(Self { kind, sigma, dim })
    }

    /// Draw one vector of the configured kind.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_to(&mut out, rng);
        out
    }

    /// Add one noise draw to `target` in place.
    pub fn add_to<R: Rng + ?Sized>(&self, target: &mut [f64], rng: &mut R) {
        debug_assert_eq!(target.len(), self.dim);
        let scale = match self.kind {
            NoiseKind::Gaussian => self.sigma,
            NoiseKind::Sml => {
                let w: f64 = rng.sample(Exp1);
                self.sigma * w.sqrt()
            }
        };
        for x in target.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += scale * z;
        }
    }
}

/// One SML vector, `√W · N(0, σ²I)`.
pub fn sample_sml<R: Rng + ?Sized>(sigma: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    NoiseSpec { kind: NoiseKind::Sml, sigma, dim }.sample(rng)
}

/// One isotropic Gaussian vector.
pub fn sample_gaussian<R: Rng + ?Sized>(sigma: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    NoiseSpec { kind: NoiseKind::Gaussian, sigma, dim }.sample(rng)
}

/// Density of a one-dimensional SML marginal (univariate Laplace with
/// standard deviation `sigma`).
pub fn sml_marginal_density(x: f64, sigma: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    (-s2 * x.abs() / sigma).exp() / (s2 * sigma)
}

/// CDF of the same marginal.
pub fn sml_marginal_cdf(x: f64, sigma: f64) -> f64 {
    let t = (-std::f64::consts::SQRT_2 * x.abs() / sigma).exp() / 2.0;
    if x < 0.0 {
        t
    } else {
        1.0 - t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    #[test]
    fn zero_sigma_is_zero_vector() {
        let mut r = rng::stream(1, Stream::Noise);
        assert!(sample_sml(0.0, 5, &mut r).iter().all(|&x| x == 0.0));
        assert!(sample_gaussian(0.0, 5, &mut r).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn density_at_zero() {
        assert!((sml_marginal_density(0.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        // Composite Simpson on [-20σ, 20σ]; the kink at 0 sits on a node.
        for sigma in [0.3, 1.0, 4.0] {
            let n = 400_000;
            let (a, b) = (-20.0 * sigma, 20.0 * sigma);
            let h = (b - a) / n as f64;
            let mut s = sml_marginal_density(a, sigma) + sml_marginal_density(b, sigma);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * sml_marginal_density(a + i as f64 * h, sigma);
            }
            let integral = s * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "sigma {sigma}: {integral}");
        }
    }

    #[test]
    fn cdf_matches_density() {
        let sigma = 1.7;
        for x in [-3.0, -0.2, 0.0, 0.5, 2.5] {
            let h = 1e-6;
            let num = (sml_marginal_cdf(x + h, sigma) - sml_marginal_cdf(x - h, sigma)) / (2.0 * h);
            if x != 0.0 {
                assert!((num - sml_marginal_density(x, sigma)).abs() < 1e-6);
            }
        }
        assert_eq!(sml_marginal_cdf(0.0, 1.0), 0.5);
    }

    #[test]
    fn gaussian_stream_is_seed_deterministic() {
        let a = sample_gaussian(1.0, 8, &mut rng::stream(4, Stream::Noise));
        let b = sample_gaussian(1.0, 8, &mut rng::stream(4, Stream::Noise));
        assert_eq!(a, b);
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("SML".parse::<NoiseKind>().unwrap(), NoiseKind::Sml);
        assert_eq!("gaussian".parse::<NoiseKind>().unwrap(), NoiseKind::Gaussian);
        assert!("cauchy".parse::<NoiseKind>().is_err());
        assert!(NoiseSpec::new(NoiseKind::Sml, -1.0, 3).is_err());
    }
}
