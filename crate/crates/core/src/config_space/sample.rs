use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::Configuration;
use crate::base_space::FiniteBaseSpace;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Means above this switch from inversion to the library sampler.
const INVERSION_MAX_MEAN: f64 = 30.0;

/// Draws configurations from `π_{s·m}`: a Poisson number of particles, each
/// placed independently according to `m / m(X)`.
#[derive(Clone, Debug)]
pub struct PoissonSampler {
    mean: f64,
    cumulative: Vec<f64>,
}

impl PoissonSampler {
    pub fn new<T: Real>(base: &FiniteBaseSpace<T>, s: T) -> Result<Self> {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("Poisson intensity scaling must be positive, got {s}")));
        }
        let total = base.total_mass().as_f64();
        let mut acc = 0.0;
        let cumulative = base
            .m()
            .iter()
            .map(|w| {
                acc += w.as_f64() / total;
                acc
            })
            .collect();
        Ok(Self {
            mean: s.as_f64() * total,
            cumulative,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn count<R: Rng>(&self, rng: &mut R) -> usize {
        if self.mean <= INVERSION_MAX_MEAN {
            let u: f64 = rng.random();
            let mut k = 0usize;
            let mut p = (-self.mean).exp();
            let mut cdf = p;
            while u > cdf {
                k += 1;
                p *= self.mean / k as f64;
                cdf += p;
                if p == 0.0 && cdf < u {
                    break;
                }
            }
            k
        } else {
            let dist = Poisson::new(self.mean).expect("positive finite mean");
            dist.sample(rng) as usize
        }
    }

    fn location<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Configuration {
        let n = self.count(rng);
        let mut occupation = vec![0u32; self.cumulative.len()];
        for _ in 0..n {
            occupation[self.location(rng)] += 1;
        }
        Configuration::from_occupation(occupation)
    }
}

/// One draw from `π_{s·m}`, deterministic in `seed`.
pub fn sample_poisson<T: Real>(base: &FiniteBaseSpace<T>, s: T, seed: u64) -> Result<Configuration> {
    let sampler = PoissonSampler::new(base, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.draw(&mut rng))
}
