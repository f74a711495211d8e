//! Bernoulli arrivals, one independent coin per queue per slot.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArrivalError {
    #[error("arrival rate for queue {queue} is {rate}, must lie in [0, 1]")]
    RateOutOfRange { queue: usize, rate: f64 },
}

/// i.i.d. Bernoulli(rate_n) arrival process, deterministic for a fixed seed.
/// Coins are drawn in ascending queue order each slot, so a trajectory is a
/// pure function of (rates, seed).
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    rates: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ArrivalProcess {
    pub fn new(rates: Vec<f64>, seed: u64) -> Result<Self, ArrivalError> {
        for (queue, &rate) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
                return Err(ArrivalError::RateOutOfRange { queue, rate });
            }
        }
        Ok(Self {
            rates,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn n_queues(&self) -> usize {
        self.rates.len()
    }

    /// One slot's indicator vector.
    pub fn sample(&mut self) -> Vec<bool> {
        self.rates
            .iter()
            .map(|&rate| self.rng.gen::<f64>() < rate)
            .collect()
    }

    pub fn sample_into(&mut self, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.rates.len());
        for (slot, &rate) in out.iter_mut().zip(self.rates.iter()) {
            *slot = self.rng.gen::<f64>() < rate;
        }
    }
}
