//! Mean estimation for a three-component univariate Gaussian mixture by
//! expectation-maximization, posed as a fixed point problem.
//!
//! Mixture proportions and variances are known; only the means are
//! estimated from unlabeled samples. One EM sweep maps a mean triple to the
//! responsibility-weighted sample means. To exercise the accelerator with a
//! communication-free `G`, the triple is replicated across the whole global
//! vector and every replica is updated identically.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::aa::FixedPointProblem;
use crate::error::{Error, Result};
use crate::vector::{DistVector, ReductionLedger, ShardLayout};

#[derive(Clone, Debug)]
pub struct MixtureProblem {
    alphas: [f64; 3],
    sigmas: [f64; 3],
    true_means: [f64; 3],
    samples: Vec<f64>,
    layout: Arc<ShardLayout>,
}

/// Draws `n` samples of the mixture: component by proportion, then a normal
/// deviate. Deterministic for a fixed seed.
pub fn gen_samples(
    alphas: &[f64; 3],
    sigmas: &[f64; 3],
    true_means: &[f64; 3],
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Normal<f64>> = (0..3)
        .map(|i| Normal::new(true_means[i], sigmas[i]).expect("positive sigma"))
        .collect();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut c = 0;
            let mut acc = alphas[0];
            while c < 2 && u > acc {
                c += 1;
                acc += alphas[c];
            }
            dists[c].sample(&mut rng)
        })
        .collect()
}

impl MixtureProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alphas: [f64; 3],
        sigmas: [f64; 3],
        true_means: [f64; 3],
        n_samples: usize,
        vector_len: usize,
        shards: usize,
        seed: u64,
    ) -> Result<Self> {
        if alphas.iter().any(|&a| a < 0.0) || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "mixture proportions must be nonnegative and sum to one".into(),
            ));
        }
        if sigmas.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::InvalidConfig(
                "mixture deviations must be positive".into(),
            ));
        }
        if n_samples == 0 {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        if !vector_len.is_multiple_of(3) || vector_len == 0 {
            return Err(Error::InvalidConfig(format!(
                "global vector length must be a positive multiple of 3, got {vector_len}"
            )));
        }
        let layout = Arc::new(ShardLayout::new(vector_len, shards)?);
        let samples = gen_samples(&alphas, &sigmas, &true_means, n_samples, seed);
        Ok(Self {
            alphas,
            sigmas,
            true_means,
            samples,
            layout,
        })
    }

    pub fn layout(&self) -> &Arc<ShardLayout> {
        &self.layout
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn true_means(&self) -> [f64; 3] {
        self.true_means
    }

    /// Fills the global vector with copies of a mean triple.
    pub fn replicate(&self, means: [f64; 3]) -> DistVector {
        DistVector::from_fn(&self.layout, |i| means[i % 3])
    }

    /// Default starting guess.
    pub fn initial_guess(&self) -> DistVector {
        self.replicate([0.2, 0.4, 0.6])
    }

    /// One EM sweep over all samples.
    pub fn em_step(&self, means: [f64; 3]) -> Result<[f64; 3]> {
        let mut num = [0.0f64; 3];
        let mut den = [0.0f64; 3];
        let inv_two_sig2: Vec<f64> = self.sigmas.iter().map(|s| 1.0 / (2.0 * s * s)).collect();
        let norm_const: Vec<f64> = self
            .sigmas
            .iter()
            .map(|s| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * s))
            .collect();
        for (k, &x) in self.samples.iter().enumerate() {
            let mut w = [0.0f64; 3];
            let mut p = 0.0;
            for i in 0..3 {
                let d = x - means[i];
                w[i] = self.alphas[i] * norm_const[i] * (-d * d * inv_two_sig2[i]).exp();
                p += w[i];
            }
            if p == 0.0 || !p.is_finite() {
                return Err(Error::DegenerateMixture(k));
            }
            for i in 0..3 {
                let resp = w[i] / p;
                num[i] += x * resp;
                den[i] += resp;
            }
        }
        let mut out = [0.0f64; 3];
        for i in 0..3 {
            if den[i] == 0.0 {
                return Err(Error::DegenerateMixture(usize::MAX));
            }
            out[i] = num[i] / den[i];
        }
        Ok(out)
    }
}

impl FixedPointProblem for MixtureProblem {
    fn dimension(&self) -> usize {
        self.layout.len()
    }

    /// Reads the leading mean triple, runs one EM sweep, and writes the
    /// update to every replica. No vector-backend reductions at all: the
    /// only communication this problem costs is the accelerator's own.
    fn eval_g(&self, u: &DistVector, _ledger: &mut ReductionLedger) -> Result<DistVector> {
        if u.len() != self.layout.len() {
            return Err(Error::LengthMismatch(u.len(), self.layout.len()));
        }
        let s = u.as_slice();
        let means = [s[0], s[1], s[2]];
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Diverged("mean iterate is not finite".into()));
        }
        let updated = self.em_step(means)?;
        Ok(self.replicate(updated))
    }
}
