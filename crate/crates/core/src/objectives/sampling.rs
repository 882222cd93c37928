use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteSumObjective, Objective};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingKind {
    /// Uniform size-`b` subset, independently at every step.
    Minibatch,
    /// `b` component indices drawn i.i.d. with replacement.
    Iid,
    /// Shuffled passes over the components, `b` at a time.
    ShuffledEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub kind: SamplingKind,
    pub batch_size: usize,
}

impl SamplingScheme {
    pub fn new(kind: SamplingKind, batch_size: usize) -> Self {
        Self { kind, batch_size }
    }

    fn check(&self, m: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.kind != SamplingKind::Iid && self.batch_size > m {
            return Err(Error::BatchTooLarge {
                batch: self.batch_size,
                components: m,
            });
        }
        Ok(())
    }
}

impl Default for SamplingScheme {
    fn default() -> Self {
        Self {
            kind: SamplingKind::ShuffledEpoch,
            batch_size: 1,
        }
    }
}

/// A drawn batch: the sampled indices and the sampling vector `xi` whose
/// components have unit expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub xi: Vec<f64>,
}

impl Batch {
    fn from_indices(indices: Vec<usize>, m: usize) -> Self {
        let weight = m as f64 / indices.len() as f64;
        let mut xi = vec![0.0; m];
        for &i in &indices {
            xi[i] += weight;
        }
        Self { indices, xi }
    }

    pub fn full(m: usize) -> Self {
        Self {
            indices: (0..m).collect(),
            xi: vec![1.0; m],
        }
    }
}

/// One stateless draw. A shuffled-epoch draw in isolation is a uniform
/// subset, so it is sampled like a minibatch.
pub fn sample_batch<R: Rng + ?Sized>(
    scheme: &SamplingScheme,
    m: usize,
    rng: &mut R,
) -> Result<Batch> {
    scheme.check(m)?;
    let b = scheme.batch_size;
    let indices = match scheme.kind {
        SamplingKind::Iid => (0..b).map(|_| rng.gen_range(0..m)).collect(),
        SamplingKind::Minibatch | SamplingKind::ShuffledEpoch => {
            if b == m {
                (0..m).collect()
            } else {
                let mut idx = index::sample(rng, m, b).into_vec();
                idx.sort_unstable();
                idx
            }
        }
    };
    Ok(Batch::from_indices(indices, m))
}

/// Stateful sampler; needed for shuffled epochs.
#[derive(Debug, Clone)]
pub struct Sampler {
    scheme: SamplingScheme,
    m: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl Sampler {
    pub fn new(scheme: SamplingScheme, m: usize) -> Result<Self> {
        scheme.check(m)?;
        Ok(Self {
            scheme,
            m,
            order: (0..m).collect(),
            cursor: m,
        })
    }

    pub fn next_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Batch> {
        if self.scheme.kind != SamplingKind::ShuffledEpoch {
            return sample_batch(&self.scheme, self.m, rng);
        }
        let b = self.scheme.batch_size;
        if b == self.m {
            return Ok(Batch::full(self.m));
        }
        // a batch never straddles two epochs; the remainder is dropped
        if self.cursor + b > self.m {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let mut idx = self.order[self.cursor..self.cursor + b].to_vec();
        idx.sort_unstable();
        self.cursor += b;
        Ok(Batch::from_indices(idx, self.m))
    }
}

/// `f_xi(theta) = (1/m) sum_j xi_j f_j(theta)` and its gradient.
pub fn sampled_value_and_grad(
    fs: &FiniteSumObjective,
    xi: &[f64],
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let m = fs.len() as f64;
    let n = fs.dim();
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for (j, &w) in xi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        value += w * fs.component(j).value_and_gradient(theta, &mut buf);
        grad.iter_mut().zip(&buf).for_each(|(g, b)| *g += w * b);
    }
    grad.iter_mut().for_each(|g| *g /= m);
    (value / m, grad)
}
