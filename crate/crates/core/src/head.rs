//! Two-layer classification head: `sigmoid(w2 . relu(W1 x + b1) + b2)`.
//!
//! All arithmetic is `f64`. The output is the probability of the attack
//! class.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower/upper clamp applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum HeadError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub input_dim: usize,
    pub hidden: usize,
    /// `hidden x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Gradients with the same layout as [`MlpHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Gradients {
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .copied()
            .chain(std::iter::once(self.b2))
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of probability `p` against target `y` in {0, 1}.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

impl MlpHead {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        MlpHead {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// He-style uniform init: weights in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut head = MlpHead::zeros(input_dim, hidden);
        let a1 = (6.0 / input_dim as f64).sqrt();
        for w in &mut head.w1 {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / hidden as f64).sqrt();
        for w in &mut head.w2 {
            *w = rng.random_range(-a2..a2);
        }
        head
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    /// Parameters in the order w1, b1, w2, b2.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .copied()
            .chain(std::iter::once(self.b2))
    }

    /// Mutable access to parameter `i` in [`MlpHead::params`] order.
    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        let (n1, nb) = (self.w1.len(), self.b1.len());
        let n2 = self.w2.len();
        if i < n1 {
            &mut self.w1[i]
        } else if i < n1 + nb {
            &mut self.b1[i - n1]
        } else if i < n1 + nb + n2 {
            &mut self.w2[i - n1 - nb]
        } else {
            assert_eq!(i, n1 + nb + n2, "parameter index out of range");
            &mut self.b2
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), HeadError> {
        if x.len() != self.input_dim {
            return Err(HeadError::DimMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Fills `hidden` with post-ReLU activations and returns the logit.
    fn logit_into(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let mut z = self.b2;
        for (j, a) in hidden.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            let pre = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *a = pre.max(0.0);
            z += self.w2[j] * *a;
        }
        z
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64, HeadError> {
        self.check_dim(x)?;
        let mut hidden = vec![0.0; self.hidden];
        Ok(self.logit_into(x, &mut hidden))
    }

    /// Attack probability for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64, HeadError> {
        self.logit(x).map(sigmoid)
    }

    /// Mean BCE over `(x, y)` rows.
    pub fn mean_loss<'a, I>(&self, rows: I) -> Result<f64, HeadError>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut hidden = vec![0.0; self.hidden];
        let (mut total, mut n) = (0.0, 0usize);
        for (x, y) in rows {
            self.check_dim(x)?;
            total += bce_loss(sigmoid(self.logit_into(x, &mut hidden)), y);
            n += 1;
        }
        if n == 0 {
            return Err(HeadError::EmptyBatch);
        }
        Ok(total / n as f64)
    }

    /// Gradient of the mean BCE over the batch with respect to every
    /// parameter, plus the mean loss. The ReLU subgradient at 0 is 0.
    pub fn backward<'a, I>(&self, batch: I) -> Result<(Gradients, f64), HeadError>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        self.backward_weighted(batch.into_iter().map(|(x, y)| (x, y, 1.0)))
    }

    /// Like [`MlpHead::backward`] for the weighted mean
    /// `sum(w * loss) / sum(w)` over `(x, y, w)` rows.
    pub fn backward_weighted<'a, I>(&self, batch: I) -> Result<(Gradients, f64), HeadError>
    where
        I: IntoIterator<Item = (&'a [f64], f64, f64)>,
    {
        let mut grads = Gradients::zeros(self.input_dim, self.hidden);
        let mut hidden = vec![0.0; self.hidden];
        let (mut loss, mut total_weight, mut n) = (0.0, 0.0, 0usize);
        for (x, y, w) in batch {
            self.check_dim(x)?;
            let p = sigmoid(self.logit_into(x, &mut hidden));
            loss += w * bce_loss(p, y);
            total_weight += w;
            n += 1;
            // dL/dz for sigmoid + BCE.
            let dz = w * (p - y);
            grads.b2 += dz;
            for (j, &a) in hidden.iter().enumerate() {
                grads.w2[j] += dz * a;
                if a > 0.0 {
                    let dpre = dz * self.w2[j];
                    grads.b1[j] += dpre;
                    let row = &mut grads.w1[j * self.input_dim..(j + 1) * self.input_dim];
                    for (g, v) in row.iter_mut().zip(x) {
                        *g += dpre * v;
                    }
                }
            }
        }
        if n == 0 {
            return Err(HeadError::EmptyBatch);
        }
        let scale = 1.0 / total_weight;
        for g in grads
            .w1
            .iter_mut()
            .chain(grads.b1.iter_mut())
            .chain(grads.w2.iter_mut())
        {
            *g *= scale;
        }
        grads.b2 *= scale;
        Ok((grads, loss * scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_head_is_half() {
        let head = MlpHead::zeros(3, 4);
        assert_eq!(head.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn relu_kills_negative_input() {
        let head = MlpHead {
            input_dim: 1,
            hidden: 1,
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: 0.0,
        };
        assert_eq!(head.forward(&[-5.0]).unwrap(), 0.5);
    }

    #[test]
    fn dim_mismatch() {
        let head = MlpHead::zeros(3, 2);
        assert_eq!(
            head.forward(&[1.0]),
            Err(HeadError::DimMismatch {
                expected: 3,
                found: 1
            })
        );
        let rows = [1.0, 2.0];
        assert!(head.backward([(&rows[..], 1.0)]).is_err());
        assert_eq!(
            head.backward(std::iter::empty()).unwrap_err(),
            HeadError::EmptyBatch
        );
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(1.0, 1.0) <= 1e-12);
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.9, 0.0) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1e4), 0.0);
        assert_eq!(sigmoid(1e4), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        // b2 = +-40 saturates the sigmoid to the targets; w2 = 0 removes the
        // hidden path entirely.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut head = MlpHead::init(4, 3, &mut rng);
        head.w2.iter_mut().for_each(|w| *w = 0.0);
        head.b2 = 40.0;
        let x = [0.3, -1.0, 2.0, 0.5];
        let (g, loss) = head.backward([(&x[..], 1.0), (&x[..], 1.0)]).unwrap();
        assert!(g.norm() <= 1e-9, "{}", g.norm());
        assert!(loss <= 1e-12);
    }

    #[test]
    fn duplicated_rows_do_not_change_the_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = MlpHead::init(3, 5, &mut rng);
        let a = [0.2, -0.4, 1.1];
        let b = [-1.0, 0.7, 0.3];
        let (g1, _) = head.backward([(&a[..], 1.0), (&b[..], 0.0)]).unwrap();
        let (g2, _) = head
            .backward([(&a[..], 1.0), (&b[..], 0.0), (&a[..], 1.0), (&b[..], 0.0)])
            .unwrap();
        for (x, y) in g1.iter().zip(g2.iter()) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = MlpHead::init(24, 6, &mut rng);
        let a1 = (6.0f64 / 24.0).sqrt();
        assert!(head.w1.iter().all(|w| w.abs() < a1));
        assert!(head.b1.iter().all(|b| *b == 0.0));
        assert_eq!(head.n_params(), 24 * 6 + 6 + 6 + 1);
    }
}
