//! Small dense layers with hand-written backward passes, and Adam.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Two-layer feed-forward classifier: `tanh(x W1ᵀ + b1) W2ᵀ + b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub struct MlpCache {
    pub hidden: Array2<f64>,
    pub mask: Option<Array2<f64>>,
    pub out: Array2<f64>,
}

fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
}

impl Mlp {
    pub fn new(rng: &mut impl Rng, input: usize, hidden: usize, output: usize) -> Mlp {
        Mlp {
            w1: xavier(rng, hidden, input),
            b1: Array1::zeros(hidden),
            w2: xavier(rng, output, hidden),
            b2: Array1::zeros(output),
        }
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    /// Inverted dropout on the hidden layer when `dropout` is given.
    pub fn forward(&self, x: ArrayView2<f64>, dropout: Option<(f64, &mut dyn rand::RngCore)>) -> MlpCache {
        let mut hidden = x.dot(&self.w1.t()) + &self.b1;
        hidden.mapv_inplace(f64::tanh);
        let mask = match dropout {
            Some((p, rng)) if p > 0.0 => {
                let keep = 1.0 - p;
                let m = Array2::from_shape_simple_fn(hidden.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                Some(m)
            }
            _ => None,
        };
        let out = match &mask {
            Some(m) => (&hidden * m).dot(&self.w2.t()) + &self.b2,
            None => hidden.dot(&self.w2.t()) + &self.b2,
        };
        MlpCache { hidden, mask, out }
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, x: ArrayView2<f64>, cache: &MlpCache, dout: &Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let h = match &cache.mask {
            Some(m) => &cache.hidden * m,
            None => cache.hidden.clone(),
        };
        grad.w2 += &dout.t().dot(&h);
        grad.b2 += &dout.sum_axis(Axis(0));
        let mut dh = dout.dot(&self.w2);
        if let Some(m) = &cache.mask {
            dh *= m;
        }
        let dz = dh * cache.hidden.mapv(|v| 1.0 - v * v);
        grad.w1 += &dz.t().dot(&x);
        grad.b1 += &dz.sum_axis(Axis(0));
        dz.dot(&self.w1)
    }
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Mean cross-entropy of `logits` against `gold` class indices, and its
/// gradient with respect to the logits. Zero loss for zero rows.
pub fn cross_entropy(logits: &Array2<f64>, gold: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    if n == 0 {
        return (0.0, logits.clone());
    }
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &g) in gold.iter().enumerate() {
        loss -= grad[[i, g]].max(f64::MIN_POSITIVE).ln();
        grad[[i, g]] -= 1.0;
    }
    grad /= n as f64;
    (loss / n as f64, grad)
}

pub fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (i, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Attention pooling: per sentence, weights `softmax(q · x_i)` over its
/// tokens applied to value projections `V x_i + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionPool {
    pub q: Array1<f64>,
    pub v: Array2<f64>,
    pub b: Array1<f64>,
}

pub struct PoolCache {
    pub weights: Vec<Array1<f64>>,
    pub values: Vec<Array2<f64>>,
}

impl AttentionPool {
    pub fn new(rng: &mut impl Rng, input: usize, value_dim: usize) -> AttentionPool {
        let a = (1.0 / input as f64).sqrt();
        AttentionPool {
            q: Array1::from_shape_simple_fn(input, || rng.random_range(-a..a)),
            v: xavier(rng, value_dim, input),
            b: Array1::zeros(value_dim),
        }
    }

    pub fn zeros_like(&self) -> AttentionPool {
        AttentionPool {
            q: Array1::zeros(self.q.raw_dim()),
            v: Array2::zeros(self.v.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    /// `sentences` are token index ranges, each non-empty.
    pub fn forward(&self, x: ArrayView2<f64>, sentences: &[std::ops::Range<usize>]) -> (Array2<f64>, PoolCache) {
        let mut pooled = Array2::zeros((sentences.len(), self.v.nrows()));
        let mut cache = PoolCache {
            weights: Vec::with_capacity(sentences.len()),
            values: Vec::with_capacity(sentences.len()),
        };
        for (s, r) in sentences.iter().enumerate() {
            let xs = x.slice(s![r.clone(), ..]);
            let scores = xs.dot(&self.q);
            let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut w = scores.mapv(|e| (e - max).exp());
            w /= w.sum();
            let values = xs.dot(&self.v.t()) + &self.b;
            pooled.row_mut(s).assign(&w.dot(&values));
            cache.weights.push(w);
            cache.values.push(values);
        }
        (pooled, cache)
    }

    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        sentences: &[std::ops::Range<usize>],
        cache: &PoolCache,
        dpooled: &Array2<f64>,
        grad: &mut AttentionPool,
    ) {
        for (s, r) in sentences.iter().enumerate() {
            let xs = x.slice(s![r.clone(), ..]);
            let w = &cache.weights[s];
            let dp = dpooled.row(s);
            let mixed = w.dot(&xs);
            for (i, dpi) in dp.iter().enumerate() {
                grad.v.row_mut(i).scaled_add(*dpi, &mixed);
            }
            grad.b += &dp;
            let dw = cache.values[s].dot(&dp);
            let centre = w.dot(&dw);
            let de = w * &(dw - centre);
            grad.q += &de.dot(&xs);
        }
    }
}

/// Adam with bias correction over a flat list of parameter slices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(sizes: &[usize]) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let (loss, grad) = cross_entropy(&Array2::zeros((2, 4)), &[0, 3]);
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad[[0, 0]] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn attention_weights_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = AttentionPool::new(&mut rng, 3, 2);
        let x = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
        let (pooled, cache) = pool.forward(x.view(), &[0..2, 2..5]);
        assert_eq!(pooled.nrows(), 2);
        for w in &cache.weights {
            assert!((w.sum() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn single_token_sentence_pools_to_its_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pool = AttentionPool::new(&mut rng, 2, 2);
        let x = array![[0.5, -1.0], [2.0, 3.0]];
        let (pooled, _) = pool.forward(x.view(), std::slice::from_ref(&(1..2)));
        let expect = pool.v.dot(&x.row(1)) + &pool.b;
        assert!((&pooled.row(0) - &expect).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = vec![1.0, -1.0];
        let mut adam = Adam::new(&[2]);
        adam.update(vec![&mut p], vec![&[0.5, -0.5]], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }
}
