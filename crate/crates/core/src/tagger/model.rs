//! Decoder parameters, forward pass, joint loss and its gradients.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::nn::{cross_entropy, AttentionPool, Mlp, MlpCache, PoolCache};
use super::TaggerError;
use crate::corpus::Paragraph;
use crate::schema::{to_bio, CsTag, CtTag, DiscourseLabel, LabeledParagraph};

pub const CS_CLASSES: usize = 3;
pub const CT_CLASSES: usize = 5;
pub const DISC_CLASSES: usize = 6;
/// Sentence features appended to the pooled context: relative position,
/// first, last, holds a mark, mark count.
pub const SENTENCE_EXTRAS: usize = 5;

/// Weights of the joint objective `γd·Ld + γs·Ls + γt·Lt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma_d: f64,
    pub gamma_s: f64,
    pub gamma_t: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gamma_d: 1.0,
            gamma_s: 1.75,
            gamma_t: 3.0,
        }
    }
}

impl LossWeights {
    pub fn check(&self) -> Result<(), TaggerError> {
        let w = [self.gamma_d, self.gamma_s, self.gamma_t];
        if w.iter().any(|g| !g.is_finite() || *g < 0.0) || w.iter().all(|g| *g == 0.0) {
            return Err(TaggerError::Config(format!(
                "loss weights must be non-negative with at least one positive, got {w:?}"
            )));
        }
        Ok(())
    }
}

/// Mean cross-entropy per sub-task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub disc: f64,
    pub span: f64,
    pub ty: f64,
}

impl LossParts {
    pub fn combine(&self, w: &LossWeights) -> f64 {
        w.gamma_d * self.disc + w.gamma_s * self.span + w.gamma_t * self.ty
    }
}

/// Raw (pre-softmax) scores of the three heads for one paragraph.
#[derive(Clone, Debug, PartialEq)]
pub struct TagScores {
    pub cs: Array2<f64>,
    pub ct: Array2<f64>,
    pub disc: Array2<f64>,
}

/// Gold class indices for one paragraph.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldTags {
    pub cs: Vec<usize>,
    pub ct: Vec<usize>,
    pub disc: Vec<usize>,
}

impl GoldTags {
    pub fn from_labeled(lp: &LabeledParagraph) -> Result<GoldTags, TaggerError> {
        let tags = to_bio(lp)?;
        Ok(GoldTags {
            cs: tags.cs_tags.iter().map(|t| CsTag::index(*t)).collect(),
            ct: tags.ct_tags.iter().map(|t| CtTag::index(*t)).collect(),
            disc: lp.sentence_labels.iter().map(|l| DiscourseLabel::index(*l)).collect(),
        })
    }
}

fn ce_checked(logits: &Array2<f64>, gold: &[usize], what: &str) -> Result<(f64, Array2<f64>), TaggerError> {
    if logits.nrows() != gold.len() {
        return Err(TaggerError::Shape(format!(
            "{what}: {} score rows for {} gold labels",
            logits.nrows(),
            gold.len()
        )));
    }
    if let Some(g) = gold.iter().find(|g| **g >= logits.ncols()) {
        return Err(TaggerError::Shape(format!("{what}: class {g} out of {} columns", logits.ncols())));
    }
    Ok(cross_entropy(logits, gold))
}

pub fn loss_parts(scores: &TagScores, gold: &GoldTags) -> Result<LossParts, TaggerError> {
    Ok(LossParts {
        disc: ce_checked(&scores.disc, &gold.disc, "discourse")?.0,
        span: ce_checked(&scores.cs, &gold.cs, "citation span")?.0,
        ty: ce_checked(&scores.ct, &gold.ct, "citation type")?.0,
    })
}

/// `γd·Ld + γs·Ls + γt·Lt`, each term the mean cross-entropy over its units
/// (sentences for Ld, tokens for Ls and Lt).
pub fn joint_loss(scores: &TagScores, gold: &LabeledParagraph, w: &LossWeights) -> Result<f64, TaggerError> {
    Ok(loss_parts(scores, &GoldTags::from_labeled(gold)?)?.combine(w))
}

/// A paragraph prepared for the decoders.
#[derive(Clone, Debug)]
pub struct Example {
    pub features: Array2<f64>,
    pub sentences: Vec<Range<usize>>,
    pub sentence_extras: Array2<f64>,
}

impl Example {
    pub fn new(paragraph: &Paragraph, features: Array2<f64>) -> Result<Example, TaggerError> {
        let sentences = paragraph.sentence_token_ranges();
        if let Some(i) = sentences.iter().position(|r| r.is_empty()) {
            return Err(TaggerError::EmptySentence(i));
        }
        let n = sentences.len();
        let mut extras = Array2::zeros((n, SENTENCE_EXTRAS));
        for (i, s) in paragraph.sentences.iter().enumerate() {
            let marks = paragraph.citation_marks.iter().filter(|m| s.contains(&m.range())).count();
            extras[[i, 0]] = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            extras[[i, 1]] = f64::from(i == 0);
            extras[[i, 2]] = f64::from(i + 1 == n);
            extras[[i, 3]] = f64::from(marks > 0);
            extras[[i, 4]] = (marks as f64 / 4.0).min(1.0);
        }
        Ok(Example {
            features,
            sentences,
            sentence_extras: extras,
        })
    }
}

/// All trainable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerParams {
    pub cs: Mlp,
    pub ct: Mlp,
    pub pool: AttentionPool,
    pub disc: Mlp,
}

pub struct ForwardCache {
    cs: MlpCache,
    ct: MlpCache,
    pool: PoolCache,
    disc_in: Array2<f64>,
    disc: MlpCache,
}

impl ForwardCache {
    pub fn scores(&self) -> TagScores {
        TagScores {
            cs: self.cs.out.clone(),
            ct: self.ct.out.clone(),
            disc: self.disc.out.clone(),
        }
    }
}

impl TaggerParams {
    pub fn new(rng: &mut impl Rng, feature_dim: usize, hidden: usize, value_dim: usize) -> TaggerParams {
        TaggerParams {
            cs: Mlp::new(rng, feature_dim, hidden, CS_CLASSES),
            ct: Mlp::new(rng, feature_dim, hidden, CT_CLASSES),
            pool: AttentionPool::new(rng, feature_dim, value_dim),
            disc: Mlp::new(rng, 3 * value_dim + SENTENCE_EXTRAS, hidden, DISC_CLASSES),
        }
    }

    pub fn zeros_like(&self) -> TaggerParams {
        TaggerParams {
            cs: self.cs.zeros_like(),
            ct: self.ct.zeros_like(),
            pool: self.pool.zeros_like(),
            disc: self.disc.zeros_like(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.cs.input_dim()
    }

    fn value_dim(&self) -> usize {
        self.pool.v.nrows()
    }

    /// Parameter tensors as flat slices, in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for m in [&self.cs, &self.ct, &self.disc] {
            out.push(m.w1.as_slice().expect("standard layout"));
            out.push(m.b1.as_slice().expect("standard layout"));
            out.push(m.w2.as_slice().expect("standard layout"));
            out.push(m.b2.as_slice().expect("standard layout"));
        }
        out.push(self.pool.q.as_slice().expect("standard layout"));
        out.push(self.pool.v.as_slice().expect("standard layout"));
        out.push(self.pool.b.as_slice().expect("standard layout"));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for m in [&mut self.cs, &mut self.ct, &mut self.disc] {
            out.push(m.w1.as_slice_mut().expect("standard layout"));
            out.push(m.b1.as_slice_mut().expect("standard layout"));
            out.push(m.w2.as_slice_mut().expect("standard layout"));
            out.push(m.b2.as_slice_mut().expect("standard layout"));
        }
        out.push(self.pool.q.as_slice_mut().expect("standard layout"));
        out.push(self.pool.v.as_slice_mut().expect("standard layout"));
        out.push(self.pool.b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.slices().iter().map(|s| s.len()).collect()
    }

    pub fn add_scaled(&mut self, other: &TaggerParams, scale: f64) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn disc_input(&self, pooled: &Array2<f64>, extras: &Array2<f64>) -> Array2<f64> {
        let (n, h) = (pooled.nrows(), self.value_dim());
        let mut input = Array2::zeros((n, 3 * h + SENTENCE_EXTRAS));
        for i in 0..n {
            input.slice_mut(s![i, ..h]).assign(&pooled.row(i));
            if i > 0 {
                input.slice_mut(s![i, h..2 * h]).assign(&pooled.row(i - 1));
            }
            if i + 1 < n {
                input.slice_mut(s![i, 2 * h..3 * h]).assign(&pooled.row(i + 1));
            }
            input.slice_mut(s![i, 3 * h..]).assign(&extras.row(i));
        }
        input
    }

    pub fn forward(&self, ex: &Example, dropout: Option<(f64, &mut dyn RngCore)>) -> ForwardCache {
        let x: ArrayView2<f64> = ex.features.view();
        let (cs, ct, disc_rng) = match dropout {
            Some((p, rng)) => {
                let cs = self.cs.forward(x, Some((p, &mut *rng)));
                let ct = self.ct.forward(x, Some((p, &mut *rng)));
                (cs, ct, Some((p, rng)))
            }
            None => (self.cs.forward(x, None), self.ct.forward(x, None), None),
        };
        let (pooled, pool) = self.pool.forward(x, &ex.sentences);
        let disc_in = self.disc_input(&pooled, &ex.sentence_extras);
        let disc = self.disc.forward(disc_in.view(), disc_rng);
        ForwardCache {
            cs,
            ct,
            pool,
            disc_in,
            disc,
        }
    }

    pub fn scores(&self, ex: &Example) -> TagScores {
        self.forward(ex, None).scores()
    }

    /// Loss parts and gradients of the weighted joint loss.
    pub fn loss_and_grad(
        &self,
        ex: &Example,
        gold: &GoldTags,
        w: &LossWeights,
        dropout: Option<(f64, &mut dyn RngCore)>,
    ) -> Result<(LossParts, TaggerParams), TaggerError> {
        let cache = self.forward(ex, dropout);
        let (ls, dcs) = ce_checked(&cache.cs.out, &gold.cs, "citation span")?;
        let (lt, dct) = ce_checked(&cache.ct.out, &gold.ct, "citation type")?;
        let (ld, ddisc) = ce_checked(&cache.disc.out, &gold.disc, "discourse")?;
        let mut grad = self.zeros_like();
        let x = ex.features.view();
        self.cs.backward(x, &cache.cs, &(dcs * w.gamma_s), &mut grad.cs);
        self.ct.backward(x, &cache.ct, &(dct * w.gamma_t), &mut grad.ct);
        let din = self
            .disc
            .backward(cache.disc_in.view(), &cache.disc, &(ddisc * w.gamma_d), &mut grad.disc);
        let (n, h) = (ex.sentences.len(), self.value_dim());
        let mut dpooled = Array2::zeros((n, h));
        for i in 0..n {
            let mut row = dpooled.row_mut(i);
            row += &din.slice(s![i, ..h]);
            if i + 1 < n {
                row += &din.slice(s![i + 1, h..2 * h]);
            }
            if i > 0 {
                row += &din.slice(s![i - 1, 2 * h..3 * h]);
            }
        }
        self.pool.backward(x, &ex.sentences, &cache.pool, &dpooled, &mut grad.pool);
        Ok((
            LossParts {
                disc: ld,
                span: ls,
                ty: lt,
            },
            grad,
        ))
    }
}

/// Largest relative error between analytic gradients and central finite
/// differences, over `samples` randomly chosen coordinates per example.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    params: &TaggerParams,
    data: &[(Example, GoldTags)],
    w: &LossWeights,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64, TaggerError> {
    const EPS: f64 = 1e-5;
    const FLOOR: f64 = 1e-7;
    let mut worst: f64 = 0.0;
    for (ex, gold) in data {
        let (_, grad) = params.loss_and_grad(ex, gold, w, None)?;
        let sizes = params.sizes();
        let analytic = grad.slices();
        for _ in 0..samples {
            let t = rng.random_range(0..sizes.len());
            let i = rng.random_range(0..sizes[t]);
            let mut probe = params.clone();
            let orig = probe.slices()[t][i];
            let mut eval = |v: f64| -> Result<f64, TaggerError> {
                probe.slices_mut()[t][i] = v;
                Ok(loss_parts(&probe.scores(ex), gold)?.combine(w))
            };
            let numeric = (eval(orig + EPS)? - eval(orig - EPS)?) / (2.0 * EPS);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scores(n_tok: usize, n_sent: usize, rng: &mut impl Rng) -> TagScores {
        let mut r = |rows, cols| Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-2.0..2.0));
        TagScores {
            cs: r(n_tok, CS_CLASSES),
            ct: r(n_tok, CT_CLASSES),
            disc: r(n_sent, DISC_CLASSES),
        }
    }

    #[test]
    fn table_weights_example() {
        let parts = LossParts {
            disc: 0.5,
            span: 0.2,
            ty: 0.1,
        };
        assert!((parts.combine(&LossWeights::default()) - 1.15).abs() < 1e-12);
        let only_d = LossWeights {
            gamma_d: 1.0,
            gamma_s: 0.0,
            gamma_t: 0.0,
        };
        assert_eq!(parts.combine(&only_d), 0.5);
    }

    #[test]
    fn weights_are_checked() {
        assert!(LossWeights::default().check().is_ok());
        let zero = LossWeights {
            gamma_d: 0.0,
            gamma_s: 0.0,
            gamma_t: 0.0,
        };
        assert!(zero.check().is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = scores(4, 2, &mut rng);
        let gold = GoldTags {
            cs: vec![0; 3],
            ct: vec![0; 4],
            disc: vec![0; 2],
        };
        assert!(matches!(loss_parts(&s, &gold), Err(TaggerError::Shape(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = TaggerParams::new(&mut rng, 6, 5, 4);
        let mut data = Vec::new();
        for n in [3usize, 5] {
            let features = Array2::from_shape_simple_fn((n, 6), || rng.random_range(-1.0..1.0));
            let ex = Example {
                features,
                sentences: vec![0..1, 1..n],
                sentence_extras: Array2::from_shape_simple_fn((2, SENTENCE_EXTRAS), || rng.random_range(0.0..1.0)),
            };
            let gold = GoldTags {
                cs: (0..n).map(|i| i % CS_CLASSES).collect(),
                ct: (0..n).map(|i| (i * 2) % CT_CLASSES).collect(),
                disc: vec![1, 4],
            };
            data.push((ex, gold));
        }
        let err = gradient_check(&params, &data, &LossWeights::default(), 60, &mut rng).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    proptest::proptest! {
        #[test]
        fn loss_is_linear_in_weights(seed in 0u64..1000, a in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = scores(4, 2, &mut rng);
            let gold = GoldTags { cs: vec![0, 1, 2, 0], ct: vec![1, 2, 3, 4], disc: vec![0, 5] };
            let w = LossWeights::default();
            let scaled = LossWeights { gamma_d: a * w.gamma_d, gamma_s: a * w.gamma_s, gamma_t: a * w.gamma_t };
            let p = loss_parts(&s, &gold).unwrap();
            let (l, ls) = (p.combine(&w), p.combine(&scaled));
            proptest::prop_assert!((ls - a * l).abs() <= 1e-9 * ls.abs().max(1.0));
        }
    }
}
