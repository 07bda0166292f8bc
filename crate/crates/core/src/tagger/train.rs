//! Training, evaluation, cross-validation and distant supervision.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Example, GoldTags, LossParts, LossWeights};
use super::nn::Adam;
use super::{ModelConfig, TaggerError, TaggerModel, TrainConfig};
use crate::corpus::RelatedWorkSection;
use crate::metrics::{micro_prf, F1Report};
use crate::schema::{to_bio, CsTag, CtTag, LabeledParagraph, LabeledSection};

/// Micro-F1 per task: discourse over sentences, span and type tags over
/// tokens with `O` excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskF1 {
    pub disc: F1Report,
    pub cs: F1Report,
    pub ct: F1Report,
}

impl TaskF1 {
    pub fn merge(&self, other: &TaskF1) -> TaskF1 {
        TaskF1 {
            disc: self.disc.merge(&other.disc),
            cs: self.cs.merge(&other.cs),
            ct: self.ct.merge(&other.ct),
        }
    }

    pub fn min_f1(&self) -> f64 {
        self.disc.f1.min(self.cs.f1).min(self.ct.f1)
    }
}

/// Scores predictions against gold paragraphs, pairwise. Both sides must
/// hold the same segmented paragraph.
pub fn score_paragraphs(pred: &[LabeledParagraph], gold: &[LabeledParagraph]) -> Result<TaskF1, TaggerError> {
    if pred.len() != gold.len() {
        return Err(TaggerError::Shape(format!(
            "{} predicted paragraphs for {} gold paragraphs",
            pred.len(),
            gold.len()
        )));
    }
    let (mut pd, mut gd) = (Vec::new(), Vec::new());
    let (mut pcs, mut gcs, mut pct, mut gct) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.paragraph.text != g.paragraph.text
            || p.paragraph.tokens != g.paragraph.tokens
            || p.sentence_labels.len() != g.sentence_labels.len()
        {
            return Err(TaggerError::Shape(format!(
                "paragraph {i}: prediction and gold differ in text or segmentation"
            )));
        }
        pd.extend(p.sentence_labels.iter().copied());
        gd.extend(g.sentence_labels.iter().copied());
        let (pt, gt) = (to_bio(p)?, to_bio(g)?);
        pcs.extend(pt.cs_tags);
        gcs.extend(gt.cs_tags);
        pct.extend(pt.ct_tags);
        gct.extend(gt.ct_tags);
    }
    let shape = |e| TaggerError::Shape(format!("{e}"));
    Ok(TaskF1 {
        disc: micro_prf(&pd, &gd, &HashSet::new()).map_err(shape)?,
        cs: micro_prf(&pcs, &gcs, &HashSet::from([CsTag::O])).map_err(shape)?,
        ct: micro_prf(&pct, &gct, &HashSet::from([CtTag::O])).map_err(shape)?,
    })
}

pub fn evaluate(model: &TaggerModel, data: &[LabeledParagraph]) -> Result<TaskF1, TaggerError> {
    let pred = data
        .iter()
        .map(|lp| model.predict(&lp.paragraph))
        .collect::<Result<Vec<_>, _>>()?;
    score_paragraphs(&pred, data)
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean weighted joint loss over the epoch's paragraphs.
    pub train_loss: f64,
    pub train_parts: LossParts,
    pub updates: usize,
    pub heldout: Option<TaskF1>,
}

fn prepare(model: &TaggerModel, data: &[LabeledParagraph]) -> Result<Vec<(Example, GoldTags)>, TaggerError> {
    data.iter()
        .enumerate()
        .map(|(index, lp)| {
            let gold = GoldTags::from_labeled(lp).map_err(|e| match e {
                TaggerError::Schema(source) => TaggerError::InvalidExample { index, source },
                other => other,
            })?;
            Ok((model.prepare(&lp.paragraph)?, gold))
        })
        .collect()
}

/// Trains a fresh model. Gradients are averaged over `batch_size ×
/// steps_per_update` paragraphs per Adam update. With `log`, each epoch
/// record is written as one JSON line.
pub fn train(
    data: &[LabeledParagraph],
    heldout: Option<&[LabeledParagraph]>,
    config: &ModelConfig,
    tc: &TrainConfig,
    w: &LossWeights,
    log: Option<&mut dyn Write>,
) -> Result<(TaggerModel, Vec<EpochRecord>), TaggerError> {
    let model = TaggerModel::new(config.clone(), *w, tc.clone())?;
    fit(model, data, heldout, log)
}

/// Continues training `model` with its own train config and loss weights.
pub fn fit(
    mut model: TaggerModel,
    data: &[LabeledParagraph],
    heldout: Option<&[LabeledParagraph]>,
    mut log: Option<&mut dyn Write>,
) -> Result<(TaggerModel, Vec<EpochRecord>), TaggerError> {
    let tc = model.train_config.clone();
    tc.check()?;
    model.loss_weights.check()?;
    if data.is_empty() {
        return Err(TaggerError::EmptyDataset);
    }
    let examples = prepare(&model, data)?;
    let w = model.loss_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));
    let mut adam = Adam::new(&model.params.sizes());
    let per_update = tc.batch_size * tc.steps_per_update;
    let mut records = Vec::with_capacity(tc.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut acc = model.params.zeros_like();
        let mut pending = 0usize;
        let mut updates = 0;
        let mut sum = LossParts::default();
        for (step, &i) in order.iter().enumerate() {
            let (ex, gold) = &examples[i];
            let dropout = (tc.dropout > 0.0).then_some((tc.dropout, &mut rng as &mut dyn rand::RngCore));
            let (parts, grad) = model.params.loss_and_grad(ex, gold, &w, dropout)?;
            let loss = parts.combine(&w);
            if !loss.is_finite() {
                return Err(TaggerError::Diverged {
                    epoch,
                    step,
                    detail: format!("non-finite loss {loss} (parts {parts:?}) on paragraph {i}"),
                });
            }
            sum.disc += parts.disc;
            sum.span += parts.span;
            sum.ty += parts.ty;
            acc.add_scaled(&grad, 1.0);
            pending += 1;
            if pending == per_update || step + 1 == order.len() {
                let scale = 1.0 / pending as f64;
                let grads: Vec<Vec<f64>> = acc.slices().iter().map(|s| s.iter().map(|g| g * scale).collect()).collect();
                adam.update(
                    model.params.slices_mut(),
                    grads.iter().map(Vec::as_slice).collect(),
                    tc.decoder_lr,
                );
                if !model.params.is_finite() {
                    return Err(TaggerError::Diverged {
                        epoch,
                        step,
                        detail: "non-finite parameters after update".into(),
                    });
                }
                acc = model.params.zeros_like();
                pending = 0;
                updates += 1;
            }
        }
        let n = examples.len() as f64;
        let train_parts = LossParts {
            disc: sum.disc / n,
            span: sum.span / n,
            ty: sum.ty / n,
        };
        let heldout = match heldout {
            Some(h) if !h.is_empty() => Some(evaluate(&model, h)?),
            _ => None,
        };
        let record = EpochRecord {
            epoch,
            train_loss: train_parts.combine(&w),
            train_parts,
            updates,
            heldout,
        };
        log::info!("epoch {epoch}: loss {:.5}", record.train_loss);
        if let Some(out) = log.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            let _ = writeln!(out, "{line}");
        }
        records.push(record);
    }
    Ok((model, records))
}

/// Splits section indices into `k` folds so that all sections of a paper
/// land in the same fold.
pub fn folds_by_paper(sections: &[LabeledSection], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut by_paper: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in sections.iter().enumerate() {
        by_paper.entry(s.paper_id.as_str()).or_default().push(i);
    }
    let mut papers: Vec<Vec<usize>> = by_paper.into_values().collect();
    papers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k.max(1)];
    for (j, idx) in papers.into_iter().enumerate() {
        folds[j % k.max(1)].extend(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_papers: Vec<String>,
    pub scores: TaskF1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Counts pooled over all folds.
    pub pooled: TaskF1,
}

fn paragraphs(sections: &[LabeledSection], idx: impl Iterator<Item = usize>) -> Vec<LabeledParagraph> {
    idx.flat_map(|i| sections[i].paragraphs.iter().cloned()).collect()
}

/// k-fold cross-validation with folds split by paper.
pub fn cross_validate(
    sections: &[LabeledSection],
    k: usize,
    config: &ModelConfig,
    tc: &TrainConfig,
    w: &LossWeights,
) -> Result<CvReport, TaggerError> {
    if k < 2 {
        return Err(TaggerError::Config("cross-validation needs at least 2 folds".into()));
    }
    let folds = folds_by_paper(sections, k, tc.seed);
    let mut results = Vec::with_capacity(k);
    let mut pooled: Option<TaskF1> = None;
    for (f, test_idx) in folds.iter().enumerate() {
        if test_idx.is_empty() {
            log::warn!("fold {f} has no papers");
            continue;
        }
        let train_idx = folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied());
        let train_data = paragraphs(sections, train_idx);
        let test_data = paragraphs(sections, test_idx.iter().copied());
        let (model, _) = train(&train_data, None, config, tc, w, None)?;
        let scores = evaluate(&model, &test_data)?;
        pooled = Some(pooled.map_or(scores, |p| p.merge(&scores)));
        results.push(FoldResult {
            fold: f,
            test_papers: test_idx.iter().map(|&i| sections[i].paper_id.clone()).collect(),
            scores,
        });
    }
    Ok(CvReport {
        folds: results,
        pooled: pooled.ok_or(TaggerError::EmptyDataset)?,
    })
}

pub struct DistantRound {
    pub silver: Vec<LabeledSection>,
    pub model: TaggerModel,
    pub log: Vec<EpochRecord>,
}

/// Labels the unlabeled sections with `model`, then trains a new model on
/// gold plus silver data with the same configuration.
pub fn distant_supervision_round(
    model: &TaggerModel,
    gold: &[LabeledSection],
    unlabeled: &[RelatedWorkSection],
    log: Option<&mut dyn Write>,
) -> Result<DistantRound, TaggerError> {
    if unlabeled.is_empty() {
        log::warn!("no unlabeled sections; distant supervision round skipped");
        return Ok(DistantRound {
            silver: Vec::new(),
            model: model.clone(),
            log: Vec::new(),
        });
    }
    let mut silver = Vec::with_capacity(unlabeled.len());
    for section in unlabeled {
        let mut paragraphs = Vec::with_capacity(section.paragraphs.len());
        for p in &section.paragraphs {
            match model.predict(p) {
                Ok(lp) => paragraphs.push(lp),
                Err(e) => log::warn!("{}: skipping paragraph: {e}", section.paper_id),
            }
        }
        silver.push(LabeledSection {
            paper_id: section.paper_id.clone(),
            year: section.year,
            paragraphs,
        });
    }
    let data: Vec<LabeledParagraph> = gold
        .iter()
        .chain(&silver)
        .flat_map(|s| s.paragraphs.iter().cloned())
        .collect();
    let (retrained, records) = train(&data, None, &model.config, &model.train_config, &model.loss_weights, log)?;
    Ok(DistantRound {
        silver,
        model: retrained,
        log: records,
    })
}
