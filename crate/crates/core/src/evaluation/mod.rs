//! Pixel counting, metric aggregation, confusion matrices and class-area
//! shares.

mod aggregate;
mod confusion;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{LabelMask, MaskError};
use crate::{SemanticClass, NUM_CLASSES};

pub use aggregate::{aggregate, ClassSet, ImageSummary, MetricsReport, Strategy};
pub use confusion::{confusion, ConfusionMatrix, Normalization};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction is {pred_width}x{pred_height} but ground truth is {gt_width}x{gt_height}")]
    ShapeMismatch { pred_width: u32, pred_height: u32, gt_width: u32, gt_height: u32 },
    #[error("nothing to evaluate")]
    Empty,
    #[error("{preds} predictions for {gts} ground-truth masks")]
    CountMismatch { preds: usize, gts: usize },
    #[error("unknown aggregation strategy `{0}`")]
    UnknownStrategy(String),
    #[error("no prediction for {0}")]
    MissingPrediction(PathBuf),
    #[error("{path}: {source}")]
    Mask { path: PathBuf, source: MaskError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pixel counts for one class in one image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    /// |Y|: ground-truth pixels.
    pub gt: u64,
    /// |Ŷ|: predicted pixels.
    pub pred: u64,
    pub intersection: u64,
    pub union: u64,
}

/// Per-class ratios; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iou: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ClassCounts {
    pub fn metrics(&self) -> ClassMetrics {
        ClassMetrics {
            precision: ratio(self.intersection, self.pred),
            recall: ratio(self.intersection, self.gt),
            iou: ratio(self.intersection, self.union),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerImageCounts {
    pub id: String,
    pub classes: [ClassCounts; NUM_CLASSES],
    pub correct: u64,
    pub total: u64,
}

impl PerImageCounts {
    pub fn class(&self, c: SemanticClass) -> &ClassCounts {
        &self.classes[c.index()]
    }

    pub fn metrics(&self) -> [ClassMetrics; NUM_CLASSES] {
        self.classes.map(|c| c.metrics())
    }
}

fn check_shapes(pred: &LabelMask, gt: &LabelMask) -> Result<(), EvalError> {
    if pred.dims() != gt.dims() {
        return Err(EvalError::ShapeMismatch {
            pred_width: pred.width(),
            pred_height: pred.height(),
            gt_width: gt.width(),
            gt_height: gt.height(),
        });
    }
    Ok(())
}

/// Exact integer counts for one prediction against its ground truth.
pub fn per_image_metrics(id: &str, pred: &LabelMask, gt: &LabelMask) -> Result<PerImageCounts, EvalError> {
    check_shapes(pred, gt)?;
    let mut joint = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &g) in pred.as_raw().iter().zip(gt.as_raw()) {
        joint[g as usize][p as usize] += 1;
    }
    let mut classes = [ClassCounts::default(); NUM_CLASSES];
    for (k, c) in classes.iter_mut().enumerate() {
        let gt: u64 = joint[k].iter().sum();
        let pred: u64 = joint.iter().map(|row| row[k]).sum();
        let intersection = joint[k][k];
        *c = ClassCounts { gt, pred, intersection, union: gt + pred - intersection };
    }
    let correct = (0..NUM_CLASSES).map(|k| joint[k][k]).sum();
    Ok(PerImageCounts { id: id.to_string(), classes, correct, total: pred.len() as u64 })
}

/// Counts a batch of aligned pairs in parallel, preserving input order.
pub fn count_all(pairs: &[(String, LabelMask, LabelMask)]) -> Result<Vec<PerImageCounts>, EvalError> {
    pairs.par_iter().map(|(id, pred, gt)| per_image_metrics(id, pred, gt)).collect()
}

/// Per-class pixel shares in percent over all masks.
pub fn class_area(masks: &[LabelMask]) -> Result<[f64; NUM_CLASSES], EvalError> {
    if masks.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = [0u64; NUM_CLASSES];
    for m in masks {
        for (c, v) in counts.iter_mut().zip(m.class_counts()) {
            *c += v;
        }
    }
    let total: u64 = counts.iter().sum();
    Ok(counts.map(|c| 100.0 * c as f64 / total as f64))
}

/// Pairs the ground-truth masks in `gt_dir` with the same-named file in
/// `pred_dir`, falling back to the name without a `_mask` suffix. When any
/// `*_mask.png` exists only those count as ground truth, so a directory of
/// PNG images with their masks works as is. Sorted by name.
pub fn load_pairs(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<(String, LabelMask, LabelMask)>, EvalError> {
    let mut gts: Vec<PathBuf> = std::fs::read_dir(gt_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    let is_mask = |p: &PathBuf| p.file_stem().is_some_and(|s| s.to_string_lossy().ends_with("_mask"));
    if gts.iter().any(is_mask) {
        gts.retain(is_mask);
    }
    gts.sort();
    if gts.is_empty() {
        return Err(EvalError::Empty);
    }
    let load = |path: &Path| LabelMask::load_png(path).map_err(|source| EvalError::Mask { path: path.to_path_buf(), source });
    gts.par_iter()
        .map(|gt_path| {
            let name = gt_path.file_name().expect("listed file").to_string_lossy().into_owned();
            let stem = name.trim_end_matches(".png");
            let id = stem.strip_suffix("_mask").unwrap_or(stem).to_string();
            let pred_path = [pred_dir.join(&name), pred_dir.join(format!("{id}.png"))]
                .into_iter()
                .find(|p| p.is_file())
                .ok_or_else(|| EvalError::MissingPrediction(pred_dir.join(&name)))?;
            Ok((id, load(&pred_path)?, load(gt_path)?))
        })
        .collect()
}
