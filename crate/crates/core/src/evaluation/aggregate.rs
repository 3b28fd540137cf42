//! Dataset-level aggregation of per-image counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::SemanticClass;

use super::{ClassCounts, EvalError, PerImageCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Each image's class metric weighted by its ground-truth pixel count.
    SampleNormalizedMacro,
    /// Per image, pool the classes; then average over images.
    Micro,
    /// Pool everything.
    Macro,
    /// Per class, pool the images; then average over classes.
    PerClassMacro,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::SampleNormalizedMacro, Strategy::Micro, Strategy::Macro, Strategy::PerClassMacro];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SampleNormalizedMacro => "sample-normalized-macro",
            Strategy::Micro => "micro",
            Strategy::Macro => "macro",
            Strategy::PerClassMacro => "per-class-macro",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        Strategy::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| EvalError::UnknownStrategy(s.to_string()))
    }
}

/// Classes entering the headline means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSet {
    #[default]
    Geographic,
    All,
}

impl ClassSet {
    pub fn classes(self) -> &'static [SemanticClass] {
        match self {
            ClassSet::Geographic => &SemanticClass::GEOGRAPHIC,
            ClassSet::All => &SemanticClass::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Measure {
    Precision,
    Recall,
    Iou,
}

impl Measure {
    fn denominator(self, c: &ClassCounts) -> u64 {
        match self {
            Measure::Precision => c.pred,
            Measure::Recall => c.gt,
            Measure::Iou => c.union,
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Pooled ratio `Σ ∩ / Σ denominator` over the given counts.
fn pooled<'a>(counts: impl IntoIterator<Item = &'a ClassCounts>, m: Measure) -> Option<f64> {
    let (mut num, mut den) = (0u64, 0u64);
    for c in counts {
        num += c.intersection;
        den += m.denominator(c);
    }
    (den > 0).then(|| num as f64 / den as f64)
}

/// Ground-truth-weighted mean of per-image ratios for one class. Images
/// where the ratio is undefined drop out of both sums.
fn sample_normalized(images: &[PerImageCounts], k: SemanticClass, m: Measure) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0u64);
    for img in images {
        let c = img.class(k);
        let d = m.denominator(c);
        if d == 0 || c.gt == 0 {
            continue;
        }
        num += c.intersection as f64 / d as f64 * c.gt as f64;
        den += c.gt;
    }
    (den > 0).then(|| num / den as f64)
}

fn class_value(images: &[PerImageCounts], strategy: Strategy, k: SemanticClass, m: Measure) -> Option<f64> {
    match strategy {
        Strategy::SampleNormalizedMacro => sample_normalized(images, k, m),
        _ => pooled(images.iter().map(|i| i.class(k)), m),
    }
}

fn headline(images: &[PerImageCounts], strategy: Strategy, set: &[SemanticClass], m: Measure) -> Option<f64> {
    match strategy {
        Strategy::SampleNormalizedMacro | Strategy::PerClassMacro => {
            mean(set.iter().filter_map(|&k| class_value(images, strategy, k, m)))
        }
        Strategy::Micro => mean(images.iter().filter_map(|img| pooled(set.iter().map(|&k| img.class(k)), m))),
        Strategy::Macro => pooled(images.iter().flat_map(|img| set.iter().map(move |&k| img.class(k))), m),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: SemanticClass,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub id: String,
    /// Mean IoU over the report's class set, skipping undefined classes.
    pub miou: Option<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub class_set: ClassSet,
    pub per_class: Vec<ClassEntry>,
    pub miou: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_precision: Option<f64>,
    /// `(mP + mR) / 2`.
    pub prm: Option<f64>,
    /// Harmonic mean of mP and mR.
    pub f1: Option<f64>,
    /// Correct pixels over all pixels.
    pub accuracy: f64,
    pub images: usize,
    pub pixels: u64,
    pub per_image: Vec<ImageSummary>,
}

pub fn aggregate(images: &[PerImageCounts], strategy: Strategy, class_set: ClassSet) -> Result<MetricsReport, EvalError> {
    if images.is_empty() {
        return Err(EvalError::Empty);
    }
    let set = class_set.classes();
    let per_class = SemanticClass::ALL
        .iter()
        .map(|&k| ClassEntry {
            class: k,
            precision: class_value(images, strategy, k, Measure::Precision),
            recall: class_value(images, strategy, k, Measure::Recall),
            iou: class_value(images, strategy, k, Measure::Iou),
        })
        .collect();
    let miou = headline(images, strategy, set, Measure::Iou);
    let mean_recall = headline(images, strategy, set, Measure::Recall);
    let mean_precision = headline(images, strategy, set, Measure::Precision);
    let (prm, f1) = match (mean_precision, mean_recall) {
        (Some(p), Some(r)) => (Some((p + r) / 2.0), Some(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })),
        _ => (None, None),
    };
    let correct: u64 = images.iter().map(|i| i.correct).sum();
    let pixels: u64 = images.iter().map(|i| i.total).sum();
    let per_image = images
        .iter()
        .map(|img| ImageSummary {
            id: img.id.clone(),
            miou: mean(set.iter().filter_map(|&k| img.class(k).metrics().iou)),
            accuracy: img.correct as f64 / img.total.max(1) as f64,
        })
        .collect();
    Ok(MetricsReport {
        strategy,
        class_set,
        per_class,
        miou,
        mean_recall,
        mean_precision,
        prm,
        f1,
        accuracy: correct as f64 / pixels.max(1) as f64,
        images: images.len(),
        pixels,
        per_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::NUM_CLASSES;

    fn image(built: ClassCounts) -> PerImageCounts {
        let mut classes = [ClassCounts::default(); NUM_CLASSES];
        classes[SemanticClass::Built.index()] = built;
        PerImageCounts { id: String::new(), classes, correct: built.intersection, total: built.union }
    }

    #[test]
    fn weighted_class_iou() {
        // IoU 0.5 with |Y| = 100, IoU 1.0 with |Y| = 300.
        let a = image(ClassCounts { gt: 100, pred: 100, intersection: 66, union: 132 });
        let b = image(ClassCounts { gt: 300, pred: 300, intersection: 300, union: 300 });
        let r = aggregate(&[a, b], Strategy::SampleNormalizedMacro, ClassSet::Geographic).unwrap();
        let built = &r.per_class[SemanticClass::Built.index()];
        assert!((built.iou.unwrap() - 0.875).abs() < 1e-15);
        assert_eq!(r.miou, built.iou);
    }

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("median".parse::<Strategy>().is_err());
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate(&[], Strategy::Micro, ClassSet::All), Err(EvalError::Empty)));
    }
}
