//! Pixel confusion matrices, indexed `[actual][predicted]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::mask::LabelMask;
use crate::{SemanticClass, NUM_CLASSES};

use super::{check_shapes, EvalError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Each predicted-class column sums to one; the diagonal is precision.
    PerPrediction,
    /// Each actual-class row sums to one; the diagonal is recall.
    PerGroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Ground-truth pixels per class.
    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }

    /// Predicted pixels per class.
    pub fn column_sums(&self) -> [u64; NUM_CLASSES] {
        std::array::from_fn(|p| self.counts.iter().map(|r| r[p]).sum())
    }

    /// Normalized copy; all-zero rows or columns stay zero.
    pub fn normalized(&self, mode: Normalization) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let rows = self.row_sums();
        let cols = self.column_sums();
        std::array::from_fn(|a| {
            std::array::from_fn(|p| {
                let v = self.counts[a][p] as f64;
                let d = match mode {
                    Normalization::None => 1,
                    Normalization::PerPrediction => cols[p],
                    Normalization::PerGroundTruth => rows[a],
                };
                if d == 0 {
                    0.0
                } else {
                    v / d as f64
                }
            })
        })
    }

    /// CSV with a header row of class names and one row per actual class.
    pub fn write_csv(&self, mode: Normalization, w: impl Write) -> Result<(), EvalError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| EvalError::Io(e.into());
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(SemanticClass::ALL.iter().map(|c| c.name().to_string()));
        out.write_record(&header).map_err(io)?;
        let values = self.normalized(mode);
        for (a, row) in values.iter().enumerate() {
            let mut rec = vec![SemanticClass::ALL[a].name().to_string()];
            rec.extend(row.iter().map(|v| match mode {
                Normalization::None => format!("{}", *v as u64),
                _ => format!("{v}"),
            }));
            out.write_record(&rec).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Accumulates `[actual][predicted]` counts over aligned mask pairs.
pub fn confusion<'a>(
    pairs: impl IntoIterator<Item = (&'a LabelMask, &'a LabelMask)>,
) -> Result<ConfusionMatrix, EvalError> {
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut any = false;
    for (pred, gt) in pairs {
        check_shapes(pred, gt)?;
        any = true;
        for (&p, &g) in pred.as_raw().iter().zip(gt.as_raw()) {
            counts[g as usize][p as usize] += 1;
        }
    }
    if !any {
        return Err(EvalError::Empty);
    }
    Ok(ConfusionMatrix { counts })
}
