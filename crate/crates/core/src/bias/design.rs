//! Encoding metadata records as a regression design.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{BiasError, MetadataRecord, Partition};

/// Category values seen fewer times than this are excluded.
pub const DEFAULT_MIN_COUNT: usize = 5;
const MIN_RECORDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    /// Partition-standardized mIoU.
    pub y: DVector<f64>,
    /// Ids of the retained records, in row order.
    pub ids: Vec<String>,
    /// Ids removed for carrying a rare category value.
    pub excluded: Vec<String>,
}

type Categorical = fn(&MetadataRecord) -> &str;

const CATEGORICALS: [(&str, Categorical); 3] = [
    ("institution", |r| &r.institution),
    ("pub_country", |r| &r.pub_country),
    ("cov_country", |r| &r.cov_country),
];

/// Drops records with a rare value in any categorical, repeating until no
/// count falls below `min_count` (a drop can make another value rare).
fn exclude_rare(mut records: Vec<&MetadataRecord>, min_count: usize) -> (Vec<&MetadataRecord>, Vec<String>) {
    let mut excluded = Vec::new();
    loop {
        let mut counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); CATEGORICALS.len()];
        for r in &records {
            for (c, (_, get)) in counts.iter_mut().zip(CATEGORICALS) {
                *c.entry(get(r)).or_default() += 1;
            }
        }
        let before = records.len();
        records.retain(|r| {
            let keep = counts.iter().zip(CATEGORICALS).all(|(c, (_, get))| c[get(r)] >= min_count);
            if !keep {
                excluded.push(r.id.clone());
            }
            keep
        });
        if records.len() == before {
            return (records, excluded);
        }
    }
}

/// Maps values linearly onto `[0, 1]`; a constant input maps to zeros.
fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Per-partition z-scores with the sample (n − 1) standard deviation.
fn standardize(records: &[&MetadataRecord]) -> Result<Vec<f64>, BiasError> {
    let mut groups: BTreeMap<Partition, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(r.partition).or_default().push(r.miou);
    }
    let mut stats = BTreeMap::new();
    for (p, v) in &groups {
        if v.len() < 2 {
            return Err(BiasError::SmallPartition(p.name().into()));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(BiasError::ConstantPartition(p.name().into()));
        }
        stats.insert(*p, (mean, sd));
    }
    Ok(records
        .iter()
        .map(|r| {
            let (mean, sd) = stats[&r.partition];
            (r.miou - mean) / sd
        })
        .collect())
}

pub fn build_design(records: &[MetadataRecord], min_count: usize) -> Result<DesignMatrix, BiasError> {
    if records.len() < MIN_RECORDS {
        return Err(BiasError::TooFewRecords { have: records.len(), need: MIN_RECORDS });
    }
    for r in records {
        r.validate()?;
    }
    let (kept, excluded) = exclude_rare(records.iter().collect(), min_count);
    if kept.len() < MIN_RECORDS {
        return Err(BiasError::TooFewRecords { have: kept.len(), need: MIN_RECORDS });
    }
    let y = standardize(&kept)?;

    let mut columns = vec!["Intercept".to_string()];
    let mut data: Vec<Vec<f64>> = vec![vec![1.0; kept.len()]];
    for (name, get) in CATEGORICALS {
        // The lexicographically first level is the reference.
        let levels: BTreeSet<&str> = kept.iter().map(|r| get(r)).collect();
        for level in levels.into_iter().skip(1) {
            columns.push(format!("C({name})[T.{level}]"));
            data.push(kept.iter().map(|r| if get(r) == level { 1.0 } else { 0.0 }).collect());
        }
    }
    let continuous = [
        ("log_scale", min_max(&kept.iter().map(|r| r.scale_denominator.log10()).collect::<Vec<_>>())),
        ("pub_year", min_max(&kept.iter().map(|r| r.pub_year as f64).collect::<Vec<_>>())),
    ];
    for (name, col) in continuous {
        if col.iter().any(|&v| v != 0.0) {
            columns.push(name.to_string());
            data.push(col);
        }
    }
    let x = DMatrix::from_fn(kept.len(), data.len(), |i, j| data[j][i]);
    Ok(DesignMatrix {
        columns,
        x,
        y: DVector::from_vec(y),
        ids: kept.iter().map(|r| r.id.clone()).collect(),
        excluded,
    })
}
