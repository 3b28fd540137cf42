//! Regression of standardized per-patch mIoU on map metadata.

mod design;
mod ols;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{build_design, DesignMatrix, DEFAULT_MIN_COUNT};
pub use ols::{ols_fit, Coefficient, OlsOptions, OlsResult, Z_95};

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("need at least {need} records, have {have}")]
    TooFewRecords { have: usize, need: usize },
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("partition `{0}` has fewer than two records")]
    SmallPartition(String),
    #[error("mIoU has zero variance in partition `{0}`")]
    ConstantPartition(String),
    #[error("{rows} rows cannot identify {columns} coefficients")]
    Underdetermined { rows: usize, columns: usize },
    #[error("design is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("metadata CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

/// One patch with its metadata and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub id: String,
    pub partition: Partition,
    pub institution: String,
    pub pub_country: String,
    pub cov_country: String,
    /// `d` of a `1:d` map scale.
    pub scale_denominator: f64,
    pub pub_year: i32,
    pub miou: f64,
}

impl MetadataRecord {
    pub fn validate(&self) -> Result<(), BiasError> {
        let bad = |reason: String| BiasError::InvalidRecord { id: self.id.clone(), reason };
        if !(1400..=2030).contains(&self.pub_year) {
            return Err(bad(format!("publication year {} outside 1400-2030", self.pub_year)));
        }
        if !(self.scale_denominator.is_finite() && self.scale_denominator >= 1.0) {
            return Err(bad(format!("invalid scale denominator {}", self.scale_denominator)));
        }
        if !(0.0..=1.0).contains(&self.miou) {
            return Err(bad(format!("mIoU {} outside [0, 1]", self.miou)));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvRow {
    id: String,
    partition: Partition,
    institution: String,
    pub_country: String,
    cov_country: String,
    scale_denominator: f64,
    pub_year: i32,
}

/// Joins metadata rows with scores by id. Rows without a score are
/// returned separately rather than failing the whole load.
pub fn read_metadata(
    csv_data: impl Read,
    scores: &BTreeMap<String, f64>,
) -> Result<(Vec<MetadataRecord>, Vec<String>), BiasError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_data);
    let mut records = Vec::new();
    let mut unscored = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row?;
        let Some(&miou) = scores.get(&row.id) else {
            unscored.push(row.id);
            continue;
        };
        let rec = MetadataRecord {
            id: row.id,
            partition: row.partition,
            institution: row.institution,
            pub_country: row.pub_country,
            cov_country: row.cov_country,
            scale_denominator: row.scale_denominator,
            pub_year: row.pub_year,
            miou,
        };
        rec.validate()?;
        records.push(rec);
    }
    Ok((records, unscored))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_join() {
        let csv = "id,partition,institution,pub_country,cov_country,scale_denominator,pub_year\n\
                   a,train,BnF,France,France,25000,1880\n\
                   b,test,LoC,USA,Mexico,1000000,1902\n";
        let scores = BTreeMap::from([("a".to_string(), 0.7)]);
        let (recs, missing) = read_metadata(csv.as_bytes(), &scores).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].partition, Partition::Train);
        assert_eq!(missing, vec!["b".to_string()]);
    }

    #[test]
    fn implausible_year() {
        let csv = "id,partition,institution,pub_country,cov_country,scale_denominator,pub_year\n\
                   a,val,X,Y,Z,5000,1200\n";
        let scores = BTreeMap::from([("a".to_string(), 0.5)]);
        assert!(matches!(read_metadata(csv.as_bytes(), &scores), Err(BiasError::InvalidRecord { .. })));
    }
}
