//! Ordinary least squares via QR with normal-approximation inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{BiasError, DesignMatrix};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;
/// Relative residual norm under which a column counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsOptions {
    /// Drop linearly dependent columns instead of failing.
    pub prune_collinear: bool,
}

impl Default for OlsOptions {
    fn default() -> Self {
        Self { prune_collinear: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub n: usize,
    pub dropped_columns: Vec<String>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl OlsResult {
    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Indices of columns that are linear combinations of earlier ones,
/// found by Gram-Schmidt with re-orthogonalization.
fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let rest = v.norm();
        if norm == 0.0 || rest <= DEPENDENCE_TOL * norm {
            dependent.push(j);
        } else {
            basis.push(v / rest);
        }
    }
    dependent
}

/// Two-sided p-value of a standard normal statistic.
fn normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn ols_fit(design: &DesignMatrix, options: OlsOptions) -> Result<OlsResult, BiasError> {
    let dependent = dependent_columns(&design.x);
    if !dependent.is_empty() && !options.prune_collinear {
        return Err(BiasError::RankDeficient(dependent.iter().map(|&j| design.columns[j].clone()).collect()));
    }
    let keep: Vec<usize> = (0..design.x.ncols()).filter(|j| !dependent.contains(j)).collect();
    let x = design.x.select_columns(&keep);
    let (n, p) = x.shape();
    if n <= p {
        return Err(BiasError::Underdetermined { rows: n, columns: p });
    }
    let y = &design.y;
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| {
        BiasError::RankDeficient(keep.iter().map(|&j| design.columns[j].clone()).collect())
    })?;
    let residuals = y - &x * &beta;
    let rss = residuals.norm_squared();
    let mean = y.mean();
    let tss = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else if rss == 0.0 { 1.0 } else { 0.0 };
    let s2 = rss / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("triangular factor of a full-rank design is invertible");

    let coefficients = keep
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            // diag((XᵀX)⁻¹) = row norms of R⁻¹.
            let se = (s2 * r_inv.row(i).norm_squared()).sqrt();
            let est = beta[i];
            let p = if se > 0.0 {
                normal_p(est / se)
            } else if est == 0.0 {
                1.0
            } else {
                0.0
            };
            Coefficient {
                name: design.columns[j].clone(),
                estimate: est,
                se,
                ci_low: est - Z_95 * se,
                ci_high: est + Z_95 * se,
                p,
            }
        })
        .collect();
    Ok(OlsResult {
        coefficients,
        r2,
        n,
        dropped_columns: dependent.iter().map(|&j| design.columns[j].clone()).collect(),
        residuals: residuals.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        let n = y.len();
        DesignMatrix {
            columns: (0..cols.len()).map(|j| format!("c{j}")).collect(),
            x: DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]),
            y: DVector::from_vec(y),
            ids: Vec::new(),
            excluded: Vec::new(),
        }
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let d = design(vec![vec![1.0; 10], xs.clone()], xs.iter().map(|x| 2.0 * x + 1.0).collect());
        let r = ols_fit(&d, OlsOptions::default()).unwrap();
        assert!((r.coefficients[0].estimate - 1.0).abs() < 1e-12);
        assert!((r.coefficients[1].estimate - 2.0).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert!(r.coefficients.iter().all(|c| c.se < 1e-6));
    }

    #[test]
    fn duplicate_column_is_pruned() {
        let xs: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let base = ols_fit(&design(vec![vec![1.0; 10], xs.clone()], y.clone()), OlsOptions::default()).unwrap();
        let dup = design(vec![vec![1.0; 10], xs.clone(), xs.iter().map(|v| v * 2.0).collect()], y);
        let r = ols_fit(&dup, OlsOptions::default()).unwrap();
        assert_eq!(r.dropped_columns, ["c2"]);
        for (a, b) in base.coefficients.iter().zip(&r.coefficients) {
            assert!((a.estimate - b.estimate).abs() < 1e-12);
        }
        assert!(matches!(
            ols_fit(&dup, OlsOptions { prune_collinear: false }),
            Err(BiasError::RankDeficient(c)) if c == ["c2"]
        ));
    }

    #[test]
    fn normal_p_values() {
        assert!((normal_p(1.96) - 0.05).abs() < 1e-3);
        assert_eq!(normal_p(0.0), 1.0);
    }
}
