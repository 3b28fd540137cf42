//! Least squares against the normal equations, plus design-matrix behaviour.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cartoseg::bias::{
    build_design, ols_fit, read_metadata, BiasError, DesignMatrix, MetadataRecord, OlsOptions, Partition,
};

fn design(x: DMatrix<f64>, y: DVector<f64>) -> DesignMatrix {
    DesignMatrix {
        columns: (0..x.ncols()).map(|j| format!("c{j}")).collect(),
        x,
        y,
        ids: Vec::new(),
        excluded: Vec::new(),
    }
}

fn random_design(seed: u64, n: usize, p: usize) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    design(x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_normal_equations(seed in any::<u64>()) {
        let d = random_design(seed, 50, 5);
        let r = ols_fit(&d, OlsOptions::default()).unwrap();
        let xtx = d.x.transpose() * &d.x;
        let inv = xtx.clone().try_inverse().unwrap();
        let beta = &inv * d.x.transpose() * &d.y;
        let resid = &d.y - &d.x * &beta;
        let s2 = resid.norm_squared() / 45.0;
        for (j, c) in r.coefficients.iter().enumerate() {
            prop_assert!((c.estimate - beta[j]).abs() < 1e-9);
            prop_assert!((c.se - (s2 * inv[(j, j)]).sqrt()).abs() < 1e-9);
            prop_assert!((c.ci_high - c.ci_low - 2.0 * 1.96 * c.se).abs() < 1e-12);
        }
        let tss: f64 = d.y.iter().map(|v| (v - d.y.mean()).powi(2)).sum();
        prop_assert!((r.r2 - (1.0 - resid.norm_squared() / tss)).abs() < 1e-9);
    }

    #[test]
    fn row_order_is_irrelevant(seed in any::<u64>(), shift in 1usize..49) {
        let d = random_design(seed, 50, 4);
        let perm: Vec<usize> = (0..50).map(|i| (i + shift) % 50).collect();
        let shuffled = design(d.x.select_rows(&perm), DVector::from_fn(50, |i, _| d.y[perm[i]]));
        let (a, b) = (ols_fit(&d, OlsOptions::default()).unwrap(), ols_fit(&shuffled, OlsOptions::default()).unwrap());
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((ca.estimate - cb.estimate).abs() < 1e-10 && (ca.se - cb.se).abs() < 1e-10);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_columns(seed in any::<u64>()) {
        let d = random_design(seed, 80, 6);
        let r = ols_fit(&d, OlsOptions::default()).unwrap();
        let res = DVector::from_vec(r.residuals);
        prop_assert!((d.x.transpose() * res).amax() < 1e-8 * d.y.norm());
    }
}

#[test]
fn null_effects_are_covered_at_nominal_rate() {
    // y is independent of every column, so each 95% interval for a slope
    // should contain zero about 95% of the time.
    let (mut covered, mut total) = (0, 0);
    for seed in 0..200 {
        let r = ols_fit(&random_design(seed, 60, 4), OlsOptions::default()).unwrap();
        for c in &r.coefficients[1..] {
            covered += (c.ci_low <= 0.0 && 0.0 <= c.ci_high) as usize;
            total += 1;
        }
    }
    let rate = covered as f64 / total as f64;
    // Binomial sd at n = 600 is about 0.009; the normal quantile with
    // n − p = 56 residual dof under-covers slightly.
    assert!((0.90..=0.98).contains(&rate), "coverage {rate}");
}

#[test]
fn underdetermined_fit_fails() {
    let d = random_design(1, 3, 3);
    assert!(matches!(ols_fit(&d, OlsOptions::default()), Err(BiasError::Underdetermined { .. })));
}

fn record(i: usize, rng: &mut ChaCha8Rng) -> MetadataRecord {
    let institutions = ["BnF", "LoC", "SLUB", "KB"];
    let countries = ["France", "USA", "Germany", "Japan", "Chile"];
    MetadataRecord {
        id: format!("p{i:04}"),
        partition: [Partition::Train, Partition::Val, Partition::Test][i % 3],
        institution: institutions[rng.random_range(0..4)].into(),
        pub_country: countries[rng.random_range(0..5)].into(),
        cov_country: countries[rng.random_range(0..5)].into(),
        scale_denominator: 10f64.powf(rng.random_range(3.0..7.0)),
        pub_year: rng.random_range(1700..1950),
        miou: rng.random_range(0.0..1.0),
    }
}

#[test]
fn design_from_csv() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let recs: Vec<MetadataRecord> = (0..300).map(|i| record(i, &mut rng)).collect();
    let mut csv = String::from("id,partition,institution,pub_country,cov_country,scale_denominator,pub_year\n");
    let mut scores = BTreeMap::new();
    for r in &recs {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id,
            r.partition.name(),
            r.institution,
            r.pub_country,
            r.cov_country,
            r.scale_denominator,
            r.pub_year
        ));
        scores.insert(r.id.clone(), r.miou);
    }
    let (loaded, unscored) = read_metadata(csv.as_bytes(), &scores).unwrap();
    assert!(unscored.is_empty());
    assert_eq!(loaded, recs);

    let d = build_design(&loaded, 5).unwrap();
    // Intercept + 3 institutions + 4 + 4 countries + two continuous.
    assert_eq!(d.columns.len(), 1 + 3 + 4 + 4 + 2);
    assert_eq!(d.columns[1], "C(institution)[T.KB]");
    assert!(d.columns.contains(&"C(cov_country)[T.USA]".to_string()));
    assert!(!d.columns.contains(&"C(cov_country)[T.Chile]".to_string()));
    let r = ols_fit(&d, OlsOptions::default()).unwrap();
    assert_eq!(r.n, 300);
    assert!(r.dropped_columns.is_empty());
    assert!(r.coefficients.iter().all(|c| (0.0..=1.0).contains(&c.p)));
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"r2\""));
}

#[test]
fn rare_values_cascade() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut recs: Vec<MetadataRecord> = (0..60)
        .map(|i| {
            let mut r = record(i, &mut rng);
            r.institution = "BnF".into();
            r.pub_country = "France".into();
            r.cov_country = "France".into();
            r
        })
        .collect();
    // Five "Peru" records survive on their own, but one of them has a rare
    // institution; dropping it leaves four and Peru becomes rare too.
    for i in 60..65 {
        let mut r = record(i, &mut rng);
        r.institution = "BnF".into();
        r.pub_country = "France".into();
        r.cov_country = "Peru".into();
        recs.push(r);
    }
    recs[64].institution = "Unique".into();
    let d = build_design(&recs, 5).unwrap();
    assert_eq!(d.excluded.len(), 5);
    assert_eq!(d.ids.len(), 60);
}
