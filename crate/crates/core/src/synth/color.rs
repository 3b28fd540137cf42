//! Per-class Gaussian mixtures over RGB: fitting by EM, sampling, and
//! log-density evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mask::SemanticClass;
use crate::rng::{self, Stage};

use super::SynthError;

/// Covariance floor added on every M-step.
pub const COVARIANCE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
}

impl GaussianComponent {
    pub fn isotropic(weight: f64, mean: [f64; 3], sd: f64) -> Self {
        let v = sd * sd;
        Self { weight, mean, cov: [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]] }
    }

    fn cov_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.cov[r][c])
    }

    /// A lower factor `L` with `L Lᵀ = Σ`, tolerating singular covariances.
    fn factor(&self) -> Matrix3<f64> {
        let cov = self.cov_matrix();
        if let Some(ch) = cov.cholesky() {
            return ch.l();
        }
        let eig = SymmetricEigen::new(cov);
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        eig.eigenvectors * Matrix3::from_diagonal(&sqrt)
    }
}

/// A mixture prepared for per-pixel log-density evaluation.
pub struct MixtureDensity {
    terms: Vec<DensityTerm>,
}

impl MixtureDensity {
    pub fn log_density(&self, rgb: [f64; 3]) -> f64 {
        let x = Vector3::from(rgb);
        let mut v = [0.0f64; 16];
        if self.terms.len() > v.len() {
            let all: Vec<f64> = self.terms.iter().map(|t| t.log_weight + t.log_pdf(&x)).collect();
            return log_sum_exp(&all);
        }
        for (slot, t) in v.iter_mut().zip(&self.terms) {
            *slot = t.log_weight + t.log_pdf(&x);
        }
        log_sum_exp(&v[..self.terms.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMixture {
    pub components: Vec<GaussianComponent>,
}

/// Precomputed inverse and normalizer for one component.
struct DensityTerm {
    log_weight: f64,
    mean: Vector3<f64>,
    inv: Matrix3<f64>,
    log_norm: f64,
}

impl DensityTerm {
    fn new(c: &GaussianComponent) -> Self {
        let mut cov = c.cov_matrix();
        let ch = match cov.cholesky() {
            Some(ch) => ch,
            None => {
                cov += Matrix3::identity() * COVARIANCE_FLOOR;
                cov.cholesky().unwrap_or_else(|| {
                    nalgebra::Cholesky::new(Matrix3::identity() * COVARIANCE_FLOOR).expect("floor is SPD")
                })
            }
        };
        let log_det = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Self {
            log_weight: c.weight.ln(),
            mean: Vector3::from(c.mean),
            inv: ch.inverse(),
            log_norm: -0.5 * (3.0 * (2.0 * PI).ln() + log_det),
        }
    }

    #[inline]
    fn log_pdf(&self, x: &Vector3<f64>) -> f64 {
        let d = x - self.mean;
        self.log_norm - 0.5 * (d.transpose() * self.inv * d)[(0, 0)]
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl ClassMixture {
    pub fn validate(&self, class: SemanticClass) -> Result<(), SynthError> {
        let bad = |msg: String| SynthError::ColorModel(format!("{class}: {msg}"));
        if self.components.is_empty() {
            return Err(bad("no components".into()));
        }
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > 1e-9 || self.components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(bad(format!("weights sum to {sum}")));
        }
        for c in &self.components {
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite mean".into()));
            }
            let m = c.cov_matrix();
            let scale = m.abs().max().max(1.0);
            if (m - m.transpose()).abs().max() > 1e-9 * scale {
                return Err(bad("covariance is not symmetric".into()));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite covariance".into()));
            }
            let eig = SymmetricEigen::new(m);
            if eig.eigenvalues.min() < -1e-9 * scale {
                return Err(bad("covariance is not positive semi-definite".into()));
            }
        }
        Ok(())
    }

    fn terms(&self) -> Vec<DensityTerm> {
        self.components.iter().filter(|c| c.weight > 0.0).map(DensityTerm::new).collect()
    }

    pub fn log_density(&self, rgb: [f64; 3]) -> f64 {
        self.density().log_density(rgb)
    }

    /// Precomputes inverses and normalizers for repeated evaluation.
    pub fn density(&self) -> MixtureDensity {
        MixtureDensity { terms: self.terms() }
    }

    /// Mean log-likelihood per sample.
    pub fn mean_log_likelihood(&self, samples: &[[f64; 3]]) -> f64 {
        let terms = self.terms();
        let mut buf = vec![0.0; terms.len()];
        let total: f64 = samples
            .iter()
            .map(|s| {
                let x = Vector3::from(*s);
                for (b, t) in buf.iter_mut().zip(&terms) {
                    *b = t.log_weight + t.log_pdf(&x);
                }
                log_sum_exp(&buf)
            })
            .sum();
        total / samples.len() as f64
    }

    pub fn sample(&self, rng: &mut impl Rng) -> [u8; 3] {
        let mut u: f64 = rng.random();
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            if c.weight <= 0.0 {
                continue;
            }
            if u < c.weight {
                chosen = c;
                break;
            }
            u -= c.weight;
        }
        let z = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let v = Vector3::from(chosen.mean) + chosen.factor() * z;
        [0, 1, 2].map(|i| v[i].round().clamp(0.0, 255.0) as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorModel {
    pub classes: BTreeMap<SemanticClass, ClassMixture>,
}

impl ColorModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (class, m) in &self.classes {
            m.validate(*class)?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, SynthError> {
        let m: ColorModel = serde_json::from_str(s).map_err(|e| SynthError::ColorModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("color model serializes")
    }

    pub fn get(&self, class: SemanticClass) -> Result<&ClassMixture, SynthError> {
        self.classes.get(&class).ok_or(SynthError::MissingClass(class))
    }

    pub fn require_all(&self) -> Result<(), SynthError> {
        for c in SemanticClass::ALL {
            self.get(c)?;
        }
        Ok(())
    }

    /// A hand-tuned palette of engraved and hand-coloured map tones.
    pub fn default_palette() -> Self {
        use SemanticClass::*;
        let iso = GaussianComponent::isotropic;
        let mix = |components| ClassMixture { components };
        let classes = [
            (
                Background,
                mix(vec![
                    iso(0.5, [236.0, 228.0, 205.0], 7.0),
                    iso(0.3, [222.0, 210.0, 180.0], 9.0),
                    iso(0.2, [245.0, 242.0, 234.0], 4.0),
                ]),
            ),
            (
                Boundary,
                mix(vec![
                    iso(0.5, [60.0, 50.0, 45.0], 12.0),
                    iso(0.25, [150.0, 45.0, 45.0], 14.0),
                    iso(0.25, [95.0, 95.0, 95.0], 10.0),
                ]),
            ),
            (
                Built,
                mix(vec![
                    iso(0.4, [200.0, 110.0, 100.0], 14.0),
                    iso(0.3, [95.0, 85.0, 80.0], 12.0),
                    iso(0.3, [228.0, 160.0, 150.0], 11.0),
                ]),
            ),
            (
                NonBuilt,
                mix(vec![
                    iso(0.35, [220.0, 225.0, 190.0], 9.0),
                    iso(0.35, [188.0, 208.0, 160.0], 12.0),
                    iso(0.3, [232.0, 220.0, 188.0], 8.0),
                ]),
            ),
            (
                Water,
                mix(vec![
                    GaussianComponent {
                        weight: 0.4,
                        mean: [150.0, 190.0, 220.0],
                        cov: [[400.0, 250.0, 0.0], [250.0, 400.0, 0.0], [0.0, 0.0, 225.0]],
                    },
                    iso(0.35, [110.0, 155.0, 205.0], 16.0),
                    iso(0.25, [198.0, 220.0, 232.0], 8.0),
                ]),
            ),
            (
                RoadNetwork,
                mix(vec![
                    iso(0.4, [250.0, 246.0, 232.0], 4.0),
                    iso(0.3, [212.0, 172.0, 112.0], 12.0),
                    iso(0.3, [72.0, 62.0, 56.0], 10.0),
                ]),
            ),
        ]
        .into_iter()
        .collect();
        Self { classes }
    }
}

/// Draws one color for `class`.
pub fn sample_color(model: &ColorModel, class: SemanticClass, rng: &mut impl Rng) -> Result<[u8; 3], SynthError> {
    Ok(model.get(class)?.sample(rng))
}

/// Per-class trace of the EM run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    /// Mean log-likelihood after each E-step, starting from initialization.
    pub log_likelihood: BTreeMap<SemanticClass, Vec<f64>>,
}

pub fn fit_color_model(
    pixels_by_class: &BTreeMap<SemanticClass, Vec<[f64; 3]>>,
    components: usize,
    max_iter: usize,
    tol: f64,
) -> Result<(ColorModel, FitReport), SynthError> {
    if components == 0 {
        return Err(SynthError::Config("components must be positive".into()));
    }
    let mut classes = BTreeMap::new();
    let mut report = FitReport::default();
    for (&class, samples) in pixels_by_class {
        if samples.len() < components * 10 {
            return Err(SynthError::InsufficientData { class, have: samples.len(), need: components * 10 });
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SynthError::ColorModel(format!("{class}: non-finite sample")));
        }
        let (mix, trace) = fit_mixture(samples, components, max_iter, tol, class.id() as u64);
        classes.insert(class, mix);
        report.log_likelihood.insert(class, trace);
    }
    Ok((ColorModel { classes }, report))
}

/// k-means++ seeding followed by a few Lloyd iterations.
fn initial_means(xs: &[Vector3<f64>], k: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = rng::stream(rng::mix(0x0C01_0F17, seed), Stage::Colors);
    let mut means = vec![xs[rng.random_range(0..xs.len())]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - means[0]).norm_squared()).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = xs.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            xs[idx]
        } else {
            means[0]
        };
        means.push(next);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - next).norm_squared());
        }
    }
    for _ in 0..5 {
        let mut sums = vec![Vector3::zeros(); k];
        let mut counts = vec![0usize; k];
        for x in xs {
            let j = nearest(&means, x);
            sums[j] += x;
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                means[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    means
}

fn nearest(means: &[Vector3<f64>], x: &Vector3<f64>) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (j, m) in means.iter().enumerate() {
        let d = (x - m).norm_squared();
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

fn to_component(weight: f64, mean: Vector3<f64>, cov: Matrix3<f64>) -> GaussianComponent {
    let sym = (cov + cov.transpose()) * 0.5;
    GaussianComponent {
        weight,
        mean: [mean[0], mean[1], mean[2]],
        cov: [0, 1, 2].map(|r| [0, 1, 2].map(|c| sym[(r, c)])),
    }
}

fn fit_mixture(
    samples: &[[f64; 3]],
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> (ClassMixture, Vec<f64>) {
    let xs: Vec<Vector3<f64>> = samples.iter().map(|s| Vector3::from(*s)).collect();
    let n = xs.len();
    let floor = Matrix3::identity() * COVARIANCE_FLOOR;

    // Initial parameters from hard assignment to the seeded means.
    let means = initial_means(&xs, k, seed);
    let global_mean = xs.iter().sum::<Vector3<f64>>() / n as f64;
    let global_cov = xs.iter().map(|x| (x - global_mean) * (x - global_mean).transpose()).sum::<Matrix3<f64>>()
        / n as f64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, x) in xs.iter().enumerate() {
        members[nearest(&means, x)].push(i);
    }
    let mut mix = ClassMixture {
        components: (0..k)
            .map(|j| {
                let m = &members[j];
                if m.len() < 2 {
                    return to_component(1.0 / k as f64, means[j], global_cov + floor);
                }
                let mu = m.iter().map(|&i| xs[i]).sum::<Vector3<f64>>() / m.len() as f64;
                let cov = m.iter().map(|&i| (xs[i] - mu) * (xs[i] - mu).transpose()).sum::<Matrix3<f64>>()
                    / m.len() as f64;
                to_component(m.len() as f64 / n as f64, mu, cov + floor)
            })
            .collect(),
    };
    normalize_weights(&mut mix);

    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * k];
    for _ in 0..=max_iter {
        // E-step.
        let terms: Vec<DensityTerm> = mix.components.iter().map(DensityTerm::new).collect();
        let mut ll = 0.0;
        let mut buf = vec![0.0; k];
        for (i, x) in xs.iter().enumerate() {
            for (j, t) in terms.iter().enumerate() {
                buf[j] = if mix.components[j].weight > 0.0 {
                    t.log_weight + t.log_pdf(x)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&buf);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (buf[j] - lse).exp();
            }
        }
        let ll = ll / n as f64;
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE));
        trace.push(ll);
        if converged || trace.len() > max_iter {
            break;
        }
        // M-step.
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk <= 1e-12 {
                next.push(GaussianComponent { weight: 0.0, ..mix.components[j].clone() });
                continue;
            }
            let mu = (0..n).map(|i| xs[i] * resp[i * k + j]).sum::<Vector3<f64>>() / nk;
            let cov = (0..n)
                .map(|i| {
                    let d = xs[i] - mu;
                    d * d.transpose() * resp[i * k + j]
                })
                .sum::<Matrix3<f64>>()
                / nk;
            next.push(to_component(nk / n as f64, mu, cov + floor));
        }
        mix.components = next;
        normalize_weights(&mut mix);
    }
    (mix, trace)
}

fn normalize_weights(mix: &mut ClassMixture) {
    let s: f64 = mix.components.iter().map(|c| c.weight).sum();
    for c in &mut mix.components {
        c.weight /= s;
    }
}

/// Convenience for tests and the CLI: the sample stream used by
/// `sample_color` in stand-alone calls.
pub fn color_stream(seed: u64) -> rng::StageRng {
    rng::stream(seed, Stage::Colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn normal_cloud(mean: [f64; 3], sd: f64, n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| mean.map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    #[test]
    fn identical_samples_collapse_to_the_floor() {
        let data: BTreeMap<_, _> = [(SemanticClass::Water, vec![[10.0, 20.0, 30.0]; 40])].into();
        let (m, _) = fit_color_model(&data, 2, 50, 1e-10).unwrap();
        for c in &m.classes[&SemanticClass::Water].components {
            for (m, e) in c.mean.iter().zip([10.0, 20.0, 30.0]) {
                assert!((m - e).abs() < 1e-9);
            }
            for r in 0..3 {
                for col in 0..3 {
                    let expect = if r == col { COVARIANCE_FLOOR } else { 0.0 };
                    assert!((c.cov[r][col] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn insufficient_data_names_class() {
        let data: BTreeMap<_, _> = [(SemanticClass::Built, vec![[0.0; 3]; 29])].into();
        match fit_color_model(&data, 3, 10, 1e-6) {
            Err(SynthError::InsufficientData { class, have: 29, need: 30 }) => {
                assert_eq!(class, SemanticClass::Built)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_clusters_recovered() {
        let mut pts = normal_cloud([40.0, 60.0, 200.0], 6.0, 400, 1);
        pts.extend(normal_cloud([220.0, 200.0, 50.0], 6.0, 600, 2));
        let data: BTreeMap<_, _> = [(SemanticClass::Water, pts.clone())].into();
        let (m, _) = fit_color_model(&data, 2, 200, 1e-10).unwrap();
        // Oracle: cluster means after nearest-mean assignment.
        let mix = &m.classes[&SemanticClass::Water];
        for c in &mix.components {
            let mine: Vec<&[f64; 3]> = pts
                .iter()
                .filter(|p| {
                    let d = |m: &[f64; 3]| (0..3).map(|i| (p[i] - m[i]).powi(2)).sum::<f64>();
                    mix.components.iter().all(|o| d(&c.mean) <= d(&o.mean))
                })
                .collect();
            for i in 0..3 {
                let mean = mine.iter().map(|p| p[i]).sum::<f64>() / mine.len() as f64;
                assert!((c.mean[i] - mean).abs() < 5.0);
            }
        }
        let mut ws: Vec<f64> = mix.components.iter().map(|c| c.weight).collect();
        ws.sort_by(f64::total_cmp);
        assert!((ws[0] - 0.4).abs() < 0.01 && (ws[1] - 0.6).abs() < 0.01);
    }

    #[test]
    fn zero_covariance_sampling_returns_mean() {
        let model = ColorModel {
            classes: [(
                SemanticClass::Water,
                ClassMixture { components: vec![GaussianComponent::isotropic(1.0, [12.0, 34.0, 56.0], 0.0)] },
            )]
            .into(),
        };
        model.validate().unwrap();
        let mut rng = color_stream(1);
        for _ in 0..10 {
            assert_eq!(sample_color(&model, SemanticClass::Water, &mut rng).unwrap(), [12, 34, 56]);
        }
        assert!(matches!(
            sample_color(&model, SemanticClass::Built, &mut rng),
            Err(SynthError::MissingClass(SemanticClass::Built))
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = ColorModel::default_palette();
        let a = sample_color(&m, SemanticClass::NonBuilt, &mut color_stream(9)).unwrap();
        let b = sample_color(&m, SemanticClass::NonBuilt, &mut color_stream(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_bad_models() {
        let mut m = ColorModel::default_palette();
        m.validate().unwrap();
        m.classes.get_mut(&SemanticClass::Water).unwrap().components[0].weight = 0.5;
        assert!(m.validate().is_err());
        let mut m = ColorModel::default_palette();
        m.classes.get_mut(&SemanticClass::Water).unwrap().components[0].cov[0][0] = -5.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = ColorModel::default_palette();
        assert_eq!(ColorModel::from_json(&m.to_json()).unwrap(), m);
    }
}
