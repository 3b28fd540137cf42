//! Non-learned baseline: each class logit is the pixel's log-density under
//! that class's color mixture.

use std::collections::HashMap;

use image::RgbImage;

use crate::logits::Logits;
use crate::synth::{ColorModel, MixtureDensity, SynthError};
use crate::{SemanticClass, NUM_CLASSES};

use super::{BackendError, SegmentationBackend, TileContext};

/// Lower bound on emitted logits so far-off colors stay finite.
const LOGIT_FLOOR: f64 = -1e30;

pub struct HeuristicBackend {
    densities: Vec<MixtureDensity>,
}

impl HeuristicBackend {
    pub fn new(colors: &ColorModel) -> Result<Self, SynthError> {
        colors.require_all()?;
        let densities = SemanticClass::ALL
            .iter()
            .map(|&c| colors.get(c).map(|m| m.density()))
            .collect::<Result<_, _>>()?;
        Ok(Self { densities })
    }

    /// Logits for one color, in class order.
    pub fn pixel_logits(&self, rgb: [u8; 3]) -> [f32; NUM_CLASSES] {
        let x = rgb.map(|v| v as f64);
        let mut out = [0f32; NUM_CLASSES];
        for (o, d) in out.iter_mut().zip(&self.densities) {
            *o = d.log_density(x).max(LOGIT_FLOOR) as f32;
        }
        out
    }
}

impl SegmentationBackend for HeuristicBackend {
    fn evaluate(&self, tile: &RgbImage, _ctx: &TileContext) -> Result<Logits, BackendError> {
        let (w, h) = tile.dimensions();
        let mut l = Logits::zeros(w, h, NUM_CLASSES as u32);
        let n = l.plane_len();
        // Scanned maps reuse few colors, so memoizing per color pays off.
        let mut memo: HashMap<[u8; 3], [f32; NUM_CLASSES]> = HashMap::new();
        let data = l.as_mut_slice();
        for (i, p) in tile.pixels().enumerate() {
            let v = *memo.entry(p.0).or_insert_with(|| self.pixel_logits(p.0));
            for (k, x) in v.iter().enumerate() {
                data[k * n + i] = *x;
            }
        }
        Ok(l)
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ClassMixture, GaussianComponent};

    #[test]
    fn class_mean_wins_under_tight_model() {
        let means = [[250.0, 250.0, 250.0], [10.0, 10.0, 10.0], [200.0, 60.0, 60.0], [80.0, 200.0, 80.0], [40.0, 90.0, 230.0], [120.0, 120.0, 40.0]];
        let model = ColorModel::from_json(
            &serde_json::to_string(
                &SemanticClass::ALL
                    .iter()
                    .zip(means)
                    .map(|(c, m)| (c.name(), ClassMixture { components: vec![GaussianComponent::isotropic(1.0, m, 2.0)] }))
                    .collect::<std::collections::BTreeMap<_, _>>(),
            )
            .unwrap(),
        )
        .unwrap();
        let b = HeuristicBackend::new(&model).unwrap();
        for (k, m) in means.iter().enumerate() {
            let tile = RgbImage::from_pixel(3, 3, image::Rgb(m.map(|v| v as u8)));
            let l = b.evaluate(&tile, &TileContext { x: 0, y: 0, scale: 1.0, image_width: 3, image_height: 3 }).unwrap();
            assert!(l.argmax().as_raw().iter().all(|&v| v as usize == k));
        }
    }

    #[test]
    fn identical_models_tie_to_background() {
        let mix = ClassMixture { components: vec![GaussianComponent::isotropic(1.0, [100.0; 3], 20.0)] };
        let json = serde_json::to_string(
            &SemanticClass::ALL.iter().map(|c| (c.name(), mix.clone())).collect::<std::collections::BTreeMap<_, _>>(),
        )
        .unwrap();
        let b = HeuristicBackend::new(&ColorModel::from_json(&json).unwrap()).unwrap();
        let tile = RgbImage::from_fn(5, 4, |x, y| image::Rgb([x as u8 * 40, y as u8 * 50, 3]));
        let l = b.evaluate(&tile, &TileContext { x: 0, y: 0, scale: 1.0, image_width: 5, image_height: 4 }).unwrap();
        assert!(l.argmax().as_raw().iter().all(|&v| v == 0));
        assert!(l.all_finite());
    }
}
