//! Painting a filtered feature set into a label template.

use serde::{Deserialize, Serialize};

use crate::geodata::{BBox, FeatureRole, Geometry, Variant, VectorFeature, VectorFeatureSet};
use crate::mask::{LabelMask, SemanticClass};

use super::draw::{self, Pt};

/// Stroke widths in pixels for line geometry, and the marker radius for
/// settlement points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineWidths {
    pub boundary: f64,
    pub water: f64,
    pub road: f64,
    pub railway: f64,
    pub place_radius: f64,
}

impl Default for LineWidths {
    fn default() -> Self {
        Self { boundary: 2.0, water: 3.0, road: 3.0, railway: 2.0, place_radius: 4.0 }
    }
}

impl LineWidths {
    pub fn for_feature(&self, class: SemanticClass, variant: Variant) -> f64 {
        match (class, variant) {
            (SemanticClass::RoadNetwork, Variant::Railway) => self.railway,
            (SemanticClass::RoadNetwork, _) => self.road,
            (SemanticClass::Water, _) => self.water,
            (SemanticClass::Boundary, _) => self.boundary,
            _ => 1.0,
        }
    }
}

/// Back-to-front paint order; later classes overwrite earlier ones.
pub const PAINT_ORDER: [SemanticClass; 5] = [
    SemanticClass::NonBuilt,
    SemanticClass::Water,
    SemanticClass::Built,
    SemanticClass::RoadNetwork,
    SemanticClass::Boundary,
];

/// Maps EPSG:3857 coordinates into the pixel space of a view.
#[derive(Debug, Clone, Copy)]
pub struct PixelTransform {
    min_x: f64,
    max_y: f64,
    sx: f64,
    sy: f64,
}

impl PixelTransform {
    pub fn new(bbox: &BBox, width: u32, height: u32) -> Self {
        Self {
            min_x: bbox.min_x,
            max_y: bbox.max_y,
            sx: width as f64 / bbox.width(),
            sy: height as f64 / bbox.height(),
        }
    }

    #[inline]
    pub fn apply(&self, c: [f64; 2]) -> Pt {
        [(c[0] - self.min_x) * self.sx, (self.max_y - c[1]) * self.sy]
    }

    pub fn line(&self, coords: &[[f64; 2]]) -> Vec<Pt> {
        coords.iter().map(|&c| self.apply(c)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Template {
    pub mask: LabelMask,
    /// Zero-length lines and zero-area polygons that were skipped.
    pub degenerate: usize,
}

/// Paints one feature with `class`, calling `plot` for each covered pixel.
/// Returns `false` if the geometry is degenerate.
pub fn paint_feature(
    f: &VectorFeature,
    variant: Variant,
    class: SemanticClass,
    tf: &PixelTransform,
    widths: &LineWidths,
    w: u32,
    h: u32,
    plot: &mut dyn FnMut(u32, u32),
) -> bool {
    match &f.geometry {
        Geometry::Point(c) => {
            if class == SemanticClass::Built {
                draw::fill_disc(tf.apply(*c), widths.place_radius, w, h, |x, y| plot(x, y));
            }
            true
        }
        Geometry::LineString(coords) => {
            let line = tf.line(coords);
            if draw::polyline_length(&line) <= 0.0 {
                return false;
            }
            draw::stroke_polyline(&line, widths.for_feature(class, variant), w, h, |x, y| plot(x, y));
            true
        }
        Geometry::Polygon(rings) => {
            let px: Vec<Vec<Pt>> = rings.iter().map(|r| tf.line(r)).collect();
            if draw::ring_area(&px[0]).abs() <= 0.0 {
                return false;
            }
            if class == SemanticClass::Boundary {
                let width = widths.for_feature(class, variant);
                for ring in &px {
                    let mut closed = ring.clone();
                    closed.push(ring[0]);
                    draw::stroke_polyline(&closed, width, w, h, |x, y| plot(x, y));
                }
            } else {
                draw::fill_rings(&px, w, h, |x, y| plot(x, y));
            }
            true
        }
    }
}

pub fn rasterize_template(
    features: &VectorFeatureSet,
    bbox: &BBox,
    width: u32,
    height: u32,
    widths: &LineWidths,
) -> Template {
    let mut mask = LabelMask::filled(width, height, SemanticClass::Background);
    let tf = PixelTransform::new(bbox, width, height);
    let mut degenerate = 0;
    for class in PAINT_ORDER {
        for f in &features.features {
            let FeatureRole::Class(c) = f.role else { continue };
            if c != class {
                continue;
            }
            let variant = f.entry().map(|e| e.variant).unwrap_or(Variant::Base);
            let ok = paint_feature(f, variant, class, &tf, widths, width, height, &mut |x, y| {
                mask.set(x, y, class)
            });
            if !ok {
                degenerate += 1;
            }
        }
    }
    if degenerate > 0 {
        log::warn!("skipped {degenerate} degenerate geometries while rasterizing");
    }
    Template { mask, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::ZoomLevel;
    use std::collections::BTreeMap;

    fn bbox() -> BBox {
        BBox::new(0.0, 0.0, 32.0, 32.0).unwrap()
    }

    fn set(features: Vec<VectorFeature>) -> VectorFeatureSet {
        VectorFeatureSet::new(features, bbox(), ZoomLevel::new(14).unwrap())
    }

    fn feat(name: &str, g: Geometry) -> VectorFeature {
        VectorFeature::new(name, g, BTreeMap::new()).unwrap()
    }

    fn full_square() -> Geometry {
        Geometry::Polygon(vec![vec![[0.0, 0.0], [32.0, 0.0], [32.0, 32.0], [0.0, 32.0]]])
    }

    #[test]
    fn empty_set_is_background() {
        let t = rasterize_template(&set(vec![]), &bbox(), 32, 32, &LineWidths::default());
        assert_eq!(t.mask.class_counts()[0], 32 * 32);
    }

    #[test]
    fn full_water_polygon() {
        let t = rasterize_template(&set(vec![feat("water", full_square())]), &bbox(), 32, 32, &LineWidths::default());
        assert_eq!(t.mask.class_counts()[4], 32 * 32);
    }

    #[test]
    fn road_over_water_matches_stroke_oracle() {
        // Map coordinates equal pixel coordinates flipped vertically.
        let road = Geometry::LineString(vec![[2.0, 30.0], [29.0, 5.0]]);
        let widths = LineWidths { road: 3.0, ..LineWidths::default() };
        let s = set(vec![feat("road_major", road), feat("water", full_square())]);
        let t = rasterize_template(&s, &bbox(), 32, 32, &widths);
        let (a, b) = ([2.0, 32.0 - 30.0], [29.0, 32.0 - 5.0]);
        for y in 0..32u32 {
            for x in 0..32u32 {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let d = draw::point_segment_distance(c, a, b);
                let expect = if d <= 1.5 { SemanticClass::RoadNetwork } else { SemanticClass::Water };
                assert_eq!(t.mask.get(x, y), expect, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn paint_order_is_fixed() {
        let s = set(vec![
            feat("admin_sub", Geometry::LineString(vec![[0.0, 16.0], [32.0, 16.0]])),
            feat("building", full_square()),
            feat("landcover_grass", full_square()),
        ]);
        let t = rasterize_template(&s, &bbox(), 32, 32, &LineWidths::default());
        assert_eq!(t.mask.get(0, 0), SemanticClass::Built);
        assert_eq!(t.mask.get(5, 15), SemanticClass::Boundary);
    }

    #[test]
    fn degenerate_geometry_is_counted() {
        let s = set(vec![
            feat("waterway", Geometry::LineString(vec![[3.0, 3.0], [3.0, 3.0]])),
            feat("water", Geometry::Polygon(vec![vec![[1.0, 1.0], [5.0, 1.0], [9.0, 1.0]]])),
        ]);
        let t = rasterize_template(&s, &bbox(), 32, 32, &LineWidths::default());
        assert_eq!(t.degenerate, 2);
        assert_eq!(t.mask.class_counts()[0], 32 * 32);
    }
}
