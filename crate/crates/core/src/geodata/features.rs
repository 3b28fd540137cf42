//! Vector features, feature sets and the newline-delimited JSON feature file.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stage};

use super::catalog::{self, CatalogEntry, FeatureRole};
use super::filter::AttributeSource;
use super::projection::{scale_to_zoom, BBox, MapScale, ZoomLevel};
use super::GeoError;

pub type Coord = [f64; 2];

/// GeoJSON-style geometry with EPSG:3857 coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
pub enum Geometry {
    Point(Coord),
    LineString(Vec<Coord>),
    /// Exterior ring followed by holes.
    Polygon(Vec<Vec<Coord>>),
}

impl Geometry {
    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Point(_) => "Point",
            Geometry::LineString(_) => "LineString",
            Geometry::Polygon(_) => "Polygon",
        }
    }

    pub fn coords(&self) -> Box<dyn Iterator<Item = Coord> + '_> {
        match self {
            Geometry::Point(c) => Box::new(std::iter::once(*c)),
            Geometry::LineString(l) => Box::new(l.iter().copied()),
            Geometry::Polygon(rings) => Box::new(rings.iter().flatten().copied()),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Geometry::Point(_) => false,
            Geometry::LineString(l) => l.is_empty(),
            Geometry::Polygon(r) => r.is_empty() || r[0].is_empty(),
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::enclosing(self.coords().map(|c| (c[0], c[1])))
    }

    fn validate(&self) -> Result<(), String> {
        if self.is_empty() {
            return Err("empty geometry".into());
        }
        if self.coords().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err("non-finite coordinate".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFeature {
    pub geometry: Geometry,
    pub feature_name: String,
    pub role: FeatureRole,
    pub attributes: BTreeMap<String, String>,
}

impl VectorFeature {
    pub fn new(
        feature_name: &str,
        geometry: Geometry,
        attributes: BTreeMap<String, String>,
    ) -> Result<Self, GeoError> {
        let entry = catalog::lookup(feature_name)
            .ok_or_else(|| GeoError::UnknownFeature(feature_name.to_string()))?;
        geometry.validate().map_err(GeoError::InvalidGeometry)?;
        Ok(Self { geometry, feature_name: entry.name.to_string(), role: entry.role, attributes })
    }

    pub fn entry(&self) -> Result<&'static CatalogEntry, GeoError> {
        catalog::lookup(&self.feature_name)
            .ok_or_else(|| GeoError::UnknownFeature(self.feature_name.clone()))
    }

    /// Attribute text used for lettering, if any.
    pub fn label_text(&self) -> Option<&str> {
        ["name", "name_en", "ref", "iata"]
            .iter()
            .find_map(|k| self.attributes.get(*k))
            .map(String::as_str)
            .filter(|s| !s.is_empty())
    }
}

struct WithGeomType<'a>(&'a VectorFeature);

impl AttributeSource for WithGeomType<'_> {
    fn attribute(&self, name: &str) -> Option<&str> {
        if name == "_geom_type" {
            Some(self.0.geometry.kind())
        } else {
            self.0.attributes.get(name).map(String::as_str)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFeatureSet {
    pub features: Vec<VectorFeature>,
    pub source_bbox: BBox,
    pub zoom: ZoomLevel,
}

impl VectorFeatureSet {
    /// Builds a set, keeping only features whose extent meets `source_bbox`.
    pub fn new(features: Vec<VectorFeature>, source_bbox: BBox, zoom: ZoomLevel) -> Self {
        let features = features
            .into_iter()
            .filter(|f| f.geometry.bbox().is_some_and(|b| b.intersects(&source_bbox)))
            .collect();
        Self { features, source_bbox, zoom }
    }

    /// Re-queries this set for a smaller window.
    pub fn query(&self, bbox: BBox, zoom: ZoomLevel) -> Self {
        Self::new(self.features.clone(), bbox, zoom)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Random hiding of whole feature layers, keyed by feature name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HidePolicy {
    pub probabilities: BTreeMap<String, f64>,
}

impl HidePolicy {
    pub fn validate(&self) -> Result<(), GeoError> {
        for (name, p) in &self.probabilities {
            if catalog::lookup(name).is_none() {
                return Err(GeoError::UnknownFeature(name.clone()));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(GeoError::InvalidProbability { name: name.clone(), value: *p });
            }
        }
        Ok(())
    }

    /// Names hidden for one sample. Each configured layer gets one draw, in
    /// name order.
    pub fn hidden_names(&self, seed: u64) -> Vec<String> {
        let mut rng = rng::stream(seed, Stage::Hiding);
        self.probabilities
            .iter()
            .filter_map(|(name, &p)| {
                let u: f64 = rng.random();
                (u < p).then(|| name.clone())
            })
            .collect()
    }
}

/// Keeps the features visible at `zoom` whose attribute filter passes, then
/// drops layers hidden by `hiding` for this seed.
pub fn filter_features(
    set: &VectorFeatureSet,
    zoom: ZoomLevel,
    hiding: Option<(&HidePolicy, u64)>,
) -> Result<VectorFeatureSet, GeoError> {
    let hidden = match hiding {
        Some((policy, seed)) => {
            policy.validate()?;
            policy.hidden_names(seed)
        }
        None => Vec::new(),
    };
    let mut kept = Vec::new();
    for f in &set.features {
        let entry = f.entry()?;
        if !entry.visible_at(zoom) || hidden.iter().any(|h| h == entry.name) {
            continue;
        }
        if entry.filter.eval(&WithGeomType(f)) {
            kept.push(f.clone());
        }
    }
    Ok(VectorFeatureSet { features: kept, source_bbox: set.source_bbox, zoom })
}

/// Optional first line of a feature file describing where it was queried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFileHeader {
    pub bbox: BBox,
    #[serde(default)]
    pub zoom: Option<ZoomLevel>,
    #[serde(default)]
    pub scale_denominator: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: FeatureFileHeader,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureLine {
    geometry: Geometry,
    feature: String,
    #[serde(default)]
    attributes: BTreeMap<String, serde_json::Value>,
}

fn attribute_text(v: serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Null => None,
        serde_json::Value::Bool(b) => Some(if b { "true" } else { "false" }.to_string()),
        serde_json::Value::String(s) => Some(s),
        other => Some(other.to_string()),
    }
}

/// Parses one feature line.
pub fn parse_feature_line(line: &str) -> Result<VectorFeature, GeoError> {
    let raw: FeatureLine =
        serde_json::from_str(line).map_err(|e| GeoError::Parse { line: 0, message: e.to_string() })?;
    let attributes = raw
        .attributes
        .into_iter()
        .filter_map(|(k, v)| attribute_text(v).map(|v| (k, v)))
        .collect();
    VectorFeature::new(&raw.feature, raw.geometry, attributes)
}

pub fn feature_line(f: &VectorFeature) -> String {
    let line = FeatureLine {
        geometry: f.geometry.clone(),
        feature: f.feature_name.clone(),
        attributes: f
            .attributes
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect(),
    };
    serde_json::to_string(&line).expect("feature serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub header: Option<FeatureFileHeader>,
    pub features: Vec<VectorFeature>,
}

impl FeatureFile {
    /// Parses a whole document. Blank lines are skipped; a header object is
    /// only accepted on the first non-blank line.
    pub fn parse(reader: impl BufRead) -> Result<Self, GeoError> {
        let mut header = None;
        let mut features = Vec::new();
        let mut seen_content = false;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| GeoError::Parse { line: lineno, message: e.to_string() })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !seen_content && trimmed.starts_with("{\"header\"") {
                let h: HeaderLine = serde_json::from_str(trimmed)
                    .map_err(|e| GeoError::Parse { line: lineno, message: e.to_string() })?;
                header = Some(h.header);
                seen_content = true;
                continue;
            }
            seen_content = true;
            let f = parse_feature_line(trimmed).map_err(|e| match e {
                GeoError::Parse { message, .. } => GeoError::Parse { line: lineno, message },
                other => GeoError::Parse { line: lineno, message: other.to_string() },
            })?;
            features.push(f);
        }
        Ok(Self { header, features })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GeoError> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            let v = serde_json::json!({ "header": h });
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for f in &self.features {
            out.push_str(&feature_line(f));
            out.push('\n');
        }
        out
    }

    /// Turns the file into a feature set. Without a header the extent is the
    /// union of feature extents. The zoom comes from the header's zoom, else
    /// its scale denominator, else `default_zoom`.
    pub fn into_set(self, default_zoom: ZoomLevel) -> Result<VectorFeatureSet, GeoError> {
        let bbox = match &self.header {
            Some(h) => h.bbox,
            None => {
                let ext = BBox::enclosing(self.features.iter().flat_map(|f| {
                    f.geometry.coords().map(|c| (c[0], c[1])).collect::<Vec<_>>()
                }))
                .ok_or(GeoError::EmptyFeatureFile)?;
                BBox::new(ext.min_x - 1.0, ext.min_y - 1.0, ext.max_x + 1.0, ext.max_y + 1.0)?
            }
        };
        let zoom = match &self.header {
            Some(FeatureFileHeader { zoom: Some(z), .. }) => *z,
            Some(FeatureFileHeader { scale_denominator: Some(d), .. }) => scale_to_zoom(MapScale::new(*d)?),
            _ => default_zoom,
        };
        Ok(VectorFeatureSet::new(self.features, bbox, zoom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(v: u8) -> ZoomLevel {
        ZoomLevel::new(v).unwrap()
    }

    fn feature(name: &str, attrs: &[(&str, &str)]) -> VectorFeature {
        let geometry = Geometry::Polygon(vec![vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 0.0]]]);
        let attributes = attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        VectorFeature::new(name, geometry, attributes).unwrap()
    }

    fn set(features: Vec<VectorFeature>) -> VectorFeatureSet {
        VectorFeatureSet::new(features, BBox::new(-100.0, -100.0, 100.0, 100.0).unwrap(), z(14))
    }

    #[test]
    fn zoom_gating() {
        let s = set(vec![feature("building", &[])]);
        assert!(filter_features(&s, z(12), None).unwrap().is_empty());
        assert_eq!(filter_features(&s, z(13), None).unwrap().len(), 1);

        let rail = VectorFeature::new(
            "railway",
            Geometry::LineString(vec![[0.0, 0.0], [5.0, 5.0]]),
            [("class".to_string(), "rail".to_string())].into(),
        )
        .unwrap();
        let s = set(vec![rail]);
        assert_eq!(filter_features(&s, z(11), None).unwrap().len(), 1);
        assert!(filter_features(&s, z(10), None).unwrap().is_empty());
    }

    #[test]
    fn attribute_filters_and_empty_set() {
        let s = set(vec![
            feature("landcover_grass", &[("class", "grass")]),
            feature("landcover_grass", &[("class", "farmland")]),
        ]);
        assert_eq!(filter_features(&s, z(14), None).unwrap().len(), 1);
        assert!(filter_features(&set(vec![]), z(14), None).unwrap().is_empty());
    }

    #[test]
    fn geometry_type_binding() {
        let s = set(vec![feature("road_area_pier", &[("class", "pier")])]);
        assert_eq!(filter_features(&s, z(14), None).unwrap().len(), 1);
    }

    #[test]
    fn unknown_feature_errors() {
        let bad = VectorFeature::new("farmland", Geometry::Point([0.0, 0.0]), BTreeMap::new());
        assert!(matches!(bad, Err(GeoError::UnknownFeature(_))));

        let mut f = feature("building", &[]);
        f.feature_name = "farmland".into();
        let s = set(vec![f]);
        assert!(matches!(filter_features(&s, z(14), None), Err(GeoError::UnknownFeature(_))));
    }

    #[test]
    fn hiding_whole_layers() {
        let s = set(vec![
            feature("landcover_wood", &[("class", "wood")]),
            feature("landcover_wood", &[("class", "wood")]),
            feature("building", &[]),
        ]);
        let always = HidePolicy { probabilities: [("landcover_wood".to_string(), 1.0)].into() };
        let out = filter_features(&s, z(14), Some((&always, 3))).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.features[0].feature_name, "building");

        let never = HidePolicy { probabilities: [("landcover_wood".to_string(), 0.0)].into() };
        let a = filter_features(&s, z(14), Some((&never, 3))).unwrap();
        let b = filter_features(&a, z(14), Some((&never, 99))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn parse_file_with_header() {
        let doc = concat!(
            "{\"header\":{\"bbox\":[0,0,100,100],\"zoom\":13}}\n",
            "\n",
            "{\"geometry\":{\"type\":\"Point\",\"coordinates\":[5,5]},\"feature\":\"place\",",
            "\"attributes\":{\"class\":\"city\",\"population\":1200,\"capital\":null}}\n",
            "{\"geometry\":{\"type\":\"LineString\",\"coordinates\":[[1,1],[9,9]]},",
            "\"feature\":\"waterway\",\"attributes\":{\"intermittent\":false}}\n",
        );
        let file = FeatureFile::parse(doc.as_bytes()).unwrap();
        assert_eq!(file.features.len(), 2);
        assert_eq!(file.features[0].attributes["population"], "1200");
        assert!(!file.features[0].attributes.contains_key("capital"));
        let reparsed = FeatureFile::parse(file.to_ndjson().as_bytes()).unwrap();
        assert_eq!(reparsed, file);
        let set = file.into_set(z(5)).unwrap();
        assert_eq!(set.zoom.get(), 13);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let doc = "{\"geometry\":{\"type\":\"Point\",\"coordinates\":[5,5]},\"feature\":\"place\"}\nnot json\n";
        match FeatureFile::parse(doc.as_bytes()) {
            Err(GeoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let doc = "{\"geometry\":{\"type\":\"LineString\",\"coordinates\":[]},\"feature\":\"waterway\"}\n";
        assert!(FeatureFile::parse(doc.as_bytes()).is_err());
    }
}
