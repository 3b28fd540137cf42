//! The queried feature vocabulary: which source layers feed which label
//! class, at which zoom levels, under which attribute filter.

use std::sync::OnceLock;

use crate::mask::SemanticClass;

use super::filter::Predicate;
use super::projection::{ZoomLevel, MAX_ZOOM};

/// What a feature contributes to a synthetic sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureRole {
    /// Painted into the label mask.
    Class(SemanticClass),
    /// Rendered as lettering on the image only.
    Text,
}

/// Sub-styles inside one class (base vs forest, base road vs railway).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    Forest,
    Railway,
}

#[derive(Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub category: &'static str,
    pub role: FeatureRole,
    pub variant: Variant,
    pub zoom_min: u8,
    pub zoom_max: u8,
    pub filter_src: &'static str,
    pub filter: Predicate,
}

impl CatalogEntry {
    pub fn visible_at(&self, zoom: ZoomLevel) -> bool {
        (self.zoom_min..=self.zoom_max).contains(&zoom.get())
    }
}

type Row = (&'static str, &'static str, FeatureRole, Variant, Option<u8>, Option<u8>, &'static str);

const fn class(c: SemanticClass) -> FeatureRole {
    FeatureRole::Class(c)
}

use SemanticClass::{Boundary as BND, Built as BLT, NonBuilt as NBL, RoadNetwork as RD, Water as WTR};
use Variant::{Base, Forest, Railway};

const ROWS: &[Row] = &[
    ("landuse_residential", "landuse", class(BLT), Base, Some(10), Some(11),
        "(class IN ('residential','suburb','neighborhood'))"),
    ("landcover_grass", "landcover", class(NBL), Base, None, None, "(class IS 'grass')"),
    ("landcover_wood", "landcover", class(NBL), Forest, None, None, "(class IS 'wood')"),
    ("landcover_sand", "landcover", class(NBL), Base, None, None, "(class IS 'sand')"),
    ("landcover_glacier", "landcover", class(NBL), Base, None, None,
        "(subclass IN ('glacier','ice_shelf'))"),
    ("water", "water", class(WTR), Base, None, None,
        "NOT (intermittent) AND (brunnel IS NOT 'tunnel')"),
    ("water_intermittent", "water", class(WTR), Base, None, None, "(intermittent)"),
    ("waterway", "waterway", class(WTR), Base, None, None,
        "(brunnel IS null) OR (brunnel NOT IN ('tunnel','bridge') AND NOT (intermittent))"),
    ("building", "building", class(BLT), Base, Some(13), None, "(all)"),
    ("road_area_pier", "transportation", class(RD), Base, None, None,
        "(_geom_type IS Polygon) AND (class IS 'pier')"),
    ("road_area_bridge", "transportation", class(RD), Base, None, None,
        "(_geom_type IS Polygon) AND (brunnel IS 'bridge')"),
    ("road_pier", "transportation", class(RD), Base, Some(14), None, "(class IN ('pier'))"),
    ("road_minor", "transportation", class(RD), Base, Some(13), None,
        "(class IN ('minor','service'))"),
    ("road_major", "transportation", class(RD), Base, None, None, "(class IS 'motorway')"),
    ("road_motorway", "transportation", class(RD), Base, Some(4), None, "(class IS 'motorway')"),
    ("railway", "transportation", class(RD), Railway, Some(11), None, "(class IS 'rail')"),
    ("bridge", "transportation", class(RD), Base, None, None,
        "(brunnel IS 'bridge') AND (class IN ('primary','secondary','tertiary'))"),
    ("admin_sub", "boundary", class(BND), Base, Some(3), None, "(admin_level IN (4,6,8))"),
    ("place", "place", class(BLT), Base, Some(3), Some(9), "(class IN ('city','town'))"),
    ("label_airport", "aerodrome_label", FeatureRole::Text, Base, Some(10), None,
        "(iata IS NOT null)"),
    ("label_road", "transportation_name", FeatureRole::Text, Base, Some(13), None,
        "(_geom_type IS LineString) AND (subclass IS NOT 'ferry')"),
    ("label_place_other", "place", FeatureRole::Text, Base, Some(8), None,
        "(_geom_type IS Point) AND (class IS null OR class NOT IN ('city','state','country','continent'))"),
    ("label_place_city", "place", FeatureRole::Text, Base, None, Some(16),
        "(_geom_type IS Point) AND (class IS 'city')"),
    ("label_country_other", "place", FeatureRole::Text, Base, None, Some(12),
        "(_geom_type IS Point) AND (class IS 'country')"),
    ("label_water", "water_name", FeatureRole::Text, Base, Some(10), None,
        "(_geom_type IN (Polygon,LineString))"),
];

pub fn catalog() -> &'static [CatalogEntry] {
    static CATALOG: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        ROWS.iter()
            .map(|&(name, category, role, variant, zmin, zmax, filter_src)| CatalogEntry {
                name,
                category,
                role,
                variant,
                zoom_min: zmin.unwrap_or(0),
                zoom_max: zmax.unwrap_or(MAX_ZOOM),
                filter_src,
                filter: Predicate::parse(filter_src)
                    .unwrap_or_else(|e| panic!("catalog filter for {name}: {e}")),
            })
            .collect()
    })
}

pub fn lookup(name: &str) -> Option<&'static CatalogEntry> {
    catalog().iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_filters_compile() {
        assert_eq!(catalog().len(), ROWS.len());
    }

    #[test]
    fn zoom_windows() {
        let z = |v| ZoomLevel::new(v).unwrap();
        assert!(!lookup("building").unwrap().visible_at(z(12)));
        assert!(lookup("building").unwrap().visible_at(z(13)));
        assert!(lookup("railway").unwrap().visible_at(z(11)));
        assert!(!lookup("railway").unwrap().visible_at(z(10)));
        let res = lookup("landuse_residential").unwrap();
        assert!(res.visible_at(z(10)) && res.visible_at(z(11)) && !res.visible_at(z(12)));
        assert!(lookup("landcover_wood").unwrap().visible_at(z(0)));
        assert!(lookup("landcover_wood").unwrap().visible_at(z(22)));
    }

    #[test]
    fn unknown_name() {
        assert!(lookup("landcover_farmland").is_none());
    }
}
