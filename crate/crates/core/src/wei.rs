//! Wireless environmental information (WEI): classification, quantity
//! accounting and per-link geometric features.
//!
//! An information item of dimension `d` recorded at quantity `theta` per
//! dimension carries `xi = d * theta`. A building complex of `M` buildings,
//! `N` scatterers per building and `K` surfaces per scatterer, with per-surface
//! quantities `xi_i`, carries `M * N * K * sum(xi_i)`.

use serde::{Deserialize, Serialize};

use crate::channel::{departure_azimuth, segment_box_entry, Cir, PathKind};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene::{MobilityClass, Scatterer, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeiCategory {
    Static,
    Dynamic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeiKind {
    Position,
    Size,
    Material,
    Velocity,
    BlockageFlag,
    ReflectorBearing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeiItem {
    pub category: WeiCategory,
    pub kind: WeiKind,
    pub dimension_d: usize,
    pub quantity_theta: f64,
    pub values: Vec<f64>,
}

impl WeiItem {
    pub fn new(
        category: WeiCategory,
        kind: WeiKind,
        quantity_theta: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(quantity_theta >= 0.0 && quantity_theta.is_finite()) {
            return Err(Error::invalid(format!(
                "quantity must be finite and >= 0, got {quantity_theta}"
            )));
        }
        Ok(Self {
            category,
            kind,
            dimension_d: values.len(),
            quantity_theta,
            values,
        })
    }
}

pub fn classify(scatterer: &Scatterer) -> WeiCategory {
    match scatterer.mobility {
        MobilityClass::Static => WeiCategory::Static,
        MobilityClass::Dynamic { .. } => WeiCategory::Dynamic,
        MobilityClass::Random { .. } => WeiCategory::Random,
    }
}

/// `xi = d * theta`.
pub fn compute_wei_quantity(item: &WeiItem) -> f64 {
    item.dimension_d as f64 * item.quantity_theta
}

/// Total quantity of a list of items; additive over concatenation.
pub fn total_quantity(items: &[WeiItem]) -> f64 {
    items.iter().map(compute_wei_quantity).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexAccount {
    /// Buildings in the complex.
    pub m: usize,
    /// Scatterers per building.
    pub n: usize,
    /// Surfaces per scatterer.
    pub k: usize,
    pub xi_per_surface: Vec<f64>,
}

/// `M * N * K * sum(xi_i)`.
pub fn account_complex(account: &ComplexAccount) -> f64 {
    let xi: f64 = account.xi_per_surface.iter().sum();
    account.m as f64 * account.n as f64 * account.k as f64 * xi
}

/// Quantity per recorded dimension; measurement precision is not modelled.
pub const UNIT_THETA: f64 = 1.0;

/// Items a sensor would record for one scatterer: position and size for
/// every class, material, and velocity for moving ones.
pub fn scatterer_items(s: &Scatterer) -> Vec<WeiItem> {
    let category = classify(s);
    let bx = s.aabb();
    let c = bx.center();
    let e = bx.extent();
    let mut items = vec![
        WeiItem::new(category, WeiKind::Position, UNIT_THETA, vec![c.x, c.y, c.z]),
        WeiItem::new(category, WeiKind::Size, UNIT_THETA, vec![e.x, e.y, e.z]),
        WeiItem::new(
            category,
            WeiKind::Material,
            UNIT_THETA,
            vec![s.material.reflection_amplitude],
        ),
    ];
    if let MobilityClass::Dynamic { velocity } = s.mobility {
        items.push(WeiItem::new(
            category,
            WeiKind::Velocity,
            UNIT_THETA,
            vec![velocity.x, velocity.y, velocity.z],
        ));
    }
    items
        .into_iter()
        .map(|i| i.expect("unit quantity is valid"))
        .collect()
}

/// Quantity account of building complex `group_id`: one scatterer per
/// building, six surfaces, and per-surface position (3), size (3) and
/// material (1) information.
pub fn building_complex_account(scene: &Scene, group_id: u32) -> ComplexAccount {
    let m = scene
        .scatterers
        .iter()
        .filter(|s| s.group_id == group_id && classify(s) == WeiCategory::Static)
        .count();
    ComplexAccount {
        m,
        n: 1,
        k: 6,
        xi_per_surface: vec![3.0 * UNIT_THETA, 3.0 * UNIT_THETA, UNIT_THETA],
    }
}

/// Per-link geometric features, the stand-in for image-based sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeiFeatureVector {
    pub d2d: f64,
    pub d3d: f64,
    pub los_blocked: bool,
    pub n_first_order_reflectors: usize,
    /// Top of the first blocker minus the ray height where the ray enters it; 0 for LoS.
    pub nearest_blocker_height_margin: f64,
    /// Departure azimuth (from broadside) of the strongest reflected path; 0 if none.
    pub strongest_reflector_bearing: f64,
    pub dynamic_blocker_flag: bool,
    /// Departure azimuth (from broadside) of the receiver.
    pub rx_bearing: f64,
}

pub const FEATURE_COLUMNS: [&str; 8] = [
    "d2d",
    "d3d",
    "los_blocked",
    "n_first_order_reflectors",
    "nearest_blocker_height_margin",
    "strongest_reflector_bearing",
    "dynamic_blocker_flag",
    "rx_bearing",
];

impl WeiFeatureVector {
    /// Values in [`FEATURE_COLUMNS`] order.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.d2d,
            self.d3d,
            self.los_blocked as u8 as f64,
            self.n_first_order_reflectors as f64,
            self.nearest_blocker_height_margin,
            self.strongest_reflector_bearing,
            self.dynamic_blocker_flag as u8 as f64,
            self.rx_bearing,
        ]
    }

    pub fn csv_header() -> String {
        FEATURE_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.to_array()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Geometric part of the vector, without the mobility class of the blocker.
    pub fn geometric(&self) -> [f64; 7] {
        let a = self.to_array();
        [a[0], a[1], a[2], a[3], a[4], a[5], a[7]]
    }
}

/// The first present scatterer the Tx-Rx segment enters, with the entry parameter.
pub fn first_blocker(scene: &Scene, rx: Vec3) -> Option<(&Scatterer, f64)> {
    let tx = scene.tx.position;
    scene
        .active_scatterers()
        .filter_map(|s| segment_box_entry(tx, rx, &s.aabb()).map(|t| (s, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
}

/// Extracts the feature vector of link `tx -> rx` from the scene and its traced paths.
pub fn extract_link_features(scene: &Scene, rx: Vec3, paths: &Cir) -> Result<WeiFeatureVector> {
    let tx = scene.tx.position;
    if paths.tx != tx || paths.rx != rx {
        return Err(Error::LinkMismatch(format!(
            "paths for {} -> {}, requested {} -> {}",
            paths.tx, paths.rx, tx, rx
        )));
    }
    let delta = rx - tx;
    let d2d = delta.norm_xy();
    let d3d = delta.norm().max(d2d);
    let los_blocked = !paths.has_direct();

    let (margin, dynamic_blocker) = if los_blocked {
        match first_blocker(scene, rx) {
            Some((s, t)) => {
                let z = tx.z + t * (rx.z - tx.z);
                (s.box_max.z - z, s.is_dynamic())
            }
            None => (0.0, false),
        }
    } else {
        (0.0, false)
    };

    let walls = paths
        .paths
        .iter()
        .filter(|p| matches!(p.kind, PathKind::WallReflection { .. }));
    let n_reflectors = walls.count();
    let strongest = paths
        .paths
        .iter()
        .filter(|p| p.kind != PathKind::Direct)
        .fold(None::<(f64, f64)>, |best, p| {
            let mag = p.gain.norm();
            match best {
                Some((m, _)) if m >= mag => best,
                _ => Some((mag, p.aod_azimuth)),
            }
        });

    Ok(WeiFeatureVector {
        d2d,
        d3d,
        los_blocked,
        n_first_order_reflectors: n_reflectors,
        nearest_blocker_height_margin: margin,
        strongest_reflector_bearing: strongest.map_or(0.0, |(_, b)| b),
        dynamic_blocker_flag: dynamic_blocker,
        rx_bearing: departure_azimuth(&scene.tx, rx),
    })
}

/// Link-level items derived from a feature vector.
pub fn link_items(f: &WeiFeatureVector) -> Vec<WeiItem> {
    let category = if f.dynamic_blocker_flag {
        WeiCategory::Dynamic
    } else {
        WeiCategory::Static
    };
    vec![
        WeiItem::new(
            category,
            WeiKind::BlockageFlag,
            UNIT_THETA,
            vec![f.los_blocked as u8 as f64],
        ),
        WeiItem::new(
            category,
            WeiKind::ReflectorBearing,
            UNIT_THETA,
            vec![f.strongest_reflector_bearing],
        ),
    ]
    .into_iter()
    .map(|i| i.expect("unit quantity is valid"))
    .collect()
}

/// Side length below which a scatterer is treated as sensing clutter.
pub const MIN_SCATTERER_SIDE: f64 = 0.5;

/// Drops sub-resolution clutter: scatterers whose every side is below 0.5 m.
pub fn preprocess(scene: &Scene) -> Scene {
    let mut out = scene.clone();
    out.scatterers.retain(|s| {
        let e = s.aabb().extent();
        !(e.x < MIN_SCATTERER_SIDE && e.y < MIN_SCATTERER_SIDE && e.z < MIN_SCATTERER_SIDE)
    });
    out
}
