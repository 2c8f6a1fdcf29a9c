//! Cube-simplified urban scenes.
//!
//! Buildings and vehicles are axis-aligned boxes. A scene is a straight
//! four-lane main road along the x axis crossed by a side road along y,
//! with one building group per quadrant. Receivers sit on a uniform grid
//! over the main road. The JSON layout of [`Scene`] is documented in
//! `docs/scene.schema.md`.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaterialKind {
    Concrete,
    Metal,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: MaterialKind,
    /// Magnitude of the (real, sign-flipping) reflection coefficient.
    pub reflection_amplitude: f64,
}

impl Material {
    pub const fn concrete() -> Self {
        Self {
            name: MaterialKind::Concrete,
            reflection_amplitude: 0.6,
        }
    }

    pub const fn metal() -> Self {
        Self {
            name: MaterialKind::Metal,
            reflection_amplitude: 0.9,
        }
    }

    pub const fn ground() -> Self {
        Self {
            name: MaterialKind::Ground,
            reflection_amplitude: 0.7,
        }
    }

    pub fn of(kind: MaterialKind) -> Self {
        match kind {
            MaterialKind::Concrete => Self::concrete(),
            MaterialKind::Metal => Self::metal(),
            MaterialKind::Ground => Self::ground(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum MobilityClass {
    Static,
    /// Moves with constant velocity in m/s.
    Dynamic {
        velocity: Vec3,
    },
    /// Appears/disappears with the given probability per time step.
    Random {
        toggle_probability: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub id: u32,
    pub box_min: Vec3,
    pub box_max: Vec3,
    pub material: Material,
    pub mobility: MobilityClass,
    /// Building complex the scatterer belongs to.
    pub group_id: u32,
    pub surface_count: u32,
    /// Random-class scatterers can be absent; absent scatterers neither block nor reflect.
    pub present: bool,
}

impl Scatterer {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.box_min, self.box_max)
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self.mobility, MobilityClass::Dynamic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxSite {
    pub position: Vec3,
    pub n_elements: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// World azimuth (from +x, counter-clockwise) of the array broadside.
    pub boresight_azimuth: f64,
    pub per_element_power_dbm: f64,
}

impl Default for TxSite {
    fn default() -> Self {
        Self {
            position: Vec3::new(-57.4, 27.0, 19.0),
            n_elements: 128,
            element_spacing: 0.5,
            // broadside facing -y puts the array axis along +x
            boresight_azimuth: -std::f64::consts::FRAC_PI_2,
            per_element_power_dbm: -8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: (Vec3, Vec3),
    pub scatterers: Vec<Scatterer>,
    pub tx: TxSite,
    pub rx_points: Vec<Vec3>,
    pub seed: u64,
}

impl Scene {
    pub fn bounds_box(&self) -> Aabb {
        Aabb::new(self.bounds.0, self.bounds.1)
    }

    /// Scatterers that currently take part in propagation.
    pub fn active_scatterers(&self) -> impl Iterator<Item = &Scatterer> {
        self.scatterers.iter().filter(|s| s.present)
    }

    pub fn scatterer(&self, id: u32) -> Option<&Scatterer> {
        self.scatterers.iter().find(|s| s.id == id)
    }

    /// First present scatterer whose closed box contains `p`.
    pub fn containing_scatterer(&self, p: Vec3) -> Option<&Scatterer> {
        self.active_scatterers().find(|s| s.aabb().contains(p))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a scene; leading `#` lines (the config echo) are skipped.
    pub fn from_json(text: &str) -> Result<Self> {
        let body: String = text
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(serde_json::from_str(&body)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Parameters for [`generate_scene`]. Ranges are inclusive `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenConfig {
    pub side: f64,
    pub ceiling: f64,
    pub tx: TxSite,
    pub rx_gap: f64,
    pub rx_height: f64,
    pub building_groups: u32,
    pub buildings_per_group: (u32, u32),
    pub building_height: (f64, f64),
    pub building_footprint: (f64, f64),
    pub lanes: u32,
    pub lane_width: f64,
    /// Distance kept free between the road edge and building fronts.
    pub setback: f64,
    pub vehicle_count: (u32, u32),
    pub vehicle_speed: (f64, f64),
    pub random_count: u32,
    pub random_toggle_probability: f64,
    pub max_retries: usize,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            side: 200.0,
            ceiling: 100.0,
            tx: TxSite::default(),
            rx_gap: 2.0,
            rx_height: 2.0,
            building_groups: 4,
            buildings_per_group: (3, 5),
            building_height: (10.0, 40.0),
            building_footprint: (15.0, 40.0),
            lanes: 4,
            lane_width: 3.5,
            setback: 3.0,
            vehicle_count: (4, 10),
            vehicle_speed: (0.0, 15.0),
            random_count: 0,
            random_toggle_probability: 0.2,
            max_retries: 1000,
        }
    }
}

pub const VEHICLE_SIZE: Vec3 = Vec3::new(4.5, 1.8, 1.5);
const PEDESTRIAN_SIZE: Vec3 = Vec3::new(0.6, 0.6, 1.7);
/// Minimum gap kept between generated boxes and around the transmitter.
const CLEARANCE: f64 = 1.0;
/// Fresh draws of a whole building group before placement gives up.
const GROUP_RESTARTS: usize = 50;

impl SceneGenConfig {
    pub fn road_half_width(&self) -> f64 {
        self.lanes as f64 * self.lane_width / 2.0
    }

    fn validate(&self) -> Result<()> {
        let ranges = [
            ("building_height", self.building_height),
            ("building_footprint", self.building_footprint),
            ("vehicle_speed", self.vehicle_speed),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(Error::invalid(format!("bad range {name}: ({lo}, {hi})")));
            }
        }
        if self.buildings_per_group.0 > self.buildings_per_group.1
            || self.vehicle_count.0 > self.vehicle_count.1
        {
            return Err(Error::invalid("count range with lo > hi"));
        }
        if !(self.side > 0.0 && self.ceiling > 0.0 && self.rx_gap > 0.0 && self.rx_height > 0.0) {
            return Err(Error::invalid(
                "side, ceiling, rx_gap and rx_height must be positive",
            ));
        }
        if self.building_footprint.1 + self.road_half_width() + self.setback + CLEARANCE
            > self.side / 2.0
        {
            return Err(Error::invalid(
                "building footprint does not fit beside the road",
            ));
        }
        if !(0.0..=1.0).contains(&self.random_toggle_probability) {
            return Err(Error::invalid("toggle probability outside [0, 1]"));
        }
        Ok(())
    }
}

fn rx_grid(cfg: &SceneGenConfig) -> Vec<Vec3> {
    let half = cfg.side / 2.0;
    let road = cfg.road_half_width();
    let nx = (cfg.side / cfg.rx_gap + 1e-9).floor() as usize + 1;
    let ny = (2.0 * road / cfg.rx_gap + 1e-9).floor() as usize + 1;
    let mut pts = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = -road + iy as f64 * cfg.rx_gap;
        for ix in 0..nx {
            let x = -half + ix as f64 * cfg.rx_gap;
            pts.push(Vec3::new(x, y, cfg.rx_height));
        }
    }
    pts
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Builds a scene; a pure function of `(config, seed)`.
pub fn generate_scene(config: &SceneGenConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = config.side / 2.0;
    let bounds = (
        Vec3::new(-half, -half, 0.0),
        Vec3::new(half, half, config.ceiling),
    );
    let bounds_box = Aabb::new(bounds.0, bounds.1);
    if !bounds_box.contains(config.tx.position) {
        return Err(Error::invalid("transmitter outside scene bounds"));
    }
    let rx_points = rx_grid(config);
    let road = config.road_half_width();
    let tx_keepout = Aabb::new(config.tx.position, config.tx.position).inflate(CLEARANCE);

    let mut scatterers: Vec<Scatterer> = Vec::new();
    let mut placed: Vec<Aabb> = Vec::new();
    let fits = |candidate: &Aabb, placed: &[Aabb]| -> bool {
        bounds_box.encloses(candidate)
            && !candidate.overlaps(&tx_keepout)
            && !placed
                .iter()
                .any(|p| p.inflate(CLEARANCE).overlaps(candidate))
            && !rx_points.iter().any(|r| candidate.contains(*r))
    };

    // one building complex per quadrant, cycling if more than four
    let quadrants = [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let inner = road + config.setback;
    let outer = half - CLEARANCE;
    for group in 0..config.building_groups {
        let (sx, sy) = quadrants[group as usize % 4];
        // a bad early draw can leave no room, so the whole group is redrawn
        let mut restarts = 0;
        let boxes = 'group: loop {
            let count =
                rng.random_range(config.buildings_per_group.0..=config.buildings_per_group.1);
            let mut boxes: Vec<Aabb> = Vec::new();
            for b in 0..count {
                let mut attempt = 0;
                let candidate = loop {
                    if attempt == config.max_retries {
                        restarts += 1;
                        if restarts == GROUP_RESTARTS {
                            return Err(Error::Placement {
                                what: format!("building {b} of group {group}"),
                                attempts: attempt,
                            });
                        }
                        continue 'group;
                    }
                    attempt += 1;
                    let w = uniform(&mut rng, config.building_footprint);
                    let d = uniform(&mut rng, config.building_footprint);
                    let h = uniform(&mut rng, config.building_height);
                    let u = uniform(&mut rng, (inner, outer - w));
                    let v = uniform(&mut rng, (inner, outer - d));
                    let (x0, x1) = if sx > 0.0 { (u, u + w) } else { (-u - w, -u) };
                    let (y0, y1) = if sy > 0.0 { (v, v + d) } else { (-v - d, -v) };
                    let cand = Aabb::new(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, h));
                    let others: Vec<Aabb> = placed.iter().chain(&boxes).copied().collect();
                    if fits(&cand, &others) {
                        break cand;
                    }
                };
                boxes.push(candidate);
            }
            break boxes;
        };
        for candidate in boxes {
            placed.push(candidate);
            scatterers.push(Scatterer {
                id: scatterers.len() as u32,
                box_min: candidate.min,
                box_max: candidate.max,
                material: Material::concrete(),
                mobility: MobilityClass::Static,
                group_id: group,
                surface_count: 6,
                present: true,
            });
        }
    }

    // vehicles park or drive on the lanes with y < 0
    let vehicle_group = config.building_groups;
    let n_vehicles = rng.random_range(config.vehicle_count.0..=config.vehicle_count.1);
    let side_lanes = (config.lanes / 2).max(1);
    for v in 0..n_vehicles {
        let mut attempt = 0;
        let (candidate, velocity) = loop {
            if attempt == config.max_retries {
                return Err(Error::Placement {
                    what: format!("vehicle {v}"),
                    attempts: attempt,
                });
            }
            attempt += 1;
            let lane = rng.random_range(0..side_lanes);
            let yc = -road + config.lane_width * (lane as f64 + 0.5);
            let x0 = uniform(
                &mut rng,
                (-half + CLEARANCE, half - CLEARANCE - VEHICLE_SIZE.x),
            );
            let speed = uniform(&mut rng, config.vehicle_speed);
            let cand = Aabb::new(
                Vec3::new(x0, yc - VEHICLE_SIZE.y / 2.0, 0.0),
                Vec3::new(
                    x0 + VEHICLE_SIZE.x,
                    yc + VEHICLE_SIZE.y / 2.0,
                    VEHICLE_SIZE.z,
                ),
            );
            if fits(&cand, &placed) {
                break (cand, Vec3::new(speed, 0.0, 0.0));
            }
        };
        placed.push(candidate);
        scatterers.push(Scatterer {
            id: scatterers.len() as u32,
            box_min: candidate.min,
            box_max: candidate.max,
            material: Material::metal(),
            mobility: MobilityClass::Dynamic { velocity },
            group_id: vehicle_group,
            surface_count: 6,
            present: true,
        });
    }

    // random-class clutter on the north sidewalk
    for p in 0..config.random_count {
        let mut attempt = 0;
        let candidate = loop {
            if attempt == config.max_retries {
                return Err(Error::Placement {
                    what: format!("random scatterer {p}"),
                    attempts: attempt,
                });
            }
            attempt += 1;
            let x0 = uniform(
                &mut rng,
                (-half + CLEARANCE, half - CLEARANCE - PEDESTRIAN_SIZE.x),
            );
            let y0 = uniform(
                &mut rng,
                (road + 0.2, road + config.setback - PEDESTRIAN_SIZE.y - 0.2),
            );
            let cand = Aabb::new(
                Vec3::new(x0, y0, 0.0),
                Vec3::new(
                    x0 + PEDESTRIAN_SIZE.x,
                    y0 + PEDESTRIAN_SIZE.y,
                    PEDESTRIAN_SIZE.z,
                ),
            );
            if fits(&cand, &placed) {
                break cand;
            }
        };
        placed.push(candidate);
        scatterers.push(Scatterer {
            id: scatterers.len() as u32,
            box_min: candidate.min,
            box_max: candidate.max,
            material: Material::concrete(),
            mobility: MobilityClass::Random {
                toggle_probability: config.random_toggle_probability,
            },
            group_id: vehicle_group + 1,
            surface_count: 6,
            present: true,
        });
    }

    Ok(Scene {
        bounds,
        scatterers,
        tx: config.tx.clone(),
        rx_points,
        seed,
    })
}

/// Evolves the scene by `dt` seconds.
///
/// Dynamic boxes translate by `velocity * dt`, clamped to the scene bounds.
/// Random boxes flip their presence flag with their toggle probability,
/// one uniform draw per Random scatterer in list order. `dt == 0` is the identity.
pub fn advance_time(scene: &Scene, dt: f64, rng: &mut impl Rng) -> Result<Scene> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "dt must be finite and >= 0, got {dt}"
        )));
    }
    let mut next = scene.clone();
    if dt == 0.0 {
        return Ok(next);
    }
    let (lo, hi) = scene.bounds;
    for s in &mut next.scatterers {
        match s.mobility {
            MobilityClass::Static => {}
            MobilityClass::Dynamic { velocity } => {
                let mut min = s.box_min + velocity * dt;
                let mut max = s.box_max + velocity * dt;
                for a in 0..3 {
                    let shift = if min.axis(a) < lo.axis(a) {
                        lo.axis(a) - min.axis(a)
                    } else if max.axis(a) > hi.axis(a) {
                        hi.axis(a) - max.axis(a)
                    } else {
                        0.0
                    };
                    if shift != 0.0 {
                        debug!("scatterer {} clamped to bounds on axis {a}", s.id);
                        min = min.with_axis(a, min.axis(a) + shift);
                        max = max.with_axis(a, max.axis(a) + shift);
                    }
                }
                s.box_min = min;
                s.box_max = max;
            }
            MobilityClass::Random { toggle_probability } => {
                let u: f64 = rng.random();
                if u < toggle_probability {
                    s.present = !s.present;
                }
            }
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite {
        what: String,
    },
    InvertedBox {
        scatterer_id: u32,
        axis: usize,
    },
    ScattererOutOfBounds {
        scatterer_id: u32,
    },
    BadReflectionAmplitude {
        scatterer_id: u32,
    },
    BadToggleProbability {
        scatterer_id: u32,
    },
    WrongSurfaceCount {
        scatterer_id: u32,
        surface_count: u32,
    },
    DuplicateId {
        scatterer_id: u32,
    },
    BadTxArray,
    TxOutOfBounds,
    TxInsideScatterer {
        scatterer_id: u32,
    },
    RxOutOfBounds {
        rx_index: usize,
    },
    RxNotAboveGround {
        rx_index: usize,
    },
    RxInsideScatterer {
        rx_index: usize,
        scatterer_id: u32,
    },
    InvertedBounds,
}

/// Lists every violated scene invariant; empty means the scene is well formed.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let bounds = scene.bounds_box();
    if !(bounds.min.is_finite() && bounds.max.is_finite()) {
        out.push(Violation::NonFinite {
            what: "bounds".into(),
        });
    }
    if !bounds.is_proper() {
        out.push(Violation::InvertedBounds);
    }
    let mut seen = std::collections::HashSet::new();
    for s in &scene.scatterers {
        if !seen.insert(s.id) {
            out.push(Violation::DuplicateId { scatterer_id: s.id });
        }
        if !(s.box_min.is_finite() && s.box_max.is_finite()) {
            out.push(Violation::NonFinite {
                what: format!("scatterer {}", s.id),
            });
            continue;
        }
        let mut inverted = false;
        for axis in 0..3 {
            if s.box_min.axis(axis) >= s.box_max.axis(axis) {
                out.push(Violation::InvertedBox {
                    scatterer_id: s.id,
                    axis,
                });
                inverted = true;
            }
        }
        if !inverted && !bounds.encloses(&s.aabb()) {
            out.push(Violation::ScattererOutOfBounds { scatterer_id: s.id });
        }
        if !(0.0..=1.0).contains(&s.material.reflection_amplitude) {
            out.push(Violation::BadReflectionAmplitude { scatterer_id: s.id });
        }
        if let MobilityClass::Random { toggle_probability } = s.mobility {
            if !(0.0..=1.0).contains(&toggle_probability) {
                out.push(Violation::BadToggleProbability { scatterer_id: s.id });
            }
        }
        if let MobilityClass::Dynamic { velocity } = s.mobility {
            if !velocity.is_finite() {
                out.push(Violation::NonFinite {
                    what: format!("velocity of scatterer {}", s.id),
                });
            }
        }
        if s.surface_count != 6 {
            out.push(Violation::WrongSurfaceCount {
                scatterer_id: s.id,
                surface_count: s.surface_count,
            });
        }
    }
    let tx = &scene.tx;
    if tx.n_elements < 1 || !(tx.element_spacing > 0.0) {
        out.push(Violation::BadTxArray);
    }
    if !tx.position.is_finite() {
        out.push(Violation::NonFinite { what: "tx".into() });
    } else if !bounds.contains(tx.position) {
        out.push(Violation::TxOutOfBounds);
    }
    let proper: Vec<&Scatterer> = scene
        .active_scatterers()
        .filter(|s| s.aabb().is_proper())
        .collect();
    if let Some(s) = proper.iter().find(|s| s.aabb().contains(tx.position)) {
        out.push(Violation::TxInsideScatterer { scatterer_id: s.id });
    }
    for (i, p) in scene.rx_points.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::NonFinite {
                what: format!("rx point {i}"),
            });
            continue;
        }
        if !bounds.contains(*p) {
            out.push(Violation::RxOutOfBounds { rx_index: i });
        }
        if p.z <= 0.0 {
            out.push(Violation::RxNotAboveGround { rx_index: i });
        }
        if let Some(s) = proper.iter().find(|s| s.aabb().contains(*p)) {
            out.push(Violation::RxInsideScatterer {
                rx_index: i,
                scatterer_id: s.id,
            });
        }
    }
    out
}
