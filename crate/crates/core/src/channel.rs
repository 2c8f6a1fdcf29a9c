//! Deterministic geometric channel engine and statistical baseline.
//!
//! Propagation is limited to the direct ray, the ground reflection and
//! first-order reflections off vertical box faces (image method). Every
//! reflection multiplies the free-space amplitude by the negated real
//! reflection amplitude of the material.

use std::f64::consts::PI;

use ndarray::Array3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Aabb, Vec3};
use crate::scene::{Material, MobilityClass, Scene, TxSite};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Received power reported for a channel with no energy.
pub const POWER_FLOOR_DBM: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub fc_hz: f64,
    pub bandwidth_hz: f64,
    pub scs_hz: f64,
    pub n_symbols: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fc_hz: 6.775e9,
            bandwidth_hz: 8.28e6,
            scs_hz: 120e3,
            n_symbols: 3,
        }
    }
}

impl OfdmConfig {
    pub fn n_subcarriers(&self) -> usize {
        (self.bandwidth_hz / self.scs_hz + 1e-9).floor() as usize
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc_hz
    }

    /// Offset of subcarrier `k` from the carrier, centred on the band.
    pub fn subcarrier_offset_hz(&self, k: usize) -> f64 {
        -self.bandwidth_hz / 2.0 + (k as f64 + 0.5) * self.scs_hz
    }

    pub fn subcarrier_hz(&self, k: usize) -> f64 {
        self.fc_hz + self.subcarrier_offset_hz(k)
    }

    pub fn symbol_time(&self, s: usize) -> f64 {
        s as f64 / self.scs_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fc_hz > 0.0 && self.bandwidth_hz > 0.0 && self.scs_hz > 0.0)
            || self.n_symbols == 0
        {
            return Err(Error::invalid("OFDM parameters must be positive"));
        }
        if self.n_subcarriers() == 0 {
            return Err(Error::invalid("bandwidth holds no subcarrier"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    GroundReflection,
    /// Face ids: 0 = x-min, 1 = x-max, 2 = y-min, 3 = y-max.
    WallReflection {
        scatterer_id: u32,
        face_id: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub kind: PathKind,
    pub delay_s: f64,
    pub gain: Complex64,
    /// Departure azimuth relative to the array broadside.
    pub aod_azimuth: f64,
    pub doppler_hz: f64,
    pub length_m: f64,
    pub bounce_point: Option<Vec3>,
}

/// Traced multipath for one Tx-Rx link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cir {
    pub tx: Vec3,
    pub rx: Vec3,
    pub paths: Vec<PathComponent>,
}

impl Cir {
    pub fn has_direct(&self) -> bool {
        self.paths.iter().any(|p| p.kind == PathKind::Direct)
    }

    /// Sum of path powers `sum |g|^2`.
    pub fn path_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Frequency response indexed `[subcarrier, symbol, tx element]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    pub h: Array3<Complex64>,
}

impl Cfr {
    pub fn zeros(n_subcarriers: usize, n_symbols: usize, n_tx: usize) -> Self {
        Self {
            h: Array3::zeros((n_subcarriers, n_symbols, n_tx)),
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.h.dim().0
    }

    pub fn n_symbols(&self) -> usize {
        self.h.dim().1
    }

    pub fn n_tx(&self) -> usize {
        self.h.dim().2
    }

    /// Response over subcarriers for one symbol and element.
    pub fn subcarrier_slice(&self, symbol: usize, element: usize) -> Vec<Complex64> {
        (0..self.n_subcarriers())
            .map(|k| self.h[[k, symbol, element]])
            .collect()
    }
}

/// Entry parameter `t` in `[0, 1]` of the closed segment `p0 -> p1` into the
/// closed box, or `None` if they are disjoint.
pub fn segment_box_entry(p0: Vec3, p1: Vec3, bx: &Aabb) -> Option<f64> {
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for a in 0..3 {
        let o = p0.axis(a);
        let d = p1.axis(a) - o;
        let (lo, hi) = (bx.min.axis(a), bx.max.axis(a));
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let mut ta = (lo - o) / d;
            let mut tb = (hi - o) / d;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some(t0)
}

/// Slab test: does the segment `p0 -> p1` touch the closed box?
/// A segment that only touches a face, edge or corner counts as intersecting.
pub fn segment_intersects_box(p0: Vec3, p1: Vec3, bx: &Aabb) -> bool {
    segment_box_entry(p0, p1, bx).is_some()
}

/// Complex amplitude of a path: Friis amplitude `lambda / (4 pi L)`, carrier
/// phase `-2 pi L / lambda`, times `-rho` if the path reflects off `reflection`.
pub fn path_gain(
    path_length_m: f64,
    fc_hz: f64,
    reflection: Option<&Material>,
) -> Result<Complex64> {
    if !(path_length_m > 0.0 && path_length_m.is_finite()) {
        return Err(Error::invalid(format!(
            "path length must be positive, got {path_length_m}"
        )));
    }
    if !(fc_hz > 0.0) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    let lambda = SPEED_OF_LIGHT / fc_hz;
    let amplitude = lambda / (4.0 * PI * path_length_m);
    let phase = -2.0 * PI * (path_length_m / lambda).rem_euclid(1.0);
    let mut g = Complex64::from_polar(amplitude, phase);
    if let Some(m) = reflection {
        g *= -m.reflection_amplitude;
    }
    Ok(g)
}

/// Departure azimuth of `toward` seen from the Tx, relative to broadside.
pub fn departure_azimuth(tx: &TxSite, toward: Vec3) -> f64 {
    let dx = toward.x - tx.position.x;
    let dy = toward.y - tx.position.y;
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    wrap_angle(dy.atan2(dx) - tx.boresight_azimuth)
}

fn segment_blocked(scene: &Scene, p0: Vec3, p1: Vec3, skip: Option<u32>) -> bool {
    scene
        .active_scatterers()
        .filter(|s| Some(s.id) != skip)
        .any(|s| segment_intersects_box(p0, p1, &s.aabb()))
}

struct Face {
    id: u8,
    axis: usize,
    plane: f64,
    /// +1 if the outward normal points along +axis.
    outward: f64,
}

fn vertical_faces(bx: &Aabb) -> [Face; 4] {
    [
        Face {
            id: 0,
            axis: 0,
            plane: bx.min.x,
            outward: -1.0,
        },
        Face {
            id: 1,
            axis: 0,
            plane: bx.max.x,
            outward: 1.0,
        },
        Face {
            id: 2,
            axis: 1,
            plane: bx.min.y,
            outward: -1.0,
        },
        Face {
            id: 3,
            axis: 1,
            plane: bx.max.y,
            outward: 1.0,
        },
    ]
}

/// Traces direct, ground-reflected and first-order wall-reflected paths.
///
/// Paths come out as Direct, GroundReflection, then wall reflections sorted
/// by `(scatterer_id, face_id)`.
pub fn trace_paths(scene: &Scene, rx: Vec3, fc_hz: f64) -> Result<Cir> {
    if let Some(s) = scene.containing_scatterer(rx) {
        return Err(Error::RxInsideScatterer {
            point: rx.to_string(),
            scatterer_id: s.id,
        });
    }
    let tx = scene.tx.position;
    if tx == rx {
        return Err(Error::invalid("transmitter and receiver coincide"));
    }
    let lambda = SPEED_OF_LIGHT / fc_hz;
    let mut paths = Vec::new();

    if !segment_blocked(scene, tx, rx, None) {
        let len = (rx - tx).norm();
        paths.push(PathComponent {
            kind: PathKind::Direct,
            delay_s: len / SPEED_OF_LIGHT,
            gain: path_gain(len, fc_hz, None)?,
            aod_azimuth: departure_azimuth(&scene.tx, rx),
            doppler_hz: 0.0,
            length_m: len,
            bounce_point: None,
        });
    }

    if tx.z > 0.0 && rx.z > 0.0 {
        let image = Vec3::new(tx.x, tx.y, -tx.z);
        let t = tx.z / (tx.z + rx.z);
        let bounce = Vec3::new(tx.x + t * (rx.x - tx.x), tx.y + t * (rx.y - tx.y), 0.0);
        let b = scene.bounds_box();
        let in_bounds = bounce.x >= b.min.x
            && bounce.x <= b.max.x
            && bounce.y >= b.min.y
            && bounce.y <= b.max.y;
        if in_bounds
            && !segment_blocked(scene, tx, bounce, None)
            && !segment_blocked(scene, bounce, rx, None)
        {
            let len = (rx - image).norm();
            paths.push(PathComponent {
                kind: PathKind::GroundReflection,
                delay_s: len / SPEED_OF_LIGHT,
                gain: path_gain(len, fc_hz, Some(&Material::ground()))?,
                aod_azimuth: departure_azimuth(&scene.tx, bounce),
                doppler_hz: 0.0,
                length_m: len,
                bounce_point: Some(bounce),
            });
        }
    }

    let mut walls = Vec::new();
    for s in scene.active_scatterers() {
        let bx = s.aabb();
        for face in vertical_faces(&bx) {
            let a = face.axis;
            // both ends strictly on the outward side of the face plane
            let tx_side = (tx.axis(a) - face.plane) * face.outward;
            let rx_side = (rx.axis(a) - face.plane) * face.outward;
            if tx_side <= 0.0 || rx_side <= 0.0 {
                continue;
            }
            let image = tx.with_axis(a, 2.0 * face.plane - tx.axis(a));
            let t = (face.plane - image.axis(a)) / (rx.axis(a) - image.axis(a));
            let bounce = image.lerp(rx, t).with_axis(a, face.plane);
            let other = 1 - a;
            let on_face = bounce.axis(other) >= bx.min.axis(other)
                && bounce.axis(other) <= bx.max.axis(other)
                && bounce.z >= bx.min.z
                && bounce.z <= bx.max.z;
            if !on_face {
                continue;
            }
            if segment_blocked(scene, tx, bounce, Some(s.id))
                || segment_blocked(scene, bounce, rx, Some(s.id))
            {
                continue;
            }
            let len = (rx - image).norm();
            let doppler_hz = match s.mobility {
                MobilityClass::Dynamic { velocity } => {
                    // the image moves at twice the face's normal velocity
                    let vn = velocity.axis(a);
                    let image_velocity = Vec3::ZERO.with_axis(a, 2.0 * vn);
                    let rate = (image - rx).dot(image_velocity) / len;
                    -rate / lambda
                }
                _ => 0.0,
            };
            walls.push(PathComponent {
                kind: PathKind::WallReflection {
                    scatterer_id: s.id,
                    face_id: face.id,
                },
                delay_s: len / SPEED_OF_LIGHT,
                gain: path_gain(len, fc_hz, Some(&s.material))?,
                aod_azimuth: departure_azimuth(&scene.tx, bounce),
                doppler_hz,
                length_m: len,
                bounce_point: Some(bounce),
            });
        }
    }
    walls.sort_by_key(|p| p.kind);
    paths.extend(walls);
    Ok(Cir { tx, rx, paths })
}

/// Synthesises `h[k, s, n] = sum_p g_p e^{-j2pi df_k tau_p} e^{j2pi nu_p t_s} e^{j2pi dn sin(aod_p)}`.
///
/// `df_k` is the subcarrier offset from the carrier: the carrier phase is
/// already part of `g_p`, so the net phase per path is `-2 pi f_k tau_p`.
pub fn cir_to_cfr(cir: &Cir, ofdm: &OfdmConfig, array: &TxSite) -> Cfr {
    let n_sc = ofdm.n_subcarriers();
    let n_sym = ofdm.n_symbols;
    let n_tx = array.n_elements;
    let mut cfr = Cfr::zeros(n_sc, n_sym, n_tx);
    let mut freq = vec![Complex64::new(0.0, 0.0); n_sc];
    let mut time = vec![Complex64::new(0.0, 0.0); n_sym];
    let mut space = vec![Complex64::new(0.0, 0.0); n_tx];
    for p in &cir.paths {
        for (k, f) in freq.iter_mut().enumerate() {
            let arg = -2.0 * PI * ofdm.subcarrier_offset_hz(k) * p.delay_s;
            *f = p.gain * Complex64::from_polar(1.0, arg);
        }
        for (s, v) in time.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, 2.0 * PI * p.doppler_hz * ofdm.symbol_time(s));
        }
        let sin_aod = p.aod_azimuth.sin();
        for (n, v) in space.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, 2.0 * PI * array.element_spacing * n as f64 * sin_aod);
        }
        for k in 0..n_sc {
            for s in 0..n_sym {
                let fs = freq[k] * time[s];
                for n in 0..n_tx {
                    cfr.h[[k, s, n]] += fs * space[n];
                }
            }
        }
    }
    cfr
}

const LOS_SIGMA_DB: f64 = 4.0;
const NLOS_SIGMA_DB: f64 = 6.0;

/// UMa-style empirical path loss in dB without shadowing.
///
/// LoS: `28 + 22 log10(d3d) + 20 log10(fc)`; NLoS: the larger of the LoS value
/// and `13.54 + 39.08 log10(d3d) + 20 log10(fc) - 0.6 (h_ut - 1.5)`.
pub fn stat_path_loss(d2d: f64, d3d: f64, fc_ghz: f64, h_ut_m: f64, los: bool) -> Result<f64> {
    if !(d3d >= 1.0) {
        return Err(Error::invalid(format!(
            "d3d must be at least 1 m, got {d3d}"
        )));
    }
    if !(d2d >= 0.0 && d2d <= d3d) {
        return Err(Error::invalid(format!("d2d {d2d} must lie in [0, d3d]")));
    }
    if !(fc_ghz > 0.0) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    let pl_los = 28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10();
    if los {
        return Ok(pl_los);
    }
    let pl_nlos = 13.54 + 39.08 * d3d.log10() + 20.0 * fc_ghz.log10() - 0.6 * (h_ut_m - 1.5);
    Ok(pl_los.max(pl_nlos))
}

/// [`stat_path_loss`] plus log-normal shadowing (4 dB LoS, 6 dB NLoS).
pub fn stat_path_loss_shadowed(
    d2d: f64,
    d3d: f64,
    fc_ghz: f64,
    h_ut_m: f64,
    los: bool,
    rng: &mut impl Rng,
) -> Result<f64> {
    let pl = stat_path_loss(d2d, d3d, fc_ghz, h_ut_m, los)?;
    let sigma = if los { LOS_SIGMA_DB } else { NLOS_SIGMA_DB };
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    Ok(pl + normal.sample(rng))
}

/// Mean over subcarriers and symbols of `|w^H h|^2`.
pub fn beamformed_gain(cfr: &Cfr, weights: &[Complex64]) -> f64 {
    let (n_sc, n_sym, n_tx) = cfr.h.dim();
    assert_eq!(
        weights.len(),
        n_tx,
        "weight vector length must match the array"
    );
    let mut acc = 0.0;
    for k in 0..n_sc {
        for s in 0..n_sym {
            let mut y = Complex64::new(0.0, 0.0);
            for n in 0..n_tx {
                y += weights[n].conj() * cfr.h[[k, s, n]];
            }
            acc += y.norm_sqr();
        }
    }
    acc / (n_sc * n_sym) as f64
}

pub fn total_tx_power_dbm(per_element_power_dbm: f64, n_tx: usize) -> f64 {
    per_element_power_dbm + 10.0 * (n_tx as f64).log10()
}

fn check_unit_norm(weights: &[Complex64]) -> Result<()> {
    let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitWeights(norm));
    }
    Ok(())
}

/// Wideband received power in dBm for a unit-norm transmit weight vector.
pub fn received_power(cfr: &Cfr, weights: &[Complex64], per_element_power_dbm: f64) -> Result<f64> {
    check_unit_norm(weights)?;
    if weights.len() != cfr.n_tx() {
        return Err(Error::invalid(format!(
            "weight vector has {} entries, array has {}",
            weights.len(),
            cfr.n_tx()
        )));
    }
    let gain = beamformed_gain(cfr, weights);
    Ok(power_dbm(
        total_tx_power_dbm(per_element_power_dbm, cfr.n_tx()),
        gain,
    ))
}

/// `p_tx_dbm + 10 log10(gain)`, floored at [`POWER_FLOOR_DBM`].
pub fn power_dbm(p_tx_dbm: f64, gain: f64) -> f64 {
    if gain > 0.0 {
        (p_tx_dbm + 10.0 * gain.log10()).max(POWER_FLOOR_DBM)
    } else {
        POWER_FLOOR_DBM
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Scatterer, TxSite};

    fn empty_scene(tx: Vec3) -> Scene {
        Scene {
            bounds: (
                Vec3::new(-200.0, -200.0, 0.0),
                Vec3::new(200.0, 200.0, 100.0),
            ),
            scatterers: vec![],
            tx: TxSite {
                position: tx,
                ..TxSite::default()
            },
            rx_points: vec![],
            seed: 0,
        }
    }

    fn building(id: u32, min: Vec3, max: Vec3) -> Scatterer {
        Scatterer {
            id,
            box_min: min,
            box_max: max,
            material: Material::concrete(),
            mobility: MobilityClass::Static,
            group_id: 0,
            surface_count: 6,
            present: true,
        }
    }

    const FC: f64 = 6.775e9;

    #[test]
    fn subcarrier_count_from_table() {
        assert_eq!(OfdmConfig::default().n_subcarriers(), 69);
    }

    #[test]
    fn segment_left_of_box_misses() {
        let bx = Aabb::new(Vec3::new(10.0, -1.0, 0.0), Vec3::new(12.0, 1.0, 5.0));
        assert!(!segment_intersects_box(
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(9.0, 0.0, 1.0),
            &bx
        ));
    }

    #[test]
    fn segment_through_building() {
        // at x = 40 the ray height is 10 - 8 * 0.4 = 6.8 m, inside z in [0, 20]
        let bx = Aabb::new(Vec3::new(40.0, -5.0, 0.0), Vec3::new(60.0, 5.0, 20.0));
        let p0 = Vec3::new(0.0, 0.0, 10.0);
        let p1 = Vec3::new(100.0, 0.0, 2.0);
        assert!(segment_intersects_box(p0, p1, &bx));
        let t = segment_box_entry(p0, p1, &bx).unwrap();
        assert!((t - 0.4).abs() < 1e-12);
        assert!((p0.lerp(p1, t).z - 6.8).abs() < 1e-12);
    }

    #[test]
    fn endpoint_on_face_counts() {
        let bx = Aabb::new(Vec3::new(10.0, -1.0, 0.0), Vec3::new(12.0, 1.0, 5.0));
        assert!(segment_intersects_box(
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(10.0, 0.0, 1.0),
            &bx
        ));
    }

    #[test]
    fn empty_scene_has_direct_and_ground() {
        let scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        let cir = trace_paths(&scene, Vec3::new(100.0, 0.0, 2.0), FC).unwrap();
        let kinds: Vec<PathKind> = cir.paths.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![PathKind::Direct, PathKind::GroundReflection]);
    }

    #[test]
    fn ground_reflection_geometry() {
        let scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        let cir = trace_paths(&scene, Vec3::new(100.0, 0.0, 2.0), FC).unwrap();
        let g = &cir.paths[1];
        let bounce = g.bounce_point.unwrap();
        assert!((bounce.x - 100.0 * 10.0 / 12.0).abs() < 1e-9);
        assert!((g.length_m - 100.71742649611338).abs() < 1e-9);
        assert!((g.delay_s * SPEED_OF_LIGHT - g.length_m).abs() < 1e-9);
    }

    #[test]
    fn blocker_removes_direct_path() {
        let mut scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        scene.scatterers.push(building(
            0,
            Vec3::new(40.0, -5.0, 0.0),
            Vec3::new(60.0, 5.0, 20.0),
        ));
        let cir = trace_paths(&scene, Vec3::new(100.0, 0.0, 2.0), FC).unwrap();
        assert!(!cir.has_direct());
        assert!(cir
            .paths
            .iter()
            .all(|p| !matches!(p.kind, PathKind::WallReflection { .. })));
    }

    #[test]
    fn low_box_keeps_direct_path() {
        let mut scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        scene.scatterers.push(building(
            0,
            Vec3::new(40.0, -5.0, 0.0),
            Vec3::new(60.0, 5.0, 5.0),
        ));
        let cir = trace_paths(&scene, Vec3::new(100.0, 0.0, 2.0), FC).unwrap();
        assert!(cir.has_direct());
    }

    #[test]
    fn side_wall_reflection_obeys_mirror_law() {
        let mut scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        scene.scatterers.push(building(
            3,
            Vec3::new(20.0, 20.0, 0.0),
            Vec3::new(80.0, 40.0, 30.0),
        ));
        let rx = Vec3::new(100.0, 0.0, 2.0);
        let cir = trace_paths(&scene, rx, FC).unwrap();
        let wall = cir
            .paths
            .iter()
            .find(|p| {
                p.kind
                    == PathKind::WallReflection {
                        scatterer_id: 3,
                        face_id: 2,
                    }
            })
            .expect("y-min face reflection");
        let b = wall.bounce_point.unwrap();
        assert_eq!(b.y, 20.0);
        // Tx and Rx both sit 20 m from the face plane, so the bounce is the midpoint
        assert!((b.x - 50.0).abs() < 1e-9);
        assert!((b.z - 6.0).abs() < 1e-9);
        let image = Vec3::new(0.0, 40.0, 10.0);
        assert!((wall.length_m - (rx - image).norm()).abs() < 1e-9);
        let expected = path_gain(wall.length_m, FC, Some(&Material::concrete())).unwrap();
        assert!((wall.gain - expected).norm() < 1e-18);
    }

    #[test]
    fn rx_inside_box_rejected() {
        let mut scene = empty_scene(Vec3::new(0.0, 0.0, 10.0));
        scene.scatterers.push(building(
            9,
            Vec3::new(40.0, -5.0, 0.0),
            Vec3::new(60.0, 5.0, 20.0),
        ));
        match trace_paths(&scene, Vec3::new(50.0, 0.0, 2.0), FC) {
            Err(Error::RxInsideScatterer { scatterer_id, .. }) => assert_eq!(scatterer_id, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn friis_loss_at_one_meter() {
        let g = path_gain(1.0, FC, None).unwrap();
        let pl = -20.0 * g.norm().log10();
        let oracle = 20.0 * (4.0 * PI * FC / SPEED_OF_LIGHT).log10();
        assert!((pl - oracle).abs() < 1e-9);
        assert!((pl - 49.06).abs() < 0.01);
    }

    #[test]
    fn doubling_length_halves_amplitude() {
        let a = path_gain(37.0, FC, None).unwrap().norm();
        let b = path_gain(74.0, FC, None).unwrap().norm();
        assert!((20.0 * (a / b).log10() - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn metal_reflection_scales_and_flips() {
        let free = path_gain(50.0, FC, None).unwrap();
        let refl = path_gain(50.0, FC, Some(&Material::metal())).unwrap();
        assert!((refl + free * 0.9).norm() < 1e-18);
    }

    #[test]
    fn zero_length_rejected() {
        assert!(path_gain(0.0, FC, None).is_err());
    }

    #[test]
    fn stat_model_reference_values() {
        let los = stat_path_loss(99.0, 100.0, 6.775, 2.0, true).unwrap();
        let nlos = stat_path_loss(99.0, 100.0, 6.775, 2.0, false).unwrap();
        assert!((los - 88.62).abs() < 0.005, "{los}");
        assert!((nlos - 108.02).abs() < 0.005, "{nlos}");
        assert!(stat_path_loss(0.5, 0.9, 6.775, 2.0, true).is_err());
    }

    #[test]
    fn shadowing_is_seeded() {
        use rand::SeedableRng;
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = stat_path_loss_shadowed(50.0, 60.0, 6.775, 2.0, false, &mut a).unwrap();
        let y = stat_path_loss_shadowed(50.0, 60.0, 6.775, 2.0, false, &mut b).unwrap();
        assert_eq!(x, y);
    }

    fn single_path(aod: f64, delay: f64) -> PathComponent {
        PathComponent {
            kind: PathKind::Direct,
            delay_s: delay,
            gain: Complex64::new(1e-4, 2e-4),
            aod_azimuth: aod,
            doppler_hz: 0.0,
            length_m: delay * SPEED_OF_LIGHT,
            bounce_point: None,
        }
    }

    #[test]
    fn single_path_magnitude_is_flat() {
        let cir = Cir {
            tx: Vec3::ZERO,
            rx: Vec3::new(1.0, 0.0, 0.0),
            paths: vec![PathComponent {
                doppler_hz: 300.0,
                ..single_path(0.3, 4e-7)
            }],
        };
        let cfr = cir_to_cfr(&cir, &OfdmConfig::default(), &TxSite::default());
        let m0 = cfr.h[[0, 0, 5]].norm();
        for v in cfr.h.iter() {
            assert!((v.norm() - m0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_path_fringe_period() {
        // equal amplitudes with delay gap dt: |h| repeats every 1/dt in frequency
        let dt = 1.0 / (4.0 * 120e3);
        let mut p2 = single_path(0.0, 1e-7 + dt);
        p2.kind = PathKind::GroundReflection;
        let cir = Cir {
            tx: Vec3::ZERO,
            rx: Vec3::new(1.0, 0.0, 0.0),
            paths: vec![single_path(0.0, 1e-7), p2],
        };
        let tx = TxSite {
            n_elements: 1,
            ..TxSite::default()
        };
        let cfr = cir_to_cfr(&cir, &OfdmConfig::default(), &tx);
        // period 1/dt = 480 kHz = 4 subcarriers
        for k in 0..65 {
            assert!((cfr.h[[k, 0, 0]].norm() - cfr.h[[k + 4, 0, 0]].norm()).abs() < 1e-15);
        }
        let m: Vec<f64> = (0..4).map(|k| cfr.h[[k, 0, 0]].norm()).collect();
        assert!(
            m.iter().cloned().fold(f64::MIN, f64::max) - m.iter().cloned().fold(f64::MAX, f64::min)
                > 1e-5
        );
    }

    #[test]
    fn empty_cir_gives_zero_cfr() {
        let cir = Cir {
            tx: Vec3::ZERO,
            rx: Vec3::new(1.0, 0.0, 0.0),
            paths: vec![],
        };
        let cfr = cir_to_cfr(&cir, &OfdmConfig::default(), &TxSite::default());
        assert!(cfr.h.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        let w = vec![Complex64::new(1.0 / (128f64).sqrt(), 0.0); 128];
        assert_eq!(received_power(&cfr, &w, -8.0).unwrap(), POWER_FLOOR_DBM);
    }

    #[test]
    fn matched_broadside_beam_gains_array_factor() {
        let cir = Cir {
            tx: Vec3::ZERO,
            rx: Vec3::new(1.0, 0.0, 0.0),
            paths: vec![single_path(0.0, 2e-7)],
        };
        let ofdm = OfdmConfig::default();
        let array = TxSite::default();
        let cfr = cir_to_cfr(&cir, &ofdm, &array);
        let w = vec![Complex64::new(1.0 / 128f64.sqrt(), 0.0); 128];
        let p_array = received_power(&cfr, &w, -8.0).unwrap();
        // single element radiating the same total power
        let single = TxSite {
            n_elements: 1,
            ..array
        };
        let cfr1 = cir_to_cfr(&cir, &ofdm, &single);
        let p_single = received_power(
            &cfr1,
            &[Complex64::new(1.0, 0.0)],
            -8.0 + 10.0 * 128f64.log10(),
        )
        .unwrap();
        assert!((p_array - p_single - 10.0 * 128f64.log10()).abs() < 1e-9);
        assert!((p_array - p_single - 21.07).abs() < 0.005);
    }

    #[test]
    fn total_power_of_128_elements() {
        let p = total_tx_power_dbm(-8.0, 128);
        assert!((p - 10.0 * (128.0 * 10f64.powf(-0.8)).log10()).abs() < 1e-12);
        assert!((p - 13.07).abs() < 0.005);
    }

    #[test]
    fn non_unit_weights_rejected() {
        let cfr = Cfr::zeros(4, 1, 2);
        let w = vec![Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            received_power(&cfr, &w, 0.0),
            Err(Error::NonUnitWeights(_))
        ));
    }
}
