#![allow(dead_code)]

use eicsim_core::scene::{Material, MobilityClass, Scatterer, Scene, TxSite};
use eicsim_core::Vec3;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed runner so property suites are reproducible run to run.
pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn building(id: u32, min: Vec3, max: Vec3) -> Scatterer {
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

pub fn vehicle(id: u32, min: Vec3, max: Vec3, velocity: Vec3) -> Scatterer {
    Scatterer {
        material: Material::metal(),
        mobility: MobilityClass::Dynamic { velocity },
        ..building(id, min, max)
    }
}

pub fn scene_with(tx: Vec3, scatterers: Vec<Scatterer>) -> Scene {
    Scene {
        bounds: (
            Vec3::new(-200.0, -200.0, 0.0),
            Vec3::new(200.0, 200.0, 100.0),
        ),
        scatterers,
        tx: TxSite {
            position: tx,
            ..TxSite::default()
        },
        rx_points: vec![],
        seed: 0,
    }
}

pub fn arb_box() -> impl Strategy<Value = (Vec3, Vec3)> {
    (-80.0..80.0, -80.0..80.0, 1.0..25.0, 1.0..25.0, 1.0..40.0f64)
        .prop_map(|(x, y, w, d, h)| (Vec3::new(x, y, 0.0), Vec3::new(x + w, y + d, h)))
}

pub fn arb_point(z: std::ops::Range<f64>) -> impl Strategy<Value = Vec3> {
    (-100.0..100.0, -100.0..100.0, z).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

/// A scene of random static boxes with a Tx and Rx outside all of them.
pub fn arb_link_scene() -> impl Strategy<Value = (Scene, Vec3)> {
    (
        proptest::collection::vec(arb_box(), 0..6),
        arb_point(5.0..30.0),
        arb_point(1.0..3.0),
    )
        .prop_filter_map("endpoint inside a box", |(boxes, tx, rx)| {
            let scatterers: Vec<Scatterer> = boxes
                .into_iter()
                .enumerate()
                .map(|(i, (lo, hi))| building(i as u32, lo, hi))
                .collect();
            let scene = scene_with(tx, scatterers);
            let clear = |p: Vec3| scene.containing_scatterer(p).is_none();
            (clear(tx) && clear(rx) && (tx - rx).norm() > 1.0).then_some((scene, rx))
        })
}
