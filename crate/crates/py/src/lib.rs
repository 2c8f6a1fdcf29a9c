//! Python bindings for the simulator core.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eicsim_core::alloc::{self, AllocationMatrix, FairnessReport, RateTensor};
use eicsim_core::beam::{argmax_lowest, beam_powers, build_codebook};
use eicsim_core::channel::{self, cir_to_cfr, trace_paths, OfdmConfig, PathKind};
use eicsim_core::pipeline::{self, RunConfig, Task};
use eicsim_core::predict::{self, PredictorTier};
use eicsim_core::scene::{self, SceneGenConfig};
use eicsim_core::wei::{self, ComplexAccount, WeiCategory, WeiItem, WeiKind};
use eicsim_core::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: eicsim_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point((x, y, z): (f64, f64, f64)) -> Vec3 {
    Vec3::new(x, y, z)
}

fn tuple(p: Vec3) -> (f64, f64, f64) {
    (p.x, p.y, p.z)
}

/// A box-scatterer scene.
#[pyclass(name = "Scene", module = "eicsim", skip_from_py_object)]
struct PyScene {
    inner: scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Generates a street scene; `rx_gap` is the receiver grid spacing in meters.
    #[staticmethod]
    #[pyo3(signature = (seed, rx_gap = 2.0))]
    fn generate(seed: u64, rx_gap: f64) -> PyResult<Self> {
        let config = SceneGenConfig {
            rx_gap,
            ..SceneGenConfig::default()
        };
        Ok(Self {
            inner: scene::generate_scene(&config, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scene::Scene::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    /// Violated invariants, empty for a well-formed scene.
    fn validate(&self) -> Vec<String> {
        scene::validate_scene(&self.inner)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect()
    }

    /// The scene `dt` seconds later; `seed` drives the presence toggles.
    fn advance(&self, dt: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: scene::advance_time(&self.inner, dt, &mut rng).map_err(err)?,
        })
    }

    /// Copy without sub-resolution clutter.
    fn preprocess(&self) -> Self {
        Self {
            inner: wei::preprocess(&self.inner),
        }
    }

    #[getter]
    fn n_scatterers(&self) -> usize {
        self.inner.scatterers.len()
    }

    #[getter]
    fn tx_position(&self) -> (f64, f64, f64) {
        tuple(self.inner.tx.position)
    }

    #[getter]
    fn rx_points(&self) -> Vec<(f64, f64, f64)> {
        self.inner.rx_points.iter().copied().map(tuple).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(seed={}, scatterers={}, rx_points={})",
            self.inner.seed,
            self.inner.scatterers.len(),
            self.inner.rx_points.len()
        )
    }
}

fn kind_name(kind: PathKind) -> String {
    match kind {
        PathKind::Direct => "direct".into(),
        PathKind::GroundReflection => "ground".into(),
        PathKind::WallReflection {
            scatterer_id,
            face_id,
        } => format!("wall:{scatterer_id}:{face_id}"),
    }
}

/// Traced paths of the link from the scene's Tx to `rx`, one dict per path.
#[pyfunction]
#[pyo3(signature = (scene, rx, fc_hz = 6.775e9))]
fn trace<'py>(
    py: Python<'py>,
    scene: &PyScene,
    rx: (f64, f64, f64),
    fc_hz: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cir = trace_paths(&scene.inner, point(rx), fc_hz).map_err(err)?;
    cir.paths
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("kind", kind_name(p.kind))?;
            d.set_item("delay_s", p.delay_s)?;
            d.set_item("gain", p.gain)?;
            d.set_item("aod_azimuth", p.aod_azimuth)?;
            d.set_item("doppler_hz", p.doppler_hz)?;
            d.set_item("length_m", p.length_m)?;
            d.set_item("bounce_point", p.bounce_point.map(tuple))?;
            Ok(d)
        })
        .collect()
}

/// Link features of `rx`, keyed by column name.
#[pyfunction]
#[pyo3(signature = (scene, rx, fc_hz = 6.775e9))]
fn link_features<'py>(
    py: Python<'py>,
    scene: &PyScene,
    rx: (f64, f64, f64),
    fc_hz: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rx = point(rx);
    let cir = trace_paths(&scene.inner, rx, fc_hz).map_err(err)?;
    let f = wei::extract_link_features(&scene.inner, rx, &cir).map_err(err)?;
    let d = PyDict::new(py);
    for (name, value) in wei::FEATURE_COLUMNS.iter().zip(f.to_array()) {
        d.set_item(*name, value)?;
    }
    Ok(d)
}

/// Wideband path loss in dB of the link, infinite when nothing arrives.
#[pyfunction]
fn link_path_loss(scene: &PyScene, rx: (f64, f64, f64)) -> PyResult<f64> {
    let ofdm = OfdmConfig::default();
    let cir = trace_paths(&scene.inner, point(rx), ofdm.fc_hz).map_err(err)?;
    Ok(pipeline::wideband_path_loss(&cir_to_cfr(
        &cir,
        &ofdm,
        &scene.inner.tx,
    )))
}

/// Complex amplitude of a free-space path, or of a reflection with amplitude `rho`.
#[pyfunction]
#[pyo3(signature = (length_m, fc_hz = 6.775e9, rho = None))]
fn path_gain(length_m: f64, fc_hz: f64, rho: Option<f64>) -> PyResult<Complex64> {
    let material = rho.map(|r| scene::Material {
        reflection_amplitude: r,
        ..scene::Material::concrete()
    });
    channel::path_gain(length_m, fc_hz, material.as_ref()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (d2d, d3d, los, fc_ghz = 6.775, h_ut_m = 2.0))]
fn stat_path_loss(d2d: f64, d3d: f64, los: bool, fc_ghz: f64, h_ut_m: f64) -> PyResult<f64> {
    channel::stat_path_loss(d2d, d3d, fc_ghz, h_ut_m, los).map_err(err)
}

/// Index and received power (dBm) of the strongest beam of a `n_beams` codebook.
#[pyfunction]
#[pyo3(signature = (scene, rx, n_beams = 32))]
fn best_beam(scene: &PyScene, rx: (f64, f64, f64), n_beams: usize) -> PyResult<(usize, f64)> {
    let ofdm = OfdmConfig::default();
    let tx = &scene.inner.tx;
    let codebook = build_codebook(n_beams, tx.n_elements).map_err(err)?;
    let cir = trace_paths(&scene.inner, point(rx), ofdm.fc_hz).map_err(err)?;
    let powers = beam_powers(
        &cir_to_cfr(&cir, &ofdm, tx),
        &codebook,
        tx.per_element_power_dbm,
    )
    .map_err(err)?;
    Ok(argmax_lowest(&powers))
}

/// `sin(azimuth)` grid of the codebook.
#[pyfunction]
#[pyo3(signature = (n_beams = 32, n_elements = 128))]
fn codebook_grid(n_beams: usize, n_elements: usize) -> PyResult<Vec<f64>> {
    Ok(build_codebook(n_beams, n_elements)
        .map_err(err)?
        .beam_sin_grid)
}

#[pyfunction]
fn nmse(truth: Vec<Complex64>, predicted: Vec<Complex64>) -> PyResult<f64> {
    predict::nmse(&truth, &predicted).map_err(err)
}

/// Empirical CDF as `(value, fraction)` pairs.
#[pyfunction]
fn cdf(values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    predict::cdf_points(&values).map_err(err)
}

/// `dimension * theta`.
#[pyfunction]
fn wei_quantity(dimension: usize, theta: f64) -> PyResult<f64> {
    let item = WeiItem::new(
        WeiCategory::Static,
        WeiKind::Position,
        theta,
        vec![0.0; dimension],
    )
    .map_err(err)?;
    Ok(wei::compute_wei_quantity(&item))
}

/// Quantity of a building complex of `buildings * scatterers * surfaces` surfaces.
#[pyfunction]
fn complex_quantity(
    buildings: usize,
    scatterers: usize,
    surfaces: usize,
    xi_per_surface: Vec<f64>,
) -> f64 {
    wei::account_complex(&ComplexAccount {
        m: buildings,
        n: scatterers,
        k: surfaces,
        xi_per_surface,
    })
}

fn report_dict<'py>(
    py: Python<'py>,
    x: &AllocationMatrix,
    r: &FairnessReport,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("owner", x.owner.clone())?;
    d.set_item("n_t", x.n_t)?;
    d.set_item("n_r", x.n_r)?;
    d.set_item("throughput", r.per_user_throughput.clone())?;
    d.set_item("t_min", r.t_min)?;
    d.set_item("gap", r.gap)?;
    d.set_item("variance", r.variance)?;
    d.set_item("total", r.total)?;
    Ok(d)
}

fn solved<'py>(
    py: Python<'py>,
    rates: Vec<Vec<Vec<f64>>>,
    solve: impl FnOnce(&RateTensor) -> eicsim_core::Result<AllocationMatrix>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = RateTensor::from_nested(&rates).map_err(err)?;
    let x = solve(&d).map_err(err)?;
    let report = alloc::evaluate(&x, &d).map_err(err)?;
    report_dict(py, &x, &report)
}

/// Exhaustive max-min allocation of `rates[user][slot][rb]`.
#[pyfunction]
#[pyo3(signature = (rates, limit = alloc::DEFAULT_EXACT_LIMIT))]
fn solve_exact<'py>(
    py: Python<'py>,
    rates: Vec<Vec<Vec<f64>>>,
    limit: f64,
) -> PyResult<Bound<'py, PyDict>> {
    solved(py, rates, |d| alloc::solve_exact(d, limit).map(|(x, _)| x))
}

#[pyfunction]
fn solve_heuristic<'py>(
    py: Python<'py>,
    rates: Vec<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    solved(py, rates, |d| Ok(alloc::solve_heuristic(d).0))
}

#[pyfunction]
fn solve_max_total<'py>(
    py: Python<'py>,
    rates: Vec<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    solved(py, rates, |d| Ok(alloc::solve_max_total(d).0))
}

/// Fairness metrics of a flat owner list (`j = t * R + r`, 0-based users).
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    owner: Vec<usize>,
    rates: Vec<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = RateTensor::from_nested(&rates).map_err(err)?;
    let x = AllocationMatrix {
        n_t: d.n_t(),
        n_r: d.n_r(),
        owner,
    };
    let report = alloc::evaluate(&x, &d).map_err(err)?;
    report_dict(py, &x, &report)
}

/// Runs the task loop, writes its outputs under `out_dir` and returns the
/// metrics as `{task: {metric: value}}`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, tasks = "all", grid_gap = 2.0, tier = "wei", scene = None))]
fn run_all<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    seed: u64,
    tasks: &str,
    grid_gap: f64,
    tier: &str,
    scene: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = RunConfig {
        seed,
        tasks: Task::parse_list(tasks).map_err(err)?,
        tier: PredictorTier::parse(tier).map_err(err)?,
        scene_path: scene,
        out_dir,
        ..RunConfig::default()
    };
    config.scene.rx_gap = grid_gap;
    let report = pipeline::run_loop(&config).map_err(err)?;
    let out = PyDict::new(py);
    for record in &report.records {
        let metrics = PyDict::new(py);
        for (k, v) in &record.metrics {
            metrics.set_item(k, v)?;
        }
        out.set_item(record.task.name(), metrics)?;
    }
    Ok(out)
}

#[pymodule]
pub fn eicsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(link_features, m)?)?;
    m.add_function(wrap_pyfunction!(link_path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(path_gain, m)?)?;
    m.add_function(wrap_pyfunction!(stat_path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(best_beam, m)?)?;
    m.add_function(wrap_pyfunction!(codebook_grid, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(cdf, m)?)?;
    m.add_function(wrap_pyfunction!(wei_quantity, m)?)?;
    m.add_function(wrap_pyfunction!(complex_quantity, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(solve_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(solve_max_total, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    Ok(())
}
