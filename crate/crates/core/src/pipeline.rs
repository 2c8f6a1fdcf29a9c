//! Experiment driver: the sense / map / predict / decide / apply loop and the
//! four evaluation tasks, with CSV output.
//!
//! Every output file begins with a `# config=<json>` line echoing the
//! [`RunConfig`] that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{
    compute_rates, evaluate, flat_rates, rb_bandwidth_hz, solve_exact, solve_heuristic,
    solve_max_total, AllocationMatrix, FairnessReport, NoiseConfig, RateTensor, RB_SUBCARRIERS,
};
use crate::beam::{
    argmax_lowest, beam_powers, build_codebook, predict_beam, rank_of, topk_accuracy, BeamCodebook,
};
use crate::channel::{cir_to_cfr, total_tx_power_dbm, trace_paths, Cfr, Cir, OfdmConfig};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::predict::{
    cdf_points, fit, interpolate_pilots_linear, mean, median, nmse, observe_pilots, pilot_indices,
    predict_path_loss, reconstruct_cfr_from_pilots, split_train_test, FitParams, Model,
    PathLossSample, PredictorTier,
};
use crate::scene::{advance_time, generate_scene, validate_scene, Scene, SceneGenConfig};
use crate::seed::{child_seed, stage_rng};
use crate::wei::{extract_link_features, preprocess, WeiFeatureVector};

const STAGE_SCENE: u64 = 0;
const STAGE_SPLIT: u64 = 1;
const STAGE_PILOTS: u64 = 2;
const STAGE_SCENE_B: u64 = 3;
const STAGE_USERS: u64 = 4;
const STAGE_BRANCH: u64 = 5;
const STAGE_MOTION: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Coverage,
    PredictCsi,
    Beam,
    Allocate,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Coverage, Task::PredictCsi, Task::Beam, Task::Allocate];

    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Coverage => "coverage",
            Task::PredictCsi => "predict-csi",
            Task::Beam => "beam",
            Task::Allocate => "allocate",
        }
    }

    /// Accepts a task id (`1`..`4`) or name.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        Task::ALL
            .into_iter()
            .find(|t| s == t.name() || s == t.id().to_string())
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }

    /// Comma-separated list; `all` selects every task.
    pub fn parse_list(s: &str) -> Result<Vec<Task>> {
        if s.trim() == "all" {
            return Ok(Task::ALL.to_vec());
        }
        let mut tasks = s.split(',').map(Task::parse).collect::<Result<Vec<_>>>()?;
        tasks.sort();
        tasks.dedup();
        Ok(tasks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tasks: Vec<Task>,
    /// Tier whose predictions drive the predicted-CSI allocation.
    pub tier: PredictorTier,
    /// Load the main scene from here instead of generating it.
    pub scene_path: Option<PathBuf>,
    pub scene: SceneGenConfig,
    pub ofdm: OfdmConfig,
    pub noise: NoiseConfig,
    pub out_dir: PathBuf,
    pub exact_alloc_limit: f64,
    pub n_users: usize,
    pub n_beams: usize,
    pub train_fraction: f64,
    pub k_neighbors: usize,
    pub pilot_spacing: usize,
    /// `None` gives noiseless pilots.
    pub pilot_snr_db: Option<f64>,
    /// Steps 4 and 5: cache a strategy per candidate next position.
    pub proactive: bool,
    pub branch_offset_m: f64,
    /// Time between the decision and the realized frame.
    pub frame_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tasks: Task::ALL.to_vec(),
            tier: PredictorTier::WeiRegressor,
            scene_path: None,
            scene: SceneGenConfig::default(),
            ofdm: OfdmConfig::default(),
            noise: NoiseConfig::default(),
            out_dir: PathBuf::from("out"),
            exact_alloc_limit: crate::alloc::DEFAULT_EXACT_LIMIT,
            n_users: 10,
            n_beams: 32,
            train_fraction: 0.8,
            k_neighbors: 5,
            pilot_spacing: 8,
            pilot_snr_db: Some(20.0),
            proactive: true,
            branch_offset_m: 10.0,
            frame_s: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::invalid("task list is empty"));
        }
        if self.n_users == 0 {
            return Err(Error::invalid("need at least one user"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        if self.pilot_spacing == 0 {
            return Err(Error::invalid("pilot spacing must be positive"));
        }
        if !(self.frame_s >= 0.0) {
            return Err(Error::invalid("frame duration must be non-negative"));
        }
        self.ofdm.validate()
    }

    /// `# config=<json>` header line.
    pub fn echo(&self) -> String {
        format!(
            "# config={}",
            serde_json::to_string(self).expect("config is always serializable")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: Task,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub records: Vec<TaskRecord>,
    pub timings: Vec<StageTiming>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn record(&self, task: Task) -> Option<&TaskRecord> {
        self.records.iter().find(|r| r.task == task)
    }

    pub fn metric(&self, task: Task, key: &str) -> Option<f64> {
        self.record(task).and_then(|r| r.metrics.get(key).copied())
    }
}

/// The main scene of a run: loaded from `scene_path` or generated from the stage seed.
pub fn main_scene(config: &RunConfig) -> Result<Scene> {
    match &config.scene_path {
        Some(p) => Scene::load(p),
        None => generate_scene(&config.scene, child_seed(config.seed, STAGE_SCENE)),
    }
}

/// The unseen scene used for allocation.
pub fn generalization_scene(config: &RunConfig) -> Result<Scene> {
    generate_scene(&config.scene, child_seed(config.seed, STAGE_SCENE_B))
}

/// A traced and mapped link.
#[derive(Debug, Clone)]
pub struct Link {
    pub rx: Vec3,
    pub cir: Cir,
    pub feature: WeiFeatureVector,
    pub path_loss_db: f64,
}

/// `-10 log10` of the mean power gain over subcarriers on the first symbol
/// and element; infinite when nothing arrives.
pub fn wideband_path_loss(cfr: &Cfr) -> f64 {
    let h = cfr.subcarrier_slice(0, 0);
    let g = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64;
    if g > 0.0 {
        -10.0 * g.log10()
    } else {
        f64::INFINITY
    }
}

/// Steps 1 and 2: traces every link of `points` in `scene` and extracts its
/// features from the reconstructed (preprocessed) scene.
pub fn sense(scene: &Scene, points: &[Vec3], ofdm: &OfdmConfig) -> Result<Vec<Link>> {
    let known = preprocess(scene);
    points
        .iter()
        .map(|&rx| {
            let cir = trace_paths(scene, rx, ofdm.fc_hz)?;
            let feature = extract_link_features(&known, rx, &cir)?;
            let path_loss_db = wideband_path_loss(&cir_to_cfr(&cir, ofdm, &scene.tx));
            Ok(Link {
                rx,
                cir,
                feature,
                path_loss_db,
            })
        })
        .collect()
}

struct Context {
    scene: Scene,
    links: Vec<Link>,
    train: Vec<usize>,
    test: Vec<usize>,
    models: Vec<Model>,
    codebook: BeamCodebook,
}

impl Context {
    fn model(&self, tier: PredictorTier) -> &Model {
        self.models
            .iter()
            .find(|m| m.tier() == tier)
            .expect("every tier is fitted")
    }
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn build_context(config: &RunConfig, timer: &mut Timer) -> Result<Context> {
    let scene = timer.run("sensing", || {
        let scene = main_scene(config)?;
        if let Some(v) = validate_scene(&scene).first() {
            return Err(Error::invalid(format!("scene is invalid: {v:?}")));
        }
        Ok(scene)
    })?;
    let links = timer.run("mapping", || sense(&scene, &scene.rx_points, &config.ofdm))?;
    let (train, test, models) = timer.run("prediction", || {
        let (train, test) = split_train_test(
            links.len(),
            config.train_fraction,
            child_seed(config.seed, STAGE_SPLIT),
        )?;
        // path loss is only a regression target where some energy arrives
        let samples: Vec<PathLossSample> = train
            .iter()
            .filter(|&&i| links[i].path_loss_db.is_finite())
            .map(|&i| PathLossSample {
                rx_index: i,
                feature: links[i].feature,
                path_loss_db: links[i].path_loss_db,
            })
            .collect();
        let params = FitParams {
            k: config.k_neighbors,
            fc_ghz: config.ofdm.fc_hz / 1e9,
            h_ut_m: config.scene.rx_height,
        };
        let models = PredictorTier::ALL
            .iter()
            .map(|&t| fit(t, &samples, &params))
            .collect::<Result<Vec<_>>>()?;
        Ok((train, test, models))
    })?;
    let codebook = build_codebook(config.n_beams, scene.tx.n_elements)?;
    Ok(Context {
        scene,
        links,
        train,
        test,
        models,
        codebook,
    })
}

struct Writer<'a> {
    config: &'a RunConfig,
    outputs: Vec<String>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::new();
        writeln!(text, "{}", self.config.echo()).expect("writing to a string");
        writeln!(text, "{header}").expect("writing to a string");
        for row in rows {
            writeln!(text, "{row}").expect("writing to a string");
        }
        std::fs::write(self.config.out_dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

/// Runs the full loop for the configured tasks and writes every output.
pub fn run_loop(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::from(e).in_stage("output"))?;
    let mut timer = Timer {
        timings: Vec::new(),
    };
    let ctx = build_context(config, &mut timer)?;
    let mut writer = Writer {
        config,
        outputs: Vec::new(),
    };
    let mut records = Vec::new();
    for &task in &config.tasks {
        records.push(run_task_in(config, &ctx, task, &mut timer, &mut writer)?);
    }
    let report = RunReport {
        config: config.clone(),
        records,
        timings: timer.timings,
        outputs: writer.outputs,
    };
    let text = format!(
        "{}\n{}\n",
        config.echo(),
        serde_json::to_string_pretty(&report)?
    );
    std::fs::write(config.out_dir.join("run_report.json"), text)
        .map_err(|e| Error::from(e).in_stage("output"))?;
    Ok(report)
}

/// Runs a single task, writing only that task's outputs.
pub fn run_task(config: &RunConfig, task: Task) -> Result<TaskRecord> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::from(e).in_stage("output"))?;
    let mut timer = Timer {
        timings: Vec::new(),
    };
    let ctx = build_context(config, &mut timer)?;
    let mut writer = Writer {
        config,
        outputs: Vec::new(),
    };
    run_task_in(config, &ctx, task, &mut timer, &mut writer)
}

fn run_task_in(
    config: &RunConfig,
    ctx: &Context,
    task: Task,
    timer: &mut Timer,
    writer: &mut Writer,
) -> Result<TaskRecord> {
    let metrics = match task {
        Task::Coverage => timer.run("coverage", || coverage_task(ctx, writer))?,
        Task::PredictCsi => timer.run("csi", || csi_task(config, ctx, writer))?,
        Task::Beam => timer.run("beam", || beam_task(config, ctx, writer))?,
        Task::Allocate => allocation_task(config, ctx, timer, writer)?,
    };
    Ok(TaskRecord { task, metrics })
}

fn coverage_task(ctx: &Context, writer: &mut Writer) -> Result<BTreeMap<String, f64>> {
    let rows: Vec<String> = ctx
        .links
        .iter()
        .map(|l| {
            let p: Vec<f64> = PredictorTier::ALL
                .iter()
                .map(|&t| predict_path_loss(ctx.model(t), &l.feature))
                .collect();
            format!(
                "{},{},{},{},{},{},{}",
                l.rx.x,
                l.rx.y,
                l.path_loss_db,
                p[0],
                p[1],
                p[2],
                u8::from(!l.feature.los_blocked)
            )
        })
        .collect();
    writer.csv(
        "coverage.csv",
        "x,y,pl_true_db,pl_stat_db,pl_simple_db,pl_wei_db,los_flag",
        &rows,
    )?;
    let n = ctx.links.len() as f64;
    let los = ctx.links.iter().filter(|l| !l.feature.los_blocked).count() as f64;
    let silent = ctx.links.iter().filter(|l| l.cir.paths.is_empty()).count() as f64;
    Ok(BTreeMap::from([
        ("points".to_string(), n),
        ("los_fraction".to_string(), los / n),
        ("no_path_fraction".to_string(), silent / n),
    ]))
}

/// Per-link normalized squared error of a path-loss prediction.
fn path_loss_nmse(truth: f64, predicted: f64) -> f64 {
    let e = (predicted - truth) / truth;
    e * e
}

/// Per-link NMSE of a path-loss model on the held-out links that carry energy.
pub fn path_loss_errors(links: &[Link], test: &[usize], model: &Model) -> Vec<f64> {
    test.iter()
        .filter(|&&i| links[i].path_loss_db.is_finite())
        .map(|&i| {
            path_loss_nmse(
                links[i].path_loss_db,
                predict_path_loss(model, &links[i].feature),
            )
        })
        .collect()
}

/// Per-link NMSE of pilot reconstruction on held-out multipath links:
/// `(delay-basis fit, linear interpolation)`.
pub fn pilot_errors(
    links: &[Link],
    test: &[usize],
    ofdm: &OfdmConfig,
    scene: &Scene,
    spacing: usize,
    snr_db: Option<f64>,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx = pilot_indices(ofdm.n_subcarriers(), spacing);
    let mut fitted = Vec::new();
    let mut linear = Vec::new();
    for &i in test {
        let cir = &links[i].cir;
        if cir.paths.len() < 2 {
            continue;
        }
        let truth = cir_to_cfr(cir, ofdm, &scene.tx).subcarrier_slice(0, 0);
        let obs = match snr_db {
            Some(snr) => observe_pilots(&truth, &idx, snr, rng),
            None => idx.iter().map(|&k| truth[k]).collect(),
        };
        let delays: Vec<f64> = cir.paths.iter().map(|p| p.delay_s).collect();
        let rebuilt = reconstruct_cfr_from_pilots(&obs, &idx, &delays, ofdm)?;
        let interp = interpolate_pilots_linear(&obs, &idx, truth.len())?;
        fitted.push(nmse(&truth, &rebuilt)?);
        linear.push(nmse(&truth, &interp)?);
    }
    Ok((fitted, linear))
}

fn csi_task(
    config: &RunConfig,
    ctx: &Context,
    writer: &mut Writer,
) -> Result<BTreeMap<String, f64>> {
    let mut metrics = BTreeMap::new();
    let mut rows = Vec::new();
    let mut cdf_rows = Vec::new();
    let mut push_series =
        |task: &str, series: &str, values: &[f64], metrics: &mut BTreeMap<String, f64>| {
            if values.is_empty() {
                return Ok::<(), Error>(());
            }
            let (m, med) = (mean(values), median(values));
            rows.push(format!("{task},{series},{},{m},{med}", config.seed));
            metrics.insert(format!("{task}_{series}_nmse_mean"), m);
            metrics.insert(format!("{task}_{series}_nmse_median"), med);
            for (v, f) in cdf_points(values)? {
                cdf_rows.push(format!("{task}_{series},{v},{f}"));
            }
            Ok(())
        };
    for &tier in &PredictorTier::ALL {
        let errs = path_loss_errors(&ctx.links, &ctx.test, ctx.model(tier));
        push_series("path_loss", tier.name(), &errs, &mut metrics)?;
    }
    let mut rng = stage_rng(config.seed, STAGE_PILOTS);
    let (fitted, linear) = pilot_errors(
        &ctx.links,
        &ctx.test,
        &config.ofdm,
        &ctx.scene,
        config.pilot_spacing,
        config.pilot_snr_db,
        &mut rng,
    )?;
    push_series("csi_pilot", "linear", &linear, &mut metrics)?;
    push_series("csi_pilot", "wei", &fitted, &mut metrics)?;
    metrics.insert("csi_pilot_links".to_string(), fitted.len() as f64);
    if !fitted.is_empty() {
        metrics.insert(
            "csi_pilot_reduction_pct".to_string(),
            100.0 * (1.0 - mean(&fitted) / mean(&linear)),
        );
    }
    let pl = |t: PredictorTier| {
        metrics
            .get(&format!("path_loss_{}_nmse_mean", t.name()))
            .copied()
    };
    if let (Some(stat), Some(wei)) = (
        pl(PredictorTier::StatModel),
        pl(PredictorTier::WeiRegressor),
    ) {
        metrics.insert(
            "path_loss_reduction_vs_stat_pct".to_string(),
            100.0 * (1.0 - wei / stat),
        );
    }
    writer.csv("metrics.csv", "task,tier,seed,nmse_mean,nmse_median", &rows)?;
    writer.csv("cdf.csv", "series,value,cumulative_fraction", &cdf_rows)?;

    let mut header = "rx_index,x,y,split,".to_string();
    header.push_str(&WeiFeatureVector::csv_header());
    let mut split = vec!["train"; ctx.links.len()];
    for &i in &ctx.test {
        split[i] = "test";
    }
    debug_assert_eq!(ctx.train.len() + ctx.test.len(), ctx.links.len());
    let feature_rows: Vec<String> = ctx
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| {
            format!(
                "{i},{},{},{},{}",
                l.rx.x,
                l.rx.y,
                split[i],
                l.feature.csv_row()
            )
        })
        .collect();
    writer.csv("features.csv", &header, &feature_rows)?;
    Ok(metrics)
}

/// Top-k accuracies over links that carry at least one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEvaluation {
    pub sample_ids: Vec<usize>,
    pub truth: Vec<usize>,
    pub pred_wei: Vec<usize>,
    pub pred_base: Vec<usize>,
    pub powers: Vec<Vec<f64>>,
    pub nlos_fraction: f64,
}

pub fn evaluate_beams(
    links: &[Link],
    ids: &[usize],
    scene: &Scene,
    ofdm: &OfdmConfig,
    codebook: &BeamCodebook,
) -> Result<BeamEvaluation> {
    let mut ev = BeamEvaluation {
        sample_ids: Vec::new(),
        truth: Vec::new(),
        pred_wei: Vec::new(),
        pred_base: Vec::new(),
        powers: Vec::new(),
        nlos_fraction: 0.0,
    };
    let mut nlos = 0;
    for &i in ids {
        let link = &links[i];
        if link.cir.paths.is_empty() {
            continue;
        }
        let cfr = cir_to_cfr(&link.cir, ofdm, &scene.tx);
        let powers = beam_powers(&cfr, codebook, scene.tx.per_element_power_dbm)?;
        ev.sample_ids.push(i);
        ev.truth.push(argmax_lowest(&powers).0);
        ev.pred_wei
            .push(predict_beam(&link.feature, codebook, true));
        ev.pred_base
            .push(predict_beam(&link.feature, codebook, false));
        ev.powers.push(powers);
        nlos += usize::from(link.feature.los_blocked);
    }
    if !ev.sample_ids.is_empty() {
        ev.nlos_fraction = nlos as f64 / ev.sample_ids.len() as f64;
    }
    Ok(ev)
}

fn beam_task(
    config: &RunConfig,
    ctx: &Context,
    writer: &mut Writer,
) -> Result<BTreeMap<String, f64>> {
    let ev = evaluate_beams(
        &ctx.links,
        &ctx.test,
        &ctx.scene,
        &config.ofdm,
        &ctx.codebook,
    )?;
    let rows: Vec<String> = (0..ev.sample_ids.len())
        .map(|s| {
            format!(
                "{},{},{},{},{}",
                ev.sample_ids[s],
                ev.truth[s],
                ev.pred_wei[s],
                ev.pred_base[s],
                rank_of(ev.pred_wei[s], &ev.powers[s])
            )
        })
        .collect();
    writer.csv(
        "beam.csv",
        "sample_id,true_best,pred_wei,pred_base,rank_of_pred_in_truth",
        &rows,
    )?;
    let mut metrics = BTreeMap::from([
        ("samples".to_string(), ev.sample_ids.len() as f64),
        ("nlos_fraction".to_string(), ev.nlos_fraction),
    ]);
    let mut acc_rows = Vec::new();
    if !ev.sample_ids.is_empty() {
        for k in [1, 3, 5] {
            let w = topk_accuracy(&ev.pred_wei, &ev.powers, k)?;
            let b = topk_accuracy(&ev.pred_base, &ev.powers, k)?;
            metrics.insert(format!("top{k}_wei"), w);
            metrics.insert(format!("top{k}_base"), b);
            acc_rows.push(format!("{k},{w},{b}"));
        }
    }
    writer.csv("beam_accuracy.csv", "k,acc_wei,acc_base", &acc_rows)?;
    Ok(metrics)
}

/// Beams and RB owners for a set of users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub beams: Vec<usize>,
    pub allocation: AllocationMatrix,
}

/// Fair allocation for the given per-user beams and rates.
pub fn decide_strategy(rates: &RateTensor, beams: &[usize]) -> Strategy {
    Strategy {
        beams: beams.to_vec(),
        allocation: solve_heuristic(rates).0,
    }
}

struct UserChannels {
    cfrs: Vec<Cfr>,
    best_beams: Vec<usize>,
    features: Vec<WeiFeatureVector>,
}

fn user_channels(
    scene: &Scene,
    known: &Scene,
    points: &[Vec3],
    ofdm: &OfdmConfig,
    cb: &BeamCodebook,
) -> Result<UserChannels> {
    let mut out = UserChannels {
        cfrs: Vec::new(),
        best_beams: Vec::new(),
        features: Vec::new(),
    };
    for &rx in points {
        let cir = trace_paths(scene, rx, ofdm.fc_hz)?;
        out.features.push(extract_link_features(known, rx, &cir)?);
        let cfr = cir_to_cfr(&cir, ofdm, &scene.tx);
        let powers = beam_powers(&cfr, cb, scene.tx.per_element_power_dbm)?;
        out.best_beams.push(argmax_lowest(&powers).0);
        out.cfrs.push(cfr);
    }
    Ok(out)
}

fn report_metrics(metrics: &mut BTreeMap<String, f64>, prefix: &str, r: &FairnessReport) {
    metrics.insert(format!("{prefix}_t_min"), r.t_min);
    metrics.insert(format!("{prefix}_gap"), r.gap);
    metrics.insert(format!("{prefix}_variance"), r.variance);
    metrics.insert(format!("{prefix}_total"), r.total);
}

fn compare_row(name: &str, r: &FairnessReport) -> String {
    format!("{name},{},{},{},{}", r.t_min, r.gap, r.variance, r.total)
}

/// Candidate next positions: `(name, dx, dy)`.
pub fn branches(offset: f64) -> [(&'static str, f64, f64); 3] {
    [
        ("straight", offset, 0.0),
        ("left", 0.0, offset),
        ("right", 0.0, -offset),
    ]
}

/// Moves a user, keeping it in place if the target is outside the scene or inside a box.
fn moved(scene: &Scene, p: Vec3, dx: f64, dy: f64) -> Vec3 {
    let q = Vec3::new(p.x + dx, p.y + dy, p.z);
    if scene.bounds_box().contains(q)
        && scene.containing_scatterer(q).is_none()
        && q != scene.tx.position
    {
        q
    } else {
        p
    }
}

fn allocation_task(
    config: &RunConfig,
    ctx: &Context,
    timer: &mut Timer,
    writer: &mut Writer,
) -> Result<BTreeMap<String, f64>> {
    let mut metrics = BTreeMap::new();
    let (scene, users) = timer.run("allocation", || {
        let scene = generalization_scene(config)?;
        let served: Vec<Vec3> = scene
            .rx_points
            .iter()
            .copied()
            .filter(|&rx| {
                trace_paths(&scene, rx, config.ofdm.fc_hz).is_ok_and(|c| !c.paths.is_empty())
            })
            .collect();
        if served.len() < config.n_users {
            return Err(Error::invalid(format!(
                "only {} served points for {} users",
                served.len(),
                config.n_users
            )));
        }
        let mut rng = stage_rng(config.seed, STAGE_USERS);
        let mut picked = sample(&mut rng, served.len(), config.n_users).into_vec();
        picked.sort_unstable();
        let users: Vec<Vec3> = picked.iter().map(|&i| served[i]).collect();
        Ok((scene, users))
    })?;
    let known = preprocess(&scene);
    let p_tx = total_tx_power_dbm(scene.tx.per_element_power_dbm, scene.tx.n_elements);
    let b_rb = rb_bandwidth_hz(&config.ofdm);
    let noise_dbm = config.noise.rb_noise_dbm(b_rb);
    let array_gain_db = 10.0 * (scene.tx.n_elements as f64).log10();
    let n_t = config.ofdm.n_symbols;
    let n_r = config.ofdm.n_subcarriers() / RB_SUBCARRIERS;
    let rates = |cfrs: &[Cfr], beams: &[usize]| {
        compute_rates(
            cfrs,
            beams,
            &ctx.codebook,
            &config.ofdm,
            &config.noise,
            scene.tx.per_element_power_dbm,
        )
    };
    // decisions from predicted CSI: predicted path loss with full array gain, predicted beam
    let predicted = |features: &[WeiFeatureVector]| -> Result<(RateTensor, Vec<usize>)> {
        let model = ctx.model(config.tier);
        let use_wei = config.tier == PredictorTier::WeiRegressor;
        let snr: Vec<f64> = features
            .iter()
            .map(|f| p_tx + array_gain_db - predict_path_loss(model, f) - noise_dbm)
            .collect();
        let beams = features
            .iter()
            .map(|f| predict_beam(f, &ctx.codebook, use_wei))
            .collect();
        Ok((flat_rates(&snr, n_t, n_r, b_rb)?, beams))
    };

    let current = timer.run("allocation", || {
        let ch = user_channels(&scene, &known, &users, &config.ofdm, &ctx.codebook)?;
        let d_true = rates(&ch.cfrs, &ch.best_beams)?;
        let (x_fair, _) = solve_heuristic(&d_true);
        let (x_max, _) = solve_max_total(&d_true);
        let fair = evaluate(&x_fair, &d_true)?;
        let max_total = evaluate(&x_max, &d_true)?;
        report_metrics(&mut metrics, "maxmin", &fair);
        report_metrics(&mut metrics, "maxtotal", &max_total);
        let mut compare = vec![
            compare_row("maxmin_true", &fair),
            compare_row("maxtotal_true", &max_total),
        ];
        match solve_exact(&d_true, config.exact_alloc_limit) {
            Ok((x_exact, _)) => {
                let exact = evaluate(&x_exact, &d_true)?;
                report_metrics(&mut metrics, "exact", &exact);
                compare.push(compare_row("exact_true", &exact));
            }
            Err(Error::InstanceTooLarge { assignments, .. }) => {
                log::info!("exact allocation skipped: {assignments:e} assignments");
                metrics.insert("exact_skipped".to_string(), 1.0);
            }
            Err(e) => return Err(e),
        }
        let (d_pred, pred_beams) = predicted(&ch.features)?;
        let x_pred = solve_heuristic(&d_pred).0;
        let pred = evaluate(&x_pred, &rates(&ch.cfrs, &pred_beams)?)?;
        report_metrics(
            &mut metrics,
            &format!("predicted_{}", config.tier.name()),
            &pred,
        );
        compare.push(compare_row(
            &format!("maxmin_predicted_{}", config.tier.name()),
            &pred,
        ));

        let alloc_rows: Vec<String> = (0..n_t)
            .flat_map(|t| (0..n_r).map(move |r| (t, r)))
            .map(|(t, r)| format!("{},{},{}", t + 1, r + 1, x_fair.owner_of(t, r) + 1))
            .collect();
        writer.csv("allocation.csv", "t,r,owner", &alloc_rows)?;
        let mut report_rows: Vec<String> = fair
            .per_user_throughput
            .iter()
            .enumerate()
            .map(|(u, v)| format!("{},{v}", u + 1))
            .collect();
        report_rows.push(format!("t_min,{}", fair.t_min));
        report_rows.push(format!("gap,{}", fair.gap));
        report_rows.push(format!("variance,{}", fair.variance));
        report_rows.push(format!("total,{}", fair.total));
        writer.csv("allocation_report.csv", "user,throughput", &report_rows)?;
        writer.csv(
            "allocation_compare.csv",
            "strategy,t_min,gap,variance,total",
            &compare,
        )?;
        Ok(Strategy {
            beams: ch.best_beams,
            allocation: x_fair,
        })
    })?;

    if config.proactive {
        timer.run("proactive", || {
            // Step 4: a cached strategy per branch, decided on the reconstructed scene
            let mut cached = Vec::new();
            for (_, dx, dy) in branches(config.branch_offset_m) {
                let pts: Vec<Vec3> = users.iter().map(|&p| moved(&scene, p, dx, dy)).collect();
                let ch = user_channels(&known, &known, &pts, &config.ofdm, &ctx.codebook)?;
                let d = rates(&ch.cfrs, &ch.best_beams)?;
                cached.push((pts, decide_strategy(&d, &ch.best_beams)));
            }
            // Step 5: the world moves on and one branch is realized
            let realized = stage_rng(config.seed, STAGE_BRANCH).random_range(0..cached.len());
            let world = advance_time(
                &scene,
                config.frame_s,
                &mut stage_rng(config.seed, STAGE_MOTION),
            )?;
            let mut rows = Vec::new();
            for (b, ((name, dx, dy), (pts, strategy))) in branches(config.branch_offset_m)
                .iter()
                .zip(&cached)
                .enumerate()
            {
                let ch = match user_channels(&world, &known, pts, &config.ofdm, &ctx.codebook) {
                    Ok(ch) => ch,
                    Err(Error::RxInsideScatterer { .. }) => {
                        log::debug!("branch {name}: a vehicle moved onto a user");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let applied = evaluate(&strategy.allocation, &rates(&ch.cfrs, &strategy.beams)?)?;
                let stale = evaluate(&current.allocation, &rates(&ch.cfrs, &current.beams)?)?;
                rows.push(format!(
                    "{name},{dx},{dy},{},{},{},{},{},{}",
                    u8::from(b == realized),
                    applied.t_min,
                    applied.gap,
                    applied.variance,
                    applied.total,
                    stale.t_min
                ));
                if b == realized {
                    metrics.insert("proactive_realized_branch".to_string(), b as f64);
                    report_metrics(&mut metrics, "proactive", &applied);
                    metrics.insert("reactive_t_min".to_string(), stale.t_min);
                }
            }
            writer.csv(
                "proactive.csv",
                "branch,dx,dy,realized,t_min,gap,variance,total,stale_t_min",
                &rows,
            )
        })?;
    }
    Ok(metrics)
}

/// Writes a scene as JSON preceded by the config echo line.
pub fn write_scene(config: &RunConfig, scene: &Scene, path: &Path) -> Result<()> {
    let text = format!("{}\n{}\n", config.echo(), scene.to_json()?);
    std::fs::write(path, text)?;
    Ok(())
}
