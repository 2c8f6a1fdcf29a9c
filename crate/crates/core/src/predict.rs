//! Channel prediction tiers and error metrics.
//!
//! Three path-loss predictors of increasing environment awareness:
//! the closed-form statistical model, a log-distance fit, and a k-NN
//! regressor over standardized WEI features. Small-scale prediction
//! rebuilds a full-band response from pilot subcarriers either by
//! fitting path amplitudes at known delays or by linear interpolation.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{stat_path_loss, OfdmConfig};
use crate::error::{Error, Result};
use crate::wei::WeiFeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictorTier {
    /// Offline empirical model; ignores training data.
    StatModel,
    /// Least-squares log-distance fit.
    SimpleFeature,
    /// k-NN regression over standardized WEI features.
    WeiRegressor,
}

impl PredictorTier {
    pub const ALL: [PredictorTier; 3] = [
        PredictorTier::StatModel,
        PredictorTier::SimpleFeature,
        PredictorTier::WeiRegressor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorTier::StatModel => "stat",
            PredictorTier::SimpleFeature => "simple",
            PredictorTier::WeiRegressor => "wei",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stat" | "level2" => Ok(PredictorTier::StatModel),
            "simple" => Ok(PredictorTier::SimpleFeature),
            "wei" | "level3" | "level4" => Ok(PredictorTier::WeiRegressor),
            other => Err(Error::invalid(format!("unknown tier {other:?}"))),
        }
    }
}

/// One labelled link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub rx_index: usize,
    pub feature: WeiFeatureVector,
    pub path_loss_db: f64,
}

/// Seeded 80/20-style split of point indices into disjoint train and test sets.
pub fn split_train_test(
    n_points: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_points < 2 {
        return Err(Error::invalid("need at least two points to split"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let mut idx: Vec<usize> = (0..n_points).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n_points as f64 * train_fraction).round() as usize).clamp(1, n_points - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub k: usize,
    pub fc_ghz: f64,
    pub h_ut_m: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            k: 5,
            fc_ghz: 6.775,
            h_ut_m: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Stat {
        fc_ghz: f64,
        h_ut_m: f64,
    },
    /// `pl = intercept + slope * log10(d3d)`.
    LogDistance {
        intercept: f64,
        slope: f64,
    },
    Knn(KnnRegressor),
}

impl Model {
    pub fn tier(&self) -> PredictorTier {
        match self {
            Model::Stat { .. } => PredictorTier::StatModel,
            Model::LogDistance { .. } => PredictorTier::SimpleFeature,
            Model::Knn(_) => PredictorTier::WeiRegressor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor {
    k: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl KnnRegressor {
    pub fn fit(features: &[Vec<f64>], targets: &[f64], k: usize) -> Result<Self> {
        if features.is_empty() || features.len() != targets.len() {
            return Err(Error::invalid(
                "k-NN needs a non-empty, aligned training set",
            ));
        }
        if k == 0 || k > features.len() {
            return Err(Error::TooFewNeighbors {
                k,
                n: features.len(),
            });
        }
        let dim = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in features {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for row in features {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        let points = features
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            mean,
            scale,
            points,
            targets: targets.to_vec(),
        })
    }

    /// Inverse-distance weighted mean of the k nearest targets; exact matches win outright.
    pub fn predict(&self, query: &[f64]) -> f64 {
        let q: Vec<f64> = query
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &dist[..self.k];
        let exact: Vec<f64> = nearest
            .iter()
            .filter(|(d, _)| *d < 1e-12)
            .map(|&(_, i)| self.targets[i])
            .collect();
        if !exact.is_empty() {
            return exact.iter().sum::<f64>() / exact.len() as f64;
        }
        let (num, den) = nearest.iter().fold((0.0, 0.0), |(num, den), &(d, i)| {
            (num + self.targets[i] / d, den + 1.0 / d)
        });
        num / den
    }
}

/// Fits the requested tier on training samples.
pub fn fit(tier: PredictorTier, train: &[PathLossSample], params: &FitParams) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    match tier {
        PredictorTier::StatModel => Ok(Model::Stat {
            fc_ghz: params.fc_ghz,
            h_ut_m: params.h_ut_m,
        }),
        PredictorTier::SimpleFeature => {
            let xs: Vec<f64> = train
                .iter()
                .map(|s| s.feature.d3d.max(1.0).log10())
                .collect();
            let ys: Vec<f64> = train.iter().map(|s| s.path_loss_db).collect();
            let (intercept, slope) = least_squares_line(&xs, &ys);
            Ok(Model::LogDistance { intercept, slope })
        }
        PredictorTier::WeiRegressor => {
            let features: Vec<Vec<f64>> = train
                .iter()
                .map(|s| s.feature.to_array().to_vec())
                .collect();
            let targets: Vec<f64> = train.iter().map(|s| s.path_loss_db).collect();
            Ok(Model::Knn(KnnRegressor::fit(
                &features, &targets, params.k,
            )?))
        }
    }
}

/// Ordinary least squares `y = a + b x`; a single distinct `x` gives `b = 0`.
fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

pub fn predict_path_loss(model: &Model, feature: &WeiFeatureVector) -> f64 {
    match model {
        Model::Stat { fc_ghz, h_ut_m } => {
            let d3d = feature.d3d.max(1.0);
            let d2d = feature.d2d.min(d3d);
            stat_path_loss(d2d, d3d, *fc_ghz, *h_ut_m, !feature.los_blocked)
                .expect("distances clamped into the model's domain")
        }
        Model::LogDistance { intercept, slope } => intercept + slope * feature.d3d.max(1.0).log10(),
        Model::Knn(knn) => knn.predict(&feature.to_array()),
    }
}

/// Pilot positions: every `spacing`-th subcarrier starting at 0.
pub fn pilot_indices(n_subcarriers: usize, spacing: usize) -> Vec<usize> {
    (0..n_subcarriers).step_by(spacing.max(1)).collect()
}

/// Samples `truth` at the pilot positions and adds circular Gaussian noise
/// at `snr_db` relative to the mean pilot power.
pub fn observe_pilots(
    truth: &[Complex64],
    pilot_idx: &[usize],
    snr_db: f64,
    rng: &mut impl Rng,
) -> Vec<Complex64> {
    let clean: Vec<Complex64> = pilot_idx.iter().map(|&k| truth[k]).collect();
    let power = clean.iter().map(|h| h.norm_sqr()).sum::<f64>() / clean.len().max(1) as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return clean;
    }
    let normal = Normal::new(0.0, sigma).expect("positive finite deviation");
    clean
        .into_iter()
        .map(|h| h + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Delays closer than this are treated as one path.
pub const DELAY_MERGE_TOL_S: f64 = 1e-12;

fn merge_delays(delays: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = delays.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for d in sorted {
        match out.last() {
            Some(&last) if (d - last).abs() <= DELAY_MERGE_TOL_S => {}
            _ => out.push(d),
        }
    }
    out
}

/// Rebuilds a single-antenna, single-symbol response over all subcarriers from
/// pilot observations, given the path delays predicted from scene geometry.
///
/// Complex path amplitudes are the least-squares solution over the pilot
/// rows of the basis `exp(-j 2 pi df_k tau_p)`.
pub fn reconstruct_cfr_from_pilots(
    pilot_obs: &[Complex64],
    pilot_idx: &[usize],
    predicted_delays: &[f64],
    ofdm: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    let n_sc = ofdm.n_subcarriers();
    if pilot_obs.len() != pilot_idx.len() || pilot_obs.is_empty() {
        return Err(Error::invalid(
            "pilot observations and indices must align and be non-empty",
        ));
    }
    if pilot_idx.iter().any(|&k| k >= n_sc) {
        return Err(Error::invalid("pilot index outside the band"));
    }
    let delays = merge_delays(predicted_delays);
    if delays.is_empty() {
        return Ok(vec![Complex64::new(0.0, 0.0); n_sc]);
    }
    if delays.len() > pilot_idx.len() {
        return Err(Error::invalid(format!(
            "{} delays exceed {} pilots",
            delays.len(),
            pilot_idx.len()
        )));
    }
    let basis = |k: usize, tau: f64| -> Complex<f64> {
        Complex::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * ofdm.subcarrier_offset_hz(k) * tau,
        )
    };
    let a = DMatrix::from_fn(pilot_idx.len(), delays.len(), |i, p| {
        basis(pilot_idx[i], delays[p])
    });
    let b = DVector::from_iterator(pilot_obs.len(), pilot_obs.iter().copied());
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    let amps = svd
        .solve(&b, tol)
        .map_err(|e| Error::invalid(format!("least-squares solve failed: {e}")))?;
    Ok((0..n_sc)
        .map(|k| {
            (0..delays.len())
                .map(|p| amps[p] * basis(k, delays[p]))
                .sum()
        })
        .collect())
}

/// Baseline without environment knowledge: linear interpolation of the pilot
/// values over subcarrier index, holding the edge pilots constant outside them.
pub fn interpolate_pilots_linear(
    pilot_obs: &[Complex64],
    pilot_idx: &[usize],
    n_subcarriers: usize,
) -> Result<Vec<Complex64>> {
    if pilot_obs.len() != pilot_idx.len() || pilot_obs.is_empty() {
        return Err(Error::invalid(
            "pilot observations and indices must align and be non-empty",
        ));
    }
    if pilot_idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("pilot indices must be strictly increasing"));
    }
    let first = pilot_idx[0];
    let last = *pilot_idx.last().expect("non-empty");
    Ok((0..n_subcarriers)
        .map(|k| {
            if k <= first {
                return pilot_obs[0];
            }
            if k >= last {
                return pilot_obs[pilot_obs.len() - 1];
            }
            let j = pilot_idx.partition_point(|&p| p <= k) - 1;
            let (k0, k1) = (pilot_idx[j], pilot_idx[j + 1]);
            let t = (k - k0) as f64 / (k1 - k0) as f64;
            pilot_obs[j] * (1.0 - t) + pilot_obs[j + 1] * t
        })
        .collect())
}

/// `sum |pred - truth|^2 / sum |truth|^2`.
pub fn nmse(truth: &[Complex64], predicted: &[Complex64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid("nmse inputs differ in length"));
    }
    let energy: f64 = truth.iter().map(|t| t.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let err: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (p - t).norm_sqr())
        .sum();
    Ok(err / energy)
}

/// Real-valued [`nmse`].
pub fn nmse_real(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid("nmse inputs differ in length"));
    }
    let energy: f64 = truth.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let err: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (p - t) * (p - t))
        .sum();
    Ok(err / energy)
}

/// Empirical CDF: values sorted ascending, paired with `i / n`.
pub fn cdf_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::invalid("cdf of an empty list"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(d3d: f64, los_blocked: bool) -> WeiFeatureVector {
        WeiFeatureVector {
            d2d: (d3d * d3d - 289.0).max(0.0).sqrt(),
            d3d,
            los_blocked,
            n_first_order_reflectors: 0,
            nearest_blocker_height_margin: 0.0,
            strongest_reflector_bearing: 0.0,
            dynamic_blocker_flag: false,
            rx_bearing: 0.1,
        }
    }

    fn sample(i: usize, f: WeiFeatureVector, pl: f64) -> PathLossSample {
        PathLossSample {
            rx_index: i,
            feature: f,
            path_loss_db: pl,
        }
    }

    #[test]
    fn single_row_single_neighbor_is_constant() {
        let train = vec![sample(0, feature(50.0, false), 93.5)];
        let params = FitParams {
            k: 1,
            ..FitParams::default()
        };
        let m = fit(PredictorTier::WeiRegressor, &train, &params).unwrap();
        for d in [20.0, 50.0, 170.0] {
            assert!((predict_path_loss(&m, &feature(d, true)) - 93.5).abs() < 1e-12);
        }
    }

    #[test]
    fn k_larger_than_train_rejected() {
        let train = vec![sample(0, feature(50.0, false), 93.5)];
        let err = fit(PredictorTier::WeiRegressor, &train, &FitParams::default());
        assert!(matches!(err, Err(Error::TooFewNeighbors { k: 5, n: 1 })));
    }

    #[test]
    fn log_distance_fit_is_exact_on_log_linear_data() {
        let train: Vec<_> = (1..30)
            .map(|i| {
                let d = 10.0 * i as f64;
                sample(i, feature(d, false), 41.3 + 27.5 * d.log10())
            })
            .collect();
        match fit(PredictorTier::SimpleFeature, &train, &FitParams::default()).unwrap() {
            Model::LogDistance { intercept, slope } => {
                assert!((intercept - 41.3).abs() < 1e-9);
                assert!((slope - 27.5).abs() < 1e-9);
            }
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn knn_interpolates_at_knots() {
        let train: Vec<_> = (0..12)
            .map(|i| {
                sample(
                    i,
                    feature(20.0 + 7.0 * i as f64, i % 3 == 0),
                    80.0 + i as f64,
                )
            })
            .collect();
        let m = fit(PredictorTier::WeiRegressor, &train, &FitParams::default()).unwrap();
        for s in &train {
            assert_eq!(predict_path_loss(&m, &s.feature), s.path_loss_db);
        }
    }

    #[test]
    fn constant_targets_predict_constant() {
        let train: Vec<_> = (0..10)
            .map(|i| sample(i, feature(30.0 + 11.0 * i as f64, i % 2 == 0), 101.0))
            .collect();
        let m = fit(PredictorTier::WeiRegressor, &train, &FitParams::default()).unwrap();
        let p = predict_path_loss(&m, &feature(77.7, true));
        assert!((p - 101.0).abs() < 1e-12);
    }

    #[test]
    fn equidistant_neighbors_average() {
        let knn = KnnRegressor::fit(&[vec![0.0], vec![2.0]], &[80.0, 90.0], 2).unwrap();
        assert!((knn.predict(&[1.0]) - 85.0).abs() < 1e-12);
    }

    #[test]
    fn stat_tier_matches_formula() {
        let m = fit(
            PredictorTier::StatModel,
            &[sample(0, feature(50.0, false), 0.0)],
            &FitParams::default(),
        )
        .unwrap();
        let f = WeiFeatureVector {
            d2d: 99.0,
            d3d: 100.0,
            ..feature(100.0, false)
        };
        assert!((predict_path_loss(&m, &f) - 88.62).abs() < 0.005);
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (tr, te) = split_train_test(100, 0.8, 3).unwrap();
        assert_eq!(tr.len(), 80);
        assert_eq!(te.len(), 20);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_train_test(100, 0.8, 3).unwrap(), (tr, te));
    }

    fn synth(ofdm: &OfdmConfig, paths: &[(Complex64, f64)]) -> Vec<Complex64> {
        (0..ofdm.n_subcarriers())
            .map(|k| {
                paths
                    .iter()
                    .map(|(a, tau)| {
                        a * Complex64::from_polar(
                            1.0,
                            -2.0 * std::f64::consts::PI * ofdm.subcarrier_offset_hz(k) * tau,
                        )
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn exact_delays_recover_noiseless_channel() {
        let ofdm = OfdmConfig::default();
        let paths = [
            (Complex64::new(1e-4, -3e-5), 3.1e-7),
            (Complex64::new(-4e-5, 2e-5), 5.6e-7),
            (Complex64::new(2e-5, 1e-5), 9.9e-7),
        ];
        let truth = synth(&ofdm, &paths);
        let pilots = pilot_indices(69, 8);
        let obs: Vec<Complex64> = pilots.iter().map(|&k| truth[k]).collect();
        let delays: Vec<f64> = paths.iter().map(|p| p.1).collect();
        let rec = reconstruct_cfr_from_pilots(&obs, &pilots, &delays, &ofdm).unwrap();
        assert!(nmse(&truth, &rec).unwrap() <= 1e-10);
    }

    #[test]
    fn duplicate_delays_are_merged() {
        let ofdm = OfdmConfig::default();
        let truth = synth(&ofdm, &[(Complex64::new(1.0, 0.5), 2e-7)]);
        let pilots = pilot_indices(69, 8);
        let obs: Vec<Complex64> = pilots.iter().map(|&k| truth[k]).collect();
        let rec = reconstruct_cfr_from_pilots(&obs, &pilots, &[2e-7, 2e-7 + 1e-13], &ofdm).unwrap();
        assert!(nmse(&truth, &rec).unwrap() <= 1e-10);
    }

    #[test]
    fn single_path_fit_and_interpolation_agree_in_magnitude() {
        let ofdm = OfdmConfig::default();
        let tau = 1e-10;
        let truth = synth(&ofdm, &[(Complex64::new(0.3, -0.4), tau)]);
        let pilots = pilot_indices(69, 8);
        let obs: Vec<Complex64> = pilots.iter().map(|&k| truth[k]).collect();
        let fitted = reconstruct_cfr_from_pilots(&obs, &pilots, &[tau], &ofdm).unwrap();
        let interp = interpolate_pilots_linear(&obs, &pilots, 69).unwrap();
        for (a, b) in fitted.iter().zip(&interp) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn basis_fit_beats_interpolation_on_fast_fringes() {
        // fringe period 1 / 2 us = 0.5 MHz, shorter than the 0.96 MHz pilot spacing
        let ofdm = OfdmConfig::default();
        let paths = [
            (Complex64::new(1.0, 0.0), 1e-7),
            (Complex64::new(0.0, 0.8), 2.1e-6),
        ];
        let truth = synth(&ofdm, &paths);
        let pilots = pilot_indices(69, 8);
        let obs: Vec<Complex64> = pilots.iter().map(|&k| truth[k]).collect();
        let fitted = reconstruct_cfr_from_pilots(&obs, &pilots, &[1e-7, 2.1e-6], &ofdm).unwrap();
        let interp = interpolate_pilots_linear(&obs, &pilots, 69).unwrap();
        let e_fit = nmse(&truth, &fitted).unwrap();
        let e_lin = nmse(&truth, &interp).unwrap();
        assert!(e_fit < e_lin, "fit {e_fit} vs linear {e_lin}");
    }

    #[test]
    fn too_many_delays_rejected() {
        let ofdm = OfdmConfig::default();
        let pilots = pilot_indices(69, 8);
        let obs = vec![Complex64::new(1.0, 0.0); pilots.len()];
        let delays: Vec<f64> = (0..10).map(|i| i as f64 * 1e-7).collect();
        assert!(reconstruct_cfr_from_pilots(&obs, &pilots, &delays, &ofdm).is_err());
    }

    #[test]
    fn nmse_reference_cases() {
        let h: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64, 1.0 - i as f64))
            .collect();
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert_eq!(nmse(&h, &zero).unwrap(), 1.0);
        let doubled: Vec<Complex64> = h.iter().map(|v| v * 2.0).collect();
        assert!((nmse(&h, &doubled).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nmse(&zero, &h), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn cdf_reference_cases() {
        let c = cdf_points(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        let eq = cdf_points(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(*eq.last().unwrap(), (4.0, 1.0));
        assert_eq!(cdf_points(&[7.5]).unwrap(), vec![(7.5, 1.0)]);
        assert!(cdf_points(&[]).is_err());
    }
}
