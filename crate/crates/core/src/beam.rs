//! Steering codebook and beam selection.

use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::{beamformed_gain, power_dbm, total_tx_power_dbm, Cfr};
use crate::error::{Error, Result};
use crate::wei::WeiFeatureVector;

/// Unit-norm steering vectors on a uniform sin-angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCodebook {
    /// `[n_beams, n_elements]`.
    pub weights: Array2<Complex64>,
    /// `sin(azimuth)` of each beam, ascending.
    pub beam_sin_grid: Vec<f64>,
}

impl BeamCodebook {
    pub fn n_beams(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.weights.ncols()
    }

    pub fn beam(&self, m: usize) -> Vec<Complex64> {
        self.weights.row(m).to_vec()
    }

    /// Beam whose grid point is nearest to `sin_theta`; ties go to the lower index.
    pub fn nearest_beam(&self, sin_theta: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, s) in self.beam_sin_grid.iter().enumerate() {
            let d = (s - sin_theta).abs();
            if d < best_d {
                best = m;
                best_d = d;
            }
        }
        best
    }
}

/// `w_m[n] = exp(j pi n sin(theta_m)) / sqrt(N)` with `sin(theta_m) = (m - B/2) / (B/2)`.
pub fn build_codebook(n_beams: usize, n_elements: usize) -> Result<BeamCodebook> {
    if n_beams < 2 || n_elements == 0 || n_beams > 2 * n_elements {
        return Err(Error::invalid(format!(
            "cannot build {n_beams} beams over {n_elements} elements"
        )));
    }
    let half = (n_beams / 2) as f64;
    let beam_sin_grid: Vec<f64> = (0..n_beams).map(|m| (m as f64 - half) / half).collect();
    let norm = (n_elements as f64).sqrt();
    let weights = Array2::from_shape_fn((n_beams, n_elements), |(m, n)| {
        Complex64::from_polar(
            1.0 / norm,
            std::f64::consts::PI * n as f64 * beam_sin_grid[m],
        )
    });
    Ok(BeamCodebook {
        weights,
        beam_sin_grid,
    })
}

/// Received power of every beam, in dBm.
pub fn beam_powers(
    cfr: &Cfr,
    codebook: &BeamCodebook,
    per_element_power_dbm: f64,
) -> Result<Vec<f64>> {
    if cfr.n_tx() != codebook.n_elements() {
        return Err(Error::invalid(format!(
            "channel has {} elements, codebook {}",
            cfr.n_tx(),
            codebook.n_elements()
        )));
    }
    let p_tx = total_tx_power_dbm(per_element_power_dbm, cfr.n_tx());
    Ok((0..codebook.n_beams())
        .map(|m| {
            let w = codebook.beam(m);
            power_dbm(p_tx, beamformed_gain(cfr, &w))
        })
        .collect())
}

/// Index of the strongest beam, lowest index on ties, and its power.
pub fn argmax_lowest(powers: &[f64]) -> (usize, f64) {
    let mut best = (0, powers[0]);
    for (m, &p) in powers.iter().enumerate().skip(1) {
        if p > best.1 {
            best = (m, p);
        }
    }
    best
}

pub fn best_beam(
    cfr: &Cfr,
    codebook: &BeamCodebook,
    per_element_power_dbm: f64,
) -> Result<(usize, f64)> {
    let powers = beam_powers(cfr, codebook, per_element_power_dbm)?;
    Ok(argmax_lowest(&powers))
}

/// Geometric beam predictor.
///
/// With environment knowledge the bearing is the receiver's when the link is
/// in LoS and the strongest reflector's otherwise; without it the receiver
/// bearing is always assumed.
pub fn predict_beam(feature: &WeiFeatureVector, codebook: &BeamCodebook, use_wei: bool) -> usize {
    let bearing = if use_wei && feature.los_blocked {
        feature.strongest_reflector_bearing
    } else {
        feature.rx_bearing
    };
    codebook.nearest_beam(bearing.sin())
}

/// Beams ordered by decreasing power, ties broken by lower index.
pub fn rank_beams(powers: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]).then(a.cmp(&b)));
    order
}

/// Fraction of samples whose predicted beam is among the `k` strongest.
pub fn topk_accuracy(predicted: &[usize], truth_powers: &[Vec<f64>], k: usize) -> Result<f64> {
    if predicted.len() != truth_powers.len() || predicted.is_empty() {
        return Err(Error::invalid(
            "predictions and truths must align and be non-empty",
        ));
    }
    let hits = predicted
        .iter()
        .zip(truth_powers)
        .map(|(&p, powers)| {
            if k == 0 || k > powers.len() {
                return Err(Error::invalid(format!(
                    "k={k} outside 1..={}",
                    powers.len()
                )));
            }
            Ok(rank_beams(powers)[..k].contains(&p))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / predicted.len() as f64)
}

/// 1-based rank of `beam` in the truth ordering.
pub fn rank_of(beam: usize, powers: &[f64]) -> usize {
    rank_beams(powers)
        .iter()
        .position(|&b| b == beam)
        .map_or(powers.len(), |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cir_to_cfr, Cir, OfdmConfig, PathComponent, PathKind};
    use crate::geometry::Vec3;
    use crate::scene::TxSite;

    fn single_path_cfr(sin_theta: f64) -> Cfr {
        let cir = Cir {
            tx: Vec3::ZERO,
            rx: Vec3::new(1.0, 0.0, 0.0),
            paths: vec![PathComponent {
                kind: PathKind::Direct,
                delay_s: 3e-7,
                gain: Complex64::new(2e-5, 1e-5),
                aod_azimuth: sin_theta.asin(),
                doppler_hz: 0.0,
                length_m: 90.0,
                bounce_point: None,
            }],
        };
        cir_to_cfr(&cir, &OfdmConfig::default(), &TxSite::default())
    }

    #[test]
    fn codebook_shape_and_norms() {
        let cb = build_codebook(32, 128).unwrap();
        assert_eq!(cb.weights.dim(), (32, 128));
        for m in 0..32 {
            let norm: f64 = cb.weights.row(m).iter().map(|w| w.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let b16 = cb.beam(16);
        assert!(b16.iter().all(|w| (w - b16[0]).norm() < 1e-15));
        assert_eq!(cb.beam_sin_grid[21], 5.0 / 16.0);
    }

    #[test]
    fn broadside_path_picks_beam_16() {
        let cb = build_codebook(32, 128).unwrap();
        assert_eq!(best_beam(&single_path_cfr(0.0), &cb, -8.0).unwrap().0, 16);
    }

    #[test]
    fn off_axis_path_picks_grid_beam() {
        let cb = build_codebook(32, 128).unwrap();
        assert_eq!(
            best_beam(&single_path_cfr(5.0 / 16.0), &cb, -8.0)
                .unwrap()
                .0,
            21
        );
    }

    #[test]
    fn zero_channel_ties_to_beam_zero() {
        let cb = build_codebook(32, 128).unwrap();
        let cfr = Cfr::zeros(69, 3, 128);
        assert_eq!(best_beam(&cfr, &cb, -8.0).unwrap().0, 0);
    }

    #[test]
    fn halfway_bearing_goes_to_lower_beam() {
        let cb = build_codebook(32, 128).unwrap();
        assert_eq!(cb.nearest_beam(0.5 / 16.0), 16);
        assert_eq!(cb.nearest_beam(-0.5 / 16.0), 15);
    }

    fn feature(los_blocked: bool, rx_bearing: f64, refl: f64) -> WeiFeatureVector {
        WeiFeatureVector {
            d2d: 80.0,
            d3d: 82.0,
            los_blocked,
            n_first_order_reflectors: 1,
            nearest_blocker_height_margin: 0.0,
            strongest_reflector_bearing: refl,
            dynamic_blocker_flag: false,
            rx_bearing,
        }
    }

    #[test]
    fn los_predictors_coincide() {
        let cb = build_codebook(32, 128).unwrap();
        let f = feature(false, 0.4, -0.7);
        assert_eq!(predict_beam(&f, &cb, true), predict_beam(&f, &cb, false));
    }

    #[test]
    fn blocked_predictors_differ() {
        let cb = build_codebook(32, 128).unwrap();
        let f = feature(true, 0.4, -0.7);
        assert_ne!(predict_beam(&f, &cb, true), predict_beam(&f, &cb, false));
    }

    #[test]
    fn topk_counts() {
        let truths = vec![
            vec![0.0, 1.0, 2.0],
            vec![2.0, 1.0, 0.0],
            vec![0.0, 5.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        let argmax: Vec<usize> = truths.iter().map(|t| argmax_lowest(t).0).collect();
        for k in 1..=3 {
            assert_eq!(topk_accuracy(&argmax, &truths, k).unwrap(), 1.0);
        }
        let preds = vec![2, 1, 0, 1];
        assert_eq!(topk_accuracy(&preds, &truths, 1).unwrap(), 0.25);
        assert_eq!(topk_accuracy(&preds, &truths, 3).unwrap(), 1.0);
        assert!(topk_accuracy(&preds, &truths, 0).is_err());
        assert!(topk_accuracy(&preds, &truths, 4).is_err());
        assert_eq!(rank_of(1, &truths[3]), 2);
    }
}
