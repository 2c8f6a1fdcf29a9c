//! Max-min fair resource-block allocation.
//!
//! `T_u = sum_{t,r} D[u,t,r] X_u[t,r]`, every RB owned by exactly one user,
//! objective `max min_u T_u`. Users are 0-based in this API.

use serde::{Deserialize, Serialize};

use crate::beam::BeamCodebook;
use crate::channel::{total_tx_power_dbm, Cfr, OfdmConfig};
use crate::error::{Error, Result};

/// Subcarriers per resource block.
pub const RB_SUBCARRIERS: usize = 12;

/// Per-user, per-RB rates `d[u][t][r]` in bit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTensor {
    n_users: usize,
    n_t: usize,
    n_r: usize,
    data: Vec<f64>,
}

impl RateTensor {
    pub fn new(n_users: usize, n_t: usize, n_r: usize, data: Vec<f64>) -> Result<Self> {
        if n_users == 0 || n_t == 0 || n_r == 0 {
            return Err(Error::invalid("rate tensor dimensions must be positive"));
        }
        if data.len() != n_users * n_t * n_r {
            return Err(Error::invalid(format!(
                "expected {} rates, got {}",
                n_users * n_t * n_r,
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("rates must be finite and non-negative"));
        }
        Ok(Self {
            n_users,
            n_t,
            n_r,
            data,
        })
    }

    /// Builds from `rows[u][t][r]`.
    pub fn from_nested(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n_users = rows.len();
        let n_t = rows.first().map_or(0, |u| u.len());
        let n_r = rows.first().and_then(|u| u.first()).map_or(0, |t| t.len());
        if rows
            .iter()
            .any(|u| u.len() != n_t || u.iter().any(|t| t.len() != n_r))
        {
            return Err(Error::invalid("ragged rate tensor"));
        }
        let data = rows.iter().flatten().flatten().copied().collect();
        Self::new(n_users, n_t, n_r, data)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_rb(&self) -> usize {
        self.n_t * self.n_r
    }

    pub fn get(&self, u: usize, t: usize, r: usize) -> f64 {
        self.data[(u * self.n_t + t) * self.n_r + r]
    }

    /// Rate of user `u` on flattened RB `j = t * R + r`.
    pub fn rb(&self, u: usize, j: usize) -> f64 {
        self.data[u * self.n_rb() + j]
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.n_users,
            self.n_t,
            self.n_r,
            self.data.iter().map(|v| v * alpha).collect(),
        )
    }

    /// Copy with one more frequency-domain RB per slot, filled from `extra[u][t]`.
    pub fn with_extra_rb(&self, extra: &[Vec<f64>]) -> Result<Self> {
        let mut rows = Vec::with_capacity(self.n_users);
        for u in 0..self.n_users {
            let mut user = Vec::with_capacity(self.n_t);
            for t in 0..self.n_t {
                let mut slot: Vec<f64> = (0..self.n_r).map(|r| self.get(u, t, r)).collect();
                slot.push(extra[u][t]);
                user.push(slot);
            }
            rows.push(user);
        }
        Self::from_nested(&rows)
    }
}

/// RB owners, flattened as `j = t * R + r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    pub n_t: usize,
    pub n_r: usize,
    pub owner: Vec<usize>,
}

impl AllocationMatrix {
    pub fn owner_of(&self, t: usize, r: usize) -> usize {
        self.owner[t * self.n_r + r]
    }

    /// Builds from per-user indicator matrices `x[u][t][r]`, enforcing
    /// `sum_u X_u = 1` on every RB.
    pub fn from_indicators(x: &[Vec<Vec<u8>>]) -> Result<Self> {
        let n_t = x.first().map_or(0, |u| u.len());
        let n_r = x.first().and_then(|u| u.first()).map_or(0, |t| t.len());
        if x.iter()
            .any(|u| u.len() != n_t || u.iter().any(|t| t.len() != n_r))
        {
            return Err(Error::invalid("ragged indicator matrices"));
        }
        let mut owner = Vec::with_capacity(n_t * n_r);
        for t in 0..n_t {
            for r in 0..n_r {
                let owners: Vec<usize> = (0..x.len()).filter(|&u| x[u][t][r] != 0).collect();
                if owners.len() != 1 || x[owners[0]][t][r] != 1 {
                    return Err(Error::PartitionViolation { t, r });
                }
                owner.push(owners[0]);
            }
        }
        Ok(Self { n_t, n_r, owner })
    }

    /// Indicator matrix `X_u`.
    pub fn indicator(&self, u: usize) -> Vec<Vec<u8>> {
        (0..self.n_t)
            .map(|t| {
                (0..self.n_r)
                    .map(|r| (self.owner_of(t, r) == u) as u8)
                    .collect()
            })
            .collect()
    }

    /// Checks that every RB has exactly one valid owner.
    pub fn check_partition(&self, n_users: usize) -> Result<()> {
        if self.owner.len() != self.n_t * self.n_r {
            return Err(Error::invalid("owner array does not match T x R"));
        }
        for (j, &u) in self.owner.iter().enumerate() {
            if u >= n_users {
                return Err(Error::PartitionViolation {
                    t: j / self.n_r,
                    r: j % self.n_r,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub per_user_throughput: Vec<f64>,
    pub t_min: f64,
    /// Max minus min throughput.
    pub gap: f64,
    /// Population variance over users.
    pub variance: f64,
    pub total: f64,
}

fn throughputs(owner: &[usize], d: &RateTensor) -> Vec<f64> {
    let mut thr = vec![0.0; d.n_users()];
    for (j, &u) in owner.iter().enumerate() {
        thr[u] += d.rb(u, j);
    }
    thr
}

pub fn evaluate(x: &AllocationMatrix, d: &RateTensor) -> Result<FairnessReport> {
    if x.n_t != d.n_t() || x.n_r != d.n_r() {
        return Err(Error::invalid("allocation and rate tensor shapes differ"));
    }
    x.check_partition(d.n_users())?;
    Ok(report_from(throughputs(&x.owner, d)))
}

pub fn report_from(per_user: Vec<f64>) -> FairnessReport {
    let n = per_user.len() as f64;
    let t_min = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = per_user.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = per_user.iter().sum();
    let mean = total / n;
    let variance = per_user
        .iter()
        .map(|t| (t - mean) * (t - mean))
        .sum::<f64>()
        / n;
    FairnessReport {
        per_user_throughput: per_user,
        t_min,
        gap: t_max - t_min,
        variance,
        total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub thermal_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            thermal_dbm_per_hz: -174.0,
            noise_figure_db: 7.0,
        }
    }
}

impl NoiseConfig {
    pub fn rb_noise_dbm(&self, rb_bandwidth_hz: f64) -> f64 {
        self.thermal_dbm_per_hz + 10.0 * rb_bandwidth_hz.log10() + self.noise_figure_db
    }
}

pub fn rb_bandwidth_hz(ofdm: &OfdmConfig) -> f64 {
    RB_SUBCARRIERS as f64 * ofdm.scs_hz
}

/// Shannon rate `B log2(1 + snr)` in bit/s.
pub fn shannon_rate(bandwidth_hz: f64, snr_linear: f64) -> f64 {
    bandwidth_hz * (1.0 + snr_linear.max(0.0)).log2()
}

/// Rates for every user under its selected beam.
///
/// RBs are 12 subcarriers by one symbol: `R = floor(n_sc / 12)`, `T = n_symbols`.
pub fn compute_rates(
    cfrs: &[Cfr],
    beams: &[usize],
    codebook: &BeamCodebook,
    ofdm: &OfdmConfig,
    noise: &NoiseConfig,
    per_element_power_dbm: f64,
) -> Result<RateTensor> {
    if cfrs.len() != beams.len() || cfrs.is_empty() {
        return Err(Error::invalid(
            "need one beam per user and at least one user",
        ));
    }
    let n_sc = ofdm.n_subcarriers();
    if n_sc < RB_SUBCARRIERS {
        return Err(Error::invalid(format!(
            "{n_sc} subcarriers cannot hold one RB"
        )));
    }
    let n_r = n_sc / RB_SUBCARRIERS;
    let n_t = ofdm.n_symbols;
    let b_rb = rb_bandwidth_hz(ofdm);
    let noise_dbm = noise.rb_noise_dbm(b_rb);
    let mut data = Vec::with_capacity(cfrs.len() * n_t * n_r);
    for (cfr, &beam) in cfrs.iter().zip(beams) {
        if cfr.n_subcarriers() != n_sc
            || cfr.n_symbols() != n_t
            || cfr.n_tx() != codebook.n_elements()
        {
            return Err(Error::invalid(
                "channel shape does not match OFDM grid and codebook",
            ));
        }
        let p_tx = total_tx_power_dbm(per_element_power_dbm, cfr.n_tx());
        let w = codebook.beam(beam);
        for t in 0..n_t {
            for r in 0..n_r {
                let mut g = 0.0;
                for k in r * RB_SUBCARRIERS..(r + 1) * RB_SUBCARRIERS {
                    let y: num_complex::Complex64 = (0..cfr.n_tx())
                        .map(|n| w[n].conj() * cfr.h[[k, t, n]])
                        .sum();
                    g += y.norm_sqr();
                }
                g /= RB_SUBCARRIERS as f64;
                let snr = if g > 0.0 {
                    10f64.powf((p_tx + 10.0 * g.log10() - noise_dbm) / 10.0)
                } else {
                    0.0
                };
                data.push(shannon_rate(b_rb, snr));
            }
        }
    }
    RateTensor::new(cfrs.len(), n_t, n_r, data)
}

/// Rates that are flat over the grid, from one SNR (dB) per user.
pub fn flat_rates(
    snr_db: &[f64],
    n_t: usize,
    n_r: usize,
    rb_bandwidth_hz: f64,
) -> Result<RateTensor> {
    let data = snr_db
        .iter()
        .flat_map(|s| {
            let rate = shannon_rate(rb_bandwidth_hz, 10f64.powf(s / 10.0));
            std::iter::repeat_n(rate, n_t * n_r)
        })
        .collect();
    RateTensor::new(snr_db.len(), n_t, n_r, data)
}

pub const DEFAULT_EXACT_LIMIT: f64 = 1e7;

/// Exhaustive max-min search with bound pruning.
///
/// Among optimal allocations the lexicographically smallest owner array is
/// returned. Fails if `N^(T R)` exceeds `limit`.
pub fn solve_exact(d: &RateTensor, limit: f64) -> Result<(AllocationMatrix, f64)> {
    let n = d.n_users();
    let n_rb = d.n_rb();
    let assignments = (n as f64).powi(n_rb as i32);
    if assignments > limit {
        return Err(Error::InstanceTooLarge { assignments, limit });
    }
    // suffix[u][j]: what user u could still gain from RBs j..
    let mut suffix = vec![vec![0.0; n_rb + 1]; n];
    for (u, row) in suffix.iter_mut().enumerate() {
        for j in (0..n_rb).rev() {
            row[j] = row[j + 1] + d.rb(u, j);
        }
    }
    struct Search<'a> {
        d: &'a RateTensor,
        suffix: Vec<Vec<f64>>,
        owner: Vec<usize>,
        thr: Vec<Vec<f64>>,
        best: f64,
        best_owner: Option<Vec<usize>>,
    }
    impl Search<'_> {
        fn dfs(&mut self, j: usize) {
            let n = self.d.n_users();
            let n_rb = self.d.n_rb();
            if j == n_rb {
                let t_min = self.thr[j].iter().copied().fold(f64::INFINITY, f64::min);
                if self.best_owner.is_none() || t_min > self.best {
                    self.best = t_min;
                    self.best_owner = Some(self.owner.clone());
                }
                return;
            }
            if self.best_owner.is_some() {
                let bound = (0..n)
                    .map(|u| self.thr[j][u] + self.suffix[u][j])
                    .fold(f64::INFINITY, f64::min);
                if bound <= self.best {
                    return;
                }
            }
            for u in 0..n {
                self.owner[j] = u;
                let (head, tail) = self.thr.split_at_mut(j + 1);
                tail[0].copy_from_slice(&head[j]);
                tail[0][u] += self.d.rb(u, j);
                self.dfs(j + 1);
            }
        }
    }
    let mut search = Search {
        d,
        suffix,
        owner: vec![0; n_rb],
        thr: vec![vec![0.0; n]; n_rb + 1],
        best: f64::NEG_INFINITY,
        best_owner: None,
    };
    search.dfs(0);
    let owner = search.best_owner.expect("at least one assignment exists");
    let x = AllocationMatrix {
        n_t: d.n_t(),
        n_r: d.n_r(),
        owner,
    };
    let t_min = evaluate(&x, d)?.t_min;
    Ok((x, t_min))
}

/// Leximin order on throughput vectors: compare ascending-sorted copies
/// lexicographically, treating differences within `tol` as equal.
fn leximin_better(a: &[f64], b: &[f64], tol: f64) -> bool {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    for (x, y) in sa.iter().zip(&sb) {
        if x - y > tol {
            return true;
        }
        if y - x > tol {
            return false;
        }
    }
    false
}

/// Price-update rounds used to generate extra starting points.
const PRICE_ROUNDS: usize = 200;
const PRICE_STEP: f64 = 3.0;

/// Greedy fill followed by leximin local search over single moves and swaps.
///
/// Greedy: the currently poorest user (lowest index on ties) takes its best
/// unallocated RB (lowest index on ties). Local search then applies any
/// 1-move or 1-swap that improves the sorted throughput vector until none does.
///
/// The same local search is also run from a comparative-advantage greedy
/// fill and from weighted max-rate assignments whose user weights follow a
/// multiplicative price update; the leximin-best local optimum is returned
/// (earliest start on ties). Everything is deterministic and invariant under
/// positive scaling of `d`.
pub fn solve_heuristic(d: &RateTensor) -> (AllocationMatrix, f64) {
    let n = d.n_users();
    let n_rb = d.n_rb();
    let tol = leximin_tolerance(d);

    let mut best = local_search(d, greedy(d, |u, j| d.rb(u, j)));
    let consider = |cand: Vec<usize>, best: &mut Vec<usize>| {
        let cand = local_search(d, cand);
        if leximin_better(&throughputs(&cand, d), &throughputs(best, d), tol) {
            *best = cand;
        }
    };

    let top: Vec<f64> = (0..n_rb)
        .map(|j| (0..n).map(|u| d.rb(u, j)).fold(0.0, f64::max))
        .collect();
    consider(
        greedy(d, |u, j| {
            if top[j] > 0.0 {
                d.rb(u, j) / top[j]
            } else {
                0.0
            }
        }),
        &mut best,
    );

    let mut weights = vec![1.0f64; n];
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for round in 0..PRICE_ROUNDS {
        let cand: Vec<usize> = (0..n_rb)
            .map(|j| {
                (0..n)
                    .max_by(|&a, &b| {
                        (weights[a] * d.rb(a, j))
                            .total_cmp(&(weights[b] * d.rb(b, j)))
                            .then(b.cmp(&a))
                    })
                    .expect("at least one user")
            })
            .collect();
        let thr = throughputs(&cand, d);
        if !seen.contains(&cand) {
            seen.push(cand.clone());
            consider(cand, &mut best);
        }
        let mean = thr.iter().sum::<f64>() / n as f64;
        if !(mean > 0.0) {
            break;
        }
        let step = PRICE_STEP / (1.0 + round as f64).sqrt();
        for (w, t) in weights.iter_mut().zip(&thr) {
            *w *= (-step * (t - mean) / mean).exp();
        }
    }

    let t_min = throughputs(&best, d)
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (
        AllocationMatrix {
            n_t: d.n_t(),
            n_r: d.n_r(),
            owner: best,
        },
        t_min,
    )
}

fn leximin_tolerance(d: &RateTensor) -> f64 {
    let scale = (0..d.n_users())
        .map(|u| (0..d.n_rb()).map(|j| d.rb(u, j)).sum::<f64>())
        .fold(0.0, f64::max);
    1e-12 * scale
}

/// The poorest user (lowest index on ties) repeatedly takes the free RB with
/// the highest `score` (lowest index on ties).
fn greedy(d: &RateTensor, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let n = d.n_users();
    let n_rb = d.n_rb();
    let mut owner = vec![usize::MAX; n_rb];
    let mut thr = vec![0.0f64; n];
    for _ in 0..n_rb {
        let poorest = (0..n)
            .min_by(|&a, &b| thr[a].total_cmp(&thr[b]).then(a.cmp(&b)))
            .expect("at least one user");
        let pick = (0..n_rb)
            .filter(|&j| owner[j] == usize::MAX)
            .max_by(|&a, &b| {
                score(poorest, a)
                    .total_cmp(&score(poorest, b))
                    .then(b.cmp(&a))
            })
            .expect("an unallocated RB remains");
        owner[pick] = poorest;
        thr[poorest] += d.rb(poorest, pick);
    }
    owner
}

/// 1-move / 1-swap hill climbing on the leximin order.
fn local_search(d: &RateTensor, mut owner: Vec<usize>) -> Vec<usize> {
    let n = d.n_users();
    let n_rb = d.n_rb();
    let tol = leximin_tolerance(d);
    let mut thr = throughputs(&owner, d);
    loop {
        let mut improved = false;
        for j in 0..n_rb {
            for v in 0..n {
                let u = owner[j];
                if v == u {
                    continue;
                }
                let mut cand = thr.clone();
                cand[u] -= d.rb(u, j);
                cand[v] += d.rb(v, j);
                if leximin_better(&cand, &thr, tol) {
                    owner[j] = v;
                    thr = throughputs(&owner, d);
                    improved = true;
                }
            }
        }
        for j1 in 0..n_rb {
            for j2 in j1 + 1..n_rb {
                let (u1, u2) = (owner[j1], owner[j2]);
                if u1 == u2 {
                    continue;
                }
                let mut cand = thr.clone();
                cand[u1] += d.rb(u1, j2) - d.rb(u1, j1);
                cand[u2] += d.rb(u2, j1) - d.rb(u2, j2);
                if leximin_better(&cand, &thr, tol) {
                    owner.swap(j1, j2);
                    thr = throughputs(&owner, d);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    owner
}

/// Throughput-maximising baseline: every RB goes to its fastest user (lowest index on ties).
pub fn solve_max_total(d: &RateTensor) -> (AllocationMatrix, f64) {
    let owner: Vec<usize> = (0..d.n_rb())
        .map(|j| {
            (0..d.n_users())
                .max_by(|&a, &b| d.rb(a, j).total_cmp(&d.rb(b, j)).then(b.cmp(&a)))
                .expect("at least one user")
        })
        .collect();
    let thr = throughputs(&owner, d);
    let t_min = thr.iter().copied().fold(f64::INFINITY, f64::min);
    (
        AllocationMatrix {
            n_t: d.n_t(),
            n_r: d.n_r(),
            owner,
        },
        t_min,
    )
}
