//! Planar PPP sampler for coverage and per-cell contention.
//!
//! Everything runs in normalized units where the BS density is 1 (SINR with
//! r^{-4} path loss is scale free). Interference from BSs within
//! `NEAR_FIELD_FRACTION · guard` of a user is summed exactly with Rayleigh
//! fading; everything further out is replaced by its mean π/r_cut².

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use super::report::{Estimate, SimReport};
use super::stream_rng;
use crate::error::{check_domain, Error, Result};
use crate::geometry::{
    access_probability, in_coverage_count_pmf, pmf_truncation_point, sinr_ccdf_lim, CellLoad,
};
use crate::numerics::{golden_min, linspace, mean_ci99};

pub const DEFAULT_GUARD_FRACTION: f64 = 0.15;
pub const DEFAULT_EXPECTED_BS: f64 = 1600.0;
pub const MIN_EXPECTED_BS: f64 = 500.0;
/// Exact-interference radius as a fraction of the guard margin.
pub const NEAR_FIELD_FRACTION: f64 = 0.8;
/// Replications aimed for, so replicate-based intervals have some degrees of freedom.
const MIN_REPLICATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSimConfig {
    /// BSs per m².
    pub bs_density: f64,
    /// Users per m².
    pub user_density: f64,
    /// m.
    pub window_side: f64,
    /// Edge exclusion as a fraction of the window side.
    pub guard_fraction: f64,
    /// Target count of the sampled unit (users or cells, per routine).
    pub samples: usize,
    pub seed: u64,
}

impl SpatialSimConfig {
    /// Window holding about 1600 BSs with a 15% guard margin.
    pub fn new(bs_density: f64, user_density: f64, samples: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            bs_density,
            user_density,
            window_side: (DEFAULT_EXPECTED_BS / bs_density).sqrt(),
            guard_fraction: DEFAULT_GUARD_FRACTION,
            samples,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_domain("BS density", self.bs_density, self.bs_density > 0.0 && self.bs_density.is_finite())?;
        check_domain(
            "user density",
            self.user_density,
            self.user_density >= 0.0 && self.user_density.is_finite(),
        )?;
        check_domain("window side", self.window_side, self.window_side > 0.0 && self.window_side.is_finite())?;
        check_domain(
            "guard fraction",
            self.guard_fraction,
            self.guard_fraction > 0.0 && self.guard_fraction < 0.5,
        )?;
        let expected = self.bs_density * self.window_side * self.window_side;
        if expected < MIN_EXPECTED_BS {
            return Err(Error::Config(format!(
                "window holds {expected:.1} BSs on average; need at least {MIN_EXPECTED_BS}"
            )));
        }
        // mean nearest-neighbour distance of a PPP is 1/(2√λ)
        let guard = self.guard_fraction * self.window_side;
        if guard < 1.0 / self.bs_density.sqrt() {
            return Err(Error::Config(format!(
                "guard margin {guard} m is below twice the mean nearest-neighbour distance"
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        Ok(())
    }

    pub fn with_window_side(&self, window_side: f64) -> Result<Self> {
        let cfg = Self { window_side, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn side(&self) -> f64 {
        self.window_side * self.bs_density.sqrt()
    }

    pub(crate) fn guard(&self) -> f64 {
        self.guard_fraction * self.side()
    }

    pub fn density_ratio(&self) -> f64 {
        self.user_density / self.bs_density
    }
}

pub(crate) type Point = [f64; 2];

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Uniform bucket grid over a square window.
pub(crate) struct Grid {
    cell: f64,
    n: usize,
    buckets: Vec<Vec<u32>>,
}

impl Grid {
    pub(crate) fn new(points: &[Point], side: f64) -> Self {
        let n = (side.ceil() as usize).max(1);
        let cell = side / n as f64;
        let mut buckets = vec![Vec::new(); n * n];
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = Self::coords(cell, n, *p);
            buckets[cy * n + cx].push(i as u32);
        }
        Self { cell, n, buckets }
    }

    fn coords(cell: f64, n: usize, p: Point) -> (usize, usize) {
        let cx = ((p[0] / cell) as isize).clamp(0, n as isize - 1) as usize;
        let cy = ((p[1] / cell) as isize).clamp(0, n as isize - 1) as usize;
        (cx, cy)
    }

    /// Calls `f(index, squared distance)` for every point within `r` of `p`.
    pub(crate) fn for_each_within<F: FnMut(usize, f64)>(&self, points: &[Point], p: Point, r: f64, mut f: F) {
        let r2 = r * r;
        let lo_x = (((p[0] - r) / self.cell).floor().max(0.0)) as usize;
        let lo_y = (((p[1] - r) / self.cell).floor().max(0.0)) as usize;
        let hi_x = (((p[0] + r) / self.cell).floor() as isize).clamp(-1, self.n as isize - 1);
        let hi_y = (((p[1] + r) / self.cell).floor() as isize).clamp(-1, self.n as isize - 1);
        if hi_x < 0 || hi_y < 0 {
            return;
        }
        for cy in lo_y..=hi_y as usize {
            for cx in lo_x..=hi_x as usize {
                for &i in &self.buckets[cy * self.n + cx] {
                    let d2 = dist2(points[i as usize], p);
                    if d2 <= r2 {
                        f(i as usize, d2);
                    }
                }
            }
        }
    }

    pub(crate) fn nearest(&self, points: &[Point], p: Point) -> (usize, f64) {
        let mut r = 1.5 * self.cell;
        loop {
            let mut best = (usize::MAX, f64::INFINITY);
            self.for_each_within(points, p, r, |i, d2| {
                if d2 < best.1 || (d2 == best.1 && i < best.0) {
                    best = (i, d2);
                }
            });
            if best.0 != usize::MAX {
                return best;
            }
            r *= 2.0;
        }
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    n as usize
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<Point> {
    (0..n)
        .map(|_| [rng.gen_range(lo..hi), rng.gen_range(lo..hi)])
        .collect()
}

/// One BS layout in normalized units.
pub(crate) struct Layout {
    pub(crate) bs: Vec<Point>,
    pub(crate) grid: Grid,
    pub(crate) side: f64,
    pub(crate) inner: (f64, f64),
    near_field: f64,
    far_field_mean: f64,
}

impl Layout {
    /// Draws a nonempty layout; returns it with the number of empty draws discarded.
    pub(crate) fn draw(cfg: &SpatialSimConfig, rng: &mut ChaCha8Rng) -> (Self, usize) {
        let side = cfg.side();
        let mut empty = 0;
        let bs = loop {
            let n = poisson_count(rng, side * side);
            if n > 0 {
                break uniform_points(rng, n, 0.0, side);
            }
            empty += 1;
        };
        let guard = cfg.guard();
        let near_field = NEAR_FIELD_FRACTION * guard;
        let grid = Grid::new(&bs, side);
        (
            Self {
                bs,
                grid,
                side,
                inner: (guard, side - guard),
                near_field,
                far_field_mean: std::f64::consts::PI / (near_field * near_field),
            },
            empty,
        )
    }

    pub(crate) fn is_inner(&self, p: Point) -> bool {
        let (lo, hi) = self.inner;
        p[0] >= lo && p[0] < hi && p[1] >= lo && p[1] < hi
    }

    pub(crate) fn nearest(&self, p: Point) -> usize {
        self.grid.nearest(&self.bs, p).0
    }

    /// SINR of a user at `p` served by BS `serving`, with fresh fading.
    fn sinr(&self, p: Point, serving: usize, rng: &mut ChaCha8Rng) -> f64 {
        let mut signal = 0.0;
        let mut interference = self.far_field_mean;
        self.grid.for_each_within(&self.bs, p, self.near_field, |i, d2| {
            let h: f64 = Exp1.sample(rng);
            let g = h / (d2 * d2);
            if i == serving {
                signal = g;
            } else {
                interference += g;
            }
        });
        if signal == 0.0 {
            // serving BS beyond the near field: draw its fading separately
            let h: f64 = Exp1.sample(rng);
            let d2 = dist2(self.bs[serving], p);
            signal = h / (d2 * d2);
        }
        signal / interference
    }
}

fn check_threshold(x: f64) -> Result<f64> {
    check_domain("SINR threshold", x, x >= 0.0 && x.is_finite())
}

/// P(SINR > x) at each threshold for users away from the window edge.
///
/// Estimate keys are `coverage@<x>`; the analytic value is stored as
/// `analytic@<x>` with zero width.
pub fn spatial_coverage(cfg: &SpatialSimConfig, thresholds: &[f64]) -> Result<SimReport> {
    cfg.validate()?;
    for &x in thresholds {
        check_threshold(x)?;
    }
    let side = cfg.side();
    let inner_side = side - 2.0 * cfg.guard();
    let per_rep_cap = cfg.samples.div_ceil(MIN_REPLICATIONS).max(1);
    let mut per_rep: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
    let mut report = SimReport::new("spatial_coverage", cfg.seed, cfg);
    let mut users = 0;
    let mut empty = 0;
    let mut rep = 0u64;
    let ratio = cfg.density_ratio().max(1.0);
    while users < cfg.samples {
        let mut rng = stream_rng(cfg.seed, rep);
        rep += 1;
        let (layout, e) = Layout::draw(cfg, &mut rng);
        empty += e;
        let n = poisson_count(&mut rng, ratio * inner_side * inner_side)
            .min(per_rep_cap)
            .min(cfg.samples - users);
        if n == 0 {
            continue;
        }
        let (lo, hi) = layout.inner;
        let pts = uniform_points(&mut rng, n, lo, hi);
        let mut hits = vec![0usize; thresholds.len()];
        for p in pts {
            let s = layout.sinr(p, layout.nearest(p), &mut rng);
            for (h, &x) in hits.iter_mut().zip(thresholds) {
                if s > x {
                    *h += 1;
                }
            }
        }
        for (acc, h) in per_rep.iter_mut().zip(hits) {
            acc.push(h as f64 / n as f64);
        }
        users += n;
    }
    for (vals, &x) in per_rep.iter().zip(thresholds) {
        report.insert(format!("coverage@{x}"), Estimate::from_replicates(vals, users));
        report.insert(format!("analytic@{x}"), Estimate::exact(sinr_ccdf_lim(x)?, 0));
    }
    if empty > 0 {
        report.warnings.push(format!("{empty} empty BS draws resampled"));
    }
    Ok(report)
}

/// Per-cell in-coverage user counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCountStudy {
    pub threshold: f64,
    pub density_ratio: f64,
    /// Analytic coverage probability used by the model PMF.
    pub coverage_analytic: f64,
    pub coverage_mc: Estimate,
    /// PMF of other in-coverage users in the cell of a random in-coverage user.
    pub user_pmf: Vec<f64>,
    pub user_pmf_ci: Vec<f64>,
    /// PMF of in-coverage users in a typical cell.
    pub cell_pmf: Vec<f64>,
    pub cell_pmf_ci: Vec<f64>,
    /// E[1/(K+1)] over in-coverage users.
    pub access_mc: Estimate,
    pub cells: usize,
    pub covered_users: usize,
    pub empty_draws: usize,
}

fn histogram(counts: &[usize]) -> Vec<f64> {
    let kmax = counts.iter().copied().max().unwrap_or(0);
    let mut h = vec![0.0; kmax + 1];
    for &k in counts {
        h[k] += 1.0;
    }
    let n = counts.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn pooled_with_ci(per_rep: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let all: Vec<usize> = per_rep.iter().flatten().copied().collect();
    let pooled = histogram(&all);
    let hists: Vec<Vec<f64>> = per_rep.iter().filter(|r| !r.is_empty()).map(|r| histogram(r)).collect();
    let ci = (0..pooled.len())
        .map(|k| {
            let vals: Vec<f64> = hists.iter().map(|h| h.get(k).copied().unwrap_or(0.0)).collect();
            mean_ci99(&vals).1
        })
        .collect();
    (pooled, ci)
}

impl UserCountStudy {
    fn contention(&self, thinning: f64) -> f64 {
        thinning * self.coverage_analytic * self.density_ratio
    }

    /// Model PMF on 0..=kmax where kmax covers both the data and the model tail.
    pub fn model_pmf(&self, thinning: f64, len: usize) -> Vec<f64> {
        let load = CellLoad::from_contention(self.contention(thinning)).expect("nonnegative contention");
        (0..len as u64).map(|k| in_coverage_count_pmf(&load, k)).collect()
    }

    fn support(&self, empirical: &[f64], thinning: f64) -> usize {
        let load = CellLoad::from_contention(self.contention(thinning)).expect("nonnegative contention");
        empirical.len().max(pmf_truncation_point(&load, 1e-12) as usize + 1)
    }

    /// Total-variation distance between `empirical` and the model at `thinning`.
    pub fn total_variation(&self, empirical: &[f64], thinning: f64) -> f64 {
        let len = self.support(empirical, thinning);
        let model = self.model_pmf(thinning, len);
        0.5 * model
            .iter()
            .enumerate()
            .map(|(k, m)| (empirical.get(k).copied().unwrap_or(0.0) - m).abs())
            .sum::<f64>()
    }

    /// Least-squares fit of the thinning constant to `empirical`.
    pub fn refit_thinning(&self, empirical: &[f64]) -> f64 {
        let sse = |l: f64| {
            let len = self.support(empirical, l);
            self.model_pmf(l, len)
                .iter()
                .enumerate()
                .map(|(k, m)| (empirical.get(k).copied().unwrap_or(0.0) - m).powi(2))
                .sum::<f64>()
        };
        let grid = linspace(0.05, 3.0, 60);
        let best = (0..grid.len())
            .min_by(|&a, &b| sse(grid[a]).total_cmp(&sse(grid[b])))
            .expect("nonempty grid");
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        golden_min(sse, lo, hi, 1e-6).0
    }

    /// Model access probability at `thinning`.
    pub fn access_model(&self, thinning: f64) -> f64 {
        access_probability(&CellLoad::from_contention(self.contention(thinning)).expect("nonnegative"))
    }
}

/// Samples in-coverage counts until `cfg.samples` inner cells are seen.
pub fn user_count_study(cfg: &SpatialSimConfig, threshold: f64) -> Result<UserCountStudy> {
    cfg.validate()?;
    check_threshold(threshold)?;
    let side = cfg.side();
    let ratio = cfg.density_ratio();
    let mut user_counts: Vec<Vec<usize>> = Vec::new();
    let mut cell_counts: Vec<Vec<usize>> = Vec::new();
    let mut access = Vec::new();
    let mut coverage = Vec::new();
    let (mut cells, mut covered_users, mut empty_draws) = (0, 0, 0);
    let mut rep = 0u64;
    while cells < cfg.samples {
        let mut rng = stream_rng(cfg.seed, rep);
        rep += 1;
        let (layout, e) = Layout::draw(cfg, &mut rng);
        empty_draws += e;
        let inner_bs: Vec<bool> = layout.bs.iter().map(|&b| layout.is_inner(b)).collect();
        let n_users = poisson_count(&mut rng, ratio * side * side);
        let users = uniform_points(&mut rng, n_users, 0.0, side);
        let mut served = Vec::new();
        let mut ncov = vec![0usize; layout.bs.len()];
        let mut total_inner = 0usize;
        for p in users {
            let b = layout.nearest(p);
            if !inner_bs[b] {
                continue;
            }
            total_inner += 1;
            if layout.sinr(p, b, &mut rng) > threshold {
                ncov[b] += 1;
                served.push(b);
            }
        }
        let uc: Vec<usize> = served.iter().map(|&b| ncov[b] - 1).collect();
        if !uc.is_empty() {
            access.push(uc.iter().map(|&k| 1.0 / (k as f64 + 1.0)).sum::<f64>() / uc.len() as f64);
        }
        if total_inner > 0 {
            coverage.push(served.len() as f64 / total_inner as f64);
        }
        covered_users += uc.len();
        user_counts.push(uc);
        let cc: Vec<usize> = (0..layout.bs.len()).filter(|&i| inner_bs[i]).map(|i| ncov[i]).collect();
        cells += cc.len();
        cell_counts.push(cc);
    }
    let (user_pmf, user_pmf_ci) = pooled_with_ci(&user_counts);
    let (cell_pmf, cell_pmf_ci) = pooled_with_ci(&cell_counts);
    Ok(UserCountStudy {
        threshold,
        density_ratio: ratio,
        coverage_analytic: sinr_ccdf_lim(threshold)?,
        coverage_mc: Estimate::from_replicates(&coverage, covered_users),
        user_pmf,
        user_pmf_ci,
        cell_pmf,
        cell_pmf_ci,
        access_mc: Estimate::from_replicates(&access, covered_users),
        cells,
        covered_users,
        empty_draws,
    })
}

/// Empirical in-coverage count PMF compared against the model at `thinning`.
pub fn empirical_user_count_pmf(cfg: &SpatialSimConfig, threshold: f64, thinning: f64) -> Result<SimReport> {
    let study = user_count_study(cfg, threshold)?;
    let mut report = SimReport::new("empirical_user_count_pmf", cfg.seed, cfg);
    for (k, (v, ci)) in study.user_pmf.iter().zip(&study.user_pmf_ci).enumerate() {
        report.insert(format!("pmf[{k}]"), Estimate::new(*v, *ci, study.covered_users));
    }
    let ks = |pmf: &[f64]| (0..pmf.len()).map(|k| k as f64).collect::<Vec<_>>();
    report.insert_series("pmf_user", ks(&study.user_pmf), study.user_pmf.clone());
    report.insert_series("pmf_cell", ks(&study.cell_pmf), study.cell_pmf.clone());
    let len = study.support(&study.user_pmf, thinning);
    report.insert_series("pmf_model", ks(&vec![0.0; len]), study.model_pmf(thinning, len));
    report.insert("tv_user", Estimate::exact(study.total_variation(&study.user_pmf, thinning), study.covered_users));
    report.insert("tv_cell", Estimate::exact(study.total_variation(&study.cell_pmf, thinning), study.cells));
    report.insert("thinning_fit_user", Estimate::exact(study.refit_thinning(&study.user_pmf), study.covered_users));
    report.insert("thinning_fit_cell", Estimate::exact(study.refit_thinning(&study.cell_pmf), study.cells));
    report.insert("access_mc", study.access_mc);
    report.insert("access_model", Estimate::exact(study.access_model(thinning), 0));
    report.insert("coverage_mc", study.coverage_mc);
    report.insert("thinning", Estimate::exact(thinning, 0));
    if study.empty_draws > 0 {
        report.warnings.push(format!("{} empty BS draws resampled", study.empty_draws));
    }
    Ok(report)
}

/// Monte Carlo of one band's service probability: BS vacant, user covered,
/// and won fair TDMA among the covered users of its cell.
///
/// `cfg.user_density` is the band's active-user density. Keys:
/// `service_prob`, `coverage`, `access`.
pub fn band_service_mc(cfg: &SpatialSimConfig, threshold: f64, vacancy: f64) -> Result<SimReport> {
    cfg.validate()?;
    check_threshold(threshold)?;
    check_domain("vacancy", vacancy, vacancy > 0.0 && vacancy <= 1.0)?;
    let side = cfg.side();
    let ratio = cfg.density_ratio();
    let (mut service, mut coverage, mut access) = (Vec::new(), Vec::new(), Vec::new());
    let mut users_seen = 0;
    let mut rep = 0u64;
    let mut report = SimReport::new("band_service_mc", cfg.seed, &(cfg, threshold, vacancy));
    while users_seen < cfg.samples || service.len() < MIN_REPLICATIONS {
        let mut rng = stream_rng(cfg.seed, rep);
        rep += 1;
        let (layout, _) = Layout::draw(cfg, &mut rng);
        let vacant: Vec<bool> = (0..layout.bs.len()).map(|_| rng.gen_bool(vacancy)).collect();
        let n_users = poisson_count(&mut rng, ratio * side * side);
        let users = uniform_points(&mut rng, n_users, 0.0, side);
        let mut ncov = vec![0usize; layout.bs.len()];
        let mut covered = Vec::new();
        let mut total = 0usize;
        for p in users {
            let b = layout.nearest(p);
            if !layout.is_inner(layout.bs[b]) {
                continue;
            }
            total += 1;
            if layout.sinr(p, b, &mut rng) > threshold {
                ncov[b] += 1;
                covered.push(b);
            }
        }
        if total == 0 {
            continue;
        }
        let served: f64 = covered
            .iter()
            .filter(|&&b| vacant[b])
            .map(|&b| 1.0 / ncov[b] as f64)
            .sum();
        service.push(served / total as f64);
        coverage.push(covered.len() as f64 / total as f64);
        if !covered.is_empty() {
            access.push(covered.iter().map(|&b| 1.0 / ncov[b] as f64).sum::<f64>() / covered.len() as f64);
        }
        users_seen += total;
    }
    report.insert("service_prob", Estimate::from_replicates(&service, users_seen));
    report.insert("coverage", Estimate::from_replicates(&coverage, users_seen));
    report.insert("access", Estimate::from_replicates(&access, users_seen));
    Ok(report)
}
