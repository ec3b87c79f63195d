//! Poisson–Voronoi cell areas by half-plane clipping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::{Estimate, SimReport};
use super::spatial::{Layout, Point, SpatialSimConfig};
use super::stream_rng;
use crate::error::Result;
use crate::geometry::{typical_cell_cdf, user_cell_cdf};
use crate::numerics::{ks_distance, mean_ci99};

/// Keeps the part of `poly` (around the origin) closer to the origin than to `q`.
fn clip(poly: &[Point], q: Point) -> Vec<Point> {
    let c = 0.5 * (q[0] * q[0] + q[1] * q[1]);
    let side = |p: Point| p[0] * q[0] + p[1] * q[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
}

/// Area of the Voronoi cell of BS `i`, normalized by the mean cell area.
pub(crate) fn cell_area(layout: &Layout, i: usize) -> f64 {
    let centre = layout.bs[i];
    let mut radius = 3.0;
    loop {
        let mut neighbours: Vec<(f64, Point)> = Vec::new();
        layout.grid.for_each_within(&layout.bs, centre, radius, |j, d2| {
            if j != i {
                let p = layout.bs[j];
                neighbours.push((d2, [p[0] - centre[0], p[1] - centre[1]]));
            }
        });
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut poly = vec![[-radius, -radius], [radius, -radius], [radius, radius], [-radius, radius]];
        let mut reach = f64::INFINITY;
        for &(d2, q) in &neighbours {
            // bisectors of points further than twice the furthest vertex cannot cut the cell
            if d2 > 4.0 * reach * reach {
                break;
            }
            poly = clip(&poly, q);
            reach = poly.iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).fold(0.0, f64::max);
        }
        if 2.0 * reach <= radius || radius > layout.side {
            return area(&poly);
        }
        radius *= 2.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiSample {
    /// Normalized areas of cells whose BS lies away from the window edge.
    pub typical: Vec<f64>,
    /// Normalized areas of the cells covering uniform points away from the edge.
    pub user_weighted: Vec<f64>,
}

/// Draws `cfg.samples` typical and user-weighted normalized cell areas.
pub fn voronoi_sample(cfg: &SpatialSimConfig) -> Result<VoronoiSample> {
    cfg.validate()?;
    let mut typical = Vec::with_capacity(cfg.samples);
    let mut user_weighted = Vec::with_capacity(cfg.samples);
    let mut rep = 0u64;
    while typical.len() < cfg.samples || user_weighted.len() < cfg.samples {
        let mut rng = stream_rng(cfg.seed, rep);
        rep += 1;
        let (layout, _) = Layout::draw(cfg, &mut rng);
        let inner: Vec<usize> = (0..layout.bs.len()).filter(|&i| layout.is_inner(layout.bs[i])).collect();
        for &i in &inner {
            if typical.len() < cfg.samples {
                typical.push(cell_area(&layout, i));
            }
        }
        let (lo, hi) = layout.inner;
        for _ in 0..inner.len() {
            if user_weighted.len() >= cfg.samples {
                break;
            }
            let p = [rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
            user_weighted.push(cell_area(&layout, layout.nearest(p)));
        }
    }
    Ok(VoronoiSample {
        typical,
        user_weighted,
    })
}

/// Cell-area samples with KS distances to the Gamma(3.5) and Gamma(4.5) laws.
///
/// Keys: `mean_typical`, `mean_user`, `ks_typical`, `ks_user`.
pub fn sample_voronoi_cells(cfg: &SpatialSimConfig) -> Result<SimReport> {
    let VoronoiSample {
        mut typical,
        mut user_weighted,
    } = voronoi_sample(cfg)?;
    let mut report = SimReport::new("sample_voronoi_cells", cfg.seed, cfg);
    // batch means over 20 consecutive blocks for the mean intervals
    let batch = |v: &[f64]| {
        let size = (v.len() / 20).max(1);
        let means: Vec<f64> = v.chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        mean_ci99(&means)
    };
    let (m, ci) = batch(&typical);
    report.insert("mean_typical", Estimate::new(m, ci, typical.len()));
    let (m, ci) = batch(&user_weighted);
    report.insert("mean_user", Estimate::new(m, ci, user_weighted.len()));
    typical.sort_by(f64::total_cmp);
    user_weighted.sort_by(f64::total_cmp);
    report.insert("ks_typical", Estimate::exact(ks_distance(&typical, typical_cell_cdf), typical.len()));
    report.insert("ks_user", Estimate::exact(ks_distance(&user_weighted, user_cell_cdf), user_weighted.len()));
    Ok(report)
}
