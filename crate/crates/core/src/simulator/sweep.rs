//! Alpha sweeps and Pareto fronts over (revenue, GMV) advantages.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::simulator::metrics::{advantage, RunMetrics};
use crate::simulator::run::{Experiment, StrategyFamily};

/// Revenue/GMV advantages of one cell over the fixed baseline at the same target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    pub beam_size: Option<usize>,
    pub alpha: f64,
    pub m_star: f64,
    pub delta_rev_pct: f64,
    pub delta_gmv_pct: f64,
    pub realized_m: f64,
    pub expected_m: f64,
}

impl SweepRow {
    pub fn from_metrics(m: &RunMetrics, fixed: &RunMetrics) -> Result<Self> {
        Ok(SweepRow {
            strategy: m.strategy.clone(),
            beam_size: m.beam_size,
            alpha: m.alpha,
            m_star: m.m_star,
            delta_rev_pct: advantage(m.rev, fixed.rev)?,
            delta_gmv_pct: advantage(m.gmv, fixed.gmv)?,
            realized_m: m.realized_m,
            expected_m: m.expected_m,
        })
    }

    /// Strategy name including the beam size, e.g. `hca2e(B=5)`.
    pub fn series(&self) -> String {
        match self.beam_size {
            Some(b) => format!("{}(B={b})", self.strategy),
            None => self.strategy.clone(),
        }
    }
}

/// Runs every family at every alpha for one target; `on_cell` sees each finished cell.
/// The fixed baseline ignores alpha and runs once.
pub fn pareto_sweep(
    exp: &Experiment<'_>,
    alphas: &[f64],
    families: &[StrategyFamily],
    m_star: f64,
    mut on_cell: impl FnMut(StrategyFamily, f64, &RunMetrics) -> Result<()>,
) -> Result<Vec<SweepRow>> {
    pareto_sweep_with(alphas, families, m_star, |family, alpha| {
        let metrics = exp.run_cell(family, alpha, m_star, &mut ())?.metrics;
        on_cell(family, alpha, &metrics)?;
        Ok(metrics)
    })
}

/// Sweep driver over an arbitrary cell runner, e.g. one that caches finished cells.
pub fn pareto_sweep_with(
    alphas: &[f64],
    families: &[StrategyFamily],
    m_star: f64,
    mut cell: impl FnMut(StrategyFamily, f64) -> Result<RunMetrics>,
) -> Result<Vec<SweepRow>> {
    let fixed = cell(StrategyFamily::Fixed, alphas.first().copied().unwrap_or(1.0))?;
    let mut rows = Vec::with_capacity(alphas.len() * families.len());
    for &family in families {
        for &alpha in alphas {
            let metrics = if family == StrategyFamily::Fixed {
                RunMetrics {
                    alpha,
                    ..fixed.clone()
                }
            } else {
                cell(family, alpha)?
            };
            debug_assert_eq!(metrics.m_star, m_star);
            rows.push(SweepRow::from_metrics(&metrics, &fixed)?);
        }
    }
    Ok(rows)
}

/// Indices of the points not dominated by any other point, maximizing both coordinates,
/// sorted by the first coordinate.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let dominated = |i: usize| {
        let (a, b) = points[i];
        points
            .iter()
            .any(|&(x, y)| x >= a && y >= b && (x > a || y > b))
    };
    let mut front: Vec<usize> = (0..points.len()).filter(|&i| !dominated(i)).collect();
    front.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0).then(i.cmp(&j)));
    front.dedup_by(|a, b| points[*a] == points[*b]);
    front
}

/// Whether `point` lies on or below the piecewise-linear front through `front` (sorted by the
/// first coordinate), within `tolerance` on the second coordinate. Points to the right of the
/// front are never covered; points to the left are compared with the leftmost vertex.
pub fn front_covers(front: &[(f64, f64)], point: (f64, f64), tolerance: f64) -> bool {
    let (x, y) = point;
    if front.iter().any(|&(a, b)| a >= x && b >= y - tolerance) {
        return true;
    }
    front.windows(2).any(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x < x0 || x > x1 || x1 <= x0 {
            return false;
        }
        let t = (x - x0) / (x1 - x0);
        y0 + t * (y1 - y0) >= y - tolerance
    })
}
