//! Run-level metric aggregation and reporting helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MergedPage, RequestConstraints, SlotExposureModel};
use crate::simulator::user::UserEvent;

/// Share of exposed ads whose slot falls in `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionBucket {
    pub start: usize,
    pub end: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdPositionReport {
    pub buckets: Vec<PositionBucket>,
    pub average_position: f64,
    pub ad_exposures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub strategy: String,
    pub alpha: f64,
    pub beam_size: Option<usize>,
    pub m_star: f64,
    pub requests: u64,
    pub rev: f64,
    pub gmv: f64,
    pub clk: u64,
    /// Realized exposures: total scroll depth.
    pub exposures: u64,
    pub ctr: f64,
    pub expected_m: f64,
    pub realized_m: f64,
    pub avg_ad_position: f64,
    pub ad_position_histogram: Vec<PositionBucket>,
    /// Analytic revenue and GMV of the served pages.
    pub expected_rev: f64,
    pub expected_gmv: f64,
    /// Calibrated knob: `beta` for the blends, final threshold for the searched strategy.
    pub knob: Option<f64>,
}

/// Order-preserving accumulator; feeding the same events in the same order is bit-reproducible.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    constraints: Option<RequestConstraints>,
    requests: u64,
    rev: f64,
    gmv: f64,
    clk: u64,
    exposures: u64,
    ad_exposures: u64,
    expected_ad: f64,
    expected_total: f64,
    expected_rev: f64,
    expected_gmv: f64,
    ad_slot_counts: Vec<u64>,
}

/// Expected quantities of one served page.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PageExpectation {
    pub ad_exposures: f64,
    pub total_exposures: f64,
    pub revenue: f64,
    pub gmv: f64,
}

impl PageExpectation {
    pub fn of(page: &MergedPage<'_>, q: &SlotExposureModel) -> Self {
        let mut e = PageExpectation::default();
        for &(slot, c) in &page.entries {
            let p = q.at(slot);
            e.total_exposures += p;
            if c.is_ad() {
                e.ad_exposures += p;
                e.revenue += p * c.pctr * c.price_per_click;
            }
            e.gmv += p * c.pctr * c.pcvr * c.item_price;
        }
        e
    }
}

impl Default for MetricsAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        MetricsAccumulator {
            constraints: None,
            requests: 0,
            rev: 0.0,
            gmv: 0.0,
            clk: 0,
            exposures: 0,
            ad_exposures: 0,
            expected_ad: 0.0,
            expected_total: 0.0,
            expected_rev: 0.0,
            expected_gmv: 0.0,
            ad_slot_counts: Vec::new(),
        }
    }

    pub fn add(&mut self, c: &RequestConstraints, event: &UserEvent, expectation: &PageExpectation) {
        self.constraints.get_or_insert(*c);
        self.requests += 1;
        self.rev += event.revenue;
        self.gmv += event.gmv;
        self.clk += event.clicks.len() as u64;
        self.exposures += event.scroll_depth as u64;
        self.ad_exposures += event.ad_slots.len() as u64;
        for &slot in &event.ad_slots {
            if self.ad_slot_counts.len() < slot {
                self.ad_slot_counts.resize(slot, 0);
            }
            self.ad_slot_counts[slot - 1] += 1;
        }
        self.expected_ad += expectation.ad_exposures;
        self.expected_total += expectation.total_exposures;
        self.expected_rev += expectation.revenue;
        self.expected_gmv += expectation.gmv;
    }

    pub fn finish(&self, strategy: &str, alpha: f64, beam_size: Option<usize>, m_star: f64) -> RunMetrics {
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        let positions = self
            .constraints
            .and_then(|c| report_from_counts(&self.ad_slot_counts, &c));
        RunMetrics {
            strategy: strategy.to_string(),
            alpha,
            beam_size,
            m_star,
            requests: self.requests,
            rev: self.rev,
            gmv: self.gmv,
            clk: self.clk,
            exposures: self.exposures,
            ctr: ratio(self.clk as f64, self.exposures as f64),
            expected_m: ratio(self.expected_ad, self.expected_total),
            realized_m: ratio(self.ad_exposures as f64, self.exposures as f64),
            avg_ad_position: positions.as_ref().map_or(0.0, |p| p.average_position),
            ad_position_histogram: positions.map(|p| p.buckets).unwrap_or_default(),
            expected_rev: self.expected_rev,
            expected_gmv: self.expected_gmv,
            knob: None,
        }
    }
}

fn report_from_counts(counts: &[u64], c: &RequestConstraints) -> Option<AdPositionReport> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let width = c.min_ad_gap;
    let origin = c.top_ad_slot.min(c.page_length);
    let last = c.page_length.max(counts.len());
    let mut buckets = Vec::new();
    let mut start = origin;
    while start <= last {
        let end = (start + width - 1).min(last);
        let n: u64 = (start..=end).filter_map(|s| counts.get(s - 1)).sum();
        buckets.push(PositionBucket {
            start,
            end,
            share: n as f64 / total as f64,
        });
        start += width;
    }
    let early: u64 = counts.iter().take(origin - 1).sum();
    if early > 0 {
        buckets.insert(
            0,
            PositionBucket {
                start: 1,
                end: origin - 1,
                share: early as f64 / total as f64,
            },
        );
    }
    let weighted: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (i + 1) as f64 * n as f64)
        .sum();
    Some(AdPositionReport {
        buckets,
        average_position: weighted / total as f64,
        ad_exposures: total,
    })
}

/// Ad-exposure distribution over slot buckets of width `min_ad_gap`, starting at the top ad slot.
/// Returns `None` when no ad was exposed.
pub fn ad_position_report(events: &[UserEvent], c: &RequestConstraints) -> Option<AdPositionReport> {
    let mut counts = vec![0u64; c.page_length];
    for ev in events {
        for &slot in &ev.ad_slots {
            if counts.len() < slot {
                counts.resize(slot, 0);
            }
            counts[slot - 1] += 1;
        }
    }
    report_from_counts(&counts, c)
}

/// Relative advantage over a baseline metric, in percent.
pub fn advantage(metric: f64, baseline_metric: f64) -> Result<f64> {
    if !(baseline_metric > 0.0) {
        return Err(Error::ZeroBaseline {
            metric: "baseline".into(),
            value: baseline_metric,
        });
    }
    Ok((metric - baseline_metric) / baseline_metric * 100.0)
}
