//! Replaying a request stream through one exposure strategy.
//!
//! Requests are processed in chunks. Within a chunk every request sees the same threshold, so the
//! chunk is searched, merged and simulated in parallel; the results are then folded into the
//! metrics and the controller in stream order. With a controller the chunk is exactly one control
//! window, and the output is identical whatever the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    calibrate_beta, calibrate_fixed_positions, densest_template, expected_m, BaselineConfig,
    BaselineKind,
};
use crate::controller::{ControllerConfig, ControllerState, WindowReport};
use crate::error::{Error, Result};
use crate::evaluator::{template_weight, TradeoffParams};
use crate::model::{merge_rpp, ExposureTemplate, Request, SlotExposureModel};
use crate::search::{ets_search, finalize_template, SearchConfig};
use crate::simulator::generator::{GeneratorConfig, RequestGenerator};
use crate::simulator::metrics::{MetricsAccumulator, PageExpectation, RunMetrics};
use crate::simulator::user::{simulate_user, UserDraws, UserEvent};

/// Chunk length when no controller fixes it.
const DEFAULT_CHUNK: usize = 2000;

pub type RequestIter<'a> = Box<dyn Iterator<Item = Result<Request>> + Send + 'a>;

/// Anything that can replay the same request stream more than once.
pub trait RequestSource: Sync {
    fn open(&self) -> Result<RequestIter<'_>>;

    /// The first `n` requests of the stream.
    fn head(&self, n: usize) -> Result<Vec<Request>> {
        self.open()?.take(n).collect()
    }
}

impl RequestSource for [Request] {
    fn open(&self) -> Result<RequestIter<'_>> {
        Ok(Box::new(self.iter().cloned().map(Ok)))
    }
}

impl RequestSource for Vec<Request> {
    fn open(&self) -> Result<RequestIter<'_>> {
        self.as_slice().open()
    }
}

impl RequestSource for GeneratorConfig {
    fn open(&self) -> Result<RequestIter<'_>> {
        Ok(Box::new(RequestGenerator::new(self)?.map(Ok)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Hca2e {
        beam_size: usize,
        /// Threshold for the whole run, or the controller's starting point.
        rho_thres: f64,
        controller: Option<ControllerConfig>,
    },
    Baseline(BaselineConfig),
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Hca2e { .. } => "hca2e",
            Strategy::Baseline(b) => b.kind.label(),
        }
    }

    pub fn beam_size(&self) -> Option<usize> {
        match self {
            Strategy::Hca2e { beam_size, .. } => Some(*beam_size),
            Strategy::Baseline(_) => None,
        }
    }

    fn knob(&self) -> Option<f64> {
        match self {
            Strategy::Hca2e { rho_thres, .. } => Some(*rho_thres),
            Strategy::Baseline(b) if b.kind != BaselineKind::Fixed => Some(b.beta),
            Strategy::Baseline(_) => None,
        }
    }
}

/// The template `strategy` serves on `r` at threshold `rho`.
pub fn serve_template(
    strategy: &Strategy,
    r: &Request,
    q: &SlotExposureModel,
    alpha: f64,
    rho: f64,
) -> Result<ExposureTemplate> {
    match strategy {
        Strategy::Hca2e { beam_size, .. } => {
            let params = TradeoffParams::new(alpha, rho)?;
            let out = ets_search(r, q, &params, &SearchConfig::new(*beam_size)?)?;
            Ok(finalize_template(&out.template, &out.score, rho))
        }
        Strategy::Baseline(b) => b.template_for(r, alpha),
    }
}

/// One served request as seen by a [`RunObserver`].
#[derive(Debug, Clone)]
pub struct ServedRequest {
    pub template: ExposureTemplate,
    pub rho_thres: Option<f64>,
    pub expectation: PageExpectation,
    pub event: UserEvent,
}

pub trait RunObserver {
    fn on_request(&mut self, _request: &Request, _served: &ServedRequest) -> Result<()> {
        Ok(())
    }

    fn on_window(&mut self, _report: &WindowReport) -> Result<()> {
        Ok(())
    }
}

impl RunObserver for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub windows: Vec<WindowReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub alpha: f64,
    pub m_star: f64,
    /// Keys the simulated users; independent of the stream seed.
    pub user_seed: u64,
}

fn serve_chunk(
    chunk: &[Request],
    strategy: &Strategy,
    q: &SlotExposureModel,
    settings: &RunSettings,
    rho: f64,
) -> Result<Vec<ServedRequest>> {
    let has_rho = matches!(strategy, Strategy::Hca2e { .. });
    chunk
        .par_iter()
        .map(|r| {
            q.check_len(r.page_length())?;
            let template = serve_template(strategy, r, q, settings.alpha, rho)?;
            let page = merge_rpp(r, &template)?;
            let event = simulate_user(&page, q, &UserDraws::for_request(settings.user_seed, r.request_id));
            Ok(ServedRequest {
                expectation: PageExpectation::of(&page, q),
                rho_thres: has_rho.then_some(rho),
                template,
                event,
            })
        })
        .collect()
}

/// Serves every request of `stream`, simulating one user per request.
pub fn run(
    strategy: &Strategy,
    stream: impl Iterator<Item = Result<Request>>,
    q: &SlotExposureModel,
    settings: &RunSettings,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    let (mut controller, mut rho) = match strategy {
        Strategy::Hca2e {
            rho_thres,
            controller: Some(cfg),
            ..
        } => {
            let state = ControllerState::new(*rho_thres, cfg)?;
            let rho = state.rho_thres;
            (Some(state), rho)
        }
        Strategy::Hca2e { rho_thres, .. } => (None, *rho_thres),
        Strategy::Baseline(_) => (None, 0.0),
    };
    let chunk_len = controller.as_ref().map_or(DEFAULT_CHUNK, |c| c.window_size);
    let mut acc = MetricsAccumulator::new();
    let mut windows = Vec::new();
    let mut stream = stream.peekable();
    let mut chunk = Vec::with_capacity(chunk_len);
    while stream.peek().is_some() {
        chunk.clear();
        for r in stream.by_ref().take(chunk_len) {
            chunk.push(r?);
        }
        let served = serve_chunk(&chunk, strategy, q, settings, rho)?;
        for (r, s) in chunk.iter().zip(&served) {
            acc.add(&r.constraints, &s.event, &s.expectation);
            if let Some(ctl) = controller.as_mut() {
                ctl.observe_exposures(s.expectation.ad_exposures, s.expectation.total_exposures);
            }
            observer.on_request(r, s)?;
        }
        if let Some(ctl) = controller.as_mut() {
            if let Some(report) = ctl.maybe_update() {
                observer.on_window(&report)?;
                windows.push(report);
            }
            rho = ctl.rho_thres;
        }
    }
    let mut metrics = acc.finish(strategy.label(), settings.alpha, strategy.beam_size(), settings.m_star);
    metrics.knob = match strategy {
        Strategy::Hca2e { .. } => Some(rho),
        _ => strategy.knob(),
    };
    Ok(RunOutput { metrics, windows })
}

/// Expected monetization rate of HCA2E at a fixed threshold on `slice`.
pub fn hca2e_expected_m(
    slice: &[Request],
    q: &SlotExposureModel,
    alpha: f64,
    beam_size: usize,
    rho: f64,
) -> Result<f64> {
    let strategy = Strategy::Hca2e {
        beam_size,
        rho_thres: rho,
        controller: None,
    };
    let parts: Vec<(f64, f64)> = slice
        .par_iter()
        .map(|r| {
            q.check_len(r.page_length())?;
            let t = serve_template(&strategy, r, q, alpha, rho)?;
            Ok((template_weight(&t, q), q.total()))
        })
        .collect::<Result<_>>()?;
    let (ad, total) = parts
        .iter()
        .fold((0.0, 0.0), |(a, t), &(x, y)| (a + x, t + y));
    Ok(if total > 0.0 { ad / total } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoCalibration {
    pub rho_thres: f64,
    pub expected_m: f64,
    pub iterations: usize,
}

/// Bisection (on a log scale) for the threshold whose expected monetization rate on `slice`
/// matches `m_star` to `rel_tolerance`. Fails with [`Error::Unreachable`] when even a vanishing
/// threshold stays below the target.
pub fn calibrate_rho(
    slice: &[Request],
    q: &SlotExposureModel,
    alpha: f64,
    beam_size: usize,
    m_star: f64,
    rel_tolerance: f64,
    max_iterations: usize,
) -> Result<RhoCalibration> {
    let m_of = |rho: f64| hca2e_expected_m(slice, q, alpha, beam_size, rho);
    let close = |m: f64| (m - m_star).abs() <= rel_tolerance * m_star;
    let mut iterations = 0;

    let mut lo = 1.0;
    let mut m_lo = m_of(lo)?;
    while m_lo < m_star {
        if lo < 1e-15 {
            return Err(Error::Unreachable {
                target: m_star,
                achievable: m_lo,
            });
        }
        lo /= 16.0;
        m_lo = m_of(lo)?;
        iterations += 1;
    }
    let mut hi = lo;
    let mut m_hi = m_lo;
    while m_hi >= m_star {
        if close(m_hi) || hi > 1e15 {
            return Ok(RhoCalibration {
                rho_thres: hi,
                expected_m: m_hi,
                iterations,
            });
        }
        lo = hi;
        m_lo = m_hi;
        hi *= 16.0;
        m_hi = m_of(hi)?;
        iterations += 1;
    }
    // m(lo) >= m_star > m(hi)
    let mut best = if (m_lo - m_star).abs() <= (m_hi - m_star).abs() {
        (lo, m_lo)
    } else {
        (hi, m_hi)
    };
    for _ in 0..max_iterations {
        if close(best.1) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let m = m_of(mid)?;
        iterations += 1;
        if (m - m_star).abs() < (best.1 - m_star).abs() {
            best = (mid, m);
        }
        if m >= m_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RhoCalibration {
        rho_thres: best.0,
        expected_m: best.1,
        iterations,
    })
}

/// A strategy family before its ad-share knob is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyFamily {
    Fixed,
    Wpo,
    Gea,
    Hca2e { beam_size: usize },
}

impl StrategyFamily {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyFamily::Fixed => "fixed",
            StrategyFamily::Wpo => "wpo",
            StrategyFamily::Gea => "gea",
            StrategyFamily::Hca2e { .. } => "hca2e",
        }
    }

    pub fn beam_size(&self) -> Option<usize> {
        match self {
            StrategyFamily::Hca2e { beam_size } => Some(*beam_size),
            _ => None,
        }
    }

    /// Parses `fixed`, `wpo`, `gea` or `hca2e`; the latter takes `beam_size`.
    pub fn parse(name: &str, beam_size: usize) -> Result<Self> {
        match name {
            "fixed" => Ok(StrategyFamily::Fixed),
            "wpo" => Ok(StrategyFamily::Wpo),
            "gea" => Ok(StrategyFamily::Gea),
            "hca2e" => Ok(StrategyFamily::Hca2e { beam_size }),
            other => Err(Error::config(
                "strategies",
                format!("unknown strategy {other:?}; expected fixed, wpo, gea or hca2e"),
            )),
        }
    }
}

/// How knobs are fitted to the target monetization rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Calibration slice: this many requests from the head of the stream.
    pub requests: usize,
    pub beta_tolerance: f64,
    pub beta_max_iterations: usize,
    pub rho_rel_tolerance: f64,
    pub rho_max_iterations: usize,
    pub gea_gap_decay: f64,
    /// Explicit fixed positions; calibrated when empty.
    pub fixed_positions: Vec<usize>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            requests: 2000,
            beta_tolerance: 1e-3,
            beta_max_iterations: 40,
            rho_rel_tolerance: 1e-4,
            rho_max_iterations: 60,
            gea_gap_decay: 0.8,
            fixed_positions: Vec::new(),
        }
    }
}

/// Everything needed to run calibrated strategies on one stream.
pub struct Experiment<'s> {
    pub source: &'s dyn RequestSource,
    pub q: SlotExposureModel,
    pub user_seed: u64,
    pub calibration: CalibrationConfig,
    /// Controller settings for HCA2E; `target_m_star` is replaced by each cell's target.
    /// `None` runs HCA2E at its calibrated threshold without feedback.
    pub controller: Option<ControllerConfig>,
    slice: Vec<Request>,
}

impl<'s> Experiment<'s> {
    pub fn new(
        source: &'s dyn RequestSource,
        q: SlotExposureModel,
        user_seed: u64,
        calibration: CalibrationConfig,
        controller: Option<ControllerConfig>,
    ) -> Result<Self> {
        let slice = source.head(calibration.requests)?;
        if slice.is_empty() {
            return Err(Error::MissingInput("the request stream is empty".into()));
        }
        Ok(Experiment {
            source,
            q,
            user_seed,
            calibration,
            controller,
            slice,
        })
    }

    pub fn calibration_slice(&self) -> &[Request] {
        &self.slice
    }

    /// Fits the family's knob so its expected monetization rate on the slice meets `m_star`.
    pub fn calibrate(&self, family: StrategyFamily, alpha: f64, m_star: f64) -> Result<Strategy> {
        let cal = &self.calibration;
        let slice = &self.slice;
        match family {
            StrategyFamily::Fixed => {
                let positions = if cal.fixed_positions.is_empty() {
                    calibrate_fixed_positions(&slice[0].constraints, slice, &self.q, m_star)?
                } else {
                    cal.fixed_positions.clone()
                };
                Ok(Strategy::Baseline(BaselineConfig::fixed(positions)))
            }
            StrategyFamily::Wpo | StrategyFamily::Gea => {
                let kind = if family == StrategyFamily::Wpo {
                    BaselineKind::Wpo
                } else {
                    BaselineKind::Gea
                };
                let fit = calibrate_beta(
                    kind,
                    slice,
                    &self.q,
                    alpha,
                    cal.gea_gap_decay,
                    m_star,
                    cal.beta_tolerance,
                    cal.beta_max_iterations,
                )?;
                Ok(Strategy::Baseline(match kind {
                    BaselineKind::Gea => BaselineConfig::gea(fit.beta, cal.gea_gap_decay),
                    _ => BaselineConfig::wpo(fit.beta),
                }))
            }
            StrategyFamily::Hca2e { beam_size } => {
                let fit = calibrate_rho(
                    slice,
                    &self.q,
                    alpha,
                    beam_size,
                    m_star,
                    cal.rho_rel_tolerance,
                    cal.rho_max_iterations,
                )?;
                let controller = self.controller.map(|c| ControllerConfig {
                    target_m_star: m_star,
                    ..c
                });
                Ok(Strategy::Hca2e {
                    beam_size,
                    rho_thres: fit.rho_thres,
                    controller,
                })
            }
        }
    }

    pub fn run_strategy(
        &self,
        strategy: &Strategy,
        alpha: f64,
        m_star: f64,
        observer: &mut dyn RunObserver,
    ) -> Result<RunOutput> {
        let settings = RunSettings {
            alpha,
            m_star,
            user_seed: self.user_seed,
        };
        run(strategy, self.source.open()?, &self.q, &settings, observer)
    }

    /// Calibrates and runs one (strategy, alpha, m_star) cell.
    pub fn run_cell(
        &self,
        family: StrategyFamily,
        alpha: f64,
        m_star: f64,
        observer: &mut dyn RunObserver,
    ) -> Result<RunOutput> {
        let strategy = self.calibrate(family, alpha, m_star)?;
        self.run_strategy(&strategy, alpha, m_star, observer)
    }

    /// Largest expected monetization rate any strategy can reach on the slice.
    pub fn max_expected_m(&self) -> Result<f64> {
        expected_m(&self.slice, &self.q, |r| Ok(densest_template(r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RequestConstraints;

    fn small_cfg(n: usize) -> GeneratorConfig {
        GeneratorConfig {
            num_requests: n,
            page_length: 20,
            top_ad_slot: 3,
            min_ad_gap: 3,
            num_organics: 20,
            ..GeneratorConfig::default()
        }
    }

    fn settings() -> RunSettings {
        RunSettings {
            alpha: 0.5,
            m_star: 0.1,
            user_seed: 1,
        }
    }

    #[test]
    fn empty_stream_gives_zero_metrics() {
        let q = SlotExposureModel::geometric(20, 0.95).unwrap();
        let strategy = Strategy::Baseline(BaselineConfig::wpo(1.0));
        let out = run(&strategy, std::iter::empty(), &q, &settings(), &mut ()).unwrap();
        let m = out.metrics;
        assert_eq!((m.requests, m.rev, m.gmv, m.clk, m.exposures), (0, 0.0, 0.0, 0, 0));
        assert_eq!((m.ctr, m.realized_m, m.expected_m), (0.0, 0.0, 0.0));
        assert!(out.windows.is_empty());
    }

    #[test]
    fn infinite_threshold_serves_no_ads() {
        let cfg = small_cfg(300);
        let q = SlotExposureModel::geometric(20, 0.95).unwrap();
        let strategy = Strategy::Hca2e {
            beam_size: 3,
            rho_thres: f64::INFINITY,
            controller: None,
        };
        let out = run(&strategy, cfg.open().unwrap(), &q, &settings(), &mut ()).unwrap();
        assert_eq!(out.metrics.requests, 300);
        assert_eq!(out.metrics.rev, 0.0);
        assert_eq!(out.metrics.realized_m, 0.0);
        assert_eq!(out.metrics.expected_m, 0.0);
        assert!(out.metrics.gmv > 0.0);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let cfg = small_cfg(500);
        let q = SlotExposureModel::geometric(20, 0.95).unwrap();
        let exp = Experiment::new(&cfg, q, 5, CalibrationConfig::default(), Some(ControllerConfig {
            window_size: 100,
            ..ControllerConfig::default()
        }))
        .unwrap();
        let a = exp.run_cell(StrategyFamily::Hca2e { beam_size: 3 }, 0.5, 0.1, &mut ()).unwrap();
        let b = exp.run_cell(StrategyFamily::Hca2e { beam_size: 3 }, 0.5, 0.1, &mut ()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.windows.len(), 5);
    }

    #[test]
    fn calibration_hits_target_on_slice() {
        let cfg = small_cfg(400);
        let q = SlotExposureModel::geometric(20, 0.95).unwrap();
        let slice = cfg.head(400).unwrap();
        let fit = calibrate_rho(&slice, &q, 0.5, 3, 0.08, 1e-4, 60).unwrap();
        assert!((fit.expected_m - 0.08).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn unreachable_target_reports_ceiling() {
        let c = RequestConstraints::new(6, 2, 2).unwrap();
        let r = crate::model::testing::request(c, &[1.0; 6], &[(1.0, 0.0)]);
        let q = SlotExposureModel::new(vec![1.0; 6]).unwrap();
        let err = calibrate_rho(&[r], &q, 0.5, 2, 0.5, 1e-4, 60).unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
    }
}
