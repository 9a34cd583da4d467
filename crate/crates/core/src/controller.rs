//! Feedback control of the value-per-weight threshold.
//!
//! Expected (exposure-probability weighted) ad and total exposures are accumulated over a window
//! of `window_size` requests. At the window boundary the threshold is scaled by
//! `1 + gamma * (m_window / m_star - 1)` and clamped to `[rho_min, rho_max]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MergedPage, SlotExposureModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub target_m_star: f64,
    pub learning_rate: f64,
    /// Requests per update.
    pub window_size: usize,
    pub rho_min: f64,
    /// Upper clamp as a multiple of the initial threshold.
    pub rho_max_factor: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            target_m_star: 0.10,
            learning_rate: 0.1,
            window_size: 2000,
            rho_min: 0.0,
            rho_max_factor: 1e6,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_m_star > 0.0 && self.target_m_star < 1.0) {
            return Err(Error::config(
                "controller.target_m_star",
                format!("must lie in (0, 1), got {}", self.target_m_star),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "controller.learning_rate",
                format!("must be > 0, got {}", self.learning_rate),
            ));
        }
        if self.window_size == 0 {
            return Err(Error::config("controller.window_size", "must be > 0"));
        }
        if !(self.rho_min >= 0.0) {
            return Err(Error::config("controller.rho_min", "must be >= 0"));
        }
        if !(self.rho_max_factor >= 1.0) {
            return Err(Error::config("controller.rho_max_factor", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window_index: usize,
    pub realized_m: f64,
    pub rho_before: f64,
    pub rho_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub rho_thres: f64,
    pub target_m_star: f64,
    pub learning_rate: f64,
    pub window_size: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub window_ad_exposures: f64,
    pub window_total_exposures: f64,
    pub requests_in_window: usize,
    pub windows_completed: usize,
}

impl ControllerState {
    pub fn new(initial_rho: f64, cfg: &ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        if !(initial_rho > 0.0 && initial_rho.is_finite()) {
            return Err(Error::config(
                "controller.initial_rho",
                format!("must be finite and > 0 for a multiplicative update, got {initial_rho}"),
            ));
        }
        let rho_max = initial_rho * cfg.rho_max_factor;
        Ok(ControllerState {
            rho_thres: initial_rho.clamp(cfg.rho_min, rho_max),
            target_m_star: cfg.target_m_star,
            learning_rate: cfg.learning_rate,
            window_size: cfg.window_size,
            rho_min: cfg.rho_min,
            rho_max,
            window_ad_exposures: 0.0,
            window_total_exposures: 0.0,
            requests_in_window: 0,
            windows_completed: 0,
        })
    }

    /// Adds one served page's expected exposures to the current window.
    pub fn observe(&mut self, page: &MergedPage<'_>, q: &SlotExposureModel) {
        let mut ad = 0.0;
        let mut total = 0.0;
        for &(slot, c) in &page.entries {
            let p = q.at(slot);
            total += p;
            if c.is_ad() {
                ad += p;
            }
        }
        self.observe_exposures(ad, total);
    }

    pub fn observe_exposures(&mut self, ad_exposures: f64, total_exposures: f64) {
        self.window_ad_exposures += ad_exposures;
        self.window_total_exposures += total_exposures;
        self.requests_in_window += 1;
    }

    /// Applies the proportional update once the window is full.
    pub fn maybe_update(&mut self) -> Option<WindowReport> {
        if self.requests_in_window < self.window_size {
            return None;
        }
        let rho_before = self.rho_thres;
        let realized_m = if self.window_total_exposures > 0.0 {
            self.window_ad_exposures / self.window_total_exposures
        } else {
            0.0
        };
        // empty window: keep rho
        if self.window_total_exposures > 0.0 {
            let factor = 1.0 + self.learning_rate * (realized_m / self.target_m_star - 1.0);
            self.rho_thres = (rho_before * factor).clamp(self.rho_min, self.rho_max);
        }
        let report = WindowReport {
            window_index: self.windows_completed,
            realized_m,
            rho_before,
            rho_after: self.rho_thres,
        };
        self.window_ad_exposures = 0.0;
        self.window_total_exposures = 0.0;
        self.requests_in_window = 0;
        self.windows_completed += 1;
        Some(report)
    }
}

/// Knapsack capacity: the ad exposures a target monetization rate allows.
pub fn capacity(total_expected_exposures: f64, m_star: f64) -> f64 {
    m_star * total_expected_exposures
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::request;
    use crate::model::{merge_rpp, ExposureTemplate, RequestConstraints};
    use proptest::prelude::*;

    fn cfg(window: usize) -> ControllerConfig {
        ControllerConfig {
            target_m_star: 0.10,
            learning_rate: 0.1,
            window_size: window,
            ..ControllerConfig::default()
        }
    }

    #[test]
    fn observe_accumulates_expected_exposures() {
        let c = RequestConstraints::new(4, 1, 1).unwrap();
        let r = request(c, &[1.0; 4], &[(1.0, 0.0), (1.0, 0.0)]);
        let q = SlotExposureModel::geometric(4, 0.5).unwrap();
        let mut s = ControllerState::new(1.0, &cfg(10)).unwrap();

        let plain = merge_rpp(&r, &ExposureTemplate::no_ads(4)).unwrap();
        s.observe(&plain, &q);
        assert_eq!(s.window_ad_exposures, 0.0);
        assert_eq!(s.window_total_exposures, 1.875);

        let t = ExposureTemplate::from_ad_positions(4, &[2, 4]).unwrap();
        let page = merge_rpp(&r, &t).unwrap();
        s.observe(&page, &q);
        assert_eq!(s.window_ad_exposures, 0.625);
        assert_eq!(s.window_total_exposures, 3.75);
        assert_eq!(s.requests_in_window, 2);
    }

    #[test]
    fn update_follows_relative_error() {
        let mut s = ControllerState::new(2.0, &cfg(1)).unwrap();
        s.observe_exposures(0.12, 1.0);
        let report = s.maybe_update().unwrap();
        assert!((report.rho_after - 2.04).abs() < 1e-12);
        assert_eq!(report.rho_before, 2.0);
        assert_eq!(s.requests_in_window, 0);
        assert_eq!(s.window_total_exposures, 0.0);

        s.observe_exposures(0.1, 1.0);
        let r = s.maybe_update().unwrap();
        assert_eq!(r.rho_after, r.rho_before);

        s.observe_exposures(0.05, 1.0);
        let r = s.maybe_update().unwrap();
        assert!(r.rho_after < r.rho_before);
        assert_eq!(r.window_index, 2);
    }

    #[test]
    fn no_update_before_window_fills() {
        let mut s = ControllerState::new(2.0, &cfg(3)).unwrap();
        s.observe_exposures(1.0, 1.0);
        s.observe_exposures(1.0, 1.0);
        assert!(s.maybe_update().is_none());
        assert_eq!(s.rho_thres, 2.0);
    }

    #[test]
    fn empty_window_keeps_threshold() {
        let mut s = ControllerState::new(2.0, &cfg(1)).unwrap();
        s.observe_exposures(0.0, 0.0);
        let r = s.maybe_update().unwrap();
        assert_eq!(r.realized_m, 0.0);
        assert_eq!(r.rho_after, 2.0);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(1);
        c.target_m_star = 0.0;
        assert!(matches!(ControllerState::new(1.0, &c), Err(Error::Config { .. })));
        assert!(ControllerState::new(0.0, &cfg(1)).is_err());
        let mut c = cfg(1);
        c.window_size = 0;
        assert!(ControllerState::new(1.0, &c).is_err());
    }

    #[test]
    fn capacity_is_share_of_exposures() {
        assert_eq!(capacity(0.0, 0.1), 0.0);
        assert!((capacity(10000.0, 0.10) - 1000.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn threshold_moves_with_error_and_stays_clamped(
            initial in 0.01f64..100.0,
            gamma in 0.01f64..3.0,
            windows in prop::collection::vec((0.0f64..1.0, 0.0f64..5.0), 1..40),
        ) {
            let c = ControllerConfig { learning_rate: gamma, window_size: 1, rho_max_factor: 50.0, ..cfg(1) };
            let mut s = ControllerState::new(initial, &c).unwrap();
            for (share, total) in windows {
                s.observe_exposures(share * total, total);
                let r = s.maybe_update().unwrap();
                prop_assert!(r.rho_after >= s.rho_min && r.rho_after <= s.rho_max);
                let clamped = r.rho_after == s.rho_min || r.rho_after == s.rho_max;
                if total > 0.0 && !clamped && r.rho_before > 0.0 {
                    let err = r.realized_m - c.target_m_star;
                    let moved = r.rho_after - r.rho_before;
                    if err > 1e-12 { prop_assert!(moved > 0.0); }
                    if err < -1e-12 { prop_assert!(moved < 0.0); }
                }
            }
        }

        #[test]
        fn observations_commute(xs in prop::collection::vec((0.0f64..1.0, 1.0f64..2.0), 1..20)) {
            let mut a = ControllerState::new(1.0, &cfg(1000)).unwrap();
            let mut b = a.clone();
            for &(ad, tot) in &xs { a.observe_exposures(ad, tot); }
            for &(ad, tot) in xs.iter().rev() { b.observe_exposures(ad, tot); }
            prop_assert!((a.window_ad_exposures - b.window_ad_exposures).abs() < 1e-9);
            prop_assert!((a.window_total_exposures - b.window_total_exposures).abs() < 1e-9);
            prop_assert_eq!(a.requests_in_window, b.requests_in_window);
        }
    }
}
