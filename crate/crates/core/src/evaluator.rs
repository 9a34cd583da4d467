//! Template scoring: page utility, value, weight, value-per-weight and knapsack value increment.
//!
//! All sums run in slot order starting from `0.0`. The beam search accumulates the very same
//! terms in the very same order, which makes its scores bit-identical to the ones computed here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ensure_feasible, rpp_assignment, Candidate, ExposureTemplate, Request, SlotExposureModel,
};

/// Value, weight, value-per-weight and knapsack value increment of one template.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TemplateScore {
    pub value: f64,
    pub weight: f64,
    pub kvi: f64,
    pub vpw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffParams {
    /// Exchange rate of recommendation utility into ad utility.
    pub alpha: f64,
    /// Current value-per-weight screening threshold.
    pub rho_thres: f64,
}

impl TradeoffParams {
    pub fn new(alpha: f64, rho_thres: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if rho_thres.is_nan() {
            return Err(Error::InvalidInput("rho_thres is NaN".into()));
        }
        Ok(TradeoffParams { alpha, rho_thres })
    }
}

/// Mixed utility of one candidate before position discounting.
#[inline]
pub fn slot_utility(c: &Candidate, alpha: f64) -> f64 {
    c.utility_ad + alpha * c.utility_rec
}

/// Exposure-discounted mixed utility of the page produced by `t`.
pub fn page_utility(
    r: &Request,
    t: &ExposureTemplate,
    q: &SlotExposureModel,
    alpha: f64,
) -> Result<f64> {
    ensure_feasible(r, t)?;
    q.check_len(r.page_length())?;
    Ok(rpp_assignment(r, t).fold(0.0, |acc, (slot, c)| {
        acc + q.at(slot) * slot_utility(c, alpha)
    }))
}

/// Utility gained over the all-organic page.
pub fn request_value(
    r: &Request,
    t: &ExposureTemplate,
    q: &SlotExposureModel,
    alpha: f64,
) -> Result<f64> {
    let with_ads = page_utility(r, t, q, alpha)?;
    let without = page_utility(r, &ExposureTemplate::no_ads(r.page_length()), q, alpha)?;
    Ok(with_ads - without)
}

/// Expected ad exposures of the page produced by `t`.
pub fn request_weight(r: &Request, t: &ExposureTemplate, q: &SlotExposureModel) -> Result<f64> {
    ensure_feasible(r, t)?;
    q.check_len(r.page_length())?;
    Ok(template_weight(t, q))
}

pub(crate) fn template_weight(t: &ExposureTemplate, q: &SlotExposureModel) -> f64 {
    t.slots()
        .iter()
        .enumerate()
        .filter(|(_, &is_ad)| is_ad)
        .fold(0.0, |acc, (i, _)| acc + q.at(i + 1))
}

/// Value per weight; zero when the weight is zero.
pub fn vpw(value: f64, weight: f64) -> Result<f64> {
    if weight < 0.0 {
        return Err(Error::NegativeWeight(weight));
    }
    Ok(if weight > 0.0 { value / weight } else { 0.0 })
}

/// Knapsack value increment: value net of the capacity it consumes at the current threshold.
#[inline]
pub fn kvi(value: f64, weight: f64, rho_thres: f64) -> f64 {
    value - rho_thres * weight
}

pub(crate) fn score_from_parts(value: f64, weight: f64, rho_thres: f64) -> TemplateScore {
    TemplateScore {
        value,
        weight,
        kvi: kvi(value, weight, rho_thres),
        vpw: if weight > 0.0 { value / weight } else { 0.0 },
    }
}

pub fn score_template(
    r: &Request,
    t: &ExposureTemplate,
    q: &SlotExposureModel,
    params: &TradeoffParams,
) -> Result<TemplateScore> {
    let value = request_value(r, t, q, params.alpha)?;
    let weight = request_weight(r, t, q)?;
    Ok(score_from_parts(value, weight, params.rho_thres))
}
