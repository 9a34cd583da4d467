//! Domain types shared by the evaluator, the search, the baselines and the simulator.
//!
//! Slot indices are 1-based throughout: slot `l` of a page of length `L` satisfies `1 <= l <= L`.
//! Every type validates its structural invariants at construction, so downstream code may assume
//! well-formed inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CandidateId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Organic,
    Ad,
}

/// One pre-scored item coming out of the recommendation or the advertising ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub kind: CandidateKind,
    /// Position in the source list, starting at 1.
    pub upstream_rank: u32,
    /// Expected recommendation-side utility (GMV-like units).
    pub utility_rec: f64,
    /// Expected advertising-side utility (revenue units); zero for organics.
    pub utility_ad: f64,
    pub pctr: f64,
    pub pcvr: f64,
    pub item_price: f64,
    /// Charge per click fixed by the upstream auction; zero for organics.
    pub price_per_click: f64,
}

impl Candidate {
    pub fn is_ad(&self) -> bool {
        self.kind == CandidateKind::Ad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidInput(format!(
                "candidate {} ({:?}): {reason}",
                self.id, self.kind
            )))
        };
        let non_negative = [
            ("utility_rec", self.utility_rec),
            ("utility_ad", self.utility_ad),
            ("item_price", self.item_price),
            ("price_per_click", self.price_per_click),
        ];
        for (name, value) in non_negative {
            if !value.is_finite() || value < 0.0 {
                return bad(&format!("{name} must be finite and non-negative, got {value}"));
            }
        }
        for (name, value) in [("pctr", self.pctr), ("pcvr", self.pcvr)] {
            if !(0.0..=1.0).contains(&value) {
                return bad(&format!("{name} must lie in [0, 1], got {value}"));
            }
        }
        if self.upstream_rank == 0 {
            return bad("upstream_rank starts at 1");
        }
        if self.kind == CandidateKind::Organic
            && (self.utility_ad != 0.0 || self.price_per_click != 0.0)
        {
            return bad("organic candidates carry no ad utility or click price");
        }
        Ok(())
    }
}

/// Request-level position constraints: top ad slot and minimum ad gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestConstraints {
    pub page_length: usize,
    /// Earliest slot an ad may occupy. Values above `page_length` are legal and forbid ads.
    pub top_ad_slot: usize,
    /// Minimum index distance between two adjacent ads.
    pub min_ad_gap: usize,
}

impl RequestConstraints {
    pub fn new(page_length: usize, top_ad_slot: usize, min_ad_gap: usize) -> Result<Self> {
        let c = RequestConstraints {
            page_length,
            top_ad_slot,
            min_ad_gap,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.page_length == 0 || self.top_ad_slot == 0 || self.min_ad_gap == 0 {
            return Err(Error::InvalidInput(format!(
                "page_length, top_ad_slot and min_ad_gap must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Whether an ad may be placed at `slot` given the previous ad position.
    #[inline]
    pub fn ad_allowed_at(&self, slot: usize, last_ad: Option<usize>) -> bool {
        slot >= self.top_ad_slot
            && slot <= self.page_length
            && last_ad.is_none_or(|prev| slot - prev >= self.min_ad_gap)
    }

    /// Largest number of ads any feasible template can hold (ignoring ad supply).
    pub fn max_ads(&self) -> usize {
        if self.top_ad_slot > self.page_length {
            0
        } else {
            (self.page_length - self.top_ad_slot) / self.min_ad_gap + 1
        }
    }
}

/// One user request: two upstream-ranked candidate lists and the constraints for the page.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub request_id: u64,
    pub rec_list: Vec<Candidate>,
    pub ad_list: Vec<Candidate>,
    pub constraints: RequestConstraints,
}

impl Request {
    pub fn new(
        request_id: u64,
        rec_list: Vec<Candidate>,
        ad_list: Vec<Candidate>,
        constraints: RequestConstraints,
    ) -> Result<Self> {
        let r = Request {
            request_id,
            rec_list,
            ad_list,
            constraints,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn page_length(&self) -> usize {
        self.constraints.page_length
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        let id = self.request_id;
        if self.rec_list.len() < self.constraints.page_length {
            return Err(Error::InvalidInput(format!(
                "request {id}: rec_list has {} organics, page needs {}",
                self.rec_list.len(),
                self.constraints.page_length
            )));
        }
        for (list, kind, name) in [
            (&self.rec_list, CandidateKind::Organic, "rec_list"),
            (&self.ad_list, CandidateKind::Ad, "ad_list"),
        ] {
            for (i, c) in list.iter().enumerate() {
                c.validate()?;
                if c.kind != kind {
                    return Err(Error::InvalidInput(format!(
                        "request {id}: {name}[{i}] has kind {:?}",
                        c.kind
                    )));
                }
                if c.upstream_rank as usize != i + 1 {
                    return Err(Error::InvalidInput(format!(
                        "request {id}: {name}[{i}] has upstream_rank {}, expected {}",
                        c.upstream_rank,
                        i + 1
                    )));
                }
            }
        }
        let mut ids: Vec<CandidateId> = self
            .rec_list
            .iter()
            .chain(&self.ad_list)
            .map(|c| c.id)
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "request {id}: duplicate candidate ids"
            )));
        }
        Ok(())
    }
}

/// Slot labeling of a page: `true` marks an ad slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExposureTemplate {
    slots: Vec<bool>,
}

impl ExposureTemplate {
    pub fn from_slots(slots: Vec<bool>) -> Self {
        ExposureTemplate { slots }
    }

    /// The all-organic template.
    pub fn no_ads(page_length: usize) -> Self {
        ExposureTemplate {
            slots: vec![false; page_length],
        }
    }

    /// Builds a template from 1-based ad positions.
    pub fn from_ad_positions(page_length: usize, positions: &[usize]) -> Result<Self> {
        let mut slots = vec![false; page_length];
        for &p in positions {
            if p == 0 || p > page_length {
                return Err(Error::InvalidInput(format!(
                    "ad position {p} outside 1..={page_length}"
                )));
            }
            slots[p - 1] = true;
        }
        Ok(ExposureTemplate { slots })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[bool] {
        &self.slots
    }

    pub fn is_ad_slot(&self, slot: usize) -> bool {
        self.slots[slot - 1]
    }

    pub fn ad_count(&self) -> usize {
        self.slots.iter().filter(|&&s| s).count()
    }

    pub fn has_ads(&self) -> bool {
        self.slots.iter().any(|&s| s)
    }

    /// 1-based positions of the ad slots, ascending.
    pub fn ad_positions(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i + 1))
            .collect()
    }
}

impl fmt::Display for ExposureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.slots {
            f.write_str(if s { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Per-slot exposure probabilities, non-increasing from top to bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SlotExposureModel {
    q: Vec<f64>,
}

impl SlotExposureModel {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidInput("exposure model needs at least one slot".into()));
        }
        if q[0] > 1.0 || !q.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "exposure probabilities must lie in [0, 1], got {q:?}"
            )));
        }
        if q.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput(format!(
                "exposure probabilities must be non-increasing, got {q:?}"
            )));
        }
        Ok(SlotExposureModel { q })
    }

    /// `q_l = kappa^(l-1)` for `l = 1..=page_length`.
    pub fn geometric(page_length: usize, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidInput(format!("kappa must lie in [0, 1], got {kappa}")));
        }
        Self::new((0..page_length).map(|i| kappa.powi(i as i32)).collect())
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Exposure probability of 1-based `slot`.
    #[inline]
    pub fn at(&self, slot: usize) -> f64 {
        self.q[slot - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    /// Expected exposures of a full page.
    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }

    pub(crate) fn check_len(&self, page_length: usize) -> Result<()> {
        if self.q.len() != page_length {
            return Err(Error::LengthMismatch {
                expected: page_length,
                found: self.q.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for SlotExposureModel {
    type Error = Error;

    fn try_from(q: Vec<f64>) -> Result<Self> {
        SlotExposureModel::new(q)
    }
}

impl From<SlotExposureModel> for Vec<f64> {
    fn from(m: SlotExposureModel) -> Self {
        m.q
    }
}

/// A blended page: the candidate shown at each slot, in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPage<'r> {
    pub request_id: u64,
    pub entries: Vec<(usize, &'r Candidate)>,
    pub template: ExposureTemplate,
}

impl<'r> MergedPage<'r> {
    pub fn ads(&self) -> impl Iterator<Item = (usize, &'r Candidate)> + '_ {
        self.entries.iter().copied().filter(|(_, c)| c.is_ad())
    }

    pub fn organics(&self) -> impl Iterator<Item = (usize, &'r Candidate)> + '_ {
        self.entries.iter().copied().filter(|(_, c)| !c.is_ad())
    }
}

/// Checks the three feasibility clauses: top ad slot, minimum ad gap, and ad supply.
pub fn validate_template(
    t: &ExposureTemplate,
    c: &RequestConstraints,
    ads_available: usize,
) -> Result<bool> {
    if t.len() != c.page_length {
        return Err(Error::LengthMismatch {
            expected: c.page_length,
            found: t.len(),
        });
    }
    let mut last_ad = None;
    let mut ads = 0usize;
    for (i, &is_ad) in t.slots().iter().enumerate() {
        if !is_ad {
            continue;
        }
        let slot = i + 1;
        if !c.ad_allowed_at(slot, last_ad) {
            return Ok(false);
        }
        last_ad = Some(slot);
        ads += 1;
    }
    Ok(ads <= ads_available)
}

pub(crate) fn ensure_feasible(r: &Request, t: &ExposureTemplate) -> Result<()> {
    if validate_template(t, &r.constraints, r.ad_list.len())? {
        Ok(())
    } else {
        Err(Error::InfeasibleTemplate {
            template: t.to_string(),
        })
    }
}

/// Candidates assigned to each slot under the rank-preserving rule: the k-th ad slot takes
/// `ad_list[k]`, the k-th organic slot takes `rec_list[k]`.
///
/// Callers must have checked feasibility; the iterator indexes the lists directly.
pub(crate) fn rpp_assignment<'r, 't>(
    r: &'r Request,
    t: &'t ExposureTemplate,
) -> impl Iterator<Item = (usize, &'r Candidate)> + 't
where
    'r: 't,
{
    let mut ads = r.ad_list.iter();
    let mut recs = r.rec_list.iter();
    t.slots().iter().enumerate().map(move |(i, &is_ad)| {
        let c = if is_ad { ads.next() } else { recs.next() };
        (i + 1, c.expect("feasible template never exhausts a list"))
    })
}

/// Merges the two upstream lists into the slots of `t`, preserving each list's order and
/// leaving every candidate (including its click price) untouched.
pub fn merge_rpp<'r>(r: &'r Request, t: &ExposureTemplate) -> Result<MergedPage<'r>> {
    ensure_feasible(r, t)?;
    let entries = rpp_assignment(r, t).collect();
    Ok(MergedPage {
        request_id: r.request_id,
        entries,
        template: t.clone(),
    })
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn organic(id: CandidateId, rank: u32, utility_rec: f64) -> Candidate {
        Candidate {
            id,
            kind: CandidateKind::Organic,
            upstream_rank: rank,
            utility_rec,
            utility_ad: 0.0,
            pctr: 0.05,
            pcvr: 0.02,
            item_price: 30.0,
            price_per_click: 0.0,
        }
    }

    pub fn ad(id: CandidateId, rank: u32, utility_ad: f64, utility_rec: f64) -> Candidate {
        Candidate {
            id,
            kind: CandidateKind::Ad,
            upstream_rank: rank,
            utility_rec,
            utility_ad,
            pctr: 0.04,
            pcvr: 0.02,
            item_price: 30.0,
            price_per_click: 0.5,
        }
    }

    /// Request with organics of the given rec utilities and ads of the given (ad, rec) utilities.
    pub fn request(
        c: RequestConstraints,
        recs: &[f64],
        ads: &[(f64, f64)],
    ) -> Request {
        let rec_list = recs
            .iter()
            .enumerate()
            .map(|(i, &u)| organic(i as u32, i as u32 + 1, u))
            .collect();
        let ad_list = ads
            .iter()
            .enumerate()
            .map(|(i, &(ua, ur))| ad(1000 + i as u32, i as u32 + 1, ua, ur))
            .collect();
        Request::new(7, rec_list, ad_list, c).unwrap()
    }
}
