//! Comparison strategies: fixed ad positions and two joint-ranking blends with an ad-share knob.
//!
//! Both blends walk the page top to bottom and compare the heads of the two upstream lists.
//! The organic head scores `alpha * utility_rec`; the ad head scores
//! `beta * (utility_ad + alpha * utility_rec)`, multiplied for the gap-aware blend by
//! `gap_decay^(max(0, 2 * MAG - d))` where `d` is the distance to the previous ad. An ad whose
//! slot is forbidden by the constraints stays at the head and is retried at the next slot, so
//! each list keeps its upstream order. These are reconstructions of the published baselines,
//! not reproductions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{slot_utility, template_weight};
use crate::model::{validate_template, ExposureTemplate, Request, RequestConstraints, SlotExposureModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Fixed,
    Wpo,
    Gea,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Fixed => "fixed",
            BaselineKind::Wpo => "wpo",
            BaselineKind::Gea => "gea",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub fixed_positions: Vec<usize>,
    pub beta: f64,
    pub gea_gap_decay: f64,
}

impl BaselineConfig {
    pub fn fixed(positions: Vec<usize>) -> Self {
        BaselineConfig {
            kind: BaselineKind::Fixed,
            fixed_positions: positions,
            beta: 0.0,
            gea_gap_decay: 1.0,
        }
    }

    pub fn wpo(beta: f64) -> Self {
        BaselineConfig {
            kind: BaselineKind::Wpo,
            fixed_positions: Vec::new(),
            beta,
            gea_gap_decay: 1.0,
        }
    }

    pub fn gea(beta: f64, gap_decay: f64) -> Self {
        BaselineConfig {
            kind: BaselineKind::Gea,
            fixed_positions: Vec::new(),
            beta,
            gea_gap_decay: gap_decay,
        }
    }

    /// Template this baseline serves on `r`.
    pub fn template_for(&self, r: &Request, alpha: f64) -> Result<ExposureTemplate> {
        match self.kind {
            BaselineKind::Fixed => fixed_for_request(r, &self.fixed_positions),
            BaselineKind::Wpo => Ok(wpo_blend(r, self.beta, alpha)),
            BaselineKind::Gea => Ok(gea_blend(r, self.beta, alpha, self.gea_gap_decay)),
        }
    }
}

/// The fixed template for a page shape. Positions must satisfy the position constraints.
pub fn fixed_template(c: &RequestConstraints, positions: &[usize]) -> Result<ExposureTemplate> {
    let t = ExposureTemplate::from_ad_positions(c.page_length, positions)
        .map_err(|e| Error::config("baselines.fixed_positions", e.to_string()))?;
    if !validate_template(&t, c, positions.len())? {
        return Err(Error::config(
            "baselines.fixed_positions",
            format!("{positions:?} violate top ad slot {} / min ad gap {}", c.top_ad_slot, c.min_ad_gap),
        ));
    }
    Ok(t)
}

/// The fixed template restricted to the ads the request actually has: the first
/// `ad_list.len()` positions are kept.
pub fn fixed_for_request(r: &Request, positions: &[usize]) -> Result<ExposureTemplate> {
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    sorted.truncate(r.ad_list.len());
    fixed_template(&r.constraints, &sorted)
}

pub fn wpo_blend(r: &Request, beta: f64, alpha: f64) -> ExposureTemplate {
    blend(r, beta, alpha, 1.0)
}

pub fn gea_blend(r: &Request, beta: f64, alpha: f64, gap_decay: f64) -> ExposureTemplate {
    blend(r, beta, alpha, gap_decay)
}

fn blend(r: &Request, beta: f64, alpha: f64, gap_decay: f64) -> ExposureTemplate {
    let c = &r.constraints;
    let mut slots = Vec::with_capacity(c.page_length);
    let (mut ads, mut recs) = (0usize, 0usize);
    let mut last_ad = None;
    for slot in 1..=c.page_length {
        let mut take_ad = false;
        if ads < r.ad_list.len() && c.ad_allowed_at(slot, last_ad) {
            let penalty = match last_ad {
                Some(prev) => {
                    let shortfall = (2 * c.min_ad_gap).saturating_sub(slot - prev);
                    gap_decay.powi(shortfall as i32)
                }
                None => 1.0,
            };
            let ad_score = beta * slot_utility(&r.ad_list[ads], alpha) * penalty;
            let organic_score = slot_utility(&r.rec_list[recs], alpha);
            take_ad = ad_score > organic_score;
        }
        if take_ad {
            ads += 1;
            last_ad = Some(slot);
        } else {
            recs += 1;
        }
        slots.push(take_ad);
    }
    ExposureTemplate::from_slots(slots)
}

/// Densest feasible pattern: ads at `TAS, TAS + MAG, ...` while ads last.
pub fn densest_template(r: &Request) -> ExposureTemplate {
    let c = &r.constraints;
    let positions: Vec<usize> = (c.top_ad_slot..=c.page_length)
        .step_by(c.min_ad_gap)
        .take(r.ad_list.len())
        .collect();
    ExposureTemplate::from_ad_positions(c.page_length, &positions).expect("positions lie on the page")
}

/// Expected monetization rate of serving `template_of(r)` on every request of `slice`.
pub fn expected_m(
    slice: &[Request],
    q: &SlotExposureModel,
    mut template_of: impl FnMut(&Request) -> Result<ExposureTemplate>,
) -> Result<f64> {
    let mut ad = 0.0;
    let mut total = 0.0;
    for r in slice {
        q.check_len(r.page_length())?;
        let t = template_of(r)?;
        ad += template_weight(&t, q);
        total += q.total();
    }
    Ok(if total > 0.0 { ad / total } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCalibration {
    pub beta: f64,
    pub expected_m: f64,
    pub iterations: usize,
}

/// Bisection on `beta` until the slice's expected monetization rate is within `tolerance`
/// of `m_star`, or `max_iterations` halvings have been spent.
pub fn calibrate_beta(
    kind: BaselineKind,
    slice: &[Request],
    q: &SlotExposureModel,
    alpha: f64,
    gap_decay: f64,
    m_star: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<BetaCalibration> {
    let m_of = |beta: f64| -> Result<f64> {
        expected_m(slice, q, |r| {
            Ok(match kind {
                BaselineKind::Gea => gea_blend(r, beta, alpha, gap_decay),
                _ => wpo_blend(r, beta, alpha),
            })
        })
    };
    if kind == BaselineKind::Fixed {
        return Err(Error::config("baselines.kind", "fixed positions have no beta"));
    }
    if m_star <= 0.0 {
        return Ok(BetaCalibration {
            beta: 0.0,
            expected_m: 0.0,
            iterations: 0,
        });
    }
    let achievable = expected_m(slice, q, |r| Ok(densest_template(r)))?;
    if m_star > achievable + tolerance {
        return Err(Error::Unreachable {
            target: m_star,
            achievable,
        });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut m_hi = m_of(hi)?;
    let mut expansions = 0;
    while m_hi < m_star - tolerance {
        lo = hi;
        hi *= 2.0;
        m_hi = m_of(hi)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Unreachable {
                target: m_star,
                achievable: m_hi,
            });
        }
    }
    if (m_hi - m_star).abs() <= tolerance {
        return Ok(BetaCalibration {
            beta: hi,
            expected_m: m_hi,
            iterations: 0,
        });
    }
    let mut best = (hi, m_hi);
    for iteration in 1..=max_iterations {
        let mid = 0.5 * (lo + hi);
        let m = m_of(mid)?;
        if (m - m_star).abs() < (best.1 - m_star).abs() {
            best = (mid, m);
        }
        if (m - m_star).abs() <= tolerance {
            return Ok(BetaCalibration {
                beta: mid,
                expected_m: m,
                iterations: iteration,
            });
        }
        if m < m_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaCalibration {
        beta: best.0,
        expected_m: best.1,
        iterations: max_iterations,
    })
}

/// Picks evenly spaced fixed positions `start, start + period, ...` whose expected monetization
/// rate on `slice` is closest to `m_star`.
pub fn calibrate_fixed_positions(
    c: &RequestConstraints,
    slice: &[Request],
    q: &SlotExposureModel,
    m_star: f64,
) -> Result<Vec<usize>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in c.top_ad_slot..=c.page_length {
        for period in c.min_ad_gap..=c.page_length {
            let positions: Vec<usize> = (start..=c.page_length).step_by(period).collect();
            let m = expected_m(slice, q, |r| fixed_for_request(r, &positions))?;
            let err = (m - m_star).abs();
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, positions));
            }
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::request;

    #[test]
    fn fixed_positions_validation() {
        let c = RequestConstraints::new(50, 5, 4).unwrap();
        let t = fixed_template(&c, &[5, 15, 25, 35, 45]).unwrap();
        assert_eq!(t.ad_positions(), vec![5, 15, 25, 35, 45]);
        assert!(matches!(fixed_template(&c, &[3, 15]), Err(Error::Config { .. })));
        assert!(fixed_template(&c, &[5, 7]).is_err());
        assert_eq!(fixed_template(&c, &[]).unwrap(), ExposureTemplate::no_ads(50));
    }

    #[test]
    fn fixed_truncates_to_available_ads() {
        let c = RequestConstraints::new(10, 2, 3).unwrap();
        let r = request(c, &[1.0; 10], &[(1.0, 0.0)]);
        let t = fixed_for_request(&r, &[2, 5, 8]).unwrap();
        assert_eq!(t.ad_positions(), vec![2]);
    }

    #[test]
    fn beta_extremes() {
        let c = RequestConstraints::new(12, 3, 2).unwrap();
        let r = request(
            c,
            &[1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01],
            &[(0.3, 0.1), (0.2, 0.1), (0.1, 0.1), (0.05, 0.0)],
        );
        assert_eq!(wpo_blend(&r, 0.0, 0.5), ExposureTemplate::no_ads(12));
        assert_eq!(gea_blend(&r, 0.0, 0.5, 0.5), ExposureTemplate::no_ads(12));
        let dense = wpo_blend(&r, 1e9, 0.5);
        assert_eq!(dense.ad_positions(), vec![3, 5, 7, 9]);
        assert_eq!(dense, densest_template(&r));
    }

    #[test]
    fn gap_decay_one_matches_wpo() {
        let c = RequestConstraints::new(12, 2, 2).unwrap();
        let r = request(
            c,
            &[0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05, 0.02, 0.01],
            &[(0.2, 0.1), (0.4, 0.0), (0.1, 0.2)],
        );
        for beta in [0.5, 1.0, 2.0, 4.0] {
            assert_eq!(wpo_blend(&r, beta, 0.7), gea_blend(&r, beta, 0.7, 1.0));
        }
    }

    #[test]
    fn deferred_ad_keeps_order() {
        let c = RequestConstraints::new(6, 3, 1).unwrap();
        let r = request(c, &[0.1; 6], &[(5.0, 0.0), (4.0, 0.0)]);
        // ads win every comparison but may not appear before slot 3
        assert_eq!(wpo_blend(&r, 1.0, 1.0).ad_positions(), vec![3, 4]);
    }

    #[test]
    fn fixed_calibration_hits_target() {
        let c = RequestConstraints::new(50, 5, 4).unwrap();
        let q = SlotExposureModel::geometric(50, 0.95).unwrap();
        let r = request(c, &[1.0; 50], &[(1.0, 0.0); 12]);
        let positions = calibrate_fixed_positions(&c, &[r.clone()], &q, 0.10).unwrap();
        let m = expected_m(&[r], &q, |r| fixed_for_request(r, &positions)).unwrap();
        assert!((m - 0.10).abs() < 0.005, "m = {m}, positions {positions:?}");
    }
}
