//! Stochastic user feedback on a served page.
//!
//! The user scrolls to depth `D` with `P(D >= l) = q_l`, so exposure is coupled across slots: a
//! user who saw slot 7 saw slots 1 to 6. Each exposed candidate is clicked with probability
//! `pctr` and, once clicked, converts with probability `pcvr`.
//!
//! Draws are keyed rather than sequential: the depth depends only on the request, and a
//! candidate's click and conversion depend only on the request and the candidate. Two strategies
//! serving the same request therefore see the same user, which keeps strategy comparisons free
//! of most sampling noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Candidate, CandidateKind, MergedPage, SlotExposureModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEvent {
    pub request_id: u64,
    pub scroll_depth: usize,
    /// Clicked slots, ascending.
    pub clicks: Vec<usize>,
    /// Converted slots, ascending; always a subset of `clicks`.
    pub conversions: Vec<usize>,
    /// Exposed ad slots, ascending.
    pub ad_slots: Vec<usize>,
    pub revenue: f64,
    pub gmv: f64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Source of the uniforms behind one user's behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserDraws {
    key: u64,
}

impl UserDraws {
    pub fn for_request(seed: u64, request_id: u64) -> Self {
        UserDraws {
            key: splitmix64(splitmix64(seed) ^ request_id),
        }
    }

    /// A fresh, independent user.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        UserDraws { key: rng.random() }
    }

    fn depth_uniform(&self) -> f64 {
        unit(splitmix64(self.key ^ 0xD0_D0))
    }

    fn candidate_uniforms(&self, c: &Candidate) -> (f64, f64) {
        let tag = match c.kind {
            CandidateKind::Organic => 1u64 << 40,
            CandidateKind::Ad => 2u64 << 40,
        };
        let h = splitmix64(self.key ^ splitmix64(tag | c.id as u64));
        (unit(splitmix64(h ^ 1)), unit(splitmix64(h ^ 2)))
    }
}

/// Depth `D` such that `P(D >= l) = q_l` when `u` is uniform on `[0, 1)`.
pub fn scroll_depth(q: &SlotExposureModel, u: f64) -> usize {
    q.as_slice().partition_point(|&p| p > u)
}

pub fn simulate_user(page: &MergedPage<'_>, q: &SlotExposureModel, draws: &UserDraws) -> UserEvent {
    let depth = scroll_depth(q, draws.depth_uniform()).min(page.entries.len());
    let mut ev = UserEvent {
        request_id: page.request_id,
        scroll_depth: depth,
        clicks: Vec::new(),
        conversions: Vec::new(),
        ad_slots: Vec::new(),
        revenue: 0.0,
        gmv: 0.0,
    };
    for &(slot, c) in &page.entries[..depth] {
        if c.is_ad() {
            ev.ad_slots.push(slot);
        }
        let (u_click, u_conv) = draws.candidate_uniforms(c);
        if u_click < c.pctr {
            ev.clicks.push(slot);
            if c.is_ad() {
                ev.revenue += c.price_per_click;
            }
            if u_conv < c.pcvr {
                ev.conversions.push(slot);
                ev.gmv += c.item_price;
            }
        }
    }
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::request;
    use crate::model::{merge_rpp, ExposureTemplate, RequestConstraints};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_exposure_always_scrolls_to_bottom() {
        let q = SlotExposureModel::new(vec![1.0; 6]).unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(scroll_depth(&q, u), 6);
        }
    }

    #[test]
    fn depth_tail_matches_exposure_curve() {
        let q = SlotExposureModel::geometric(10, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut at_least = [0usize; 11];
        for _ in 0..n {
            let d = scroll_depth(&q, rng.random());
            for slot in 1..=d {
                at_least[slot] += 1;
            }
        }
        for slot in 1..=10 {
            let p = q.at(slot);
            let freq = at_least[slot] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * sigma + 1e-12, "slot {slot}: {freq} vs {p}");
        }
    }

    #[test]
    fn zero_ctr_means_no_clicks() {
        let c = RequestConstraints::new(4, 1, 1).unwrap();
        let mut r = request(c, &[1.0; 4], &[(1.0, 0.0)]);
        for cand in r.rec_list.iter_mut().chain(r.ad_list.iter_mut()) {
            cand.pctr = 0.0;
        }
        let page = merge_rpp(&r, &ExposureTemplate::from_ad_positions(4, &[2]).unwrap()).unwrap();
        let q = SlotExposureModel::new(vec![1.0; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let ev = simulate_user(&page, &q, &UserDraws::sample(&mut rng));
            assert!(ev.clicks.is_empty());
            assert_eq!(ev.revenue, 0.0);
            assert_eq!(ev.gmv, 0.0);
            assert_eq!(ev.ad_slots, vec![2]);
        }
    }

    #[test]
    fn conversions_within_clicks_within_exposure() {
        let c = RequestConstraints::new(6, 2, 2).unwrap();
        let mut r = request(c, &[1.0; 6], &[(1.0, 0.0), (1.0, 0.0)]);
        for cand in r.rec_list.iter_mut().chain(r.ad_list.iter_mut()) {
            cand.pctr = 0.6;
            cand.pcvr = 0.5;
        }
        let page = merge_rpp(&r, &ExposureTemplate::from_ad_positions(6, &[2, 5]).unwrap()).unwrap();
        let q = SlotExposureModel::geometric(6, 0.85).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let ev = simulate_user(&page, &q, &UserDraws::sample(&mut rng));
            assert!(ev.clicks.iter().all(|&s| s <= ev.scroll_depth));
            assert!(ev.conversions.iter().all(|s| ev.clicks.contains(s)));
            let ad_clicks = ev.clicks.iter().filter(|s| [2, 5].contains(s)).count();
            assert!((ev.revenue - 0.5 * ad_clicks as f64).abs() < 1e-12);
            assert!((ev.gmv - 30.0 * ev.conversions.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn same_user_for_same_request() {
        let c = RequestConstraints::new(5, 1, 1).unwrap();
        let r = request(c, &[1.0; 5], &[(1.0, 0.0)]);
        let q = SlotExposureModel::geometric(5, 0.9).unwrap();
        let a = merge_rpp(&r, &ExposureTemplate::no_ads(5)).unwrap();
        let d = UserDraws::for_request(42, 17);
        assert_eq!(simulate_user(&a, &q, &d), simulate_user(&a, &q, &d));
        assert_eq!(d, UserDraws::for_request(42, 17));
        assert_ne!(d, UserDraws::for_request(42, 18));
    }
}
