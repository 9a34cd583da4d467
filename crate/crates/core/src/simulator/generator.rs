//! Synthetic request streams.
//!
//! Each request gets a user activity factor scaling every click-through rate, a list of organics
//! ranked by expected GMV, and a list of ads ranked and priced by a generalized second-price
//! auction on `bid * pctr`. All emitted reals are rounded to six significant digits so the log
//! stays compact and round-trips exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Candidate, CandidateKind, Request, RequestConstraints};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    fn build(&self, key: &str) -> Result<LogNormal<f64>> {
        if !self.mu.is_finite() {
            return Err(Error::config(format!("{key}.mu"), format!("must be finite, got {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config(
                format!("{key}.sigma"),
                format!("must be finite and >= 0, got {}", self.sigma),
            ));
        }
        LogNormal::new(self.mu, self.sigma).map_err(|e| Error::config(key, e.to_string()))
    }
}

/// Beta-distributed rate with shape parameters `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    fn build(&self, key: &str) -> Result<Beta<f64>> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{key}.{name}"), format!("must be > 0, got {v}")));
            }
        }
        Beta::new(self.a, self.b).map_err(|e| Error::config(key, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_requests: usize,
    pub page_length: usize,
    pub top_ad_slot: usize,
    pub min_ad_gap: usize,
    pub num_organics: usize,
    pub num_ads_min: usize,
    pub num_ads_max: usize,
    pub reserve_price: f64,
    /// Log-scale spread of the per-request activity factor applied to click-through rates.
    pub user_activity_sigma: f64,
    pub ad_bid: LogNormalParams,
    pub item_price: LogNormalParams,
    pub organic_pctr: BetaParams,
    pub organic_pcvr: BetaParams,
    pub ad_pctr: BetaParams,
    pub ad_pcvr: BetaParams,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 20240501,
            num_requests: 100_000,
            page_length: 50,
            top_ad_slot: 5,
            min_ad_gap: 4,
            num_organics: 50,
            num_ads_min: 4,
            num_ads_max: 16,
            reserve_price: 0.05,
            user_activity_sigma: 0.4,
            ad_bid: LogNormalParams { mu: 0.0, sigma: 0.6 },
            item_price: LogNormalParams { mu: 3.7, sigma: 0.8 },
            organic_pctr: BetaParams { a: 2.0, b: 38.0 },
            organic_pcvr: BetaParams { a: 2.0, b: 60.0 },
            ad_pctr: BetaParams { a: 2.0, b: 38.0 },
            ad_pcvr: BetaParams { a: 2.0, b: 60.0 },
        }
    }
}

impl GeneratorConfig {
    pub fn constraints(&self) -> Result<RequestConstraints> {
        RequestConstraints::new(self.page_length, self.top_ad_slot, self.min_ad_gap)
            .map_err(|e| Error::config("generator.page_length", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<Distributions> {
        self.constraints()?;
        if self.num_organics < self.page_length {
            return Err(Error::config(
                "generator.num_organics",
                format!("must be >= page_length ({}), got {}", self.page_length, self.num_organics),
            ));
        }
        if self.num_ads_min > self.num_ads_max {
            return Err(Error::config(
                "generator.num_ads_min",
                format!("exceeds num_ads_max ({} > {})", self.num_ads_min, self.num_ads_max),
            ));
        }
        if !(self.reserve_price.is_finite() && self.reserve_price >= 0.0) {
            return Err(Error::config("generator.reserve_price", "must be finite and >= 0"));
        }
        let sigma = self.user_activity_sigma;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config("generator.user_activity_sigma", "must be finite and >= 0"));
        }
        Ok(Distributions {
            activity: LogNormal::new(-0.5 * sigma * sigma, sigma)
                .map_err(|e| Error::config("generator.user_activity_sigma", e.to_string()))?,
            ad_bid: self.ad_bid.build("generator.ad_bid")?,
            item_price: self.item_price.build("generator.item_price")?,
            organic_pctr: self.organic_pctr.build("generator.organic_pctr")?,
            organic_pcvr: self.organic_pcvr.build("generator.organic_pcvr")?,
            ad_pctr: self.ad_pctr.build("generator.ad_pctr")?,
            ad_pcvr: self.ad_pcvr.build("generator.ad_pcvr")?,
        })
    }
}

struct Distributions {
    activity: LogNormal<f64>,
    ad_bid: LogNormal<f64>,
    item_price: LogNormal<f64>,
    organic_pctr: Beta<f64>,
    organic_pcvr: Beta<f64>,
    ad_pctr: Beta<f64>,
    ad_pcvr: Beta<f64>,
}

/// Rounds to `digits` significant digits.
pub(crate) fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exponent = digits - 1 - x.abs().log10().floor() as i32;
    if exponent >= 0 {
        let scale = 10f64.powi(exponent);
        (x * scale).round() / scale
    } else {
        let scale = 10f64.powi(-exponent);
        (x / scale).round() * scale
    }
}

/// Outcome of the toy second-price auction for one ad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionSlot {
    /// Index into the bidder list passed to [`gsp_auction`].
    pub bidder: usize,
    pub price_per_click: f64,
}

/// Ranks `(bid, pctr)` bidders by `bid * pctr` and prices each at the click bid that would keep
/// its rank: `max(reserve, bid[k+1] * pctr[k+1] / pctr[k])`, capped at its own bid. The last
/// ranked ad pays the reserve. Bidders below the reserve do not participate.
pub fn gsp_auction(bidders: &[(f64, f64)], reserve: f64) -> Vec<AuctionSlot> {
    let mut order: Vec<usize> = (0..bidders.len())
        .filter(|&i| bidders[i].0 >= reserve)
        .collect();
    // stable sort: equal eCPM keeps input order
    order.sort_by(|&a, &b| {
        let ea = bidders[a].0 * bidders[a].1;
        let eb = bidders[b].0 * bidders[b].1;
        eb.partial_cmp(&ea).unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let (bid, pctr) = bidders[i];
            let runner_up = order.get(k + 1).map(|&j| bidders[j]);
            let price = match runner_up {
                Some((next_bid, next_pctr)) if pctr > 0.0 => {
                    reserve.max(next_bid * next_pctr / pctr)
                }
                _ => reserve,
            };
            AuctionSlot {
                bidder: i,
                price_per_click: price.min(bid),
            }
        })
        .collect()
}

/// Deterministic request stream: the same configuration always yields the same requests.
pub struct RequestGenerator {
    cfg: GeneratorConfig,
    dists: Distributions,
    constraints: RequestConstraints,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl RequestGenerator {
    pub fn new(cfg: &GeneratorConfig) -> Result<Self> {
        let dists = cfg.build()?;
        Ok(RequestGenerator {
            constraints: cfg.constraints()?,
            cfg: cfg.clone(),
            dists,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            next_id: 0,
        })
    }

    fn next_request(&mut self) -> Request {
        let d = &self.dists;
        let rng = &mut self.rng;
        let activity = d.activity.sample(rng);

        struct Item {
            pctr: f64,
            pcvr: f64,
            price: f64,
            utility_rec: f64,
        }
        let mut organics: Vec<Item> = (0..self.cfg.num_organics)
            .map(|_| {
                let pctr = round_sig((d.organic_pctr.sample(rng) * activity).min(1.0), 6);
                let pcvr = round_sig(d.organic_pcvr.sample(rng), 6);
                let price = round_sig(d.item_price.sample(rng), 6);
                Item {
                    pctr,
                    pcvr,
                    price,
                    utility_rec: round_sig(pctr * pcvr * price, 6),
                }
            })
            .collect();
        organics.sort_by(|a, b| b.utility_rec.total_cmp(&a.utility_rec));
        let rec_list: Vec<Candidate> = organics
            .iter()
            .enumerate()
            .map(|(i, it)| Candidate {
                id: i as u32,
                kind: CandidateKind::Organic,
                upstream_rank: i as u32 + 1,
                utility_rec: it.utility_rec,
                utility_ad: 0.0,
                pctr: it.pctr,
                pcvr: it.pcvr,
                item_price: it.price,
                price_per_click: 0.0,
            })
            .collect();

        let num_ads = rng.random_range(self.cfg.num_ads_min..=self.cfg.num_ads_max);
        let mut bids = Vec::with_capacity(num_ads);
        let mut ads = Vec::with_capacity(num_ads);
        for _ in 0..num_ads {
            let bid = round_sig(d.ad_bid.sample(rng), 6);
            let pctr = round_sig((d.ad_pctr.sample(rng) * activity).min(1.0), 6);
            let pcvr = round_sig(d.ad_pcvr.sample(rng), 6);
            let price = round_sig(d.item_price.sample(rng), 6);
            bids.push((bid, pctr));
            ads.push((pctr, pcvr, price));
        }
        let first_ad_id = rec_list.len() as u32;
        let ad_list: Vec<Candidate> = gsp_auction(&bids, self.cfg.reserve_price)
            .into_iter()
            .enumerate()
            .map(|(k, slot)| {
                let (pctr, pcvr, price) = ads[slot.bidder];
                let ppc = round_sig(slot.price_per_click, 6).min(bids[slot.bidder].0);
                Candidate {
                    id: first_ad_id + k as u32,
                    kind: CandidateKind::Ad,
                    upstream_rank: k as u32 + 1,
                    utility_rec: round_sig(pctr * pcvr * price, 6),
                    utility_ad: round_sig(pctr * ppc, 6),
                    pctr,
                    pcvr,
                    item_price: price,
                    price_per_click: ppc,
                }
            })
            .collect();

        let request_id = self.next_id;
        self.next_id += 1;
        Request::new(request_id, rec_list, ad_list, self.constraints)
            .expect("generator output satisfies the request invariants")
    }
}

impl Iterator for RequestGenerator {
    type Item = Request;

    fn next(&mut self) -> Option<Request> {
        if self.next_id as usize >= self.cfg.num_requests {
            return None;
        }
        Some(self.next_request())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.cfg.num_requests - self.next_id as usize;
        (left, Some(left))
    }
}

pub fn generate_stream(cfg: &GeneratorConfig) -> Result<Vec<Request>> {
    Ok(RequestGenerator::new(cfg)?.collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_bidder_price_is_capped_at_own_bid() {
        let slots = gsp_auction(&[(2.0, 0.1), (1.0, 0.2)], 0.01);
        assert_eq!(slots[0].bidder, 0);
        assert_eq!(slots[0].price_per_click, 2.0);
        assert_eq!(slots[1].price_per_click, 0.01);
    }

    #[test]
    fn single_ad_pays_reserve() {
        let slots = gsp_auction(&[(3.0, 0.05)], 0.2);
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].price_per_click, 0.2);
    }

    #[test]
    fn runner_up_sets_price() {
        let slots = gsp_auction(&[(1.0, 0.1), (4.0, 0.1)], 0.0);
        assert_eq!(slots[0].bidder, 1);
        assert!((slots[0].price_per_click - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bidders_below_reserve_excluded() {
        let slots = gsp_auction(&[(0.01, 0.5), (1.0, 0.1)], 0.05);
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].bidder, 1);
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = GeneratorConfig {
            num_requests: 30,
            ..GeneratorConfig::default()
        };
        let a = generate_stream(&cfg).unwrap();
        let b = generate_stream(&cfg).unwrap();
        assert_eq!(a, b);
        let other = generate_stream(&GeneratorConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn generated_requests_are_valid() {
        let cfg = GeneratorConfig {
            num_requests: 200,
            ..GeneratorConfig::default()
        };
        for r in generate_stream(&cfg).unwrap() {
            r.validate().unwrap();
            assert_eq!(r.rec_list.len(), 50);
            assert!((cfg.num_ads_min..=cfg.num_ads_max).contains(&r.ad_list.len()));
            for w in r.rec_list.windows(2) {
                assert!(w[0].utility_rec >= w[1].utility_rec);
            }
        }
    }

    #[test]
    fn bad_params_name_the_key() {
        let mut cfg = GeneratorConfig::default();
        cfg.ad_bid.sigma = -1.0;
        match cfg.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "generator.ad_bid.sigma"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = GeneratorConfig::default();
        cfg.ad_pctr.b = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "generator.ad_pctr.b"));
        let cfg = GeneratorConfig {
            num_organics: 10,
            ..GeneratorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rounding_keeps_six_digits() {
        assert_eq!(round_sig(0.0123456789, 6), 0.0123457);
        assert_eq!(round_sig(123456789.0, 6), 123457000.0);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }

    proptest! {
        #[test]
        fn prices_never_exceed_bids(
            bidders in prop::collection::vec((0.0f64..5.0, 0.0f64..1.0), 0..12),
            reserve in 0.0f64..1.0,
        ) {
            let slots = gsp_auction(&bidders, reserve);
            for s in &slots {
                prop_assert!(s.price_per_click <= bidders[s.bidder].0);
                prop_assert!(s.price_per_click >= reserve.min(bidders[s.bidder].0));
            }
            for w in slots.windows(2) {
                let e0 = bidders[w[0].bidder].0 * bidders[w[0].bidder].1;
                let e1 = bidders[w[1].bidder].0 * bidders[w[1].bidder].1;
                prop_assert!(e0 >= e1);
            }
        }
    }
}
