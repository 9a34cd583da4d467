use hca2e::baselines::{densest_template, fixed_for_request, gea_blend, wpo_blend};
use hca2e::controller::{ControllerConfig, ControllerState};
use hca2e::evaluator::{request_weight, score_template};
use hca2e::io::{decode_request, encode_request};
use hca2e::search::{ets_search, exhaustive_oracle, finalize_template, SearchConfig};
use hca2e::simulator::generator::{gsp_auction, GeneratorConfig};
use hca2e::simulator::run::RequestSource;
use hca2e::simulator::user::{simulate_user, UserDraws};
use hca2e::{
    merge_rpp, validate_template, CandidateKind, ExposureTemplate, Request, SlotExposureModel, TradeoffParams,
};
use proptest::prelude::*;

fn requests(seed: u64, n: usize, l: usize, tas: usize, mag: usize, ads_max: usize) -> Vec<Request> {
    GeneratorConfig {
        seed,
        num_requests: n,
        page_length: l,
        top_ad_slot: tas,
        min_ad_gap: mag,
        num_organics: l + 3,
        num_ads_min: 0,
        num_ads_max: ads_max,
        ..GeneratorConfig::default()
    }
    .head(n)
    .unwrap()
}

fn shape() -> impl Strategy<Value = (u64, usize, usize, usize, usize)> {
    (any::<u64>(), 2usize..=12, 1usize..=6, 1usize..=4, 0usize..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_output_is_feasible_and_never_negative(
        (seed, l, tas, mag, ads) in shape(),
        alpha in 0.0f64..=1.0,
        log_rho in -5.0f64..0.0,
        beam in 1usize..=8,
    ) {
        let rho = 10f64.powf(log_rho);
        let q = SlotExposureModel::geometric(l, 0.9).unwrap();
        let params = TradeoffParams::new(alpha, rho).unwrap();
        for r in requests(seed, 5, l, tas, mag, ads) {
            let out = ets_search(&r, &q, &params, &SearchConfig::new(beam).unwrap()).unwrap();
            prop_assert!(validate_template(&out.template, &r.constraints, r.ad_list.len()).unwrap());
            prop_assert!(out.score.kvi >= 0.0);
            prop_assert!(out.evaluations <= 2 * beam * l);
            prop_assert_eq!(out.score, score_template(&r, &out.template, &q, &params).unwrap());
            let kept = finalize_template(&out.template, &out.score, rho);
            prop_assert!(kept == out.template || !kept.has_ads());
        }
    }

    #[test]
    fn oracle_dominates_any_beam(
        (seed, l, tas, mag, ads) in shape(),
        alpha in 0.0f64..=1.0,
        log_rho in -5.0f64..-1.0,
        beam in 1usize..=4,
    ) {
        let q = SlotExposureModel::geometric(l, 0.9).unwrap();
        let params = TradeoffParams::new(alpha, 10f64.powf(log_rho)).unwrap();
        for r in requests(seed, 3, l, tas, mag, ads) {
            let beam_kvi = ets_search(&r, &q, &params, &SearchConfig::new(beam).unwrap()).unwrap().score.kvi;
            let (_, best) = exhaustive_oracle(&r, &q, &params, 16).unwrap();
            prop_assert!(best.kvi >= beam_kvi);
        }
    }

    #[test]
    fn merge_preserves_upstream_orders((seed, l, tas, mag, ads) in shape(), beta in 0.0f64..50.0) {
        for r in requests(seed, 5, l, tas, mag, ads) {
            let t = wpo_blend(&r, beta, 0.5);
            let page = merge_rpp(&r, &t).unwrap();
            prop_assert_eq!(page.entries.len(), l);
            let ad_ranks: Vec<u32> = page.ads().map(|(_, c)| c.upstream_rank).collect();
            let rec_ranks: Vec<u32> = page.organics().map(|(_, c)| c.upstream_rank).collect();
            prop_assert_eq!(ad_ranks, (1..=t.ad_count() as u32).collect::<Vec<_>>());
            prop_assert_eq!(rec_ranks, (1..=(l - t.ad_count()) as u32).collect::<Vec<_>>());
            for (slot, c) in &page.entries {
                prop_assert_eq!(c.kind == CandidateKind::Ad, t.is_ad_slot(*slot));
                let source = if c.is_ad() { &r.ad_list } else { &r.rec_list };
                prop_assert_eq!(*c, &source[c.upstream_rank as usize - 1]);
            }
        }
    }

    #[test]
    fn baselines_respect_constraints(
        (seed, l, tas, mag, ads) in shape(),
        beta in 0.0f64..100.0,
        decay in 0.05f64..=1.0,
        start in 1usize..=12,
        period in 1usize..=6,
    ) {
        for r in requests(seed, 5, l, tas, mag, ads) {
            let n = r.ad_list.len();
            let c = &r.constraints;
            for t in [wpo_blend(&r, beta, 0.7), gea_blend(&r, beta, 0.7, decay), densest_template(&r)] {
                prop_assert!(validate_template(&t, c, n).unwrap());
            }
            let positions: Vec<usize> = (start.max(tas)..=l).step_by(period.max(mag)).collect();
            let fixed = fixed_for_request(&r, &positions).unwrap();
            prop_assert!(validate_template(&fixed, c, n).unwrap());
        }
    }

    #[test]
    fn user_events_conserve_money((seed, l, tas, mag, ads) in shape(), user_seed in any::<u64>()) {
        let q = SlotExposureModel::geometric(l, 0.85).unwrap();
        for r in requests(seed, 5, l, tas, mag, ads) {
            let t = densest_template(&r);
            let page = merge_rpp(&r, &t).unwrap();
            let ev = simulate_user(&page, &q, &UserDraws::for_request(user_seed, r.request_id));
            prop_assert!(ev.scroll_depth <= l);
            prop_assert!(ev.clicks.iter().all(|&s| s >= 1 && s <= ev.scroll_depth));
            prop_assert!(ev.conversions.iter().all(|s| ev.clicks.contains(s)));
            let at = |s: usize| page.entries[s - 1].1;
            let rev: f64 = ev.clicks.iter().filter(|&&s| at(s).is_ad()).map(|&s| at(s).price_per_click).sum();
            let gmv: f64 = ev.conversions.iter().map(|&s| at(s).item_price).sum();
            prop_assert_eq!(ev.revenue, rev);
            prop_assert_eq!(ev.gmv, gmv);
            let exposed_ads: Vec<usize> = t.ad_positions().into_iter().filter(|&s| s <= ev.scroll_depth).collect();
            prop_assert_eq!(&ev.ad_slots, &exposed_ads);
        }
    }

    #[test]
    fn controller_stays_clamped_and_moves_with_error(
        rho0 in 1e-4f64..10.0,
        m_star in 0.01f64..0.5,
        gamma in 0.01f64..2.0,
        windows in proptest::collection::vec((0.0f64..5.0, 0.0f64..20.0), 1..40),
    ) {
        let cfg = ControllerConfig {
            target_m_star: m_star,
            learning_rate: gamma,
            window_size: 1,
            rho_min: 1e-6,
            rho_max_factor: 100.0,
        };
        let mut s = ControllerState::new(rho0, &cfg).unwrap();
        for (ad, extra) in windows {
            s.observe_exposures(ad, ad + extra);
            let rep = s.maybe_update().unwrap();
            prop_assert!(rep.rho_after >= 1e-6 && rep.rho_after <= rho0 * 100.0 * (1.0 + 1e-12));
            let clamped = rep.rho_after == 1e-6 || rep.rho_after == s.rho_max;
            if !clamped && ad + extra > 0.0 {
                let err = rep.realized_m - m_star;
                let moved = rep.rho_after - rep.rho_before;
                prop_assert!(err == 0.0 || moved == 0.0 || (err > 0.0) == (moved > 0.0));
            }
        }
    }

    #[test]
    fn log_lines_round_trip((seed, l, tas, mag, ads) in shape()) {
        for (i, r) in requests(seed, 3, l, tas, mag, ads).into_iter().enumerate() {
            let line = encode_request(&r).unwrap();
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(decode_request(&line, i + 1).unwrap(), r);
        }
    }

    #[test]
    fn gsp_prices_are_individually_rational(
        bidders in proptest::collection::vec((0.01f64..10.0, 0.001f64..0.5), 0..12),
        reserve in 0.0f64..1.0,
    ) {
        let slots = gsp_auction(&bidders, reserve);
        for s in &slots {
            let (bid, _) = bidders[s.bidder];
            prop_assert!(s.price_per_click <= bid);
            prop_assert!(bid >= reserve);
        }
        for w in slots.windows(2) {
            let ecpm = |k: usize| bidders[k].0 * bidders[k].1;
            prop_assert!(ecpm(w[0].bidder) >= ecpm(w[1].bidder));
        }
    }

    #[test]
    fn weight_only_counts_ad_slots((seed, l, tas, mag, ads) in shape()) {
        let q = SlotExposureModel::geometric(l, 0.8).unwrap();
        for r in requests(seed, 3, l, tas, mag, ads) {
            let t = densest_template(&r);
            let w = request_weight(&r, &t, &q).unwrap();
            let direct: f64 = t.ad_positions().iter().map(|&s| q.at(s)).sum();
            prop_assert!((w - direct).abs() <= 1e-12);
            prop_assert_eq!(request_weight(&r, &ExposureTemplate::no_ads(l), &q).unwrap(), 0.0);
        }
    }
}
