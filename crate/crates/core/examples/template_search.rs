//! Beam search over exposure templates for a single hand-built request, checked against
//! brute-force enumeration.

use hca2e::{
    ets_search, exhaustive_oracle, finalize_template, merge_rpp, Candidate, CandidateKind, Request,
    RequestConstraints, SearchConfig, SlotExposureModel, TradeoffParams,
};

fn candidate(id: u32, kind: CandidateKind, rank: u32, rec: f64, ad: f64) -> Candidate {
    Candidate {
        id,
        kind,
        upstream_rank: rank,
        utility_rec: rec,
        utility_ad: ad,
        pctr: 0.04,
        pcvr: 0.02,
        item_price: 30.0,
        price_per_click: if kind == CandidateKind::Ad { 0.6 } else { 0.0 },
    }
}

fn main() -> hca2e::Result<()> {
    let recs = [0.30, 0.26, 0.20, 0.15, 0.12, 0.10, 0.08, 0.06, 0.05, 0.04];
    let ads = [(0.09, 0.05), (0.07, 0.04), (0.03, 0.02)];
    let rec_list = recs
        .iter()
        .enumerate()
        .map(|(i, &u)| candidate(i as u32, CandidateKind::Organic, i as u32 + 1, u, 0.0))
        .collect();
    let ad_list = ads
        .iter()
        .enumerate()
        .map(|(i, &(a, u))| candidate(100 + i as u32, CandidateKind::Ad, i as u32 + 1, u, a))
        .collect();
    let r = Request::new(1, rec_list, ad_list, RequestConstraints::new(8, 2, 3)?)?;
    let q = SlotExposureModel::geometric(8, 0.9)?;
    let params = TradeoffParams::new(0.5, 0.02)?;

    let (best, best_score) = exhaustive_oracle(&r, &q, &params, 16)?;
    println!("exhaustive  {:?}  kvi={:.5}", best.ad_positions(), best_score.kvi);
    for beam in [1, 2, 4, 8] {
        let out = ets_search(&r, &q, &params, &SearchConfig::new(beam)?)?;
        println!(
            "beam B={beam}  {:?}  kvi={:.5}  vpw={:.4}  scored {} nodes",
            out.template.ad_positions(),
            out.score.kvi,
            out.score.vpw,
            out.evaluations
        );
    }

    let out = ets_search(&r, &q, &params, &SearchConfig::new(4)?)?;
    let served = finalize_template(&out.template, &out.score, params.rho_thres);
    let page = merge_rpp(&r, &served)?;
    for (slot, c) in &page.entries {
        println!("slot {slot}: {:?} #{}", c.kind, c.upstream_rank);
    }
    Ok(())
}
