//! Exposure template search: a layered beam search over slot labelings.
//!
//! Layer `l` holds sub-templates of length `l`. Every survivor is expanded with an organic child
//! and, when the position constraints and the ad supply allow it, an ad child. Children are ranked
//! by the knapsack value increment of their prefix page (first `l` slots, truncated exposure
//! curve) and the best `B` survive. The all-organic template always joins the final comparison.
//!
//! Ordering is total and deterministic: higher increment first, then fewer ads, then the
//! lexicographically smaller labeling (organic before ad). The exhaustive oracle uses the same
//! ordering, so with a beam that never prunes a feasible node both return identical results.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::evaluator::{score_from_parts, score_template, slot_utility, TemplateScore, TradeoffParams};
use crate::model::{validate_template, ExposureTemplate, Request, SlotExposureModel};

pub const DEFAULT_ORACLE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub beam_size: usize,
}

impl SearchConfig {
    pub fn new(beam_size: usize) -> Result<Self> {
        if beam_size == 0 {
            return Err(Error::InvalidInput("beam size must be >= 1".into()));
        }
        Ok(SearchConfig { beam_size })
    }
}

/// A sub-template together with the running sums needed to score it.
#[derive(Debug, Clone)]
pub struct BeamNode {
    pub sub_template: Vec<bool>,
    pub kvi_so_far: f64,
    pub last_ad_index: Option<usize>,
    pub ads_used: usize,
    page_utility: f64,
    weight: f64,
}

impl BeamNode {
    fn root() -> Self {
        BeamNode {
            sub_template: Vec::new(),
            kvi_so_far: 0.0,
            last_ad_index: None,
            ads_used: 0,
            page_utility: 0.0,
            weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub template: ExposureTemplate,
    pub score: TemplateScore,
    /// Number of child nodes scored during the search.
    pub evaluations: usize,
}

/// Ranking used both inside the beam and for the final pick. `Less` means `a` ranks first.
pub fn rank_order(a: (f64, usize, &[bool]), b: (f64, usize, &[bool])) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(b.2))
}

fn node_order(a: &BeamNode, b: &BeamNode) -> Ordering {
    rank_order(
        (a.kvi_so_far, a.ads_used, &a.sub_template),
        (b.kvi_so_far, b.ads_used, &b.sub_template),
    )
}

pub fn ets_search(
    r: &Request,
    q: &SlotExposureModel,
    params: &TradeoffParams,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    search(r, q, params, cfg, None)
}

/// Like [`ets_search`], additionally returning the surviving sub-templates of every layer.
pub fn ets_search_traced(
    r: &Request,
    q: &SlotExposureModel,
    params: &TradeoffParams,
    cfg: &SearchConfig,
) -> Result<(SearchOutcome, Vec<Vec<ExposureTemplate>>)> {
    let mut layers = Vec::new();
    let outcome = search(r, q, params, cfg, Some(&mut layers))?;
    Ok((outcome, layers))
}

fn search(
    r: &Request,
    q: &SlotExposureModel,
    params: &TradeoffParams,
    cfg: &SearchConfig,
    mut trace: Option<&mut Vec<Vec<ExposureTemplate>>>,
) -> Result<SearchOutcome> {
    let page_length = r.page_length();
    q.check_len(page_length)?;
    if cfg.beam_size == 0 {
        return Err(Error::InvalidInput("beam size must be >= 1".into()));
    }
    let c = &r.constraints;
    let alpha = params.alpha;
    let rho = params.rho_thres;

    // Utility of the all-organic page truncated to the first l slots.
    let mut no_ad_prefix = Vec::with_capacity(page_length + 1);
    no_ad_prefix.push(0.0);
    for l in 1..=page_length {
        let prev = no_ad_prefix[l - 1];
        no_ad_prefix.push(prev + q.at(l) * slot_utility(&r.rec_list[l - 1], alpha));
    }

    let mut evaluations = 0usize;
    let mut layer = vec![BeamNode::root()];
    for l in 1..=page_length {
        let mut children = Vec::with_capacity(2 * layer.len());
        for node in &layer {
            let organic = &r.rec_list[l - 1 - node.ads_used];
            let page_utility = node.page_utility + q.at(l) * slot_utility(organic, alpha);
            let mut sub_template = Vec::with_capacity(l);
            sub_template.extend_from_slice(&node.sub_template);
            sub_template.push(false);
            children.push(BeamNode {
                sub_template,
                kvi_so_far: (page_utility - no_ad_prefix[l]) - rho * node.weight,
                last_ad_index: node.last_ad_index,
                ads_used: node.ads_used,
                page_utility,
                weight: node.weight,
            });
            evaluations += 1;

            if node.ads_used < r.ad_list.len() && c.ad_allowed_at(l, node.last_ad_index) {
                let ad = &r.ad_list[node.ads_used];
                let page_utility = node.page_utility + q.at(l) * slot_utility(ad, alpha);
                let weight = node.weight + q.at(l);
                let mut sub_template = Vec::with_capacity(l);
                sub_template.extend_from_slice(&node.sub_template);
                sub_template.push(true);
                children.push(BeamNode {
                    sub_template,
                    kvi_so_far: (page_utility - no_ad_prefix[l]) - rho * weight,
                    last_ad_index: Some(l),
                    ads_used: node.ads_used + 1,
                    page_utility,
                    weight,
                });
                evaluations += 1;
            }
        }
        children.sort_by(node_order);
        children.truncate(cfg.beam_size);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(
                children
                    .iter()
                    .map(|n| ExposureTemplate::from_slots(n.sub_template.clone()))
                    .collect(),
            );
        }
        layer = children;
    }

    let no_ads = vec![false; page_length];
    let best = layer
        .iter()
        .min_by(|a, b| node_order(a, b))
        .expect("the organic child always survives");
    // The all-organic template scores exactly zero; it wins unless something beats it.
    let pick_best = rank_order(
        (best.kvi_so_far, best.ads_used, &best.sub_template),
        (0.0, 0, &no_ads),
    ) != Ordering::Greater;
    let (template, score) = if pick_best {
        let value = best.page_utility - no_ad_prefix[page_length];
        (
            ExposureTemplate::from_slots(best.sub_template.clone()),
            score_from_parts(value, best.weight, rho),
        )
    } else {
        (
            ExposureTemplate::from_slots(no_ads),
            score_from_parts(0.0, 0.0, rho),
        )
    };
    Ok(SearchOutcome {
        template,
        score,
        evaluations,
    })
}

/// Keeps the searched template only if its value per weight clears the threshold.
pub fn finalize_template(
    best: &ExposureTemplate,
    score: &TemplateScore,
    rho_thres: f64,
) -> ExposureTemplate {
    if score.vpw > rho_thres {
        best.clone()
    } else {
        ExposureTemplate::no_ads(best.len())
    }
}

/// Calls `visit` on every feasible template of `r`, in increasing bitmask order.
pub fn for_each_feasible_template(
    r: &Request,
    cap: usize,
    mut visit: impl FnMut(ExposureTemplate) -> Result<()>,
) -> Result<()> {
    let page_length = r.page_length();
    if page_length > cap {
        return Err(Error::OracleCapExceeded { page_length, cap });
    }
    for mask in 0u64..(1u64 << page_length) {
        let t = ExposureTemplate::from_slots((0..page_length).map(|i| mask >> i & 1 == 1).collect());
        if validate_template(&t, &r.constraints, r.ad_list.len())? {
            visit(t)?;
        }
    }
    Ok(())
}

/// Exhaustive search over all `2^L` labelings. Refuses pages longer than `cap`.
pub fn exhaustive_oracle(
    r: &Request,
    q: &SlotExposureModel,
    params: &TradeoffParams,
    cap: usize,
) -> Result<(ExposureTemplate, TemplateScore)> {
    let mut best: Option<(ExposureTemplate, TemplateScore)> = None;
    for_each_feasible_template(r, cap, |t| {
        let s = score_template(r, &t, q, params)?;
        let better = match &best {
            None => true,
            Some((bt, bs)) => {
                rank_order((s.kvi, t.ad_count(), t.slots()), (bs.kvi, bt.ad_count(), bt.slots()))
                    == Ordering::Less
            }
        };
        if better {
            best = Some((t, s));
        }
        Ok(())
    })?;
    Ok(best.expect("the all-organic template is always feasible"))
}
