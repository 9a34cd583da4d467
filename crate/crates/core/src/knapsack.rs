//! Application-level request selection as a 0-1 knapsack over frozen templates.
//!
//! Requests are ranked by value per weight. The batch greedy walks that ranking until the
//! cumulative weight passes the capacity; the streaming rule replaces the ranking by a fixed
//! threshold and selects every request whose value per weight is strictly above it.

use std::cmp::Ordering;

use crate::evaluator::vpw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackItem {
    pub value: f64,
    pub weight: f64,
}

impl KnapsackItem {
    pub fn vpw(&self) -> f64 {
        vpw(self.value, self.weight).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection {
    /// Selected indices in ranking order.
    pub selected: Vec<usize>,
    pub value: f64,
    pub weight: f64,
    /// Number of leading `selected` entries that fit within the capacity.
    pub within_capacity: usize,
    /// Value of those leading entries.
    pub feasible_value: f64,
    /// Value per weight of the last selected request; selecting strictly above the next
    /// request's value per weight reproduces the same set.
    pub threshold: f64,
}

/// Indices of profitable requests sorted by descending value per weight (ties by index).
pub fn vpw_ranking(items: &[KnapsackItem]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].weight > 0.0 && items[i].value > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        items[b]
            .vpw()
            .partial_cmp(&items[a].vpw())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Selects requests in descending value per weight until the cumulative weight exceeds
/// `capacity`; the request that crosses the capacity is the last one taken.
pub fn greedy_select(items: &[KnapsackItem], capacity: f64) -> GreedySelection {
    let mut sel = GreedySelection {
        selected: Vec::new(),
        value: 0.0,
        weight: 0.0,
        within_capacity: 0,
        feasible_value: 0.0,
        threshold: f64::INFINITY,
    };
    for i in vpw_ranking(items) {
        if sel.weight > capacity {
            break;
        }
        let it = items[i];
        sel.selected.push(i);
        sel.value += it.value;
        sel.weight += it.weight;
        sel.threshold = it.vpw();
        if sel.weight <= capacity {
            sel.within_capacity = sel.selected.len();
            sel.feasible_value = sel.value;
        }
    }
    sel
}

/// Streaming selection: request `i` is taken iff its value per weight exceeds `rho_thres`.
pub fn threshold_select(items: &[KnapsackItem], rho_thres: f64) -> Vec<bool> {
    items
        .iter()
        .map(|it| it.weight > 0.0 && it.vpw() > rho_thres)
        .collect()
}
