//! Greedy value-per-weight selection and its streaming threshold equivalent.

use hca2e::knapsack::{greedy_select, threshold_select, KnapsackItem};

fn main() {
    let items = [
        (4.0, 2.0),
        (3.0, 1.0),
        (1.0, 2.0),
        (5.0, 4.0),
        (2.5, 0.5),
        (-1.0, 1.0),
        (0.6, 3.0),
    ]
    .map(|(value, weight)| KnapsackItem { value, weight });

    for capacity in [1.0, 3.5, 7.5, 20.0] {
        let sel = greedy_select(&items, capacity);
        let feasible = &sel.selected[..sel.within_capacity];
        println!(
            "capacity {capacity:>4}: take {:?} value={:.2} weight={:.2}  (fits: {feasible:?} value={:.2})  threshold={:.3}",
            sel.selected, sel.value, sel.weight, sel.feasible_value, sel.threshold
        );
    }

    for rho in [0.1, 1.0, 2.0] {
        let take: Vec<usize> = threshold_select(&items, rho)
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| t.then_some(i))
            .collect();
        println!("rho={rho}: {take:?}");
    }
}
