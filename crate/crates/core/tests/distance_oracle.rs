mod common;

use proptest::prelude::*;
use swnabc::distance::solve_transport;

fn masses(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn transport_matches_vertex_enumeration(
        (supply, demand, cost) in (1usize..=5, 1usize..=5).prop_flat_map(|(m, n)| {
            (masses(m), masses(n), prop::collection::vec(0.0f64..1.0, m * n))
        })
    ) {
        let plan = solve_transport(&supply, &demand, &cost);
        let oracle = common::lp_oracle(&supply, &demand, &cost);
        prop_assert!((plan.cost - oracle).abs() < 1e-9, "{} vs {}", plan.cost, oracle);
    }

    // integer costs as produced by the raw ground distance
    #[test]
    fn transport_with_integer_costs(
        (supply, demand, cost) in (1usize..=5, 1usize..=5).prop_flat_map(|(m, n)| {
            (masses(m), masses(n), prop::collection::vec((0u8..6).prop_map(f64::from), m * n))
        })
    ) {
        let plan = solve_transport(&supply, &demand, &cost);
        let oracle = common::lp_oracle(&supply, &demand, &cost);
        prop_assert!((plan.cost - oracle).abs() < 1e-9, "{} vs {}", plan.cost, oracle);
    }
}

#[test]
fn transport_on_degenerate_supplies() {
    // equal masses make the northwest corner start degenerate
    let supply = [0.25; 4];
    let demand = [0.25; 4];
    let cost: Vec<f64> = (0..16).map(|k| ((k * 7) % 5) as f64 / 4.0).collect();
    let plan = solve_transport(&supply, &demand, &cost);
    assert!((plan.cost - common::lp_oracle(&supply, &demand, &cost)).abs() < 1e-9);
}
