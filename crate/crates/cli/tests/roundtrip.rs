use logdm_cli::parse::{parse_expr, Value};
use logdm_core::{AMonomial, Chart, LevelContext, MultiIndex, SignedMultiIndex, TDOperator};
use proptest::prelude::*;

const GRID: [(u32, u32, usize); 7] = [(2, 0, 1), (2, 1, 1), (2, 0, 2), (3, 0, 1), (3, 1, 1), (2, 2, 1), (5, 0, 1)];

type RawTerm = (Vec<u32>, Vec<i64>, Vec<u32>, u32);

fn case() -> impl Strategy<Value = (usize, bool, Vec<RawTerm>)> {
    (0..GRID.len(), any::<bool>()).prop_flat_map(|(i, target)| {
        let r = GRID[i].2;
        let term = (
            prop::collection::vec(0u32..4, r),
            prop::collection::vec(-4i64..5, r),
            prop::collection::vec(0u32..10, r),
            0u32..7,
        );
        (Just(i), Just(target), prop::collection::vec(term, 0..5))
    })
}

fn chart_of(i: usize, target: bool) -> Chart {
    let (p, m, r) = GRID[i];
    let ctx = LevelContext::new(p, m, r).unwrap();
    if target {
        Chart::frobenius_target(ctx)
    } else {
        Chart::base(ctx)
    }
}

proptest! {
    #[test]
    fn printed_values_parse_back((i, target, raw) in case()) {
        let chart = chart_of(i, target);
        let s = chart.step() as i64;
        let mut op = TDOperator::zero(chart);
        for (a, j, k, c) in raw {
            let a: Vec<u32> = a.iter().map(|v| v * s as u32).collect();
            let j: Vec<i64> = j.iter().map(|v| v * s).collect();
            op.add_term(AMonomial::new(MultiIndex::new(&a), SignedMultiIndex::new(&j)), MultiIndex::new(&k), c);
        }
        let value = Value::from_op(op);
        let text = value.to_string();
        prop_assert_eq!(parse_expr(&text, chart).unwrap(), value);
    }
}
