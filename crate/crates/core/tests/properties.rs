//! Randomized invariants with shrinking. These complement the seeded fuzz
//! driver: when one fails, proptest reduces it to a minimal witness.

use num::BigRational;
use proptest::prelude::*;

use hj_core::bound::{evaluate, tail_probability, tail_term, BoundParams, TailVariant};
use hj_core::exec::split_ranges;
use hj_core::mc::wilson_interval;
use hj_core::prob::{FiniteDistribution, Scenario};
use hj_core::rng::StreamRng;
use hj_core::scalar::Scalar;
use hj_core::semigroup::{SemigroupFamily, SemigroupInstance};

#[derive(Debug, Clone)]
struct WalkCase {
    weights: Vec<(u32, u32)>,
    sizes: Vec<usize>,
    thresholds: Vec<i64>,
    s: i64,
}

fn walk_case() -> impl Strategy<Value = WalkCase> {
    (2usize..=4)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec((1u32..=5, 1u32..=5), n),
                1usize..=2,
                0usize..=2,
                proptest::collection::vec(0i64..=3, 2),
                0i64..=2,
            )
        })
        .prop_map(|(weights, blocks, extra, thresholds, s)| {
            let n = weights.len();
            let blocks = blocks.min(n + 1);
            let mut sizes = vec![1usize; blocks];
            sizes[0] += extra.min(n + 1 - blocks);
            WalkCase {
                weights,
                sizes,
                thresholds: thresholds[..blocks].to_vec(),
                s,
            }
        })
}

fn biased_walk(weights: &[(u32, u32)]) -> Scenario {
    let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
    let up = sg.int(1).unwrap();
    let down = sg.int(-1).unwrap();
    let laws = weights
        .iter()
        .map(|&(w_up, w_down)| {
            FiniteDistribution::new(vec![
                (up.clone(), BigRational::new(w_up.into(), (w_up + w_down).into())),
                (down.clone(), BigRational::new(w_down.into(), (w_up + w_down).into())),
            ])
            .unwrap()
        })
        .collect();
    let z = sg.int(0).unwrap();
    Scenario::new(sg, laws, z.clone(), z).unwrap()
}

fn case_params(case: &WalkCase) -> BoundParams {
    BoundParams::new(
        case.sizes.clone(),
        case.thresholds.iter().map(|&t| Scalar::from_int(t)).collect(),
        Scalar::from_int(case.s),
    )
    .unwrap()
}

fn exact_pool() -> Vec<SemigroupInstance> {
    [
        SemigroupFamily::IntLine,
        SemigroupFamily::PosInts,
        SemigroupFamily::Cyclic { modulus: 7 },
        SemigroupFamily::HammingCube { bits: 6 },
        SemigroupFamily::SymCayley { degree: 4 },
        SemigroupFamily::SymHamming { degree: 4 },
    ]
    .into_iter()
    .map(|f| SemigroupInstance::new(f).unwrap())
    .collect()
}

proptest! {
    #[test]
    fn the_inequality_holds_on_biased_walks(case in walk_case()) {
        let sc = biased_walk(&case.weights);
        let p = case_params(&case);
        for variant in [TailVariant::MaxIncrement, TailVariant::OrderStatistic] {
            let report = evaluate(&sc, &p, variant).unwrap();
            prop_assert!(report.holds, "lhs {} > rhs {}", report.lhs, report.rhs);
        }
    }

    #[test]
    fn the_order_tail_never_exceeds_the_max_tail(case in walk_case()) {
        let sc = biased_walk(&case.weights);
        let p = case_params(&case);
        let order = tail_term(&sc, &p, TailVariant::OrderStatistic).unwrap();
        let max = tail_term(&sc, &p, TailVariant::MaxIncrement).unwrap();
        prop_assert!(order <= max);
    }

    #[test]
    fn the_running_max_tail_is_monotone(
        case in walk_case(),
        lo in 0i64..=4,
        hi in 0i64..=4,
    ) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let sc = biased_walk(&case.weights);
        let at_lo = tail_probability(&sc, &Scalar::from_int(lo)).unwrap();
        let at_hi = tail_probability(&sc, &Scalar::from_int(hi)).unwrap();
        prop_assert!(at_lo >= at_hi);
    }

    #[test]
    fn translations_preserve_distance(
        family in 0usize..6,
        seeds in proptest::array::uniform3(0u64..1_000),
    ) {
        let pool = exact_pool();
        let sg = &pool[family];
        let pick = |seed: u64| sg.random_element(&mut StreamRng::new(seed, 77), 50);
        let [a, b, c] = seeds.map(pick);
        let base = sg.distance(&a, &b).unwrap();
        let right = sg
            .distance(&sg.combine(&a, &c).unwrap(), &sg.combine(&b, &c).unwrap())
            .unwrap();
        let left = sg
            .distance(&sg.combine(&c, &a).unwrap(), &sg.combine(&c, &b).unwrap())
            .unwrap();
        prop_assert_eq!(&base, &right);
        prop_assert_eq!(&base, &left);
    }

    #[test]
    fn products_satisfy_the_pairwise_triangle(
        family in 0usize..6,
        seeds in proptest::array::uniform4(0u64..1_000),
    ) {
        let pool = exact_pool();
        let sg = &pool[family];
        let pick = |seed: u64| sg.random_element(&mut StreamRng::new(seed, 78), 50);
        let [a, b, x, y] = seeds.map(pick);
        let lhs = sg
            .distance(&sg.combine(&a, &x).unwrap(), &sg.combine(&b, &y).unwrap())
            .unwrap();
        let rhs = sg.distance(&a, &b).unwrap().add(&sg.distance(&x, &y).unwrap());
        prop_assert!(lhs <= rhs);
    }

    #[test]
    fn increment_norms_ignore_the_anchor(
        family in 0usize..6,
        seeds in proptest::array::uniform3(0u64..1_000),
    ) {
        let pool = exact_pool();
        let sg = &pool[family];
        let pick = |seed: u64| sg.random_element(&mut StreamRng::new(seed, 79), 50);
        let [z, w, x] = seeds.map(pick);
        let at_z = sg.norm_increment(&z, &x).unwrap();
        let at_w = sg.norm_increment(&w, &x).unwrap();
        prop_assert_eq!(at_z, at_w);
    }

    #[test]
    fn ranges_tile_the_interval(total in 0u64..=1_000, workers in 1usize..=8) {
        let ranges = split_ranges(total, workers);
        let mut next = 0u64;
        for range in &ranges {
            prop_assert_eq!(range.start, next);
            prop_assert!(range.start < range.end);
            next = range.end;
        }
        prop_assert_eq!(next, total);
        prop_assert!(ranges.len() <= workers);
    }

    #[test]
    fn wilson_intervals_bracket_the_sample_rate(
        successes in 0u64..=500,
        extra in 0u64..=500,
        z in 0.5f64..4.0,
    ) {
        let samples = successes + extra.max(1);
        let (lower, upper) = wilson_interval(successes, samples, z);
        let point = successes as f64 / samples as f64;
        prop_assert!((0.0..=1.0).contains(&lower));
        prop_assert!((0.0..=1.0).contains(&upper));
        prop_assert!(lower <= point && point <= upper);
    }

    #[test]
    fn scalar_text_round_trips(numer in -1_000i64..=1_000, denom in 1i64..=60) {
        let value = Scalar::from_ratio(numer, denom);
        let parsed: Scalar = value.to_string().parse().unwrap();
        prop_assert_eq!(parsed, value);
    }

    #[test]
    fn stream_draws_are_reproducible_and_in_range(seed in any::<u64>(), stream in any::<u64>()) {
        let mut first = StreamRng::new(seed, stream);
        let mut second = StreamRng::new(seed, stream);
        for _ in 0..16 {
            let a = first.next_f64();
            prop_assert!((0.0..1.0).contains(&a));
            prop_assert_eq!(a, second.next_f64());
        }
    }
}
