use proptest::prelude::*;

use delaychain::bounds::{
    chain_quality_bound, corollary_bounds, settlement_bound, synchronous_threshold, SecurityParams,
};
use delaychain::delay::{Delay, DelayDistribution};
use delaychain::fork::{margin_trace, observer_transform, reach_trace, Disjointness};
use delaychain::leader::LeaderParams;
use delaychain::stream::{KeyedUniforms, StreamKey};
use delaychain::tristring::{Symbol, TriString};

fn tristring(max: usize) -> impl Strategy<Value = TriString> {
    prop::collection::vec(prop_oneof![Just(Symbol::Empty), Just(Symbol::Honest), Just(Symbol::Adversarial)], 0..max)
        .prop_map(TriString::from_symbols)
}

fn delay_law() -> impl Strategy<Value = DelayDistribution> {
    prop_oneof![
        (0u64..6).prop_map(DelayDistribution::constant),
        (0.05f64..1.0).prop_map(|q| DelayDistribution::geometric(q).unwrap()),
        (0.5f64..8.0).prop_map(|m| DelayDistribution::discrete_exponential(m, None).unwrap()),
        prop::collection::vec(0.01f64..1.0, 1..8).prop_map(|w| {
            let total: f64 = w.iter().sum();
            DelayDistribution::table(w.iter().map(|x| x / total).collect(), 0.0).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn text_round_trip(s in tristring(40)) {
        let back: TriString = s.to_string().parse().unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn parameter_ordering(f in 0.01f64..1.0, alpha in 0.01f64..=1.0, law in delay_law()) {
        let sp = SecurityParams::compute(LeaderParams { f, alpha }, &law).unwrap();
        prop_assert!(sp.p <= sp.q + 1e-12);
        prop_assert!(sp.q <= 1.0 + 1e-12);
        prop_assert!(sp.p <= sp.alpha + 1e-12);
        prop_assert!((sp.epsilon - (2.0 * sp.p - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn bounds_decrease_in_k(f in 0.01f64..1.0, eps in 0.01f64..1.0, k in 0.0f64..1e5, dk in 1.0f64..1e3, parties in 1usize..10) {
        let a = settlement_bound(f, eps, k, parties);
        let b = settlement_bound(f, eps, k + dk, parties);
        prop_assert!(b.total.raw <= a.total.raw);
        prop_assert!(b.p_settlement <= a.p_settlement && b.p_unheard <= a.p_unheard);
        let mu = eps / 2.0;
        let a = chain_quality_bound(f, eps, k, mu, parties).unwrap();
        let b = chain_quality_bound(f, eps, k + dk, mu, parties).unwrap();
        prop_assert!(b.total.raw <= a.total.raw);
    }

    #[test]
    fn extensive_bounds_scale_with_t(t in 1u64..10_000, k in 0u64..5_000) {
        let sp = SecurityParams::compute(LeaderParams { f: 0.05, alpha: 0.95 }, &DelayDistribution::geometric(0.5).unwrap()).unwrap();
        let one = corollary_bounds(&sp, 1, k, 5, sp.epsilon / 2.0).unwrap();
        let many = corollary_bounds(&sp, t, k, 5, sp.epsilon / 2.0).unwrap();
        prop_assert!((many.common_prefix_total.raw - t as f64 * one.settlement_total.raw).abs() <= 1e-9 * many.common_prefix_total.raw);
        prop_assert!(many.common_prefix_total.clamped <= 1.0);
    }

    #[test]
    fn threshold_decreases(x in 0.0f64..50.0, dx in 1e-3f64..5.0) {
        let (a, b) = (synchronous_threshold(x), synchronous_threshold(x + dx));
        prop_assert!(b < a && b > 0.0 && a <= 0.5);
        // It solves β = (1-β)/(1+(1-β)x).
        prop_assert!((a - (1.0 - a) / (1.0 + (1.0 - a) * x)).abs() < 1e-12);
    }

    #[test]
    fn refresh_coupling(law in delay_law(), seed in any::<u64>(), e in 0u64..16) {
        prop_assume!(law.has_nondecreasing_failure_rate());
        let key = StreamKey::delay(seed, 0, 0, 0);
        let d = law.sample(&mut KeyedUniforms::new(key));
        let r = law.refreshed_residual(&mut KeyedUniforms::new(key), e);
        if let (Delay::Finite(d), Delay::Finite(r)) = (d, r) {
            prop_assert!(d <= e + r);
        }
    }

    #[test]
    fn failure_rates_are_probabilities(law in delay_law()) {
        for i in 0..20 {
            let fr = law.failure_rate(i);
            prop_assert!((0.0..=1.0).contains(&fr));
        }
    }

    #[test]
    fn margin_never_exceeds_reach(s in tristring(30), t in 1usize..30) {
        let r = reach_trace(&s);
        let m = margin_trace(&s, t, Disjointness::AtOrAfter);
        for (x, y) in r.iter().zip(&m) {
            prop_assert!(*x >= 0 && y <= x);
        }
    }

    #[test]
    fn observer_margin_identity(s in tristring(30), l in any::<usize>(), t in any::<usize>()) {
        prop_assume!(!s.is_empty());
        // 1 <= l <= |w| and 1 <= s <= l + 1.
        let l = 1 + l % s.len();
        let t = 1 + t % (l + 1);
        let o = observer_transform(&s, l);
        let rule = Disjointness::AtOrAfter;
        let base = *margin_trace(&s.prefix(l), t, rule).last().unwrap();
        for i in l..=s.len() {
            let lhs = *margin_trace(&o.prefix(i), t, rule).last().unwrap();
            let ones = s.count(l + 1, i, Symbol::Adversarial) as i64;
            prop_assert_eq!(lhs, base + ones, "w = {}, l = {}, s = {}, i = {}", s, l, t, i);
        }
    }
}
