//! Property tests for scores, calibration, sets and the uncertainty bounds.

use conformal_uq::calibration::{quantile_rank, CoverageErrorLevel, Threshold};
use conformal_uq::nonconformity::label_scores;
use conformal_uq::uncertainty::raw_bounds;
use conformal_uq::*;
use proptest::prelude::*;

fn probs_strategy(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    k.prop_flat_map(|k| prop::collection::vec(1e-3f64..1.0, k))
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
}

fn pv(p: Vec<f64>) -> Probabilities {
    ProbabilityVector::new(p).unwrap()
}

fn calib(q: Threshold<f64>, score: Scores, k: usize) -> Calibration {
    CalibrationResult {
        q_hat: q,
        n: 100,
        delta: CoverageErrorLevel::new(0.1).unwrap(),
        num_classes: k,
        score,
    }
}

proptest! {
    #[test]
    fn lac_complements_probability(p in probs_strategy(2..=20), seed in any::<prop::sample::Index>()) {
        let label = seed.index(p.len());
        let v = pv(p);
        let s = score_lac(&v, label).unwrap();
        prop_assert_eq!(s + v.as_slice()[label], 1.0);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn aps_is_one_minus_mass_below(p in probs_strategy(2..=20), idx in any::<prop::sample::Index>()) {
        let v = pv(p);
        let label = idx.index(v.num_classes());
        let order = v.descending_order();
        let pos = order.iter().position(|&j| j == label).unwrap();
        let below: f64 = order[pos + 1..].iter().map(|&j| v.as_slice()[j]).sum();
        let s = score_aps(&v, label, None).unwrap();
        prop_assert!((s - (1.0 - below)).abs() < 1e-12);
        prop_assert!(s.is_finite() && (0.0..=1.0 + 1e-12).contains(&s));
        prop_assert_eq!(score_aps(&v, order[0], None).unwrap(), v.as_slice()[order[0]]);
    }

    #[test]
    fn aps_strictly_increases_down_the_ranking(p in probs_strategy(2..=20)) {
        let v = pv(p);
        let order = v.descending_order();
        let scores: Vec<f64> = order.iter().map(|&j| score_aps(&v, j, None).unwrap()).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn randomized_aps_extremes(p in probs_strategy(2..=20), idx in any::<prop::sample::Index>()) {
        let v = pv(p);
        let label = idx.index(v.num_classes());
        prop_assert_eq!(
            score_aps(&v, label, Some(1.0)).unwrap().to_bits(),
            score_aps(&v, label, None).unwrap().to_bits()
        );
        let order = v.descending_order();
        let pos = order.iter().position(|&j| j == label).unwrap();
        let mut above = 0.0;
        for &j in &order[..pos] {
            above += v.as_slice()[j];
        }
        prop_assert_eq!(score_aps(&v, label, Some(0.0)).unwrap(), above);
    }

    #[test]
    fn raps_bounded_and_finite(
        p in probs_strategy(2..=20),
        idx in any::<prop::sample::Index>(),
        lambda in 0.0f64..2.0,
        kr in any::<prop::sample::Index>(),
    ) {
        let v = pv(p);
        let k = v.num_classes();
        let k_reg = kr.index(k + 1);
        let s = score_raps(&v, idx.index(k), lambda, k_reg, None).unwrap();
        prop_assert!(s.is_finite());
        prop_assert!(s >= 0.0 && s <= 1.0 + lambda * (k - k_reg) as f64 + 1e-12);
    }

    #[test]
    fn quantile_permutation_invariant_and_monotone(
        mut scores in prop::collection::vec(0.0f64..1.0, 1..200),
        d1 in 0.0f64..=1.0,
        d2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let lo = CoverageErrorLevel::new(lo).unwrap();
        let hi = CoverageErrorLevel::new(hi).unwrap();
        let q_lo = conformal_quantile(&scores, lo).unwrap();
        let q_hi = conformal_quantile(&scores, hi).unwrap();
        prop_assert!(q_hi <= q_lo);
        scores.reverse();
        prop_assert_eq!(conformal_quantile(&scores, lo).unwrap(), q_lo);
    }

    #[test]
    fn quantile_coverage_fraction(scores in prop::collection::vec(0.0f64..1.0, 1..300), delta in 0.0f64..=1.0) {
        let level = CoverageErrorLevel::new(delta).unwrap();
        let n = scores.len();
        let r = quantile_rank(n, level);
        if let Threshold::Finite(q) = conformal_quantile(&scores, level).unwrap() {
            prop_assert!(scores.contains(&q));
            let frac = scores.iter().filter(|&&s| s <= q).count() as f64 / n as f64;
            prop_assert!(frac >= r.max(1) as f64 / n as f64);
            prop_assert!(frac >= 1.0 - delta - 1e-12);
        } else {
            prop_assert!(r > n);
        }
    }

    #[test]
    fn duplicating_scores_moves_at_most_one_step(
        scores in prop::collection::vec(0.0f64..1.0, 2..100),
        delta in 0.01f64..0.99,
    ) {
        let level = CoverageErrorLevel::new(delta).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let doubled: Vec<f64> = scores.iter().chain(scores.iter()).copied().collect();
        let r = quantile_rank(scores.len(), level);
        let q = conformal_quantile(&scores, level).unwrap();
        let q2 = conformal_quantile(&doubled, level).unwrap();
        prop_assert!(q2 <= q);
        if let Threshold::Finite(q2) = q2 {
            if r >= 2 {
                prop_assert!(q2 >= sorted[(r - 2).min(sorted.len() - 1)]);
            }
        }
    }

    #[test]
    fn sets_nest_in_threshold(
        p in probs_strategy(2..=30),
        a in 0.0f64..1.5,
        b in 0.0f64..1.5,
        kind in prop::sample::select(vec![ScoreKind::Lac, ScoreKind::Aps, ScoreKind::Raps]),
    ) {
        let v = pv(p);
        let k = v.num_classes();
        let cfg = ScoreConfig { kind, lambda: 0.05, k_reg: 1, randomized: false, seed: 0 };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s_lo = build_set_generic(&v, &calib(Threshold::Finite(lo), cfg, k)).unwrap();
        let s_hi = build_set_generic(&v, &calib(Threshold::Finite(hi), cfg, k)).unwrap();
        let s_inf = build_set_generic(&v, &calib(Threshold::Unbounded, cfg, k)).unwrap();
        prop_assert!(s_lo.is_subset(&s_hi));
        prop_assert_eq!(s_inf.m(), k);
    }

    #[test]
    fn aps_sets_are_top_k(p in probs_strategy(2..=30), q in 0.0f64..1.2) {
        let v = pv(p);
        let k = v.num_classes();
        let set = build_set_generic(&v, &calib(Threshold::Finite(q), ScoreConfig::aps(), k)).unwrap();
        let mut top: Vec<usize> = v.descending_order()[..set.m()].to_vec();
        top.sort_unstable();
        prop_assert_eq!(set.labels(), &top[..]);
        let scores = label_scores(&v, &ScoreConfig::aps());
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(set.m() == 0, q < min);
        if q >= max {
            prop_assert_eq!(set.m(), k);
        }
    }

    #[test]
    fn threshold_rule_equals_lac_rule(p in probs_strategy(2..=30), q in -0.1f64..1.2) {
        let v = pv(p);
        let k = v.num_classes();
        let t = Threshold::Finite(q);
        prop_assert_eq!(
            build_set_threshold(&v, t),
            build_set_generic(&v, &calib(t, ScoreConfig::lac(), k)).unwrap()
        );
    }

    #[test]
    fn bound_identity_and_ordering(
        k in 2usize..1000,
        mi in any::<prop::sample::Index>(),
        delta in 0.0f64..=1.0,
        n in 1usize..1_000_000,
    ) {
        let m = 1 + mi.index(k);
        let q = quantify(m, delta, k, n).unwrap();
        let d = uncertainty_variation(q.u_pure, n).unwrap();
        prop_assert_eq!(q.variation, d);
        prop_assert!(q.raw_lower <= q.raw_upper);
        prop_assert!((q.raw_upper - q.raw_lower - d).abs() <= 4.0 * f64::EPSILON * q.raw_upper.abs().max(q.raw_lower.abs()).max(d));
        prop_assert!(0.0 <= q.lower && q.lower <= q.upper && q.upper <= 1.0);
        if q.raw_upper >= 1.0 {
            prop_assert_eq!(q.upper, 1.0);
        }
    }

    #[test]
    fn bounds_increase_in_m_and_delta(k in 2usize..200, delta in 0.0f64..0.95, n in 1usize..100_000) {
        for m in 1..k {
            let a = raw_bounds(m, delta, k, n).unwrap();
            let b = raw_bounds(m + 1, delta, k, n).unwrap();
            prop_assert!(a.lower < b.lower && a.upper < b.upper);
        }
        let m = 1 + k / 2;
        let a = raw_bounds(m, delta, k, n).unwrap();
        let b = raw_bounds(m, delta + 0.05, k, n).unwrap();
        prop_assert!(a.lower < b.lower && a.upper < b.upper);
    }

    #[test]
    fn float_bounds_track_exact_rationals(
        k in 2i64..200,
        mi in any::<prop::sample::Index>(),
        dnum in 0i64..=1000,
        n in 1usize..100_000,
    ) {
        let m = 1 + mi.index(k as usize);
        let exact = quantify(m, Rational::new(dnum, 1000), k as usize, n).unwrap();
        let float = quantify(m, dnum as f64 / 1000.0, k as usize, n).unwrap();
        let to_f = |r: Rational| *r.numer() as f64 / *r.denom() as f64;
        for (e, f) in [
            (exact.lower, float.lower),
            (exact.upper, float.upper),
            (exact.variation, float.variation),
            (exact.u_pure, float.u_pure),
        ] {
            prop_assert!((to_f(e) - f).abs() < 1e-12);
        }
        prop_assert_eq!(exact.lower_clamped, float.lower_clamped);
    }

    #[test]
    fn records_round_trip(
        qv in prop::option::of(0.0f64..2.0),
        n in 1usize..10_000,
        delta in 0.0f64..=1.0,
        m in 0usize..10,
    ) {
        let q = qv.map(Threshold::Finite).unwrap_or(Threshold::Unbounded);
        let c = CalibrationResult {
            q_hat: q,
            n,
            delta: CoverageErrorLevel::new(delta).unwrap(),
            num_classes: 10,
            score: ScoreConfig::raps(0.25, 2).randomized(7),
        };
        let back: Calibration = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);

        let uq = quantify(m, delta, 10, n).unwrap();
        let back: Quantification = serde_json::from_str(&serde_json::to_string(&uq).unwrap()).unwrap();
        prop_assert_eq!(back, uq);

        let rec = conformal_uq::sets::SetRecord { row: n, labels: (0..m).collect(), m, covered: m > 3 };
        let back: conformal_uq::sets::SetRecord =
            serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
        prop_assert_eq!(back, rec);
    }
}

#[test]
fn lambda_zero_raps_matches_aps_sets() {
    let v = pv(vec![0.4, 0.1, 0.3, 0.2]);
    for q in [0.3, 0.4, 0.7, 0.9, 1.0] {
        let a = build_set_generic(&v, &calib(Threshold::Finite(q), ScoreConfig::aps(), 4)).unwrap();
        let r = build_set_generic(
            &v,
            &calib(Threshold::Finite(q), ScoreConfig::raps(0.0, 2), 4),
        )
        .unwrap();
        assert_eq!(a, r);
    }
}
