use proptest::prelude::*;

use ace_sched::ace_profiler::{normalize_table, AceProfile, ConfigPoint, RawProfile};
use ace_sched::runtime_selector::{
    adaptive_weights, feasible_set, rank, smooth_and_hold, spearman, AceWeights, HoldState, HysteresisParams,
    Pressures, RankedProfile, Slacks,
};

fn raw_axes() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    // (accuracy, latency s, GFLOPs, energy J)
    prop::collection::vec((0.0f64..1.0, 0.001f64..0.2, 0.1f64..50.0, 0.0001f64..0.05), 2..12)
}

fn table(axes: &[(f64, f64, f64, f64)], with_flops: bool) -> Vec<AceProfile> {
    axes.iter()
        .enumerate()
        .map(|(i, &(a, l, c, e))| {
            AceProfile::from_raw(
                ConfigPoint::new(format!("m{i}"), 320, 1),
                RawProfile::from_axes(a, l, with_flops.then_some(c), e),
            )
        })
        .collect()
}

fn weights() -> impl Strategy<Value = AceWeights> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, c, e)| AceWeights::from_raw(a, c, e).unwrap())
}

fn order(profiles: &[AceProfile], w: &AceWeights) -> Vec<(String, f64)> {
    let normalized = normalize_table(profiles, w).unwrap();
    rank(&normalized, w).into_iter().map(|r| (r.point.model, r.score)).collect()
}

fn same_order(a: &[(String, f64)], b: &[(String, f64)]) -> Result<(), TestCaseError> {
    // scores may wobble in the last bits; positions only matter between distinct scores
    for (x, y) in a.iter().zip(b) {
        prop_assert!((x.1 - y.1).abs() < 1e-9, "{} {} vs {} {}", x.0, x.1, y.0, y.1);
    }
    let score_of = |v: &[(String, f64)], m: &str| v.iter().find(|p| p.0 == m).unwrap().1;
    for (m, s) in a {
        prop_assert!((score_of(b, m) - s).abs() < 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_are_positive_and_sum_to_one(
        s in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0),
        p in (0.0f64..=2.0, 0.0f64..=2.0, 0.0f64..=1.0),
    ) {
        let w = adaptive_weights(
            &Slacks { s_lat: s.0, s_energy: s.1, s_acc: s.2 },
            &Pressures { thermal: p.0, util: p.1, battery: p.2 },
        );
        prop_assert!(w.delta_a > 0.0 && w.gamma_c > 0.0 && w.eta_e > 0.0);
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_axes_are_unit_and_keep_the_accuracy_leader(axes in raw_axes(), w in weights(), flops in any::<bool>()) {
        let profiles = table(&axes, flops);
        let n = normalize_table(&profiles, &w).unwrap();
        for p in &n {
            for v in [p.a_norm, p.c_norm, p.e_norm] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let best_raw = axes.iter().map(|a| a.0).fold(f64::MIN, f64::max);
        let best_norm = n.iter().map(|p| p.a_norm).fold(f64::MIN, f64::max);
        for p in &n {
            prop_assert_eq!(p.raw.a_blend == best_raw, p.a_norm == best_norm);
        }
    }

    #[test]
    fn latency_scale_does_not_change_the_ranking(axes in raw_axes(), w in weights(), k in 0.01f64..100.0, flops in any::<bool>()) {
        let scaled: Vec<_> = axes.iter().map(|&(a, l, c, e)| (a, l * k, c, e)).collect();
        same_order(&order(&table(&axes, flops), &w), &order(&table(&scaled, flops), &w))?;
    }

    #[test]
    fn affine_axis_changes_do_not_change_the_ranking(
        axes in raw_axes(),
        w in weights(),
        scale in 0.1f64..10.0,
        shift in -1.0f64..1.0,
    ) {
        let moved: Vec<_> = axes.iter().map(|&(a, l, c, e)| (a, l, c, scale * e + shift)).collect();
        same_order(&order(&table(&axes, false), &w), &order(&table(&moved, false), &w))?;
    }

    #[test]
    fn feasible_set_is_a_flagged_subset(
        axes in raw_axes(),
        l_bud in 0.0f64..0.2,
        e_bud in 0.0f64..0.05,
        a_min in 0.0f64..1.0,
    ) {
        let profiles = table(&axes, false);
        let f = feasible_set(&profiles, l_bud, e_bud, a_min);
        let meets = |p: &AceProfile| p.raw.a_blend >= a_min && p.raw.l_eff <= l_bud && p.raw.e_per_frame <= e_bud;
        let any = profiles.iter().any(meets);
        prop_assert_eq!(f.fallback, !any);
        for p in &f.profiles {
            prop_assert!(profiles.iter().any(|q| std::ptr::eq(*p, q)));
            prop_assert!(f.fallback || meets(p));
        }
        let expected = if any { profiles.iter().filter(|p| meets(p)).count() } else { profiles.len() };
        prop_assert_eq!(f.profiles.len(), expected);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..25),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let rho = spearman(&a, &b).unwrap();
        let cubed: Vec<f64> = a.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        let squashed: Vec<f64> = b.iter().map(|x| x.atan()).collect();
        prop_assert!((spearman(&cubed, &squashed).unwrap() - rho).abs() < 1e-12);
        let flipped: Vec<f64> = b.iter().map(|x| -x).collect();
        prop_assert!((spearman(&a, &flipped).unwrap() + rho).abs() < 1e-12);
    }

    #[test]
    fn hold_only_picks_ranked_candidates(
        rounds in prop::collection::vec(prop::collection::vec((0usize..6, 0.0f64..1.0), 1..6), 1..30),
    ) {
        let mut state = HoldState::default();
        let params = HysteresisParams::default();
        for round in rounds {
            let mut ranking: Vec<RankedProfile> = Vec::new();
            for (id, score) in round {
                let point = ConfigPoint::new(format!("m{id}"), 320, 1);
                if ranking.iter().any(|r| r.point == point) {
                    continue;
                }
                ranking.push(RankedProfile { point, a_norm: 0.0, c_norm: 0.0, e_norm: 0.0, score });
            }
            ranking.sort_by(|a, b| b.score.total_cmp(&a.score));
            let out = smooth_and_hold(&mut state, &ranking, &params).unwrap();
            prop_assert!(out.chosen < ranking.len());
            prop_assert_eq!(state.incumbent(), Some(&ranking[out.chosen].point));
        }
    }
}

#[test]
fn empty_ranking_yields_nothing() {
    assert!(smooth_and_hold(&mut HoldState::default(), &[], &HysteresisParams::default()).is_none());
}
