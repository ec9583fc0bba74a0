use serde::{Deserialize, Serialize};

use super::AceWeights;
use crate::ace_profiler::{ace_score, AceProfile, ConfigPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedProfile {
    #[serde(flatten)]
    pub point: ConfigPoint,
    pub a_norm: f64,
    pub c_norm: f64,
    pub e_norm: f64,
    pub score: f64,
}

/// Scores every profile on its normalized axes and sorts best first.
///
/// Ties fall back to lower normalized energy, then lower complexity, then
/// configuration order.
pub fn rank(profiles: &[AceProfile], weights: &AceWeights) -> Vec<RankedProfile> {
    let mut ranked: Vec<RankedProfile> = profiles
        .iter()
        .map(|p| RankedProfile {
            point: p.point.clone(),
            a_norm: p.a_norm,
            c_norm: p.c_norm,
            e_norm: p.e_norm,
            score: ace_score(p.a_norm, p.c_norm, p.e_norm, weights),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.e_norm.total_cmp(&b.e_norm))
            .then(a.c_norm.total_cmp(&b.c_norm))
            .then_with(|| a.point.cmp(&b.point))
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ace_profiler::RawProfile;

    fn normed(model: &str, a: f64, c: f64, e: f64) -> AceProfile {
        let mut p = AceProfile::from_raw(
            ConfigPoint::new(model, 320, 1),
            RawProfile::from_axes(a, 0.01, None, 0.001),
        );
        p.a_norm = a;
        p.c_norm = c;
        p.e_norm = e;
        p
    }

    #[test]
    fn accuracy_only_orders_by_accuracy() {
        let t = vec![normed("a", 0.2, 0.0, 0.0), normed("b", 1.0, 1.0, 1.0), normed("c", 0.5, 0.3, 0.2)];
        let w = AceWeights::from_raw(1.0, 0.0, 0.0).unwrap();
        let order: Vec<_> = rank(&t, &w).into_iter().map(|r| r.point.model).collect();
        assert_eq!(order, vec!["b", "c", "a"]);
    }

    #[test]
    fn hand_scored_case() {
        let t = vec![normed("a", 1.0, 1.0, 1.0), normed("b", 0.8, 0.4, 0.5), normed("c", 0.0, 0.0, 0.0)];
        let w = AceWeights::from_raw(0.5, 0.3, 0.2).unwrap();
        // a: 0.5-0.3-0.2 = 0.0; b: 0.4-0.12-0.1 = 0.18; c: 0
        let mut oracle: Vec<(f64, f64, f64, &str)> = t
            .iter()
            .map(|p| (0.5 * p.a_norm - 0.3 * p.c_norm - 0.2 * p.e_norm, p.e_norm, p.c_norm, p.point.model.as_str()))
            .collect();
        oracle.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        let got = rank(&t, &w);
        let names: Vec<&str> = got.iter().map(|r| r.point.model.as_str()).collect();
        assert_eq!(names, oracle.iter().map(|o| o.3).collect::<Vec<_>>());
        assert_eq!(names, vec!["b", "c", "a"]);
        assert!((got[0].score - 0.18).abs() < 1e-12);
    }
}
