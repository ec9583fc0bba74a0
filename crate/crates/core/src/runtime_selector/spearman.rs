use serde::{Deserialize, Serialize};

use crate::ace_profiler::minmax_normalize;
use crate::error::{invalid, Result};

/// 1-based ranks with ties sharing the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1 ..= j)
        let shared = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation (Pearson correlation of average ranks).
///
/// A constant input has no rank variance; the correlation is reported as 0.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(invalid("spearman needs at least two observations"));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityMix {
    pub c_norm: Vec<f64>,
    pub alpha_flop: f64,
    pub alpha_lat: f64,
    pub rho: Option<f64>,
}

/// Normalized complexity as a latency/FLOPs mixture.
///
/// The FLOPs share is `0.3·(1 − |ρ|)` where ρ is the Spearman correlation of
/// FLOPs and latency, so a FLOPs axis that merely echoes latency adds nothing.
/// Without FLOPs (or with fewer than two profiles) complexity is latency alone.
pub fn complexity_mix(latencies: &[f64], flops: Option<&[f64]>) -> Result<ComplexityMix> {
    let lat_norm = minmax_normalize(latencies)?;
    let flops = flops.filter(|f| latencies.len() >= 2 && f.len() == latencies.len());
    let Some(flops) = flops else {
        return Ok(ComplexityMix {
            c_norm: lat_norm,
            alpha_flop: 0.0,
            alpha_lat: 1.0,
            rho: None,
        });
    };
    let rho = spearman(flops, latencies)?;
    let alpha_flop = 0.3 * (1.0 - rho.abs());
    let alpha_lat = 1.0 - alpha_flop;
    let flop_norm = minmax_normalize(flops)?;
    let c_norm = lat_norm
        .iter()
        .zip(&flop_norm)
        .map(|(l, f)| alpha_lat * l + alpha_flop * f)
        .collect();
    Ok(ComplexityMix {
        c_norm,
        alpha_flop,
        alpha_lat,
        rho: Some(rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-15);
        let b = [2.0, 1.0, 4.0, 3.0];
        assert!((spearman(&a, &b).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors_and_degenerate() {
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert_eq!(spearman(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn mix_weights() {
        let lat = [1.0, 2.0, 3.0, 4.0];
        let tracked = complexity_mix(&lat, Some(&[10.0, 20.0, 30.0, 40.0])).unwrap();
        assert_eq!(tracked.alpha_flop, 0.0);
        assert_eq!(tracked.c_norm, minmax_normalize(&lat).unwrap());

        let absent = complexity_mix(&lat, None).unwrap();
        assert_eq!(absent.alpha_lat, 1.0);
        assert_eq!(absent.c_norm, tracked.c_norm);

        // ranks of [2,1,4,3] vs [1,2,3,4] correlate at 0.6
        let partial = complexity_mix(&lat, Some(&[2.0, 1.0, 4.0, 3.0])).unwrap();
        assert!((partial.alpha_flop - 0.3 * 0.4).abs() < 1e-12);
        assert!((partial.alpha_lat + partial.alpha_flop - 1.0).abs() < 1e-15);
    }
}
