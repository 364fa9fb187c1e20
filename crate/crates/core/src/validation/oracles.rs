//! Brute-force reference implementations. Nothing here calls into the code
//! it is used to check: each function works from the definitions directly.

use std::collections::BTreeMap;

use crate::model::{Criterion, PreferenceRecord, SizeDirection, Vote};

/// Winning rate per model over the questions of one criterion, by direct
/// tally of majority votes. Questions of other criteria are ignored.
pub fn oracle_winning_rates(records: &[PreferenceRecord], criterion: Criterion) -> BTreeMap<String, f64> {
    let mut models: Vec<&str> = Vec::new();
    for r in records.iter().filter(|r| r.criterion == criterion) {
        for m in [&r.sample_a.model_id, &r.sample_b.model_id] {
            if !models.contains(&m.as_str()) {
                models.push(m);
            }
        }
    }
    let mut out = BTreeMap::new();
    for m in models {
        let mut won = 0usize;
        let mut shown = 0usize;
        for r in records.iter().filter(|r| r.criterion == criterion) {
            let a_votes = r.votes.iter().filter(|v| matches!(v, Vote::A)).count();
            let b_votes = r.votes.len() - a_votes;
            if r.sample_a.model_id == m {
                shown += 1;
                if a_votes > b_votes {
                    won += 1;
                }
            } else if r.sample_b.model_id == m {
                shown += 1;
                if b_votes > a_votes {
                    won += 1;
                }
            }
        }
        out.insert(m.to_string(), won as f64 / shown as f64);
    }
    out
}

/// Metric winning rates from scored pairs `(model a, score a, model b, score b)`;
/// equal scores give each side half a win.
pub fn oracle_metric_rates(pairs: &[(String, f64, String, f64)]) -> BTreeMap<String, f64> {
    let mut models: Vec<&String> = pairs.iter().flat_map(|(a, _, b, _)| [a, b]).collect();
    models.sort();
    models.dedup();
    models
        .into_iter()
        .map(|m| {
            let mut won = 0.0;
            let mut shown = 0.0;
            for (a, sa, b, sb) in pairs {
                let (mine, theirs) = if a == m {
                    (sa, sb)
                } else if b == m {
                    (sb, sa)
                } else {
                    continue;
                };
                shown += 1.0;
                won += if mine > theirs {
                    1.0
                } else if mine == theirs {
                    0.5
                } else {
                    0.0
                };
            }
            (m.clone(), won / shown)
        })
        .collect()
}

/// Sample Pearson correlation; `None` for fewer than two points or a
/// constant input.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Mid-ranks by counting: 1 + (values below) + (ties − 1) / 2.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|u| *u < v).count() as f64;
            let equal = x.iter().filter(|u| *u == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

/// Kendall tau-b over all pairs.
pub fn oracle_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let denom = (((concordant + discordant + tie_x) * (concordant + discordant + tie_y)) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / denom)
}

/// One pairwise question of a dense weight-fitting instance: each side holds
/// one value per weight component and scores `Σ w_k v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQuestion {
    pub model_a: String,
    pub values_a: Vec<f64>,
    pub model_b: String,
    pub values_b: Vec<f64>,
    pub a_wins: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    pub weights: Vec<f64>,
    pub correlation: Option<f64>,
    pub degenerate: bool,
    pub candidates: usize,
}

fn dense_correlation(questions: &[DenseQuestion], w: &[f64]) -> Option<f64> {
    let mut human_pairs = Vec::new();
    let mut metric_pairs = Vec::new();
    for q in questions {
        let sa: f64 = q.values_a.iter().zip(w).map(|(v, k)| v * k).sum();
        let sb: f64 = q.values_b.iter().zip(w).map(|(v, k)| v * k).sum();
        metric_pairs.push((q.model_a.clone(), sa, q.model_b.clone(), sb));
        let (ha, hb) = if q.a_wins { (1.0, 0.0) } else { (0.0, 1.0) };
        human_pairs.push((q.model_a.clone(), ha, q.model_b.clone(), hb));
    }
    let human = oracle_metric_rates(&human_pairs);
    let metric = oracle_metric_rates(&metric_pairs);
    let u: Vec<f64> = human.values().copied().collect();
    let v: Vec<f64> = metric.values().copied().collect();
    oracle_pearson(&u, &v)
}

/// Integer compositions of `total` into `parts` in ascending lexicographic
/// order, by plain recursion.
fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(parts - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive argmax of the human/metric Pearson correlation over the
/// simplex grid. Ties keep the first candidate in lexicographic order; the
/// uniform vector replaces the grid best only when strictly better.
pub fn oracle_grid_argmax(questions: &[DenseQuestion], dim: usize, step: f64) -> OracleFit {
    assert!((1..=3).contains(&dim), "oracle handles dim <= 3");
    assert!(step >= 0.25, "oracle handles step >= 0.25");
    let n = (1.0 / step).round() as u32;
    let grid = compositions(dim, n);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in &grid {
        let w: Vec<f64> = c.iter().map(|k| *k as f64 / n as f64).collect();
        if let Some(r) = dense_correlation(questions, &w) {
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, w));
            }
        }
    }
    let uniform = vec![1.0 / dim as f64; dim];
    if let Some(u) = dense_correlation(questions, &uniform) {
        if best.as_ref().is_none_or(|(b, _)| u > *b) {
            best = Some((u, uniform.clone()));
        }
    }
    match best {
        Some((r, w)) => OracleFit {
            weights: w,
            correlation: Some(r),
            degenerate: false,
            candidates: grid.len() + 1,
        },
        None => OracleFit {
            weights: uniform,
            correlation: None,
            degenerate: true,
            candidates: grid.len() + 1,
        },
    }
}

pub fn ref_iq(fid: f64) -> f64 {
    let e = (2.0 * fid / 25.0).exp();
    1.0 - (e - 1.0) / (e + 1.0)
}

/// Piecewise size-fidelity ramp written out case by case.
pub fn ref_size_fidelity(a0: f64, ae: f64, direction: SizeDirection, r1: f64, r2: f64) -> f64 {
    let rho = (ae / a0).sqrt();
    match direction {
        SizeDirection::Larger if rho >= r1 => 1.0,
        SizeDirection::Larger if rho > 1.0 => (rho - 1.0) / (r1 - 1.0),
        SizeDirection::Larger => 0.0,
        SizeDirection::Smaller if rho <= r2 => 1.0,
        SizeDirection::Smaller if rho < 1.0 => (1.0 - rho) / (1.0 - r2),
        SizeDirection::Smaller => 0.0,
    }
}

pub fn ref_size_consistency(a0: f64, ae: f64, h: f64, w: f64) -> f64 {
    let rho = (ae / a0).sqrt();
    let r3 = (h * w / a0).sqrt();
    if rho <= 1.0 {
        rho
    } else if r3 <= 1.0 || rho >= r3 {
        0.0
    } else {
        (r3 - rho) / (r3 - 1.0)
    }
}

pub fn ref_position_consistency(c0: (f64, f64), ce: (f64, f64), h: f64, w: f64) -> f64 {
    let d = (ce.0 - c0.0).hypot(ce.1 - c0.1);
    let diag = h.hypot(w);
    if d >= diag {
        0.0
    } else {
        1.0 - d / diag
    }
}

/// Fréchet distance of two gaussians with diagonal covariances.
pub fn oracle_frechet_diagonal(mu1: &[f64], var1: &[f64], mu2: &[f64], var2: &[f64]) -> f64 {
    let mean_term: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b).powi(2)).sum();
    let cov_term: f64 = var1
        .iter()
        .zip(var2)
        .map(|(a, b)| a + b - 2.0 * (a * b).sqrt())
        .sum();
    mean_term + cov_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SampleRef;

    #[test]
    fn single_question_rates() {
        let r = PreferenceRecord {
            question_id: "q".into(),
            criterion: Criterion::OF,
            query_id: "x".into(),
            sample_a: SampleRef {
                model_id: "a".into(),
                image: "a/x".into(),
            },
            sample_b: SampleRef {
                model_id: "b".into(),
                image: "b/x".into(),
            },
            votes: vec![Vote::B, Vote::A, Vote::B],
        };
        let rates = oracle_winning_rates(std::slice::from_ref(&r), Criterion::OF);
        assert_eq!(rates["a"], 0.0);
        assert_eq!(rates["b"], 1.0);
        assert!(oracle_winning_rates(&[r], Criterion::BC).is_empty());
    }

    #[test]
    fn two_dim_half_step_has_three_candidates() {
        assert_eq!(compositions(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn constant_human_rates_are_degenerate() {
        let q = |a: &str, b: &str, a_wins| DenseQuestion {
            model_a: a.into(),
            values_a: vec![0.2, 0.9],
            model_b: b.into(),
            values_b: vec![0.4, 0.1],
            a_wins,
        };
        // Every model wins exactly half its questions.
        let qs = vec![q("x", "y", true), q("y", "z", true), q("z", "x", true)];
        let fit = oracle_grid_argmax(&qs, 2, 0.5);
        assert!(fit.degenerate);
        assert_eq!(fit.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn kendall_with_ties() {
        // Hand count: C = 2, D = 0, one x-tie, no y-ties.
        let x = [1.0, 2.0, 2.0];
        let y = [1.0, 3.0, 2.0];
        let expected = 2.0 / ((3.0f64) * 2.0).sqrt();
        assert!((oracle_kendall(&x, &y).unwrap() - expected).abs() < 1e-15);
    }
}
