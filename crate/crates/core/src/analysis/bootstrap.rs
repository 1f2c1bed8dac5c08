use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predictions::{PredictionRow, PredictionTable};
use super::AnalysisError;
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Outcome of the "candidate has the highest mean" bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub candidate: String,
    pub target: String,
    #[serde(rename = "B")]
    pub b: usize,
    pub failures: usize,
    pub p_value: f64,
    pub seed: u64,
}

/// Values of `target` per group. With `allowed`, only those groups are kept.
pub fn collect_groups(
    preds: &PredictionTable,
    key: impl Fn(&PredictionRow) -> Option<String>,
    target: &str,
    allowed: Option<&[String]>,
) -> Result<BTreeMap<String, Vec<f64>>, AnalysisError> {
    let t = preds.target_index(target)?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in &preds.rows {
        let Some(k) = key(row) else { continue };
        if allowed.is_some_and(|a| !a.contains(&k)) {
            continue;
        }
        groups.entry(k).or_default().push(row.scores[t]);
    }
    Ok(groups)
}

/// Stratified bootstrap: each resample redraws every group with replacement
/// at its own size. A resample succeeds only if the candidate's mean is
/// strictly above every other group's; p = (failures + 1) / (B + 1).
pub fn bootstrap_top_group(
    groups: &BTreeMap<String, Vec<f64>>,
    candidate: &str,
    target: &str,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult, AnalysisError> {
    if b == 0 {
        return Err(AnalysisError::NoResamples);
    }
    let values: Vec<(&String, &Vec<f64>)> = groups.iter().filter(|(_, v)| !v.is_empty()).collect();
    let cand = values
        .iter()
        .position(|(g, _)| g.as_str() == candidate)
        .ok_or_else(|| AnalysisError::UnknownGroup(candidate.to_string()))?;
    if values.len() < 2 {
        return Err(AnalysisError::SingleGroup);
    }
    let failures: usize = (0..b as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_for(seed, i);
            let means: Vec<f64> = values
                .iter()
                .map(|(_, v)| {
                    let n = v.len();
                    (0..n).map(|_| v[rng.random_range(0..n)]).sum::<f64>() / n as f64
                })
                .collect();
            let top = means[cand];
            let wins = means.iter().enumerate().all(|(j, &m)| j == cand || top > m);
            usize::from(!wins)
        })
        .sum();
    Ok(BootstrapResult {
        candidate: candidate.to_string(),
        target: target.to_string(),
        b,
        failures,
        p_value: (failures + 1) as f64 / (b + 1) as f64,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(spec: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        spec.iter().map(|(g, v)| (g.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn clear_winner_never_fails() {
        let g = groups(&[("africa", &[4.0, 4.1, 3.9, 4.2]), ("europe", &[2.0, 2.1, 1.9])]);
        let r = bootstrap_top_group(&g, "africa", "morality", 1000, 7).unwrap();
        assert_eq!(r.failures, 0);
        assert!((r.p_value - 1.0 / 1001.0).abs() < 1e-15);
    }

    #[test]
    fn clear_loser_always_fails() {
        let g = groups(&[("africa", &[4.0, 4.1, 3.9, 4.2]), ("europe", &[2.0, 2.1, 1.9])]);
        let r = bootstrap_top_group(&g, "europe", "morality", 500, 7).unwrap();
        assert_eq!((r.failures, r.p_value), (500, 1.0));
    }

    #[test]
    fn ties_count_as_failures() {
        let g = groups(&[("a", &[3.0, 3.0]), ("b", &[3.0])]);
        let r = bootstrap_top_group(&g, "a", "care", 50, 1).unwrap();
        assert_eq!(r.failures, 50);
    }

    #[test]
    fn deterministic_for_seed_and_thread_count() {
        let g = groups(&[("a", &[3.0, 3.4, 2.9, 3.1, 3.8]), ("b", &[3.2, 3.0, 3.3, 2.7])]);
        let r1 = bootstrap_top_group(&g, "a", "care", 2000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let r2 = pool.install(|| bootstrap_top_group(&g, "a", "care", 2000, 42).unwrap());
        assert_eq!(r1, r2);
        assert!(r1.failures > 0 && r1.failures < 2000);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = groups(&[("a", &[3.0]), ("b", &[])]);
        assert!(matches!(
            bootstrap_top_group(&g, "a", "t", 10, 0),
            Err(AnalysisError::SingleGroup)
        ));
        assert!(matches!(
            bootstrap_top_group(&g, "b", "t", 10, 0),
            Err(AnalysisError::UnknownGroup(_))
        ));
        assert!(matches!(
            bootstrap_top_group(&g, "a", "t", 0, 0),
            Err(AnalysisError::NoResamples)
        ));
    }

    #[test]
    fn serializes_b_field() {
        let r = BootstrapResult {
            candidate: "a".into(),
            target: "t".into(),
            b: 10,
            failures: 1,
            p_value: 2.0 / 11.0,
            seed: 3,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"B\":10"));
    }
}
