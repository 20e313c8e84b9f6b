//! Pareto dominance, frontier assembly, and the Purity and Spread metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// `a` dominates `b` when `b - a` is componentwise nonnegative and not zero.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// One collected objective vector with its origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub values: Vec<f64>,
    pub solver: String,
    pub instance: usize,
}

/// Mutually nondominated set of objective vectors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FrontierApproximation {
    points: Vec<FrontierPoint>,
}

impl FrontierApproximation {
    /// Filter a collection down to its nondominated members. Duplicates do
    /// not dominate each other and are all kept, so a point found by two
    /// solvers counts for both.
    pub fn from_points(candidates: Vec<FrontierPoint>) -> Self {
        let mut keep = Vec::new();
        for (i, p) in candidates.iter().enumerate() {
            let dominated = candidates
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && dominates(&q.values, &p.values));
            if !dominated {
                keep.push(p.clone());
            }
        }
        FrontierApproximation { points: keep }
    }

    pub fn points(&self) -> &[FrontierPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Purity of each solver against the combined reference frontier: the
/// fraction of the solver's own frontier points that survive in the
/// nondominated filter of the union. Solvers with an empty frontier are
/// reported as `None` (missing), matching the profile convention.
pub fn purity(
    per_solver: &BTreeMap<String, FrontierApproximation>,
) -> Result<BTreeMap<String, Option<f64>>> {
    if per_solver.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "purity needs at least two solvers, got {}",
            per_solver.len()
        )));
    }
    let union: Vec<&FrontierPoint> = per_solver.values().flat_map(|f| f.points()).collect();
    let mut out = BTreeMap::new();
    for (solver, frontier) in per_solver {
        if frontier.is_empty() {
            out.insert(solver.clone(), None);
            continue;
        }
        let surviving = frontier
            .points()
            .iter()
            .filter(|p| !union.iter().any(|q| dominates(&q.values, &p.values)))
            .count();
        out.insert(
            solver.clone(),
            Some(surviving as f64 / frontier.len() as f64),
        );
    }
    Ok(out)
}

/// Componentwise extremes over a set of objective vectors.
pub fn objective_extremes<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in points {
        for j in 0..m {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    (lo, hi)
}

/// Spread metrics of a frontier given per-objective extreme values
/// (normally the extremes of the combined reference frontier, shared by all
/// solvers being compared).
///
/// With the points sorted by objective `j` as `v_1 <= ... <= v_N` and the
/// extremes `e_min <= v_1`, `e_max >= v_N`, the gap sequence is
/// `d_0 = v_1 - e_min`, `d_i = v_{i+1} - v_i`, `d_N = e_max - v_N`:
///
/// * `Gamma = max_j max_i d_{i,j}` — largest gap;
/// * `Delta = max_j (d_0 + d_N + sum_{i=1..N-1} |d_i - dbar|) /
///   (d_0 + d_N + (N-1) dbar)` with `dbar` the mean interior gap —
///   normalized deviation from evenly spaced points.
pub fn spread_metrics(
    frontier: &[Vec<f64>],
    extremes_min: &[f64],
    extremes_max: &[f64],
) -> Result<(f64, f64)> {
    let n = frontier.len();
    if n < 2 {
        return Err(Error::UndefinedMetric(format!(
            "spread needs at least two frontier points, got {n}"
        )));
    }
    let m = frontier[0].len();
    let mut gamma = 0.0f64;
    let mut delta = 0.0f64;
    for j in 0..m {
        let mut vals: Vec<f64> = frontier.iter().map(|p| p[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d0 = (vals[0] - extremes_min[j]).max(0.0);
        let dn = (extremes_max[j] - vals[n - 1]).max(0.0);
        let interior: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        gamma = gamma
            .max(d0)
            .max(dn)
            .max(interior.iter().cloned().fold(0.0, f64::max));
        let dbar = interior.iter().sum::<f64>() / interior.len() as f64;
        let dev: f64 = interior.iter().map(|d| (d - dbar).abs()).sum();
        let num = d0 + dn + dev;
        let den = d0 + dn + interior.len() as f64 * dbar;
        if den > 0.0 {
            delta = delta.max(num / den);
        }
    }
    Ok((gamma, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(values: Vec<f64>, solver: &str) -> FrontierPoint {
        FrontierPoint {
            values,
            solver: solver.into(),
            instance: 0,
        }
    }

    #[test]
    fn dominance_is_strict_somewhere() {
        assert!(dominates(&[1.0, 2.0], &[1.0, 3.0]));
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(!dominates(&[1.0, 4.0], &[2.0, 3.0]));
    }

    #[test]
    fn filter_removes_dominated() {
        let f = FrontierApproximation::from_points(vec![
            pt(vec![0.0, 2.0], "a"),
            pt(vec![1.0, 1.0], "a"),
            pt(vec![2.0, 0.0], "a"),
            pt(vec![2.0, 2.0], "a"), // dominated by (1,1)
        ]);
        assert_eq!(f.len(), 3);
        // Brute force: nothing left dominates anything left.
        for p in f.points() {
            for q in f.points() {
                assert!(!dominates(&p.values, &q.values) || p.values == q.values);
            }
        }
    }

    #[test]
    fn purity_total_domination() {
        let mut map = BTreeMap::new();
        map.insert(
            "a".to_string(),
            FrontierApproximation::from_points(vec![pt(vec![2.0, 2.0], "a")]),
        );
        map.insert(
            "b".to_string(),
            FrontierApproximation::from_points(vec![pt(vec![1.0, 1.0], "b")]),
        );
        let p = purity(&map).unwrap();
        assert_relative_eq!(p["a"].unwrap(), 0.0);
        assert_relative_eq!(p["b"].unwrap(), 1.0);
    }

    #[test]
    fn purity_identical_outputs() {
        let mk = |s: &str| {
            FrontierApproximation::from_points(vec![
                pt(vec![0.0, 1.0], s),
                pt(vec![1.0, 0.0], s),
            ])
        };
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), mk("a"));
        map.insert("b".to_string(), mk("b"));
        let p = purity(&map).unwrap();
        assert_relative_eq!(p["a"].unwrap(), 1.0);
        assert_relative_eq!(p["b"].unwrap(), 1.0);
    }

    #[test]
    fn purity_shared_point_counts_for_both() {
        let mut map = BTreeMap::new();
        map.insert(
            "a".to_string(),
            FrontierApproximation::from_points(vec![
                pt(vec![0.0, 3.0], "a"),
                pt(vec![1.5, 1.5], "a"),
            ]),
        );
        map.insert(
            "b".to_string(),
            FrontierApproximation::from_points(vec![
                pt(vec![1.5, 1.5], "b"),
                pt(vec![2.0, 1.0], "b"),
            ]),
        );
        // Union frontier: all four survive (none dominated).
        let p = purity(&map).unwrap();
        assert_relative_eq!(p["a"].unwrap(), 1.0);
        assert_relative_eq!(p["b"].unwrap(), 1.0);
    }

    #[test]
    fn purity_missing_for_empty_frontier() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), FrontierApproximation::default());
        map.insert(
            "b".to_string(),
            FrontierApproximation::from_points(vec![pt(vec![1.0, 1.0], "b")]),
        );
        let p = purity(&map).unwrap();
        assert!(p["a"].is_none());
        assert_relative_eq!(p["b"].unwrap(), 1.0);
    }

    #[test]
    fn spread_of_evenly_spaced_points() {
        let frontier: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![i as f64, 4.0 - i as f64])
            .collect();
        let (lo, hi) = objective_extremes(frontier.iter().map(|v| v.as_slice()), 2);
        let (gamma, delta) = spread_metrics(&frontier, &lo, &hi).unwrap();
        assert_relative_eq!(gamma, 1.0);
        // Evenly spaced with zero extreme gaps: all deviations vanish.
        assert_relative_eq!(delta, 0.0);
    }

    #[test]
    fn spread_two_points_uses_extreme_gaps() {
        let frontier = vec![vec![1.0, 3.0], vec![3.0, 1.0]];
        let (gamma, delta) = spread_metrics(&frontier, &[0.0, 0.0], &[4.0, 4.0]).unwrap();
        // Per objective: d0 = 1, interior = 2, dn = 1.
        assert_relative_eq!(gamma, 2.0);
        // num = 1 + 1 + 0, den = 1 + 1 + 2
        assert_relative_eq!(delta, 0.5);
    }

    #[test]
    fn spread_undefined_for_singleton() {
        assert!(spread_metrics(&[vec![1.0, 1.0]], &[0.0, 0.0], &[2.0, 2.0]).is_err());
    }
}
