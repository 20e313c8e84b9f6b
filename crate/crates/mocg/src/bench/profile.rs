//! Performance profiles over a cost matrix.
//!
//! For instance `i` and solver `s` with positive cost `c_{i,s}` (`None` for
//! failures), the performance ratio is `r_{i,s} = c_{i,s} / min_s c_{i,s}`;
//! failed instances get an infinite ratio. The profile of a solver is the
//! step function `rho_s(tau)` = fraction of instances with `r_{i,s} <= tau`.
//! Ties at the best cost count for every solver attaining it, so
//! `rho_s(1)` is the solver's efficiency share and the rightmost value its
//! robustness.

use serde::{Deserialize, Serialize};

/// Step function sampled at its breakpoints (left-continuous jumps).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub solver: String,
    /// `(tau, rho(tau))` with strictly increasing `tau`, starting at 1.
    pub steps: Vec<(f64, f64)>,
}

impl ProfileCurve {
    pub fn value_at(&self, tau: f64) -> f64 {
        let mut v = 0.0;
        for &(t, r) in &self.steps {
            if t <= tau {
                v = r;
            } else {
                break;
            }
        }
        v
    }

    /// Fraction of instances eventually solved.
    pub fn robustness(&self) -> f64 {
        self.steps.last().map(|&(_, r)| r).unwrap_or(0.0)
    }

    pub fn efficiency(&self) -> f64 {
        self.value_at(1.0)
    }
}

/// Build one curve per solver from `costs[instance][solver]`.
pub fn performance_profiles(costs: &[Vec<Option<f64>>], solvers: &[String]) -> Vec<ProfileCurve> {
    let n_inst = costs.len();
    let n_solv = solvers.len();
    let mut ratios = vec![vec![f64::INFINITY; n_solv]; n_inst];
    for (i, row) in costs.iter().enumerate() {
        let best = row
            .iter()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() || best <= 0.0 {
            continue;
        }
        for (s, c) in row.iter().enumerate() {
            if let Some(c) = c {
                ratios[i][s] = c / best;
            }
        }
    }
    let mut taus: Vec<f64> = ratios
        .iter()
        .flatten()
        .cloned()
        .filter(|r| r.is_finite())
        .collect();
    taus.push(1.0);
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * b.abs());

    solvers
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let steps = taus
                .iter()
                .map(|&tau| {
                    let count = ratios
                        .iter()
                        .filter(|row| row[s] <= tau * (1.0 + 1e-12))
                        .count();
                    (tau, count as f64 / n_inst.max(1) as f64)
                })
                .collect();
            ProfileCurve {
                solver: name.clone(),
                steps,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solvers() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn strictly_faster_solver_owns_tau_one() {
        let costs = vec![
            vec![Some(1.0), Some(2.0)],
            vec![Some(2.0), Some(5.0)],
            vec![Some(1.0), Some(3.0)],
        ];
        let p = performance_profiles(&costs, &solvers());
        assert_relative_eq!(p[0].efficiency(), 1.0);
        assert_relative_eq!(p[1].efficiency(), 0.0);
        assert_relative_eq!(p[0].robustness(), 1.0);
        assert_relative_eq!(p[1].robustness(), 1.0);
    }

    #[test]
    fn ties_count_for_both() {
        let costs = vec![vec![Some(2.0), Some(2.0)], vec![Some(4.0), Some(4.0)]];
        let p = performance_profiles(&costs, &solvers());
        assert_relative_eq!(p[0].efficiency(), 1.0);
        assert_relative_eq!(p[1].efficiency(), 1.0);
    }

    #[test]
    fn hand_computed_three_by_two() {
        // costs: i0: (1, 3), i1: (4, 2), i2: (9, fail)
        let costs = vec![
            vec![Some(1.0), Some(3.0)],
            vec![Some(4.0), Some(2.0)],
            vec![Some(9.0), None],
        ];
        let p = performance_profiles(&costs, &solvers());
        // Solver a ratios: 1, 2, 1 -> rho(1) = 2/3, rho(2) = 1
        assert_relative_eq!(p[0].value_at(1.0), 2.0 / 3.0);
        assert_relative_eq!(p[0].value_at(1.5), 2.0 / 3.0);
        assert_relative_eq!(p[0].value_at(2.0), 1.0);
        // Solver b ratios: 3, 1, inf -> rho(1) = 1/3, rho(3) = 2/3, never 1
        assert_relative_eq!(p[1].value_at(1.0), 1.0 / 3.0);
        assert_relative_eq!(p[1].value_at(2.9), 1.0 / 3.0);
        assert_relative_eq!(p[1].value_at(3.0), 2.0 / 3.0);
        assert_relative_eq!(p[1].robustness(), 2.0 / 3.0);
    }

    #[test]
    fn curves_are_monotone_and_bounded() {
        let costs = vec![
            vec![Some(1.0), Some(1.5)],
            vec![Some(2.0), None],
            vec![None, Some(1.0)],
            vec![Some(5.0), Some(2.5)],
        ];
        for curve in performance_profiles(&costs, &solvers()) {
            let mut last = 0.0;
            for &(_, r) in &curve.steps {
                assert!(r >= last - 1e-15);
                assert!((0.0..=1.0).contains(&r));
                last = r;
            }
        }
    }
}
