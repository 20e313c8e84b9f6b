//! Composite multiobjective problems: a smooth vector term plus a convex,
//! possibly nonsmooth term over a box domain.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Error;
use crate::gap;
use crate::robust::PolyhedralUncertaintySet;
use crate::Result;

/// Per-coordinate tolerance for domain membership checks.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Axis-aligned box `{ x : lb <= x <= ub }` with finite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "box with {} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::InvalidConfig("empty box".into()));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "box bound {i} not finite: [{l}, {u}]"
                )));
            }
            if l > u {
                return Err(Error::InvalidConfig(format!(
                    "box bound {i} empty: [{l}, {u}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// Convenience constructor for `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean length of the main diagonal, an upper bound for the
    /// diameter of the domain.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point of length {} in box of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] - DOMAIN_TOL && v <= self.upper[i] + DOMAIN_TOL) {
                return Err(Error::OutOfDomain {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// The differentiable part `H(x) = (h_1(x), ..., h_m(x))`.
#[derive(Clone)]
pub struct SmoothObjective {
    n: usize,
    m: usize,
    eval: EvalFn,
    jac: JacFn,
    lipschitz: Option<Vec<f64>>,
    /// Known bound for `sup |grad h_j|` over the intended box, when one is
    /// derivable in closed form.
    grad_sup: Option<f64>,
    convex: bool,
}

impl SmoothObjective {
    pub fn new(
        n: usize,
        m: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        lipschitz: Option<Vec<f64>>,
        convex: bool,
    ) -> Result<Self> {
        if let Some(l) = &lipschitz {
            if l.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} Lipschitz constants for {m} objectives",
                    l.len()
                )));
            }
            let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Err(Error::InvalidConfig(
                    "max gradient Lipschitz constant must be positive".into(),
                ));
            }
        }
        Ok(SmoothObjective {
            n,
            m,
            eval: Arc::new(eval),
            jac: Arc::new(jac),
            lipschitz,
            grad_sup: None,
            convex,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_objectives(&self) -> usize {
        self.m
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    pub fn lipschitz(&self) -> Option<&[f64]> {
        self.lipschitz.as_deref()
    }

    /// Largest per-objective gradient Lipschitz constant, when known.
    pub fn max_lipschitz(&self) -> Option<f64> {
        self.lipschitz
            .as_ref()
            .map(|l| l.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn with_lipschitz(mut self, lipschitz: Vec<f64>) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn grad_sup(&self) -> Option<f64> {
        self.grad_sup
    }

    pub fn with_grad_sup(mut self, bound: f64) -> Self {
        self.grad_sup = Some(bound);
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jac)(x)
    }
}

impl fmt::Debug for SmoothObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("lipschitz", &self.lipschitz)
            .field("convex", &self.convex)
            .finish()
    }
}

/// The convex part `G(x)`.
#[derive(Debug, Clone)]
pub enum NonsmoothTerm {
    Zero,
    /// One polyhedral uncertainty set per objective; `g_j` is the support
    /// function of the `j`-th set.
    SupportFunction(Vec<PolyhedralUncertaintySet>),
}

impl NonsmoothTerm {
    pub fn is_zero(&self) -> bool {
        matches!(self, NonsmoothTerm::Zero)
    }
}

/// Objective values split into their composite parts.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
}

/// A named problem `min F(x) = G(x) + H(x)` over a box.
///
/// Problems are immutable after construction and cheap to clone (the smooth
/// term is shared), so they can be handed to concurrent runs freely.
/// Evaluation counters live with the run, not here.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    pub name: String,
    smooth: SmoothObjective,
    nonsmooth: NonsmoothTerm,
    domain: BoxDomain,
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        smooth: SmoothObjective,
        nonsmooth: NonsmoothTerm,
        domain: BoxDomain,
    ) -> Result<Self> {
        if smooth.dim() != domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "smooth term dimension {} vs box dimension {}",
                smooth.dim(),
                domain.dim()
            )));
        }
        if let NonsmoothTerm::SupportFunction(sets) = &nonsmooth {
            if sets.len() != smooth.num_objectives() {
                return Err(Error::DimensionMismatch(format!(
                    "{} uncertainty sets for {} objectives",
                    sets.len(),
                    smooth.num_objectives()
                )));
            }
            for (j, s) in sets.iter().enumerate() {
                if s.dim() != smooth.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "set {j} has dimension {} but problem has {}",
                        s.dim(),
                        smooth.dim()
                    )));
                }
            }
        }
        Ok(CompositeProblem {
            name: name.into(),
            smooth,
            nonsmooth,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn num_objectives(&self) -> usize {
        self.smooth.num_objectives()
    }

    pub fn smooth(&self) -> &SmoothObjective {
        &self.smooth
    }

    pub fn nonsmooth(&self) -> &NonsmoothTerm {
        &self.nonsmooth
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Values of the nonsmooth part alone.
    pub fn nonsmooth_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.nonsmooth {
            NonsmoothTerm::Zero => Ok(vec![0.0; self.num_objectives()]),
            NonsmoothTerm::SupportFunction(sets) => sets
                .iter()
                .map(|s| gap::support_value(s, x))
                .collect::<Result<Vec<_>>>(),
        }
    }

    /// Evaluate `F = G + H` at `x`, split into parts.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.domain.check(x)?;
        let h = self.smooth.eval(x);
        let g = self.nonsmooth_values(x)?;
        let f = h.iter().zip(&g).map(|(a, b)| a + b).collect();
        Ok(Evaluation { f, h, g })
    }

    /// Jacobian of the smooth part, one row per objective.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(x)?;
        Ok(self.smooth.jacobian(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jos1_small(n: usize) -> CompositeProblem {
        let nf = n as f64;
        let smooth = SmoothObjective::new(
            n,
            2,
            move |x: &[f64]| {
                let s1: f64 = x.iter().map(|v| v * v).sum();
                let s2: f64 = x.iter().map(|v| (v - 2.0) * (v - 2.0)).sum();
                vec![s1 / nf, s2 / nf]
            },
            move |x: &[f64]| {
                let mut j = DMatrix::zeros(2, x.len());
                for (i, &v) in x.iter().enumerate() {
                    j[(0, i)] = 2.0 * v / nf;
                    j[(1, i)] = 2.0 * (v - 2.0) / nf;
                }
                j
            },
            Some(vec![2.0 / nf, 2.0 / nf]),
            true,
        )
        .unwrap();
        CompositeProblem::new(
            "jos1-test",
            smooth,
            NonsmoothTerm::Zero,
            BoxDomain::cube(n, -100.0, 100.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_at_origin() {
        let p = jos1_small(2);
        let e = p.evaluate(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(e.f[0], 0.0);
        assert_relative_eq!(e.f[1], 4.0);
        // With a zero nonsmooth term F coincides with H exactly.
        assert_eq!(e.f, e.h);
        assert!(e.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_rows() {
        let p = jos1_small(2);
        let j = p.jacobian(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(j[(0, 0)], 1.0);
        assert_relative_eq!(j[(0, 1)], 1.0);
        assert_relative_eq!(j[(1, 0)], -1.0);
        assert_relative_eq!(j[(1, 1)], -1.0);
    }

    #[test]
    fn out_of_domain_is_reported() {
        let p = jos1_small(2);
        let err = p.evaluate(&[0.0, 100.1]).unwrap_err();
        match err {
            Error::OutOfDomain { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn domain_tolerance_is_tight() {
        let p = jos1_small(1);
        assert!(p.evaluate(&[100.0 + 0.5e-12]).is_ok());
        assert!(p.evaluate(&[100.0 + 1.0e-11]).is_err());
    }

    #[test]
    fn diameter_of_unit_square() {
        let b = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        assert_relative_eq!(b.diameter(), 8.0f64.sqrt());
    }
}
