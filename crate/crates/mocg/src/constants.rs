//! Estimation of the problem constants used by the adaptive step size and
//! the step-size lower-bound checks.
//!
//! The quantities are:
//!
//! * `rho` — supremum of the smooth gradient norms over the box;
//! * `l_g` — largest Lipschitz constant of the support terms, which is the
//!   largest Euclidean norm over the uncertainty sets;
//! * `omega` — box diagonal, an upper bound for the domain diameter;
//! * `l` — largest gradient Lipschitz constant of the smooth part;
//! * `gamma = min( 1 / ((rho + l_g) omega), 2 omega1 (1 - zeta) / (l omega^2) )`,
//!   the Armijo step-size floor coefficient.
//!
//! Estimates err on the conservative side (upper bounds for `rho`, `l_g`
//! and `l`; hence a lower bound for `gamma`), so that `lambda_k >=
//! gamma |theta(x_k)|` remains a valid check when the analytic constants
//! are not available.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::problem::{BoxDomain, CompositeProblem, NonsmoothTerm, SmoothObjective};

/// Safety factor on sampled gradient suprema.
const RHO_SAFETY: f64 = 1.1;
/// Safety factor on sampled Lipschitz ratios.
const LIPSCHITZ_SAFETY: f64 = 1.5;
const SAMPLE_PAIRS: usize = 1000;

/// Problem constants, with the derived Armijo floor coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsEstimate {
    pub rho: f64,
    pub l_g: f64,
    pub omega: f64,
    pub l: f64,
    pub gamma: f64,
    /// `max_j f_j(x0)` for a given start; filled by the caller.
    pub f_start: Option<f64>,
    /// Best objective value seen over a multistart pool; an estimate of the
    /// per-objective infimum, so bounds using it are conservative one way.
    pub f_inf: Option<f64>,
}

/// Per-objective gradient Lipschitz constants by sampling difference
/// quotients over `SAMPLE_PAIRS` seeded point pairs, inflated by 1.5.
pub fn estimate_smooth_lipschitz(smooth: &SmoothObjective, domain: &BoxDomain, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = smooth.dim();
    let m = smooth.num_objectives();
    let mut best = vec![0.0f64; m];
    for _ in 0..SAMPLE_PAIRS {
        let x = sample_point(&mut rng, domain);
        let y = sample_point(&mut rng, domain);
        let dist: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist < 1e-12 {
            continue;
        }
        let jx = smooth.jacobian(&x);
        let jy = smooth.jacobian(&y);
        for j in 0..m {
            let mut diff2 = 0.0;
            for i in 0..n {
                let d = jx[(j, i)] - jy[(j, i)];
                diff2 += d * d;
            }
            best[j] = best[j].max(diff2.sqrt() / dist);
        }
    }
    for b in &mut best {
        *b *= LIPSCHITZ_SAFETY;
        if *b == 0.0 {
            // A vanishing sampled ratio means the gradient looked constant.
            *b = 0.0;
        }
    }
    // The maximum must be positive for the adaptive rule to be usable.
    if best.iter().all(|&b| b == 0.0) {
        best[0] = 1e-12;
    }
    best
}

/// Supremum of gradient norms over the box, by sampling plus (for small
/// dimensions) corner enumeration, inflated by 1.1.
pub fn estimate_grad_sup(smooth: &SmoothObjective, domain: &BoxDomain, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = smooth.dim();
    let mut best = 0.0f64;
    let mut consider = |x: &[f64]| {
        let j = smooth.jacobian(x);
        for r in 0..smooth.num_objectives() {
            let norm2: f64 = (0..n).map(|i| j[(r, i)] * j[(r, i)]).sum();
            if norm2.is_finite() {
                best = best.max(norm2);
            }
        }
    };
    for _ in 0..SAMPLE_PAIRS {
        let x = sample_point(&mut rng, domain);
        consider(&x);
    }
    if n <= 12 {
        // Corners maximize the gradient norm for quadratic objectives.
        let mut x = domain.lower().to_vec();
        loop {
            consider(&x);
            let mut i = 0;
            while i < n && x[i] == domain.upper()[i] {
                x[i] = domain.lower()[i];
                i += 1;
            }
            if i == n {
                break;
            }
            x[i] = domain.upper()[i];
        }
    }
    best.sqrt() * RHO_SAFETY
}

fn sample_point(rng: &mut ChaCha8Rng, domain: &BoxDomain) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..u) })
        .collect()
}

/// Assemble the constants for a problem with Armijo parameters
/// `(zeta, omega1)`.
pub fn estimate_constants(problem: &CompositeProblem, zeta: f64, omega1: f64) -> ConstantsEstimate {
    let seed = name_seed(&problem.name);
    let smooth = problem.smooth();
    let domain = problem.domain();
    let rho = smooth
        .grad_sup()
        .unwrap_or_else(|| estimate_grad_sup(smooth, domain, seed ^ 0xA11CE));
    let l = smooth
        .max_lipschitz()
        .unwrap_or_else(|| {
            estimate_smooth_lipschitz(smooth, domain, seed)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .max(1e-12);
    let l_g = match problem.nonsmooth() {
        NonsmoothTerm::Zero => 0.0,
        NonsmoothTerm::SupportFunction(sets) => sets
            .iter()
            .map(|s| s.norm_bound())
            .fold(0.0f64, f64::max),
    };
    let omega = domain.diameter();
    let first = 1.0 / ((rho + l_g) * omega);
    let second = 2.0 * omega1 * (1.0 - zeta) / (l * omega * omega);
    let gamma = first.min(second);
    ConstantsEstimate {
        rho,
        l_g,
        omega,
        l,
        gamma,
        f_start: None,
        f_inf: None,
    }
}

/// Stable seed derived from a problem name (FNV-1a).
pub fn name_seed(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
