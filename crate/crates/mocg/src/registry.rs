//! Built-in test problems.
//!
//! Each entry supplies the smooth part `H`, the box, the convexity flag and
//! the literature source of the formulation. Gradient Lipschitz constants
//! are stored in closed form where derivable (quadratics and a few others);
//! the remaining entries are estimated at build time by seeded sampling of
//! difference quotients, so instantiation is deterministic.
//!
//! Robust counterparts are produced separately by [`crate::robust`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants;
use crate::error::Error;
use crate::problem::{BoxDomain, CompositeProblem, NonsmoothTerm, SmoothObjective};
use crate::Result;

type BuildFn = fn(usize) -> Result<(SmoothObjective, BoxDomain)>;

/// Factory for one registered problem.
pub struct ProblemFactory {
    pub name: &'static str,
    pub default_n: usize,
    pub m: usize,
    pub convex: bool,
    pub scalable: bool,
    pub source: &'static str,
    build: BuildFn,
}

impl ProblemFactory {
    /// Build the problem at its default dimension.
    pub fn instantiate(&self) -> Result<CompositeProblem> {
        self.instantiate_n(self.default_n)
    }

    /// Build the problem with `n` variables (scalable entries only).
    pub fn instantiate_n(&self, n: usize) -> Result<CompositeProblem> {
        if n == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !self.scalable && n != self.default_n {
            return Err(Error::InvalidConfig(format!(
                "problem `{}` has fixed dimension {}",
                self.name, self.default_n
            )));
        }
        let (mut smooth, domain) = (self.build)(n)?;
        if smooth.lipschitz().is_none() {
            let l = constants::estimate_smooth_lipschitz(
                &smooth,
                &domain,
                constants::name_seed(self.name),
            );
            smooth = smooth.with_lipschitz(l);
        }
        CompositeProblem::new(self.name, smooth, NonsmoothTerm::Zero, domain)
    }
}

/// Manifest row describing one registry entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub convex: bool,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub source: String,
}

/// Look a problem up by name.
pub fn lookup(name: &str) -> Result<&'static ProblemFactory> {
    FACTORIES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

/// Registered names, in registry order.
pub fn names() -> Vec<&'static str> {
    FACTORIES.iter().map(|f| f.name).collect()
}

/// Manifest of every entry at its default dimension.
pub fn manifest() -> Vec<ManifestEntry> {
    FACTORIES
        .iter()
        .map(|f| {
            let (_, domain) = (f.build)(f.default_n).expect("registry entry must build");
            ManifestEntry {
                name: f.name.to_string(),
                n: f.default_n,
                m: f.m,
                convex: f.convex,
                lb: domain.lower().to_vec(),
                ub: domain.upper().to_vec(),
                source: f.source.to_string(),
            }
        })
        .collect()
}

pub static FACTORIES: &[ProblemFactory] = &[
    ProblemFactory {
        name: "JOS1",
        default_n: 100,
        m: 2,
        convex: true,
        scalable: true,
        source: "Jin, Olhofer & Sendhoff (2001), dynamic weighted aggregation test suite",
        build: build_jos1,
    },
    ProblemFactory {
        name: "BK1",
        default_n: 2,
        m: 2,
        convex: true,
        scalable: false,
        source: "Huband, Hingston, Barone & While (2006), review of multiobjective test problems",
        build: build_bk1,
    },
    ProblemFactory {
        name: "SP1",
        default_n: 2,
        m: 2,
        convex: true,
        scalable: false,
        source: "Huband, Hingston, Barone & While (2006)",
        build: build_sp1,
    },
    ProblemFactory {
        name: "IM1",
        default_n: 2,
        m: 2,
        convex: false,
        scalable: false,
        source: "Huband, Hingston, Barone & While (2006)",
        build: build_im1,
    },
    ProblemFactory {
        name: "MOP2",
        default_n: 2,
        m: 2,
        convex: false,
        scalable: true,
        source: "Fonseca & Fleming formulation, via Huband et al. (2006)",
        build: build_mop2,
    },
    ProblemFactory {
        name: "FDS",
        default_n: 5,
        m: 3,
        convex: true,
        scalable: true,
        source: "Fliege, Grana Drummond & Svaiter (2009), Newton's method for multiobjective optimization",
        build: build_fds,
    },
    ProblemFactory {
        name: "SD",
        default_n: 4,
        m: 2,
        convex: true,
        scalable: false,
        source: "Stadler & Dauer (1993), four-bar truss design",
        build: build_sd,
    },
    ProblemFactory {
        name: "SLCDT1",
        default_n: 2,
        m: 2,
        convex: false,
        scalable: false,
        source: "Schutze, Laumanns, Coello Coello, Dellnitz & Talbi (2008)",
        build: build_slcdt1,
    },
    ProblemFactory {
        name: "VU2",
        default_n: 2,
        m: 2,
        convex: true,
        scalable: false,
        source: "Valenzuela-Rendon & Uresti-Charre, via Huband et al. (2006)",
        build: build_vu2,
    },
    ProblemFactory {
        name: "Lov1",
        default_n: 2,
        m: 2,
        convex: true,
        scalable: false,
        source: "Lovison (2011), singular continuation",
        build: build_lov1,
    },
    ProblemFactory {
        name: "AP1",
        default_n: 2,
        m: 3,
        convex: true,
        scalable: false,
        source: "Ansary & Panda (2015), modified quasi-Newton for vector optimization",
        build: build_ap1,
    },
    ProblemFactory {
        name: "ZDT1",
        default_n: 30,
        m: 2,
        convex: true,
        scalable: true,
        source: "Zitzler, Deb & Thiele (2000), comparison of multiobjective evolutionary algorithms",
        build: build_zdt1,
    },
];

fn build_jos1(n: usize) -> Result<(SmoothObjective, BoxDomain)> {
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
    )?
    // sup over [-100,100]^n: (2/n) * 102 sqrt(n) for the shifted term.
    .with_grad_sup(204.0 / nf.sqrt());
    Ok((smooth, BoxDomain::cube(n, -100.0, 100.0)?))
}

fn build_bk1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let smooth = SmoothObjective::new(
        2,
        2,
        |x: &[f64]| {
            vec![
                x[0] * x[0] + x[1] * x[1],
                (x[0] - 5.0) * (x[0] - 5.0) + (x[1] - 5.0) * (x[1] - 5.0),
            ]
        },
        |x: &[f64]| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    2.0 * x[0],
                    2.0 * x[1],
                    2.0 * (x[0] - 5.0),
                    2.0 * (x[1] - 5.0),
                ],
            )
        },
        Some(vec![2.0, 2.0]),
        true,
    )?
    // sup |2x| and |2(x - 5e)| over [-5,10]^2 is 2 |(10,10)| = 2 |(-10,-10)|.
    .with_grad_sup(2.0 * 200.0f64.sqrt());
    Ok((smooth, BoxDomain::cube(2, -5.0, 10.0)?))
}

fn build_sp1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    // Largest Hessian eigenvalue of both objectives is 3 + sqrt(5).
    let l = 3.0 + 5.0f64.sqrt();
    let smooth = SmoothObjective::new(
        2,
        2,
        |x: &[f64]| {
            let d = x[0] - x[1];
            vec![(x[0] - 1.0).powi(2) + d * d, (x[1] - 3.0).powi(2) + d * d]
        },
        |x: &[f64]| {
            let d = x[0] - x[1];
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    2.0 * (x[0] - 1.0) + 2.0 * d,
                    -2.0 * d,
                    2.0 * d,
                    2.0 * (x[1] - 3.0) - 2.0 * d,
                ],
            )
        },
        Some(vec![l, l]),
        true,
    )?;
    Ok((smooth, BoxDomain::cube(2, -100.0, 100.0)?))
}

fn build_im1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let smooth = SmoothObjective::new(
        2,
        2,
        |x: &[f64]| vec![2.0 * x[0].sqrt(), x[0] * (1.0 - x[1]) + 5.0],
        |x: &[f64]| {
            DMatrix::from_row_slice(2, 2, &[1.0 / x[0].sqrt(), 0.0, 1.0 - x[1], -x[0]])
        },
        // |d^2/dx^2 2 sqrt(x)| peaks at the lower bound x = 1; the bilinear
        // term has Hessian norm 1.
        Some(vec![0.5, 1.0]),
        false,
    )?;
    Ok((smooth, BoxDomain::new(vec![1.0, 1.0], vec![4.0, 2.0])?))
}

fn build_mop2(n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let a = 1.0 / (n as f64).sqrt();
    let smooth = SmoothObjective::new(
        n,
        2,
        move |x: &[f64]| {
            let s1: f64 = x.iter().map(|v| (v - a) * (v - a)).sum();
            let s2: f64 = x.iter().map(|v| (v + a) * (v + a)).sum();
            vec![1.0 - (-s1).exp(), 1.0 - (-s2).exp()]
        },
        move |x: &[f64]| {
            let s1: f64 = x.iter().map(|v| (v - a) * (v - a)).sum();
            let s2: f64 = x.iter().map(|v| (v + a) * (v + a)).sum();
            let e1 = (-s1).exp();
            let e2 = (-s2).exp();
            let mut j = DMatrix::zeros(2, x.len());
            for (i, &v) in x.iter().enumerate() {
                j[(0, i)] = 2.0 * (v - a) * e1;
                j[(1, i)] = 2.0 * (v + a) * e2;
            }
            j
        },
        None,
        false,
    )?;
    Ok((smooth, BoxDomain::cube(n, -4.0, 4.0)?))
}

fn build_fds(n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let nf = n as f64;
    let c3 = 1.0 / (nf * (nf + 1.0));
    let eval = move |x: &[f64]| {
        let mut f1 = 0.0;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut f3 = 0.0;
        for (idx, &v) in x.iter().enumerate() {
            let i = (idx + 1) as f64;
            f1 += i * (v - i).powi(4);
            sum += v;
            sq += v * v;
            f3 += i * (nf - i + 1.0) * (-v).exp();
        }
        vec![f1 / (nf * nf), (sum / nf).exp() + sq, c3 * f3]
    };
    let jac = move |x: &[f64]| {
        let n = x.len();
        let nf = n as f64;
        let sum: f64 = x.iter().sum();
        let es = (sum / nf).exp();
        let mut j = DMatrix::zeros(3, n);
        for (idx, &v) in x.iter().enumerate() {
            let i = (idx + 1) as f64;
            j[(0, idx)] = 4.0 * i * (v - i).powi(3) / (nf * nf);
            j[(1, idx)] = es / nf + 2.0 * v;
            j[(2, idx)] = -c3 * i * (nf - i + 1.0) * (-v).exp();
        }
        j
    };
    // Bounds over [-2, 2]^n: see each term's largest second derivative.
    let e2 = 2.0f64.exp();
    let l1 = (1..=n)
        .map(|i| 12.0 * i as f64 * (i as f64 + 2.0).powi(2))
        .fold(0.0f64, f64::max)
        / (nf * nf);
    let l2 = e2 / nf + 2.0;
    let l3 = (1..=n)
        .map(|i| c3 * i as f64 * (nf - i as f64 + 1.0) * e2)
        .fold(0.0f64, f64::max);
    let rho1 = (1..=n)
        .map(|i| {
            let b = 4.0 * i as f64 * (i as f64 + 2.0).powi(3) / (nf * nf);
            b * b
        })
        .sum::<f64>()
        .sqrt();
    let rho2 = e2 / nf.sqrt() + 4.0 * nf.sqrt();
    let rho3 = (1..=n)
        .map(|i| {
            let b = c3 * i as f64 * (nf - i as f64 + 1.0) * e2;
            b * b
        })
        .sum::<f64>()
        .sqrt();
    let smooth = SmoothObjective::new(n, 3, eval, jac, Some(vec![l1, l2, l3]), true)?
        .with_grad_sup(rho1.max(rho2).max(rho3));
    Ok((smooth, BoxDomain::cube(n, -2.0, 2.0)?))
}

fn build_sd(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let r2 = 2.0f64.sqrt();
    let smooth = SmoothObjective::new(
        4,
        2,
        move |x: &[f64]| {
            vec![
                2.0 * x[0] + r2 * x[1] + r2 * x[2] + x[3],
                2.0 / x[0] + 2.0 * r2 / x[1] + 2.0 * r2 / x[2] + 2.0 / x[3],
            ]
        },
        move |x: &[f64]| {
            DMatrix::from_row_slice(
                2,
                4,
                &[
                    2.0,
                    r2,
                    r2,
                    1.0,
                    -2.0 / (x[0] * x[0]),
                    -2.0 * r2 / (x[1] * x[1]),
                    -2.0 * r2 / (x[2] * x[2]),
                    -2.0 / (x[3] * x[3]),
                ],
            )
        },
        // f1 linear; the largest second derivative of f2 over the box is
        // 4 / lb^3 = 4 at x1 = 1 (and x4 = 1).
        Some(vec![0.0, 4.0]),
        true,
    )?;
    Ok((
        smooth,
        BoxDomain::new(vec![1.0, r2, r2, 1.0], vec![3.0, 3.0, 3.0, 3.0])?,
    ))
}

fn build_slcdt1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let lam = 0.85;
    let eval = move |x: &[f64]| {
        let sum = x[0] + x[1];
        let dif = x[0] - x[1];
        let a = (1.0 + sum * sum).sqrt();
        let b = (1.0 + dif * dif).sqrt();
        let e = lam * (-(dif * dif)).exp();
        vec![
            0.5 * (a + b + dif) + e,
            0.5 * (a + b - dif) + e,
        ]
    };
    let jac = move |x: &[f64]| {
        let sum = x[0] + x[1];
        let dif = x[0] - x[1];
        let a = (1.0 + sum * sum).sqrt();
        let b = (1.0 + dif * dif).sqrt();
        let sa = sum / a;
        let sb = dif / b;
        let e = lam * (-(dif * dif)).exp();
        let de = -2.0 * dif * e;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * (sa + sb + 1.0) + de,
                0.5 * (sa - sb - 1.0) - de,
                0.5 * (sa + sb - 1.0) + de,
                0.5 * (sa - sb + 1.0) - de,
            ],
        )
    };
    let smooth = SmoothObjective::new(2, 2, eval, jac, None, false)?;
    Ok((smooth, BoxDomain::cube(2, -1.5, 1.5)?))
}

fn build_vu2(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let smooth = SmoothObjective::new(
        2,
        2,
        |x: &[f64]| vec![x[0] + x[1] + 1.0, x[0] * x[0] + 2.0 * x[1] - 1.0],
        |x: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0 * x[0], 2.0]),
        Some(vec![0.0, 2.0]),
        true,
    )?;
    Ok((smooth, BoxDomain::cube(2, -3.0, 3.0)?))
}

fn build_lov1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let smooth = SmoothObjective::new(
        2,
        2,
        |x: &[f64]| {
            vec![
                1.05 * x[0] * x[0] + 0.98 * x[1] * x[1],
                0.99 * (x[0] - 3.0).powi(2) + 1.03 * (x[1] - 2.5).powi(2),
            ]
        },
        |x: &[f64]| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    2.1 * x[0],
                    1.96 * x[1],
                    1.98 * (x[0] - 3.0),
                    2.06 * (x[1] - 2.5),
                ],
            )
        },
        Some(vec![2.1, 2.06]),
        true,
    )?;
    Ok((smooth, BoxDomain::cube(2, -10.0, 10.0)?))
}

fn build_ap1(_n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    let e10 = 10.0f64.exp();
    let smooth = SmoothObjective::new(
        2,
        3,
        |x: &[f64]| {
            let s = 0.5 * (x[0] + x[1]);
            vec![
                0.25 * ((x[0] - 1.0).powi(4) + 2.0 * (x[1] - 2.0).powi(4)),
                s.exp() + x[0] * x[0] + x[1] * x[1],
                ((-x[0]).exp() + 2.0 * (-x[1]).exp()) / 6.0,
            ]
        },
        |x: &[f64]| {
            let es = (0.5 * (x[0] + x[1])).exp();
            DMatrix::from_row_slice(
                3,
                2,
                &[
                    (x[0] - 1.0).powi(3),
                    2.0 * (x[1] - 2.0).powi(3),
                    0.5 * es + 2.0 * x[0],
                    0.5 * es + 2.0 * x[1],
                    -(-x[0]).exp() / 6.0,
                    -2.0 * (-x[1]).exp() / 6.0,
                ],
            )
        },
        // On [-10, 10]^2: 3 max(x2 - 2)^2 * 2 = 864 for f1; the exponential
        // terms dominate f2 and f3.
        Some(vec![864.0, e10 / 2.0 + 2.0, e10 / 3.0]),
        true,
    )?;
    Ok((smooth, BoxDomain::cube(2, -10.0, 10.0)?))
}

fn build_zdt1(n: usize) -> Result<(SmoothObjective, BoxDomain)> {
    if n < 2 {
        return Err(Error::InvalidConfig("ZDT1 needs n >= 2".into()));
    }
    let coef = 9.0 / (n as f64 - 1.0);
    let eval = move |x: &[f64]| {
        let g = 1.0 + coef * x[1..].iter().sum::<f64>();
        vec![x[0], g - (x[0] * g).sqrt()]
    };
    let jac = move |x: &[f64]| {
        let n = x.len();
        let g = 1.0 + coef * x[1..].iter().sum::<f64>();
        let mut j = DMatrix::zeros(2, n);
        j[(0, 0)] = 1.0;
        let ratio = if x[0] > 0.0 {
            (g / x[0]).sqrt()
        } else {
            f64::INFINITY
        };
        j[(1, 0)] = -0.5 * ratio;
        let half_root = if g > 0.0 { 0.5 * (x[0] / g).sqrt() } else { 0.0 };
        for i in 1..n {
            j[(1, i)] = coef * (1.0 - half_root);
        }
        j
    };
    // The gradient is unbounded as x1 -> 0, so the stored constant is the
    // seeded sampling estimate produced at instantiation.
    let smooth = SmoothObjective::new(n, 2, eval, jac, None, true)?;
    Ok((smooth, BoxDomain::cube(n, 0.0, 1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jos1_default_matches_catalog() {
        let f = lookup("JOS1").unwrap();
        let p = f.instantiate().unwrap();
        assert_eq!(p.dim(), 100);
        assert_eq!(p.num_objectives(), 2);
        assert_eq!(p.domain().lower()[0], -100.0);
        assert_eq!(p.domain().upper()[99], 100.0);
    }

    #[test]
    fn bk1_matches_catalog() {
        let f = lookup("BK1").unwrap();
        assert!(f.convex);
        let p = f.instantiate().unwrap();
        assert_eq!(p.domain().lower(), &[-5.0, -5.0]);
        assert_eq!(p.domain().upper(), &[10.0, 10.0]);
        assert_eq!(p.num_objectives(), 2);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(lookup("NOPE"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn fixed_dimension_is_enforced() {
        let f = lookup("BK1").unwrap();
        assert!(f.instantiate_n(3).is_err());
        let jos = lookup("JOS1").unwrap();
        assert!(jos.instantiate_n(2).is_ok());
    }

    #[test]
    fn manifest_covers_all_entries() {
        let m = manifest();
        assert_eq!(m.len(), FACTORIES.len());
        assert!(m.iter().any(|e| e.name == "ZDT1" && e.n == 30));
        for e in &m {
            assert!(!e.source.is_empty());
            assert_eq!(e.lb.len(), e.n);
        }
    }

    #[test]
    fn every_entry_builds_and_evaluates_at_midpoint() {
        for f in FACTORIES {
            let p = f.instantiate().unwrap();
            let mid = p.domain().midpoint();
            let e = p.evaluate(&mid).unwrap();
            assert_eq!(e.f.len(), f.m, "{}", f.name);
            assert!(e.f.iter().all(|v| v.is_finite()), "{}", f.name);
            let l = p.smooth().max_lipschitz().expect("lipschitz filled");
            assert!(l > 0.0, "{}: L = {l}", f.name);
        }
    }

    #[test]
    fn jos1_small_instance_values() {
        let p = lookup("JOS1").unwrap().instantiate_n(2).unwrap();
        let e = p.evaluate(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(e.f[0], 0.0);
        assert_relative_eq!(e.f[1], 4.0);
    }

    #[test]
    fn finite_difference_jacobians() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0FD1);
        for f in FACTORIES {
            // A small instance keeps the check cheap for scalable entries.
            let n = match f.name {
                "JOS1" | "ZDT1" => 6,
                _ => f.default_n,
            };
            let p = f.instantiate_n(n).unwrap();
            let dim = p.dim();
            let m = p.num_objectives();
            for _ in 0..20 {
                let x: Vec<f64> = (0..dim)
                    .map(|i| {
                        let (l, u) = (p.domain().lower()[i], p.domain().upper()[i]);
                        // Stay away from the boundary so central differences fit.
                        let pad = 0.05 * (u - l);
                        rng.gen_range(l + pad..u - pad)
                    })
                    .collect();
                let jac = p.jacobian(&x).unwrap();
                let jac_inf = (0..m)
                    .map(|j| (0..dim).map(|i| jac[(j, i)].abs()).sum::<f64>())
                    .fold(0.0f64, f64::max);
                let tol = 1e-5 * (1.0 + jac_inf);
                for i in 0..dim {
                    let h = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fp = p.smooth().eval(&xp);
                    let fm = p.smooth().eval(&xm);
                    for j in 0..m {
                        let fd = (fp[j] - fm[j]) / (2.0 * h);
                        assert!(
                            (fd - jac[(j, i)]).abs() <= tol,
                            "{}: d f_{j} / d x_{i}: fd {fd} vs analytic {}",
                            f.name,
                            jac[(j, i)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn convexity_flags_hold_on_random_pairs() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0);
        for f in FACTORIES.iter().filter(|f| f.convex) {
            let p = f.instantiate().unwrap();
            let dim = p.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..dim)
                    .map(|i| rng.gen_range(p.domain().lower()[i]..p.domain().upper()[i]))
                    .collect();
                let y: Vec<f64> = (0..dim)
                    .map(|i| rng.gen_range(p.domain().lower()[i]..p.domain().upper()[i]))
                    .collect();
                let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let fx = p.smooth().eval(&x);
                let fy = p.smooth().eval(&y);
                let fm = p.smooth().eval(&mid);
                for j in 0..p.num_objectives() {
                    let bound = 0.5 * fx[j] + 0.5 * fy[j];
                    let scale = 1.0 + bound.abs();
                    assert!(
                        fm[j] <= bound + 1e-10 * scale,
                        "{} objective {j} not midpoint-convex: {} vs {}",
                        f.name,
                        fm[j],
                        bound
                    );
                }
            }
        }
    }
}
