//! Report files: summary tables, performance-profile plots and frontier
//! scatter plots. All output is byte-stable for identical inputs;
//! wall-clock numbers appear only inside the JSON metadata section.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bench::frontier::FrontierPoint;
use crate::bench::profile::{performance_profiles, ProfileCurve};
use crate::bench::runner::{BenchmarkResult, CostMeasure};
use crate::registry;
use crate::Result;

#[derive(Debug, Serialize)]
struct SolverSummary {
    solver: String,
    instances: usize,
    successes: usize,
    success_rate: f64,
    median_iterations: f64,
    mean_f_evals: f64,
    efficiency_iterations: f64,
    robustness_iterations: f64,
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    prng_version: String,
    config_fingerprint: u64,
    problems: Vec<String>,
    solvers: Vec<SolverSummary>,
    /// Wall-clock metadata; excluded from byte-stability comparisons.
    timing: BTreeMap<String, f64>,
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 0 {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

/// Write `summary.json`, `summary.csv`, the two profile plots and the
/// registry manifest into `dir`.
pub fn emit_report(result: &BenchmarkResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (iters, names) = result.cost_matrix(CostMeasure::Iterations);
    let iter_profiles = performance_profiles(&iters, &names);
    let (fevals, _) = result.cost_matrix(CostMeasure::FEvals);
    let feval_profiles = performance_profiles(&fevals, &names);

    let mut solver_rows = Vec::new();
    for (idx, &solver) in result.config.solvers.iter().enumerate() {
        let of_solver: Vec<_> = result
            .instances
            .iter()
            .filter(|i| i.solver == solver)
            .collect();
        let successes = of_solver.iter().filter(|i| i.success).count();
        solver_rows.push(SolverSummary {
            solver: solver.to_string(),
            instances: of_solver.len(),
            successes,
            success_rate: if of_solver.is_empty() {
                0.0
            } else {
                successes as f64 / of_solver.len() as f64
            },
            median_iterations: median(
                of_solver.iter().map(|i| i.iterations as f64).collect(),
            ),
            mean_f_evals: if of_solver.is_empty() {
                0.0
            } else {
                of_solver.iter().map(|i| i.f_evals as f64).sum::<f64>() / of_solver.len() as f64
            },
            efficiency_iterations: iter_profiles[idx].efficiency(),
            robustness_iterations: iter_profiles[idx].robustness(),
        });
    }
    let mut timing = BTreeMap::new();
    timing.insert(
        "total_wall_seconds".to_string(),
        result.instances.iter().map(|i| i.wall_seconds).sum(),
    );
    let summary = ReportSummary {
        prng_version: result.prng_version.clone(),
        config_fingerprint: result.config_fingerprint,
        problems: result.config.problems.clone(),
        solvers: solver_rows,
        timing,
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;

    // Per problem x solver success table.
    let mut csv = String::from("problem,solver,instances,successes,success_rate\n");
    for p in &result.config.problems {
        for &s in &result.config.solvers {
            let rows: Vec<_> = result
                .instances
                .iter()
                .filter(|i| i.problem == *p && i.solver == s)
                .collect();
            let succ = rows.iter().filter(|i| i.success).count();
            let rate = if rows.is_empty() {
                0.0
            } else {
                succ as f64 / rows.len() as f64
            };
            writeln!(csv, "{p},{s},{},{succ},{rate:.4}", rows.len()).ok();
        }
    }
    std::fs::write(dir.join("summary.csv"), csv)?;

    std::fs::write(
        dir.join("profile_iterations.svg"),
        svg_step_curves(&iter_profiles, "performance profile (iterations)"),
    )?;
    std::fs::write(
        dir.join("profile_fevals.svg"),
        svg_step_curves(&feval_profiles, "performance profile (F evaluations)"),
    )?;
    std::fs::write(
        dir.join("problems.json"),
        serde_json::to_string_pretty(&registry::manifest())?,
    )?;
    Ok(())
}

/// Scatter plot of frontier layers (one per uncertainty level) in objective
/// space. Only bi-objective fronts are plotted; higher dimensions fall back
/// to the first two objectives.
pub fn frontier_scatter_svg(layers: &[(String, Vec<FrontierPoint>)], title: &str) -> String {
    let pts: Vec<(f64, f64)> = layers
        .iter()
        .flat_map(|(_, ps)| ps.iter())
        .filter(|p| p.values.len() >= 2)
        .map(|p| (p.values[0], p.values[1]))
        .collect();
    let (w, h, pad) = (640.0, 480.0, 56.0);
    let mut svg = svg_header(w, h, title);
    if pts.is_empty() {
        svg.push_str("<text x=\"320\" y=\"240\" text-anchor=\"middle\" font-size=\"14\">no frontier points</text>\n");
        svg.push_str("</svg>\n");
        return svg;
    }
    let (xmin, xmax) = span(pts.iter().map(|p| p.0));
    let (ymin, ymax) = span(pts.iter().map(|p| p.1));
    let sx = |v: f64| pad + (v - xmin) / (xmax - xmin).max(1e-12) * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - ymin) / (ymax - ymin).max(1e-12) * (h - 2.0 * pad);
    svg.push_str(&axes(w, h, pad, xmin, xmax, ymin, ymax, "f1", "f2"));
    for (li, (label, ps)) in layers.iter().enumerate() {
        let color = PALETTE[li % PALETTE.len()];
        for p in ps {
            if p.values.len() < 2 {
                continue;
            }
            writeln!(
                svg,
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2.4\" fill=\"{color}\" fill-opacity=\"0.75\"/>",
                sx(p.values[0]),
                sy(p.values[1])
            )
            .ok();
        }
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{label}</text>",
            w - pad - 120.0,
            pad + 16.0 * li as f64
        )
        .ok();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Step-curve plot of performance profiles.
pub fn svg_step_curves(curves: &[ProfileCurve], title: &str) -> String {
    let (w, h, pad) = (640.0, 480.0, 56.0);
    let mut svg = svg_header(w, h, title);
    let tau_max = curves
        .iter()
        .flat_map(|c| c.steps.iter().map(|&(t, _)| t))
        .fold(1.0f64, f64::max)
        .max(1.0 + 1e-9);
    let sx = |t: f64| pad + (t - 1.0) / (tau_max - 1.0).max(1e-12) * (w - 2.0 * pad);
    let sy = |r: f64| h - pad - r * (h - 2.0 * pad);
    svg.push_str(&axes(w, h, pad, 1.0, tau_max, 0.0, 1.0, "tau", "rho"));
    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut d = String::new();
        let mut last: Option<(f64, f64)> = None;
        for &(t, r) in &curve.steps {
            match last {
                None => {
                    write!(d, "M {:.3} {:.3} ", sx(t), sy(r)).ok();
                }
                Some((_, pr)) => {
                    // Horizontal to the new tau at the previous level, then
                    // a vertical jump.
                    write!(d, "L {:.3} {:.3} L {:.3} {:.3} ", sx(t), sy(pr), sx(t), sy(r)).ok();
                }
            }
            last = Some((t, r));
        }
        if let Some((_, r)) = last {
            write!(d, "L {:.3} {:.3}", sx(tau_max), sy(r)).ok();
        }
        writeln!(
            svg,
            "<path d=\"{d}\" stroke=\"{color}\" stroke-width=\"1.8\" fill=\"none\"/>"
        )
        .ok();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{}</text>",
            w - pad - 120.0,
            pad + 16.0 * ci as f64,
            curve.solver
        )
        .ok();
    }
    svg.push_str("</svg>\n");
    svg
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn svg_header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        w / 2.0
    )
}

#[allow(clippy::too_many_arguments)]
fn axes(
    w: f64,
    h: f64,
    pad: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<line x1=\"{pad}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        h - pad,
        w - pad,
        h - pad
    )
    .ok();
    writeln!(
        s,
        "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{:.1}\" stroke=\"black\"/>",
        h - pad
    )
    .ok();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{xlabel}</text>",
        w / 2.0,
        h - pad / 3.0
    )
    .ok();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 {:.1} {:.1})\">{ylabel}</text>",
        pad / 3.0,
        h / 2.0,
        pad / 3.0,
        h / 2.0
    )
    .ok();
    for (v, label_x) in [(xmin, true), (xmax, true)] {
        let _ = label_x;
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{v:.3}</text>",
            if v == xmin { pad } else { w - pad },
            h - pad + 16.0
        )
        .ok();
    }
    for v in [ymin, ymax] {
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{v:.3}</text>",
            pad - 6.0,
            if v == ymin { h - pad } else { pad + 4.0 }
        )
        .ok();
    }
    s
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
