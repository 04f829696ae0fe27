//! File outputs: JSON reports, CSV learning curves, and an optional SVG
//! plot. All writes go through a temp-file-plus-rename so partially written
//! artifacts never appear under the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use asyncnet_core::sim::{Comparison, LearningCurve, SteadyStateReport};
use serde::Serialize;

use crate::predict::TheoryOutput;

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp: PathBuf = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Learning curves as CSV: one row per (iteration, agent) plus a `network`
/// row per iteration holding the across-agent average.
pub fn curves_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("iteration,agent,msd\n");
    let horizon = curve.network.len();
    for i in 0..horizon {
        for (k, agent_curve) in curve.per_agent.iter().enumerate() {
            out.push_str(&format!("{i},{k},{:.17e}\n", agent_curve[i]));
        }
        out.push_str(&format!("{i},network,{:.17e}\n", curve.network[i]));
    }
    out
}

pub fn write_curves(path: &Path, curve: &LearningCurve) -> std::io::Result<()> {
    write_atomic(path, curves_csv(curve).as_bytes())
}

/// Minimal log-y line plot of the per-agent and network curves. Convenience
/// output only; nothing downstream depends on it.
pub fn curves_svg(curve: &LearningCurve) -> String {
    let width = 900.0;
    let height = 500.0;
    let margin = 60.0;
    let horizon = curve.network.len().max(1);
    let floor = 1e-300f64;
    let all = curve
        .per_agent
        .iter()
        .flat_map(|c| c.iter())
        .chain(curve.network.iter())
        .copied()
        .filter(|v| *v > floor);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in all {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        lo = 1e-6;
        hi = 1.0;
    }
    let (lo, hi) = (lo.log10(), hi.log10());
    let x = |i: usize| margin + (width - 2.0 * margin) * i as f64 / (horizon - 1).max(1) as f64;
    let y = |v: f64| {
        let t = (v.max(floor).log10() - lo) / (hi - lo).max(1e-12);
        height - margin - (height - 2.0 * margin) * t
    };
    let polyline = |vals: &[f64], color: &str, width_px: f64| {
        let points: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width_px}\" points=\"{}\"/>\n",
            points.join(" ")
        )
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"13\">mean-square deviation (log scale) vs iteration</text>\n",
        margin
    );
    let palette = ["#8888cc", "#88cc88", "#cc8888", "#cccc66", "#66cccc", "#cc88cc"];
    for (k, agent_curve) in curve.per_agent.iter().enumerate() {
        svg.push_str(&polyline(agent_curve, palette[k % palette.len()], 1.0));
    }
    svg.push_str(&polyline(&curve.network, "#000000", 2.0));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333\"/>\n",
        m = margin,
        b = height - margin,
        r = width - margin,
        t = margin,
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(path: &Path, curve: &LearningCurve) -> std::io::Result<()> {
    write_atomic(path, curves_svg(curve).as_bytes())
}

/// Renders the comparison as an aligned text table for stdout.
pub fn comparison_table(cmp: &Comparison) -> String {
    if !cmp.comparable {
        return format!("not comparable: {}\n", cmp.reason.unwrap_or("unknown"));
    }
    let mut out = String::from(
        "quantity   empirical      predicted      rel.err    tolerance  verdict\n",
    );
    for row in &cmp.rows {
        out.push_str(&format!(
            "{:<10} {:<14.6e} {:<14.6e} {:>+8.3}%  {:>8.1}%  {}\n",
            row.quantity,
            row.empirical,
            row.predicted,
            row.relative_error * 100.0,
            row.tolerance * 100.0,
            if row.pass { "pass" } else { "FAIL" },
        ));
    }
    out
}

/// Everything `simulate` writes next to the report for traceability.
#[derive(Serialize)]
pub struct SimulationArtifacts<'a> {
    pub report: &'a SteadyStateReport,
    pub theory: Option<&'a TheoryOutput>,
    pub comparison: Option<&'a Comparison>,
}
