use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use mia_core::game::curve_gap;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::io::{hash_args, read_xy_csv, write_json, Envelope};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Empirical ROC CSV (fpr,tpr); pairs with the theory CSV at the same position.
    #[arg(long = "empirical")]
    pub empirical: Vec<PathBuf>,
    /// Theory trade-off CSV (alpha,power).
    #[arg(long = "theory")]
    pub theory: Vec<PathBuf>,
    /// Legend label per pair; defaults to the empirical file stem.
    #[arg(long = "label")]
    pub labels: Vec<String>,
    /// Log-scaled axes.
    #[arg(long)]
    pub log: bool,
    #[arg(long)]
    pub svg: PathBuf,
    /// Gap JSON path.
    #[arg(long)]
    pub json: PathBuf,
}

struct Pair {
    label: String,
    empirical: Vec<(f64, f64)>,
    theory: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct PairGap {
    label: String,
    empirical: PathBuf,
    theory: PathBuf,
    sup_norm_gap: f64,
    vertical_gap: f64,
}

#[derive(Serialize)]
struct ReportBody {
    log_axes: bool,
    pairs: Vec<PairGap>,
}

/// Linear interpolation of a polyline sorted by x; at a vertical step the
/// upper value is used.
fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x < x0.min(x1) || x > x0.max(x1) {
            continue;
        }
        let y = if x1 == x0 { y0.max(y1) } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) };
        best = best.max(y);
    }
    if best.is_finite() {
        best
    } else if curve.len() == 1 && curve[0].0 == x {
        curve[0].1
    } else {
        f64::NAN
    }
}

/// `max |empirical(x) − theory(x)|` over the theory vertices inside the
/// empirical x-range.
fn vertical_gap(empirical: &[(f64, f64)], theory: &[(f64, f64)]) -> f64 {
    theory
        .iter()
        .map(|&(x, y)| (interpolate(empirical, x) - y).abs())
        .filter(|g| !g.is_nan())
        .fold(0.0, f64::max)
}

pub fn run(args: &ReportArgs) -> Result<()> {
    if args.empirical.is_empty() && args.theory.is_empty() {
        return Err(CliError::Usage("report needs at least one --empirical/--theory pair".into()));
    }
    if args.empirical.len() != args.theory.len() {
        return Err(CliError::Usage(format!(
            "got {} --empirical and {} --theory files; they pair up by position",
            args.empirical.len(),
            args.theory.len()
        )));
    }
    if !args.labels.is_empty() && args.labels.len() != args.empirical.len() {
        return Err(CliError::Usage(format!("got {} labels for {} pairs", args.labels.len(), args.empirical.len())));
    }
    let mut inputs: Vec<(String, &Path)> = Vec::new();
    for (i, (e, t)) in args.empirical.iter().zip(&args.theory).enumerate() {
        inputs.push((format!("empirical_{i}"), e));
        inputs.push((format!("theory_{i}"), t));
    }
    let named: Vec<(&str, &Path)> = inputs.iter().map(|(n, p)| (n.as_str(), *p)).collect();
    let hash = hash_args(json!({ "labels": args.labels, "log": args.log }), &named)?;

    let mut pairs = Vec::new();
    for (i, (e, t)) in args.empirical.iter().zip(&args.theory).enumerate() {
        let label = args.labels.get(i).cloned().unwrap_or_else(|| {
            e.file_stem().map_or_else(|| format!("curve {i}"), |s| s.to_string_lossy().into_owned())
        });
        pairs.push(Pair { label, empirical: read_xy_csv(e)?, theory: read_xy_csv(t)? });
    }

    let gaps = pairs
        .iter()
        .zip(args.empirical.iter().zip(&args.theory))
        .map(|(p, (e, t))| PairGap {
            label: p.label.clone(),
            empirical: e.clone(),
            theory: t.clone(),
            sup_norm_gap: curve_gap(&p.empirical, &p.theory),
            vertical_gap: vertical_gap(&p.empirical, &p.theory),
        })
        .collect();
    fs::write(&args.svg, render_svg(&pairs, args.log)).map_err(|e| CliError::io(&args.svg, e))?;
    write_json(&args.json, &Envelope::new(hash, None, ReportBody { log_axes: args.log, pairs: gaps }))
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const LOG_FLOOR: f64 = 1e-4;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Axis {
    log: bool,
    lo: f64,
}

impl Axis {
    fn new(log: bool) -> Self {
        Self { log, lo: if log { LOG_FLOOR.log10() } else { 0.0 } }
    }

    /// Position in [0, 1] along the axis.
    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.max(LOG_FLOOR).log10() - self.lo) / -self.lo
        } else {
            v.clamp(0.0, 1.0)
        }
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=0).map(|e| (10f64.powi(e), format!("1e{e}"))).collect()
        } else {
            (0..=5).map(|i| (i as f64 / 5.0, format!("{:.1}", i as f64 / 5.0))).collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render_svg(pairs: &[Pair], log: bool) -> String {
    let axis = Axis::new(log);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + axis.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - axis.frac(y)) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    for (v, label) in axis.ticks() {
        let (x, y) = (px(v), py(v));
        writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, TOP + ph).unwrap();
        writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">False positive rate</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">True positive rate</text>"#,
        TOP + ph / 2.0
    )
    .unwrap();

    let polyline = |s: &mut String, pts: &[(f64, f64)], color: &str, dotted: bool| {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash = if dotted { r#" stroke-dasharray="2 3""# } else { "" };
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        )
        .unwrap();
    };
    let mut legend = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut s, &p.empirical, color, false);
        polyline(&mut s, &p.theory, color, true);
        legend.push((format!("{} (empirical)", p.label), color, false));
        legend.push((format!("{} (theory)", p.label), color, true));
    }

    let lx = LEFT + pw + 16.0;
    for (i, (label, color, dotted)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let dash = if *dotted { r#" stroke-dasharray="2 3""# } else { "" };
        writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_takes_upper_value_on_steps() {
        let c = [(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)];
        assert_eq!(interpolate(&c, 0.0), 0.5);
        assert!((interpolate(&c, 0.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn vertical_gap_of_diagonal_against_constant() {
        let diag = [(0.0, 0.0), (1.0, 1.0)];
        let top = [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)];
        assert_eq!(vertical_gap(&diag, &top), 1.0);
        assert_eq!(vertical_gap(&diag, &diag), 0.0);
    }

    #[test]
    fn log_axis_clamps_zero() {
        let a = Axis::new(true);
        assert_eq!(a.frac(0.0), 0.0);
        assert_eq!(a.frac(1.0), 1.0);
        assert!((a.frac(1e-2) - 0.5).abs() < 1e-12);
    }
}
