//! Static SVG renderings of the standard figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use qkl_core::experiments::{AlignmentCurveRow, AlignmentRow, GeneralizationRow, SpectrumRow};
use qkl_core::kernels::KernelKind;

use crate::error::{QklError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    MseVsQubits,
    SpectrumVsQubits,
    KtaHistogram,
    CumulativeAlignment,
}

impl PlotKind {
    pub fn file_name(&self) -> &'static str {
        match self {
            PlotKind::MseVsQubits => "mse_vs_qubits.svg",
            PlotKind::SpectrumVsQubits => "spectrum_vs_qubits.svg",
            PlotKind::KtaHistogram => "kta_histogram.svg",
            PlotKind::CumulativeAlignment => "cumulative_alignment.svg",
        }
    }

    fn is_histogram(&self) -> bool {
        matches!(self, PlotKind::KtaHistogram)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    /// Points that can be drawn on the given scale.
    fn drawable(&self, log_y: bool) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .filter(move |&(x, y)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl PlotData {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

fn mean_by<K: Ord + Copy>(items: impl Iterator<Item = (K, f64)>) -> Vec<(K, f64)> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (k, v) in items {
        let e = acc.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn kinds_present<'a>(kinds: impl Iterator<Item = &'a KernelKind>) -> Vec<KernelKind> {
    let mut v: Vec<KernelKind> = kinds.copied().collect();
    v.sort();
    v.dedup();
    v
}

/// Mean train and test MSE per kernel against `d`, using the `best_test` row
/// of each `(d, seed, kernel)`.
pub fn mse_vs_qubits(rows: &[GeneralizationRow]) -> PlotData {
    let best: Vec<&GeneralizationRow> = rows.iter().filter(|r| r.best_test).collect();
    let mut series = Vec::new();
    for kind in kinds_present(best.iter().map(|r| &r.kernel)) {
        let of_kind = || best.iter().filter(move |r| r.kernel == kind);
        series.push(Series {
            name: format!("{kind} test"),
            points: mean_by(of_kind().map(|r| (r.d, r.test_mse)))
                .into_iter()
                .map(|(d, v)| (d as f64, v))
                .collect(),
            dashed: false,
        });
        series.push(Series {
            name: format!("{kind} train"),
            points: mean_by(of_kind().map(|r| (r.d, r.train_mse)))
                .into_iter()
                .map(|(d, v)| (d as f64, v))
                .collect(),
            dashed: true,
        });
    }
    PlotData {
        kind: PlotKind::MseVsQubits,
        title: "Mean squared error vs. qubits".into(),
        x_label: "qubits d".into(),
        y_label: "MSE".into(),
        log_y: true,
        series,
    }
}

/// Mean of the leading four eigenvalues of `K_q / n` against `d`.
pub fn spectrum_vs_qubits(rows: &[SpectrumRow]) -> PlotData {
    let series = (1..=4)
        .map(|rank| Series {
            name: format!("eigenvalue {rank}"),
            points: mean_by(rows.iter().filter(|r| r.rank == rank).map(|r| (r.d, r.eigenvalue)))
                .into_iter()
                .map(|(d, v)| (d as f64, v))
                .collect(),
            dashed: false,
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    PlotData {
        kind: PlotKind::SpectrumVsQubits,
        title: "Spectrum of the biased kernel".into(),
        x_label: "qubits d".into(),
        y_label: "eigenvalue of K/n".into(),
        log_y: true,
        series,
    }
}

pub const KTA_BINS: usize = 20;

/// Histogram of centered alignment per kernel at the largest `d` present.
pub fn kta_histogram(rows: &[AlignmentRow]) -> PlotData {
    let d = rows.iter().map(|r| r.d).max();
    let at_d: Vec<&AlignmentRow> = rows.iter().filter(|r| Some(r.d) == d).collect();
    let width = 1.0 / KTA_BINS as f64;
    let series = kinds_present(at_d.iter().map(|r| &r.kernel))
        .into_iter()
        .map(|kind| {
            let mut counts = [0usize; KTA_BINS];
            for r in at_d.iter().filter(|r| r.kernel == kind) {
                let bin = ((r.kta.max(0.0) / width) as usize).min(KTA_BINS - 1);
                counts[bin] += 1;
            }
            Series {
                name: kind.to_string(),
                points: counts
                    .iter()
                    .enumerate()
                    .map(|(b, &c)| ((b as f64 + 0.5) * width, c as f64))
                    .collect(),
                dashed: false,
            }
        })
        .collect();
    PlotData {
        kind: PlotKind::KtaHistogram,
        title: format!("Kernel-target alignment, d = {}", d.unwrap_or(0)),
        x_label: "centered alignment".into(),
        y_label: "runs".into(),
        log_y: false,
        series,
    }
}

pub const CURVE_COMPONENTS: usize = 20;

/// Mean `C(i)` for the leading components at the largest `d` present.
pub fn cumulative_alignment(rows: &[AlignmentCurveRow]) -> PlotData {
    let d = rows.iter().map(|r| r.d).max();
    let at_d: Vec<&AlignmentCurveRow> = rows
        .iter()
        .filter(|r| Some(r.d) == d && r.i <= CURVE_COMPONENTS)
        .collect();
    let series = kinds_present(at_d.iter().map(|r| &r.kernel))
        .into_iter()
        .map(|kind| Series {
            name: kind.to_string(),
            points: mean_by(at_d.iter().filter(|r| r.kernel == kind).map(|r| (r.i, r.c)))
                .into_iter()
                .map(|(i, c)| (i as f64, c))
                .collect(),
            dashed: false,
        })
        .collect();
    PlotData {
        kind: PlotKind::CumulativeAlignment,
        title: format!("Task-model alignment, d = {}", d.unwrap_or(0)),
        x_label: "principal components i".into(),
        y_label: "C(i)".into(),
        log_y: false,
        series,
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

/// Standalone SVG document.
pub fn render(plot: &PlotData) -> Result<String> {
    let points: Vec<(f64, f64)> = plot.series.iter().flat_map(|s| s.drawable(plot.log_y)).collect();
    if points.is_empty() {
        return Err(QklError::Validation(format!("no data to plot for {}", plot.kind.file_name())));
    }
    let ty = |y: f64| if plot.log_y { y.log10() } else { y };
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(ty(p.1)), b.max(ty(p.1))));
    if plot.kind.is_histogram() {
        let half = 0.5 / KTA_BINS as f64;
        x0 -= half;
        x1 += half;
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if plot.log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
        if y1 - y0 < 1.0 {
            y1 = y0 + 1.0;
        }
    } else {
        y0 = y0.min(0.0);
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        y1 += 0.05 * (y1 - y0);
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (ty(y) - y0) / (y1 - y0) * ph;
    let sy_raw = |t: f64| TOP + ph - (t - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    let x_ticks: Vec<f64> = if !plot.kind.is_histogram() && x1 - x0 <= 24.0 && points.iter().all(|p| p.0.fract() == 0.0) {
        (x0.ceil() as i64..=x1.floor() as i64).map(|v| v as f64).collect()
    } else {
        (0..=5).map(|k| x0 + (x1 - x0) * k as f64 / 5.0).collect()
    };
    for x in x_ticks {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="black"/><text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(x)
        );
    }
    let y_ticks: Vec<f64> = if plot.log_y {
        let step = ((y1 - y0) / 8.0).ceil().max(1.0) as i64;
        (y0 as i64..=y1 as i64).step_by(step as usize).map(|e| e as f64).collect()
    } else {
        (0..=5).map(|k| y0 + (y1 - y0) * k as f64 / 5.0).collect()
    };
    for t in y_ticks {
        let py = sy_raw(t);
        let label = if plot.log_y { format!("1e{}", t as i64) } else { tick_label(t) };
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#dddddd"/><text x="{}" y="{:.1}" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    // Data.
    let n_series = plot.series.len().max(1) as f64;
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.drawable(plot.log_y).collect();
        if plot.kind.is_histogram() {
            let bin = (1.0 / KTA_BINS as f64) / n_series;
            for &(x, y) in pts.iter().filter(|p| p.1 > 0.0) {
                let left = x - 0.5 / KTA_BINS as f64 + bin * k as f64;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.8"/>"#,
                    sx(left),
                    sy(y),
                    sx(left + bin) - sx(left),
                    sy_raw(y0) - sy(y)
                );
            }
        } else {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                path.join(" ")
            );
            for &(x, y) in &pts {
                let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(plot: &PlotData, path: &Path) -> Result<()> {
    let text = render(plot)?;
    std::fs::write(path, text).map_err(|e| QklError::io(path, e))
}
