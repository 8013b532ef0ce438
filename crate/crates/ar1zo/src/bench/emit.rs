//! Deterministic result emission: fixed-schema CSV and simple SVG charts.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// The nine fixed result columns, in emission order.
pub const CSV_HEADER: &str = "experiment,arm,r,mode,sigma_xi,metric,value,stderr,seed";

/// One result row. Floats are rendered with the shortest round-trip
/// representation, so identical runs produce byte-identical files.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub experiment: String,
    pub arm: String,
    pub r: usize,
    pub mode: String,
    pub sigma_xi: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl SweepRow {
    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.arm,
            self.r,
            self.mode,
            self.sigma_xi,
            self.metric,
            self.value,
            self.stderr,
            self.seed
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write rows as CSV with the fixed header and LF line endings.
pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut buf = String::with_capacity(64 * (rows.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.to_line());
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(io_err(path))
}

/// A named polyline for [`write_svg`].
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal line chart. Axes are linear in the supplied coordinates, so
/// callers wanting log-log pass pre-logged values. A horizontal rule is
/// drawn at `threshold` when it falls inside the y-range (used to mark
/// the SNR = 1 crossing).
pub fn write_svg(
    path: &Path,
    title: &str,
    series: &[Series],
    threshold: Option<f64>,
) -> Result<()> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Config("write_svg: nothing to plot".into()));
    }
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 40.0, 40.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for &(x, y) in pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if let Some(t) = threshold {
        ymin = ymin.min(t);
        ymax = ymax.max(t);
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    // Range labels.
    svg.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{xmin}</text>\n<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{xmax}</text>\n<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{ymin}</text>\n<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{ymax}</text>\n",
        h - mb + 16.0,
        w - mr,
        h - mb + 16.0,
        ml - 4.0,
        h - mb,
        ml - 4.0,
        mt + 4.0
    ));
    if let Some(t) = threshold {
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#888\" stroke-dasharray=\"4 3\" data-threshold=\"{t}\"/>\n",
            sy(t),
            w - mr
        ));
    }
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let path_d: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path_d.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (i + 1) as f64,
            xml_escape(&s.name)
        ));
    }
    svg.push_str("</svg>\n");

    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(svg.as_bytes()).map_err(io_err(path))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
