//! Minimal SVG line charts rendered from CSV text.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f4e79", "#c55a11", "#548235", "#7030a0", "#bf9000", "#2e75b6", "#a50021", "#404040",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    /// Column whose distinct values split rows into separate series.
    pub group_by: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
}

impl PlotSpec {
    pub fn lines(title: &str, x: &str, y: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            x: x.to_string(),
            y: y.iter().map(|s| s.to_string()).collect(),
            group_by: None,
            log_x: false,
            log_y: false,
        }
    }

    pub fn grouped(mut self, column: &str) -> Self {
        self.group_by = Some(column.to_string());
        self
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Config(format!("plot column {name:?} not in CSV")))
}

fn collect_series(csv_text: &[u8], spec: &PlotSpec) -> Result<Vec<Series>> {
    let mut reader = csv::Reader::from_reader(csv_text);
    let header = reader.headers()?.clone();
    let xi = column(&header, &spec.x)?;
    let yis = spec.y.iter().map(|y| column(&header, y)).collect::<Result<Vec<_>>>()?;
    let gi = spec.group_by.as_deref().map(|g| column(&header, g)).transpose()?;
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        let Some(x) = parse(xi) else { continue };
        for (yi, yname) in yis.iter().zip(&spec.y) {
            let Some(y) = parse(*yi) else { continue };
            let label = match gi {
                Some(g) if spec.y.len() == 1 => rec.get(g).unwrap_or_default().to_string(),
                Some(g) => format!("{} {}", rec.get(g).unwrap_or_default(), yname),
                None => yname.clone(),
            };
            if !series.contains_key(&label) {
                order.push(label.clone());
            }
            series.entry(label).or_default().push((x, y));
        }
    }
    Ok(order
        .into_iter()
        .map(|label| {
            let points = series.remove(&label).unwrap_or_default();
            Series { label, points }
        })
        .collect())
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = lo.abs().max(1.0) * 0.05;
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn tick_label(&self, k: usize) -> String {
        let t = self.lo + (self.hi - self.lo) * k as f64 / (TICKS - 1) as f64;
        let v = if self.log { 10f64.powf(t) } else { t };
        if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
            format!("{v:.2e}")
        } else {
            format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the columns named in `spec` as polylines.
pub fn render_svg(csv_text: &[u8], spec: &PlotSpec) -> Result<String> {
    let series = collect_series(csv_text, spec)?;
    let xs = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), spec.log_x);
    let ys = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), spec.log_y);
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |u: f64| MARGIN_LEFT + u * pw;
    let py = |u: f64| MARGIN_TOP + (1.0 - u) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..TICKS {
        let u = k as f64 / (TICKS - 1) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(u),
            MARGIN_TOP + ph + 16.0,
            xs.tick_label(k)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            py(u) + 4.0,
            ys.tick_label(k)
        );
    }
    let xlabel = if spec.log_x { format!("{} (log)", spec.x) } else { spec.x.clone() };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&xlabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", px(xs.unit(x)?), py(ys.unit(y)?))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_TOP + 12.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
