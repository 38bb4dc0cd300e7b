//! Minimal SVG scatter and line charts.
//!
//! Plot builders take plain data; the `*_from_csv` helpers rebuild every
//! figure the CLI emits from its CSV output alone.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#d62728", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub color: String,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn header(out: &mut String, title: &str, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(xv), H - PAD + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 6.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, esc(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn scatter_svg(points: &[Point], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::fit(points.iter().map(|p| p.x), points.iter().map(|p| p.y));
    let mut out = String::new();
    header(&mut out, title, &f, xlabel, ylabel);
    for p in points {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, f.px(p.x), f.py(p.y), p.color);
    }
    out.push_str("</svg>\n");
    out
}

pub fn line_svg(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let f = Frame::fit(xs, ys);
    let mut out = String::new();
    header(&mut out, title, &f, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
        let ly = PAD + 16.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, W - PAD - 150.0, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, W - PAD - 134.0, esc(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn read_table(csv_text: &str) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), csv::Error> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers()?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn col(header: &csv::StringRecord, name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

/// Ground-truth and flagged-outlier scatter plots from the synth2d points
/// CSV (`x0,x1,__origin,pseudo_label,flagged`).
pub fn synth2d_plots_from_csv(csv_text: &str) -> Result<(String, String), String> {
    let (h, rows) = read_table(csv_text).map_err(|e| e.to_string())?;
    let need = |n: &str| col(&h, n).ok_or_else(|| format!("missing column `{n}`"));
    let (cx, cy, co, cl, cf) = (need("x0")?, need("x1")?, need("__origin")?, need("pseudo_label")?, need("flagged")?);
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    let mut truth = Vec::with_capacity(rows.len());
    let mut flagged = Vec::with_capacity(rows.len());
    for r in &rows {
        let (x, y) = (num(&r[cx])?, num(&r[cy])?);
        let color = if &r[co] == "ood" {
            "#7f7f7f".to_string()
        } else {
            let label: usize = r[cl].parse().map_err(|_| "bad pseudo_label".to_string())?;
            PALETTE[label % PALETTE.len()].to_string()
        };
        truth.push(Point { x, y, color: color.clone() });
        let fcolor = if &r[cf] == "1" { "#000000".to_string() } else { color };
        flagged.push(Point { x, y, color: fcolor });
    }
    Ok((
        scatter_svg(&truth, "Wild set: ground truth (grey = OOD)", "x0", "x1"),
        scatter_svg(&flagged, "Wild set: flagged outliers in black", "x0", "x1"),
    ))
}

/// Line chart with one series per named y column against `x_col`.
pub fn lines_from_csv(csv_text: &str, x_col: &str, y_cols: &[&str], title: &str, ylabel: &str) -> Result<String, String> {
    let (h, rows) = read_table(csv_text).map_err(|e| e.to_string())?;
    let xi = col(&h, x_col).ok_or_else(|| format!("missing column `{x_col}`"))?;
    let mut series = Vec::new();
    for name in y_cols {
        let yi = col(&h, name).ok_or_else(|| format!("missing column `{name}`"))?;
        let points = rows
            .iter()
            .map(|r| {
                let x = r[xi].parse::<f64>().map_err(|_| format!("bad number `{}`", &r[xi]))?;
                let y = r[yi].parse::<f64>().map_err(|_| format!("bad number `{}`", &r[yi]))?;
                Ok((x, y))
            })
            .collect::<Result<Vec<_>, String>>()?;
        series.push(Series { name: name.to_string(), points });
    }
    Ok(line_svg(&series, title, x_col, ylabel))
}
