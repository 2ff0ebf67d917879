//! Self-contained SVG renderings of the CSV reports: loss curves, RMS bar
//! charts, and transfer heatmaps. Everything is emitted inline (no
//! scripts, no external assets), so the files open anywhere.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which rendering to produce from a CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `iter,loss` trace as a polyline.
    LossCurve,
    /// Per-dimension RMS as grouped bars.
    ErrorBars,
    /// Transfer grid as an annotated color matrix.
    Heatmap,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<PlotKind> {
        match s {
            "loss-curve" => Ok(PlotKind::LossCurve),
            "error-bars" => Ok(PlotKind::ErrorBars),
            "heatmap" => Ok(PlotKind::Heatmap),
            other => Err(Error::Config(format!(
                "unknown plot kind {other:?}, expected loss-curve, error-bars, or heatmap"
            ))),
        }
    }
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Result<Csv> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty csv".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Format("csv has a header but no rows".into()));
        }
        Ok(Csv { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Column(name.into()))
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col].parse().map_err(|_| {
            Error::Format(format!(
                "row {}, column {:?}: {:?} is not a number",
                row + 1,
                self.header[col],
                self.rows[row][col]
            ))
        })
    }
}

/// Plot area plus the data ranges it maps onto pixels.
struct Frame {
    w: f64,
    h: f64,
    l: f64,
    t: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    fn new(plot_w: f64, plot_h: f64, x: (f64, f64), y: (f64, f64)) -> Frame {
        let (l, r, t, b) = (62.0, 18.0, 18.0, 66.0);
        // Degenerate ranges still need a nonzero span to map through.
        let pad = |(a, b): (f64, f64)| if a == b { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Frame {
            w: l + plot_w + r,
            h: t + plot_h + b,
            l,
            t,
            x0,
            x1,
            y0,
            y1,
            plot_w,
            plot_h,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        self.l + (x - self.x0) / (self.x1 - self.x0) * self.plot_w
    }

    fn sy(&self, y: f64) -> f64 {
        self.t + self.plot_h - (y - self.y0) / (self.y1 - self.y0) * self.plot_h
    }
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>\n"
    )
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, size: f64, extra: &str, s: &str) {
    let esc = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let _ = writeln!(
        out,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" \
         font-family=\"sans-serif\" font-size=\"{size:.0}\"{extra}>{esc}</text>"
    );
}

fn fmt_val(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn lin_ticks(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Border, ticks, and axis titles around the plot area.
fn frame_svg(f: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333\"/>",
        f.l, f.t, f.plot_w, f.plot_h
    );
    axis_ticks(f, &mut out);
    text(&mut out, f.l + f.plot_w / 2.0, f.h - 10.0, "middle", 11.0, "", x_label);
    let ty = f.t + f.plot_h / 2.0;
    text(
        &mut out,
        16.0,
        ty,
        "middle",
        11.0,
        &format!(" transform=\"rotate(-90 16 {ty:.1})\""),
        y_label,
    );
    out
}

fn axis_ticks(f: &Frame, out: &mut String) {
    let bottom = f.t + f.plot_h;
    for v in lin_ticks(f.x0, f.x1, 5) {
        let x = f.sx(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{bottom:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
            bottom + 4.0
        );
        text(out, x, bottom + 16.0, "middle", 10.0, "", &fmt_val(v));
    }
    for v in lin_ticks(f.y0, f.y1, 5) {
        let y = f.sy(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#333\"/>",
            f.l - 4.0,
            f.l
        );
        text(out, f.l - 7.0, y + 3.5, "end", 10.0, "", &fmt_val(v));
    }
}

fn loss_curve(csv: &Csv) -> Result<String> {
    let ci = csv.col("iter")?;
    let cl = csv.col("loss")?;
    let mut pts = Vec::with_capacity(csv.rows.len());
    for r in 0..csv.rows.len() {
        pts.push((csv.num(r, ci)?, csv.num(r, cl)?));
    }
    let xr = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let yr = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let f = Frame::new(480.0, 260.0, xr, yr);

    let mut out = svg_open(f.w, f.h);
    out.push_str(&frame_svg(&f, "iteration", "loss"));
    let points: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.1},{:.1}", f.sx(x), f.sy(y)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>",
        points.join(" ")
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn error_bars(csv: &Csv) -> Result<String> {
    let cd = csv.col("dim")?;
    let cr = csv.col("rms")?;
    // Every remaining non-count column labels the series a bar belongs to.
    let group_cols: Vec<usize> = (0..csv.header.len())
        .filter(|&c| c != cd && c != cr && csv.header[c] != "trials")
        .collect();
    let mut bars: Vec<(String, String, f64)> = Vec::new();
    for r in 0..csv.rows.len() {
        let group = group_cols
            .iter()
            .map(|&c| csv.rows[r][c].as_str())
            .collect::<Vec<_>>()
            .join("/");
        bars.push((group, csv.rows[r][cd].clone(), csv.num(r, cr)?));
    }
    let vmax = bars.iter().fold(0.0_f64, |a, b| a.max(b.2));
    let vmax = if vmax > 0.0 { vmax * 1.05 } else { 1.0 };
    let pitch = 34.0;
    let f = Frame::new((bars.len() as f64) * pitch + 20.0, 240.0, (0.0, 1.0), (0.0, vmax));

    let mut out = svg_open(f.w, f.h);
    let _ = writeln!(
        out,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333\"/>",
        f.l, f.t, f.plot_w, f.plot_h
    );
    for v in lin_ticks(0.0, vmax, 5) {
        let y = f.sy(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#333\"/>",
            f.l - 4.0,
            f.l
        );
        text(&mut out, f.l - 7.0, y + 3.5, "end", 10.0, "", &fmt_val(v));
    }
    let bottom = f.t + f.plot_h;
    let mut run_start = 0usize;
    for (i, bar) in bars.iter().enumerate() {
        let x = f.l + 10.0 + i as f64 * pitch;
        let y = f.sy(bar.2);
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#1f6fb2\"/>",
            pitch - 8.0,
            bottom - y
        );
        text(&mut out, x + (pitch - 8.0) / 2.0, bottom + 14.0, "middle", 10.0, "", &bar.1);
        // Close out a series run when the group label changes.
        let last_of_run = i + 1 == bars.len() || bars[i + 1].0 != bar.0;
        if last_of_run {
            let x0 = f.l + 10.0 + run_start as f64 * pitch;
            let mid = (x0 + x + pitch - 8.0) / 2.0;
            text(&mut out, mid, bottom + 32.0, "middle", 10.0, "", &bar.0);
            if i + 1 < bars.len() {
                let sep = x + pitch - 4.0;
                let _ = writeln!(
                    out,
                    "<line x1=\"{sep:.1}\" y1=\"{:.1}\" x2=\"{sep:.1}\" y2=\"{bottom:.1}\" \
                     stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>",
                    f.t
                );
            }
            run_start = i + 1;
        }
    }
    text(&mut out, f.l + f.plot_w / 2.0, f.h - 10.0, "middle", 11.0, "", "rms error");
    let ty = f.t + f.plot_h / 2.0;
    text(
        &mut out,
        16.0,
        ty,
        "middle",
        11.0,
        &format!(" transform=\"rotate(-90 16 {ty:.1})\""),
        "rms",
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn blend(frac: f64) -> String {
    let a = (247.0, 251.0, 255.0);
    let b = (8.0, 48.0, 107.0);
    let c = |x: f64, y: f64| (x + (y - x) * frac).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn heatmap(csv: &Csv) -> Result<String> {
    let ct = csv.col("train_set")?;
    let ce = csv.col("eval_task")?;
    let cr = csv.col("rms")?;
    let mut cols: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut acc: Vec<((usize, usize), (f64, usize))> = Vec::new();
    for r in 0..csv.rows.len() {
        let ci = match cols.iter().position(|c| *c == csv.rows[r][ct]) {
            Some(i) => i,
            None => {
                cols.push(csv.rows[r][ct].clone());
                cols.len() - 1
            }
        };
        let ri = match rows.iter().position(|c| *c == csv.rows[r][ce]) {
            Some(i) => i,
            None => {
                rows.push(csv.rows[r][ce].clone());
                rows.len() - 1
            }
        };
        let v = csv.num(r, cr)?;
        match acc.iter_mut().find(|(k, _)| *k == (ri, ci)) {
            Some((_, (s, n))) => {
                *s += v * v;
                *n += 1;
            }
            None => acc.push(((ri, ci), (v * v, 1))),
        }
    }
    // Dimensions sharing a cell pool into one number.
    let cell = |ri: usize, ci: usize| -> Option<f64> {
        acc.iter()
            .find(|(k, _)| *k == (ri, ci))
            .map(|(_, (s, n))| (s / *n as f64).sqrt())
    };
    let vals: Vec<f64> = acc.iter().map(|(_, (s, n))| (s / *n as f64).sqrt()).collect();
    let (vmin, vmax) = vals
        .iter()
        .fold((f64::MAX, f64::MIN), |a, &v| (a.0.min(v), a.1.max(v)));
    let frac = |v: f64| {
        if vmax > vmin {
            (v - vmin) / (vmax - vmin)
        } else {
            0.5
        }
    };

    let (cw, ch) = (86.0, 54.0);
    let (l, t) = (112.0, 58.0);
    let w = l + cols.len() as f64 * cw + 20.0;
    let h = t + rows.len() as f64 * ch + 20.0;
    let mut out = svg_open(w, h);
    text(&mut out, l + cols.len() as f64 * cw / 2.0, 16.0, "middle", 11.0, "", "training mixture");
    let ty = t + rows.len() as f64 * ch / 2.0;
    text(
        &mut out,
        14.0,
        ty,
        "middle",
        11.0,
        &format!(" transform=\"rotate(-90 14 {ty:.1})\""),
        "evaluation task",
    );
    for (ci, name) in cols.iter().enumerate() {
        text(&mut out, l + ci as f64 * cw + cw / 2.0, t - 8.0, "middle", 11.0, "", name);
    }
    for (ri, name) in rows.iter().enumerate() {
        text(&mut out, l - 8.0, t + ri as f64 * ch + ch / 2.0 + 4.0, "end", 11.0, "", name);
    }
    for ri in 0..rows.len() {
        for ci in 0..cols.len() {
            let x = l + ci as f64 * cw;
            let y = t + ri as f64 * ch;
            match cell(ri, ci) {
                Some(v) => {
                    let fr = frac(v);
                    let _ = writeln!(
                        out,
                        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cw:.1}\" height=\"{ch:.1}\" \
                         fill=\"{}\" stroke=\"#fff\"/>",
                        blend(fr)
                    );
                    let ink = if fr > 0.55 { "#fff" } else { "#222" };
                    text(
                        &mut out,
                        x + cw / 2.0,
                        y + ch / 2.0 + 4.0,
                        "middle",
                        11.0,
                        &format!(" fill=\"{ink}\""),
                        &format!("{v:.3}"),
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cw:.1}\" height=\"{ch:.1}\" \
                         fill=\"#eee\" stroke=\"#fff\"/>"
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders one CSV into one SVG document.
pub fn render_plot(csv_text: &str, kind: PlotKind) -> Result<String> {
    let csv = Csv::parse(csv_text)?;
    match kind {
        PlotKind::LossCurve => loss_curve(&csv),
        PlotKind::ErrorBars => error_bars(&csv),
        PlotKind::Heatmap => heatmap(&csv),
    }
}

/// Reads a CSV, renders it, and writes the SVG. Nothing is written when
/// rendering fails.
pub fn emit_plot_svg(csv_path: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let svg = render_plot(&text, kind)?;
    std::fs::write(out, svg)?;
    Ok(())
}
