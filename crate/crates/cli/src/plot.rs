//! SVG figures from result tables.
//!
//! Panels go in rows and losses in columns. State-evolution rows are drawn as
//! lines, simulation means as dots with one-standard-error bars, and the
//! Bayes-optimal baseline as a dotted black line. One colour per `r`. The
//! output depends only on the table, so re-plotting a saved table gives the
//! same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::CliError;
use crate::spec::{RunSpec, YAxis};
use crate::table::{read_csv, Row};

const CELL_W: f64 = 380.0;
const CELL_H: f64 = 280.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 44.0;
const HEADER: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Renders `settings.input` to `settings.output`, or next to the input with an
/// `.svg` extension.
pub fn render_file(spec: &RunSpec) -> Result<PathBuf, CliError> {
    let s = &spec.settings;
    let input = s.input.as_ref().ok_or_else(|| CliError::Usage("plot needs `input`".into()))?;
    let rows = read_csv(input)?;
    let svg = render(&rows, s.x.as_deref(), s.y)?;
    let out = s.output.clone().unwrap_or_else(|| input.with_extension("svg"));
    std::fs::write(&out, svg)?;
    Ok(out)
}

const X_CANDIDATES: [&str; 8] = ["c", "lambda", "rho", "alpha", "mu", "r", "n", "rho_test"];

fn x_of(row: &Row, key: &str) -> Option<f64> {
    match key {
        "c" => row.c,
        "lambda" => Some(row.lambda),
        "rho" => Some(row.rho),
        "rho_test" => Some(row.rho_test),
        "alpha" => Some(row.alpha),
        "mu" => Some(row.mu),
        "r" => row.r,
        "n" => row.n.map(|n| n as f64),
        "d" => row.d.parse().ok(),
        _ => None,
    }
}

fn y_of(row: &Row, y: YAxis) -> Option<(f64, Option<f64>)> {
    match y {
        YAxis::AccTest => row.acc_test.map(|v| (v, row.acc_test_se)),
        YAxis::AccTrain => row.acc_train.map(|v| (v, row.acc_train_se)),
        YAxis::ETest => row.e_test.map(|v| (v, row.e_test_se)),
        YAxis::ETrain => row.e_train.map(|v| (v, row.e_train_se)),
        YAxis::ErrTest => row.acc_test.map(|v| (1.0 - v, row.acc_test_se)),
        YAxis::C => row.c.map(|v| (v, None)),
    }
}

fn y_label(y: YAxis) -> &'static str {
    match y {
        YAxis::AccTest => "test accuracy",
        YAxis::AccTrain => "train accuracy",
        YAxis::ETest => "test loss",
        YAxis::ETrain => "train loss",
        YAxis::ErrTest => "1 - test accuracy",
        YAxis::C => "c",
    }
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The x parameter: the requested one, else the first that varies.
fn pick_x(rows: &[&Row], requested: Option<&str>) -> Result<String, CliError> {
    if let Some(x) = requested {
        return Ok(x.to_string());
    }
    let learners: Vec<&&Row> = rows.iter().filter(|r| r.kind != "bo").collect();
    X_CANDIDATES
        .iter()
        .find(|k| distinct(learners.iter().filter_map(|r| x_of(r, k))).len() > 1)
        .map(|k| k.to_string())
        .ok_or_else(|| CliError::Usage("no parameter varies in the table; set `x`".into()))
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: &[f64], log: bool) -> Self {
        let vals: Vec<f64> = values.iter().copied().filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = if log { (1e-3, 1.0) } else { (0.0, 1.0) };
        }
        if log {
            lo = 10f64.powf(lo.log10().floor());
            hi = 10f64.powf(hi.log10().ceil());
            if hi <= lo {
                hi = lo * 10.0;
            }
        } else if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = 0.04 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    /// Position in `[0, 1]`.
    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.max(self.lo * 1e-3).log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            return (a..=b).map(|k| 10f64.powi(k)).collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }

    fn label(&self, v: f64) -> String {
        if self.log {
            format!("1e{}", v.log10().round() as i32)
        } else {
            let s = format!("{v:.2}");
            if s == "-0.00" {
                "0.00".into()
            } else {
                s
            }
        }
    }
}

/// A polyline or point set in one cell.
struct Series<'a> {
    kind: &'a str,
    color: &'static str,
    points: Vec<(f64, f64, Option<f64>)>,
}

pub fn render(rows: &[Row], x: Option<&str>, y: YAxis) -> Result<String, CliError> {
    let usable: Vec<&Row> = rows
        .iter()
        .filter(|r| !r.failed() && matches!(r.kind.as_str(), "se" | "sim-mean" | "bo"))
        .filter(|r| y_of(r, y).is_some())
        .collect();
    if usable.is_empty() {
        return Err(CliError::Usage("the table holds no plottable rows".into()));
    }
    let xkey = pick_x(&usable, x)?;
    let log = y == YAxis::ErrTest;
    let mut panels: Vec<&str> = Vec::new();
    let mut losses: Vec<&str> = Vec::new();
    for r in &usable {
        if !panels.contains(&r.panel.as_str()) {
            panels.push(&r.panel);
        }
        if r.kind != "bo" && !losses.contains(&r.loss.as_str()) {
            losses.push(&r.loss);
        }
    }
    if losses.is_empty() {
        losses.push("");
    }
    let rs = distinct(usable.iter().filter_map(|r| r.r));
    let color = |r: Option<f64>| match r {
        Some(v) => PALETTE[rs.iter().position(|&x| x == v).unwrap_or(0) % PALETTE.len()],
        None => "#000000",
    };

    let width = losses.len() as f64 * CELL_W;
    let height = HEADER + panels.len() as f64 * CELL_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    legend(&mut svg, &rs, color);

    for (pi, panel) in panels.iter().enumerate() {
        for (li, loss) in losses.iter().enumerate() {
            let in_cell: Vec<&&Row> = usable
                .iter()
                .filter(|r| r.panel == *panel && (r.kind == "bo" || r.loss == *loss))
                .collect();
            let mut groups: BTreeMap<(u8, String), Series> = BTreeMap::new();
            for r in &in_cell {
                let (yv, se) = y_of(r, y).expect("filtered above");
                let xv = x_of(r, &xkey);
                let order = match r.kind.as_str() {
                    "bo" => 0,
                    "se" => 1,
                    _ => 2,
                };
                let key = (order, format!("{:020.8}", r.r.unwrap_or(-1.0)));
                let entry = groups.entry(key).or_insert_with(|| Series {
                    kind: if r.kind == "bo" { "bo" } else if r.kind == "se" { "se" } else { "sim" },
                    color: color(r.r),
                    points: Vec::new(),
                });
                entry.points.push((xv.unwrap_or(f64::NAN), yv, se));
            }
            let xs: Vec<f64> = groups
                .values()
                .filter(|s| s.kind != "bo")
                .flat_map(|s| s.points.iter().map(|p| p.0))
                .chain(groups.values().filter(|s| s.kind == "bo").flat_map(|s| s.points.iter().map(|p| p.0)))
                .filter(|v| v.is_finite())
                .collect();
            let ys: Vec<f64> = groups
                .values()
                .flat_map(|s| {
                    s.points.iter().flat_map(|&(_, v, se)| {
                        let e = se.unwrap_or(0.0);
                        [v - e, v + e]
                    })
                })
                .collect();
            let ax = Axis::new(&xs, false);
            let ay = Axis::new(&ys, log);
            let ox = li as f64 * CELL_W;
            let oy = HEADER + pi as f64 * CELL_H;
            let title = match (panels.len() > 1 || *panel != "main", loss.is_empty()) {
                (true, false) => format!("{panel}, {loss}"),
                (true, true) => panel.to_string(),
                (false, _) => loss.to_string(),
            };
            cell(&mut svg, ox, oy, &ax, &ay, &title, &xkey, y_label(y), &mut groups);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn legend(svg: &mut String, rs: &[f64], color: impl Fn(Option<f64>) -> &'static str) {
    let mut x = 10.0;
    for &r in rs {
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="14.00" x2="{:.2}" y2="14.00" stroke="{}" stroke-width="2"/><text x="{:.2}" y="18.00">r = {r}</text>"#,
            x + 18.0,
            color(Some(r)),
            x + 22.0
        );
        x += 90.0;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x:.2}" y="18.00">lines: state evolution, dots: simulation, dotted: Bayes-optimal</text>"#
    );
}

#[allow(clippy::too_many_arguments)]
fn cell(
    svg: &mut String,
    ox: f64,
    oy: f64,
    ax: &Axis,
    ay: &Axis,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    groups: &mut BTreeMap<(u8, String), Series>,
) {
    let (x0, x1) = (ox + LEFT, ox + CELL_W - RIGHT);
    let (y0, y1) = (oy + TOP, oy + CELL_H - BOTTOM);
    let px = |v: f64| x0 + ax.frac(v) * (x1 - x0);
    let py = |v: f64| y1 - ay.frac(v) * (y1 - y0);
    let _ = writeln!(
        svg,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444444"/>"##,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{title}</text>"#, (x0 + x1) / 2.0, y0 - 8.0);
    for t in ax.ticks() {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            y1 + 4.0,
            y1 + 16.0,
            ax.label(t)
        );
    }
    for t in ay.ticks() {
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#444444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            ay.label(t)
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, (x0 + x1) / 2.0, y1 + 32.0);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"#,
        ox + 14.0,
        (y0 + y1) / 2.0,
        ox + 14.0,
        (y0 + y1) / 2.0
    );
    for s in groups.values_mut() {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        match s.kind {
            "bo" => {
                let pts: Vec<(f64, f64)> = if s.points.iter().all(|p| !p.0.is_finite()) || s.points.len() == 1 {
                    // Constant in x: a horizontal line across the cell.
                    let v = s.points[0].1;
                    vec![(ax.lo, v), (ax.hi, v)]
                } else {
                    s.points.iter().filter(|p| p.0.is_finite()).map(|p| (p.0, p.1)).collect()
                };
                polyline(svg, &pts, &px, &py, s.color, r#" stroke-dasharray="2,3""#);
            }
            "se" => {
                let pts: Vec<(f64, f64)> = s.points.iter().filter(|p| p.0.is_finite()).map(|p| (p.0, p.1)).collect();
                polyline(svg, &pts, &px, &py, s.color, "");
            }
            _ => {
                for &(x, v, se) in s.points.iter().filter(|p| p.0.is_finite()) {
                    if let Some(e) = se.filter(|e| *e > 0.0) {
                        let _ = writeln!(
                            svg,
                            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
                            px(x),
                            py(v - e),
                            px(x),
                            py(v + e),
                            s.color
                        );
                    }
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.50" fill="{}"/>"#, px(x), py(v), s.color);
                }
            }
        }
    }
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], px: &dyn Fn(f64) -> f64, py: &dyn Fn(f64) -> f64, color: &str, extra: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.50"{extra}/>"#,
        coords.join(" ")
    );
}
