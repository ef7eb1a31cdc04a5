use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::metrics::MetricsRow;
use crate::error::{Error, Result};

/// Distances at or below this are drawn at the floor of the log axis.
pub const Y_FLOOR: f64 = 1e-18;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Row attributes a polyline can be split by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKey {
    Policy,
    Budget,
    Seed,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Group {
    policy: Option<String>,
    budget: Option<usize>,
    seed: Option<u64>,
}

impl Group {
    fn of(row: &MetricsRow, keys: &[GroupKey]) -> Self {
        Group {
            policy: keys.contains(&GroupKey::Policy).then(|| row.policy.clone()),
            budget: keys.contains(&GroupKey::Budget).then_some(row.budget),
            seed: keys.contains(&GroupKey::Seed).then_some(row.seed),
        }
    }

    fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(p) = &self.policy {
            parts.push(p.clone());
        }
        if let Some(m) = self.budget {
            parts.push(format!("M={m}"));
        }
        if let Some(s) = self.seed {
            parts.push(format!("seed {s}"));
        }
        if parts.is_empty() {
            "all".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Per-group seed-mean of `sq_dist_to_reference` against frame index.
/// Rows without a distance are skipped.
fn group_means(rows: &[MetricsRow], keys: &[GroupKey]) -> BTreeMap<Group, BTreeMap<usize, f64>> {
    let mut acc: BTreeMap<Group, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        if let Some(d) = r.sq_dist_to_reference {
            let slot = acc.entry(Group::of(r, keys)).or_default().entry(r.t).or_insert((0.0, 0));
            slot.0 += d;
            slot.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(g, pts)| (g, pts.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect()))
        .collect()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of log10 squared distance against frame index, one polyline
/// per group.
pub fn svg_string(rows: &[MetricsRow], keys: &[GroupKey]) -> Result<String> {
    let experiment = match rows.first() {
        Some(r) => &r.experiment,
        None => return Err(Error::InvalidParameter("no rows to plot".into())),
    };
    if rows.iter().any(|r| &r.experiment != experiment) {
        return Err(Error::InvalidParameter("rows to plot must share one experiment".into()));
    }
    let groups = group_means(rows, keys);
    if groups.is_empty() {
        return Err(Error::InvalidParameter("rows carry no reference distances".into()));
    }

    let log = |d: f64| d.max(Y_FLOOR).log10();
    let all = groups.values().flat_map(|pts| pts.iter());
    let (mut t_min, mut t_max, mut y_min, mut y_max) = (usize::MAX, 0, f64::INFINITY, f64::NEG_INFINITY);
    for (&t, &d) in all {
        t_min = t_min.min(t);
        t_max = t_max.max(t);
        y_min = y_min.min(log(d));
        y_max = y_max.max(log(d));
    }
    let y_lo = y_min.floor();
    let y_hi = if y_max.ceil() > y_lo { y_max.ceil() } else { y_lo + 1.0 };
    let t_span = (t_max - t_min).max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: usize| LEFT + (t - t_min) as f64 / t_span * plot_w;
    let py = |d: f64| TOP + (y_hi - log(d)) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, esc(experiment));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let decades = (y_hi - y_lo) as usize;
    let step = decades.div_ceil(10).max(1);
    for k in (0..=decades).step_by(step) {
        let e = y_lo + k as f64;
        let y = TOP + (y_hi - e) / (y_hi - y_lo) * plot_h;
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + plot_w);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, y + 4.0, e as i64);
    }
    let t_step = (t_max - t_min).div_ceil(10).max(1);
    for t in (t_min..=t_max).step_by(t_step) {
        let x = px(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">frame t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">squared distance to reference (log scale)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, (group, pts)) in groups.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let label = esc(&group.label());
        let points: Vec<String> = pts.iter().map(|(&t, &d)| format!("{:.2},{:.2}", px(t), py(d))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-group="{label}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg_lines(rows: &[MetricsRow], keys: &[GroupKey], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = svg_string(rows, keys)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Vertices of every polyline in an SVG produced by [`svg_string`], keyed by
/// legend label.
pub fn parse_polylines(svg: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut out = BTreeMap::new();
    for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
        let attr = |name: &str| {
            let key = format!("{name}=\"");
            let start = line.find(&key)? + key.len();
            let end = line[start..].find('"')? + start;
            Some(&line[start..end])
        };
        let (Some(label), Some(points)) = (attr("data-group"), attr("points")) else {
            continue;
        };
        let pts = points
            .split(' ')
            .filter_map(|p| {
                let (x, y) = p.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        out.insert(label.to_owned(), pts);
    }
    out
}
