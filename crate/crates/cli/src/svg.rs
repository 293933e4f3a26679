//! Panelled line plots: one panel per frame count, the three probe
//! conditions overlaid in each.

use std::fmt::Write as _;

use itcnet::pipeline::report::StoredCurves;
use itcnet::pipeline::Condition;

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 36.0;
const COLUMNS: usize = 5;

fn colour(c: Condition) -> &'static str {
    match c {
        Condition::Ic => "#d62728",
        Condition::Rc => "#1f77b4",
        Condition::Tc => "#2ca02c",
    }
}

struct Axes<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    x_range: (f64, f64),
}

/// `series` holds, per curve, its frame count, condition and points in
/// data units; y always spans [0, 1].
fn panels(axes: &Axes, series: &[(usize, Condition, Vec<(f64, f64)>)]) -> String {
    let mut counts: Vec<usize> = series.iter().map(|s| s.0).collect();
    counts.sort_unstable();
    counts.dedup();
    let cols = COLUMNS.min(counts.len()).max(1);
    let rows = counts.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + 40.0;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="8" y="16" font-size="13">{}</text>"#, axes.title).unwrap();
    for (k, c) in Condition::ALL.iter().enumerate() {
        let x = width - 200.0 + 65.0 * k as f64;
        writeln!(
            s,
            r#"<line x1="{x}" y1="12" x2="{}" y2="12" stroke="{}" stroke-width="2"/><text x="{}" y="16">{}</text>"#,
            x + 16.0,
            colour(*c),
            x + 20.0,
            c.as_str().to_uppercase()
        )
        .unwrap();
    }

    let (x0, x1) = axes.x_range;
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    for (p, &n) in counts.iter().enumerate() {
        let ox = (p % cols) as f64 * PANEL_W + MARGIN;
        let oy = (p / cols) as f64 * PANEL_H + 40.0;
        let (w, h) = (PANEL_W - MARGIN - 10.0, PANEL_H - MARGIN - 16.0);
        let px = |x: f64| ox + (x - x0) / span * w;
        let py = |y: f64| oy + (1.0 - y.clamp(0.0, 1.0)) * h;
        writeln!(s, r##"<g><rect x="{ox}" y="{oy}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">N = {n}</text>"#, ox + w / 2.0, oy - 4.0).unwrap();
        for t in [0.0, 0.5, 1.0] {
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, ox - 3.0, py(t) + 3.0).unwrap();
        }
        writeln!(s, r#"<text x="{ox}" y="{}">{x0}</text>"#, oy + h + 12.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#, ox + w, oy + h + 12.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ox + w / 2.0, oy + h + 24.0, axes.x_label).unwrap();
        writeln!(
            s,
            r#"<text transform="translate({},{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            ox - 24.0,
            oy + h / 2.0,
            axes.y_label
        )
        .unwrap();
        for (_, cond, pts) in series.iter().filter(|x| x.0 == n) {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(
                s,
                r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                cond.as_str(),
                colour(*cond),
                path.join(" ")
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Identification rate against rank.
pub fn cmc_panels(curves: &[StoredCurves]) -> String {
    let ranks = curves.iter().map(|c| c.cmc.len()).max().unwrap_or(1);
    let series: Vec<_> = curves
        .iter()
        .map(|c| {
            let pts = c.cmc.iter().enumerate().map(|(k, &r)| ((k + 1) as f64, r)).collect();
            (c.count, c.condition, pts)
        })
        .collect();
    let axes = Axes {
        title: "CMC",
        x_label: "rank",
        y_label: "identification rate",
        x_range: (1.0, ranks as f64),
    };
    panels(&axes, &series)
}

/// Genuine accept rate `1 - FRR` against false accept rate.
pub fn roc_panels(curves: &[StoredCurves]) -> String {
    let series: Vec<_> = curves
        .iter()
        .map(|c| {
            let pts = c.roc.iter().map(|p| (p.far, 1.0 - p.frr)).collect();
            (c.count, c.condition, pts)
        })
        .collect();
    let axes = Axes {
        title: "ROC",
        x_label: "false accept rate",
        y_label: "1 - false reject rate",
        x_range: (0.0, 1.0),
    };
    panels(&axes, &series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itcnet::metrics::RocPoint;

    fn curves(counts: &[usize]) -> Vec<StoredCurves> {
        counts
            .iter()
            .flat_map(|&n| {
                Condition::ALL.map(|condition| StoredCurves {
                    condition,
                    count: n,
                    cmc: vec![0.5, 1.0],
                    roc: vec![
                        RocPoint { threshold: f64::NEG_INFINITY, far: 0.0, frr: 1.0 },
                        RocPoint { threshold: f64::INFINITY, far: 1.0, frr: 0.0 },
                    ],
                })
            })
            .collect()
    }

    #[test]
    fn nine_counts_give_nine_panels_of_three_series() {
        let svg = roc_panels(&curves(&[1, 2, 4, 6, 8, 10, 12, 14, 20]));
        assert_eq!(svg.matches("<polyline").count(), 27);
        assert_eq!(svg.matches("<g>").count(), 9);
        for c in Condition::ALL {
            assert_eq!(svg.matches(&format!(r#"class="{}""#, c.as_str())).count(), 9);
        }
        assert!(svg.contains("N = 20"));
    }

    #[test]
    fn cmc_points_are_inside_the_panel() {
        let svg = cmc_panels(&curves(&[1]));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
