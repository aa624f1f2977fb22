//! Minimal static scatter plot: points, two axes and a density colour ramp.

use std::fmt::Write;

use sample_regularity::density::RepresentationPoint;
use sample_regularity::fmt_num;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const RAMP_LOW: (u8, u8, u8) = (59, 76, 192);
const RAMP_HIGH: (u8, u8, u8) = (180, 4, 38);

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(RAMP_LOW.0, RAMP_HIGH.0),
        mix(RAMP_LOW.1, RAMP_HIGH.1),
        mix(RAMP_LOW.2, RAMP_HIGH.2)
    )
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// One circle per point at (cumulative loss, event count), coloured by
/// density from blue (sparse) to red (dense). Denser points are drawn last.
pub fn scatter(points: &[RepresentationPoint], density: &[f64], x_label: &str, y_label: &str) -> String {
    let (x0, x1) = span(points.iter().map(|p| p.x));
    let (y0, y1) = span(points.iter().map(|p| p.y));
    let (d0, d1) = span(density.iter().copied());
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        ramp(0.0),
        ramp(1.0)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<text x="{left}" y="{}" text-anchor="middle">{}</text>"#, bottom + 16.0, label(x0));
    let _ = writeln!(s, r#"<text x="{right}" y="{}" text-anchor="middle">{}</text>"#, bottom + 16.0, label(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end">{}</text>"#, left - 6.0, label(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 6.0, top + 4.0, label(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    let bar_x = right + 16.0;
    let _ = writeln!(
        s,
        r#"<rect x="{bar_x}" y="{top}" width="10" height="{}" fill="url(#ramp)"/>"#,
        bottom - top
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="9">{}</text>"#, bar_x - 4.0, top - 4.0, label(d1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="9">{}</text>"#, bar_x - 4.0, bottom + 12.0, label(d0));

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| density[a].total_cmp(&density[b]).then(a.cmp(&b)));
    let _ = writeln!(s, r#"<g fill-opacity="0.75">"#);
    for i in order {
        let p = &points[i];
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"><title>{}</title></circle>"#,
            px(p.x),
            py(p.y),
            ramp((density[i] - d0) / (d1 - d0)),
            p.sample_id
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        fmt_num(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(sample_id: usize, x: f64, y: f64) -> RepresentationPoint {
        RepresentationPoint { sample_id, x, y }
    }

    #[test]
    fn one_circle_per_point() {
        let pts = vec![pt(0, 1.0, 0.0), pt(1, 5.0, 2.0), pt(2, 5.0, 2.0)];
        let svg = scatter(&pts, &[0.1, 0.5, 0.5], "x", "y");
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_ranges_stay_finite() {
        let svg = scatter(&[pt(0, 3.0, 3.0)], &[1.0], "x", "y");
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#3b4cc0");
        assert_eq!(ramp(1.0), "#b40426");
        assert_eq!(ramp(f64::NAN), ramp(0.0));
    }
}
