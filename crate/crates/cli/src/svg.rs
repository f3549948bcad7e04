//! Hand-emitted SVG of the estimated feasible set and frontier.

use std::fmt::Write;

pub struct Plot<'a> {
    pub polygon: &'a [[f64; 2]],
    /// (normal, offset) pairs drawn as lines qᵀz = h.
    pub hyperplanes: &'a [([f64; 2], f64)],
    pub frontier: &'a [[f64; 2]],
    pub band: &'a [[f64; 2]],
    /// (label, point) markers.
    pub markers: &'a [(&'a str, [f64; 2])],
}

const SIZE: f64 = 560.0;
const MARGIN: f64 = 40.0;

struct View {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl View {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let w = SIZE - 2.0 * MARGIN;
        let x = MARGIN + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * w;
        let y = SIZE - MARGIN - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * w;
        (x, y)
    }

    /// Segment of the line qᵀz = h inside the view box.
    fn clip_line(&self, q: [f64; 2], h: f64) -> Option<([f64; 2], [f64; 2])> {
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for &x in &[self.lo[0], self.hi[0]] {
            if q[1].abs() > 1e-12 {
                let y = (h - q[0] * x) / q[1];
                if y >= self.lo[1] - 1e-12 && y <= self.hi[1] + 1e-12 {
                    pts.push([x, y]);
                }
            }
        }
        for &y in &[self.lo[1], self.hi[1]] {
            if q[0].abs() > 1e-12 {
                let x = (h - q[1] * y) / q[0];
                if x >= self.lo[0] - 1e-12 && x <= self.hi[0] + 1e-12 {
                    pts.push([x, y]);
                }
            }
        }
        let a = *pts.first()?;
        let b = pts
            .iter()
            .copied()
            .max_by(|u, v| {
                let du = (u[0] - a[0]).hypot(u[1] - a[1]);
                let dv = (v[0] - a[0]).hypot(v[1] - a[1]);
                du.total_cmp(&dv)
            })
            .unwrap_or(a);
        Some((a, b))
    }
}

fn view_of(plot: &Plot<'_>) -> View {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let all = plot
        .polygon
        .iter()
        .chain(plot.frontier)
        .chain(plot.band)
        .chain(plot.markers.iter().map(|m| &m.1));
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        return View { lo: [0.0, 0.0], hi: [1.0, 1.0] };
    }
    // square view with a margin so every supporting line crosses it
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let pad = 0.15 * span;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let half = span / 2.0 + pad;
    View {
        lo: [mid[0] - half, mid[1] - half],
        hi: [mid[0] + half, mid[1] + half],
    }
}

pub fn render(plot: &Plot<'_>) -> String {
    let v = view_of(plot);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- fafrontier {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);

    // axes frame and the 45-degree line
    let (x0, y0) = v.px(v.lo);
    let (x1, y1) = v.px(v.hi);
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    let (a, b) = (v.px([v.lo[0], v.lo[0]]), v.px([v.hi[0], v.hi[0]]));
    let _ = writeln!(
        s,
        r#"<line class="diagonal" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
        a.0, a.1, b.0, b.1
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">e_r</text>"#,
        SIZE / 2.0,
        SIZE - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {:.2})">e_b</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );

    for &(q, h) in plot.hyperplanes {
        if let Some((p, r)) = v.clip_line(q, h) {
            let (a, b) = (v.px(p), v.px(r));
            let _ = writeln!(
                s,
                r##"<line class="hyperplane" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#9ab" stroke-width="0.5"/>"##,
                a.0, a.1, b.0, b.1
            );
        }
    }
    if !plot.polygon.is_empty() {
        let pts: Vec<String> = plot
            .polygon
            .iter()
            .map(|p| {
                let (x, y) = v.px(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="feasible-set" points="{}" fill="#dde8f0" fill-opacity="0.6" stroke="#246" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
    }
    for p in plot.band {
        let (x, y) = v.px(*p);
        let _ = writeln!(s, r##"<circle class="band" cx="{x:.2}" cy="{y:.2}" r="1.2" fill="#f0a040" fill-opacity="0.5"/>"##);
    }
    for p in plot.frontier {
        let (x, y) = v.px(*p);
        let _ = writeln!(s, r##"<circle class="frontier" cx="{x:.2}" cy="{y:.2}" r="1.2" fill="#c22"/>"##);
    }
    for (label, p) in plot.markers {
        let (x, y) = v.px(*p);
        let _ = writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="13">{label}</text>"#, x + 6.0, y - 6.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrilateral_and_line_count() {
        let poly = [[0.2, 0.5], [0.5, 0.2], [0.8, 0.5], [0.5, 0.8]];
        let planes: Vec<([f64; 2], f64)> = (0..7)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 7.0;
                let q = [t.cos(), t.sin()];
                let h = poly.iter().map(|p| q[0] * p[0] + q[1] * p[1]).fold(f64::MIN, f64::max);
                (q, h)
            })
            .collect();
        let svg = render(&Plot {
            polygon: &poly,
            hyperplanes: &planes,
            frontier: &[],
            band: &[],
            markers: &[("R", [0.2, 0.5])],
        });
        assert_eq!(svg.matches(r#"<line class="hyperplane""#).count(), 7);
        let pts = svg.split("class=\"feasible-set\" points=\"").nth(1).unwrap();
        let pts = pts.split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 4);
    }
}
