//! Minimal hand-written SVG: phase against Alice wavelength with the
//! acceptance corridor shaded and optional channel markers.

use std::fmt::Write as _;

pub struct PhasePlot<'a> {
    pub title: &'a str,
    pub curve: &'a [(f64, f64)],
    pub threshold: f64,
    /// (wavelength, phase, passes)
    pub markers: &'a [(f64, f64, bool)],
}

const W: f64 = 800.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

impl PhasePlot<'_> {
    pub fn render(&self) -> String {
        let xs = self.curve.iter().map(|p| p.0).chain(self.markers.iter().map(|m| m.0));
        let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let ys = self.curve.iter().map(|p| p.1).chain(self.markers.iter().map(|m| m.1));
        let (mut y0, mut y1) = ys.fold((-self.threshold, self.threshold), |(a, b), y| (a.min(y), b.max(y)));
        let pad = 0.05 * (y1 - y0).max(1e-3);
        y0 -= pad;
        y1 += pad;
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * (H - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, self.title);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe8cf" opacity="0.7"/>"##,
            LEFT,
            py(self.threshold),
            W - LEFT - RIGHT,
            py(-self.threshold) - py(self.threshold)
        );

        let xstep = nice_step(x1 - x0);
        let mut x = (x0 / xstep).ceil() * xstep;
        while x <= x1 + 1e-9 {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
                px(x),
                TOP,
                H - BOTTOM,
                H - BOTTOM + 16.0,
                x
            );
            x += xstep;
        }
        let ystep = nice_step(y1 - y0);
        let mut y = (y0 / ystep).ceil() * ystep;
        while y <= y1 + 1e-12 {
            let label = if y.abs() < 1e-12 { 0.0 } else { y };
            let _ = writeln!(
                s,
                r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                LEFT,
                py(y),
                W - RIGHT,
                LEFT - 6.0,
                py(y) + 4.0,
                (label * 1e6).round() / 1e6
            );
            y += ystep;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">Alice wavelength (nm)</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">two-photon phase (rad)</text>"#,
            (TOP + H - BOTTOM) / 2.0
        );

        if !self.curve.is_empty() {
            let pts: Vec<String> = self.curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
                pts.join(" ")
            );
        }
        for &(x, y, pass) in self.markers {
            let colour = if pass { "#2a8a2a" } else { "#c0392b" };
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, px(x), py(y));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_closed_document() {
        let curve: Vec<(f64, f64)> = (0..50).map(|i| (1540.0 + i as f64, -0.001 * (i * i) as f64)).collect();
        let svg = PhasePlot {
            title: "t",
            curve: &curve,
            threshold: 0.14,
            markers: &[(1545.0, -0.02, true), (1580.0, -2.0, false)],
        }
        .render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("<polyline"));
        assert!(!svg.contains("NaN"));
    }
}
