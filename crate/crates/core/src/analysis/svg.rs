//! Minimal SVG line and bar charts.

use std::fmt::Write;

pub const WIDTH: f64 = 900.0;
pub const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Red at 0, green at 1.
pub fn red_green(a: f64) -> String {
    let a = a.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - a)).round() as u8;
    let g = (200.0 * a).round() as u8;
    format!("#{r:02x}{g:02x}40")
}

pub struct Plot {
    body: String,
    x_max: f64,
}

impl Plot {
    /// Axes for `x ∈ [0, x_max]`, `y ∈ [0, 1]`.
    pub fn new(title: &str, x_label: &str, y_label: &str, x_max: f64) -> Self {
        let mut body = String::new();
        let (w, h) = (WIDTH, HEIGHT);
        writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        )
        .unwrap();
        writeln!(body, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(
            body,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            w / 2.0,
            escape(title)
        )
        .unwrap();
        writeln!(
            body,
            r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            b = h - MARGIN,
            r = w - MARGIN
        )
        .unwrap();
        for k in 0..=4 {
            let v = k as f64 / 4.0;
            let y = h - MARGIN - v * (h - 2.0 * MARGIN);
            writeln!(
                body,
                r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{v:.2}</text>"#,
                MARGIN - 4.0
            )
            .unwrap();
        }
        writeln!(
            body,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            w / 2.0,
            h - 10.0,
            escape(x_label)
        )
        .unwrap();
        writeln!(
            body,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(y_label)
        )
        .unwrap();
        Plot {
            body,
            x_max: x_max.max(1e-9),
        }
    }

    pub fn x(&self, v: f64) -> f64 {
        MARGIN + v / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    pub fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - v.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN)
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, dashed: bool, name: &str) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.x(x), self.y(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let line = format!(
            r#"<polyline data-series="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash} points="{}"/>"#,
            escape(name),
            pts.join(" ")
        );
        self.raw(&line);
    }

    pub fn legend(&mut self, entries: &[(String, &str, bool)]) {
        for (i, (name, stroke, dashed)) in entries.iter().enumerate() {
            let y = MARGIN + 14.0 * i as f64;
            let x = WIDTH - MARGIN - 170.0;
            let dash = if *dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let s = format!(
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{stroke}"{dash}/><text x="{}" y="{}" font-size="10">{}</text>"#,
                x + 20.0,
                x + 24.0,
                y + 3.0,
                escape(name)
            );
            self.raw(&s);
        }
    }

    pub fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}
