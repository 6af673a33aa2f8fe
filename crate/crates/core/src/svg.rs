//! Minimal standalone SVG line plots with the plotted data embedded as a
//! comment.

use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Optional symmetric error bars.
    pub err: Option<Vec<f64>>,
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_x: false, series: Vec::new() }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn render(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = self.series.iter().flat_map(|s| {
            s.x.iter().enumerate().filter(|(_, x)| x.is_finite() && (!self.log_x || **x > 0.0)).map(move |(i, x)| {
                let e = s.err.as_ref().map(|e| e[i]).unwrap_or(0.0);
                (*x, s.y[i] - e, s.y[i] + e)
            })
        });
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, lo, hi) in pts {
            if !(lo.is_finite() && hi.is_finite()) {
                continue;
            }
            x0 = x0.min(tx(x));
            x1 = x1.max(tx(x));
            y0 = y0.min(lo);
            y1 = y1.max(hi);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        let (y0, y1) = (y0 - pad, y1 + pad);
        let px = |x: f64| ML + (tx(x) - x0) / (x1 - x0) * (W - ML - MR);
        let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
        s.push_str("<!-- data\n");
        for ser in &self.series {
            writeln!(s, "# series: {}", ser.label.replace("--", "- -")).unwrap();
            for i in 0..ser.x.len() {
                match &ser.err {
                    Some(e) => writeln!(s, "{:e} {:e} {:e}", ser.x[i], ser.y[i], e[i]).unwrap(),
                    None => writeln!(s, "{:e} {:e}", ser.x[i], ser.y[i]).unwrap(),
                }
            }
        }
        s.push_str("-->\n");
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - ML - MR,
            H - MT - MB
        )
        .unwrap();
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title)).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 12.0, escape(&self.x_label))
            .unwrap();
        writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        )
        .unwrap();
        for k in 0..=4 {
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let xv = if self.log_x { 10f64.powf(fx) } else { fx };
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{:.4}</text>"#, ML - 4.0, py(fy) + 3.0, fy).unwrap();
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{:.4e}</text>"#, px(xv), H - MB + 14.0, xv).unwrap();
        }
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let valid: Vec<usize> = (0..ser.x.len())
                .filter(|j| ser.x[*j].is_finite() && ser.y[*j].is_finite() && (!self.log_x || ser.x[*j] > 0.0))
                .collect();
            let path: Vec<String> = valid.iter().map(|j| format!("{:.2},{:.2}", px(ser.x[*j]), py(ser.y[*j]))).collect();
            if !ser.markers && path.len() > 1 {
                writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
            }
            for j in &valid {
                let (cx, cy) = (px(ser.x[*j]), py(ser.y[*j]));
                if ser.markers {
                    writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#).unwrap();
                }
                if let Some(e) = &ser.err {
                    let (a, b) = (py(ser.y[*j] - e[*j]), py(ser.y[*j] + e[*j]));
                    if a.is_finite() && b.is_finite() {
                        writeln!(s, r#"<line x1="{cx:.2}" x2="{cx:.2}" y1="{a:.2}" y2="{b:.2}" stroke="{color}"/>"#).unwrap();
                    }
                }
            }
            writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
                ML + 10.0,
                MT + 16.0 + 14.0 * i as f64,
                escape(&ser.label)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_with_embedded_data() {
        let plot = LinePlot::new("t", "x", "y").with_series(Series {
            label: "a<b".into(),
            x: vec![1.0, 2.0, 3.0],
            y: vec![1.0, 4.0, 9.0],
            err: Some(vec![0.1, 0.1, 0.1]),
            markers: true,
        });
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("4e0 1e-1"));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
