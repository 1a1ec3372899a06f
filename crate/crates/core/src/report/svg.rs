use std::fmt::Write;

pub(crate) const WIDTH: f64 = 720.0;
pub(crate) const HEIGHT: f64 = 440.0;

/// Plot area inside the margins.
#[derive(Clone, Copy)]
pub(crate) struct Frame {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Frame {
    pub fn standard() -> Self {
        Frame { left: 70.0, top: 40.0, right: WIDTH - 30.0, bottom: HEIGHT - 60.0 }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }
}

/// Linear map from data values to pixels.
#[derive(Clone, Copy)]
pub(crate) struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    pub fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Scale { lo, hi, from, to }
    }

    pub fn at(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

/// Data range padded by 5% on each side.
pub(crate) fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub(crate) struct Svg {
    body: String,
}

impl Svg {
    pub fn new(title: &str) -> Self {
        let mut s = Svg { body: String::new() };
        s.rect(0.0, 0.0, WIDTH, HEIGHT, "#ffffff", None);
        s.text(WIDTH / 2.0, 24.0, title, 16.0, "middle", None);
        s
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: Option<&str>) {
        let stroke = stroke.map(|c| format!(r#" stroke="{c}""#)).unwrap_or_default();
        let _ = writeln!(self.body, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"{stroke}/>"#, w.max(0.0), h.max(0.0));
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: Option<&str>) {
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(self.body, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1.5"{dash}/>"#);
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" fill-opacity="0.75"/>"#);
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str, rotate: Option<f64>) {
        let rotate = rotate.map(|a| format!(r#" transform="rotate({a:.0} {x:.2} {y:.2})""#)).unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size:.0}" text-anchor="{anchor}"{rotate}>{}</text>"#,
            escape(s)
        );
    }

    /// Axes with tick labels along the frame's bottom and left edges.
    pub fn axes(&mut self, f: Frame, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str) {
        self.line(f.left, f.bottom, f.right, f.bottom, "#333333", None);
        self.line(f.left, f.top, f.left, f.bottom, "#333333", None);
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let (vx, vy) = (x.0 + t * (x.1 - x.0), y.0 + t * (y.1 - y.0));
            let px = f.left + t * f.width();
            let py = f.bottom - t * f.height();
            self.line(px, f.bottom, px, f.bottom + 5.0, "#333333", None);
            self.text(px, f.bottom + 18.0, &tick(vx), 11.0, "middle", None);
            self.line(f.left - 5.0, py, f.left, py, "#333333", None);
            self.text(f.left - 8.0, py + 4.0, &tick(vy), 11.0, "end", None);
        }
        self.text((f.left + f.right) / 2.0, HEIGHT - 18.0, x_label, 13.0, "middle", None);
        self.text(18.0, (f.top + f.bottom) / 2.0, y_label, 13.0, "middle", Some(-90.0));
    }

    pub fn placeholder(&mut self, note: &str) {
        self.text(WIDTH / 2.0, HEIGHT / 2.0, note, 14.0, "middle", None);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">\n{}</svg>\n",
            self.body
        )
    }
}

pub(crate) fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Diverging blue-white-red colour for `t` in [-1, 1].
pub(crate) fn diverging(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}
