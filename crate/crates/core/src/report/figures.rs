use super::svg::{diverging, padded, tick, Frame, Scale, Svg, HEIGHT, WIDTH};
use super::RunArtifacts;

const TOP_IMPORTANCE: usize = 20;
const TOP_SHAP: usize = 6;

/// All five figures as `(name, SVG text)`.
pub(super) fn render(a: &RunArtifacts) -> Vec<(&'static str, String)> {
    vec![
        ("prediction_distribution", histogram(&a.cv.oof, a.prediction)),
        ("predicted_vs_observed", scatter(&a.cv.observed, &a.cv.oof)),
        ("variable_importance", importance(a)),
        ("shap_summary", shap(a)),
        ("correlation_heatmap", heatmap(a)),
    ]
}

/// Freedman–Diaconis bin count, kept between 5 and 60.
fn bin_count(values: &[f64]) -> usize {
    let mut s: Vec<f64> = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| s[((s.len() - 1) as f64 * p).round() as usize];
    let (iqr, range) = (q(0.75) - q(0.25), s[s.len() - 1] - s[0]);
    if iqr <= 0.0 || range <= 0.0 {
        return 5;
    }
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(5, 60)
}

fn histogram(values: &[f64], marker: f64) -> String {
    let mut svg = Svg::new("Cross-validated prediction distribution");
    if values.is_empty() {
        svg.placeholder("No cross-validated predictions available");
        return svg.finish();
    }
    let f = Frame::standard();
    let (lo, hi) = padded(values.iter().copied().chain(std::iter::once(marker)));
    let bins = bin_count(values);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let (sx, sy) = (Scale::new(lo, hi, f.left, f.right), Scale::new(0.0, top * 1.1, f.bottom, f.top));
    for (k, &c) in counts.iter().enumerate() {
        let x0 = sx.at(lo + k as f64 * width);
        let x1 = sx.at(lo + (k + 1) as f64 * width);
        svg.rect(x0, sy.at(c as f64), x1 - x0, f.bottom - sy.at(c as f64), "#7aa6c2", Some("#ffffff"));
    }
    svg.axes(f, (lo, hi), (0.0, top * 1.1), "Fibre diameter (nm)", "Count");
    let mx = sx.at(marker);
    svg.line(mx, f.top, mx, f.bottom, "#c0392b", Some("4 4"));
    svg.text(mx + 6.0, f.top + 14.0, &format!("Prediction: {marker:.3} nm"), 12.0, "start", None);
    svg.finish()
}

fn scatter(observed: &[f64], predicted: &[f64]) -> String {
    let mut svg = Svg::new("Predicted vs observed (out-of-fold)");
    if observed.is_empty() {
        svg.placeholder("No cross-validated predictions available");
        return svg.finish();
    }
    let f = Frame::standard();
    let (lo, hi) = padded(observed.iter().chain(predicted).copied());
    let (sx, sy) = (Scale::new(lo, hi, f.left, f.right), Scale::new(lo, hi, f.bottom, f.top));
    svg.axes(f, (lo, hi), (lo, hi), "Observed (nm)", "Predicted (nm)");
    svg.line(sx.at(lo), sy.at(lo), sx.at(hi), sy.at(hi), "#555555", Some("6 3"));
    for (o, p) in observed.iter().zip(predicted) {
        svg.circle(sx.at(*o), sy.at(*p), 2.5, "#2c7fb8");
    }
    svg.finish()
}

fn importance(a: &RunArtifacts) -> String {
    let rows = a.importance.top(TOP_IMPORTANCE);
    let mut svg = Svg::new("Variable importance (scaled 0-100)");
    if rows.is_empty() {
        svg.placeholder("No importance scores available");
        return svg.finish();
    }
    let f = Frame { left: 190.0, ..Frame::standard() };
    let band = f.height() / rows.len() as f64;
    let sx = Scale::new(0.0, 100.0, f.left, f.right);
    svg.axes(f, (0.0, 100.0), (0.0, 0.0), "Importance", "");
    for (i, r) in rows.iter().enumerate() {
        let y = f.top + i as f64 * band;
        svg.rect(f.left, y + 0.15 * band, sx.at(r.scaled) - f.left, 0.7 * band, "#41ab5d", None);
        svg.text(f.left - 8.0, y + 0.5 * band + 4.0, &r.feature, 11.0, "end", None);
    }
    svg.finish()
}

fn shap(a: &RunArtifacts) -> String {
    let s = &a.shap;
    let mut svg = Svg::new("SHAP values, top features");
    if s.phi.nrows() == 0 || s.features.is_empty() {
        svg.placeholder("No SHAP values available");
        return svg.finish();
    }
    let features: Vec<usize> = s.order.iter().copied().take(TOP_SHAP).collect();
    let f = Frame { left: 190.0, ..Frame::standard() };
    let (lo, hi) = padded(features.iter().flat_map(|&j| (0..s.phi.nrows()).map(move |i| s.phi.get(i, j))));
    let sx = Scale::new(lo, hi, f.left, f.right);
    let band = f.height() / features.len() as f64;
    svg.axes(f, (lo, hi), (0.0, 0.0), "SHAP value (nm)", "");
    svg.line(sx.at(0.0), f.top, sx.at(0.0), f.bottom, "#999999", Some("2 2"));
    for (k, &j) in features.iter().enumerate() {
        let y = f.top + (k as f64 + 0.5) * band;
        svg.text(f.left - 8.0, y + 4.0, &s.features[j], 11.0, "end", None);
        let values: Vec<f64> = (0..s.phi.nrows())
            .map(|i| s.instance_rows.get(i).filter(|&&r| r < a.table.n()).map_or(0.0, |&r| a.table.x.get(r, j)))
            .collect();
        let (vlo, vhi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        for i in 0..s.phi.nrows() {
            let colour_t = if vhi > vlo { 2.0 * (values[i] - vlo) / (vhi - vlo) - 1.0 } else { 0.0 };
            // deterministic vertical jitter from the instance index
            let jitter = ((i * 37 % 17) as f64 / 16.0 - 0.5) * 0.5 * band;
            svg.circle(sx.at(s.phi.get(i, j)), y + jitter, 2.5, &diverging(colour_t));
        }
    }
    svg.text(WIDTH - 30.0, 52.0, "colour: feature value, low blue to high red", 10.0, "end", None);
    svg.finish()
}

fn heatmap(a: &RunArtifacts) -> String {
    let c = &a.correlations;
    let mut svg = Svg::new("Correlation matrix (Pearson)");
    let k = c.names.len();
    if k == 0 {
        svg.placeholder("No correlations available");
        return svg.finish();
    }
    let f = Frame { left: 170.0, top: 50.0, right: WIDTH - 140.0, bottom: HEIGHT - 70.0 };
    let cell = (f.width() / k as f64).min(f.height() / k as f64);
    for i in 0..k {
        svg.text(f.left - 6.0, f.top + (i as f64 + 0.5) * cell + 4.0, &c.names[i], 10.0, "end", None);
        svg.text(f.left + (i as f64 + 0.5) * cell, f.top + k as f64 * cell + 14.0, &c.names[i], 10.0, "end", Some(-35.0));
        for j in 0..k {
            let r = c.r.get(i, j);
            let (x, y) = (f.left + j as f64 * cell, f.top + i as f64 * cell);
            svg.rect(x, y, cell, cell, &diverging(r), Some("#ffffff"));
            svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, &tick(r), 10.0, "middle", None);
        }
    }
    svg.finish()
}
