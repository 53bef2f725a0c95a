//! Minimal SVG line plot of the objective per iteration.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;

/// Log-scaled when every value is positive and they span more than three decades.
pub fn objective_svg(values: &[f64]) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let log = lo > 0.0 && hi / lo > 1e3;
    let tf = |v: f64| if log { v.log10() } else { v };
    let (mut y0, mut y1) = if finite.is_empty() { (0.0, 1.0) } else { (tf(lo), tf(hi)) };
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let n = values.len().max(2) - 1;
    let px = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (tf(v) - y0) / (y1 - y0);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} L{PAD},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite() && (!log || **v > 0.0))
        .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    let label = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 4.0, label(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, label(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">iteration (0 to {})</text>"#, W / 2.0, H - 20.0, values.len().saturating_sub(1));
    let _ = writeln!(s, r#"<text x="20" y="{}" font-size="12" transform="rotate(-90 20 {})" text-anchor="middle">objective</text>"#, H / 2.0, H / 2.0);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_has_one_point_per_value() {
        let s = objective_svg(&[3.0, 2.0, 1.5, 1.4]);
        let pts = s.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 4);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn wide_positive_range_uses_log_axis() {
        assert!(objective_svg(&[1.0, 1e-3, 1e-8]).contains("1e0.0"));
        assert!(!objective_svg(&[1.0, 0.5]).contains("1e"));
    }
}
