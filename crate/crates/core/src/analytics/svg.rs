use std::fmt::Write;

use super::{bucket_label, LengthStats, HISTOGRAM_BUCKETS};

/// A self-contained SVG bar chart of the length histogram.
pub fn histogram_svg(title: &str, stats: &LengthStats) -> String {
    const W: f64 = 480.0;
    const H: f64 = 260.0;
    const PAD: f64 = 36.0;
    let peak = stats.histogram.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = (W - 2.0 * PAD) / HISTOGRAM_BUCKETS as f64;
    let plot_h = H - 2.0 * PAD;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    for (i, &count) in stats.histogram.iter().enumerate() {
        let h = plot_h * count as f64 / peak;
        let x = PAD + i as f64 * bar_w;
        let y = H - PAD - h;
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{h:.1}" fill="#4a7bb7"/>"##,
            x + 2.0,
            bar_w - 4.0
        );
        let cx = x + bar_w / 2.0;
        let _ = writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{count}</text>"#, y - 3.0);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - PAD + 14.0,
            bucket_label(i)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x2 = W - PAD
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::super::stats_of_lengths;
    use super::*;

    #[test]
    fn one_bar_per_bucket() {
        let svg = histogram_svg("a < b", &stats_of_lengths(&[1, 1, 3, 12]).unwrap());
        assert_eq!(svg.matches("<rect").count(), HISTOGRAM_BUCKETS);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains(">10+<"));
    }
}
