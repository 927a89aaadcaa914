//! PGM image dumps and SVG line charts. Output depends only on the input
//! values, never on time or environment.

use std::fmt::Write as _;
use std::path::Path;

use crate::encoding::JetImage;
use crate::error::{Error, Result};

/// Binary 8-bit PGM, pixels clamped to `[0,1]` and scaled to `0..=255`.
pub fn encode_pgm(img: &JetImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.pixels()
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &JetImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A single-series line chart of `(x, y)` points.
pub fn line_chart_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("plot points must be finite".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (bx, by) = (MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{bx:.2} {:.2} V{by:.2} H{:.2}" stroke="black" fill="none"/>"#,
        MARGIN,
        W - MARGIN
    );
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.4}</text>"#,
            MARGIN - 6.0,
            y + 4.0
        );
    }
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{v}</text>"#,
            H - MARGIN + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let path: Vec<String> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            format!(
                "{}{:.2} {:.2}",
                if i == 0 { 'M' } else { 'L' },
                sx(x),
                sy(y)
            )
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<path d="{}" stroke="#1f5fa8" stroke-width="2" fill="none"/>"##,
        path.join(" ")
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout() {
        let img = JetImage::new(2, 3, vec![0.0, 0.5, 1.0, 2.0, -1.0, 0.25]).unwrap();
        let bytes = encode_pgm(&img);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 128, 255, 255, 0, 64]);
    }

    #[test]
    fn svg_is_deterministic() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|e| (e as f64, 1.0 / e as f64)).collect();
        let a = line_chart_svg("loss", "epoch", "mse", &pts).unwrap();
        let b = line_chart_svg("loss", "epoch", "mse", &pts).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(line_chart_svg("x", "", "", &[]).is_err());
        // A flat series still renders.
        assert!(line_chart_svg("x", "", "", &[(1.0, 2.0)]).is_ok());
    }
}
