//! Minimal static SVG renderer: line plots and heatmaps. No interactivity,
//! deterministic output.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn axis_bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn coord(v: f64, lo: f64, hi: f64, pix_lo: f64, pix_hi: f64) -> f64 {
    pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo)
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of one or more named series sharing an x-axis.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
) -> String {
    let (x_lo, x_hi) = axis_bounds(x);
    let all_y: Vec<f64> = series.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let (y_lo, y_hi) = axis_bounds(&all_y);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        WIDTH / 2.0
    );
    // axes
    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    );
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 18 {:.1})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    // tick labels at the extremes
    for (v, px, anchor, y) in [
        (x_lo, MARGIN, "middle", HEIGHT - MARGIN + 18.0),
        (x_hi, WIDTH - MARGIN, "middle", HEIGHT - MARGIN + 18.0),
    ] {
        let _ = write!(
            svg,
            "<text x=\"{px:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\">{v:.4e}</text>"
        );
    }
    for (v, py) in [(y_lo, HEIGHT - MARGIN), (y_hi, MARGIN)] {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{py:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{v:.4e}</text>",
            MARGIN - 6.0
        );
    }

    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for (xe, ye) in x.iter().zip(ys.iter()) {
            let px = coord(*xe, x_lo, x_hi, MARGIN, WIDTH - MARGIN);
            let py = coord(*ye, y_lo, y_hi, HEIGHT - MARGIN, MARGIN);
            let _ = write!(points, "{px:.2},{py:.2} ");
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.trim_end()
        );
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>",
            WIDTH - MARGIN + 4.0 - 90.0,
            MARGIN + 16.0 * (k as f64 + 1.0)
        );
    }
    svg.push_str("</svg>");
    svg
}

fn colormap(t: f64) -> String {
    // dark blue -> teal -> yellow
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t * 2.0;
        (13.0 + 20.0 * u, 8.0 + 140.0 * u, 135.0 + 20.0 * u)
    } else {
        let u = (t - 0.5) * 2.0;
        (33.0 + 220.0 * u, 148.0 + 90.0 * u, 155.0 - 120.0 * u)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Heatmap of `values[row][col]` with row/column coordinate labels.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    y: &[f64],
    values: &[Vec<f64>],
) -> String {
    let v_lo = values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let v_hi = values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(v_lo + 1e-12);

    let cell_w = (WIDTH - 2.0 * MARGIN) / x.len() as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / y.len() as f64;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title} (max {v_hi:.3})</text>",
        WIDTH / 2.0
    );
    for (j, row) in values.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let t = (v - v_lo) / (v_hi - v_lo);
            let px = MARGIN + i as f64 * cell_w;
            let py = HEIGHT - MARGIN - (j as f64 + 1.0) * cell_h;
            let _ = write!(
                svg,
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                cell_w + 0.5,
                cell_h + 0.5,
                colormap(t)
            );
        }
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label} [{:.3e} .. {:.3e}]</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0,
        x.first().unwrap_or(&0.0),
        x.last().unwrap_or(&0.0)
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 18 {:.1})\">{y_label} [{:.3e} .. {:.3e}]</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y.first().unwrap_or(&0.0),
        y.last().unwrap_or(&0.0)
    );
    svg.push_str("</svg>");
    svg
}
