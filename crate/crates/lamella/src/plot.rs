//! Minimal SVG line plots for study reports (error vs sweep parameter on
//! log-log axes).

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One named series of `(x, y)` points.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Renders line series into a standalone SVG string. With `loglog` the axes
/// are base-10 logarithmic and non-positive points are dropped.
pub fn line_plot_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    loglog: bool,
) -> String {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let tx = |v: f64| if loglog { v.log10() } else { v };

    let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        pts.push(
            s.points
                .iter()
                .filter(|&&(x, y)| !loglog || (x > 0.0 && y > 0.0))
                .map(|&(x, y)| (tx(x), tx(y)))
                .collect(),
        );
    }
    let all: Vec<(f64, f64)> = pts.iter().flatten().cloned().collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if (x1 - x0).abs() < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0).abs() < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05;
    let (xr, yr) = (x1 - x0, y1 - y0);
    let (x0, x1) = (x0 - pad * xr, x1 + pad * xr);
    let (y0, y1) = (y0 - pad * yr, y1 + pad * yr);
    let sx = (w - ml - mr) / (x1 - x0);
    let sy = (h - mt - mb) / (y1 - y0);
    let px = |x: f64| ml + (x - x0) * sx;
    let py = |y: f64| h - mb - (y - y0) * sy;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        w / 2.0,
        title
    ));
    // axes box
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    // ticks: 4 per axis
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let xl = if loglog {
            format!("1e{:.1}", xv)
        } else {
            format!("{:.3}", xv)
        };
        let yl = if loglog {
            format!("1e{:.1}", yv)
        } else {
            format!("{:.3}", yv)
        };
        svg.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"#ccc\"/>\n",
            px(xv),
            mt,
            h - mb
        ));
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#ccc\"/>\n",
            py(yv),
            w - mr
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            px(xv),
            h - mb + 16.0,
            xl
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            ml - 6.0,
            py(yv) + 4.0,
            yl
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        w / 2.0,
        h - 12.0,
        xlabel
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        h / 2.0,
        h / 2.0,
        ylabel
    ));
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = pts[si]
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if path.len() >= 2 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                path.join(" "),
                color
            ));
        }
        for &(x, y) in &pts[si] {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                px(x),
                py(y),
                color
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            w - mr - 150.0,
            mt + 18.0 + 16.0 * si as f64,
            color,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
