//! Plain SVG emission for reliability diagrams and prediction overlays.
//! No plotting dependency: every figure is also mirrored by a CSV.

use starcert::calibration::CalibrationReport;
use starcert::certainty::marching_squares;
use starcert::formats::{PolygonJson, Report};

const PLOT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn plot_x(v: f64) -> f64 {
    MARGIN + v * PLOT
}

fn plot_y(v: f64) -> f64 {
    MARGIN + (1.0 - v) * PLOT
}

/// Reliability diagram: accuracy bars over score bins against the identity
/// diagonal, annotated with the scalar calibration summaries.
pub fn reliability_svg(title: &str, summary: &CalibrationReport) -> String {
    let size = PLOT + 2.0 * MARGIN;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Frame and gridlines every 0.2.
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            plot_x(v),
            plot_y(0.0),
            plot_x(v),
            plot_y(1.0)
        ));
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            plot_x(0.0),
            plot_y(v),
            plot_x(1.0),
            plot_y(v)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{v:.1}</text>\n",
            plot_x(v),
            plot_y(0.0) + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{v:.1}</text>\n",
            plot_x(0.0) - 6.0,
            plot_y(v) + 4.0
        ));
    }
    // Accuracy bars per populated bin.
    for bin in summary.bins.iter().filter(|b| b.count > 0) {
        let x = plot_x(bin.lo);
        let w = (bin.hi - bin.lo) * PLOT;
        let y = plot_y(bin.accuracy);
        let h = plot_y(0.0) - y;
        s.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"#4878cf\" fill-opacity=\"0.7\" stroke=\"#2a4d8f\"/>\n"
        ));
        // Mean confidence tick inside the bin.
        let cx = plot_x(bin.mean_confidence);
        s.push_str(&format!(
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
            plot_y(0.0) - 6.0,
            plot_y(0.0)
        ));
    }
    // Identity diagonal.
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\" stroke-dasharray=\"6,4\"/>\n",
        plot_x(0.0),
        plot_y(0.0),
        plot_x(1.0),
        plot_y(1.0)
    ));
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{PLOT}\" height=\"{PLOT}\" fill=\"none\" stroke=\"#333333\"/>\n",
        MARGIN, MARGIN
    ));
    let r_text = summary
        .pearson_r
        .map(|r| format!("{r:.3}"))
        .unwrap_or_else(|| "n/a".into());
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{title}</text>\n",
        MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"40\" font-size=\"12\">R = {r_text}, ECE = {:.4}, MCE = {:.4}, n = {}</text>\n",
        MARGIN,
        summary.ece,
        summary.mce,
        summary.matched + summary.false_positives
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">certainty score</text>\n",
        plot_x(0.5),
        plot_y(0.0) + 34.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">accuracy</text>\n",
        plot_y(0.5),
        plot_y(0.5)
    ));
    s.push_str("</svg>\n");
    s
}

fn polygon_path(poly: &PolygonJson) -> String {
    let n = poly.radii.len();
    let mut d = String::new();
    for (i, &r) in poly.radii.iter().enumerate() {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let x = poly.cx + r * phi.cos();
        let y = poly.cy + r * phi.sin();
        d.push_str(if i == 0 { "M" } else { "L" });
        d.push_str(&format!("{x:.2},{y:.2} "));
    }
    d.push('Z');
    d
}

fn polyline_path(line: &[[f64; 2]]) -> String {
    let mut d = String::new();
    for (i, p) in line.iter().enumerate() {
        d.push_str(if i == 0 { "M" } else { "L" });
        d.push_str(&format!("{:.2},{:.2} ", p[0], p[1]));
    }
    d
}

/// Prediction overlay: median predictions stroked in red, uncertainty bands
/// or mean-map contours in gold, one group per cluster.
pub fn overlay_svg(report: &Report) -> String {
    let (w, h) = (report.width, report.height);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#202020\"/>\n");
    for cluster in &report.clusters {
        s.push_str(&format!("<g id=\"cluster-{}\">\n", cluster.id));
        if let (Some(inner), Some(outer)) = (&cluster.band_inner, &cluster.band_outer) {
            s.push_str(&format!(
                "<path d=\"{}\" fill=\"#ffd54a\" fill-opacity=\"0.25\" stroke=\"#ffd54a\" stroke-width=\"0.6\"/>\n",
                polygon_path(outer)
            ));
            s.push_str(&format!(
                "<path d=\"{}\" fill=\"none\" stroke=\"#ffd54a\" stroke-width=\"0.6\"/>\n",
                polygon_path(inner)
            ));
        }
        for contours in [&cluster.outer_contours, &cluster.inner_contours]
            .into_iter()
            .flatten()
        {
            for line in contours {
                s.push_str(&format!(
                    "<path d=\"{}\" fill=\"none\" stroke=\"#ffd54a\" stroke-width=\"0.6\"/>\n",
                    polyline_path(line)
                ));
            }
        }
        if let Some(poly) = &cluster.median_polygon {
            s.push_str(&format!(
                "<path d=\"{}\" fill=\"none\" stroke=\"#e03131\" stroke-width=\"1\"/>\n",
                polygon_path(poly)
            ));
        } else if let Some(rle) = &cluster.median_mask {
            let mask = rle.decode();
            let mut field = vec![0.0f32; w as usize * h as usize];
            let (x0, y0, x1, y1) = mask.window();
            for y in y0..y1 {
                for x in x0..x1 {
                    if mask.get(x, y) {
                        field[y as usize * w as usize + x as usize] = 1.0;
                    }
                }
            }
            for line in marching_squares(&field, w, h, 0.5) {
                s.push_str(&format!(
                    "<path d=\"{}\" fill=\"none\" stroke=\"#e03131\" stroke-width=\"1\"/>\n",
                    polyline_path(&line)
                ));
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use starcert::calibration::ReliabilityBin;

    #[test]
    fn reliability_svg_is_wellformed() {
        let summary = CalibrationReport {
            bins: vec![
                ReliabilityBin {
                    lo: 0.0,
                    hi: 0.5,
                    count: 3,
                    mean_confidence: 0.3,
                    accuracy: 0.4,
                },
                ReliabilityBin {
                    lo: 0.5,
                    hi: 1.0,
                    count: 5,
                    mean_confidence: 0.9,
                    accuracy: 0.8,
                },
            ],
            pearson_r: Some(1.0),
            ece: 0.1,
            mce: 0.12,
            matched: 6,
            false_positives: 2,
            false_negatives: 1,
        };
        let svg = reliability_svg("c_hyb", &summary);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 2 + 1); // bg + 2 bars + frame
        assert!(svg.contains("ECE = 0.1000"));
    }
}
