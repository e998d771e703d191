//! Native SVG scatter rendering for Poincaré plots. No plotting dependency;
//! the output is a deterministic function of the inputs.

use crate::evaluation::OrbitCloud;
use crate::region::Region;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 48.0;

/// One color per seed, cycling.
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

/// Render a cloud as an SVG scatter plot over `bounds`, one color per seed.
pub fn svg_scatter(cloud: &OrbitCloud, bounds: &Region, title: &str) -> String {
    let (x0, x1) = (bounds.min[0], bounds.max[0]);
    let (y0, y1) = (bounds.min[1], bounds.max[1]);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::with_capacity(1 << 16);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        MARGIN - 16.0,
        xml_escape(title)
    ));
    // Axis range labels.
    for (x, y, anchor, label) in [
        (MARGIN, HEIGHT - MARGIN + 16.0, "middle", format!("{x0:.3}")),
        (WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "middle", format!("{x1:.3}")),
        (MARGIN - 6.0, HEIGHT - MARGIN, "end", format!("{y0:.3}")),
        (MARGIN - 6.0, MARGIN + 4.0, "end", format!("{y1:.3}")),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" \
             font-family=\"sans-serif\" font-size=\"10\">{label}</text>\n"
        ));
    }

    for (si, orbit) in cloud.orbits.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        for p in &orbit.points {
            if p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1 {
                continue;
            }
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.2\" fill=\"{color}\"/>\n",
                px(p[0]),
                py(p[1])
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::EvalOrbit;

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let cloud = OrbitCloud {
            orbits: vec![EvalOrbit {
                points: vec![vec![0.0, 0.0], vec![0.5, -0.25]],
                truncated: false,
            }],
        };
        let bounds = Region::from_flat(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        let a = svg_scatter(&cloud, &bounds, "test <plot>");
        let b = svg_scatter(&cloud, &bounds, "test <plot>");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("&lt;plot&gt;"));
        assert_eq!(a.matches("<circle").count(), 2);
    }

    #[test]
    fn out_of_bounds_points_are_clipped() {
        let cloud = OrbitCloud {
            orbits: vec![EvalOrbit {
                points: vec![vec![5.0, 5.0]],
                truncated: true,
            }],
        };
        let bounds = Region::from_flat(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        let svg = svg_scatter(&cloud, &bounds, "clip");
        assert_eq!(svg.matches("<circle").count(), 0);
    }
}
