//! Static SVG scatter plots: three orthographic projections (xy, xz, yz)
//! side by side, parts color-coded.

use std::fmt::Write as _;
use std::path::Path;

use symcloud_core::geom::PointCloud;

use crate::CliError;

const PANEL: f64 = 300.0;
const MARGIN: f64 = 24.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

type Projection = fn(&symcloud_core::geom::Point3) -> (f64, f64);

pub fn render_svg(cloud: &PointCloud) -> String {
    let projections: [(&str, Projection); 3] = [
        ("xy", |p| (p.x, p.y)),
        ("xz", |p| (p.x, p.z)),
        ("yz", |p| (p.y, p.z)),
    ];
    let width = 3.0 * PANEL + 4.0 * MARGIN;
    let height = PANEL + 2.0 * MARGIN + 16.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    for (panel, (name, project)) in projections.iter().enumerate() {
        let coords: Vec<(f64, f64)> = cloud.points().iter().map(project).collect();
        let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(u, v) in &coords {
            min_u = min_u.min(u);
            max_u = max_u.max(u);
            min_v = min_v.min(v);
            max_v = max_v.max(v);
        }
        let span = (max_u - min_u).max(max_v - min_v).max(1e-9);
        let x0 = MARGIN + panel as f64 * (PANEL + MARGIN);
        let y0 = MARGIN;
        let _ = writeln!(
            svg,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{PANEL}\" height=\"{PANEL}\" fill=\"none\" stroke=\"#999\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">{name}</text>",
            x0,
            y0 + PANEL + 14.0
        );
        for (i, &(u, v)) in coords.iter().enumerate() {
            let cx = x0 + (u - min_u) / span * (PANEL - 8.0) + 4.0;
            // Flip v: SVG y grows downward.
            let cy = y0 + PANEL - ((v - min_v) / span * (PANEL - 8.0) + 4.0);
            let color = cloud
                .labels()
                .map(|l| PALETTE[l[i] % PALETTE.len()])
                .unwrap_or(PALETTE[0]);
            let _ = writeln!(
                svg,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"1.6\" fill=\"{color}\"/>"
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    std::fs::write(path, render_svg(cloud))
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use symcloud_core::geom::Point3;

    #[test]
    fn renders_all_points_in_three_panels() {
        let cloud = PointCloud::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.5, -0.5),
                Point3::new(-1.0, 0.2, 0.7),
            ],
            Some(vec![0, 1, 1]),
        )
        .unwrap();
        let svg = render_svg(&cloud);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 9);
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
    }
}
