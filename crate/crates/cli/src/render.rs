//! SVG picture of the deformed lattice: every point of `τε𝓑` inside the
//! window is pushed forward by the affine map of the cell containing it.

use std::fmt::Write;

use gb_core::{RegionKind, Rect, StrainField, Vec2};

use crate::config::RenderOptions;
use crate::CliError;

const CANVAS_WIDTH: f64 = 1000.0;
const GROUPS: [(&str, &str); 4] = [
    ("sigma-minus-theta", "#1f77b4"),
    ("strip-1", "#d62728"),
    ("strip-2", "#2ca02c"),
    ("sigma-theta", "#9467bd"),
];

pub struct Rendered {
    pub svg: String,
    pub points: usize,
}

fn default_window(f: &StrainField) -> Rect {
    let r = f.layout.strips.iter().map(|s| s.r_bar).fold(0.0, f64::max);
    let w = 4.0 * r;
    Rect::new(-0.5 * w, 0.5 * w, -w, 0.0)
}

fn group_of(kind: RegionKind, strip: Option<u8>) -> usize {
    match (kind, strip) {
        (RegionKind::SigmaMinusTheta, _) => 0,
        (RegionKind::SigmaTheta, _) => 3,
        (_, Some(2)) => 2,
        _ => 1,
    }
}

/// Reference lattice points inside `window`, row by row.
pub fn lattice_points(f: &StrainField, window: &Rect) -> Vec<Vec2> {
    let l = &f.params.lattice;
    let te = f.params.burgers_length();
    let corners = [
        Vec2::new(window.x0, window.y0),
        Vec2::new(window.x1, window.y0),
        Vec2::new(window.x0, window.y1),
        Vec2::new(window.x1, window.y1),
    ]
    .map(|c| l.real_coords(c, te));
    let range = |g: fn(&Vec2) -> f64| {
        let lo = corners.iter().map(g).fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let hi = corners.iter().map(g).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        lo..=hi
    };
    let mut out = Vec::new();
    for n in range(|v| v.y) {
        for m in range(|v| v.x) {
            let p = l.point(m, n, te);
            if window.contains(p, 0.0) {
                out.push(p);
            }
        }
    }
    out
}

pub fn render_svg(f: &StrainField, opts: &RenderOptions) -> Result<Rendered, CliError> {
    let window = match opts.window {
        Some([x0, x1, y0, y1]) if x0 < x1 && y0 < y1 => Rect::new(x0, x1, y0, y1),
        Some(w) => return Err(CliError::Validation(format!("render window {w:?} is empty"))),
        None => default_window(f),
    };
    let window = window
        .intersection(&f.params.domain())
        .ok_or_else(|| CliError::Validation("render window misses the domain".into()))?;
    let te = f.params.burgers_length();
    let cell_area = f.params.lattice.generator_matrix().det().abs() * te * te;
    if window.area() / cell_area > 4.0 * opts.max_points as f64 {
        return Err(CliError::Validation(format!(
            "render window holds about {:.0} lattice points, more than max_points = {}",
            window.area() / cell_area,
            opts.max_points
        )));
    }
    let points = lattice_points(f, &window);
    if points.len() > opts.max_points {
        return Err(CliError::Validation(format!(
            "render window holds {} lattice points, more than max_points = {}",
            points.len(),
            opts.max_points
        )));
    }

    let tol = f.tolerance();
    let mut groups: [Vec<Vec2>; 4] = Default::default();
    for p in points {
        let cands = f.candidates(&Rect::new(p.x, p.x, p.y, p.y));
        let inside = |i: &usize| f.cells[*i].polygon.contains(p, tol);
        if cands.iter().filter(|&&i| f.cells[i].region.kind == RegionKind::D0).any(inside) {
            continue;
        }
        let Some(i) = cands.iter().copied().find(|i| inside(i)) else { continue };
        let cell = &f.cells[i];
        let Some(map) = cell.affine else { continue };
        groups[group_of(cell.region.kind, cell.region.strip)].push(map.apply(p));
    }

    let scale = window.width() / CANVAS_WIDTH;
    let height = window.height() / scale;
    let pad = 0.05 * CANVAS_WIDTH;
    let to_canvas = |v: Vec2| ((v.x - window.x0) / scale, (window.y1 - v.y) / scale);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="{:.0}" height="{:.0}">"#,
        -pad,
        -pad,
        CANVAS_WIDTH + 2.0 * pad,
        height + 2.0 * pad,
        CANVAS_WIDTH + 2.0 * pad,
        height + 2.0 * pad
    );
    if opts.outlines {
        let _ = writeln!(svg, r##"<g id="outlines" fill="none" stroke="#7f7f7f" stroke-width="{:.3}">"##, opts.stroke_width);
        for i in f.candidates(&window) {
            let cell = &f.cells[i];
            if !cell.polygon.bounding_rect().intersects(&window, 0.0) {
                continue;
            }
            let pts: Vec<String> = cell
                .polygon
                .vertices()
                .iter()
                .map(|&v| {
                    let (x, y) = to_canvas(cell.affine.map_or(v, |a| a.apply(v)));
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(svg, r#"<polygon points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(svg, "</g>");
    }
    let mut count = 0;
    for ((name, color), pts) in GROUPS.iter().zip(&groups) {
        let _ = writeln!(svg, r#"<g id="{name}" fill="{color}" stroke="none">"#);
        for &p in pts {
            let (x, y) = to_canvas(p);
            let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}"/>"#, opts.point_radius);
        }
        let _ = writeln!(svg, "</g>");
        count += pts.len();
    }
    let _ = writeln!(svg, "</svg>");
    Ok(Rendered { svg, points: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn field(sin_theta: f64) -> StrainField {
        let c = Config { sin_theta: Some(sin_theta), ..Config::default() };
        gb_core::build_strain_field(&c.params().unwrap()).unwrap()
    }

    #[test]
    fn output_is_well_formed_xml() {
        let f = field(2f64.powi(-5));
        let opts = RenderOptions { outlines: true, ..RenderOptions::default() };
        let r = render_svg(&f, &opts).unwrap();
        let doc = roxmltree::Document::parse(&r.svg).unwrap();
        let circles = doc.descendants().filter(|n| n.has_tag_name("circle")).count();
        assert_eq!(circles, r.points);
        let groups: Vec<_> = doc
            .descendants()
            .filter(|n| n.has_tag_name("g"))
            .filter_map(|n| n.attribute("id"))
            .collect();
        assert_eq!(groups, ["outlines", "sigma-minus-theta", "strip-1", "strip-2", "sigma-theta"]);
    }

    #[test]
    fn point_count_matches_direct_enumeration() {
        let f = field(2f64.powi(-6));
        let r = render_svg(&f, &RenderOptions::default()).unwrap();
        // count lattice points in the window by brute force over a generous
        // index box, dropping those in closed core squares
        let w = default_window(&f);
        let te = f.params.burgers_length();
        let (b1, b2) = (f.params.lattice.b1, f.params.lattice.b2);
        let reach = (w.diameter() / te / f.params.lattice.sin_phi_minus_eta().abs()).ceil() as i64 + 2;
        let mut expected = 0;
        for m in -reach..=reach {
            for n in -reach..=reach {
                let p = (b1.scale(m as f64) + b2.scale(n as f64)).scale(te);
                let in_core = f.cores.iter().any(|c| c.square_rect().contains(p, f.tolerance()));
                if w.contains(p, 0.0) && !in_core {
                    expected += 1;
                }
            }
        }
        assert!(expected > 100);
        assert_eq!(r.points, expected);
    }

    #[test]
    fn rendering_is_deterministic() {
        let f = field(2f64.powi(-5));
        let a = render_svg(&f, &RenderOptions::default()).unwrap().svg;
        let b = render_svg(&f, &RenderOptions::default()).unwrap().svg;
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let f = field(2f64.powi(-5));
        let opts = RenderOptions { window: Some([-1.0, 1.0, -2.0, 0.0]), max_points: 10, ..RenderOptions::default() };
        assert!(matches!(render_svg(&f, &opts), Err(CliError::Validation(_))));
    }
}
