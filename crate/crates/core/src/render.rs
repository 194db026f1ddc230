//! SVG snapshots of a simulation state.
//!
//! The palm frame is y-up; SVG is y-down, so every point is mirrored on the
//! way out. Output depends only on the state, scene and style, and numbers
//! are printed with fixed precision so equal inputs give identical bytes.

use crate::contact::WorldShape;
use crate::geom::Vec2;
use crate::kinematics::route_points;
use crate::model::TendonSide;
use crate::scene::Scene;
use crate::solver::SimState;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const FLEXOR_COLOR: &str = "#1f4fd8";
pub const EXTENSOR_COLOR: &str = "#d8321f";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    /// SVG user units per mm.
    pub scale: f64,
    /// Blank border around the drawing (mm).
    pub margin: f64,
    /// Force glyph length per newton (mm/N).
    pub force_scale: f64,
    pub tendons: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            scale: 3.0,
            margin: 20.0,
            force_scale: 5.0,
            tendons: true,
        }
    }
}

/// Palm-frame point in SVG coordinates (mm, y flipped).
fn svg(p: Vec2) -> Vec2 {
    Vec2::new(p.x, -p.y)
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    // Avoid "-0.000".
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".to_string()
    } else {
        s
    }
}

fn pt(p: Vec2) -> String {
    format!("{},{}", num(p.x), num(p.y))
}

/// Outline of a segment swept by a disc, as path data in SVG coordinates.
fn capsule_path(a: Vec2, b: Vec2, r: f64) -> String {
    let (a, b) = (svg(a), svg(b));
    let d = b - a;
    let n = if d.norm() > 1e-12 {
        d.normalized().perp() * r
    } else {
        Vec2::new(0.0, r)
    };
    let rr = num(r);
    format!(
        "M{} L{} A{rr},{rr} 0 0 0 {} L{} A{rr},{rr} 0 0 0 {} Z",
        pt(a + n),
        pt(b + n),
        pt(b - n),
        pt(a - n),
        pt(a + n)
    )
}

/// Everything that is drawn, in palm coordinates, for bounds.
fn extent(points: &mut Vec<Vec2>, shape: &WorldShape) {
    match shape {
        WorldShape::Circle { center, radius } => {
            points.push(*center + Vec2::new(*radius, *radius));
            points.push(*center - Vec2::new(*radius, *radius));
        }
        WorldShape::Polygon { vertices } => points.extend(vertices),
        WorldShape::Capsule { a, b, radius } => {
            for p in [a, b] {
                points.push(*p + Vec2::new(*radius, *radius));
                points.push(*p - Vec2::new(*radius, *radius));
            }
        }
    }
}

fn shape_element(shape: &WorldShape, class: &str) -> String {
    match shape {
        WorldShape::Circle { center, radius } => {
            let c = svg(*center);
            format!("<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\"/>", num(c.x), num(c.y), num(*radius))
        }
        WorldShape::Polygon { vertices } => {
            let pts: Vec<String> = vertices.iter().map(|v| pt(svg(*v))).collect();
            format!("<polygon class=\"{class}\" points=\"{}\"/>", pts.join(" "))
        }
        WorldShape::Capsule { a, b, radius } => {
            format!("<path class=\"{class}\" d=\"{}\"/>", capsule_path(*a, *b, *radius))
        }
    }
}

/// Deterministic SVG of one state: a path per phalanx capsule and the palm,
/// one polyline per tendon (flexors blue, extensors red), object outlines,
/// and a marker plus force glyph per contact.
pub fn render_frame(state: &SimState, scene: &Scene, style: &RenderStyle) -> String {
    let model = &scene.hand;
    let poses = state.poses(model);
    let mut body = String::new();
    let mut bounds: Vec<Vec2> = Vec::new();

    let palm = WorldShape::Capsule {
        a: model.palm.a,
        b: model.palm.b,
        radius: model.palm.radius,
    };
    extent(&mut bounds, &palm);
    let _ = writeln!(body, "{}", shape_element(&palm, "palm"));

    for (fi, (finger, pose)) in model.fingers.iter().zip(&poses.fingers).enumerate() {
        for k in 0..finger.phalanges.len() {
            let (a, b) = pose.segment(finger, k);
            let seg = WorldShape::Capsule {
                a,
                b,
                radius: finger.half_width,
            };
            extent(&mut bounds, &seg);
            let _ = writeln!(
                body,
                "<path class=\"phalanx\" data-finger=\"{fi}\" data-phalanx=\"{k}\" d=\"{}\"/>",
                capsule_path(a, b, finger.half_width)
            );
        }
    }

    if style.tendons {
        for (ri, route) in model.routes.iter().enumerate() {
            let pose = &poses.fingers[route.finger.index()];
            let pts: Vec<String> = route_points(route, pose).into_iter().map(|(p, _)| pt(svg(p))).collect();
            let (side, color) = match route.side {
                TendonSide::Flexor => ("flexor", FLEXOR_COLOR),
                TendonSide::Extensor => ("extensor", EXTENSOR_COLOR),
            };
            let _ = writeln!(
                body,
                "<polyline class=\"tendon {side}\" data-route=\"{ri}\" stroke=\"{color}\" points=\"{}\"/>",
                pts.join(" ")
            );
        }
    }

    for (spec, obj) in scene.objects.iter().zip(&state.objects) {
        let shape = WorldShape::place(&spec.shape, &obj.pose);
        extent(&mut bounds, &shape);
        let class = if spec.fixed { "object fixed" } else { "object" };
        let _ = writeln!(body, "{}", shape_element(&shape, class));
    }

    for c in &state.contacts {
        let p = svg(c.position);
        let tip = svg(c.position + c.force_on_finger() * style.force_scale);
        bounds.push(c.position + c.force_on_finger() * style.force_scale);
        let _ = writeln!(body, "<circle class=\"contact\" cx=\"{}\" cy=\"{}\" r=\"1.5\"/>", num(p.x), num(p.y));
        let _ = writeln!(
            body,
            "<line class=\"force\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(p.x),
            num(p.y),
            num(tip.x),
            num(tip.y)
        );
    }

    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in bounds.iter().map(|p| svg(*p)) {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let lo = lo - Vec2::new(style.margin, style.margin);
    let size = hi - lo + Vec2::new(style.margin, style.margin);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">",
        num(size.x * style.scale),
        num(size.y * style.scale),
        num(lo.x),
        num(lo.y),
        num(size.x),
        num(size.y)
    );
    let _ = writeln!(
        out,
        "<style>.palm,.phalanx{{fill:#e8e2d4;stroke:#555;stroke-width:0.6}} .tendon{{fill:none;stroke-width:0.8}} \
         .object{{fill:#9fc59a;fill-opacity:0.6;stroke:#3d6b38;stroke-width:0.6}} .fixed{{fill:#aaa}} \
         .contact{{fill:#000}} .force{{stroke:#e08a00;stroke-width:0.8}}</style>"
    );
    let _ = writeln!(out, "<title>t = {} s</title>", num(state.t));
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}
