//! Schematic 2D rendering: every branch is a straight segment whose length
//! is proportional to its lifetime.

use crate::growth::{BranchNode, CoralTree};
use std::fmt::Write;

/// Canvas height the tree is fitted to when no scale is given.
pub const FIT_HEIGHT: f64 = 480.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub path: Vec<u8>,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub halted: bool,
    pub leaf: bool,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }
}

/// Turn applied to child `c` of `p`, spread evenly over `[-angle, angle]`;
/// the first child turns left.
pub fn child_turn(c: usize, p: usize, angle: f64) -> f64 {
    if p <= 1 {
        0.0
    } else {
        angle * (1.0 - 2.0 * c as f64 / (p - 1) as f64)
    }
}

fn longest_path(node: &BranchNode) -> f64 {
    node.lifetime + node.children.iter().map(longest_path).fold(0.0, f64::max)
}

/// Segment layout with the root at the origin pointing up (negative y).
pub fn layout(tree: &CoralTree, angle_deg: f64, length_scale: Option<f64>) -> Vec<Segment> {
    let scale = length_scale.unwrap_or_else(|| {
        let longest = longest_path(&tree.root);
        if longest > 0.0 {
            FIT_HEIGHT / longest
        } else {
            1.0
        }
    });
    let mut out = Vec::new();
    let mut stack = vec![(&tree.root, 0.0f64, 0.0f64, -90.0f64)];
    while let Some((node, x, y, heading)) = stack.pop() {
        let len = node.lifetime * scale;
        let rad = heading.to_radians();
        let (x1, y1) = (x + len * rad.cos(), y + len * rad.sin());
        out.push(Segment {
            path: node.path.clone(),
            x0: x,
            y0: y,
            x1,
            y1,
            halted: node.halted,
            leaf: node.is_leaf(),
        });
        let p = node.children.len();
        for (c, child) in node.children.iter().enumerate().rev() {
            // y grows downward, so a left turn decreases the heading
            stack.push((child, x1, y1, heading - child_turn(c, p, angle_deg)));
        }
    }
    out
}

fn f(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// SVG document; coordinates are printed with four decimals.
pub fn render(tree: &CoralTree, angle_deg: f64, length_scale: Option<f64>) -> String {
    let segs = layout(tree, angle_deg, length_scale);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for s in &segs {
        xmin = xmin.min(s.x0.min(s.x1));
        xmax = xmax.max(s.x0.max(s.x1));
        ymin = ymin.min(s.y0.min(s.y1));
        ymax = ymax.max(s.y0.max(s.y1));
    }
    let (w, h) = (xmax - xmin + 2.0 * MARGIN, ymax - ymin + 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"{}\" height=\"{}\">",
        f(xmin - MARGIN),
        f(ymin - MARGIN),
        f(w),
        f(h),
        f(w),
        f(h)
    );
    out.push_str("<g stroke=\"#6b4f3a\" stroke-width=\"2\" stroke-linecap=\"round\" fill=\"none\">\n");
    for s in &segs {
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            f(s.x0),
            f(s.y0),
            f(s.x1),
            f(s.y1)
        );
    }
    out.push_str("</g>\n<g fill=\"#b03a2e\">\n");
    for s in segs.iter().filter(|s| s.halted && s.leaf) {
        let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"3\"/>", f(s.x1), f(s.y1));
    }
    out.push_str("</g>\n</svg>\n");
    out
}
