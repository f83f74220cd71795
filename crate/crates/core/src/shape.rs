//! Analytic domain shapes and their text form (`disk:0,0,1`, `annulus:0.5,1`,
//! `box:1,1`, `polygon:0,0;1,0;0,1`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    /// Axis-aligned box with lower-left corner `corner`.
    Box { corner: [f64; 2], width: f64, height: f64 },
    /// Simple polygon, vertices in order (either orientation).
    Polygon(Vec<[f64; 2]>),
}

impl Shape {
    pub fn disk(cx: f64, cy: f64, r: f64) -> Self {
        Shape::Disk { center: [cx, cy], radius: r }
    }

    pub fn annulus(r0: f64, r1: f64) -> Self {
        Shape::Annulus { center: [0.0, 0.0], inner: r0, outer: r1 }
    }

    pub fn unit_box() -> Self {
        Shape::rect(1.0, 1.0)
    }

    pub fn rect(w: f64, h: f64) -> Self {
        Shape::Box { corner: [0.0, 0.0], width: w, height: h }
    }

    fn validate(self) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match &self {
            Shape::Disk { center, radius } => finite(center) && radius.is_finite() && *radius > 0.0,
            Shape::Annulus { center, inner, outer } => {
                finite(center) && inner.is_finite() && outer.is_finite() && *inner >= 0.0 && inner < outer
            }
            Shape::Box { corner, width, height } => {
                finite(corner) && width.is_finite() && height.is_finite() && *width > 0.0 && *height > 0.0
            }
            Shape::Polygon(v) => v.len() >= 3 && v.iter().all(|p| finite(p)),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidShape(format!("degenerate parameters in {self}")))
        }
    }

    /// Strict containment test used for cell classification.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::Disk { center, radius } => dist(p, *center) < *radius,
            Shape::Annulus { center, inner, outer } => {
                let r = dist(p, *center);
                r > *inner && r < *outer
            }
            Shape::Box { corner, width, height } => {
                p[0] > corner[0] && p[0] < corner[0] + width && p[1] > corner[1] && p[1] < corner[1] + height
            }
            Shape::Polygon(v) => point_in_polygon(v, p),
        }
    }

    /// `[xmin, ymin, xmax, ymax]`
    pub fn bbox(&self) -> [f64; 4] {
        match self {
            Shape::Disk { center, radius } => {
                [center[0] - radius, center[1] - radius, center[0] + radius, center[1] + radius]
            }
            Shape::Annulus { center, outer, .. } => {
                [center[0] - outer, center[1] - outer, center[0] + outer, center[1] + outer]
            }
            Shape::Box { corner, width, height } => [corner[0], corner[1], corner[0] + width, corner[1] + height],
            Shape::Polygon(v) => {
                let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                for p in v {
                    b[0] = b[0].min(p[0]);
                    b[1] = b[1].min(p[1]);
                    b[2] = b[2].max(p[0]);
                    b[3] = b[3].max(p[1]);
                }
                b
            }
        }
    }

    /// Exact signed distance: positive inside, negative outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        match self {
            Shape::Disk { center, radius } => radius - dist(p, *center),
            Shape::Annulus { center, inner, outer } => {
                let r = dist(p, *center);
                (r - inner).min(outer - r)
            }
            Shape::Box { corner, width, height } => {
                let x0 = corner[0];
                let y0 = corner[1];
                let x1 = x0 + width;
                let y1 = y0 + height;
                let inside = (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1]);
                if inside >= 0.0 {
                    inside
                } else {
                    let dx = (x0 - p[0]).max(0.0).max(p[0] - x1);
                    let dy = (y0 - p[1]).max(0.0).max(p[1] - y1);
                    -dx.hypot(dy)
                }
            }
            Shape::Polygon(v) => {
                let mut best = f64::INFINITY;
                for k in 0..v.len() {
                    best = best.min(segment_distance(p, v[k], v[(k + 1) % v.len()]));
                }
                if point_in_polygon(v, p) {
                    best
                } else {
                    -best
                }
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidShape(format!("bad number `{}`", t.trim())))
        })
        .collect()
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidShape(format!("expected `kind:params`, got `{s}`")))?;
        let shape = match kind.trim() {
            "disk" => match parse_list(args)?.as_slice() {
                [r] => Shape::disk(0.0, 0.0, *r),
                [cx, cy, r] => Shape::disk(*cx, *cy, *r),
                _ => return Err(Error::InvalidShape("disk takes `r` or `cx,cy,r`".into())),
            },
            "annulus" => match parse_list(args)?.as_slice() {
                [r0, r1] => Shape::annulus(*r0, *r1),
                [cx, cy, r0, r1] => Shape::Annulus { center: [*cx, *cy], inner: *r0, outer: *r1 },
                _ => return Err(Error::InvalidShape("annulus takes `r0,r1` or `cx,cy,r0,r1`".into())),
            },
            "box" => match parse_list(args)?.as_slice() {
                [w, h] => Shape::rect(*w, *h),
                [w, h, x0, y0] => Shape::Box { corner: [*x0, *y0], width: *w, height: *h },
                _ => return Err(Error::InvalidShape("box takes `w,h` or `w,h,x0,y0`".into())),
            },
            "polygon" => {
                let mut verts = Vec::new();
                for pair in args.split(';') {
                    match parse_list(pair)?.as_slice() {
                        [x, y] => verts.push([*x, *y]),
                        _ => return Err(Error::InvalidShape(format!("bad vertex `{pair}`"))),
                    }
                }
                Shape::Polygon(verts)
            }
            other => return Err(Error::InvalidShape(format!("unknown shape kind `{other}`"))),
        };
        shape.validate()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Disk { center, radius } => write!(f, "disk:{},{},{}", center[0], center[1], radius),
            Shape::Annulus { center, inner, outer } => {
                write!(f, "annulus:{},{},{},{}", center[0], center[1], inner, outer)
            }
            Shape::Box { corner, width, height } => {
                write!(f, "box:{},{},{},{}", width, height, corner[0], corner[1])
            }
            Shape::Polygon(v) => {
                let parts: Vec<String> = v.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
                write!(f, "polygon:{}", parts.join(";"))
            }
        }
    }
}

impl From<Shape> for String {
    fn from(s: Shape) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Shape {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
