use crate::math::{cos, sin, sqrt};

/// Oriented rectangle (vehicle footprint).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

type P = (f64, f64);

impl Rect {
    pub fn new(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Self {
        Self {
            cx,
            cy,
            heading,
            length,
            width,
        }
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [P; 4] {
        let (c, s) = (cos(self.heading), sin(self.heading));
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let at = |u: f64, v: f64| (self.cx + u * c - v * s, self.cy + u * s + v * c);
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    pub fn y_extent(&self) -> (f64, f64) {
        let ys = self.corners().map(|p| p.1);
        ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        })
    }
}

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn dot(a: P, b: P) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

fn point_segment_distance(p: P, a: P, b: P) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        crate::math::clamp(dot(ap, ab) / len2, 0.0, 1.0)
    } else {
        0.0
    };
    let q = (a.0 + t * ab.0, a.1 + t * ab.1);
    let d = sub(p, q);
    sqrt(dot(d, d))
}

/// Separating-axis test over both rectangles' edge normals.
fn intersects(a: &[P; 4], b: &[P; 4]) -> bool {
    for poly in [a, b] {
        for i in 0..4 {
            let e = sub(poly[(i + 1) % 4], poly[i]);
            let axis = (-e.1, e.0);
            let project = |pts: &[P; 4]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = dot(*p, axis);
                    (lo.min(d), hi.max(d))
                })
            };
            let (a_lo, a_hi) = project(a);
            let (b_lo, b_hi) = project(b);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
    }
    true
}

/// Minimum Euclidean distance between two oriented rectangles, 0 when they
/// touch or overlap.
pub fn rectangle_gap(a: &Rect, b: &Rect) -> f64 {
    let (ca, cb) = (a.corners(), b.corners());
    if intersects(&ca, &cb) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (from, to) in [(&ca, &cb), (&cb, &ca)] {
        for p in from.iter() {
            for i in 0..4 {
                best = best.min(point_segment_distance(*p, to[i], to[(i + 1) % 4]));
            }
        }
    }
    best
}
