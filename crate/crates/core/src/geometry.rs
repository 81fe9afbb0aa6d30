//! Oriented rectangles and the separating-axis overlap test.

use std::f64::consts::PI;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * ((angle + PI) / two_pi).floor();
    // floor can land exactly on the upper bound through rounding
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// A rectangle with a center, full extents, and a yaw angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, heading: f64) -> Self {
        Self {
            cx,
            cy,
            length,
            width,
            heading,
        }
    }

    /// Unit vectors along the length and width directions.
    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    /// Half-length of the projection onto a unit axis.
    fn projected_radius(&self, axis: (f64, f64)) -> f64 {
        let [u, v] = self.axes();
        0.5 * self.length * (u.0 * axis.0 + u.1 * axis.1).abs()
            + 0.5 * self.width * (v.0 * axis.0 + v.1 * axis.1).abs()
    }

    /// The four corners, counter-clockwise.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [u, v] = self.axes();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let corner = |sl: f64, sw: f64| {
            (
                self.cx + sl * hl * u.0 + sw * hw * v.0,
                self.cy + sl * hl * u.1 + sw * hw * v.1,
            )
        };
        [
            corner(1.0, 1.0),
            corner(-1.0, 1.0),
            corner(-1.0, -1.0),
            corner(1.0, -1.0),
        ]
    }

    /// Whether a point lies inside or on the boundary.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let [u, v] = self.axes();
        let (dx, dy) = (px - self.cx, py - self.cy);
        (dx * u.0 + dy * u.1).abs() <= 0.5 * self.length
            && (dx * v.0 + dy * v.1).abs() <= 0.5 * self.width
    }

    /// Separating-axis test. Touching rectangles count as overlapping.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let (dx, dy) = (other.cx - self.cx, other.cy - self.cy);
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        for axis in [a0, a1, b0, b1] {
            let distance = (dx * axis.0 + dy * axis.1).abs();
            if distance > self.projected_radius(axis) + other.projected_radius(axis) {
                return false;
            }
        }
        true
    }

    /// Bounding-circle radius, used as a cheap rejection before SAT.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

/// Broad-phase plus SAT.
pub fn rects_collide(a: &OrientedRect, b: &OrientedRect) -> bool {
    let reach = a.circumradius() + b.circumradius();
    let (dx, dy) = (a.cx - b.cx, a.cy - b.cy);
    if dx * dx + dy * dy > reach * reach {
        return false;
    }
    a.overlaps(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(-PI - 0.1) - (PI - 0.1)).abs() < 1e-12);
        for k in -50..50 {
            let a = wrap_angle(k as f64 * 0.37);
            assert!((-PI..PI).contains(&a));
        }
    }

    #[test]
    fn disjoint_unit_squares() {
        let a = OrientedRect::new(0.0, 0.0, 1.0, 1.0, 0.0);
        let b = OrientedRect::new(10.0, 0.0, 1.0, 1.0, 0.0);
        assert!(!rects_collide(&a, &b));
    }

    #[test]
    fn identical_unit_squares() {
        let a = OrientedRect::new(0.0, 0.0, 1.0, 1.0, 0.0);
        assert!(rects_collide(&a, &a));
    }

    #[test]
    fn edge_contact_counts_as_collision() {
        let a = OrientedRect::new(0.0, 0.0, 1.0, 1.0, 0.0);
        let b = OrientedRect::new(1.0, 0.0, 1.0, 1.0, 0.0);
        assert!(rects_collide(&a, &b));
    }

    #[test]
    fn corner_contact_at_45_degrees() {
        // A 2x1 box at the origin, a 2x1 box at 45° sliding in along +x.
        // Its leftmost corner sits (1 + 0.5)/√2 left of its center and hits
        // the right edge of the first box (x = 1) at d = 1 + 1.5/√2.
        let threshold = 1.0 + 1.5 / 2f64.sqrt();
        let a = OrientedRect::new(0.0, 0.0, 2.0, 1.0, 0.0);
        let near = OrientedRect::new(threshold - 1e-9, 0.0, 2.0, 1.0, FRAC_PI_4);
        let far = OrientedRect::new(threshold + 1e-9, 0.0, 2.0, 1.0, FRAC_PI_4);
        assert!(rects_collide(&a, &near));
        assert!(!rects_collide(&a, &far));
    }

    #[test]
    fn contains_corners() {
        let r = OrientedRect::new(1.0, 2.0, 4.0, 2.0, 0.3);
        for (x, y) in r.corners() {
            let shrink = (x + (r.cx - x) * 1e-9, y + (r.cy - y) * 1e-9);
            assert!(r.contains(shrink.0, shrink.1));
        }
        assert!(!r.contains(10.0, 10.0));
    }
}
