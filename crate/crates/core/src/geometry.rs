//! Planar SE(2) poses and collision footprints.

use core::f64::consts::PI;

/// A planar pose. `theta` is kept in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut t = libm::remainder(a, 2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    }
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

impl Pose {
    pub const IDENTITY: Pose = Pose { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Pose {
        Pose { x, y, theta: wrap_angle(theta) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Rotates a vector given in this pose's frame into the world frame.
    pub fn rotate(&self, vx: f64, vy: f64) -> (f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        (c * vx - s * vy, s * vx + c * vy)
    }

    /// Maps a point given in this pose's frame into the world frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (rx, ry) = self.rotate(px, py);
        (self.x + rx, self.y + ry)
    }

    /// Maps a world point into this pose's frame.
    pub fn inverse_transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// `a * b`: the pose `b` (expressed in the frame of `a`) mapped to the world frame.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    let (x, y) = a.transform_point(b.x, b.y);
    Pose { x, y, theta: wrap_angle(a.theta + b.theta) }
}

pub fn inverse(a: &Pose) -> Pose {
    let (x, y) = a.inverse_transform_point(0.0, 0.0);
    Pose { x, y, theta: wrap_angle(-a.theta) }
}

/// The pose of `b` expressed in the frame of `a`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Pose {
    let (x, y) = a.inverse_transform_point(b.x, b.y);
    Pose { x, y, theta: wrap_angle(b.theta - a.theta) }
}

/// Collision footprint. Rectangles are centred on the pose and rotate with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Rect { w: f64, h: f64 },
    Disc { r: f64 },
}

impl Shape {
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Rect { w, h } => w * h,
            Shape::Disc { r } => PI * r * r,
        }
    }

    /// True for shapes whose orientation is unobservable.
    pub fn is_rotationally_symmetric(&self) -> bool {
        matches!(self, Shape::Disc { .. })
    }

    /// Radius of the smallest centred disc containing the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Rect { w, h } => 0.5 * libm::hypot(w, h),
            Shape::Disc { r } => r,
        }
    }

    pub fn contains_point(&self, pose: &Pose, px: f64, py: f64) -> bool {
        match *self {
            Shape::Disc { r } => {
                let dx = px - pose.x;
                let dy = py - pose.y;
                dx * dx + dy * dy <= r * r
            }
            Shape::Rect { w, h } => {
                let (lx, ly) = pose.inverse_transform_point(px, py);
                libm::fabs(lx) <= 0.5 * w && libm::fabs(ly) <= 0.5 * h
            }
        }
    }
}

/// Strict interior overlap of two placed footprints (touching is not overlap).
pub fn footprints_overlap(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> bool {
    let reach = a.bounding_radius() + b.bounding_radius();
    if pa.distance(pb) >= reach {
        return false;
    }
    match (*a, *b) {
        (Shape::Disc { r: ra }, Shape::Disc { r: rb }) => pa.distance(pb) < ra + rb,
        (Shape::Disc { r }, Shape::Rect { w, h }) => disc_rect_overlap(pa, r, pb, w, h),
        (Shape::Rect { w, h }, Shape::Disc { r }) => disc_rect_overlap(pb, r, pa, w, h),
        (Shape::Rect { w: wa, h: ha }, Shape::Rect { w: wb, h: hb }) => rect_rect_overlap(pa, wa, ha, pb, wb, hb),
    }
}

fn disc_rect_overlap(pd: &Pose, r: f64, pr: &Pose, w: f64, h: f64) -> bool {
    let (lx, ly) = pr.inverse_transform_point(pd.x, pd.y);
    let cx = lx.clamp(-0.5 * w, 0.5 * w);
    let cy = ly.clamp(-0.5 * h, 0.5 * h);
    let dx = lx - cx;
    let dy = ly - cy;
    dx * dx + dy * dy < r * r
}

fn rect_corners(p: &Pose, w: f64, h: f64) -> [(f64, f64); 4] {
    let hw = 0.5 * w;
    let hh = 0.5 * h;
    [p.transform_point(hw, hh), p.transform_point(-hw, hh), p.transform_point(-hw, -hh), p.transform_point(hw, -hh)]
}

fn rect_rect_overlap(pa: &Pose, wa: f64, ha: f64, pb: &Pose, wb: f64, hb: f64) -> bool {
    let ca = rect_corners(pa, wa, ha);
    let cb = rect_corners(pb, wb, hb);
    let axes = [pa.rotate(1.0, 0.0), pa.rotate(0.0, 1.0), pb.rotate(1.0, 0.0), pb.rotate(0.0, 1.0)];
    for (ax, ay) in axes {
        let project = |c: &[(f64, f64); 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(x, y) in c {
                let d = x * ax + y * ay;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(&ca);
        let (blo, bhi) = project(&cb);
        if ahi <= blo || bhi <= alo {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_pose_of_self_is_identity() {
        let p = Pose::new(0.3, -1.2, 2.0);
        let r = relative_pose(&p, &p);
        assert!(r.x.abs() < 1e-15 && r.y.abs() < 1e-15 && r.theta.abs() < 1e-15);
    }

    #[test]
    fn relative_pose_matches_rotation_matrix_oracle() {
        let a = Pose::new(0.0, 0.0, PI / 2.0);
        let b = Pose::new(0.0, 1.0, PI / 2.0);
        let r = relative_pose(&a, &b);
        // R(-pi/2) * (0, 1) = (1, 0)
        assert!((r.x - 1.0).abs() < 1e-12);
        assert!(r.y.abs() < 1e-12);
        assert!(r.theta.abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disc_and_rect_overlap_cases() {
        let d = Shape::Disc { r: 0.1 };
        let r = Shape::Rect { w: 0.2, h: 0.2 };
        let o = Pose::IDENTITY;
        assert!(footprints_overlap(&d, &Pose::new(0.15, 0.0, 0.0), &r, &o));
        assert!(!footprints_overlap(&d, &Pose::new(0.21, 0.0, 0.0), &r, &o));
        // corner clearance: the disc centre is 0.1*sqrt(2)+eps away from the corner diagonal
        assert!(!footprints_overlap(&d, &Pose::new(0.18, 0.18, 0.0), &r, &o));
        // the same placement overlaps once the rectangle is rotated by 45 degrees
        assert!(footprints_overlap(&d, &Pose::new(0.18, 0.0, 0.0), &r, &Pose::new(0.0, 0.0, PI / 4.0)));
    }

    #[test]
    fn rect_rect_rotated() {
        let r = Shape::Rect { w: 0.2, h: 0.2 };
        let a = Pose::IDENTITY;
        assert!(!footprints_overlap(&r, &a, &r, &Pose::new(0.25, 0.0, 0.0)));
        // rotated square's corner reaches 0.1*sqrt(2) ~ 0.1414 from its centre
        assert!(footprints_overlap(&r, &a, &r, &Pose::new(0.23, 0.0, PI / 4.0)));
        assert!(!footprints_overlap(&r, &a, &r, &Pose::new(0.25, 0.0, PI / 4.0)));
    }
}
