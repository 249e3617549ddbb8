//! Small planar geometry kernel shared by the mesh and cut-cell code.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Rotates a tangent clockwise by 90 degrees. For a boundary traversed
/// counter-clockwise this is the outward normal.
#[inline]
pub fn right_normal(t: &Vec2) -> Vec2 {
    Vec2::new(t.y, -t.x)
}

/// Signed area by the shoelace formula (positive for counter-clockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        a += cross(&poly[i], &poly[(i + 1) % n]);
    }
    0.5 * a
}

pub fn polygon_centroid(poly: &[Vec2]) -> Vec2 {
    let n = poly.len();
    let mut c = Vec2::zeros();
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let w = cross(&p, &q);
        a += w;
        c += (p + q) * w;
    }
    if a.abs() < f64::MIN_POSITIVE {
        poly.iter().fold(Vec2::zeros(), |s, p| s + p) / n as f64
    } else {
        c / (3.0 * a)
    }
}

/// Winding number of a closed polyline given as directed segments.
pub fn winding_number<'a>(p: &Vec2, segments: impl IntoIterator<Item = (&'a Vec2, &'a Vec2)>) -> i32 {
    let mut w = 0;
    for (a, b) in segments {
        if a.y <= p.y {
            if b.y > p.y && cross(&(b - a), &(p - a)) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && cross(&(b - a), &(p - a)) < 0.0 {
            w -= 1;
        }
    }
    w
}

pub fn point_in_polygon(p: &Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    winding_number(p, (0..n).map(|i| (&poly[i], &poly[(i + 1) % n]))) != 0
}

/// Distance from `p` to the segment `ab` together with the clamped parameter
/// of the closest point.
pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> (f64, f64) {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 {
        ((p - a).dot(&d) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + d * t - p).norm(), t)
}

/// Intersection of segments `ab` and `cd`. Returns the parameters along both
/// segments when they cross or touch at a single point.
pub fn segment_intersection(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2, tol: f64) -> Option<(f64, f64)> {
    let r = b - a;
    let s = d - c;
    let den = cross(&r, &s);
    let scale = r.norm() * s.norm();
    if den.abs() <= 1e-14 * scale {
        return None;
    }
    let ac = c - a;
    let t = cross(&ac, &s) / den;
    let u = cross(&ac, &r) / den;
    let tt = tol / r.norm().max(f64::MIN_POSITIVE);
    let tu = tol / s.norm().max(f64::MIN_POSITIVE);
    if t < -tt || t > 1.0 + tt || u < -tu || u > 1.0 + tu {
        return None;
    }
    Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
}

/// Parameters along `ab` of the endpoints of `cd` when the two segments are
/// collinear within `tol`.
pub fn collinear_overlap(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2, tol: f64) -> Option<[f64; 2]> {
    let r = b - a;
    let l = r.norm();
    if l == 0.0 {
        return None;
    }
    let n = Vec2::new(-r.y, r.x) / l;
    if (c - a).dot(&n).abs() > tol || (d - a).dot(&n).abs() > tol {
        return None;
    }
    let tc = (c - a).dot(&r) / (l * l);
    let td = (d - a).dot(&r) / (l * l);
    Some([tc, td])
}

/// Ray `p + s dir` against segment `ab`; returns `s` and the segment
/// parameter on a hit.
pub fn ray_segment(p: &Vec2, dir: &Vec2, a: &Vec2, b: &Vec2) -> Option<(f64, f64)> {
    let e = b - a;
    let den = cross(dir, &e);
    if den.abs() <= 1e-14 * e.norm() * dir.norm() {
        return None;
    }
    let ap = a - p;
    let s = cross(&ap, &e) / den;
    let t = cross(&ap, dir) / den;
    if (-1e-12..=1.0 + 1e-12).contains(&t) {
        Some((s, t.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Rect {
    pub fn new(lo: Vec2, hi: Vec2) -> Self {
        Rect { lo, hi }
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.lo,
            Vec2::new(self.hi.x, self.lo.y),
            self.hi,
            Vec2::new(self.lo.x, self.hi.y),
        ]
    }

    pub fn area(&self) -> f64 {
        (self.hi.x - self.lo.x) * (self.hi.y - self.lo.y)
    }

    pub fn center(&self) -> Vec2 {
        (self.lo + self.hi) * 0.5
    }

    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        p.x >= self.lo.x - tol && p.x <= self.hi.x + tol && p.y >= self.lo.y - tol && p.y <= self.hi.y + tol
    }

    /// Liang-Barsky clipping of the segment `ab`. Returns the parameter range
    /// inside the rectangle, if non-empty.
    pub fn clip_segment(&self, a: &Vec2, b: &Vec2) -> Option<(f64, f64)> {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [
            (-d.x, a.x - self.lo.x),
            (d.x, self.hi.x - a.x),
            (-d.y, a.y - self.lo.y),
            (d.y, self.hi.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        if t0 < t1 {
            Some((t0, t1))
        } else {
            None
        }
    }

    /// Perimeter coordinate of a point on the boundary, running
    /// counter-clockwise from `lo` with total length equal to the perimeter.
    /// `None` if the point is farther than `tol` from the boundary.
    pub fn perimeter_coord(&self, p: &Vec2, tol: f64) -> Option<f64> {
        let w = self.hi.x - self.lo.x;
        let h = self.hi.y - self.lo.y;
        let (x, y) = (p.x - self.lo.x, p.y - self.lo.y);
        if y.abs() <= tol && x > -tol && x < w + tol {
            return Some(x.clamp(0.0, w));
        }
        if (x - w).abs() <= tol && y > -tol && y < h + tol {
            return Some(w + y.clamp(0.0, h));
        }
        if (y - h).abs() <= tol && x > -tol && x < w + tol {
            return Some(w + h + (w - x.clamp(0.0, w)));
        }
        if x.abs() <= tol && y > -tol && y < h + tol {
            let s = 2.0 * w + h + (h - y.clamp(0.0, h));
            return Some(if s >= 2.0 * (w + h) - tol { 0.0 } else { s });
        }
        None
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.hi.x - self.lo.x) + (self.hi.y - self.lo.y))
    }

    /// Inverse of [`Rect::perimeter_coord`].
    pub fn perimeter_point(&self, s: f64) -> Vec2 {
        let w = self.hi.x - self.lo.x;
        let h = self.hi.y - self.lo.y;
        let s = s.rem_euclid(2.0 * (w + h));
        if s <= w {
            Vec2::new(self.lo.x + s, self.lo.y)
        } else if s <= w + h {
            Vec2::new(self.hi.x, self.lo.y + (s - w))
        } else if s <= 2.0 * w + h {
            Vec2::new(self.hi.x - (s - w - h), self.hi.y)
        } else {
            Vec2::new(self.lo.x, self.hi.y - (s - 2.0 * w - h))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_unit_square() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!((polygon_area(&sq) - 1.0).abs() < 1e-15);
        let c = polygon_centroid(&sq);
        assert!((c - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        assert!(point_in_polygon(&Vec2::new(0.3, 0.7), &sq));
        assert!(!point_in_polygon(&Vec2::new(1.3, 0.7), &sq));
    }

    #[test]
    fn clip_diagonal() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        let (t0, t1) = r.clip_segment(&Vec2::new(-1.0, -1.0), &Vec2::new(2.0, 2.0)).unwrap();
        assert!((t0 - 1.0 / 3.0).abs() < 1e-15 && (t1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.clip_segment(&Vec2::new(-1.0, 2.0), &Vec2::new(2.0, 2.5)).is_none());
    }

    #[test]
    fn perimeter_roundtrip() {
        let r = Rect::new(Vec2::new(1.0, 2.0), Vec2::new(3.0, 3.0));
        for s in [0.0, 0.5, 2.0, 2.7, 3.0, 4.5, 5.0, 5.9] {
            let p = r.perimeter_point(s);
            assert!((r.perimeter_coord(&p, 1e-12).unwrap() - s).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn crossing_segments() {
        let (t, u) = segment_intersection(
            &Vec2::new(0.0, 0.0),
            &Vec2::new(2.0, 0.0),
            &Vec2::new(0.5, -1.0),
            &Vec2::new(0.5, 1.0),
            1e-12,
        )
        .unwrap();
        assert!((t - 0.25).abs() < 1e-15 && (u - 0.5).abs() < 1e-15);
    }
}
