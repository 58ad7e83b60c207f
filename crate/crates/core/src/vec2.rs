//! Tiny helpers for 2-D points stored as `[f64; 2]`.

pub type Point = [f64; 2];

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Point) -> Point {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, add(a, scale(t, ab))))
}

/// Distance from `p` to the closed triangle with vertices `v` (zero inside).
pub fn triangle_distance(p: Point, v: &[Point; 3]) -> f64 {
    let twice_area = cross(sub(v[1], v[0]), sub(v[2], v[0]));
    let s = twice_area.signum();
    let inside = (0..3).all(|i| {
        let a = v[i];
        let b = v[(i + 1) % 3];
        s * cross(sub(b, a), sub(p, a)) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|i| segment_distance(p, v[i], v[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}
