//! Quadrature on segments and triangles.
//!
//! Rules are exact for polynomials up to the requested degree. Integrands
//! that are only piecewise smooth across a known circle (the TV disc, the
//! obstacle contact set) are handled by splitting segments exactly at the
//! circle and by dyadic red subdivision of the triangles it crosses.

use crate::vec2::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn crosses_triangle(&self, v: &[Point; 3]) -> bool {
        let near = vec2::triangle_distance(self.center, v);
        let far = v
            .iter()
            .map(|p| vec2::norm(vec2::sub(*p, self.center)))
            .fold(0.0, f64::max);
        near <= self.radius && self.radius <= far
    }

    /// Parameters `t` in (0, 1) where `a + t (b - a)` meets the circle.
    fn segment_crossings(&self, a: Point, b: Point) -> Vec<f64> {
        let d = vec2::sub(b, a);
        let m = vec2::sub(a, self.center);
        let qa = vec2::dot(d, d);
        let qb = 2.0 * vec2::dot(m, d);
        let qc = vec2::dot(m, m) - self.radius * self.radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if qa == 0.0 || disc <= 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        let mut ts: Vec<f64> = [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
            .into_iter()
            .filter(|t| *t > 1e-14 && *t < 1.0 - 1e-14)
            .collect();
        ts.dedup();
        ts
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one Gauss point");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Barycentric points and weights normalized to sum to one.
fn triangle_rule(degree: u32) -> Vec<([f64; 3], f64)> {
    match degree {
        0 | 1 => vec![([1.0 / 3.0; 3], 1.0)],
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            vec![([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)]
        }
        3..=5 => {
            let s15 = 15f64.sqrt();
            let b1 = (6.0 + s15) / 21.0;
            let a1 = 1.0 - 2.0 * b1;
            let w1 = (155.0 + s15) / 1200.0;
            let b2 = (6.0 - s15) / 21.0;
            let a2 = 1.0 - 2.0 * b2;
            let w2 = (155.0 - s15) / 1200.0;
            vec![
                ([1.0 / 3.0; 3], 9.0 / 40.0),
                ([a1, b1, b1], w1),
                ([b1, a1, b1], w1),
                ([b1, b1, a1], w1),
                ([a2, b2, b2], w2),
                ([b2, a2, b2], w2),
                ([b2, b2, a2], w2),
            ]
        }
        _ => {
            // Collapsed (Duffy) tensor Gauss rule.
            let n = (degree as usize + 2) / 2 + 1;
            let gl = gauss_legendre(n);
            let mut rule = Vec::with_capacity(n * n);
            for &(s, ws) in &gl {
                for &(t, wt) in &gl {
                    let l1 = s;
                    let l2 = (1.0 - s) * t;
                    rule.push(([1.0 - l1 - l2, l1, l2], 2.0 * ws * wt * (1.0 - s)));
                }
            }
            rule
        }
    }
}

/// A quadrature configuration: polynomial exactness degree plus optional
/// refinement around a circle where the integrand is not smooth.
#[derive(Debug, Clone)]
pub struct Quadrature {
    degree: u32,
    cut: Option<Circle>,
    cut_levels: u32,
    tri: Vec<([f64; 3], f64)>,
    seg: Vec<(f64, f64)>,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::degree(2)
    }
}

impl Quadrature {
    pub fn degree(degree: u32) -> Self {
        let n_seg = (degree as usize + 2) / 2;
        Self {
            degree,
            cut: None,
            cut_levels: 0,
            tri: triangle_rule(degree),
            seg: gauss_legendre(n_seg.max(1)),
        }
    }

    /// Refines triangles crossed by `circle` dyadically `levels` times and
    /// splits segments at their crossings with it.
    pub fn with_cut(mut self, circle: Circle, levels: u32) -> Self {
        self.cut = Some(circle);
        self.cut_levels = levels;
        self
    }

    pub fn exactness(&self) -> u32 {
        self.degree
    }

    pub fn cut(&self) -> Option<Circle> {
        self.cut
    }

    /// Integral of `f` over the segment `[a, b]`.
    pub fn segment<F: Fn(Point) -> f64>(&self, a: Point, b: Point, f: F) -> f64 {
        let len = vec2::norm(vec2::sub(b, a));
        let mut breaks = vec![0.0];
        if let Some(c) = self.cut {
            breaks.extend(c.segment_crossings(a, b));
        }
        breaks.push(1.0);
        let d = vec2::sub(b, a);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mut piece = 0.0;
            for &(s, ws) in &self.seg {
                let t = t0 + s * (t1 - t0);
                piece += ws * f(vec2::add(a, vec2::scale(t, d)));
            }
            total += piece * (t1 - t0);
        }
        total * len
    }

    /// Integral mean of `f` over the segment `[a, b]`.
    pub fn segment_mean<F: Fn(Point) -> f64>(&self, a: Point, b: Point, f: F) -> f64 {
        self.segment(a, b, f) / vec2::norm(vec2::sub(b, a))
    }

    /// Integral of `f` over the triangle with corners `v`.
    pub fn triangle<F: Fn(Point) -> f64>(&self, v: &[Point; 3], f: F) -> f64 {
        self.triangle_rec(v, &f, self.cut_levels)
    }

    fn triangle_rec<F: Fn(Point) -> f64>(&self, v: &[Point; 3], f: &F, depth: u32) -> f64 {
        if depth > 0 {
            if let Some(c) = self.cut {
                if c.crosses_triangle(v) {
                    return red_children(v)
                        .iter()
                        .map(|child| self.triangle_rec(child, f, depth - 1))
                        .sum();
                }
            }
        }
        let area = 0.5 * vec2::cross(vec2::sub(v[1], v[0]), vec2::sub(v[2], v[0])).abs();
        let mut acc = 0.0;
        for (l, w) in &self.tri {
            let x = [
                l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
            ];
            acc += w * f(x);
        }
        acc * area
    }
}

/// The four children of a red refinement step.
pub fn red_children(v: &[Point; 3]) -> [[Point; 3]; 4] {
    let m01 = vec2::midpoint(v[0], v[1]);
    let m12 = vec2::midpoint(v[1], v[2]);
    let m20 = vec2::midpoint(v[2], v[0]);
    [
        [v[0], m01, m20],
        [m01, v[1], m12],
        [m20, m12, v[2]],
        [m12, m20, m01],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: [Point; 3] = [[0.2, -0.1], [1.3, 0.4], [0.1, 0.9]];

    /// Exact integral of x^i y^j over TRI via a fine composite rule of a
    /// different family (Duffy degree 20).
    fn reference(i: i32, j: i32) -> f64 {
        Quadrature::degree(20).triangle(&TRI, |p| p[0].powi(i) * p[1].powi(j))
    }

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..10 {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.iter().map(|r| r.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact_to_degree() {
        // Area of the unit simplex is 1/2, moments are i! j! / (i + j + 2)!.
        let simplex = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        for degree in [1, 2, 5, 7, 9, 13] {
            let q = Quadrature::degree(degree);
            for i in 0..=degree as i32 {
                for j in 0..=(degree as i32 - i) {
                    let exact = fact(i) * fact(j) / fact(i + j + 2);
                    let got = q.triangle(&simplex, |p| p[0].powi(i) * p[1].powi(j));
                    assert!((got - exact).abs() < 1e-14, "deg {degree}: x^{i} y^{j}");
                }
            }
        }
    }

    #[test]
    fn affine_map_consistency() {
        let q5 = Quadrature::degree(5);
        for (i, j) in [(0, 0), (1, 0), (2, 3), (4, 1), (0, 5)] {
            let got = q5.triangle(&TRI, |p| p[0].powi(i) * p[1].powi(j));
            assert!((got - reference(i, j)).abs() < 1e-13);
        }
    }

    #[test]
    fn segment_split_at_circle_is_exact_for_piecewise_polynomials() {
        let c = Circle::new([0.0, 0.0], 0.5);
        let q = Quadrature::degree(3).with_cut(c, 0);
        // indicator of the disc along the x axis from -1 to 1: length 1
        let got = q.segment([-1.0, 0.0], [1.0, 0.0], |p| {
            if vec2::norm(p) < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        assert!((got - 1.0).abs() < 1e-14);
    }

    #[test]
    fn subdivision_improves_disc_area() {
        let c = Circle::new([0.0, 0.0], 0.5);
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let indicator = |p: Point| if vec2::norm(p) < 0.5 { 1.0 } else { 0.0 };
        let exact = std::f64::consts::PI * 0.25 / 4.0;
        let coarse = Quadrature::degree(5).triangle(&tri, indicator);
        let fine = Quadrature::degree(5).with_cut(c, 6).triangle(&tri, indicator);
        assert!((fine - exact).abs() < (coarse - exact).abs());
        assert!((fine - exact).abs() < 2e-3);
    }

    #[test]
    fn circle_crossing_detection() {
        let c = Circle::new([0.0, 0.0], 1.0);
        assert!(c.crosses_triangle(&[[0.5, 0.0], [1.5, 0.0], [0.5, 1.0]]));
        assert!(!c.crosses_triangle(&[[0.1, 0.0], [0.2, 0.0], [0.1, 0.1]]));
        assert!(!c.crosses_triangle(&[[2.0, 0.0], [3.0, 0.0], [2.0, 1.0]]));
    }
}
