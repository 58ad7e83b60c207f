//! Structured triangulations of rectangles and their side skeleton.
//!
//! A level-`l` mesh is an `n x n` grid of squares (`n = 2^l`), each split
//! along its bottom-left to top-right diagonal into two counterclockwise
//! triangles. Consecutive levels are related by red refinement, so the
//! maximal side length halves with every level.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::vec2::{self, Point};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// The square `(-a, a)^2`.
    pub fn centered_square(half_width: f64) -> Self {
        Self::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Whether `p` lies on the boundary, up to a tolerance relative to the
    /// rectangle size.
    pub fn on_boundary(&self, p: Point) -> bool {
        let tol = 1e-12 * self.width().max(self.height());
        let inside_x = p[0] >= self.x0 - tol && p[0] <= self.x1 + tol;
        let inside_y = p[1] >= self.y0 - tol && p[1] <= self.y1 + tol;
        let on_x = (p[0] - self.x0).abs() <= tol || (p[0] - self.x1).abs() <= tol;
        let on_y = (p[1] - self.y0).abs() <= tol || (p[1] - self.y1).abs() <= tol;
        (on_x && inside_y) || (on_y && inside_x)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    level: u32,
    domain: Rect,
    areas: Vec<f64>,
    barycenters: Vec<Point>,
}

impl Mesh {
    /// Uniform triangulation of `domain` with `2 * 4^level` triangles.
    pub fn structured(domain: Rect, level: u32) -> Result<Self> {
        let (w, h) = (domain.width(), domain.height());
        if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
            return Err(Error::DegenerateDomain {
                width: w,
                height: h,
            });
        }
        if level > 12 {
            return Err(Error::InvalidParams(format!(
                "refinement level {level} is too large"
            )));
        }
        let n = 1usize << level;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            // Interpolate from both ends so the outer vertices hit the bounds exactly.
            let ty = j as f64 / n as f64;
            let y = domain.y0 * (1.0 - ty) + domain.y1 * ty;
            for i in 0..=n {
                let tx = i as f64 / n as f64;
                let x = domain.x0 * (1.0 - tx) + domain.x1 * tx;
                vertices.push([x, y]);
            }
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v11 = idx(i + 1, j + 1);
                let v01 = idx(i, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut mesh = Self::from_parts(vertices, triangles, domain)?;
        mesh.level = level;
        Ok(mesh)
    }

    /// Builds a mesh from raw parts. Triangles must be counterclockwise.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, domain: Rect) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut barycenters = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidParams(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = 0.5 * vec2::cross(vec2::sub(b, a), vec2::sub(c, a));
            if area <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "triangle {t} has nonpositive signed area {area:e}"
                )));
            }
            areas.push(area);
            barycenters.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
        }
        Ok(Self {
            vertices,
            triangles,
            level: 0,
            domain,
            areas,
            barycenters,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn barycenter(&self, t: usize) -> Point {
        self.barycenters[t]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Maximal side length over all triangles.
    pub fn h_max(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| {
                (0..3).map(move |i| (tri[i], tri[(i + 1) % 3]))
            })
            .map(|(a, b)| vec2::norm(vec2::sub(self.vertices[a], self.vertices[b])))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SideKind {
    Interior,
    Dirichlet,
    Neumann,
}

impl SideKind {
    fn tag(self) -> &'static str {
        match self {
            SideKind::Interior => "I",
            SideKind::Dirichlet => "D",
            SideKind::Neumann => "N",
        }
    }
}

/// Boundary part assigned to a boundary side by a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// One element side. The normal points out of `minus` (and into `plus`,
/// when present); for boundary sides it is the outer normal of the domain.
#[derive(Debug, Clone)]
pub struct Side {
    pub vertices: [usize; 2],
    pub normal: Point,
    pub midpoint: Point,
    pub length: f64,
    pub minus: usize,
    pub plus: Option<usize>,
    pub kind: SideKind,
}

impl Side {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    /// Sides entering sums over `S_h \ Gamma_N` (jump terms).
    pub fn outside_neumann(&self) -> bool {
        self.kind != SideKind::Neumann
    }

    /// Sides entering sums over `S_h \ Gamma_D` (average terms).
    pub fn outside_dirichlet(&self) -> bool {
        self.kind != SideKind::Dirichlet
    }

    /// +1 if the side normal is the outer normal of element `t`, -1 otherwise.
    pub fn orientation(&self, t: usize) -> f64 {
        if t == self.minus {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct SideSet {
    sides: Vec<Side>,
    element_sides: Vec<[usize; 3]>,
}

impl SideSet {
    /// Extracts the side skeleton and tags boundary sides with `classify`,
    /// which receives the side midpoint and outer normal.
    pub fn build<F>(mesh: &Mesh, classify: F) -> Result<Self>
    where
        F: Fn(Point, Point) -> BoundaryTag,
    {
        let verts = mesh.vertices();
        // edge key -> (element, local edge index)
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        let mut order = Vec::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edges.entry(key).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push((t, i));
            }
        }

        let mut sides = Vec::with_capacity(order.len());
        let mut element_sides = vec![[usize::MAX; 3]; mesh.n_elements()];
        for key in order {
            let owners = &edges[&key];
            if owners.len() > 2 {
                return Err(Error::NonConforming(format!(
                    "edge ({}, {}) is shared by {} triangles",
                    key.0,
                    key.1,
                    owners.len()
                )));
            }
            let mut owners = owners.clone();
            owners.sort_unstable();
            let (minus, local) = owners[0];
            let tri = mesh.triangles()[minus];
            let (a, b) = (verts[tri[local]], verts[tri[(local + 1) % 3]]);
            let edge = vec2::sub(b, a);
            let length = vec2::norm(edge);
            // Rotating a counterclockwise edge clockwise gives the outer normal.
            let normal = [edge[1] / length, -edge[0] / length];
            let midpoint = vec2::midpoint(a, b);
            let (plus, kind) = if owners.len() == 2 {
                (Some(owners[1].0), SideKind::Interior)
            } else {
                if !mesh.domain().on_boundary(midpoint) {
                    return Err(Error::NonConforming(format!(
                        "edge ({}, {}) has one neighbour but lies inside the domain (hanging node)",
                        key.0, key.1
                    )));
                }
                let kind = match classify(midpoint, normal) {
                    BoundaryTag::Dirichlet => SideKind::Dirichlet,
                    BoundaryTag::Neumann => SideKind::Neumann,
                };
                (None, kind)
            };
            let s = sides.len();
            for &(t, i) in &owners {
                element_sides[t][i] = s;
            }
            sides.push(Side {
                vertices: [tri[local], tri[(local + 1) % 3]],
                normal,
                midpoint,
                length,
                minus,
                plus,
                kind,
            });
        }
        Ok(Self {
            sides,
            element_sides,
        })
    }

    pub fn all_dirichlet(mesh: &Mesh) -> Result<Self> {
        Self::build(mesh, |_, _| BoundaryTag::Dirichlet)
    }

    pub fn all_neumann(mesh: &Mesh) -> Result<Self> {
        Self::build(mesh, |_, _| BoundaryTag::Neumann)
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.element_sides.len()
    }

    /// Side indices of element `t`; entry `i` is the edge from local vertex
    /// `i` to local vertex `i + 1`.
    pub fn element_sides(&self, t: usize) -> [usize; 3] {
        self.element_sides[t]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Side> {
        self.sides.iter()
    }
}

/// Writes the plain-text debugging dump: header `NV NT NS`, then vertex,
/// triangle and side lines.
pub fn write_mesh<W: Write>(mesh: &Mesh, sides: &SideSet, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        mesh.vertices().len(),
        mesh.n_elements(),
        sides.len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{} {}", v[0], v[1])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for s in sides.iter() {
        writeln!(out, "{} {} {}", s.vertices[0], s.vertices[1], s.kind.tag())?;
    }
    Ok(())
}
