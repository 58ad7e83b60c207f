//! Elementwise affine scalar fields, broken lowest-order Raviart-Thomas
//! vector fields, side traces and the quasi-interpolants onto the
//! Crouzeix-Raviart and Raviart-Thomas subspaces.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Side, SideSet};
use crate::quadrature::Quadrature;
use crate::vec2::{self, Point};

/// Space dimension, entering the Raviart-Thomas shape `a + b (x - x_T) / d`.
pub const DIM: f64 = 2.0;

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::MeshMismatch { expected, found });
    }
    Ok(())
}

/// Elementwise affine function stored as barycenter value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DgField {
    pub values: Vec<f64>,
    pub gradients: Vec<Point>,
}

impl DgField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            gradients: vec![[0.0; 2]; n],
        }
    }

    pub fn new(values: Vec<f64>, gradients: Vec<Point>) -> Result<Self> {
        check_len(values.len(), gradients.len())?;
        Ok(Self { values, gradients })
    }

    /// Builds a field from its barycenter values and elementwise gradients,
    /// both sampled at the barycenters.
    pub fn from_fn<F, G>(mesh: &Mesh, value: F, gradient: G) -> Self
    where
        F: Fn(Point) -> f64,
        G: Fn(Point) -> Point,
    {
        let n = mesh.n_elements();
        let mut out = Self::zeros(n);
        for t in 0..n {
            let xt = mesh.barycenter(t);
            out.values[t] = value(xt);
            out.gradients[t] = gradient(xt);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len(mesh.n_elements(), self.values.len())?;
        check_len(mesh.n_elements(), self.gradients.len())
    }

    /// Value of the restriction to element `t` at `x`.
    #[inline]
    pub fn eval(&self, mesh: &Mesh, t: usize, x: Point) -> f64 {
        self.values[t] + vec2::dot(self.gradients[t], vec2::sub(x, mesh.barycenter(t)))
    }

    /// Elementwise projection onto constants, i.e. the barycenter values.
    pub fn pi0(&self) -> &[f64] {
        &self.values
    }

    pub fn broken_gradient(&self) -> &[Point] {
        &self.gradients
    }

    pub fn axpy(&mut self, a: f64, other: &DgField) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += a * w;
        }
        for (g, h) in self.gradients.iter_mut().zip(&other.gradients) {
            g[0] += a * h[0];
            g[1] += a * h[1];
        }
    }

    pub fn sup_norm(&self, mesh: &Mesh) -> f64 {
        let mut m = 0.0f64;
        for t in 0..self.len() {
            for x in mesh.corners(t) {
                m = m.max(self.eval(mesh, t, x).abs());
            }
        }
        m
    }

    /// Writes one line per element: `T  u(x_T)  g1 g2`.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, (v, g)) in self.values.iter().zip(&self.gradients).enumerate() {
            writeln!(out, "{t}  {v:.17e}  {:.17e} {:.17e}", g[0], g[1])?;
        }
        Ok(())
    }
}

/// Broken Raviart-Thomas field `z|_T = a_T + b_T (x - x_T) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RtField {
    pub constants: Vec<Point>,
    pub divergences: Vec<f64>,
}

impl RtField {
    pub fn zeros(n: usize) -> Self {
        Self {
            constants: vec![[0.0; 2]; n],
            divergences: vec![0.0; n],
        }
    }

    pub fn new(constants: Vec<Point>, divergences: Vec<f64>) -> Result<Self> {
        check_len(constants.len(), divergences.len())?;
        Ok(Self {
            constants,
            divergences,
        })
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len(mesh.n_elements(), self.constants.len())?;
        check_len(mesh.n_elements(), self.divergences.len())
    }

    #[inline]
    pub fn eval(&self, mesh: &Mesh, t: usize, x: Point) -> Point {
        let d = vec2::sub(x, mesh.barycenter(t));
        vec2::add(self.constants[t], vec2::scale(self.divergences[t] / DIM, d))
    }

    /// `z|_T . n_S` on side `side` of element `t` (constant along the side).
    #[inline]
    pub fn normal_trace(&self, mesh: &Mesh, t: usize, side: &Side) -> f64 {
        vec2::dot(self.eval(mesh, t, side.midpoint), side.normal)
    }

    /// Elementwise projection onto constants: `a_T`.
    pub fn pi0(&self) -> &[Point] {
        &self.constants
    }

    pub fn divergence(&self) -> &[f64] {
        &self.divergences
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.constants {
            *a = vec2::scale(s, *a);
        }
        for b in &mut self.divergences {
            *b *= s;
        }
    }

    /// Writes one line per element: `T  a1 a2 b`.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, (a, b)) in self.constants.iter().zip(&self.divergences).enumerate() {
            writeln!(out, "{t}  {:.17e} {:.17e} {b:.17e}", a[0], a[1])?;
        }
        Ok(())
    }
}

/// Per-side jump and average means.
#[derive(Debug, Clone, PartialEq)]
pub struct SideTraces {
    pub jump: Vec<f64>,
    pub average: Vec<f64>,
}

fn traces_from<F: Fn(usize, &Side) -> f64>(sides: &SideSet, trace: F) -> SideTraces {
    let mut jump = Vec::with_capacity(sides.len());
    let mut average = Vec::with_capacity(sides.len());
    for side in sides.iter() {
        let minus = trace(side.minus, side);
        match side.plus {
            Some(p) => {
                let plus = trace(p, side);
                jump.push(minus - plus);
                average.push(0.5 * (minus + plus));
            }
            None => {
                jump.push(minus);
                average.push(minus);
            }
        }
    }
    SideTraces { jump, average }
}

/// Jump and average means of `u`, evaluated at side midpoints. The jump is
/// the trace from the element the normal leaves minus the trace from the
/// element it enters.
pub fn dg_side_traces(u: &DgField, mesh: &Mesh, sides: &SideSet) -> Result<SideTraces> {
    u.check(mesh)?;
    check_len(mesh.n_elements(), sides.n_elements())?;
    Ok(traces_from(sides, |t, s| u.eval(mesh, t, s.midpoint)))
}

/// Jump and average of the normal component `z . n_S` on every side.
pub fn rt_side_traces(z: &RtField, mesh: &Mesh, sides: &SideSet) -> Result<SideTraces> {
    z.check(mesh)?;
    check_len(mesh.n_elements(), sides.n_elements())?;
    Ok(traces_from(sides, |t, s| z.normal_trace(mesh, t, s)))
}

/// Elementwise integral means of a scalar function.
pub fn pi0_project<F>(f: F, mesh: &Mesh, quad: &Quadrature) -> Vec<f64>
where
    F: Fn(Point) -> f64,
{
    (0..mesh.n_elements())
        .map(|t| quad.triangle(&mesh.corners(t), &f) / mesh.area(t))
        .collect()
}

/// Elementwise integral means of a vector field.
pub fn pi0_project_vec<F>(f: F, mesh: &Mesh, quad: &Quadrature) -> Vec<Point>
where
    F: Fn(Point) -> Point,
{
    (0..mesh.n_elements())
        .map(|t| {
            let v = mesh.corners(t);
            let a = mesh.area(t);
            [
                quad.triangle(&v, |x| f(x)[0]) / a,
                quad.triangle(&v, |x| f(x)[1]) / a,
            ]
        })
        .collect()
}

fn side_endpoints(mesh: &Mesh, side: &Side) -> (Point, Point) {
    let v = mesh.vertices();
    (v[side.vertices[0]], v[side.vertices[1]])
}

/// Crouzeix-Raviart quasi-interpolant: the elementwise affine field whose
/// value at every side midpoint is the side mean of `v`.
pub fn cr_interpolate<F>(v: F, mesh: &Mesh, sides: &SideSet, quad: &Quadrature) -> DgField
where
    F: Fn(Point) -> f64,
{
    let means: Vec<f64> = sides
        .iter()
        .map(|s| {
            let (a, b) = side_endpoints(mesh, s);
            quad.segment_mean(a, b, &v)
        })
        .collect();
    let n = mesh.n_elements();
    let mut out = DgField::zeros(n);
    for t in 0..n {
        let ids = sides.element_sides(t);
        let x = ids.map(|s| sides.sides()[s].midpoint);
        let m = ids.map(|s| means[s]);
        out.values[t] = (m[0] + m[1] + m[2]) / 3.0;
        out.gradients[t] = solve2(
            vec2::sub(x[1], x[0]),
            vec2::sub(x[2], x[0]),
            [m[1] - m[0], m[2] - m[0]],
        );
    }
    out
}

/// Raviart-Thomas quasi-interpolant: the field whose constant normal flux on
/// every side equals the side mean of `z . n_S`.
pub fn rt_interpolate<F>(z: F, mesh: &Mesh, sides: &SideSet, quad: &Quadrature) -> RtField
where
    F: Fn(Point) -> Point,
{
    let fluxes: Vec<f64> = sides
        .iter()
        .map(|s| {
            let (a, b) = side_endpoints(mesh, s);
            quad.segment_mean(a, b, |x| vec2::dot(z(x), s.normal))
        })
        .collect();
    rt_from_fluxes(&fluxes, mesh, sides)
}

/// Assembles the broken RT field with prescribed normal fluxes `z . n_S`
/// (in the stored side orientation) from every element.
pub fn rt_from_fluxes(fluxes: &[f64], mesh: &Mesh, sides: &SideSet) -> RtField {
    let n = mesh.n_elements();
    let mut out = RtField::zeros(n);
    for t in 0..n {
        let ids = sides.element_sides(t);
        let xt = mesh.barycenter(t);
        // outer normals and outward fluxes of T
        let mut normals = [[0.0; 2]; 3];
        let mut flux = [0.0; 3];
        let mut boundary_flux = 0.0;
        for (i, &s) in ids.iter().enumerate() {
            let side = &sides.sides()[s];
            let o = side.orientation(t);
            normals[i] = vec2::scale(o, side.normal);
            flux[i] = o * fluxes[s];
            boundary_flux += flux[i] * side.length;
        }
        let b = boundary_flux / mesh.area(t);
        // a . n_i = flux_i - b (x_Si - x_T) . n_i / d for two sides
        let rhs = |i: usize| {
            let xs = sides.sides()[ids[i]].midpoint;
            flux[i] - b * vec2::dot(vec2::sub(xs, xt), normals[i]) / DIM
        };
        let a = solve2_rows(normals[0], normals[1], [rhs(0), rhs(1)]);
        out.constants[t] = a;
        out.divergences[t] = b;
    }
    out
}

/// Solves `[r0; r1] x = rhs` for row vectors `r0`, `r1`.
fn solve2_rows(r0: Point, r1: Point, rhs: [f64; 2]) -> Point {
    let det = vec2::cross(r0, r1);
    [
        (rhs[0] * r1[1] - rhs[1] * r0[1]) / det,
        (r0[0] * rhs[1] - r1[0] * rhs[0]) / det,
    ]
}

/// Solves `g . e0 = rhs[0]`, `g . e1 = rhs[1]`.
fn solve2(e0: Point, e1: Point, rhs: [f64; 2]) -> Point {
    solve2_rows(e0, e1, rhs)
}

/// The four terms of the elementwise integration-by-parts identity.
#[derive(Debug, Clone, Copy)]
pub struct IbpTerms {
    /// `int u div z`
    pub volume_div: f64,
    /// `int grad_h u . z`
    pub volume_grad: f64,
    /// `sum_{S not in Gamma_N} [[u]]_h {z.n} |S|`
    pub jump_average: f64,
    /// `sum_{S not in Gamma_D} {u}_h [[z.n]] |S|`
    pub average_jump: f64,
}

impl IbpTerms {
    pub fn residual(&self) -> f64 {
        self.volume_div + self.volume_grad - self.jump_average - self.average_jump
    }

    pub fn scale(&self) -> f64 {
        self.volume_div.abs()
            + self.volume_grad.abs()
            + self.jump_average.abs()
            + self.average_jump.abs()
    }
}

pub fn ibp_terms(u: &DgField, z: &RtField, mesh: &Mesh, sides: &SideSet) -> Result<IbpTerms> {
    let tu = dg_side_traces(u, mesh, sides)?;
    let tz = rt_side_traces(z, mesh, sides)?;
    let mut volume_div = 0.0;
    let mut volume_grad = 0.0;
    for t in 0..mesh.n_elements() {
        let area = mesh.area(t);
        // int_T u = |T| u(x_T); int_T (x - x_T) = 0
        volume_div += area * u.values[t] * z.divergences[t];
        volume_grad += area * vec2::dot(u.gradients[t], z.constants[t]);
    }
    let mut jump_average = 0.0;
    let mut average_jump = 0.0;
    for (s, side) in sides.iter().enumerate() {
        if side.outside_neumann() {
            jump_average += tu.jump[s] * tz.average[s] * side.length;
        }
        if side.outside_dirichlet() {
            average_jump += tu.average[s] * tz.jump[s] * side.length;
        }
    }
    Ok(IbpTerms {
        volume_div,
        volume_grad,
        jump_average,
        average_jump,
    })
}

/// Residual of the discrete integration-by-parts identity; zero up to
/// rounding for every pair of fields.
pub fn ibp_residual(u: &DgField, z: &RtField, mesh: &Mesh, sides: &SideSet) -> Result<f64> {
    Ok(ibp_terms(u, z, mesh, sides)?.residual())
}

/// `||h_S psi||_{L^s(S_h)}^s / ||psi||_{L^s(Omega)}^s` for an elementwise
/// affine `psi`, evaluated with quadrature exact for `s = 2`. Used to
/// monitor the discrete trace inequality constant.
pub fn trace_ratio(psi: &DgField, mesh: &Mesh, sides: &SideSet, s: f64) -> Result<f64> {
    psi.check(mesh)?;
    let q = Quadrature::degree(6);
    let mut skeleton = 0.0;
    for side in sides.iter() {
        let (a, b) = side_endpoints(mesh, side);
        let h = side.length;
        for t in std::iter::once(side.minus).chain(side.plus) {
            skeleton += q.segment(a, b, |x| (h * psi.eval(mesh, t, x)).abs().powf(s));
        }
    }
    let mut volume = 0.0;
    for t in 0..mesh.n_elements() {
        volume += q.triangle(&mesh.corners(t), |x| psi.eval(mesh, t, x).abs().powf(s));
    }
    Ok(skeleton / volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(level: u32) -> (Mesh, SideSet) {
        let m = Mesh::structured(Rect::centered_square(1.0), level).unwrap();
        let s = SideSet::all_dirichlet(&m).unwrap();
        (m, s)
    }

    fn random_dg(n: usize, rng: &mut ChaCha8Rng) -> DgField {
        DgField {
            values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            gradients: (0..n)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
        }
    }

    fn random_rt(n: usize, rng: &mut ChaCha8Rng) -> RtField {
        RtField {
            constants: (0..n)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
            divergences: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn pi0_of_constants_and_affine() {
        let (m, _) = setup(0);
        let q = Quadrature::default();
        assert!(pi0_project(|_| 3.0, &m, &q).iter().all(|v| (v - 3.0).abs() < 1e-15));
        let p = pi0_project(|x| x[0], &m, &q);
        for t in 0..m.n_elements() {
            assert!((p[t] - m.barycenter(t)[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn pi0_is_self_adjoint_on_polynomials() {
        let (m, _) = setup(2);
        let q = Quadrature::degree(5);
        let f = |x: Point| x[0] * x[0] - x[1];
        let g = |x: Point| 1.0 + x[0] * x[1];
        let pf = pi0_project(f, &m, &q);
        let pg = pi0_project(g, &m, &q);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for t in 0..m.n_elements() {
            let v = m.corners(t);
            lhs += pf[t] * q.triangle(&v, g);
            rhs += pg[t] * q.triangle(&v, f);
        }
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn jumps_of_affine_field_vanish() {
        let (m, s) = setup(3);
        let u = DgField::from_fn(&m, |x| 0.3 + x[0] - 2.0 * x[1], |_| [1.0, -2.0]);
        let tr = dg_side_traces(&u, &m, &s).unwrap();
        for (i, side) in s.iter().enumerate() {
            if !side.is_boundary() {
                assert!(tr.jump[i].abs() < 1e-14);
            } else {
                assert_eq!(tr.jump[i], tr.average[i]);
            }
        }
    }

    #[test]
    fn unit_jump_across_diagonal() {
        let (m, s) = setup(0);
        let u = DgField::new(vec![0.0, 1.0], vec![[0.0; 2]; 2]).unwrap();
        let tr = dg_side_traces(&u, &m, &s).unwrap();
        let diag = s.iter().position(|s| !s.is_boundary()).unwrap();
        assert_eq!(tr.jump[diag].abs(), 1.0);
        assert_eq!(tr.average[diag], 0.5);
    }

    #[test]
    fn rt_unit_jump_on_vertical_side() {
        // [-1,1] x [0,1] split into two squares; elements 0 and 3 share x = 0
        let vertices = vec![
            [-1.0, 0.0],
            [0.0, 0.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [1.0, 0.0],
            [1.0, 1.0],
        ];
        let triangles = vec![[0, 1, 2], [0, 2, 3], [1, 4, 5], [1, 5, 2]];
        let m = Mesh::from_parts(vertices, triangles, Rect::new(-1.0, 1.0, 0.0, 1.0)).unwrap();
        let s = SideSet::all_dirichlet(&m).unwrap();
        let mut constants = vec![[0.0; 2]; 4];
        constants[0] = [1.0, 0.0];
        let z = RtField::new(constants, vec![0.0; 4]).unwrap();
        let tr = rt_side_traces(&z, &m, &s).unwrap();
        let k = s
            .iter()
            .position(|side| side.minus == 0 && side.plus == Some(3))
            .unwrap();
        assert_eq!(s.sides()[k].normal, [1.0, 0.0]);
        assert_eq!(tr.jump[k], 1.0);
        assert_eq!(tr.average[k], 0.5);
    }

    #[test]
    fn constant_rt_field_has_no_normal_jumps() {
        let (m, s) = setup(3);
        let z = RtField::new(vec![[0.4, -1.2]; m.n_elements()], vec![0.0; m.n_elements()]).unwrap();
        let tr = rt_side_traces(&z, &m, &s).unwrap();
        for (i, side) in s.iter().enumerate() {
            if !side.is_boundary() {
                assert!(tr.jump[i].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cr_reproduces_affine() {
        let (m, s) = setup(2);
        let q = Quadrature::default();
        let u = cr_interpolate(|x| 1.0 + x[0] + 2.0 * x[1], &m, &s, &q);
        for t in 0..m.n_elements() {
            for x in m.corners(t) {
                assert!((u.eval(&m, t, x) - (1.0 + x[0] + 2.0 * x[1])).abs() < 1e-14);
            }
            assert!(vec2::norm(vec2::sub(u.gradients[t], [1.0, 2.0])) < 1e-13);
        }
    }

    #[test]
    fn cr_projection_property_for_polynomials() {
        let (m, s) = setup(3);
        let q = Quadrature::degree(5);
        type Case = (fn(Point) -> f64, fn(Point) -> Point);
        let cases: [Case; 5] = [
            (|_| 1.0, |_| [0.0, 0.0]),
            (|x| x[0], |_| [1.0, 0.0]),
            (|x| x[1], |_| [0.0, 1.0]),
            (|x| x[0] * x[1], |x| [x[1], x[0]]),
            (|x| x[0] * x[0], |x| [2.0 * x[0], 0.0]),
        ];
        for (v, dv) in cases {
            let u = cr_interpolate(v, &m, &s, &q);
            let pg = pi0_project_vec(dv, &m, &q);
            for t in 0..m.n_elements() {
                assert!(vec2::norm(vec2::sub(u.gradients[t], pg[t])) < 1e-12);
            }
        }
    }

    #[test]
    fn rt_reproduces_constants_and_identity() {
        let (m, s) = setup(2);
        let q = Quadrature::default();
        let z = rt_interpolate(|_| [1.0, 0.0], &m, &s, &q);
        for t in 0..m.n_elements() {
            assert!(vec2::norm(vec2::sub(z.constants[t], [1.0, 0.0])) < 1e-14);
            assert!(z.divergences[t].abs() < 1e-13);
        }
        let z = rt_interpolate(|x| x, &m, &s, &q);
        for t in 0..m.n_elements() {
            assert!((z.divergences[t] - 2.0).abs() < 1e-13);
            // x = x_T + (x - x_T) with b = 2 and a = x_T
            assert!(vec2::norm(vec2::sub(z.constants[t], m.barycenter(t))) < 1e-13);
        }
        let tr = rt_side_traces(&z, &m, &s).unwrap();
        for (i, side) in s.iter().enumerate() {
            if !side.is_boundary() {
                assert!(tr.jump[i].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rt_divergence_round_trip() {
        let (m, _) = setup(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_rt(m.n_elements(), &mut rng);
        let copy = RtField::new(z.constants.clone(), z.divergences.clone()).unwrap();
        assert_eq!(copy.divergence(), z.divergence());
        // the shape function reproduces div (b (x - x_T) / 2) = b
        for t in 0..m.n_elements() {
            let xt = m.barycenter(t);
            let e = 1e-3;
            let dx = vec2::sub(z.eval(&m, t, [xt[0] + e, xt[1]]), z.eval(&m, t, xt))[0] / e;
            let dy = vec2::sub(z.eval(&m, t, [xt[0], xt[1] + e]), z.eval(&m, t, xt))[1] / e;
            assert!((dx + dy - z.divergences[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn ibp_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for level in 0..4 {
            let (m, s) = setup(level);
            for _ in 0..20 {
                let u = random_dg(m.n_elements(), &mut rng);
                let z = random_rt(m.n_elements(), &mut rng);
                let terms = ibp_terms(&u, &z, &m, &s).unwrap();
                assert!(terms.residual().abs() <= 1e-12 * terms.scale().max(1.0));
            }
        }
    }

    #[test]
    fn ibp_with_mixed_boundary() {
        let m = Mesh::structured(Rect::centered_square(1.0), 2).unwrap();
        let s = SideSet::build(&m, |x, _| {
            if x[1] > 0.999 {
                crate::mesh::BoundaryTag::Neumann
            } else {
                crate::mesh::BoundaryTag::Dirichlet
            }
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_dg(m.n_elements(), &mut rng);
        let z = random_rt(m.n_elements(), &mut rng);
        let terms = ibp_terms(&u, &z, &m, &s).unwrap();
        assert!(terms.residual().abs() <= 1e-12 * terms.scale());
    }

    #[test]
    fn mismatched_mesh_rejected() {
        let (m, s) = setup(1);
        let u = DgField::zeros(3);
        assert!(matches!(
            dg_side_traces(&u, &m, &s),
            Err(Error::MeshMismatch { .. })
        ));
        let z = RtField::zeros(m.n_elements());
        assert!(ibp_residual(&u, &z, &m, &s).is_err());
    }

    #[test]
    fn dump_lines() {
        let u = DgField::zeros(4);
        let mut buf = Vec::new();
        u.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
