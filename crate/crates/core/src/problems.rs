//! The benchmark experiments: data, exact primal and dual solutions,
//! parameter grids, error norms and convergence orders.

use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{self, DgField, RtField};
use crate::functionals::{JumpVariant, PenaltyParams, ProblemData, ProblemKind, ProblemSpec, ScalarFn};
use crate::mesh::{Mesh, Rect, SideSet};
use crate::quadrature::{Circle, Quadrature};
use crate::vec2::{self, Point};

pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Which error quantity a convergence study reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// `||grad_h(u - u_h)||`
    BrokenH1VsExact,
    /// `||Pi_h(u - u_h)||`
    L2Pi0,
    /// `||grad_h(u_h - I_h u)||` with the Crouzeix-Raviart interpolant.
    BrokenH1VsInterp,
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorNorm::BrokenH1VsExact => "brokenH1_vs_exact",
            ErrorNorm::L2Pi0 => "L2_pi0",
            ErrorNorm::BrokenH1VsInterp => "brokenH1_vs_interp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub gammas: Vec<f64>,
    /// Values of `1 / c_alpha`.
    pub c_alpha_inv: Vec<f64>,
    pub rs: Vec<f64>,
}

impl ParameterGrid {
    /// All `(gamma, c_alpha, r)` combinations, `r` slowest, then `c_alpha`.
    pub fn combinations(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &r in &self.rs {
            for &ci in &self.c_alpha_inv {
                for &g in &self.gammas {
                    out.push((g, 1.0 / ci, r));
                }
            }
        }
        out
    }
}

/// One benchmark: the problem, its exact solutions and the study setup.
#[derive(Clone)]
pub struct ExperimentCase {
    pub spec: ProblemSpec,
    pub domain: Rect,
    pub exact: ScalarFn,
    /// Gradient of the exact solution wherever it is differentiable.
    pub exact_gradient: VectorFn,
    /// Laplacian of the exact solution away from its singular set.
    pub exact_laplacian: ScalarFn,
    pub exact_dual: Option<VectorFn>,
    pub exact_dual_divergence: Option<ScalarFn>,
    /// Circle across which the exact solution is not smooth.
    pub interface: Option<Circle>,
    pub grid: ParameterGrid,
    pub levels: RangeInclusive<u32>,
    pub norm: ErrorNorm,
    pub jump: JumpVariant,
    /// Quadrature for errors and for interpolating exact duals.
    pub quadrature: Quadrature,
}

impl fmt::Debug for ExperimentCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExperimentCase")
            .field("kind", &self.kind())
            .field("domain", &self.domain)
            .field("grid", &self.grid)
            .field("levels", &self.levels)
            .field("norm", &self.norm)
            .finish()
    }
}

impl ExperimentCase {
    pub fn kind(&self) -> ProblemKind {
        self.spec.kind()
    }

    pub fn mesh(&self, level: u32) -> Result<(Mesh, SideSet)> {
        let mesh = Mesh::structured(self.domain, level)?;
        let sides = self.spec.side_set(&mesh)?;
        Ok((mesh, sides))
    }

    /// Error of an approximation `u_h` of the exact solution in the case's
    /// norm.
    pub fn error(&self, u_h: &DgField, mesh: &Mesh, sides: &SideSet) -> f64 {
        error_norm(
            self.norm,
            &*self.exact,
            &*self.exact_gradient,
            u_h,
            mesh,
            sides,
            &self.quadrature,
        )
    }
}

/// Refinement depth of cut-cell quadrature at circular interfaces.
const CUT_LEVELS: u32 = 10;

/// Smooth data: `u = sin(pi x1) sin(pi x2)` on `(-1, 1)^2`.
pub fn poisson_case() -> ExperimentCase {
    let exact: ScalarFn = Arc::new(|x: Point| (PI * x[0]).sin() * (PI * x[1]).sin());
    let f: ScalarFn = Arc::new(|x: Point| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
    let grad: VectorFn = Arc::new(|x: Point| {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    });
    let lap: ScalarFn = Arc::new(|x: Point| -2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
    // the dual solution is the flux grad u with div z = -f
    let neg_f = f.clone();
    let quad = Quadrature::degree(21);
    ExperimentCase {
        spec: ProblemSpec::new(ProblemData::Poisson { f }).with_quadrature(quad.clone()),
        domain: Rect::centered_square(1.0),
        exact,
        exact_gradient: grad.clone(),
        exact_laplacian: lap,
        exact_dual: Some(grad),
        exact_dual_divergence: Some(Arc::new(move |x| -neg_f(x))),
        interface: None,
        grid: ParameterGrid {
            gammas: vec![0.5, 1.0, 1.5, 2.0],
            c_alpha_inv: vec![1.0, 4.0],
            rs: vec![2.0],
        },
        levels: 2..=7,
        norm: ErrorNorm::BrokenH1VsExact,
        jump: JumpVariant::Full,
        quadrature: quad,
    }
}

pub const TV_ALPHA: f64 = 10.0;
pub const TV_RADIUS: f64 = 0.5;

/// Height of the plateau `max{1 - 2/(alpha R), 0}` solving the TV problem
/// with datum the indicator of the disc of radius `R`.
pub fn tv_plateau(alpha: f64, radius: f64) -> f64 {
    (1.0 - 2.0 / (alpha * radius)).max(0.0)
}

/// Indicator datum of a disc on `(-1, 1)^2`, homogeneous Dirichlet data.
pub fn tv_case() -> ExperimentCase {
    let (alpha, radius) = (TV_ALPHA, TV_RADIUS);
    let height = tv_plateau(alpha, radius);
    let g: ScalarFn = Arc::new(move |x: Point| if vec2::norm(x) < radius { 1.0 } else { 0.0 });
    let exact: ScalarFn = Arc::new(move |x: Point| if vec2::norm(x) < radius { height } else { 0.0 });
    // Continuous across |x| = R; this orientation satisfies
    // u = g + div z / alpha and closes the duality gap.
    let dual: VectorFn = Arc::new(move |x: Point| {
        let r2 = vec2::dot(x, x);
        if r2 <= radius * radius {
            vec2::scale(-1.0 / radius, x)
        } else {
            vec2::scale(-radius / r2, x)
        }
    });
    let div: ScalarFn = Arc::new(move |x: Point| if vec2::norm(x) < radius { -2.0 / radius } else { 0.0 });
    let circle = Circle::new([0.0, 0.0], radius);
    let quad = Quadrature::degree(5).with_cut(circle, CUT_LEVELS);
    ExperimentCase {
        spec: ProblemSpec::new(ProblemData::Tv {
            g,
            alpha,
            epsilon: 0.0,
        })
        .with_quadrature(quad.clone()),
        domain: Rect::centered_square(1.0),
        exact,
        exact_gradient: Arc::new(|_| [0.0, 0.0]),
        exact_laplacian: Arc::new(|_| 0.0),
        exact_dual: Some(dual),
        exact_dual_divergence: Some(div),
        interface: Some(circle),
        grid: ParameterGrid {
            gammas: vec![0.0, 1.0, 2.0],
            c_alpha_inv: vec![10.0],
            rs: vec![1.0, 2.0],
        },
        levels: 2..=6,
        norm: ErrorNorm::L2Pi0,
        jump: JumpVariant::Mean,
        quadrature: quad,
    }
}

/// `|x|^2/2 - log|x| - 1/2` outside the unit disc, zero inside.
pub fn obstacle_exact(x: Point) -> f64 {
    let r2 = vec2::dot(x, x);
    if r2 <= 1.0 {
        0.0
    } else {
        0.5 * r2 - 0.5 * r2.ln() - 0.5
    }
}

/// Obstacle `chi = 0`, load `f = -2` on `(-3/2, 3/2)^2`; the exact solution
/// serves as extension of the Dirichlet data.
pub fn obstacle_case() -> ExperimentCase {
    let exact: ScalarFn = Arc::new(obstacle_exact);
    let grad: VectorFn = Arc::new(|x: Point| {
        let r2 = vec2::dot(x, x);
        if r2 <= 1.0 {
            [0.0, 0.0]
        } else {
            vec2::sub(x, vec2::scale(1.0 / r2, x))
        }
    });
    let lap: ScalarFn = Arc::new(|x: Point| if vec2::dot(x, x) > 1.0 { 2.0 } else { 0.0 });
    let circle = Circle::new([0.0, 0.0], 1.0);
    let quad = Quadrature::degree(13).with_cut(circle, CUT_LEVELS);
    let div = lap.clone();
    ExperimentCase {
        spec: ProblemSpec::new(ProblemData::Obstacle {
            f: Arc::new(|_| -2.0),
            chi: Arc::new(|_| 0.0),
            u_d: Some(exact.clone()),
        })
        .with_quadrature(quad.clone()),
        domain: Rect::centered_square(1.5),
        exact,
        exact_gradient: grad.clone(),
        exact_laplacian: lap,
        exact_dual: Some(grad),
        exact_dual_divergence: Some(div),
        interface: Some(circle),
        grid: ParameterGrid {
            gammas: vec![1.0, 1.5],
            c_alpha_inv: vec![1.0, 4.0],
            rs: vec![2.0],
        },
        levels: 2..=6,
        norm: ErrorNorm::BrokenH1VsInterp,
        jump: JumpVariant::Full,
        quadrature: quad,
    }
}

pub fn catalog() -> Vec<ExperimentCase> {
    vec![poisson_case(), tv_case(), obstacle_case()]
}

pub fn case(kind: ProblemKind) -> ExperimentCase {
    match kind {
        ProblemKind::Poisson => poisson_case(),
        ProblemKind::Tv => tv_case(),
        ProblemKind::Obstacle => obstacle_case(),
    }
}

const CERTIFICATE_DEGREE: u32 = 21;

/// Dual certificate built from the exact dual solution: its
/// Raviart-Thomas interpolant, for TV scaled by
/// `max{1, max_T |Pi_h z|, max_S alpha_S |{z . n_S}|}` (side term for
/// `r = 1` only) so that it is admissible.
pub fn dual_certificate(
    case: &ExperimentCase,
    mesh: &Mesh,
    sides: &SideSet,
    params: &PenaltyParams,
) -> Result<Option<RtField>> {
    let Some(z) = &case.exact_dual else {
        return Ok(None);
    };
    // side rules are cheap; a coarse one can leave the certificate
    // infeasible by quadrature error on coarse meshes
    let mut quad = Quadrature::degree(case.quadrature.exactness().max(CERTIFICATE_DEGREE));
    if let Some(c) = case.quadrature.cut() {
        quad = quad.with_cut(c, 0);
    }
    let mut field = fem::rt_interpolate(|x| z(x), mesh, sides, &quad);
    if case.kind() == ProblemKind::Tv {
        let mut scale = field.constants.iter().fold(1.0f64, |m, a| m.max(vec2::norm(*a)));
        if params.r == 1.0 {
            let traces = fem::rt_side_traces(&field, mesh, sides)?;
            for (k, side) in sides.iter().enumerate() {
                if side.outside_neumann() {
                    scale = scale.max(params.alpha(side.length) * traces.average[k].abs());
                }
            }
        }
        field.scale(1.0 / scale);
    }
    Ok(Some(field))
}

/// Evaluates the selected error norm with the given quadrature.
pub fn error_norm(
    selector: ErrorNorm,
    exact: &(dyn Fn(Point) -> f64 + Send + Sync),
    exact_gradient: &(dyn Fn(Point) -> Point + Send + Sync),
    u_h: &DgField,
    mesh: &Mesh,
    sides: &SideSet,
    quad: &Quadrature,
) -> f64 {
    let n = mesh.n_elements();
    let local: Vec<f64> = match selector {
        ErrorNorm::BrokenH1VsExact => (0..n)
            .into_par_iter()
            .map(|t| {
                let g = u_h.gradients[t];
                quad.triangle(&mesh.corners(t), |x| {
                    let d = vec2::sub(exact_gradient(x), g);
                    vec2::dot(d, d)
                })
            })
            .collect(),
        ErrorNorm::L2Pi0 => (0..n)
            .into_par_iter()
            .map(|t| {
                let mean = quad.triangle(&mesh.corners(t), exact) / mesh.area(t);
                mesh.area(t) * (mean - u_h.values[t]).powi(2)
            })
            .collect(),
        ErrorNorm::BrokenH1VsInterp => {
            let iu = fem::cr_interpolate(exact, mesh, sides, quad);
            (0..n)
                .map(|t| {
                    let d = vec2::sub(u_h.gradients[t], iu.gradients[t]);
                    mesh.area(t) * vec2::dot(d, d)
                })
                .collect()
        }
    };
    // fixed summation order
    local.iter().sum::<f64>().sqrt()
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: u32,
    pub n_elements: usize,
    pub h: f64,
    pub error: f64,
    /// `log2(e_{l-1} / e_l)`; absent on the first level.
    pub eoc: Option<f64>,
}

/// Fills in the incremental orders of a table sorted by level.
pub fn fill_eoc(records: &mut [ErrorRecord]) {
    for i in 0..records.len() {
        records[i].eoc = if i == 0 {
            None
        } else {
            Some((records[i - 1].error / records[i].error).ln() / 2f64.ln())
        };
    }
}

/// Median of the last three available orders (fewer if the table is short).
pub fn observed_order(records: &[ErrorRecord]) -> Option<f64> {
    let eocs: Vec<f64> = records.iter().filter_map(|r| r.eoc).collect();
    if eocs.is_empty() {
        return None;
    }
    let mut tail: Vec<f64> = eocs[eocs.len().saturating_sub(3)..].to_vec();
    tail.sort_by(f64::total_cmp);
    let m = tail.len();
    Some(if m % 2 == 1 {
        tail[m / 2]
    } else {
        0.5 * (tail[m / 2 - 1] + tail[m / 2])
    })
}

/// Residuals of the exact solutions of a case at sampled points.
#[derive(Debug, Clone, Default)]
pub struct SanityReport {
    /// `max |-Delta u - f|` away from the interface.
    pub pde_residual: f64,
    /// `max (|z| - 1)` (TV only).
    pub dual_bound_excess: f64,
    /// `max |div z - exact divergence|` by central differences.
    pub divergence_mismatch: f64,
    /// `max (chi - u)` (obstacle only).
    pub obstacle_violation: f64,
    /// `max |u - u_D|` on the boundary (obstacle only).
    pub boundary_mismatch: f64,
    /// Relative difference of continuous primal and dual energies (TV only).
    pub duality_mismatch: f64,
}

fn interior_sample(rng: &mut ChaCha8Rng, domain: &Rect, avoid: Option<Circle>, margin: f64) -> Point {
    loop {
        let x = [
            rng.random_range(domain.x0 + margin..domain.x1 - margin),
            rng.random_range(domain.y0 + margin..domain.y1 - margin),
        ];
        match avoid {
            Some(c) if (vec2::norm(vec2::sub(x, c.center)) - c.radius).abs() < margin => continue,
            _ => return x,
        }
    }
}

/// Continuous primal and dual TV energies of the exact pair, with
/// `|Du|(Omega) = height * perimeter` and the volume terms by cut-cell
/// quadrature.
pub fn tv_continuous_energies(case: &ExperimentCase, level: u32) -> Result<(f64, f64)> {
    let ProblemData::Tv { g, alpha, .. } = &case.spec.data else {
        return Err(Error::InvalidParams("not a TV case".into()));
    };
    let circle = case
        .interface
        .ok_or_else(|| Error::InvalidParams("TV case without interface".into()))?;
    let (Some(div), Some(_)) = (&case.exact_dual_divergence, &case.exact_dual) else {
        return Err(Error::InvalidParams("TV case without exact dual".into()));
    };
    let mesh = Mesh::structured(case.domain, level)?;
    let quad = &case.quadrature;
    let height = (case.exact)(circle.center);
    let mut misfit = 0.0;
    let mut dual = 0.0;
    for t in 0..mesh.n_elements() {
        let v = mesh.corners(t);
        misfit += quad.triangle(&v, |x| ((case.exact)(x) - g(x)).powi(2));
        dual += quad.triangle(&v, |x| {
            let gx = g(x);
            -(div(x) + alpha * gx).powi(2) / (2.0 * alpha) + 0.5 * alpha * gx * gx
        });
    }
    let primal = height * 2.0 * PI * circle.radius + 0.5 * alpha * misfit;
    Ok((primal, dual))
}

/// Checks that the exact solutions of `case` solve their problem.
pub fn sanity_check(case: &ExperimentCase, seed: u64) -> Result<SanityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SanityReport::default();
    let margin = 1e-3;
    let h = 1e-5;
    for _ in 0..100 {
        let x = interior_sample(&mut rng, &case.domain, case.interface, margin);
        let lap = (case.exact_laplacian)(x);
        match &case.spec.data {
            ProblemData::Poisson { f } => {
                rep.pde_residual = rep.pde_residual.max((-lap - f(x)).abs());
            }
            ProblemData::Obstacle { f, chi, .. } => {
                rep.obstacle_violation = rep.obstacle_violation.max(chi(x) - (case.exact)(x));
                if (case.exact)(x) > 0.0 {
                    rep.pde_residual = rep.pde_residual.max((-lap - f(x)).abs());
                }
            }
            ProblemData::Tv { .. } => {}
        }
        if let (Some(z), Some(div)) = (&case.exact_dual, &case.exact_dual_divergence) {
            if case.kind() == ProblemKind::Tv {
                rep.dual_bound_excess = rep.dual_bound_excess.max(vec2::norm(z(x)) - 1.0);
            }
            let fd = (z([x[0] + h, x[1]])[0] - z([x[0] - h, x[1]])[0]
                + z([x[0], x[1] + h])[1]
                - z([x[0], x[1] - h])[1])
                / (2.0 * h);
            rep.divergence_mismatch = rep.divergence_mismatch.max((fd - div(x)).abs());
        }
    }
    if let ProblemData::Obstacle { u_d: Some(u_d), .. } = &case.spec.data {
        let d = case.domain;
        for _ in 0..100 {
            let s: f64 = rng.random_range(0.0..1.0);
            let x = match rng.random_range(0..4) {
                0 => [d.x0 + s * d.width(), d.y0],
                1 => [d.x1, d.y0 + s * d.height()],
                2 => [d.x0 + s * d.width(), d.y1],
                _ => [d.x0, d.y0 + s * d.height()],
            };
            let r2 = vec2::dot(x, x);
            let formula = 0.5 * r2 - 0.5 * r2.ln() - 0.5;
            rep.boundary_mismatch = rep.boundary_mismatch.max((u_d(x) - formula).abs());
        }
    }
    if case.kind() == ProblemKind::Tv {
        let (primal, dual) = tv_continuous_energies(case, 4)?;
        rep.duality_mismatch = (primal - dual).abs() / primal.abs();
    }
    Ok(rep)
}

impl SanityReport {
    /// Fails if any residual exceeds its tolerance: `1e-12` for closed-form
    /// identities, `1e-6` for difference quotients and `1e-4` for quadrature.
    pub fn verify(&self) -> Result<()> {
        let checks = [
            ("PDE residual", self.pde_residual, 1e-12),
            ("dual bound", self.dual_bound_excess, 1e-12),
            ("dual divergence", self.divergence_mismatch, 1e-6),
            ("obstacle", self.obstacle_violation, 1e-12),
            ("boundary data", self.boundary_mismatch, 1e-12),
            ("continuous duality", self.duality_mismatch, 1e-4),
        ];
        for (name, value, tol) in checks {
            if !(value <= tol) {
                return Err(Error::Config(format!(
                    "{name} check failed: {value:.3e} > {tol:.0e}"
                )));
            }
        }
        Ok(())
    }
}

/// The catalog with every case's exact solutions verified.
pub fn checked_catalog(seed: u64) -> Result<Vec<ExperimentCase>> {
    let cases = catalog();
    for c in &cases {
        sanity_check(c, seed)?.verify()?;
    }
    Ok(cases)
}
