//! Minimization algorithms: a direct sparse solve for the quadratic DG
//! Poisson energy, a lagged-diffusivity gradient flow for regularized total
//! variation, and a primal-dual active set iteration for the obstacle
//! problem.
//!
//! Unknowns are ordered per element as `(Pi_h u, d1 u, d2 u)` in the basis
//! `{1, x1 - x_T1, x2 - x_T2}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::fem::{self, DgField};
use crate::functionals::{self, DiscreteProblem, JumpVariant, PenaltyParams};
use crate::linalg::{self, Cholesky, SparseMatrix, TripletBuilder};
use crate::mesh::{Mesh, Side, SideSet};
use crate::quadrature;
use crate::vec2::{self, Point};

/// Bound on the normwise backward error of every linear solve.
pub const LINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Single direct solve.
    Direct,
    Converged,
    NotConverged,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Direct => "direct",
            StopReason::Converged => "converged",
            StopReason::NotConverged => "not converged",
        })
    }
}

/// Residuals of the discrete complementarity system
/// `lambda >= 0`, `Pi_h u >= chi`, `lambda (Pi_h u - chi) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complementarity {
    pub min_multiplier: f64,
    pub min_slack: f64,
    pub max_product: f64,
}

impl Complementarity {
    pub fn max_violation(&self) -> f64 {
        (-self.min_multiplier).max(-self.min_slack).max(self.max_product).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Backward error of the linear solve for direct solves, last
    /// increment otherwise.
    pub residual: f64,
    pub energy: f64,
    pub stop: StopReason,
    /// Energy of every iterate, starting with the initial one.
    pub energy_history: Vec<f64>,
    /// Largest relative energy increase between consecutive iterates.
    pub max_energy_increase: f64,
    /// Number of elements entering or leaving the active set per iteration.
    pub active_set_changes: Vec<usize>,
    /// Multiplier densities per element (obstacle only).
    pub multipliers: Vec<f64>,
    pub complementarity: Option<Complementarity>,
}

impl SolveReport {
    fn new(stop: StopReason) -> Self {
        Self {
            iterations: 0,
            residual: 0.0,
            energy: 0.0,
            stop,
            energy_history: Vec::new(),
            max_energy_increase: 0.0,
            active_set_changes: Vec::new(),
            multipliers: Vec::new(),
            complementarity: None,
        }
    }

    pub fn converged(&self) -> bool {
        self.stop != StopReason::NotConverged
    }

    pub const CSV_HEADER: &'static str = "iterations,residual,energy,stop";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{}",
            self.iterations, self.residual, self.energy, self.stop
        )
    }
}

/// Quadrature points on a side for the jump penalty: the midpoint for mean
/// jumps, two Gauss points (exact for squared affine jumps) for full jumps.
fn side_points(side: &Side, mesh: &Mesh, jump: JumpVariant) -> Vec<(Point, f64)> {
    match jump {
        JumpVariant::Mean => vec![(side.midpoint, side.length)],
        JumpVariant::Full => {
            let [a, b] = side.vertices.map(|v| mesh.vertices()[v]);
            quadrature::gauss_legendre(2)
                .into_iter()
                .map(|(t, w)| (vec2::add(a, vec2::scale(t, vec2::sub(b, a))), w * side.length))
                .collect()
        }
    }
}

fn dofs(t: usize) -> [usize; 3] {
    [3 * t, 3 * t + 1, 3 * t + 2]
}

fn basis(mesh: &Mesh, t: usize, x: Point) -> [f64; 3] {
    let d = vec2::sub(x, mesh.barycenter(t));
    [1.0, d[0], d[1]]
}

/// Adds `w q(x)^2` where `q` is the jump (`sign = -1`) or twice the average
/// (`sign = +1`) of the trace at `x`.
fn add_trace_square(b: &mut TripletBuilder, mesh: &Mesh, side: &Side, x: Point, w: f64, sign: f64) {
    let m = side.minus;
    let bm = basis(mesh, m, x);
    b.add_outer(&dofs(m), &bm, &dofs(m), &bm, w);
    if let Some(p) = side.plus {
        let bp = basis(mesh, p, x);
        b.add_outer(&dofs(m), &bm, &dofs(p), &bp, sign * w);
        b.add_outer(&dofs(p), &bp, &dofs(m), &bm, sign * w);
        b.add_outer(&dofs(p), &bp, &dofs(p), &bp, w);
    }
}

/// Weights of a quadratic DG energy
/// `1/2 sum_T |T| (w_T |grad u|^2 + m_T (Pi u)^2)
///  + 1/2 sum_S k_S int_S |[[u]]|^2 + 1/2 sum_S b_S |{u}_h|^2 h_S`.
struct QuadraticWeights<'a> {
    gradient: &'a [f64],
    mass: &'a [f64],
    jump: &'a [f64],
    average: &'a [f64],
}

fn assemble(mesh: &Mesh, sides: &SideSet, w: &QuadraticWeights, variant: JumpVariant) -> TripletBuilder {
    let n = mesh.n_elements();
    let mut b = TripletBuilder::new(3 * n);
    for t in 0..n {
        let area = mesh.area(t);
        b.add(3 * t, 3 * t, area * w.mass[t]);
        b.add(3 * t + 1, 3 * t + 1, area * w.gradient[t]);
        b.add(3 * t + 2, 3 * t + 2, area * w.gradient[t]);
    }
    for (k, side) in sides.iter().enumerate() {
        if side.outside_neumann() {
            for (x, qw) in side_points(side, mesh, variant) {
                add_trace_square(&mut b, mesh, side, x, qw * w.jump[k], -1.0);
            }
        }
        if side.outside_dirichlet() && w.average[k] != 0.0 {
            // {u} = (u- + u+) / 2 on interior sides
            let scale = if side.is_boundary() { 1.0 } else { 0.25 };
            add_trace_square(&mut b, mesh, side, side.midpoint, scale * w.average[k] * side.length, 1.0);
        }
    }
    b
}

fn check_quadratic(params: &PenaltyParams) -> Result<()> {
    params.validate()?;
    if params.c_alpha <= 0.0 {
        return Err(Error::SingularSystem(
            "c_alpha = 0 leaves jumps unpenalized; the DG system is singular".into(),
        ));
    }
    if params.r != 2.0 {
        return Err(Error::InvalidParams(format!(
            "quadratic solvers need r = 2 (got r = {})",
            params.r
        )));
    }
    if params.c_beta > 0.0 && params.s != 2.0 {
        return Err(Error::InvalidParams("average penalty needs s = 2".into()));
    }
    Ok(())
}

fn quadratic_side_weights(sides: &SideSet, params: &PenaltyParams) -> (Vec<f64>, Vec<f64>) {
    let jump = sides
        .iter()
        .map(|s| params.alpha(s.length).powi(-2))
        .collect();
    let average = sides
        .iter()
        .map(|s| params.beta(s.length).powi(2))
        .collect();
    (jump, average)
}

/// Load vector of `sum_T |T| (f_T Pi u - d_T . grad u)`.
fn load_vector(mesh: &Mesh, f_h: &[f64], shift: Option<&[Point]>) -> Vec<f64> {
    let mut rhs = vec![0.0; 3 * mesh.n_elements()];
    for t in 0..mesh.n_elements() {
        let area = mesh.area(t);
        rhs[3 * t] = area * f_h[t];
        if let Some(d) = shift {
            rhs[3 * t + 1] = -area * d[t][0];
            rhs[3 * t + 2] = -area * d[t][1];
        }
    }
    rhs
}

fn field_from(x: &[f64]) -> DgField {
    let n = x.len() / 3;
    DgField {
        values: (0..n).map(|t| x[3 * t]).collect(),
        gradients: (0..n).map(|t| [x[3 * t + 1], x[3 * t + 2]]).collect(),
    }
}

fn check_len(mesh: &Mesh, found: usize) -> Result<()> {
    if found != mesh.n_elements() {
        return Err(Error::MeshMismatch {
            expected: mesh.n_elements(),
            found,
        });
    }
    Ok(())
}

fn solve_checked(a: &SparseMatrix, chol: &Cholesky, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (x, info) = linalg::solve_refined(a, chol, rhs, LINEAR_TOL);
    if !(info.backward_error <= LINEAR_TOL) {
        return Err(Error::SingularSystem(format!(
            "linear backward error {:.3e} above {LINEAR_TOL:.0e}",
            info.backward_error
        )));
    }
    Ok((x, info.backward_error))
}

/// Assembled matrix of the quadratic Poisson energy (for inspection).
pub fn poisson_matrix(mesh: &Mesh, sides: &SideSet, params: &PenaltyParams) -> Result<SparseMatrix> {
    check_quadratic(params)?;
    let n = mesh.n_elements();
    let (jump, average) = quadratic_side_weights(sides, params);
    let w = QuadraticWeights {
        gradient: &vec![1.0; n],
        mass: &vec![0.0; n],
        jump: &jump,
        average: &average,
    };
    assemble(mesh, sides, &w, params.jump).build()
}

/// Minimizes `1/2 ||grad_h u||^2 - (f_h, Pi_h u) + J_h(u)` for `r = s = 2`.
pub fn solve_poisson(
    mesh: &Mesh,
    sides: &SideSet,
    params: &PenaltyParams,
    f_h: &[f64],
) -> Result<(DgField, SolveReport)> {
    check_len(mesh, f_h.len())?;
    let a = poisson_matrix(mesh, sides, params)?;
    let chol = a.factorize()?;
    let rhs = load_vector(mesh, f_h, None);
    let (x, residual) = solve_checked(&a, &chol, &rhs)?;
    let u = field_from(&x);
    let problem = DiscreteProblem::Poisson { f_h: f_h.to_vec() };
    let energy = functionals::primal_energy(&problem, &u, mesh, sides, params)?.to_f64();
    let mut report = SolveReport::new(StopReason::Direct);
    report.iterations = 1;
    report.residual = residual;
    report.energy = energy;
    report.energy_history = vec![energy];
    Ok((u, report))
}

/// Parameters of the TV gradient flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    pub epsilon: f64,
    pub tau: f64,
    /// Stop once `||Pi_h(u^{k+1} - u^k)|| <= stop_tol`.
    pub stop_tol: f64,
    pub max_iters: usize,
}

impl TvOptions {
    /// `epsilon = h`, `tau = 1`, `stop_tol = h / 100`.
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let h = mesh.h_max();
        Self {
            epsilon: h,
            tau: 1.0,
            stop_tol: h / 100.0,
            max_iters: 5000,
        }
    }
}

fn pi0_distance(mesh: &Mesh, a: &DgField, b: &DgField) -> f64 {
    (0..mesh.n_elements())
        .map(|t| mesh.area(t) * (a.values[t] - b.values[t]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn gradient_distance(mesh: &Mesh, a: &DgField, b: &DgField) -> f64 {
    (0..mesh.n_elements())
        .map(|t| {
            let d = vec2::sub(a.gradients[t], b.gradients[t]);
            mesh.area(t) * vec2::dot(d, d)
        })
        .sum::<f64>()
        .sqrt()
}

/// Semi-implicit `L^2` gradient flow for the regularized TV energy
/// `sum_T |T| |grad u|_eps + alpha/2 ||Pi_h u - g_h||^2 + J_h^eps(u)`,
/// `1 <= r <= 2`, starting from `u = 0`.
///
/// Each step minimizes the energy with moduli replaced by their quadratic
/// majorants at the previous iterate plus `1/(2 tau) ||Pi_h(u - u^k)||^2`,
/// so the energy never increases.
pub fn solve_tv(
    mesh: &Mesh,
    sides: &SideSet,
    params: &PenaltyParams,
    g_h: &[f64],
    alpha: f64,
    opts: &TvOptions,
) -> Result<(DgField, SolveReport)> {
    params.validate()?;
    check_len(mesh, g_h.len())?;
    if !(alpha > 0.0 && opts.epsilon > 0.0 && opts.tau > 0.0) {
        return Err(Error::InvalidParams(
            "TV flow needs alpha, epsilon, tau > 0".into(),
        ));
    }
    if params.c_alpha <= 0.0 || params.c_beta != 0.0 {
        return Err(Error::InvalidParams(
            "TV flow needs c_alpha > 0 and beta = 0".into(),
        ));
    }
    if !(1.0..=2.0).contains(&params.r) {
        return Err(Error::InvalidParams(format!(
            "TV flow supports 1 <= r <= 2 (got r = {})",
            params.r
        )));
    }
    if params.jump == JumpVariant::Full && params.r != 2.0 {
        return Err(Error::InvalidParams(
            "full jumps in the TV flow need r = 2".into(),
        ));
    }
    let n = mesh.n_elements();
    let eps = opts.epsilon;
    let problem = DiscreteProblem::Tv {
        g_h: g_h.to_vec(),
        alpha,
        epsilon: eps,
    };
    let energy = |u: &DgField| -> Result<f64> {
        Ok(functionals::primal_energy(&problem, u, mesh, sides, params)?.to_f64())
    };
    let mut u = DgField::zeros(n);
    let mut report = SolveReport::new(StopReason::NotConverged);
    let mut e = energy(&u)?;
    report.energy_history.push(e);

    let mass = vec![alpha + 1.0 / opts.tau; n];
    let average = vec![0.0; sides.len()];
    let mut gradient = vec![0.0; n];
    let mut jump = vec![0.0; sides.len()];
    let mut symbolic = None;
    for k in 1..=opts.max_iters {
        for t in 0..n {
            gradient[t] = 1.0 / functionals::regularized_abs(vec2::norm(u.gradients[t]), eps);
        }
        let traces = fem::dg_side_traces(&u, mesh, sides)?;
        for (s, side) in sides.iter().enumerate() {
            let a = params.alpha(side.length);
            jump[s] = if params.r == 2.0 {
                a.powi(-2)
            } else {
                a.powf(-params.r) * functionals::regularized_abs(traces.jump[s], eps).powf(params.r - 2.0)
            };
        }
        let w = QuadraticWeights {
            gradient: &gradient,
            mass: &mass,
            jump: &jump,
            average: &average,
        };
        let a = assemble(mesh, sides, &w, params.jump).build()?;
        let chol = match &symbolic {
            None => {
                let c = a.factorize()?;
                symbolic = Some(c.symbolic().clone());
                c
            }
            Some(sym) => a.factorize_with(sym)?,
        };
        let mut rhs = vec![0.0; 3 * n];
        for t in 0..n {
            rhs[3 * t] = mesh.area(t) * (alpha * g_h[t] + u.values[t] / opts.tau);
        }
        let (x, _) = solve_checked(&a, &chol, &rhs)?;
        let next = field_from(&x);
        let increment = pi0_distance(mesh, &next, &u);
        let e_next = energy(&next)?;
        let rise = (e_next - e) / e.abs().max(f64::MIN_POSITIVE);
        report.max_energy_increase = report.max_energy_increase.max(rise);
        e = e_next;
        u = next;
        report.energy_history.push(e);
        report.iterations = k;
        report.residual = increment;
        if increment <= opts.stop_tol {
            report.stop = StopReason::Converged;
            break;
        }
    }
    report.energy = e;
    Ok((u, report))
}

/// Parameters of the active set iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleOptions {
    /// Stop when the active set is unchanged and the correction satisfies
    /// `||grad_h(u^{k+1} - u^k)|| < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Weight `c` in the active set estimate `lambda + c (chi - Pi_h u) > 0`.
    pub c: f64,
}

impl ObstacleOptions {
    pub fn for_mesh(mesh: &Mesh) -> Self {
        Self {
            tol: mesh.h_max(),
            max_iters: 100,
            c: 1.0,
        }
    }
}

/// Minimizes `1/2 ||grad_h u||^2 + (d, grad_h u) - (f_h, Pi_h u) + J_h(u)`
/// subject to `Pi_h u >= obstacle` by a primal-dual active set iteration,
/// with `r = s = 2`. The multiplier density `lambda_T` satisfies
/// `A u - b = sum_T |T| lambda_T e_T`.
pub fn solve_obstacle(
    mesh: &Mesh,
    sides: &SideSet,
    params: &PenaltyParams,
    f_h: &[f64],
    obstacle: &[f64],
    shift: &[Point],
    opts: &ObstacleOptions,
) -> Result<(DgField, SolveReport)> {
    check_quadratic(params)?;
    check_len(mesh, f_h.len())?;
    check_len(mesh, obstacle.len())?;
    check_len(mesh, shift.len())?;
    let n = mesh.n_elements();
    let (jump, average) = quadratic_side_weights(sides, params);
    let w = QuadraticWeights {
        gradient: &vec![1.0; n],
        mass: &vec![0.0; n],
        jump: &jump,
        average: &average,
    };
    let builder = assemble(mesh, sides, &w, params.jump);
    let a = builder.build()?;
    let rhs = load_vector(mesh, f_h, Some(shift));
    let problem = DiscreteProblem::Obstacle {
        f_h: f_h.to_vec(),
        obstacle: obstacle.to_vec(),
        shift: shift.to_vec(),
    };

    let mut u = DgField::zeros(n);
    let mut lambda = vec![0.0; n];
    let mut active: Vec<bool> = (0..n).map(|t| opts.c * obstacle[t] > 0.0).collect();
    let mut report = SolveReport::new(StopReason::NotConverged);
    let mut symbolic = None;
    let mut last_changes = usize::MAX;
    for k in 1..=opts.max_iters {
        // pin active barycenter values by elimination, keeping the pattern
        let pinned = |i: usize| i % 3 == 0 && active[i / 3];
        let mut reduced = builder.map_values(|i, j, v| if pinned(i) || pinned(j) { 0.0 } else { v });
        let mut b = rhs.clone();
        let mut pinned_values = vec![0.0; 3 * n];
        for t in 0..n {
            if active[t] {
                pinned_values[3 * t] = obstacle[t];
            }
        }
        let coupling = a.matvec(&pinned_values);
        for i in 0..3 * n {
            if pinned(i) {
                let d = a.get(i, i);
                reduced.add(i, i, d);
                b[i] = d * obstacle[i / 3];
            } else {
                b[i] -= coupling[i];
            }
        }
        let ar = reduced.build()?;
        let chol = match &symbolic {
            None => {
                let c = ar.factorize()?;
                symbolic = Some(c.symbolic().clone());
                c
            }
            Some(sym) => ar.factorize_with(sym)?,
        };
        let (x, _) = solve_checked(&ar, &chol, &b)?;
        let next = field_from(&x);
        let au = a.matvec(&x);
        for t in 0..n {
            lambda[t] = if active[t] {
                (au[3 * t] - rhs[3 * t]) / mesh.area(t)
            } else {
                0.0
            };
        }
        let correction = gradient_distance(mesh, &next, &u);
        u = next;
        let new_active: Vec<bool> = (0..n)
            .map(|t| lambda[t] + opts.c * (obstacle[t] - u.values[t]) > 0.0)
            .collect();
        let changes = active.iter().zip(&new_active).filter(|(a, b)| a != b).count();
        active = new_active;
        report.active_set_changes.push(changes);
        report.energy_history.push(
            functionals::primal_energy(&problem, &u, mesh, sides, params)?.to_f64(),
        );
        report.iterations = k;
        report.residual = correction;
        if changes == 0 && correction < opts.tol {
            report.stop = StopReason::Converged;
            break;
        }
        if changes == 0 && last_changes == 0 {
            // the same system would be solved again
            report.stop = StopReason::Converged;
            break;
        }
        last_changes = changes;
    }
    report.energy = *report.energy_history.last().unwrap_or(&f64::NAN);
    report.complementarity = Some(complementarity(&u, &lambda, obstacle));
    report.multipliers = lambda;
    Ok((u, report))
}

fn complementarity(u: &DgField, lambda: &[f64], obstacle: &[f64]) -> Complementarity {
    let mut c = Complementarity {
        min_multiplier: f64::INFINITY,
        min_slack: f64::INFINITY,
        max_product: 0.0,
    };
    for t in 0..lambda.len() {
        let slack = u.values[t] - obstacle[t];
        c.min_multiplier = c.min_multiplier.min(lambda[t]);
        c.min_slack = c.min_slack.min(slack);
        c.max_product = c.max_product.max((lambda[t] * slack).abs());
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn square(level: u32) -> (Mesh, SideSet) {
        let m = Mesh::structured(Rect::centered_square(1.0), level).unwrap();
        let s = SideSet::all_dirichlet(&m).unwrap();
        (m, s)
    }

    #[test]
    fn poisson_matrix_is_symmetric() {
        let (m, s) = square(3);
        for jump in [JumpVariant::Mean, JumpVariant::Full] {
            let p = PenaltyParams::quadratic(1.0, 1.5).with_jump(jump).with_beta(0.5, 1.0);
            let a = poisson_matrix(&m, &s, &p).unwrap();
            assert!(a.asymmetry() <= 1e-14 * a.max_abs());
        }
    }

    #[test]
    fn matrix_reproduces_energy() {
        let (m, _) = square(2);
        let sn = SideSet::build(&m, |x, _| {
            if x[0] > 0.999 {
                crate::mesh::BoundaryTag::Neumann
            } else {
                crate::mesh::BoundaryTag::Dirichlet
            }
        })
        .unwrap();
        let n = m.n_elements();
        let u = DgField {
            values: (0..n).map(|t| (t as f64 * 0.37).sin()).collect(),
            gradients: (0..n).map(|t| [(t as f64).cos(), 0.3 - 0.01 * t as f64]).collect(),
        };
        let mut x = vec![0.0; 3 * n];
        for t in 0..n {
            x[3 * t] = u.values[t];
            x[3 * t + 1] = u.gradients[t][0];
            x[3 * t + 2] = u.gradients[t][1];
        }
        for jump in [JumpVariant::Mean, JumpVariant::Full] {
            let p = PenaltyParams::quadratic(0.7, 1.0).with_jump(jump).with_beta(0.5, 1.0);
            let a = poisson_matrix(&m, &sn, &p).unwrap();
            let quad = 0.5 * x.iter().zip(a.matvec(&x)).map(|(a, b)| a * b).sum::<f64>();
            let prob = DiscreteProblem::Poisson { f_h: vec![0.0; n] };
            let e = functionals::primal_energy(&prob, &u, &m, &sn, &p).unwrap().to_f64();
            assert!((quad - e).abs() < 1e-12 * e, "{jump}: {quad} vs {e}");
        }
    }

    #[test]
    fn zero_load_gives_zero() {
        let (m, s) = square(2);
        let p = PenaltyParams::quadratic(1.0, 1.5);
        let (u, r) = solve_poisson(&m, &s, &p, &vec![0.0; m.n_elements()]).unwrap();
        assert_eq!(u.sup_norm(&m), 0.0);
        assert_eq!(r.stop, StopReason::Direct);
    }

    #[test]
    fn zero_penalty_rejected() {
        let (m, s) = square(1);
        let p = PenaltyParams::quadratic(0.0, 1.5);
        assert!(matches!(
            solve_poisson(&m, &s, &p, &vec![1.0; m.n_elements()]),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn poisson_solution_is_stationary() {
        let (m, s) = square(3);
        let n = m.n_elements();
        let f: Vec<f64> = (0..n).map(|t| 1.0 + (t % 5) as f64).collect();
        let p = PenaltyParams::quadratic(1.0, 1.5).with_jump(JumpVariant::Full);
        let (u, _) = solve_poisson(&m, &s, &p, &f).unwrap();
        let prob = DiscreteProblem::Poisson { f_h: f };
        let e0 = functionals::primal_energy(&prob, &u, &m, &s, &p).unwrap().to_f64();
        for t in [0, n / 2, n - 1] {
            for k in 0..3 {
                let mut v = u.clone();
                match k {
                    0 => v.values[t] += 1e-4,
                    1 => v.gradients[t][0] += 1e-4,
                    _ => v.gradients[t][1] -= 1e-4,
                }
                let e = functionals::primal_energy(&prob, &v, &m, &s, &p).unwrap().to_f64();
                assert!(e >= e0);
            }
        }
    }

    #[test]
    fn tv_zero_datum_stays_zero() {
        let (m, s) = square(2);
        let p = PenaltyParams::quadratic(0.1, 1.0).with_r(1.0);
        let opts = TvOptions::for_mesh(&m);
        let (u, r) = solve_tv(&m, &s, &p, &vec![0.0; m.n_elements()], 10.0, &opts).unwrap();
        assert_eq!(u.sup_norm(&m), 0.0);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.stop, StopReason::Converged);
    }

    #[test]
    fn tv_energy_decreases() {
        let (m, s) = square(3);
        let g: Vec<f64> = (0..m.n_elements())
            .map(|t| if vec2::norm(m.barycenter(t)) < 0.5 { 1.0 } else { 0.0 })
            .collect();
        for r in [1.0, 1.5, 2.0] {
            let p = PenaltyParams::quadratic(0.1, 1.0).with_r(r);
            let opts = TvOptions::for_mesh(&m);
            let (_, rep) = solve_tv(&m, &s, &p, &g, 10.0, &opts).unwrap();
            assert!(rep.converged());
            for w in rep.energy_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "r = {r}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn inactive_obstacle_is_unconstrained() {
        let (m, s) = square(2);
        let n = m.n_elements();
        let p = PenaltyParams::quadratic(1.0, 1.5);
        let f = vec![1.0; n];
        let (u0, _) = solve_poisson(&m, &s, &p, &f).unwrap();
        let opts = ObstacleOptions::for_mesh(&m);
        let (u, rep) = solve_obstacle(&m, &s, &p, &f, &vec![-1e6; n], &vec![[0.0; 2]; n], &opts).unwrap();
        assert!(rep.multipliers.iter().all(|&l| l == 0.0));
        assert!(rep.converged());
        let mut d = u.clone();
        d.axpy(-1.0, &u0);
        assert!(d.sup_norm(&m) < 1e-10);
    }

    #[test]
    fn obstacle_complementarity() {
        let (m, s) = square(3);
        let n = m.n_elements();
        let p = PenaltyParams::quadratic(1.0, 1.5);
        let f = vec![-2.0; n];
        let obstacle: Vec<f64> = (0..n).map(|t| -0.05 + 0.1 * m.barycenter(t)[0]).collect();
        let opts = ObstacleOptions::for_mesh(&m);
        let (u, rep) = solve_obstacle(&m, &s, &p, &f, &obstacle, &vec![[0.0; 2]; n], &opts).unwrap();
        assert!(rep.converged());
        let c = rep.complementarity.unwrap();
        assert!(c.max_violation() <= 1e-10, "{c:?}");
        assert!(rep.multipliers.iter().any(|&l| l > 0.0));
        let prob = DiscreteProblem::Obstacle {
            f_h: f,
            obstacle,
            shift: vec![[0.0; 2]; n],
        };
        assert!(functionals::primal_energy(&prob, &u, &m, &s, &p).unwrap().is_finite());
    }
}
