//! Convergence sweeps over refinement levels and parameter grids, CSV
//! output, and the randomized self-test suites behind `dgdual selftest`.

use std::fmt::Write as _;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::fem::{self, DgField, RtField};
use crate::functionals::{
    self, DiscreteProblem, JumpVariant, PenaltyParams, Potential, ProblemKind,
};
use crate::mesh::{BoundaryTag, Mesh, Rect, SideSet};
use crate::problems::{self, ErrorRecord, ExperimentCase};
use crate::quadrature::Quadrature;
use crate::solvers::{self, ObstacleOptions, SolveReport, TvOptions};
use crate::vec2::{self, Point};

pub const DEFAULT_SEED: u64 = 0x5EED;

pub const CSV_HEADER: &str = "experiment,level,N,h,gamma,c_alpha,r,error,eoc,energy,gap,iters,seconds";

/// Settings of a convergence sweep. `None` fields take the catalog defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub levels: Option<RangeInclusive<u32>>,
    pub gammas: Option<Vec<f64>>,
    pub c_alphas: Option<Vec<f64>>,
    pub rs: Option<Vec<f64>>,
    pub jump: Option<JumpVariant>,
    pub c_beta: f64,
    pub sigma: f64,
    pub s: f64,
    /// TV regularization `epsilon = epsilon_factor * h`.
    pub epsilon_factor: f64,
    pub tau: f64,
    /// Stopping tolerance as a multiple of `h` (TV default 1/100,
    /// obstacle default 1).
    pub stop_factor: Option<f64>,
    pub max_iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub timing: bool,
    pub verbose: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            levels: None,
            gammas: None,
            c_alphas: None,
            rs: None,
            jump: None,
            c_beta: 0.0,
            sigma: 0.0,
            s: 2.0,
            epsilon_factor: 1.0,
            tau: 1.0,
            stop_factor: None,
            max_iters: None,
            out: None,
            timing: true,
            verbose: false,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.levels {
            if l.is_empty() {
                return Err(Error::Config("empty level range".into()));
            }
            if *l.end() > 10 {
                return Err(Error::Config("levels above 10 are not supported".into()));
            }
        }
        for (name, list) in [("gamma", &self.gammas), ("c-alpha", &self.c_alphas), ("r", &self.rs)] {
            if matches!(list, Some(v) if v.is_empty()) {
                return Err(Error::Config(format!("empty --{name} list")));
            }
        }
        if matches!(&self.c_alphas, Some(v) if v.iter().any(|&c| !(c > 0.0))) {
            return Err(Error::Config("c_alpha must be positive".into()));
        }
        if let Some(rs) = &self.rs {
            match self.kind {
                ProblemKind::Tv => {
                    if rs.iter().any(|r| !(1.0..=2.0).contains(r)) {
                        return Err(Error::Config("tv supports 1 <= r <= 2".into()));
                    }
                }
                _ => {
                    if rs.iter().any(|&r| r != 2.0) {
                        return Err(Error::Config(format!("{} requires r = 2", self.kind)));
                    }
                }
            }
        }
        if self.kind != ProblemKind::Tv && self.c_beta != 0.0 && self.s != 2.0 {
            return Err(Error::Config("average penalty requires s = 2".into()));
        }
        if !(self.tau > 0.0 && self.epsilon_factor > 0.0) {
            return Err(Error::Config("tau and epsilon must be positive".into()));
        }
        Ok(())
    }

    fn grid(&self, case: &ExperimentCase) -> Vec<(f64, f64, f64)> {
        let gammas = self.gammas.clone().unwrap_or_else(|| case.grid.gammas.clone());
        let c_alphas = self
            .c_alphas
            .clone()
            .unwrap_or_else(|| case.grid.c_alpha_inv.iter().map(|c| 1.0 / c).collect());
        let rs = self.rs.clone().unwrap_or_else(|| case.grid.rs.clone());
        let mut out = Vec::new();
        for &r in &rs {
            for &c in &c_alphas {
                for &g in &gammas {
                    out.push((g, c, r));
                }
            }
        }
        out
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: ProblemKind,
    pub level: u32,
    pub n_elements: usize,
    pub h: f64,
    pub gamma: f64,
    pub c_alpha: f64,
    pub r: f64,
    pub error: f64,
    pub eoc: Option<f64>,
    pub energy: f64,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
    /// Set when the cell failed or its solver did not converge.
    pub failure: Option<String>,
    pub report: Option<SolveReport>,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Runs every level for every parameter combination. Parameter combinations
/// run in parallel (at most `DGDUAL_THREADS` at a time); rows come back
/// level-major, then in grid order.
pub fn run_convergence(config: &RunConfig) -> Result<Vec<Row>> {
    config.validate()?;
    let case = problems::case(config.kind);
    let levels = config.levels.clone().unwrap_or_else(|| case.levels.clone());
    let grid = config.grid(&case);
    let threads = std::env::var("DGDUAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_combo: Vec<Vec<Row>> = pool.install(|| {
        grid.par_iter()
            .map(|&(gamma, c_alpha, r)| {
                let mut rows: Vec<Row> = levels
                    .clone()
                    .map(|level| run_cell(&case, config, level, gamma, c_alpha, r))
                    .collect();
                fill_row_eoc(&mut rows);
                rows
            })
            .collect()
    });
    let mut rows = Vec::new();
    for level in levels {
        for combo in &per_combo {
            rows.extend(combo.iter().filter(|r| r.level == level).cloned());
        }
    }
    Ok(rows)
}

fn fill_row_eoc(rows: &mut [Row]) {
    let mut recs: Vec<ErrorRecord> = rows
        .iter()
        .map(|r| ErrorRecord {
            level: r.level,
            n_elements: r.n_elements,
            h: r.h,
            error: r.error,
            eoc: None,
        })
        .collect();
    problems::fill_eoc(&mut recs);
    for (row, rec) in rows.iter_mut().zip(recs) {
        row.eoc = rec.eoc.filter(|e| e.is_finite());
    }
}

/// Error records of the rows for one parameter combination.
pub fn records(rows: &[Row], gamma: f64, c_alpha: f64, r: f64) -> Vec<ErrorRecord> {
    rows.iter()
        .filter(|row| row.gamma == gamma && row.c_alpha == c_alpha && row.r == r)
        .map(|row| ErrorRecord {
            level: row.level,
            n_elements: row.n_elements,
            h: row.h,
            error: row.error,
            eoc: row.eoc,
        })
        .collect()
}

fn run_cell(case: &ExperimentCase, config: &RunConfig, level: u32, gamma: f64, c_alpha: f64, r: f64) -> Row {
    let start = Instant::now();
    let mut row = Row {
        experiment: case.kind(),
        level,
        n_elements: 0,
        h: f64::NAN,
        gamma,
        c_alpha,
        r,
        error: f64::NAN,
        eoc: None,
        energy: f64::NAN,
        gap: None,
        iterations: 0,
        seconds: 0.0,
        failure: None,
        report: None,
    };
    match solve_cell(case, config, level, gamma, c_alpha, r) {
        Ok(cell) => {
            row.n_elements = cell.n_elements;
            row.h = cell.h;
            row.error = cell.error;
            row.energy = cell.report.energy;
            row.gap = cell.gap;
            row.iterations = cell.report.iterations;
            if !cell.report.converged() {
                row.failure = Some(cell.report.stop.to_string());
            }
            row.report = Some(cell.report);
        }
        Err(e) => {
            if let Ok(mesh) = Mesh::structured(case.domain, level) {
                row.n_elements = mesh.n_elements();
                row.h = mesh.h_max();
            }
            row.failure = Some(e.to_string());
        }
    }
    if config.timing {
        row.seconds = start.elapsed().as_secs_f64();
    }
    row
}

/// Outcome of one solve on one mesh.
pub struct Cell {
    pub n_elements: usize,
    pub h: f64,
    /// Solver variable (the homogeneous part for the obstacle problem).
    pub solution: DgField,
    /// The approximation of the exact solution.
    pub approximation: DgField,
    pub error: f64,
    pub gap: Option<f64>,
    pub report: SolveReport,
}

pub fn penalty_params(case: &ExperimentCase, config: &RunConfig, gamma: f64, c_alpha: f64, r: f64) -> PenaltyParams {
    PenaltyParams::quadratic(c_alpha, gamma)
        .with_r(r)
        .with_jump(config.jump.unwrap_or(case.jump))
        .with_beta(config.c_beta, config.sigma)
        .with_s(config.s)
}

/// Solves one case on one level and evaluates error and duality gap.
pub fn solve_cell(
    case: &ExperimentCase,
    config: &RunConfig,
    level: u32,
    gamma: f64,
    c_alpha: f64,
    r: f64,
) -> Result<Cell> {
    let (mesh, sides) = case.mesh(level)?;
    let h = mesh.h_max();
    let params = penalty_params(case, config, gamma, c_alpha, r);
    let problem = case.spec.discretize(&mesh, &sides);
    let gap_of = |u: &DgField, z: &RtField, problem: &DiscreteProblem| -> Result<f64> {
        Ok(functionals::duality_gap(problem, u, z, &mesh, &sides, &params)?.to_f64())
    };
    let (solution, approximation, report, gap) = match &problem {
        DiscreteProblem::Poisson { f_h } => {
            let (u, report) = solvers::solve_poisson(&mesh, &sides, &params, f_h)?;
            let z = if params.jump == JumpVariant::Mean && params.c_beta == 0.0 {
                Some(functionals::reconstruct_dual(&problem, &u, &mesh, &sides, &params)?.field)
            } else {
                problems::dual_certificate(case, &mesh, &sides, &params)?
            };
            let gap = z.map(|z| gap_of(&u, &z, &problem)).transpose()?;
            (u.clone(), u, report, gap)
        }
        DiscreteProblem::Tv { g_h, alpha, .. } => {
            let mut opts = TvOptions::for_mesh(&mesh);
            opts.epsilon = config.epsilon_factor * h;
            opts.tau = config.tau;
            if let Some(f) = config.stop_factor {
                opts.stop_tol = f * h;
            }
            if let Some(m) = config.max_iters {
                opts.max_iters = m;
            }
            let (u, report) = solvers::solve_tv(&mesh, &sides, &params, g_h, *alpha, &opts)?;
            let z = problems::dual_certificate(case, &mesh, &sides, &params)?;
            // certified against the unregularized energy
            let sharp = problem.with_epsilon(0.0);
            let gap = z.map(|z| gap_of(&u, &z, &sharp)).transpose()?;
            (u.clone(), u, report, gap)
        }
        DiscreteProblem::Obstacle {
            f_h,
            obstacle,
            shift,
        } => {
            let mut opts = ObstacleOptions::for_mesh(&mesh);
            if let Some(f) = config.stop_factor {
                opts.tol = f * h;
            }
            if let Some(m) = config.max_iters {
                opts.max_iters = m;
            }
            let (u, report) = solvers::solve_obstacle(&mesh, &sides, &params, f_h, obstacle, shift, &opts)?;
            let mut full = lifted_boundary_data(case, &mesh, &sides);
            full.axpy(1.0, &u);
            let z = problems::dual_certificate(case, &mesh, &sides, &params)?;
            let gap = z.map(|z| gap_of(&u, &z, &problem)).transpose()?;
            (u, full, report, gap)
        }
    };
    let error = case.error(&approximation, &mesh, &sides);
    Ok(Cell {
        n_elements: mesh.n_elements(),
        h,
        solution,
        approximation,
        error,
        gap,
        report,
    })
}

/// `I_h u_D` for cases with boundary data, zero otherwise.
pub fn lifted_boundary_data(case: &ExperimentCase, mesh: &Mesh, sides: &SideSet) -> DgField {
    match &case.spec.data {
        functionals::ProblemData::Obstacle { u_d: Some(u_d), .. } => {
            fem::cr_interpolate(|x| u_d(x), mesh, sides, &case.spec.quadrature)
        }
        _ => DgField::zeros(mesh.n_elements()),
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Writes the table as CSV. With `verbose` a `reason` column is appended.
pub fn write_csv<W: Write>(rows: &[Row], mut out: W, verbose: bool) -> std::io::Result<()> {
    let mut buf = String::from(CSV_HEADER);
    if verbose {
        buf.push_str(",reason");
    }
    buf.push('\n');
    for r in rows {
        let _ = write!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.level,
            r.n_elements,
            num(r.h),
            num(r.gamma),
            num(r.c_alpha),
            num(r.r),
            num(if r.failed() && r.report.is_none() { f64::NAN } else { r.error }),
            num(r.eoc.unwrap_or(f64::NAN)),
            num(r.energy),
            num(r.gap.unwrap_or(f64::NAN)),
            r.iterations,
            num(r.seconds),
        );
        if verbose {
            let reason = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = write!(buf, ",{reason}");
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
}

/// Writes the table to `path`, or to standard output if `path` is `None`.
pub fn emit_csv(rows: &[Row], path: Option<&std::path::Path>, verbose: bool) -> Result<()> {
    match path {
        Some(p) => write_csv(rows, std::fs::File::create(p)?, verbose)?,
        None => write_csv(rows, std::io::stdout().lock(), verbose)?,
    }
    Ok(())
}

/// Outcome of one randomized self-test suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest normalized violation seen (negative or zero when all pass).
    pub worst: f64,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Records a trial whose normalized violation is `v` (pass iff `v <= 0`).
    fn record(&mut self, v: f64) {
        self.trials += 1;
        if !(v <= 0.0) {
            self.failures += 1;
        }
        if v > self.worst || v.is_nan() {
            self.worst = v;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

fn random_split(rng: &mut ChaCha8Rng) -> fn(Point, Point) -> BoundaryTag {
    fn dirichlet(_: Point, _: Point) -> BoundaryTag {
        BoundaryTag::Dirichlet
    }
    fn right_neumann(x: Point, _: Point) -> BoundaryTag {
        if x[0] > 0.999 {
            BoundaryTag::Neumann
        } else {
            BoundaryTag::Dirichlet
        }
    }
    fn lower_neumann(_: Point, n: Point) -> BoundaryTag {
        if n[1] < -0.5 || n[0] < -0.5 {
            BoundaryTag::Neumann
        } else {
            BoundaryTag::Dirichlet
        }
    }
    match rng.random_range(0..3) {
        0 => dirichlet,
        1 => right_neumann,
        _ => lower_neumann,
    }
}

fn random_mesh(rng: &mut ChaCha8Rng, levels: RangeInclusive<u32>) -> Result<(Mesh, SideSet)> {
    let level = rng.random_range(levels);
    let mesh = Mesh::structured(Rect::centered_square(1.0), level)?;
    let sides = SideSet::build(&mesh, random_split(rng))?;
    Ok((mesh, sides))
}

pub fn random_dg(rng: &mut ChaCha8Rng, n: usize) -> DgField {
    DgField {
        values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        gradients: (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect(),
    }
}

pub fn random_rt(rng: &mut ChaCha8Rng, n: usize) -> RtField {
    RtField {
        constants: (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect(),
        divergences: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Normal-continuous field from random side fluxes; fluxes vanish on
/// Neumann sides unless `free_neumann`.
pub fn random_conforming_rt(rng: &mut ChaCha8Rng, mesh: &Mesh, sides: &SideSet, free_neumann: bool) -> RtField {
    let fluxes: Vec<f64> = sides
        .iter()
        .map(|s| {
            let f = rng.random_range(-1.0..1.0);
            if s.outside_dirichlet() && s.is_boundary() && !free_neumann {
                0.0
            } else {
                f
            }
        })
        .collect();
    fem::rt_from_fluxes(&fluxes, mesh, sides)
}

fn random_params(rng: &mut ChaCha8Rng) -> PenaltyParams {
    let r = [1.0, 1.5, 2.0, 3.0][rng.random_range(0..4)];
    let mut p = PenaltyParams::quadratic(rng.random_range(0.2..2.0), rng.random_range(0.0..2.0)).with_r(r);
    if rng.random_bool(0.5) {
        p = p.with_jump(JumpVariant::Full);
    }
    if rng.random_bool(0.5) {
        let s = [1.5, 2.0, 3.0][rng.random_range(0..3)];
        p = p
            .with_beta(rng.random_range(0.2..2.0), rng.random_range(0.0..1.0))
            .with_s(s);
    }
    p
}

/// Scales `z` so that `|alpha_S {z . n_S}| <= 1` where `r = 1` requires it
/// and `|Pi_h z| <= 1` if `unit_ball`.
fn make_admissible(z: &mut RtField, mesh: &Mesh, sides: &SideSet, p: &PenaltyParams, unit_ball: bool) -> Result<()> {
    let mut scale = 1.0f64;
    if p.r == 1.0 {
        let t = fem::rt_side_traces(z, mesh, sides)?;
        for (k, s) in sides.iter().enumerate() {
            if s.outside_neumann() {
                scale = scale.max(p.alpha(s.length) * t.average[k].abs() * (1.0 + 1e-9));
            }
        }
    }
    if unit_ball {
        for a in &z.constants {
            scale = scale.max(vec2::norm(*a) * (1.0 + 1e-9));
        }
    }
    z.scale(1.0 / scale);
    Ok(())
}

/// A random admissible primal-dual pair for the given class.
pub fn random_admissible_pair(
    rng: &mut ChaCha8Rng,
    kind: ProblemKind,
    mesh: &Mesh,
    sides: &SideSet,
    params: &PenaltyParams,
) -> Result<(DiscreteProblem, DgField, RtField)> {
    let n = mesh.n_elements();
    let free_neumann = params.c_beta > 0.0;
    let mut z = random_conforming_rt(rng, mesh, sides, free_neumann);
    let u = random_dg(rng, n);
    let problem = match kind {
        ProblemKind::Poisson => {
            make_admissible(&mut z, mesh, sides, params, false)?;
            DiscreteProblem::Poisson {
                f_h: z.divergences.iter().map(|b| -b).collect(),
            }
        }
        ProblemKind::Tv => {
            make_admissible(&mut z, mesh, sides, params, true)?;
            DiscreteProblem::Tv {
                g_h: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                alpha: rng.random_range(0.5..20.0),
                epsilon: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.1) },
            }
        }
        ProblemKind::Obstacle => {
            make_admissible(&mut z, mesh, sides, params, false)?;
            DiscreteProblem::Obstacle {
                f_h: z
                    .divergences
                    .iter()
                    .map(|b| -b - rng.random_range(0.0..0.5))
                    .collect(),
                obstacle: u.values.iter().map(|c| c - rng.random_range(0.0..0.5)).collect(),
                shift: (0..n)
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect(),
            }
        }
    };
    Ok((problem, u, z))
}

/// `duality_gap >= -1e-12 (|I_h| + |D_h|)` on random admissible pairs.
pub fn weak_duality_suite(kind: ProblemKind, trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut rep = SuiteReport::new(match kind {
        ProblemKind::Poisson => "weak duality (poisson)",
        ProblemKind::Tv => "weak duality (tv)",
        ProblemKind::Obstacle => "weak duality (obstacle)",
    });
    for _ in 0..trials {
        let (mesh, sides) = random_mesh(&mut rng, 2..=3)?;
        let mut params = random_params(&mut rng);
        if kind == ProblemKind::Tv {
            params = params.with_r([1.0, 2.0][rng.random_range(0..2)]);
        }
        let (problem, u, z) = random_admissible_pair(&mut rng, kind, &mesh, &sides, &params)?;
        let i = functionals::primal_energy(&problem, &u, &mesh, &sides, &params)?;
        let d = functionals::dual_energy(&problem, &z, &mesh, &sides, &params)?;
        match (i, d) {
            (ExtReal::Finite(i), ExtReal::Finite(d)) => {
                let scale = i.abs() + d.abs();
                rep.record(-(i - d) / scale.max(f64::MIN_POSITIVE) - 1e-12);
            }
            // an admissible pair must have finite energies
            _ => rep.record(f64::INFINITY),
        }
    }
    Ok(rep)
}

/// Integration by parts, interpolation commuting properties, the jump
/// product rule and Fenchel's inequality on random data.
pub fn identity_suites(seed: u64) -> Result<Vec<SuiteReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ibp = SuiteReport::new("integration by parts");
    let mut cr = SuiteReport::new("grad_h I_h v = Pi_h grad v");
    let mut rt = SuiteReport::new("div J_h z = Pi_h div z");
    let mut product = SuiteReport::new("jump product rule");
    let mut fenchel = SuiteReport::new("Fenchel inequality");
    let quad = Quadrature::degree(2);
    for _ in 0..100 {
        let (mesh, sides) = random_mesh(&mut rng, 2..=4)?;
        let n = mesh.n_elements();
        let u = random_dg(&mut rng, n);
        let z = random_rt(&mut rng, n);
        let terms = fem::ibp_terms(&u, &z, &mesh, &sides)?;
        ibp.record(terms.residual().abs() / terms.scale().max(1.0) - 1e-12);

        // quadratic v and vector field z
        let c: [f64; 12] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let v = |x: Point| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
        let grad_v = |x: Point| [c[1] + 2.0 * c[3] * x[0] + c[4] * x[1], c[2] + c[4] * x[0] + 2.0 * c[5] * x[1]];
        let iv = fem::cr_interpolate(v, &mesh, &sides, &quad);
        let zf = |x: Point| {
            [
                c[6] + c[7] * x[0] * x[0] + c[8] * x[0] * x[1],
                c[9] + c[10] * x[1] * x[1] + c[11] * x[0] * x[1],
            ]
        };
        let div_z = |x: Point| 2.0 * c[7] * x[0] + c[8] * x[1] + 2.0 * c[10] * x[1] + c[11] * x[0];
        let jz = fem::rt_interpolate(zf, &mesh, &sides, &quad);
        let mut cr_err = 0.0f64;
        let mut rt_err = 0.0f64;
        for t in 0..n {
            let xt = mesh.barycenter(t);
            cr_err = cr_err.max(vec2::norm(vec2::sub(iv.gradients[t], grad_v(xt))));
            rt_err = rt_err.max((jz.divergences[t] - div_z(xt)).abs());
        }
        cr.record(cr_err / 10.0 - 1e-12);
        rt.record(rt_err / 10.0 - 1e-12);

        let tu = fem::dg_side_traces(&u, &mesh, &sides)?;
        let tz = fem::rt_side_traces(&z, &mesh, &sides)?;
        let mut worst = 0.0f64;
        for (k, side) in sides.iter().enumerate() {
            let Some(p) = side.plus else { continue };
            let m = side.minus;
            let (um, up) = (u.eval(&mesh, m, side.midpoint), u.eval(&mesh, p, side.midpoint));
            let (zm, zp) = (z.normal_trace(&mesh, m, side), z.normal_trace(&mesh, p, side));
            let lhs = um * zm - up * zp;
            let rhs = tu.jump[k] * tz.average[k] + tu.average[k] * tz.jump[k];
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
        product.record(worst - 1e-12);

        for _ in 0..10 {
            let v = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let w = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let eps = rng.random_range(0.0..0.5);
            for phi in [Potential::Quadratic, Potential::RegularizedNorm(eps)] {
                let lhs = vec2::dot(v, w);
                let rhs = (phi.conjugate(w) + phi.value(v)).to_f64();
                fenchel.record((lhs - rhs) / (1.0 + lhs.abs()) - 1e-12);
                let g = phi.gradient(v);
                let tight = (phi.conjugate(g) + phi.value(v)).to_f64();
                fenchel.record((vec2::dot(v, g) - tight).abs() / (1.0 + tight.abs()) - 1e-12);
            }
            let c = rng.random_range(0.1..3.0);
            let sigma = [1.0, 1.5, 2.0, 3.0][rng.random_range(0..4)];
            let lhs = vec2::dot(v, w);
            let rhs = (ExtReal::Finite(functionals::power_function(c, sigma, &v))
                + functionals::power_conjugate(c, sigma, &w))
            .to_f64();
            fenchel.record((lhs - rhs) / (1.0 + lhs.abs()) - 1e-12);
        }
    }
    Ok(vec![ibp, cr, rt, product, fenchel])
}

/// Every self-test suite: identities, then weak duality for each class.
pub fn selftest(seed: u64) -> Result<Vec<SuiteReport>> {
    let mut out = identity_suites(seed)?;
    for kind in [ProblemKind::Poisson, ProblemKind::Tv, ProblemKind::Obstacle] {
        out.push(weak_duality_suite(kind, 500, seed)?);
    }
    Ok(out)
}
