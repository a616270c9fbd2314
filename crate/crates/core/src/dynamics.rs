//! The shift ODE `Xdot = Phi_eps(Y(u^X)) (2|B(u^X)| + 1)` coupled to the PDE,
//! and the contraction experiment built on it.

use crate::calculus::{check_hypotheses, HypothesisReport};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::functionals::{entropy_identity_residual, r_main, Frame, FunctionalSnapshot, Terms};
use crate::grid::{simpson, Field};
use crate::io;
use crate::pde::{initial_field, PdeSolver, PdeState};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Tolerance on the weighted-entropy increment relative to its initial value.
pub const INCREMENT_TOL: f64 = 1e-8;
/// Tolerance on `R_main` where `|Y| <= eps^2`.
pub const GATE_R_TOL: f64 = 1e-8;
/// Tolerance on `Xdot Y + 2|B|` where `|Y| > eps^2`.
pub const GATE_XY_TOL: f64 = 1e-10;
/// Tolerance on the discrete entropy identity.
pub const IDENTITY_TOL: f64 = 5e-3;

const HYPOTHESIS_SAMPLES: usize = 48;
/// Largest `dt * (2|B| + 1) dY/dX / eps^4` accepted inside `|Y| < eps^2`.
const STIFF_LIMIT: f64 = 1.0;
const MAX_STIFF_DEPTH: u32 = 12;

/// `1/eps^2` for `y <= -eps^2`, `-y/eps^4` in between, `-1/eps^2` for `y >= eps^2`.
pub fn phi_eps(eps: f64, y: f64) -> f64 {
    let cap = 1.0 / (eps * eps);
    (-y / eps.powi(4)).clamp(-cap, cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ShiftState {
    pub x: f64,
    pub xdot: f64,
    /// Running `∫ 2|B| dt`.
    pub h_accum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub delta0: f64,
    pub heun: bool,
    pub max_halvings: u32,
    pub event_floor: f64,
}

impl ShiftParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            epsilon: cfg.epsilon(),
            lambda: cfg.problem.lambda,
            delta0: cfg.problem.delta0,
            heun: cfg.time.shift_heun,
            max_halvings: cfg.time.max_halvings,
            event_floor: cfg.time.event_floor,
        }
    }

    fn xdot(&self, t: &Terms) -> f64 {
        phi_eps(self.epsilon, t.y) * (2.0 * t.b_total().abs() + 1.0)
    }

    /// Relaxation rate of the shift inside `|Y| < eps^2`, zero outside.
    pub fn stiffness(&self, t: &Terms) -> f64 {
        if self.region(t.y) != 0 {
            return 0.0;
        }
        (2.0 * t.b_total().abs() + 1.0) * t.y_x.max(0.0) / self.epsilon.powi(4)
    }

    fn region(&self, y: f64) -> i8 {
        let e2 = self.epsilon * self.epsilon;
        if y <= -e2 {
            -1
        } else if y >= e2 {
            1
        } else {
            0
        }
    }
}

/// Per-substep statistics accumulated along a run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepLog {
    pub substeps: usize,
    /// Halvings at region changes of `Y` and sign changes of `B`.
    pub halvings: usize,
    /// Halvings forced by the relaxation rate of the shift.
    pub stiff_halvings: usize,
    pub max_increment: f64,
    pub max_shift_excess: f64,
    pub shift_violations: usize,
    pub near_count: usize,
    pub max_r_near: Option<f64>,
    pub far_count: usize,
    pub max_xy_far: Option<f64>,
    pub min_decrement_margin: Option<f64>,
    pub max_abs_x: f64,
}

fn fold_max(slot: &mut Option<f64>, v: f64) {
    *slot = Some(slot.map_or(v, |m| m.max(v)));
}

impl StepLog {
    /// Gate statistics for the state `(terms, xdot)`.
    fn gate(&mut self, p: &ShiftParams, terms: &Terms, xdot: f64) {
        let b = terms.b_total();
        let cap = 1.0 / (p.epsilon * p.epsilon);
        let excess = xdot.abs() - cap * (1.0 + 2.0 * b.abs());
        self.max_shift_excess = self.max_shift_excess.max(excess);
        if excess > 0.0 {
            self.shift_violations += 1;
        }
        if terms.y.abs() <= p.epsilon * p.epsilon {
            self.near_count += 1;
            fold_max(&mut self.max_r_near, r_main(terms, p.epsilon, p.lambda, p.delta0));
        } else {
            self.far_count += 1;
            fold_max(&mut self.max_xy_far, xdot * terms.y + 2.0 * b.abs());
        }
    }

    fn commit(&mut self, p: &ShiftParams, start: &Terms, end: &Terms, xdot: f64, x_end: f64, dt: f64) {
        self.substeps += 1;
        self.gate(p, start, xdot);
        let inc = end.entropy - start.entropy;
        self.max_increment = self.max_increment.max(inc);
        let margin = -inc - p.delta0 * (p.epsilon / p.lambda) * start.b_total().abs() * dt;
        self.min_decrement_margin = Some(self.min_decrement_margin.map_or(margin, |m| m.min(margin)));
        self.max_abs_x = self.max_abs_x.max(x_end.abs());
    }
}

/// PDE solver plus shift dynamics for one experiment.
#[derive(Debug, Clone)]
pub struct CoupledStepper {
    solver: PdeSolver,
    params: ShiftParams,
}

impl CoupledStepper {
    pub fn new(solver: PdeSolver, params: ShiftParams) -> Self {
        Self { solver, params }
    }

    pub fn solver(&self) -> &PdeSolver {
        &self.solver
    }

    pub fn params(&self) -> &ShiftParams {
        &self.params
    }

    /// Functionals of `u^X`.
    pub fn terms_at(&self, u: &Field, x: f64) -> Result<Terms> {
        let limit = 0.5 * u.grid().half_width();
        if !(x.abs() < limit) {
            return Err(Error::ShiftOutOfRange { shift: x, limit });
        }
        let profile = self.solver.profile();
        Frame::new(profile, u.grid(), x)?.terms(profile.pair(), u.values())
    }

    pub fn snapshot(&self, t: f64, terms: &Terms, x: f64) -> (FunctionalSnapshot, f64) {
        let p = &self.params;
        let xdot = p.xdot(terms);
        let r = r_main(terms, p.epsilon, p.lambda, p.delta0);
        (FunctionalSnapshot::new(t, terms, x, xdot, r), xdot)
    }

    /// One step of size `dt`: functionals at the start, `Xdot`, the shift update,
    /// then the PDE step. The snapshot describes the start of the step.
    pub fn coupled_step(
        &self,
        pde: &PdeState,
        shift: &ShiftState,
        dt: f64,
    ) -> Result<(PdeState, ShiftState, FunctionalSnapshot)> {
        let start = self.terms_at(&pde.u, shift.x)?;
        let (snap, _) = self.snapshot(pde.t, &start, shift.x);
        let mut log = StepLog::default();
        let (next, next_shift, _) = self.advance(pde, shift, &start, dt, 0, &mut log)?;
        Ok((next, next_shift, snap))
    }

    /// Advance by `dt`, halving the step when the shift relaxation is under-resolved,
    /// when `Y` changes region or when `B` changes sign. Returns the end state and
    /// its functionals.
    pub fn advance(
        &self,
        pde: &PdeState,
        shift: &ShiftState,
        start: &Terms,
        dt: f64,
        depth: u32,
        log: &mut StepLog,
    ) -> Result<(PdeState, ShiftState, Terms)> {
        let p = &self.params;
        if dt * p.stiffness(start) > STIFF_LIMIT && depth < MAX_STIFF_DEPTH {
            log.stiff_halvings += 1;
            return self.split(pde, shift, start, dt, depth, log);
        }
        let xdot0 = p.xdot(start);
        let next = self.solver.step(pde, dt)?;
        let mut x = shift.x + dt * xdot0;
        let mut end = self.terms_at(&next.u, x)?;
        if p.heun {
            let xdot1 = p.xdot(&end);
            x = shift.x + 0.5 * dt * (xdot0 + xdot1);
            end = self.terms_at(&next.u, x)?;
        }
        let (b0, b1) = (start.b_total(), end.b_total());
        let region_change = p.region(start.y) != p.region(end.y);
        let sign_change = b0 * b1 < 0.0 && b0.abs().max(b1.abs()) > p.event_floor;
        if (region_change || sign_change) && depth < p.max_halvings {
            log.halvings += 1;
            return self.split(pde, shift, start, dt, depth, log);
        }
        log.commit(p, start, &end, xdot0, x, dt);
        let out = ShiftState {
            x,
            xdot: xdot0,
            h_accum: shift.h_accum + 2.0 * b0.abs() * dt,
        };
        Ok((next, out, end))
    }

    fn split(
        &self,
        pde: &PdeState,
        shift: &ShiftState,
        start: &Terms,
        dt: f64,
        depth: u32,
        log: &mut StepLog,
    ) -> Result<(PdeState, ShiftState, Terms)> {
        let half = 0.5 * dt;
        let (mid, mid_shift, mid_terms) = self.advance(pde, shift, start, half, depth + 1, log)?;
        self.advance(&mid, &mid_shift, &mid_terms, half, depth + 1, log)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Whether the check decides the overall verdict.
    pub enforced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub completed: bool,
    pub error: Option<String>,
    pub t_reached: f64,
    pub steps: usize,
    pub dt: f64,
    pub grid_points: usize,
    pub half_width: f64,
    pub sigma: f64,
    pub u_plus: f64,
    pub initial_sup_deviation: f64,
    pub initial_entropy: f64,
    pub initial_unweighted_entropy: f64,
    pub final_entropy: f64,
    pub max_relative_increment: f64,
    pub log: StepLog,
    /// `∫ 2|B| dt`
    pub h_l1: f64,
    /// `(2 lambda / (delta0 eps)) ∫ eta(u0|S)`
    pub h_l1_bound: f64,
    pub x_final: f64,
    pub identity_residual: Option<f64>,
    pub hypotheses: Option<HypothesisReport>,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub snapshots: Vec<FunctionalSnapshot>,
}

impl RunReport {
    fn empty(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            config_hash: config.hash(),
            completed: false,
            error: None,
            t_reached: 0.0,
            steps: 0,
            dt: 0.0,
            grid_points: 0,
            half_width: 0.0,
            sigma: 0.0,
            u_plus: 0.0,
            initial_sup_deviation: 0.0,
            initial_entropy: 0.0,
            initial_unweighted_entropy: 0.0,
            final_entropy: 0.0,
            max_relative_increment: 0.0,
            log: StepLog::default(),
            h_l1: 0.0,
            h_l1_bound: 0.0,
            x_final: 0.0,
            identity_residual: None,
            hypotheses: None,
            warnings: Vec::new(),
            checks: Vec::new(),
            pass: false,
            snapshots: Vec::new(),
        }
    }

    pub fn snapshot_rows(&self) -> Vec<[f64; 17]> {
        self.snapshots.iter().map(FunctionalSnapshot::csv_row).collect()
    }

    /// Write `snapshots.csv` and `report.json` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        io::write_csv(
            &dir.join("snapshots.csv"),
            &self.config_hash,
            &FunctionalSnapshot::CSV_HEADER,
            &self.snapshot_rows(),
        )?;
        io::write_json(&dir.join("report.json"), self)
    }

    fn check(&mut self, name: &str, value: f64, tolerance: f64, enforced: bool) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            enforced,
        });
    }
}

/// Hypothesis certificate for the configured pair over `[-2 theta, 2 theta]`
/// widened to contain both end states.
pub fn config_hypotheses(cfg: &ExperimentConfig, u_plus: f64) -> Result<HypothesisReport> {
    let theta = cfg.problem.theta;
    let lo = (-2.0 * theta).min(u_plus).min(cfg.problem.u_minus);
    let hi = (2.0 * theta).max(u_plus).max(cfg.problem.u_minus);
    check_hypotheses(&cfg.pair()?, theta, (lo, hi), HYPOTHESIS_SAMPLES)
}

/// Evolve the configured perturbation to the horizon and collect the contraction diagnostics.
///
/// Setup errors are returned; failures during time stepping end the run with
/// `completed = false` in the report.
pub fn run_contraction(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::empty(cfg);
    let profile = Arc::new(cfg.profile()?);
    report.sigma = profile.sigma();
    report.u_plus = profile.u_plus();
    report.warnings.extend(profile.warnings().iter().cloned());

    let hyp = config_hypotheses(cfg, profile.u_plus())?;
    let hyp_pass = hyp.pass;
    report.hypotheses = Some(hyp);
    if !hyp_pass {
        if cfg.run.assert_theorem {
            report.error = Some("entropy fails the structural hypotheses".into());
            report.check("hypotheses", 1.0, 0.0, true);
            return Ok(report);
        }
        report
            .warnings
            .push("entropy fails the structural hypotheses; run is exploratory".into());
    }

    let grid = cfg.grid_for(&profile)?;
    report.grid_points = grid.len();
    report.half_width = grid.half_width();
    let solver = PdeSolver::new(profile.clone(), grid);
    let u0 = initial_field(&profile, &grid, &cfg.perturbation)?;
    let s = profile.sample_sorted(&grid.nodes()).s;
    let pair = profile.pair();
    report.initial_sup_deviation = u0
        .values()
        .iter()
        .zip(&s)
        .fold(0.0f64, |m, (u, s)| m.max((u - s).abs()));
    let eta0: Vec<f64> = u0
        .values()
        .iter()
        .zip(&s)
        .map(|(&u, &s)| pair.relative_entropy(u, s))
        .collect();
    report.initial_unweighted_entropy = simpson(&eta0, grid.h());
    report.h_l1_bound =
        2.0 * cfg.problem.lambda / (cfg.problem.delta0 * cfg.epsilon()) * report.initial_unweighted_entropy;

    let (lo, hi) = u0
        .values()
        .iter()
        .fold((profile.u_plus(), profile.u_minus()), |(a, b), &v| (a.min(v), b.max(v)));
    // relaxation rate of the shift at the profile itself
    let rest = Frame::new(&profile, &grid, 0.0)?.terms(pair, &s)?;
    let rate = rest.y_x / cfg.epsilon().powi(4);
    let dt_max = cfg.time.dt_safety * solver.cfl_limit(lo, hi).min(STIFF_LIMIT / rate);
    let steps = (cfg.time.t_final / dt_max).ceil() as usize;
    let dt = cfg.time.t_final / steps as f64;
    report.steps = steps;
    report.dt = dt;

    let params = ShiftParams::from_config(cfg);
    let stepper = CoupledStepper::new(solver, params);
    let mut state = stepper.solver().state(u0);
    let mut shift = ShiftState::default();
    let mut terms = stepper.terms_at(&state.u, 0.0)?;
    report.initial_entropy = terms.entropy;
    let mut log = StepLog::default();
    let every = cfg.time.snapshot_every;

    let mut failure = None;
    for k in 0..steps {
        if k % every == 0 {
            let (snap, _) = stepper.snapshot(state.t, &terms, shift.x);
            report.snapshots.push(snap);
        }
        match stepper.advance(&state, &shift, &terms, dt, 0, &mut log) {
            Ok((next, next_shift, next_terms)) => {
                state = next;
                shift = next_shift;
                terms = next_terms;
                // keep the clock on the uniform base grid
                state.t = (k + 1) as f64 * dt;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let (last, xdot) = stepper.snapshot(state.t, &terms, shift.x);
    if failure.is_none() {
        log.gate(&params, &terms, xdot);
        if steps.is_multiple_of(every) {
            report.snapshots.push(last);
        }
    }

    report.completed = failure.is_none();
    report.error = failure.map(|e| e.to_string());
    report.t_reached = state.t;
    report.final_entropy = terms.entropy;
    report.x_final = shift.x;
    report.h_l1 = shift.h_accum;
    report.max_relative_increment = if report.initial_entropy > 0.0 {
        log.max_increment / report.initial_entropy
    } else if log.max_increment > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if report.snapshots.len() >= 3 {
        report.identity_residual = entropy_identity_residual(&report.snapshots).ok();
    }

    let assert = cfg.run.assert_theorem;
    report.check("shift_bound", log.max_shift_excess, 0.0, true);
    report.check(
        "entropy_increment",
        report.max_relative_increment,
        INCREMENT_TOL,
        assert,
    );
    if let Some(r) = log.max_r_near {
        report.check("gate_r_main", r, GATE_R_TOL, assert);
    }
    if let Some(v) = log.max_xy_far {
        report.check("gate_xdot_y", v, GATE_XY_TOL, true);
    }
    if let Some(r) = report.identity_residual {
        report.check("entropy_identity", r, IDENTITY_TOL, false);
    }
    report.log = log;
    report.pass = report.completed && report.checks.iter().all(|c| c.pass || !c.enforced);
    Ok(report)
}

/// Entropy-identity residual at the configured resolution and with the grid
/// spacing halved; the time step follows from the stability limits of each grid.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityStudy {
    pub base: IdentityLevel,
    pub refined: IdentityLevel,
    /// `base.residual / refined.residual`
    pub ratio: f64,
    pub tolerance: f64,
    pub min_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityLevel {
    pub grid_points: usize,
    pub dt: f64,
    pub residual: f64,
    pub completed: bool,
}

/// Smallest accepted residual reduction under refinement.
pub const IDENTITY_MIN_RATIO: f64 = 1.8;

/// Configuration with half the grid spacing.
pub fn refined_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut fine = cfg.clone();
    match fine.grid.points {
        Some(n) => fine.grid.points = Some(2 * (n - 1) + 1),
        None => fine.grid.resolution *= 2.0,
    }
    fine
}

pub fn identity_study(cfg: &ExperimentConfig) -> Result<IdentityStudy> {
    let mut base_cfg = cfg.clone();
    base_cfg.time.snapshot_every = 1;
    let level = |c: &ExperimentConfig| -> Result<IdentityLevel> {
        let r = run_contraction(c)?;
        Ok(IdentityLevel {
            grid_points: r.grid_points,
            dt: r.dt,
            residual: r.identity_residual.unwrap_or(f64::INFINITY),
            completed: r.completed,
        })
    };
    let base = level(&base_cfg)?;
    let refined = level(&refined_config(&base_cfg))?;
    let ratio = base.residual / refined.residual;
    let pass = base.completed && refined.completed && base.residual <= IDENTITY_TOL && ratio >= IDENTITY_MIN_RATIO;
    Ok(IdentityStudy {
        base,
        refined,
        ratio,
        tolerance: IDENTITY_TOL,
        min_ratio: IDENTITY_MIN_RATIO,
        pass,
    })
}
