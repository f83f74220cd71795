//! First-order primal-dual solver for the relaxed least gradient problem.
//!
//! The saddle form is
//!
//! ```text
//! min_u max_V  sum_c h^2 V_c . (G u)_c    s.t. phi0(x_c, V_c) <= 1,
//! ```
//!
//! with ghost values of `u` pinned to `f`. Each iteration is
//!
//! ```text
//! V    <- P_ball(V + sigma G u_bar)
//! u'   <- u + tau div V          (interior only)
//! u_bar <- 2 u' - u
//! ```
//!
//! The final dual iterate is the certificate `T`: it is pointwise feasible
//! by construction and its divergence residual is reported.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_io;
use crate::functional::{duality_gap, local_norms, relaxed_energy, GapReport};
use crate::grid::{operator_norm_sq_bound, DomainMask, ScalarGrid, VectorGrid};
use crate::metric::{LocalNorm, MetricField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative gap tolerance: `gap <= tol_gap * max(1, |primal|)`.
    pub tol_gap: f64,
    /// Bound on `max |div T|` over interior cells.
    pub tol_div: f64,
    /// Explicit step sizes; both must be given to take effect.
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    /// Ratio `sigma / tau` is `balance^2`; `None` picks
    /// `max phi(e_k) / range(f)` over the boundary.
    pub step_balance: Option<f64>,
    pub check_every: usize,
    pub seed: u64,
    pub random_init: bool,
    /// Worker threads for cell sweeps; 1 is the serial reference mode.
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 200_000,
            tol_gap: 1e-3,
            tol_div: 1e-6,
            tau: None,
            sigma: None,
            step_balance: None,
            check_every: 100,
            seed: 0,
            random_init: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub div_residual: f64,
    pub feas_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Iteration of the returned iterate.
    pub returned_iteration: usize,
    pub tau: f64,
    pub sigma: f64,
    pub energy: GapReport,
    /// `sum h^2 phi(x, G u)`, the objective the iteration minimizes.
    pub stencil_total: f64,
    pub history: Vec<HistoryEntry>,
    /// Not serialized: keeps report files reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BestIterate {
    score: f64,
    iteration: usize,
    u: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

/// Complete iteration state; resuming from it is bit-exact in serial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
    pub fingerprint: u64,
    pub wall_time_s: f64,
    best: Option<BestIterate>,
}

pub struct SolveOutput {
    pub u: ScalarGrid,
    pub t: VectorGrid,
    pub report: SolveReport,
    pub state: SolverState,
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    Inactive,
    AxisX(f64),
    AxisY(f64),
    Ball(LocalNorm),
}

pub struct Solver<'a> {
    f: &'a ScalarGrid,
    metric: &'a MetricField,
    mask: &'a DomainMask,
    opts: SolverOptions,
    constraints: Vec<Constraint>,
    tau: f64,
    sigma: f64,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Solver<'a> {
    pub fn new(f: &'a ScalarGrid, metric: &'a MetricField, mask: &'a DomainMask, opts: SolverOptions) -> Result<Self> {
        mask.check_scalar(f, "solver f")?;
        if opts.tol_gap <= 0.0 || opts.tol_div <= 0.0 || opts.check_every == 0 {
            return Err(Error::Config("tolerances and check_every must be positive".into()));
        }
        if let Some(bad) = mask.stencil_cells.iter().find(|&&c| !f.values[c].is_finite()) {
            return Err(Error::Domain(format!("boundary data not finite at cell {bad}")));
        }
        let norms = local_norms(metric, mask)?;
        for &c in &mask.interior_cells {
            let a = metric.weight.values[c];
            if !(a >= metric.a_min) {
                return Err(Error::InvalidMetric(format!("weight {a} at interior cell {c} below a_min")));
            }
        }
        let mut constraints = vec![Constraint::Inactive; mask.grid.len()];
        let mut support: f64 = 0.0;
        for &c in &mask.stencil_cells {
            let n = norms[c];
            constraints[c] = match (mask.x_active[c], mask.y_active[c]) {
                (true, true) => Constraint::Ball(n),
                (true, false) => Constraint::AxisX(n.axis_support(0)),
                (false, true) => Constraint::AxisY(n.axis_support(1)),
                (false, false) => Constraint::Inactive,
            };
            support = support.max(n.axis_support(0)).max(n.axis_support(1));
        }

        let (tau, sigma) = match (opts.tau, opts.sigma) {
            (Some(t), Some(s)) => (t, s),
            _ => {
                let base = 1.0 / operator_norm_sq_bound(mask.grid.h).sqrt();
                let balance = match opts.step_balance {
                    Some(b) => b,
                    None => {
                        let range = mask.boundary_range(f);
                        if range > 0.0 && support > 0.0 {
                            support / range
                        } else {
                            1.0
                        }
                    }
                };
                (base / balance, base * balance)
            }
        };
        if !(tau > 0.0 && sigma > 0.0) || tau * sigma * operator_norm_sq_bound(mask.grid.h) > 1.0 + 1e-12 {
            return Err(Error::Config(format!("step sizes tau={tau}, sigma={sigma} violate tau*sigma*||G||^2 <= 1")));
        }

        let pool = if opts.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(opts.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Solver { f, metric, mask, opts, constraints, tau, sigma, pool })
    }

    pub fn steps(&self) -> (f64, f64) {
        (self.tau, self.sigma)
    }

    /// `u` = `f` (or seeded noise inside), `V` = 0.
    pub fn init_state(&self) -> SolverState {
        let mut u = self.f.values.clone();
        if self.opts.random_init {
            let ghosts = self.mask.ghost_values(self.f);
            let lo = ghosts.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ghosts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
            for &c in &self.mask.interior_cells {
                u[c] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
        }
        let n = u.len();
        SolverState {
            u_bar: u.clone(),
            u,
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            iterations: 0,
            converged: false,
            history: Vec::new(),
            fingerprint: self.mask.fingerprint(),
            wall_time_s: 0.0,
            best: None,
        }
    }

    fn check_state(&self, state: &SolverState) -> Result<()> {
        if state.fingerprint != self.mask.fingerprint() || state.u.len() != self.mask.grid.len() {
            return Err(Error::StateMismatch("state was produced on a different mask".into()));
        }
        for &c in &self.mask.stencil_cells {
            if !self.mask.interior[c] && state.u[c].to_bits() != self.f.values[c].to_bits() {
                return Err(Error::StateMismatch(format!("ghost value at cell {c} differs from boundary data")));
            }
        }
        Ok(())
    }

    /// Runs up to `iters` more iterations, stopping early on convergence.
    pub fn run(&self, state: &mut SolverState, iters: usize) -> Result<()> {
        self.check_state(state)?;
        let start = Instant::now();
        let target = state.iterations + iters;
        while !state.converged && state.iterations < target {
            self.step(state)?;
            state.iterations += 1;
            let k = state.iterations;
            if k == 1 || k % self.opts.check_every == 0 {
                self.check(state)?;
            }
        }
        state.wall_time_s += start.elapsed().as_secs_f64();
        Ok(())
    }

    fn gap_of(&self, u: &[f64], vx: &[f64], vy: &[f64]) -> Result<GapReport> {
        let grid = self.mask.grid;
        let u = ScalarGrid { grid, values: u.to_vec() };
        let v = VectorGrid { grid, x: vx.to_vec(), y: vy.to_vec() };
        duality_gap(&u, self.f, self.metric, self.mask, &v)
    }

    fn check(&self, state: &mut SolverState) -> Result<()> {
        let r = self.gap_of(&state.u, &state.vx, &state.vy)?;
        if !(r.relaxed_total.is_finite() && r.dual.is_finite() && r.div_residual.is_finite()) {
            return Err(Error::Numerical(format!("non-finite iterate at iteration {}", state.iterations)));
        }
        state.history.push(HistoryEntry {
            iteration: state.iterations,
            primal: r.relaxed_total,
            dual: r.dual,
            gap: r.gap,
            div_residual: r.div_residual,
            feas_residual: r.feas_residual,
        });
        let score = (r.relative_gap().abs() / self.opts.tol_gap).max(r.div_residual / self.opts.tol_div);
        if state.best.as_ref().is_none_or(|b| score < b.score) {
            state.best = Some(BestIterate {
                score,
                iteration: state.iterations,
                u: state.u.clone(),
                vx: state.vx.clone(),
                vy: state.vy.clone(),
            });
        }
        state.converged = score <= 1.0 && r.feas_residual <= 1e-9;
        Ok(())
    }

    fn step(&self, state: &mut SolverState) -> Result<()> {
        let nx = self.mask.grid.nx;
        let inv_h = 1.0 / self.mask.grid.h;
        let sigma = self.sigma;
        let tau = self.tau;
        let constraints = &self.constraints;
        let interior = &self.mask.interior;

        let SolverState { u, u_bar, vx, vy, .. } = state;
        let u_bar_ref: &[f64] = u_bar;

        let dual_row = |j: usize, rx: &mut [f64], ry: &mut [f64]| -> Result<()> {
            let row0 = j * nx;
            for i in 0..nx {
                let c = row0 + i;
                match constraints[c] {
                    Constraint::Inactive => {}
                    Constraint::AxisX(bound) => {
                        let g = (u_bar_ref[c + 1] - u_bar_ref[c]) * inv_h;
                        rx[i] = (rx[i] + sigma * g).clamp(-bound, bound);
                    }
                    Constraint::AxisY(bound) => {
                        let g = (u_bar_ref[c + nx] - u_bar_ref[c]) * inv_h;
                        ry[i] = (ry[i] + sigma * g).clamp(-bound, bound);
                    }
                    Constraint::Ball(norm) => {
                        let gx = (u_bar_ref[c + 1] - u_bar_ref[c]) * inv_h;
                        let gy = (u_bar_ref[c + nx] - u_bar_ref[c]) * inv_h;
                        let p = norm.project([rx[i] + sigma * gx, ry[i] + sigma * gy])?;
                        rx[i] = p[0];
                        ry[i] = p[1];
                    }
                }
            }
            Ok(())
        };

        match &self.pool {
            Some(pool) => pool.install(|| {
                vx.par_chunks_mut(nx)
                    .zip(vy.par_chunks_mut(nx))
                    .enumerate()
                    .try_for_each(|(j, (rx, ry))| dual_row(j, rx, ry))
            })?,
            None => {
                for (j, (rx, ry)) in vx.chunks_mut(nx).zip(vy.chunks_mut(nx)).enumerate() {
                    dual_row(j, rx, ry)?;
                }
            }
        }

        let vx_ref: &[f64] = vx;
        let vy_ref: &[f64] = vy;
        let primal_row = |j: usize, ru: &mut [f64], rb: &mut [f64]| {
            let row0 = j * nx;
            for i in 0..nx {
                let c = row0 + i;
                if interior[c] {
                    let div = ((vx_ref[c] - vx_ref[c - 1]) + (vy_ref[c] - vy_ref[c - nx])) * inv_h;
                    let old = ru[i];
                    let new = old + tau * div;
                    ru[i] = new;
                    rb[i] = 2.0 * new - old;
                }
            }
        };
        match &self.pool {
            Some(pool) => pool.install(|| {
                u.par_chunks_mut(nx)
                    .zip(u_bar.par_chunks_mut(nx))
                    .enumerate()
                    .for_each(|(j, (ru, rb))| primal_row(j, ru, rb))
            }),
            None => {
                for (j, (ru, rb)) in u.chunks_mut(nx).zip(u_bar.chunks_mut(nx)).enumerate() {
                    primal_row(j, ru, rb);
                }
            }
        }
        Ok(())
    }

    /// Extracts `(u, T, report)`. Converged runs return the final iterate;
    /// otherwise the best checked iterate.
    pub fn output(&self, state: &SolverState) -> Result<SolveOutput> {
        let grid = self.mask.grid;
        let (u, vx, vy, at) = match (&state.best, state.converged) {
            (Some(b), false) => (&b.u, &b.vx, &b.vy, b.iteration),
            _ => (&state.u, &state.vx, &state.vy, state.iterations),
        };
        let energy = self.gap_of(u, vx, vy)?;
        let u = ScalarGrid { grid, values: u.clone() };
        let t = VectorGrid { grid, x: vx.clone(), y: vy.clone() };
        let stencil_total = relaxed_energy(&u, self.f, self.metric, self.mask)?.stencil_total;
        let report = SolveReport {
            iterations: state.iterations,
            converged: state.converged,
            returned_iteration: at,
            tau: self.tau,
            sigma: self.sigma,
            energy,
            stencil_total,
            history: state.history.clone(),
            wall_time_s: state.wall_time_s,
        };
        Ok(SolveOutput { u, t, report, state: state.clone() })
    }
}

pub fn solve_relaxed(
    f: &ScalarGrid,
    metric: &MetricField,
    mask: &DomainMask,
    opts: &SolverOptions,
) -> Result<SolveOutput> {
    let solver = Solver::new(f, metric, mask, opts.clone())?;
    let mut state = solver.init_state();
    solver.run(&mut state, opts.max_iters)?;
    solver.output(&state)
}

/// Continues a previous solve for `extra_iters` iterations.
pub fn resume(
    mut state: SolverState,
    f: &ScalarGrid,
    metric: &MetricField,
    mask: &DomainMask,
    opts: &SolverOptions,
    extra_iters: usize,
) -> Result<SolveOutput> {
    let solver = Solver::new(f, metric, mask, opts.clone())?;
    solver.run(&mut state, extra_iters)?;
    solver.output(&state)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    iterations: usize,
    converged: bool,
    fingerprint: u64,
    history: Vec<HistoryEntry>,
    best_score: Option<f64>,
    best_iteration: Option<usize>,
}

/// Writes `u.csv`, `u_bar.csv`, `V_x.csv`, `V_y.csv` (plus the best iterate,
/// if any) and a `checkpoint.json` sidecar into `dir`.
pub fn save_checkpoint(dir: &Path, state: &SolverState, mask: &DomainMask) -> Result<()> {
    let grid = mask.grid;
    let put = |name: &str, v: &[f64]| {
        field_io::write_field(&dir.join(name), &ScalarGrid { grid, values: v.to_vec() })
    };
    put("u.csv", &state.u)?;
    put("u_bar.csv", &state.u_bar)?;
    put("V_x.csv", &state.vx)?;
    put("V_y.csv", &state.vy)?;
    if let Some(b) = &state.best {
        put("best_u.csv", &b.u)?;
        put("best_V_x.csv", &b.vx)?;
        put("best_V_y.csv", &b.vy)?;
    }
    let meta = CheckpointMeta {
        iterations: state.iterations,
        converged: state.converged,
        fingerprint: state.fingerprint,
        history: state.history.clone(),
        best_score: state.best.as_ref().map(|b| b.score),
        best_iteration: state.best.as_ref().map(|b| b.iteration),
    };
    field_io::write_atomic(&dir.join("checkpoint.json"), serde_json::to_string_pretty(&meta)?.as_bytes())
}

pub fn parse_checkpoint_meta(text: &str) -> Result<(usize, bool, u64)> {
    let meta: CheckpointMeta = serde_json::from_str(text)?;
    Ok((meta.iterations, meta.converged, meta.fingerprint))
}

pub fn load_checkpoint(dir: &Path, mask: &DomainMask) -> Result<SolverState> {
    let meta: CheckpointMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("checkpoint.json"))?)?;
    let get = |name: &str| -> Result<Vec<f64>> {
        let field = field_io::read_field(&dir.join(name))?;
        mask.check_scalar(&field, name)?;
        Ok(field.values)
    };
    let best = match (meta.best_score, meta.best_iteration) {
        (Some(score), Some(iteration)) => Some(BestIterate {
            score,
            iteration,
            u: get("best_u.csv")?,
            vx: get("best_V_x.csv")?,
            vy: get("best_V_y.csv")?,
        }),
        _ => None,
    };
    Ok(SolverState {
        u: get("u.csv")?,
        u_bar: get("u_bar.csv")?,
        vx: get("V_x.csv")?,
        vy: get("V_y.csv")?,
        iterations: meta.iterations,
        converged: meta.converged,
        history: meta.history,
        fingerprint: meta.fingerprint,
        wall_time_s: 0.0,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_mask;
    use crate::metric::NormKind;
    use crate::shape::Shape;

    fn iso(mask: &DomainMask) -> MetricField {
        MetricField::uniform(NormKind::IsotropicEuclidean, mask.grid, 1.0, None).unwrap()
    }

    #[test]
    fn constant_data_converges_immediately() {
        let mask = build_mask(&Shape::disk(0.0, 0.0, 1.0), 16).unwrap();
        let f = ScalarGrid::constant(mask.grid, 2.5);
        let out = solve_relaxed(&f, &iso(&mask), &mask, &SolverOptions::default()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
        assert_eq!(out.report.energy.relaxed_total, 0.0);
        assert_eq!(out.report.energy.gap, 0.0);
        assert!(out.t.x.iter().chain(&out.t.y).all(|v| *v == 0.0));
        assert!(out.u.values.iter().all(|v| *v == 2.5));
    }

    #[test]
    fn step_sizes_respect_bound() {
        let mask = build_mask(&Shape::unit_box(), 16).unwrap();
        let f = ScalarGrid::from_fn(mask.grid, |x, _| 3.0 * x);
        let m = iso(&mask);
        let s = Solver::new(&f, &m, &mask, SolverOptions::default()).unwrap();
        let (tau, sigma) = s.steps();
        assert!(tau * sigma * operator_norm_sq_bound(mask.grid.h) <= 1.0 + 1e-12);
        let bad = SolverOptions { tau: Some(1.0), sigma: Some(1.0), ..Default::default() };
        assert!(Solver::new(&f, &m, &mask, bad).is_err());
    }

    #[test]
    fn iterates_stay_dual_feasible() {
        let mask = build_mask(&Shape::annulus(0.3, 1.0), 12).unwrap();
        let m = MetricField::uniform(NormKind::Riemannian, mask.grid, 1.5, Some(crate::Sym2::new(2.0, 0.4, 1.0)))
            .unwrap();
        let f = ScalarGrid::from_fn(mask.grid, |x, y| x * x - y);
        let opts = SolverOptions { random_init: true, seed: 7, check_every: 10, max_iters: 300, ..Default::default() };
        let solver = Solver::new(&f, &m, &mask, opts).unwrap();
        let mut state = solver.init_state();
        for _ in 0..30 {
            solver.run(&mut state, 10).unwrap();
            let v = VectorGrid { grid: mask.grid, x: state.vx.clone(), y: state.vy.clone() };
            assert!(crate::functional::feasibility_residual(&v, &m, &mask).unwrap() <= 1e-9);
        }
        // weak duality at every checked iterate, up to the divergence slack
        let umax = state.u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for h in &state.history {
            assert!(h.dual <= h.primal + h.div_residual * umax * mask.area() + 1e-9, "{h:?}");
        }
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let mask = build_mask(&Shape::disk(0.0, 0.0, 1.0), 16).unwrap();
        let f = ScalarGrid::from_fn(mask.grid, |x, y| if y > 0.3 { 1.0 } else { x });
        let base = SolverOptions { max_iters: 500, random_init: true, seed: 3, ..Default::default() };
        let a = solve_relaxed(&f, &iso(&mask), &mask, &base).unwrap();
        let mut b = solve_relaxed(&f, &iso(&mask), &mask, &SolverOptions { threads: 3, ..base }).unwrap();
        b.state.wall_time_s = a.state.wall_time_s;
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn resume_is_bit_exact() {
        let mask = build_mask(&Shape::unit_box(), 12).unwrap();
        let f = ScalarGrid::from_fn(mask.grid, |x, y| if y > 1.0 { x } else { 0.0 });
        let opts = SolverOptions { max_iters: 1000, check_every: 50, ..Default::default() };
        let whole = solve_relaxed(&f, &iso(&mask), &mask, &SolverOptions { max_iters: 2000, ..opts.clone() }).unwrap();
        let first = solve_relaxed(&f, &iso(&mask), &mask, &opts).unwrap();
        let second = resume(first.state, &f, &iso(&mask), &mask, &opts, 1000).unwrap();
        assert_eq!(whole.state.u, second.state.u);
        assert_eq!(whole.state.vx, second.state.vx);
        assert_eq!(whole.state.history, second.state.history);
        assert_eq!(
            serde_json::to_string(&whole.report).unwrap(),
            serde_json::to_string(&second.report).unwrap()
        );
    }

    #[test]
    fn resume_after_convergence_is_noop() {
        let mask = build_mask(&Shape::unit_box(), 8).unwrap();
        let f = ScalarGrid::constant(mask.grid, 1.0);
        let out = solve_relaxed(&f, &iso(&mask), &mask, &SolverOptions::default()).unwrap();
        let again = resume(out.state.clone(), &f, &iso(&mask), &mask, &SolverOptions::default(), 500).unwrap();
        assert_eq!(again.state.iterations, out.state.iterations);
    }

    #[test]
    fn resume_with_other_mask_fails() {
        let mask = build_mask(&Shape::unit_box(), 8).unwrap();
        let f = ScalarGrid::zeros(mask.grid);
        let out = solve_relaxed(&f, &iso(&mask), &mask, &SolverOptions { max_iters: 5, ..Default::default() }).unwrap();
        let other = build_mask(&Shape::rect(1.0, 0.75), 8).unwrap();
        let f2 = ScalarGrid::zeros(other.grid);
        let r = resume(out.state, &f2, &iso(&other), &other, &SolverOptions::default(), 10);
        assert!(matches!(r, Err(Error::StateMismatch(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mask = build_mask(&Shape::disk(0.0, 0.0, 1.0), 10).unwrap();
        let f = ScalarGrid::from_fn(mask.grid, |x, y| x * y);
        let opts = SolverOptions { max_iters: 120, check_every: 50, ..Default::default() };
        let out = solve_relaxed(&f, &iso(&mask), &mask, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &out.state, &mask).unwrap();
        let mut loaded = load_checkpoint(dir.path(), &mask).unwrap();
        loaded.wall_time_s = out.state.wall_time_s;
        assert_eq!(loaded, out.state);
    }
}
