//! Limited-memory BFGS with a strong-Wolfe line search and the percent-change
//! stopping rule used by the phase-retrieval solvers.

use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

/// Smooth objective over `R^n`.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Points outside the domain are rejected by the line search, which then
    /// shortens the step.
    fn feasible(&self, _x: &[f64]) -> bool {
        true
    }

    /// Writes the gradient into `grad` and returns the objective value.
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapts a closure `(x, grad) -> f` into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub history: usize,
    pub max_iters: usize,
    /// Number of consecutive iterations both criteria must hold (`M`).
    pub m_consecutive: usize,
    /// Objective change threshold in percent (`L_c`).
    pub obj_tol_pct: f64,
    /// Mean absolute reconstruction change threshold in percent (`L_r`).
    pub recon_tol_pct: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            history: 64,
            max_iters: 10_000,
            m_consecutive: 5,
            obj_tol_pct: 1.0,
            recon_tol_pct: 0.5,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search: 25,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), String> {
        if self.history == 0 || self.max_iters == 0 || self.m_consecutive == 0 {
            return Err("history, max_iters and m_consecutive must be positive".into());
        }
        if self.history > self.max_iters {
            return Err(format!(
                "history ({}) cannot exceed max_iters ({})",
                self.history, self.max_iters
            ));
        }
        if !(self.obj_tol_pct > 0.0 && self.recon_tol_pct > 0.0) {
            return Err("percent tolerances must be positive".into());
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err("Wolfe constants must satisfy 0 < c1 < c2 < 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    NumericalFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
            Termination::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 0 for the starting point.
    pub iteration: usize,
    pub objective: f64,
    pub obj_change_pct: Option<f64>,
    pub recon_change_pct: Option<f64>,
    pub step: f64,
    /// Cumulative objective evaluations.
    pub evaluations: usize,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolveTrace {
    /// Number of LBFGS iterations taken (the starting point is not counted).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    pub fn initial_objective(&self) -> Option<f64> {
        self.records.first().map(|r| r.objective)
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_path(&self, other: &SolveTrace) -> bool {
        self.termination == other.termination
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.objective.to_bits() == b.objective.to_bits()
                    && a.obj_change_pct.map(f64::to_bits) == b.obj_change_pct.map(f64::to_bits)
                    && a.recon_change_pct.map(f64::to_bits) == b.recon_change_pct.map(f64::to_bits)
                    && a.step.to_bits() == b.step.to_bits()
                    && a.evaluations == b.evaluations
            })
    }

    /// One `key=value` record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let pct = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |v| format!("{v:e}"));
            out.push_str(&format!(
                "iteration={} objective={:e} obj_change_pct={} recon_change_pct={} step={:e} evaluations={} elapsed_s={:.6}\n",
                r.iteration,
                r.objective,
                pct(r.obj_change_pct),
                pct(r.recon_change_pct),
                r.step,
                r.evaluations,
                r.elapsed_s
            ));
        }
        out.push_str(&format!(
            "termination={} iterations={}\n",
            self.termination,
            self.iterations()
        ));
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn percent_change(new: f64, old: f64) -> f64 {
    let diff = (new - old).abs();
    if diff == 0.0 {
        0.0
    } else if old == 0.0 {
        f64::INFINITY
    } else {
        100.0 * diff / old.abs()
    }
}

fn recon_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b).abs()).sum();
    let scale: f64 = new.iter().map(|v| v.abs()).sum();
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        100.0 * diff / scale
    }
}

enum LineSearchError {
    NonFinite,
}

struct Evaluator<'a, O: ?Sized> {
    objective: &'a O,
    evaluations: usize,
}

struct Trial {
    t: f64,
    f: f64,
    g: Vec<f64>,
    x: Vec<f64>,
}

impl<O: Objective + ?Sized> Evaluator<'_, O> {
    /// `None` for infeasible points.
    fn at(&mut self, x: &[f64], d: &[f64], t: f64) -> Result<Option<Trial>, LineSearchError> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        if !self.objective.feasible(&xt) {
            return Ok(None);
        }
        let mut g = vec![0.0; xt.len()];
        let f = self.objective.evaluate(&xt, &mut g);
        self.evaluations += 1;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(LineSearchError::NonFinite);
        }
        Ok(Some(Trial { t, f, g, x: xt }))
    }
}

/// Minimizer of the cubic through `(x1, f1, g1)` and `(x2, f2, g2)`, clamped
/// to `bounds`.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let t = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if t.is_finite() {
            return t.clamp(lo, hi);
        }
    }
    0.5 * (lo + hi)
}

/// Strong-Wolfe search along `d` from `x` (Nocedal & Wright, alg. 3.5/3.6).
/// Returns the accepted trial, or the best sufficient-decrease point found
/// when the curvature condition could not be met, or `None`.
fn strong_wolfe<O: Objective + ?Sized>(
    eval: &mut Evaluator<'_, O>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    t_init: f64,
    settings: &SolverSettings,
) -> Result<Option<Trial>, LineSearchError> {
    let dphi0 = dot(g0, d);
    let (c1, c2) = (settings.wolfe_c1, settings.wolfe_c2);
    let armijo = |t: f64, f: f64| f <= f0 + c1 * t * dphi0;
    let d_scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut prev_t = 0.0;
    let mut prev_f = f0;
    let mut prev_dphi = dphi0;
    let mut prev_trial: Option<Trial> = None;
    let mut t = t_init;
    let mut budget = settings.max_line_search;

    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return Ok(prev_trial);
        }
        budget -= 1;
        let trial = match eval.at(x, d, t)? {
            Some(tr) => tr,
            None => {
                t = prev_t + 0.5 * (t - prev_t);
                if (t - prev_t) * d_scale < 1e-300 {
                    return Ok(prev_trial);
                }
                continue;
            }
        };
        let dphi = dot(&trial.g, d);
        if !armijo(t, trial.f) || (prev_trial.is_some() && trial.f >= prev_f) {
            lo = (prev_t, prev_f, prev_dphi, prev_trial);
            hi = (t, trial.f, dphi);
            break;
        }
        if dphi.abs() <= -c2 * dphi0 {
            return Ok(Some(trial));
        }
        if dphi >= 0.0 {
            hi = (prev_t, prev_f, prev_dphi);
            lo = (t, trial.f, dphi, Some(trial));
            break;
        }
        let next = cubic_interpolate(prev_t, prev_f, prev_dphi, t, trial.f, dphi, (t + 0.01 * (t - prev_t), 10.0 * t));
        prev_t = t;
        prev_f = trial.f;
        prev_dphi = dphi;
        prev_trial = Some(trial);
        t = next;
    }

    // Zoom: `lo` satisfies sufficient decrease and has the lower value.
    while budget > 0 {
        budget -= 1;
        let (lo_t, lo_f, lo_dphi) = (lo.0, lo.1, lo.2);
        let (hi_t, hi_f, hi_dphi) = hi;
        if (hi_t - lo_t).abs() * d_scale < 1e-14 * (1.0 + lo_t.abs() * d_scale) {
            break;
        }
        let (a, b) = if lo_t < hi_t { (lo_t, hi_t) } else { (hi_t, lo_t) };
        let width = b - a;
        let mut t = if hi_f.is_finite() {
            cubic_interpolate(lo_t, lo_f, lo_dphi, hi_t, hi_f, hi_dphi, (a, b))
        } else {
            0.5 * (a + b)
        };
        if t < a + 0.1 * width || t > b - 0.1 * width {
            t = 0.5 * (a + b);
        }
        let trial = match eval.at(x, d, t)? {
            Some(tr) => tr,
            None => {
                hi = (t, f64::INFINITY, f64::NAN);
                continue;
            }
        };
        let dphi = dot(&trial.g, d);
        if !armijo(t, trial.f) || trial.f >= lo_f {
            hi = (t, trial.f, dphi);
        } else {
            if dphi.abs() <= -c2 * dphi0 {
                return Ok(Some(trial));
            }
            if dphi * (hi_t - lo_t) >= 0.0 {
                hi = (lo_t, lo_f, lo_dphi);
            }
            lo = (t, trial.f, dphi, Some(trial));
        }
    }
    Ok(lo.3)
}

/// Minimizes `objective` from `x0`.
///
/// Terminates when the percent objective change is below `obj_tol_pct` and
/// the percent mean absolute change of `x` is below `recon_tol_pct` for
/// `m_consecutive` consecutive iterations, after `max_iters` iterations, or
/// on the first non-finite objective or gradient. The returned point is the
/// last finite iterate.
pub fn lbfgs_minimize<O: Objective + ?Sized>(
    objective: &O,
    x0: Vec<f64>,
    settings: &SolverSettings,
) -> (Vec<f64>, SolveTrace) {
    let start = Instant::now();
    let n = x0.len();
    debug_assert_eq!(n, objective.dim());
    let mut eval = Evaluator {
        objective,
        evaluations: 0,
    };
    let mut records = Vec::new();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective.evaluate(&x, &mut g);
    eval.evaluations += 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return (
            x,
            SolveTrace {
                records,
                termination: Termination::NumericalFailure,
            },
        );
    }
    records.push(IterationRecord {
        iteration: 0,
        objective: f,
        obj_change_pct: None,
        recon_change_pct: None,
        step: 0.0,
        evaluations: eval.evaluations,
        elapsed_s: start.elapsed().as_secs_f64(),
    });

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.history);
    let mut satisfied = 0usize;
    let mut termination = Termination::MaxIters;

    for iteration in 1..=settings.max_iters {
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let scale = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= scale;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut gtd = dot(&g, &d);
        if !(gtd < 0.0) && !memory.is_empty() {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            gtd = dot(&g, &d);
        }

        let mut step = 0.0;
        let mut moved = None;
        if gtd < 0.0 {
            let t_init = if memory.is_empty() {
                let g1: f64 = g.iter().map(|v| v.abs()).sum();
                (1.0 / g1).min(1.0)
            } else {
                1.0
            };
            match strong_wolfe(&mut eval, &x, f, &g, &d, t_init, settings) {
                Err(LineSearchError::NonFinite) => {
                    termination = Termination::NumericalFailure;
                    break;
                }
                Ok(Some(trial)) => {
                    step = trial.t;
                    moved = Some(trial);
                }
                Ok(None) => {
                    memory.clear();
                }
            }
        }

        let (obj_pct, recon_pct) = match moved {
            Some(trial) => {
                let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE).sqrt() * dot(&s, &s).sqrt() {
                    if memory.len() == settings.history {
                        memory.pop_front();
                    }
                    memory.push_back((s, y, 1.0 / sy));
                }
                let obj_pct = percent_change(trial.f, f);
                let recon_pct = recon_change(&trial.x, &x);
                x = trial.x;
                g = trial.g;
                f = trial.f;
                (obj_pct, recon_pct)
            }
            None => (0.0, 0.0),
        };
        records.push(IterationRecord {
            iteration,
            objective: f,
            obj_change_pct: Some(obj_pct),
            recon_change_pct: Some(recon_pct),
            step,
            evaluations: eval.evaluations,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        if obj_pct < settings.obj_tol_pct && recon_pct < settings.recon_tol_pct {
            satisfied += 1;
        } else {
            satisfied = 0;
        }
        if satisfied >= settings.m_consecutive {
            termination = Termination::Converged;
            break;
        }
    }
    (x, SolveTrace {
        records,
        termination,
    })
}
