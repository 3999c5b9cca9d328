//! Derivative-free simplex minimization with restarts.

/// Reflection, expansion, contraction and shrink coefficients.
const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Iteration cap for a single simplex run.
    pub max_iter: usize,
    /// Fresh simplices built around the incumbent after the first run.
    pub max_restarts: usize,
    /// Largest coordinate distance from the best vertex at convergence.
    pub x_tol: f64,
    /// Objective spread across the simplex, relative to `max(|f_best|, 1)`.
    pub f_rel_tol: f64,
    /// Vertex offsets are `step_scale * max(|x_k|, 1)` along each axis.
    pub step_scale: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 2000,
            max_restarts: 5,
            x_tol: 1e-6,
            f_rel_tol: 1e-9,
            step_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `objective` from `x0`.
///
/// Each run stops when the simplex fits within `x_tol` of its best vertex
/// and the objective spread is below `f_rel_tol`, or after `max_iter`
/// iterations. Restarts around the incumbent continue until one fails to
/// improve it or `max_restarts` is used up; the result is converged when the
/// last run met the tolerances.
pub fn nelder_mead<F>(objective: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadReport
where
    F: FnMut(&[f64]) -> f64,
{
    let mut obj = Counted { f: objective, calls: 0 };
    let mut best_x = x0.to_vec();
    let mut best_f = obj.eval(x0);
    let mut iterations = 0;
    let mut converged = false;
    let mut restarts = 0;

    if x0.is_empty() {
        return NelderMeadReport {
            x: best_x,
            f: best_f,
            converged: true,
            iterations: 0,
            restarts: 0,
            evaluations: obj.calls,
        };
    }

    for attempt in 0..=opts.max_restarts {
        restarts = attempt;
        let simplex = initial_simplex(&best_x, best_f, &mut obj, opts.step_scale);
        let run = run_simplex(simplex, &mut obj, opts);
        iterations += run.iterations;
        let improvement = best_f - run.f;
        if run.f <= best_f {
            best_x = run.x;
            best_f = run.f;
        }
        converged = run.converged;
        if run.converged && attempt > 0 && improvement <= opts.f_rel_tol * best_f.abs().max(1.0) {
            break;
        }
    }

    NelderMeadReport {
        x: best_x,
        f: best_f,
        converged,
        iterations,
        restarts,
        evaluations: obj.calls,
    }
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

struct RunResult {
    x: Vec<f64>,
    f: f64,
    converged: bool,
    iterations: usize,
}

fn initial_simplex<F: FnMut(&[f64]) -> f64>(x0: &[f64], f0: f64, obj: &mut Counted<F>, scale: f64) -> Vec<Vertex> {
    let mut simplex = vec![Vertex { x: x0.to_vec(), f: f0 }];
    for k in 0..x0.len() {
        let mut x = x0.to_vec();
        x[k] += scale * x0[k].abs().max(1.0);
        let f = obj.eval(&x);
        simplex.push(Vertex { x, f });
    }
    simplex
}

fn converged(simplex: &[Vertex], opts: &NelderMeadOptions) -> bool {
    let best = &simplex[0];
    let worst = &simplex[simplex.len() - 1];
    let spread = worst.f - best.f;
    let f_ok = spread.is_finite() && spread <= opts.f_rel_tol * best.f.abs().max(1.0);
    let diameter = simplex[1..]
        .iter()
        .flat_map(|v| v.x.iter().zip(&best.x).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max);
    f_ok && diameter <= opts.x_tol
}

fn toward(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(mut simplex: Vec<Vertex>, obj: &mut Counted<F>, opts: &NelderMeadOptions) -> RunResult {
    let n = simplex.len() - 1;
    let mut iterations = 0;
    let mut done = false;
    loop {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        if converged(&simplex, opts) {
            done = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(&v.x) {
                *c += x / n as f64;
            }
        }
        let (f_best, f_second_worst, f_worst) = (simplex[0].f, simplex[n - 1].f, simplex[n].f);
        let worst = simplex[n].x.clone();

        let xr = toward(&centroid, &worst, -REFLECT);
        let fr = obj.eval(&xr);
        if fr < f_best {
            let xe = toward(&centroid, &xr, EXPAND);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { Vertex { x: xe, f: fe } } else { Vertex { x: xr, f: fr } };
            continue;
        }
        if fr < f_second_worst {
            simplex[n] = Vertex { x: xr, f: fr };
            continue;
        }
        if fr < f_worst {
            let xc = toward(&centroid, &xr, CONTRACT);
            let fc = obj.eval(&xc);
            if fc <= fr {
                simplex[n] = Vertex { x: xc, f: fc };
                continue;
            }
        } else {
            let xc = toward(&centroid, &worst, CONTRACT);
            let fc = obj.eval(&xc);
            if fc < f_worst {
                simplex[n] = Vertex { x: xc, f: fc };
                continue;
            }
        }
        let best = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            v.x = toward(&best, &v.x, SHRINK);
            v.f = obj.eval(&v.x);
        }
    }
    let best = simplex.swap_remove(0);
    RunResult {
        x: best.x,
        f: best.f,
        converged: done,
        iterations,
    }
}
