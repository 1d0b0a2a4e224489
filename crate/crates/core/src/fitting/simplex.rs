//! Nelder-Mead simplex minimisation with a fixed initial simplex.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Evaluation budget.
    pub max_evals: usize,
    /// Convergence when `f(worst) - f(best) < f_tol`.
    pub f_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fun: f64,
    pub evals: usize,
    pub converged: bool,
    /// Objective spread over the initial simplex; zero means the objective
    /// did not respond to any coordinate.
    pub initial_spread: f64,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "empty initial point");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if x0[i] == 0.0 { 2.5e-4 } else { 0.05 * x0[i] };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let mut trace = Vec::new();
    let mut initial_spread = None;

    loop {
        // Stable sort keeps the earlier vertex first on ties.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        initial_spread.get_or_insert(spread);
        trace.push(values[0]);
        if spread < opts.f_tol || evals >= opts.max_evals {
            return SimplexResult {
                x: simplex.swap_remove(0),
                fun: values[0],
                evals,
                converged: spread < opts.f_tol,
                initial_spread: initial_spread.unwrap_or(spread),
                trace,
            };
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let reflected = lerp(&centroid, &simplex[n], -REFLECT);
        let f_r = f(&reflected);
        evals += 1;

        if f_r < values[0] {
            let expanded = lerp(&centroid, &simplex[n], -EXPAND);
            let f_e = f(&expanded);
            evals += 1;
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }

        let (contracted, f_c) = if f_r < values[n] {
            let c = lerp(&centroid, &reflected, CONTRACT);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = lerp(&centroid, &simplex[n], CONTRACT);
            let fc = f(&c);
            (c, fc)
        };
        evals += 1;
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }

        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = lerp(&best, &simplex[i], SHRINK);
            values[i] = f(&simplex[i]);
            evals += 1;
        }
    }
}

/// Re-runs the search from each converged point with a fresh simplex
/// until a restart no longer improves the objective, up to `restarts` times.
/// Guards against collapse of the simplex onto a non-stationary point.
pub fn minimize_restarted<F>(mut f: F, x0: &[f64], opts: &SimplexOptions, restarts: usize) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = minimize(&mut f, x0, opts);
    for _ in 0..restarts {
        if !best.converged {
            break;
        }
        let next = minimize(&mut f, &best.x, opts);
        let improved = next.fun < best.fun - opts.f_tol;
        let evals = best.evals + next.evals;
        let mut trace = std::mem::take(&mut best.trace);
        trace.extend(next.trace.iter().map(|&v| v.min(best.fun)));
        let initial_spread = best.initial_spread;
        best = if next.fun <= best.fun { next } else { best };
        best.evals = evals;
        best.trace = trace;
        best.initial_spread = initial_spread;
        if !improved {
            break;
        }
    }
    best
}
