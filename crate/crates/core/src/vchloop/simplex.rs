//! Nelder–Mead simplex search for noisy or exact objectives.

/// Search settings. `f_tol` is the absolute spread of vertex values at which
/// the simplex is considered converged; with `noise_aware` the threshold is
/// raised to twice the largest vertex standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub scale: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evals: usize,
    pub noise_aware: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { scale: 0.3, f_tol: 1e-10, x_tol: 1e-9, max_evals: 2000, noise_aware: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Clone)]
struct Vertex {
    x: Vec<f64>,
    f: f64,
    se: f64,
}

/// Minimizes `f`, which returns `(value, stderr)`. Non-finite values are
/// treated as `+inf`. The initial simplex is `x0` plus `scale` along each axis.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> (f64, f64),
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let (v, se) = f(x);
        Vertex { x: x.to_vec(), f: if v.is_finite() { v } else { f64::INFINITY }, se }
    };

    let mut simplex = vec![eval(x0, &mut evals)];
    if n == 0 {
        let v = &simplex[0];
        return SimplexResult { x: v.x.clone(), value: v.f, stderr: v.se, evaluations: evals, converged: true, budget_exhausted: false };
    }
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.scale;
        simplex.push(eval(&x, &mut evals));
    }

    let (mut converged, mut exhausted) = (false, false);
    loop {
        // stable: ties keep the earlier vertex first
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        let spread = simplex[n].f - simplex[0].f;
        let noise = simplex.iter().map(|v| v.se).fold(0.0, f64::max);
        let f_tol = if opts.noise_aware { opts.f_tol.max(2.0 * noise) } else { opts.f_tol };
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= f_tol || x_spread <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            exhausted = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|v| v.x[i]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.x).map(|(c, w)| c + t * (c - w)).collect() };

        let r = eval(&along(REFLECT), &mut evals);
        if r.f < simplex[0].f {
            let e = eval(&along(EXPAND), &mut evals);
            simplex[n] = if e.f < r.f { e } else { r };
            continue;
        }
        if r.f < simplex[n - 1].f {
            simplex[n] = r;
            continue;
        }
        let c = if r.f < worst.f { eval(&along(CONTRACT), &mut evals) } else { eval(&along(-CONTRACT), &mut evals) };
        if c.f < r.f.min(worst.f) {
            simplex[n] = c;
            continue;
        }
        let best = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&v.x).map(|(b, xi)| b + SHRINK * (xi - b)).collect();
            *v = eval(&x, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = &simplex[0];
    SimplexResult { x: best.x.clone(), value: best.f, stderr: best.se, evaluations: evals, converged, budget_exhausted: exhausted }
}
