//! Small scalar solvers shared by the estimators and the design module.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize a unimodal `f` on `[a, b]` by golden-section search until the
/// bracket is narrower than `tol`. Returns the best point seen.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Result of a grid search followed by golden refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub x: f64,
    pub fx: f64,
    /// The coarse optimum sat on the first or last grid point.
    pub at_edge: bool,
}

/// Maximize `f` over an ascending grid, then refine between the neighbours of
/// the best grid point. `lo`/`hi` bound the refinement at the grid edges.
pub fn grid_then_golden(f: impl Fn(f64) -> f64, grid: &[f64], lo: f64, hi: f64, tol: f64) -> GridMax {
    assert!(!grid.is_empty());
    let mut best = 0;
    let mut best_f = f64::NEG_INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let fx = f(x);
        if fx > best_f {
            best = i;
            best_f = fx;
        }
    }
    let left = if best == 0 { lo } else { grid[best - 1] };
    let right = if best + 1 == grid.len() { hi } else { grid[best + 1] };
    let (x, fx) = golden_max(&f, left, right, tol);
    let (x, fx) = if fx >= best_f { (x, fx) } else { (grid[best], best_f) };
    GridMax { x, fx, at_edge: best == 0 || best + 1 == grid.len() }
}

/// Root of a continuous `f` with a sign change on `[a, b]`, by bisection to
/// absolute width `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    if f(b) == 0.0 {
        return b;
    }
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
