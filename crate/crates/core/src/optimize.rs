//! Bounded scalar minimization.

/// Grid points used to bracket the minimum before refinement.
pub const GRID_POINTS: usize = 99;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMin {
    pub x: f64,
    pub f: f64,
    /// The minimizer lies within `tol` of an end of the search interval.
    pub at_bound: bool,
    pub evaluations: usize,
}

/// Evenly spaced grid with both bounds included.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Minimizes `f` over `[lo, hi]`.
///
/// A grid scan brackets the global minimum, golden-section search narrows the
/// bracket, and bisection on the sign of a central-difference derivative
/// finishes the job to `tol`.
pub fn minimize_bounded(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> ScalarMin {
    assert!(lo < hi && tol > 0.0);
    let mut evals = 0usize;
    let mut eval = |x: f64| {
        evals += 1;
        f(x)
    };

    let xs = grid(lo, hi, GRID_POINTS);
    let fs: Vec<f64> = xs.iter().map(|&x| eval(x)).collect();
    let k = fs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    let (mut a, mut b) = (xs[k.saturating_sub(1)], xs[(k + 1).min(xs.len() - 1)]);

    // golden section down to a coarse width
    let coarse = (tol * 100.0).max(1e-9);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while b - a > coarse {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }

    // derivative-sign bisection
    let h = (tol * 1e-2).max(1e-9);
    let mut deriv = |x: f64| {
        let (l, r) = ((x - h).max(lo), (x + h).min(hi));
        (eval(r) - eval(l)) / (r - l)
    };
    let (da, db) = (deriv(a), deriv(b));
    let x = if da < 0.0 && db > 0.0 {
        let (mut l, mut r) = (a, b);
        while r - l > tol {
            let m = 0.5 * (l + r);
            if deriv(m) > 0.0 {
                r = m;
            } else {
                l = m;
            }
        }
        0.5 * (l + r)
    } else if fc <= fd {
        c
    } else {
        d
    };

    // the grid may have found a better endpoint than the interior refinement
    let (mut best_x, mut best_f) = (x, eval(x));
    for (&gx, &gf) in xs.iter().zip(&fs) {
        if gf < best_f {
            best_x = gx;
            best_f = gf;
        }
    }
    ScalarMin {
        x: best_x,
        f: best_f,
        at_bound: best_x - lo <= tol || hi - best_x <= tol,
        evaluations: evals,
    }
}
