//! Adaptive Simpson quadrature, used to build the deterministic references
//! (normalizations, CDF tables, tilted-measure probabilities) that the Monte
//! Carlo estimators are tested against.

/// Adaptive Simpson integral of `f` over [a, b] to absolute tolerance `tol`.
/// The interval is pre-split into 16 panels before the adaptive recursion so
/// that a narrow bump (or a symmetric integrand vanishing at the midpoint)
/// cannot slip between the initial probe points.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(a.is_finite() && b.is_finite() && b > a);
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let m = 0.5 * (lo + hi);
        let fm = f(m);
        let whole = simpson(lo, hi, flo, fm, fhi);
        total += adapt(f, lo, hi, flo, fm, fhi, whole, tol / PANELS as f64, 46);
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Iterated 2-d integral of `f` over [ax,bx] × [ay,by]; the inner integral is
/// evaluated to a tighter tolerance so the outer adaptivity stays meaningful.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    tol: f64,
) -> f64 {
    let inner_tol = tol / (10.0 * (bx - ax));
    integrate(&|x| integrate(&|y| f(x, y), ay, by, inner_tol), ax, bx, tol)
}

/// Cumulative distribution table of an (unnormalized) density on a uniform
/// grid of `cells + 1` points: per-cell Simpson masses, normalized at the end.
/// Returns (grid, cdf); cdf[0] = 0, cdf[cells] = 1.
pub fn cdf_table<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cells: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(cells >= 2 && b > a);
    let h = (b - a) / cells as f64;
    let mut xs = Vec::with_capacity(cells + 1);
    let mut cdf = Vec::with_capacity(cells + 1);
    xs.push(a);
    cdf.push(0.0);
    let mut acc = 0.0;
    let mut f_lo = f(a);
    for i in 1..=cells {
        let hi = a + h * i as f64;
        let mid = hi - 0.5 * h;
        let f_hi = f(hi);
        acc += h / 6.0 * (f_lo + 4.0 * f(mid) + f_hi);
        xs.push(hi);
        cdf.push(acc);
        f_lo = f_hi;
    }
    assert!(acc > 0.0 && acc.is_finite(), "cdf_table: density has no mass");
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    (xs, cdf)
}

/// Evaluate a (grid, cdf) table at `x` by linear interpolation.
pub fn eval_cdf_table(xs: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[xs.len() - 1] {
        return 1.0;
    }
    let mut lo = 0usize;
    let mut hi = xs.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    cdf[lo] + t * (cdf[hi] - cdf[lo])
}
