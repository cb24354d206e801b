//! One-dimensional search: grid scan with golden-section refinement, and bisection.

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_ITERS: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMax {
    pub x: f64,
    pub value: f64,
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> ScalarMax {
    let g = |x: f64| finite_or_neg_inf(f(x));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..MAX_GOLDEN_ITERS {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    if fc >= fd {
        ScalarMax { x: c, value: fc }
    } else {
        ScalarMax { x: d, value: fd }
    }
}

/// Maximizes `f` on `[a, b]`: evaluates a uniform grid of `grid` points
/// (endpoints included), then refines every local maximum by golden section.
/// Ties keep the smallest `x`. Returns `None` if `f` is nowhere finite.
pub fn grid_golden_max(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid: usize,
    tol: f64,
) -> Option<ScalarMax> {
    let n = grid.max(3);
    let h = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { b } else { a + h * k as f64 })
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| finite_or_neg_inf(f(x))).collect();

    let mut best: Option<ScalarMax> = None;
    let mut offer = |cand: ScalarMax| {
        if cand.value.is_finite() && best.is_none_or(|b| cand.value > b.value) {
            best = Some(cand);
        }
    };
    for k in 0..n {
        offer(ScalarMax { x: xs[k], value: vs[k] });
        if k == 0 || k + 1 == n {
            continue;
        }
        let (l, m, r) = (vs[k - 1], vs[k], vs[k + 1]);
        if m >= l && m >= r && (m > l || m > r) {
            let refined = golden_max(&f, xs[k - 1], xs[k + 1], tol);
            if refined.value > m {
                offer(refined);
            }
        }
    }
    best
}

/// Root of a monotone function on `[lo, hi]` with `f(lo)` and `f(hi)` of
/// opposite sign (or zero). Stops when the bracket stops shrinking.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let lo_sign = flo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
