use crate::error::{Error, Result};

/// Root of `f` on `[lo, hi]` by bisection, to a bracket no wider than `tol`.
///
/// Returns the end of the final bracket where `f` has the sign of `f(lo)`,
/// so for increasing `f` the result never overshoots the root.
pub fn bisect_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Parameter(format!("empty bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let neg_low = fa < 0.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_low {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a quasi-concave `f` on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    golden_section_trace(f, lo, hi, tol).map(|(x, v, _)| (x, v))
}

/// Like [`golden_section_max`], also returning the bracket width after every step.
pub fn golden_section_trace(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    if !(lo < hi) {
        return Err(Error::Parameter(format!("golden section needs lo < hi, got [{lo}, {hi}]")));
    }
    let tol = tol.max(f64::EPSILON * hi.abs().max(1.0));
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut widths = vec![b - a];
    while b - a > tol {
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
        widths.push(b - a);
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok((best.0, best.1, widths))
}

/// Best of `n` evenly spaced samples on `[lo, hi]`, endpoints included.
pub fn grid_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let n = n.max(2);
    let mut best = (lo, f(lo));
    for s in 1..n {
        let x = lo + (hi - lo) * s as f64 / (n - 1) as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}
