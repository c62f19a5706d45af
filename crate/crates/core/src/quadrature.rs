//! Adaptive Simpson quadrature.
//!
//! Used as the fallback and cross-check for the closed-form leg integrals.

/// Integrates `f` over `[a, b]` to an estimated absolute error of `tol`,
/// recursing at most `max_depth` levels.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
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
        // Richardson extrapolation
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 30);
        assert!((v - 0.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| x * x, -1.0, 2.0, 1e-12, 30);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_lorentzian() {
        // ∫_{-5}^{5} 1/(t² + 25) dt = (2/5)·atan(1)
        let v = adaptive_simpson(|t| 1.0 / (t * t + 25.0), -5.0, 5.0, 1e-14, 40);
        let exact = 0.4 * 1f64.atan();
        assert!(((v - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(adaptive_simpson(|x| x, 3.0, 3.0, 1e-9, 10), 0.0);
    }
}
