//! Adaptive-Simpson quadrature oracle for Beta tail masses, independent of
//! the continued-fraction implementation under test.

/// Adaptive Simpson on `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// `B(a, a)` via a substitution that removes the endpoint singularities:
/// with `x = u^(1/a)` the half-integral becomes
/// `(1/a) * Integral_0^{(1/2)^a} (1 - u^(1/a))^(a-1) du`, which is smooth.
pub fn beta_aa_normalizer(a: f64) -> f64 {
    let upper = 0.5f64.powf(a);
    let integrand = move |u: f64| (1.0 - u.powf(1.0 / a)).powf(a - 1.0);
    2.0 / a * adaptive_simpson(&integrand, 0.0, upper, 1e-12)
}

/// `P(X outside [gamma, 1-gamma])` for `X ~ Beta(a, a)`, entirely by
/// quadrature: the interior integral avoids the singular endpoints.
pub fn beta_tail_mass(a: f64, gamma: f64) -> f64 {
    let normalizer = beta_aa_normalizer(a);
    let density = move |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(a - 1.0) / normalizer;
    1.0 - adaptive_simpson(&density, gamma, 1.0 - gamma, 1e-12)
}
