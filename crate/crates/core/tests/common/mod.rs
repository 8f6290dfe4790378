#![allow(dead_code)]

//! Test-only oracles that do not share code paths with the library.

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 60)
}

/// Log of ∫ Π N(r_i; s_i mu, sigma²) N(mu; 0, tau²) dmu by quadrature.
pub fn log_marginal_by_quadrature(r: &[f64], s: &[f64], sigma2: f64, tau2: f64) -> f64 {
    let log_joint = |mu: f64| -> f64 {
        let mut acc = -0.5 * (2.0 * std::f64::consts::PI * tau2).ln() - mu * mu / (2.0 * tau2);
        for (ri, si) in r.iter().zip(s) {
            acc += -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() - (ri - si * mu).powi(2) / (2.0 * sigma2);
        }
        acc
    };
    // Locate the mode by golden-section search so the integrand can be shifted.
    let (mut lo, mut hi) = (-1e3, 1e3);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if log_joint(a) > log_joint(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = log_joint(mode);
    // Curvature-based width: the integrand is negligible beyond 40 sds.
    let prec = 1.0 / tau2 + s.iter().map(|v| v * v).sum::<f64>() / sigma2;
    let width = 40.0 / prec.sqrt();
    let f = |mu: f64| (log_joint(mu) - peak).exp();
    let integral = adaptive_simpson(&f, mode - width, mode + width, 1e-14);
    peak + integral.ln()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    mean_se(&means).1
}
