#![allow(dead_code)]

//! Reference computations that share no code with the library.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `eps`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Integral over `[0, inf)` through `x = u / (1 - u)`.
pub fn simpson_half_line<F: Fn(f64) -> f64>(f: &F, eps: f64) -> f64 {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - u;
        f(u / w) / (w * w)
    };
    simpson(&g, 0.0, 1.0, eps)
}

/// Gamma density with integer shape, from the textbook formula.
pub fn gamma_pdf(x: f64, shape: u32, scale: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if shape == 1 { 1.0 / scale } else { 0.0 };
    }
    let mut fact = 1.0;
    for i in 2..shape {
        fact *= i as f64;
    }
    (x / scale).powi(shape as i32 - 1) * (-x / scale).exp() / (scale * fact)
}

/// Density of a sum of independent gammas by repeated numerical convolution.
pub fn convolution(shapes: &[u32], scales: &[f64], x: f64) -> f64 {
    if shapes.len() == 1 {
        return gamma_pdf(x, shapes[0], scales[0]);
    }
    if x <= 0.0 {
        return 0.0;
    }
    let f = |u: f64| gamma_pdf(u, shapes[0], scales[0]) * convolution(&shapes[1..], &scales[1..], x - u);
    // geometric panel edges from both ends resolve mass piled near u = 0
    // (leading density) and near u = x (the rest of the sum)
    let small = 1e-3 * scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut edges = vec![0.0, x];
    let mut c = small;
    while c < x {
        edges.push(c);
        edges.push(x - c);
        c *= 4.0;
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges.windows(2).map(|w| simpson(&f, w[0], w[1], 1e-14)).sum()
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// `E1(x)` as `int_0^1 exp(-x/u)/u du`.
pub fn e1(x: f64) -> f64 {
    let f = |u: f64| if u == 0.0 { 0.0 } else { (-x / u).exp() / u };
    simpson(&f, 0.0, 1.0, 1e-15 * (-x).exp() / (1.0 + x))
}
