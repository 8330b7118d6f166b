//! Small special-function kit for the meta-distribution solver: a complex
//! binomial coefficient, a Gauss-Legendre integrator, and the hypergeometric
//! kernel behind the interference moments.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecialError {
    #[error("delta must lie strictly inside (0,1), got {0}")]
    BadDelta(f64),
    #[error("k must be >= 1")]
    BadOrder,
    #[error("theta must be positive and finite, got {0}")]
    BadTheta(f64),
    #[error("series for the hypergeometric kernel failed to converge")]
    SeriesDiverged,
}

/// 16-point Gauss-Legendre abscissae on `[-1, 1]` (positive half; the rule
/// is symmetric).
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// Fixed 16-point Gauss-Legendre rule on `[a, b]`.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let dx = half * GL16_X[i];
        acc += GL16_W[i] * (f(mid - dx) + f(mid + dx));
    }
    acc * half
}

/// Nodes and weights of the 16-point rule mapped onto `[a, b]`, for callers
/// that evaluate vector integrands at shared abscissae.
pub fn gl16_nodes(a: f64, b: f64) -> [(f64, f64); 16] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 16];
    for i in 0..8 {
        let dx = half * GL16_X[i];
        out[2 * i] = (mid - dx, GL16_W[i] * half);
        out[2 * i + 1] = (mid + dx, GL16_W[i] * half);
    }
    out
}

/// Adaptive bisection on top of [`gl16`] down to relative tolerance
/// `rel_tol` (with a tiny absolute floor so zero integrals terminate).
pub fn gl16_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let whole = gl16(f, a, b);
    let mut total = 0.0;
    let mut stack = vec![(a, b, whole, 0u32)];
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl16(f, lo, mid);
        let right = gl16(f, mid, hi);
        let fine = left + right;
        let err = (fine - coarse).abs();
        if err <= rel_tol * whole.abs().max(fine.abs()) + 1e-308 || depth >= 40 {
            total += fine;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

/// Generalized binomial coefficient `C(z, k)` for complex `z`, via the
/// falling factorial `z (z-1) ... (z-k+1) / k!`.
pub fn complex_binomial(z: Complex64, k: u32) -> Complex64 {
    let mut num = Complex64::new(1.0, 0.0);
    for j in 0..k {
        num *= z - j as f64;
        num /= (j + 1) as f64;
    }
    num
}

/// The positive kernel `(k - delta) * Int_0^1 t^(k-delta-1) (1+theta t)^(-k) dt`.
///
/// Evaluated by splitting at `eps = min(1/2, 1/(2 k theta))`: a binomial
/// series below (where `theta t <= 1/(2k)` keeps it geometric) and adaptive
/// quadrature above. Relative accuracy is 1e-10 or better for `k <= 64`.
pub fn hyp2f1_kernel(k: u32, delta: f64, theta: f64) -> Result<f64, SpecialError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SpecialError::BadDelta(delta));
    }
    if k < 1 {
        return Err(SpecialError::BadOrder);
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(SpecialError::BadTheta(theta));
    }
    let kf = f64::from(k);
    let a = kf - delta;
    let eps = (0.5f64).min(0.5 / (kf * theta));

    // Series part: (1 + theta t)^(-k) = sum_n C(-k, n) (theta t)^n, integrated
    // term by term over [0, eps]. Common factor eps^a pulled out front.
    let mut series = 0.0f64;
    let mut coeff = 1.0f64; // C(-k, n) (-theta eps)^n, built iteratively
    let mut converged = false;
    for n in 0..10_000u32 {
        let nf = f64::from(n);
        let term = coeff / (a + nf);
        series += term;
        if term.abs() < 1e-16 * series.abs() {
            converged = true;
            break;
        }
        coeff *= -(kf + nf) / (nf + 1.0) * theta * eps;
    }
    if !converged {
        return Err(SpecialError::SeriesDiverged);
    }
    let low = eps.powf(a) * series;

    // Quadrature part on [eps, 1].
    let integrand = |t: f64| t.powf(a - 1.0) * (1.0 + theta * t).powf(-kf);
    let high = gl16_adaptive(&integrand, eps, 1.0, 1e-12);

    Ok(a * (low + high))
}

/// `(-1)^(k+1) theta^k / (k - delta)` times [`hyp2f1_kernel`]. The factors
/// stay separately representable for `k <= 64` and `theta <= 1e3`, so no
/// log-space gymnastics are needed.
pub fn z_kernel(k: u32, delta: f64, theta: f64) -> Result<f64, SpecialError> {
    let kernel = hyp2f1_kernel(k, delta, theta)?;
    let kf = f64::from(k);
    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
    Ok(sign * theta.powi(k as i32) / (kf - delta) * kernel)
}
