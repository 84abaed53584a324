//! Shared numerical primitives: Gaussian tail functions, deterministic
//! summation, and scalar root/line searches.

use std::f64::consts::{PI, SQRT_2};

/// log2(e), the constant that converts nats to bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Gaussian tail function Q(x) = Pr{N(0,1) > x}.
pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal density.
fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse Gaussian tail function: returns x with Q(x) = p.
///
/// Rational initial guess (Acklam) polished with two Newton steps against
/// the erfc-based forward function; relative accuracy is well below 1e-9
/// over p in [1e-8, 1 - 1e-8].
pub fn q_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "q_inv requires p in (0,1), got {p}");
    if p > 0.5 {
        // Reflect so the Newton correction runs where q and p are small
        // and their difference carries full precision.
        return -q_inv(1.0 - p);
    }
    let mut x = -norm_ppf(p);
    for _ in 0..2 {
        let err = q(x) - p;
        x += err / phi(x);
    }
    x
}

// Acklam's rational approximation to the standard normal quantile.
fn norm_ppf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -norm_ppf(1.0 - p)
    }
}

/// Sums a slice in a fixed pairwise (tree) order.
///
/// The reduction order is a pure function of the slice length, so results
/// are reproducible regardless of how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Bisection for the root of a monotone function on [lo, hi].
///
/// Requires f(lo) and f(hi) to straddle zero; iterates until the interval
/// is below `x_tol` or `f` is below `f_tol` in magnitude.
pub fn bisect_root(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> f64 {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    let rising = f_lo < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (hi - lo) <= x_tol && fm.abs() <= f_tol {
            return mid;
        }
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Illinois-damped false position for a root bracketed by (a, fa), (b, fb)
/// with opposite signs. Converges superlinearly on smooth monotone
/// functions; returns the last iterate and its value.
pub fn illinois_root(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    debug_assert!(fa * fb <= 0.0, "root not bracketed: f({a})={fa}, f({b})={fb}");
    if fa == 0.0 {
        return (a, fa);
    }
    if fb == 0.0 {
        return (b, fb);
    }
    let mut c = b;
    let mut fc = fb;
    for _ in 0..max_iter {
        let secant = (a * fb - b * fa) / (fb - fa);
        c = if secant.is_finite() && secant > a.min(b) && secant < a.max(b) {
            secant
        } else {
            0.5 * (a + b)
        };
        fc = f(c);
        if fc.abs() <= f_tol || (a - b).abs() <= x_tol {
            return (c, fc);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    (c, fc)
}

/// Golden-section maximization of a unimodal function on [lo, hi].
///
/// Returns the abscissa and value of the best point found once the bracket
/// width drops below `x_tol`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > x_tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Counts the sign alternations of consecutive differences, treating
/// differences smaller than `flat_tol` as flat. Zero or one alternation
/// means the sequence is unimodal up to the tolerance.
pub fn difference_sign_changes(values: &[f64], flat_tol: f64) -> usize {
    let mut changes = 0;
    let mut last_sign = 0i8;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        let sign = if d.abs() <= flat_tol {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                changes += 1;
            }
            last_sign = sign;
        }
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference quantiles computed with 25-digit arithmetic.
    const Q_INV_REFS: [(f64, f64); 8] = [
        (1e-8, 5.612001244174788731507678),
        (1e-4, 3.719016485455680564393661),
        (0.025, 1.959963984540054235524594),
        (0.1, 1.281551565544600466965103),
        (0.3, 0.5244005127080407840382893),
        (0.5, 0.0),
        (0.9, -1.281551565544600466965103),
        (0.99999999, -5.612001244174788731507678),
    ];

    #[test]
    fn q_inv_matches_high_precision_references() {
        for &(p, x) in &Q_INV_REFS {
            let got = q_inv(p);
            // Relative target of 1e-9; the comparison scale guards the
            // median where the quantile itself crosses zero.
            let tol = 1e-9 * x.abs().max(1e-3);
            assert!((got - x).abs() <= tol, "q_inv({p}) = {got}, want {x}");
        }
    }

    #[test]
    fn q_round_trips_q_inv() {
        let mut p = 1e-8;
        while p < 1.0 - 1e-8 {
            let x = q_inv(p);
            let back = q(x);
            assert!(
                ((back - p) / p).abs() < 1e-9,
                "roundtrip failed at p={p}: back={back}"
            );
            p *= 1.7;
        }
    }

    #[test]
    fn q_limits() {
        assert!(q(10.0) < 1e-20);
        assert!((q(-10.0) - 1.0).abs() < 1e-15);
        assert!((q(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_exact_on_small_inputs() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }

    #[test]
    fn illinois_converges_superlinearly_on_smooth_roots() {
        let mut evals = 0;
        let f = |x: f64| {
            evals += 1;
            x.exp() - 3.0
        };
        let (root, fr) = illinois_root(f, 0.0, 1.0 - 3.0, 4.0, 4f64.exp() - 3.0, 1e-14, 1e-12, 100);
        assert!((root - 3f64.ln()).abs() < 1e-10, "root={root}");
        assert!(fr.abs() <= 1e-12);
        assert!(evals < 25, "took {evals} evaluations");
    }

    #[test]
    fn golden_max_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 2.3) * (x - 2.3) + 4.0, 0.0, 10.0, 1e-9);
        assert!((x - 2.3).abs() < 1e-7);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sign_change_counter() {
        assert_eq!(difference_sign_changes(&[1.0, 2.0, 3.0, 2.0, 1.0], 0.0), 1);
        assert_eq!(difference_sign_changes(&[1.0, 2.0, 3.0], 0.0), 0);
        assert_eq!(difference_sign_changes(&[1.0, 2.0, 1.0, 2.0], 0.0), 2);
        // Tiny wiggles below the tolerance do not count.
        assert_eq!(
            difference_sign_changes(&[1.0, 2.0, 2.0 + 1e-12, 2.0 - 1e-12, 3.0], 1e-9),
            0
        );
    }
}
