//! Deterministic expectation engine over the two independent unit-mean
//! exponential channel power gains, with a seeded Monte Carlo fallback.
//!
//! Expectations of the form E{f(|h|^2, |g|^2)} reduce to a double integral
//! against exp(-x) exp(-y); a tensor-product Gauss-Laguerre rule evaluates
//! them to near machine precision for the smooth log-rate integrands used
//! by the power policies.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numeric::pairwise_sum;

#[derive(Debug, Error, PartialEq)]
pub enum FadingError {
    #[error("quadrature order must be at least 2, got {0}")]
    BadOrder(usize),
    #[error("integrand evaluated non-finite at gains ({gain_h}, {gain_g})")]
    NonFiniteIntegrand { gain_h: f64, gain_g: f64 },
    #[error("Monte Carlo expectation needs at least 1000 samples, got {0}")]
    TooFewSamples(u64),
}

/// One quadrature node: a pair of channel power gains and its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub gain_h: f64,
    pub gain_g: f64,
    pub weight: f64,
}

/// Tensor-product Gauss-Laguerre grid over the two fading gains.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingGrid {
    nodes: Vec<GridNode>,
    order: usize,
}

impl FadingGrid {
    /// Builds an `order` x `order` tensor grid. Order 64 keeps the
    /// quadrature error of the log-rate integrands far below 1e-4.
    pub fn build(order: usize) -> Result<Self, FadingError> {
        if order < 2 {
            return Err(FadingError::BadOrder(order));
        }
        let rule = gauss_laguerre(order);
        let mut nodes = Vec::with_capacity(order * order);
        for &(h, wh) in &rule {
            for &(g, wg) in &rule {
                nodes.push(GridNode {
                    gain_h: h,
                    gain_g: g,
                    weight: wh * wg,
                });
            }
        }
        Ok(Self { nodes, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    /// Expectation of `f` over the grid, accumulated in a fixed pairwise
    /// order. Fails if any node evaluates non-finite.
    pub fn expect<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<f64, FadingError> {
        let mut terms = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = f(n.gain_h, n.gain_g);
            if !v.is_finite() {
                return Err(FadingError::NonFiniteIntegrand {
                    gain_h: n.gain_h,
                    gain_g: n.gain_g,
                });
            }
            terms.push(n.weight * v);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Like `expect` but propagates infinities instead of failing; used by
    /// dual solvers that probe unbounded policies.
    pub(crate) fn expect_saturating<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for n in &self.nodes {
            let v = f(n.gain_h, n.gain_g);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += n.weight * v;
        }
        acc
    }
}

/// Nodes and weights of the order-`n` Gauss-Laguerre rule for weight
/// exp(-x) on [0, inf), via the Golub-Welsch eigendecomposition of the
/// symmetric Jacobi matrix (diagonal 2k+1, off-diagonal k). Nodes are the
/// eigenvalues; each weight is the squared first eigenvector component.
pub fn gauss_laguerre(n: usize) -> Vec<(f64, f64)> {
    let mut diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
    let mut off: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let mut first_rows = tql2_first_row(&mut diag, &mut off);
    let mut rule: Vec<(f64, f64)> = diag
        .iter()
        .zip(first_rows.drain(..))
        .map(|(&x, q0)| (x, q0 * q0))
        .collect();
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix
/// (EISPACK tql2), accumulating only the first row of the eigenvector
/// matrix, which is all the quadrature weights need. `d` holds the
/// diagonal and returns the eigenvalues; `e[i]` holds the subdiagonal
/// entry coupling rows i-1 and i (e[0] unused).
fn tql2_first_row(d: &mut [f64], e: &mut [f64]) -> Vec<f64> {
    let n = d.len();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    if n == 1 {
        return z;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                assert!(iter < 60, "tridiagonal QL failed to converge");
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let gi = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * gi;
                    d[i + 1] = h + s * (c * gi + s * d[i]);
                    let hz = z[i + 1];
                    z[i + 1] = s * z[i] + c * hz;
                    z[i] = c * z[i] - s * hz;
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    z
}

/// Draws a unit-mean exponential variate by inversion.
fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    // 53-bit uniform in [0,1); 1-u stays in (0,1].
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    -f64::ln_1p(-u)
}

/// Monte Carlo estimate of E{f(|h|^2, |g|^2)} from `samples` i.i.d. draws
/// of the counter-based generator keyed by `seed`. Returns the sample mean
/// and its standard error; bit-exact for a given seed.
pub fn mc_expect<F: Fn(f64, f64) -> f64>(
    f: F,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), FadingError> {
    if samples < 1000 {
        return Err(FadingError::TooFewSamples(samples));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let h = exp1(&mut rng);
        let g = exp1(&mut rng);
        values.push(f(h, g));
    }
    let n = samples as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
