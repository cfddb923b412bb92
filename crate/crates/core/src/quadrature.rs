//! Deterministic quadrature rules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule; nodes are Newton-refined roots of `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            acc += self.integrate(&mut f, lo, lo + h);
        }
        acc
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Default composite rule used by the kernel checks: 8-point Gauss-Legendre
/// on 256 panels.
pub struct KernelQuadrature {
    rule: GaussLegendre,
    panels: usize,
}

impl KernelQuadrature {
    pub fn new(order: usize, panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            panels,
        }
    }
    pub fn unit_interval<F: FnMut(f64) -> f64>(&self, f: F) -> f64 {
        self.rule.composite(f, 0.0, 1.0, self.panels)
    }
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self::new(8, 256)
    }
}

/// Double-exponential (tanh-sinh) quadrature on `[a, b]` for integrands with
/// algebraic endpoint singularities.
///
/// The integrand receives `(x - a, b - x)`, both computed without
/// cancellation, so singular factors can be evaluated from the distance to
/// the nearer endpoint. Refinement halves the step until two successive
/// levels agree to `rel_tol`.
pub fn tanh_sinh<F: FnMut(f64, f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    // exp(-2u) stays above the smallest normal double up to t = 6.
    let t_max = 6.0;
    // Contribution at abscissa parameter t (and its mirror -t).
    let mut eval = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let cosh_u = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cosh_u * cosh_u);
        // 1 - tanh(u) for u >= 0, without cancellation.
        let e = (-2.0 * u.abs()).exp();
        let near = 2.0 * e / (1.0 + e);
        let dist_near = half * near;
        let dist_far = 2.0 * half - dist_near;
        if dist_near <= 0.0 {
            return 0.0;
        }
        let (da, db) = if t >= 0.0 {
            (dist_far, dist_near)
        } else {
            (dist_near, dist_far)
        };
        w * f(da, db)
    };

    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h * half;
        let converged = level >= 3 && (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // Degree 15 is integrated exactly.
        let v = rule.integrate(|x| x.powi(14) + x.powi(15), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let v = rule.composite(|x| x.exp(), 0.0, 1.0, 16);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let v = tanh_sinh(|x, _| x.powf(-0.5), 0.0, 1.0, 1e-14);
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        let v = tanh_sinh(|x, y| x.powf(-0.75) * y.powf(-0.5), 0.0, 2.0, 1e-14);
        // B(1/4, 1/2) * 2^{-1/4}
        let beta = libm::tgamma(0.25) * libm::tgamma(0.5) / libm::tgamma(0.75);
        assert!((v - beta * 2f64.powf(-0.25)).abs() < 1e-10 * beta, "{v}");
    }
}
