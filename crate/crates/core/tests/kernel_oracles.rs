//! Independent quadrature oracles for the linear increment variance.

use ocpa_core::kernel::{linear_increment_variance, KernelConfig};
use std::f64::consts::PI;

/// Image series written out directly: sum_n phi_{2t}(x - y - 2n) + phi_{2t}(x + y - 2n).
fn image_kernel(t: f64, x: f64, y: f64) -> f64 {
    let v = 2.0 * t;
    let phi = |z: f64| (-(z * z) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
    (-12..=12)
        .map(|n| {
            let s = 2.0 * n as f64;
            phi(x - y - s) + phi(x + y - s)
        })
        .sum()
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// 20-point Gauss-Legendre nodes by Newton iteration on P_20.
fn gauss_legendre_20() -> Rule {
    let n = 20;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut d = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * d * d));
    }
    Rule { nodes, weights }
}

impl Rule {
    fn on(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(m + h * x))
            .sum::<f64>()
            * h
    }
}

/// Panels on [0, 1] that grow geometrically away from `x`, starting at `width`.
fn panels_around(x: f64, width: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for dir in [-1.0f64, 1.0] {
        let end = if dir > 0.0 { 1.0 } else { 0.0 };
        let mut a = x;
        let mut w = width;
        while (end - a).abs() > 0.0 {
            let b = if (end - a).abs() <= w {
                end
            } else {
                a + dir * w
            };
            out.push(if dir > 0.0 { (a, b) } else { (b, a) });
            a = b;
            w *= 1.6;
        }
    }
    out
}

/// int_0^1 (G_a(x, v) - G_b(x, v))^2 dv, with G_0 := 0.
fn inner(rule: &Rule, a: f64, b: f64, x: f64) -> f64 {
    let g = |t: f64, v: f64| if t > 0.0 { image_kernel(t, x, v) } else { 0.0 };
    let sharpest = if b > 0.0 { a.min(b) } else { a };
    panels_around(x, 0.25 * sharpest.sqrt())
        .into_iter()
        .map(|(lo, hi)| rule.on(lo, hi, |v| (g(a, v) - g(b, v)).powi(2)))
        .sum()
}

/// Var(u(t, x) - u(s, x)) =
///   int_0^{t-s} int (G_tau)^2 + int_{t-s}^{t} int (G_tau - G_{tau-(t-s)})^2,
/// with tau = t - r and the substitution tau = w^2 on each piece.
fn oracle_variance(s: f64, t: f64, x: f64) -> f64 {
    let rule = gauss_legendre_20();
    let h = t - s;
    let outer = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let pieces = 48;
        let (wl, wh) = (lo.sqrt(), hi.sqrt());
        (0..pieces)
            .map(|p| {
                let a = wl + (wh - wl) * p as f64 / pieces as f64;
                let b = wl + (wh - wl) * (p + 1) as f64 / pieces as f64;
                rule.on(a, b, |w| 2.0 * w * f(w * w))
            })
            .sum()
    };
    let fresh = outer(0.0, h, &|tau| inner(&rule, tau, 0.0, x));
    if s == 0.0 {
        return fresh;
    }
    // On the second piece the older kernel argument tau - h starts at 0.
    let rule2 = gauss_legendre_20();
    let carried = {
        let pieces = 48;
        let wh = s.sqrt();
        (0..pieces)
            .map(|p| {
                let a = wh * p as f64 / pieces as f64;
                let b = wh * (p + 1) as f64 / pieces as f64;
                rule2.on(a, b, |w| {
                    let older = w * w;
                    2.0 * w * inner(&rule2, older + h, older, x)
                })
            })
            .sum::<f64>()
    };
    fresh + carried
}

#[test]
fn variance_from_origin_matches_two_dimensional_quadrature() {
    let cfg = KernelConfig::default();
    let exact = linear_increment_variance(0.0, 0.1, 0.5, &cfg).unwrap();
    let oracle = oracle_variance(0.0, 0.1, 0.5);
    assert!(
        (exact - oracle).abs() < 1e-8 * oracle,
        "{exact} vs {oracle}"
    );
}

#[test]
fn increment_variance_matches_two_dimensional_quadrature() {
    let cfg = KernelConfig::default();
    for &(s, t, x) in &[(0.05, 0.1, 0.3), (0.2, 0.21, 0.5)] {
        let exact = linear_increment_variance(s, t, x, &cfg).unwrap();
        let oracle = oracle_variance(s, t, x);
        assert!(
            (exact - oracle).abs() < 1e-8 * oracle,
            "({s}, {t}, {x}): {exact} vs {oracle}"
        );
    }
}
