//! Fixed quadrature rules used throughout the crate.
//!
//! Everything here is deterministic and allocation-light: composite Simpson on
//! uniform grids (for characteristic-function inversion and ISE grids) and
//! Gauss-Legendre rules (for normalising constants and smooth integrals).

use std::f64::consts::PI;

/// Composite Simpson weights for `nodes` equally spaced points with spacing `h`.
///
/// With an odd interval count the last three intervals use Simpson's 3/8 rule,
/// so the rule stays fourth order for every `nodes >= 4`. Two nodes fall back to
/// the trapezoid rule and three nodes is plain Simpson.
pub fn simpson_weights(nodes: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; nodes];
    match nodes {
        0 | 1 => return w,
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        _ => {}
    }
    let intervals = nodes - 1;
    let simpson_intervals = if intervals.is_multiple_of(2) {
        intervals
    } else {
        intervals - 3
    };
    for panel in 0..simpson_intervals / 2 {
        let i = 2 * panel;
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if intervals % 2 == 1 {
        let i = simpson_intervals;
        let c = 3.0 * h / 8.0;
        w[i] += c;
        w[i + 1] += 3.0 * c;
        w[i + 2] += 3.0 * c;
        w[i + 3] += c;
    }
    w
}

/// Integrates tabulated values on a uniform grid with [`simpson_weights`].
pub fn simpson(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence, seeded with the
    /// Tricomi approximation of each root.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        let nf = order as f64;
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(order, z);
                    dp = d;
                    break;
                }
            }
            nodes[i] = -z;
            nodes[order - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Composite rule: `panels` equal panels on [a, b], this rule on each.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let width = (b - a) / panels as f64;
        let half = 0.5 * width;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + width * (p as f64 + 0.5);
            let mut acc = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + half * x);
            }
            total += acc * half;
        }
        total
    }

    /// Absolute nodes/weights of the composite rule on [a, b].
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let width = (b - a) / panels as f64;
        let half = 0.5 * width;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let mid = a + width * (p as f64 + 0.5);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + half * x);
                ws.push(w * half);
            }
        }
        (xs, ws)
    }
}

fn legendre_with_derivative(order: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let d = order as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// High-accuracy integral of a smooth function over [a, b]
/// (64 panels of 8-point Gauss-Legendre).
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    thread_local! {
        static GL8: GaussLegendre = GaussLegendre::new(8);
    }
    GL8.with(|gl| gl.integrate(a, b, 64, f))
}

/// A node of [`tanh_sinh_unit`]: abscissa, its distance to 1, and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitNode {
    pub x: f64,
    pub one_minus_x: f64,
    pub weight: f64,
}

/// Tanh-sinh (double exponential) rule on (0, 1) with step `h`.
///
/// Tolerates integrable algebraic singularities at both ends. The distance to
/// the right end is carried separately so integrands can avoid cancellation.
pub fn tanh_sinh_unit(h: f64) -> Vec<UnitNode> {
    let half_pi = 0.5 * PI;
    let mut out = Vec::new();
    let mut k: i64 = 0;
    loop {
        let t = k as f64 * h;
        let z = half_pi * t.sinh();
        // x = (1 + tanh z) / 2 on (0, 1); complements via exp for precision
        let e = (-2.0 * z.abs()).exp();
        let small = e / (1.0 + e);
        let w = h * PI * t.cosh() * small * (1.0 - small);
        if w < 1e-300 || small == 0.0 {
            break;
        }
        let (x, cx) = if z >= 0.0 { (1.0 - small, small) } else { (small, 1.0 - small) };
        out.push(UnitNode { x, one_minus_x: cx, weight: w });
        if k > 0 {
            out.push(UnitNode { x: cx, one_minus_x: x, weight: w });
        }
        k += 1;
    }
    out
}
