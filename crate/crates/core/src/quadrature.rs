//! Gauss rules on the line, the reference square and triangles.

use crate::geom::{cross, Vec2};

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev guess refined by Newton on P_n.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
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
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor Gauss rule on the reference square [-1, 1]^2.
pub fn gauss_square(n: usize) -> Vec<(Vec2, f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(y, wy) in &g {
        for &(x, wx) in &g {
            out.push((Vec2::new(x, y), wx * wy));
        }
    }
    out
}

/// Triangle rule in barycentric coordinates with weights summing to one.
/// `degree` is the polynomial degree integrated exactly (1, 2 or 5).
pub fn triangle_rule(degree: usize) -> Vec<([f64; 3], f64)> {
    match degree {
        0 | 1 => vec![([1.0 / 3.0; 3], 1.0)],
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            vec![([a, a, b], 1.0 / 3.0), ([a, b, a], 1.0 / 3.0), ([b, a, a], 1.0 / 3.0)]
        }
        _ => {
            let s = 15f64.sqrt();
            let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
            let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
            let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
            vec![
                ([1.0 / 3.0; 3], 9.0 / 40.0),
                ([a1, a1, b1], w1),
                ([a1, b1, a1], w1),
                ([b1, a1, a1], w1),
                ([a2, a2, b2], w2),
                ([a2, b2, a2], w2),
                ([b2, a2, a2], w2),
            ]
        }
    }
}

/// Maps a triangle rule onto the physical triangle `t`.
pub fn map_triangle(t: &[Vec2; 3], rule: &[([f64; 3], f64)], out: &mut Vec<(Vec2, f64)>) {
    let area = 0.5 * cross(&(t[1] - t[0]), &(t[2] - t[0]));
    for (l, w) in rule {
        out.push((t[0] * l[0] + t[1] * l[1] + t[2] * l[2], w * area));
    }
}
