//! Shared helpers for the integration suites: a deterministic RNG and an
//! independent dense Nystrom solver used as the oracle for the
//! Gelfand-Levitan route.

#![allow(dead_code)]

use sl_lab_core::glevitan::SeparableKernel;

/// xorshift64*: deterministic, seedable, no external dependency.
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Dense Nystrom discretization of the Gelfand-Levitan equation at fixed `x`
/// on a uniform grid with trapezoid weights: solve
/// `u_i + f(x, t_i) + sum_j w_j f(t_j, t_i) u_j = 0`.
/// Returns `u` at the grid nodes.
pub fn nystrom_gl(kernel: &SeparableKernel, x: f64, n_intervals: usize) -> Vec<f64> {
    let n = n_intervals + 1;
    let h = x / n_intervals as f64;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;

    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let f_ji = kernel.eval(nodes[j], nodes[i]).unwrap();
            a[i * n + j] = weights[j] * f_ji + if i == j { 1.0 } else { 0.0 };
        }
        rhs[i] = -kernel.eval(x, nodes[i]).unwrap();
    }
    lu_solve(&mut a, &mut rhs, n);
    rhs
}

/// Nystrom with one Richardson level (trapezoid error is O(h^2) with the
/// kink of the symmetric kernel sitting on grid nodes): combine solutions at
/// `n` and `2n` intervals on the coarse nodes.
pub fn nystrom_gl_refined(kernel: &SeparableKernel, x: f64, n_intervals: usize) -> Vec<f64> {
    let coarse = nystrom_gl(kernel, x, n_intervals);
    let fine = nystrom_gl(kernel, x, 2 * n_intervals);
    coarse
        .iter()
        .enumerate()
        .map(|(i, c)| (4.0 * fine[2 * i] - c) / 3.0)
        .collect()
}

/// In-place Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) {
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > pivot {
                pivot = v;
                pivot_row = r;
            }
        }
        assert!(pivot > 0.0, "singular system in test oracle");
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * b[c];
        }
        b[r] = acc / a[r * n + r];
    }
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    sl_lab_core::quad::loglog_slope(points).expect("slope fit")
}
