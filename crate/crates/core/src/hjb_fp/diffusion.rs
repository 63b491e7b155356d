//! Implicit diffusion `(I - sigma dt Δ_h)^{-1}` with periodic wrap.
//!
//! Along each axis the matrix is a constant-coefficient cyclic tridiagonal
//! matrix; it is factored once (Thomas sweep plus a Sherman-Morrison
//! correction for the corner entries) and applied line by line. In two
//! dimensions the axes are split; the two factors commute.

use alloc::vec;
use alloc::vec::Vec;

use crate::torus::TorusGrid;

#[derive(Debug, Clone)]
pub(crate) struct ImplicitDiffusion {
    grid: TorusGrid,
    line: Option<CyclicLine>,
}

#[derive(Debug, Clone)]
struct CyclicLine {
    off: f64,
    gamma: f64,
    // Thomas factorization of the modified tridiagonal matrix
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    // solution of the modified system against the correction vector
    z: Vec<f64>,
    z_scale: f64,
}

impl CyclicLine {
    fn new(n: usize, r: f64) -> Self {
        let diag = 1.0 + 2.0 * r;
        let off = -r;
        let gamma = -diag;
        let mut b = vec![diag; n];
        b[0] = diag - gamma;
        b[n - 1] = diag - off * off / gamma;
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        inv_denom[0] = 1.0 / b[0];
        c_prime[0] = off * inv_denom[0];
        for i in 1..n {
            let denom = b[i] - off * c_prime[i - 1];
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off * inv_denom[i];
        }
        let mut line = CyclicLine { off, gamma, c_prime, inv_denom, z: Vec::new(), z_scale: 0.0 };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        line.thomas(&mut u);
        line.z_scale = 1.0 / (1.0 + u[0] + off * u[n - 1] / gamma);
        line.z = u;
        line
    }

    fn thomas(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] *= self.inv_denom[0];
        for i in 1..n {
            x[i] = (x[i] - self.off * x[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        self.thomas(x);
        let fact = (x[0] + self.off * x[n - 1] / self.gamma) * self.z_scale;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= fact * zi;
        }
    }
}

impl ImplicitDiffusion {
    pub(crate) fn new(grid: TorusGrid, sigma: f64, dt: f64) -> Self {
        let h = grid.spacing();
        let r = sigma * dt / (h * h);
        let line = (r > 0.0).then(|| CyclicLine::new(grid.points_per_axis(), r));
        ImplicitDiffusion { grid, line }
    }

    pub(crate) fn apply_inverse(&self, values: &mut [f64]) {
        let Some(line) = &self.line else { return };
        let n = self.grid.points_per_axis();
        match self.grid.dim() {
            1 => line.solve(values),
            _ => {
                for row in values.chunks_mut(n) {
                    line.solve(row);
                }
                let mut column = vec![0.0; n];
                for i in 0..n {
                    for (j, c) in column.iter_mut().enumerate() {
                        *c = values[i + n * j];
                    }
                    line.solve(&mut column);
                    for (j, c) in column.iter().enumerate() {
                        values[i + n * j] = *c;
                    }
                }
            }
        }
    }
}
