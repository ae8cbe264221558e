//! Chebyshev interpolation on tensor grids of first-kind roots.

use std::f64::consts::PI;

use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct Chebyshev {
    pub n: usize,
    pub nodes: Vec<f64>,
}

impl Chebyshev {
    pub fn new(n: usize) -> Self {
        let nodes = (0..n).map(|k| ((2 * k + 1) as f64 * PI / (2 * n) as f64).cos()).collect();
        Self { n, nodes }
    }

    /// `S_n(x, x_k) = 1/n + 2/n sum_{j=1}^{n-1} T_j(x) T_j(x_k)` for every node.
    pub fn weights(&self, x: f64, out: &mut [f64]) {
        let n = self.n;
        let inv = 1.0 / n as f64;
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let theta = (2 * k + 1) as f64 * PI / (2 * n) as f64;
            let (mut t_prev, mut t) = (1.0, x);
            let mut s = inv;
            for j in 1..n {
                s += 2.0 * inv * t * (j as f64 * theta).cos();
                let next = 2.0 * x * t - t_prev;
                t_prev = t;
                t = next;
            }
            *o = s;
        }
    }

    pub fn nodes_2d(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for &a in &self.nodes {
            for &b in &self.nodes {
                out.push([a, b]);
            }
        }
        out
    }

    /// Rows of 2D interpolation weights for points given in reference coordinates.
    pub fn interpolation_matrix(&self, refs: impl ExactSizeIterator<Item = [f64; 2]>) -> Array2<f64> {
        let n = self.n;
        let mut out = Array2::zeros((refs.len(), n * n));
        let mut wx = vec![0.0; n];
        let mut wy = vec![0.0; n];
        for (row, r) in refs.enumerate() {
            self.weights(r[0], &mut wx);
            self.weights(r[1], &mut wy);
            for a in 0..n {
                for b in 0..n {
                    out[[row, a * n + b]] = wx[a] * wy[b];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinal_at_nodes() {
        let c = Chebyshev::new(7);
        let mut w = vec![0.0; 7];
        for (k, &x) in c.nodes.iter().enumerate() {
            c.weights(x, &mut w);
            for (j, v) in w.iter().enumerate() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn reproduces_polynomials() {
        let c = Chebyshev::new(6);
        let f = |x: f64, y: f64| 1.0 + x - 2.0 * x * y * y + x.powi(4) * y + y.powi(5);
        let nodes = c.nodes_2d();
        let vals: Vec<f64> = nodes.iter().map(|p| f(p[0], p[1])).collect();
        let pts = [[0.3, -0.7], [-0.99, 0.1], [0.5, 0.5]];
        let m = c.interpolation_matrix(pts.iter().copied());
        for (r, p) in pts.iter().enumerate() {
            let approx: f64 = (0..36).map(|k| m[[r, k]] * vals[k]).sum();
            assert!((approx - f(p[0], p[1])).abs() < 1e-12);
        }
    }
}
