//! Discrete Fourier pair on a uniform frequency grid and its conjugate time
//! grid.
//!
//! With `w_n = w0 + n·dw` and `t_k = (k − (N−1)/2)·dt`, `dt = 2π/(N·dw)`:
//!
//! ```text
//! inverse:  x(t_k) = Σ_n e^{−i w_n t_k} S(w_n) dw
//! forward:  S(w_n) = (1/2π) Σ_k e^{+i w_n t_k} x(t_k) dt
//! ```
//!
//! `forward(inverse(S)) = S` exactly up to rounding. Both are a single FFT
//! with phase factors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::FrequencyGrid;
use crate::linalg::C64;

pub struct TransformPair {
    grid: FrequencyGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `e^{−i n dw t0}`
    pre: Vec<C64>,
    /// `e^{−i w0 t_k}`
    post: Vec<C64>,
}

impl TransformPair {
    pub fn new(grid: FrequencyGrid) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        // n·dw·t0 = −π·n(N−1)/N, reduced exactly modulo 2π
        let m = 2 * n as u128;
        let pre = (0..n)
            .map(|k| {
                let r = (k as u128 * (n as u128 - 1)) % m;
                C64::from_polar(1.0, PI * r as f64 / n as f64)
            })
            .collect();
        let post = (0..n).map(|k| C64::from_polar(1.0, -grid.w0 * grid.t(k))).collect();
        Self { grid, fwd, inv, pre, post }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Frequency → time.
    pub fn inverse(&self, s: &[C64]) -> Vec<C64> {
        assert_eq!(s.len(), self.grid.n);
        let mut buf: Vec<C64> = s.iter().zip(&self.pre).map(|(a, p)| a * p).collect();
        self.fwd.process(&mut buf);
        let dw = self.grid.dw;
        buf.iter().zip(&self.post).map(|(a, p)| a * p * dw).collect()
    }

    /// Time → frequency.
    pub fn forward(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.grid.n);
        let mut buf: Vec<C64> = x.iter().zip(&self.post).map(|(a, p)| a * p.conj()).collect();
        self.inv.process(&mut buf);
        let scale = self.grid.dt() / (2.0 * PI);
        buf.iter().zip(&self.pre).map(|(a, p)| a * p.conj() * scale).collect()
    }

    pub fn inverse_real(&self, s: &[f64]) -> Vec<C64> {
        self.inverse(&s.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
    }

    /// `(f ∗ g)(w) = ∫ f(w') g(w − w') dw'`, periodic on the grid.
    pub fn convolve(&self, f: &[C64], g: &[C64]) -> Vec<C64> {
        let a = self.inverse(f);
        let b = self.inverse(g);
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        self.forward(&prod)
    }
}
