//! Uniform frequency grids and gridded spectra.

use crate::error::{Error, Result};

/// `w_k = w0 + k·dw`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub w0: f64,
    pub dw: f64,
    pub n: usize,
}

impl FrequencyGrid {
    /// `n` points from `w_min` to `w_max` inclusive.
    pub fn linspace(w_min: f64, w_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Grid(format!("need at least 2 points, got {n}")));
        }
        if !(w_min.is_finite() && w_max.is_finite() && w_max > w_min) {
            return Err(Error::Grid(format!("invalid range [{w_min}, {w_max}]")));
        }
        Ok(Self { w0: w_min, dw: (w_max - w_min) / (n - 1) as f64, n })
    }

    pub fn uniform(w0: f64, dw: f64, n: usize) -> Result<Self> {
        if n < 2 || !(dw > 0.0) {
            return Err(Error::Grid(format!("invalid uniform grid (n = {n}, dw = {dw})")));
        }
        Ok(Self { w0, dw, n })
    }

    /// The default grid: 10⁵ points over `[−4, 4]`.
    pub fn standard() -> Self {
        Self::linspace(-4.0, 4.0, 100_000).expect("valid")
    }

    pub fn w(&self, k: usize) -> f64 {
        self.w0 + k as f64 * self.dw
    }

    pub fn w_max(&self) -> f64 {
        self.w(self.n - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.w(k)).collect()
    }

    /// Whether `w_k = −w_{n−1−k}` for every `k`.
    pub fn is_symmetric(&self) -> bool {
        (self.w0 + self.w_max()).abs() <= 1e-9 * self.dw
    }

    pub fn require_symmetric(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::Grid(format!("grid [{}, {}] is not symmetric about 0", self.w0, self.w_max())))
        }
    }

    /// Step of the conjugate time grid, `2π/(n·dw)`.
    pub fn dt(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n as f64 * self.dw)
    }

    /// `t_k = (k − (n−1)/2)·dt`, centred on zero.
    pub fn t(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n as f64 - 1.0)) * self.dt()
    }

    /// Index of the point nearest `w`.
    pub fn nearest(&self, w: f64) -> usize {
        let k = ((w - self.w0) / self.dw).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid<T> {
    pub grid: FrequencyGrid,
    pub values: Vec<T>,
}

impl<T> SpectrumGrid<T> {
    pub fn new(grid: FrequencyGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Grid(format!("{} values for {} grid points", values.len(), grid.n)));
        }
        Ok(Self { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn w(&self) -> Vec<f64> {
        self.grid.points()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.values.iter().enumerate().map(|(k, v)| (self.grid.w(k), v))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> SpectrumGrid<U> {
        SpectrumGrid { grid: self.grid, values: self.values.iter().map(f).collect() }
    }
}

impl SpectrumGrid<f64> {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values at points with `pred(w)` true.
    pub fn select(&self, pred: impl Fn(f64) -> bool) -> Vec<f64> {
        self.iter().filter(|(w, _)| pred(*w)).map(|(_, v)| *v).collect()
    }
}

/// Centred moving average over `width` points (odd), shrinking at the edges.
pub fn band_average(values: &[f64], width: usize) -> Vec<f64> {
    let h = width / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(h);
            let hi = (k + h + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid() {
        let g = FrequencyGrid::standard();
        assert_eq!(g.n, 100_000);
        assert!(g.is_symmetric());
        assert_eq!(g.w(0), -4.0);
        assert!((g.w_max() - 4.0).abs() < 1e-12);
        assert!((g.t(0) + g.t(g.n - 1)).abs() < 1e-9);
        assert!((g.dt() * g.dw * g.n as f64 - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::linspace(0.0, 1.0, 1).is_err());
        assert!(FrequencyGrid::linspace(1.0, 0.0, 10).is_err());
        assert!(FrequencyGrid::linspace(-1.0, 2.0, 10).unwrap().require_symmetric().is_err());
        assert!(SpectrumGrid::new(FrequencyGrid::standard(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn band_average_of_constant() {
        let v = band_average(&[2.0; 10], 5);
        assert!(v.iter().all(|&x| (x - 2.0).abs() < 1e-15));
        let v = band_average(&[0.0, 3.0, 0.0], 3);
        assert_eq!(v, vec![1.5, 1.0, 1.5]);
    }
}
