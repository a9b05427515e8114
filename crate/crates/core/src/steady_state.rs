//! Mean-field steady state of the pump/probe system.
//!
//! For a given pump photon number `n`, the probe moments are
//!
//! ```text
//! m = 2α² / [(1+βn)² + γ² − 4α²]
//! d = −iα(m + ½) / [i(1+βn) + γ]
//! ```
//!
//! and `n` itself solves `λ²·n·(m/2|d|)² = ξ²`.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{c, C64};
use crate::params::NormalizedParams;

/// States closer than this to the parametric-oscillation pole are rejected.
pub const THRESHOLD_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub n_bar: f64,
    pub m_bar: f64,
    pub d_bar: C64,
    /// `sqrt(2 d)`, principal branch.
    pub b_bar: C64,
    /// `λ²·n·(m/2|d|)² − ξ²` at the returned `n`.
    pub residual: f64,
    pub iterations: usize,
    /// Number of sign changes of the residual found by the scan.
    pub roots_found: usize,
}

impl SteadyState {
    pub fn multiple_roots(&self) -> bool {
        self.roots_found > 1
    }
}

fn threshold_margin(n_bar: f64, np: &NormalizedParams) -> f64 {
    let k = 1.0 + np.beta * n_bar;
    let g = np.gamma1();
    k * k + g * g - 4.0 * np.alpha * np.alpha
}

pub fn mean_probe(n_bar: f64, np: &NormalizedParams) -> Result<(f64, C64)> {
    if !(n_bar.is_finite() && n_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!("n_bar must be >= 0, got {n_bar}")));
    }
    let margin = threshold_margin(n_bar, np);
    if margin <= THRESHOLD_MARGIN {
        return Err(Error::AboveThreshold { n_bar, margin });
    }
    let al = np.alpha;
    let m = 2.0 * al * al / margin;
    let d = c(0.0, -al) * (m + 0.5) / c(np.gamma1(), 1.0 + np.beta * n_bar);
    Ok((m, d))
}

/// `m/(2|d|)` as a function of `n`, written without the `0/0` at `α = 0`.
fn ratio_at(n_bar: f64, np: &NormalizedParams) -> f64 {
    let k = 1.0 + np.beta * n_bar;
    let g = np.gamma1();
    2.0 * np.alpha.abs() / (k * k + g * g).sqrt()
}

/// Left side minus right side of the pump-number equation.
pub fn pump_residual(n_bar: f64, np: &NormalizedParams) -> f64 {
    let r = ratio_at(n_bar, np);
    np.lambda * np.lambda * n_bar * r * r - np.xi * np.xi
}

/// Steady state at a prescribed pump photon number.
pub fn steady_state_at(n_bar: f64, np: &NormalizedParams) -> Result<SteadyState> {
    let (m_bar, d_bar) = mean_probe(n_bar, np)?;
    Ok(SteadyState {
        n_bar,
        m_bar,
        d_bar,
        b_bar: (d_bar * 2.0).sqrt(),
        residual: pump_residual(n_bar, np),
        iterations: 0,
        roots_found: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub n_max: f64,
    pub n_min: f64,
    pub scan_points: usize,
    pub rel_tol: f64,
    pub max_bisections: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { n_max: 1e8, n_min: 1e-8, scan_points: 1601, rel_tol: 1e-12, max_bisections: 200 }
    }
}

pub fn solve_pump(np: &NormalizedParams) -> Result<SteadyState> {
    solve_pump_with(np, &SolveOptions::default())
}

pub fn solve_pump_with(np: &NormalizedParams, opts: &SolveOptions) -> Result<SteadyState> {
    mean_probe(0.0, np)?;
    if np.xi == 0.0 {
        return steady_state_at(0.0, np);
    }

    // Geometric scan, stopped at the first point above threshold.
    let ratio = (opts.n_max / opts.n_min).powf(1.0 / (opts.scan_points - 1) as f64);
    let mut grid = Vec::with_capacity(opts.scan_points + 1);
    grid.push(0.0);
    let mut n = opts.n_min;
    for _ in 0..opts.scan_points {
        if threshold_margin(n, np) <= THRESHOLD_MARGIN {
            break;
        }
        grid.push(n);
        n *= ratio;
    }
    let res: Vec<f64> = grid.iter().map(|&n| pump_residual(n, np)).collect();
    let brackets: Vec<usize> =
        (0..grid.len() - 1).filter(|&i| res[i] == 0.0 || (res[i] < 0.0) != (res[i + 1] < 0.0)).collect();
    let Some(&first) = brackets.first() else {
        return Err(Error::NoSolution(format!(
            "residual keeps one sign over n in [0, {:.3e}] (xi = {} beyond the reachable maximum)",
            grid.last().copied().unwrap_or(0.0),
            np.xi
        )));
    };

    let (mut lo, mut hi) = (grid[first], grid[first + 1]);
    let (mut rlo, mut rhi) = (res[first], res[first + 1]);
    let mut iterations = 0;
    while rlo != 0.0 && hi - lo > opts.rel_tol * hi && iterations < opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        let rm = pump_residual(mid, np);
        if (rm < 0.0) == (rlo < 0.0) && rm != 0.0 {
            lo = mid;
            rlo = rm;
        } else {
            hi = mid;
            rhi = rm;
        }
        iterations += 1;
    }
    let n_bar = if rlo.abs() <= rhi.abs() { lo } else { hi };
    let mut ss = steady_state_at(n_bar, np)?;
    ss.iterations = iterations;
    ss.roots_found = brackets.len();
    Ok(ss)
}

/// Solves at each `ξ` in turn.
pub fn sweep(np: &NormalizedParams, xis: &[f64], exec: Exec) -> Vec<Result<SteadyState>> {
    exec.map_slice(xis, |&xi| solve_pump(&np.with_xi(xi)))
}

pub fn nonlinearity_measure(ss: &SteadyState) -> Result<f64> {
    let d = ss.d_bar.norm();
    if d == 0.0 {
        return Err(Error::UndefinedMeasure);
    }
    Ok(ss.m_bar / (2.0 * d))
}

/// Scalar ladder recovery `b ← d + b − ½b²` from `b = 1`.
pub fn ladder_recovery(d: C64, max_iter: usize, tol: f64) -> Result<C64> {
    if max_iter == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParameter("max_iter >= 1 and tol > 0 required".into()));
    }
    let mut b = c(1.0, 0.0);
    for _ in 0..max_iter {
        if (0.5 * b * b - d).norm() < tol {
            return Ok(b);
        }
        b = d + b - 0.5 * b * b;
        if !(b.re.is_finite() && b.im.is_finite()) {
            break;
        }
    }
    if (0.5 * b * b - d).norm() < tol {
        return Ok(b);
    }
    Err(Error::Divergence { iterations: max_iter, last: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> NormalizedParams {
        NormalizedParams::example()
    }

    /// Smallest positive root of `ξ²β²n² + (2βξ² − 4λ²α²)n + ξ²(1+γ²) = 0`.
    fn quadratic_root(np: &NormalizedParams) -> f64 {
        let (a, b, l, g, x) = (np.alpha, np.beta, np.lambda, np.gamma1(), np.xi);
        let qa = x * x * b * b;
        let qb = 2.0 * b * x * x - 4.0 * l * l * a * a;
        let qc = x * x * (1.0 + g * g);
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        // stable form of the smaller root
        2.0 * qc / (-qb + disc)
    }

    #[test]
    fn zero_drive_probe() {
        let np = NormalizedParams::new(0.0, 1e-4, 0.01, 0.005, 0.0, 3).unwrap();
        let (m, d) = mean_probe(0.0, &np).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn probe_at_zero_pump() {
        let (m, d) = mean_probe(0.0, &example()).unwrap();
        assert_relative_eq!(m, 0.005 / 0.990025, max_relative = 1e-12);
        assert_relative_eq!(m, 5.0504e-3, max_relative = 1e-4);
        let expected = 0.05 * (m + 0.5) / (1.0f64 + 0.005 * 0.005).sqrt();
        assert_relative_eq!(d.norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(d.norm(), 2.5252e-2, max_relative = 1e-4);
    }

    #[test]
    fn probe_is_even_in_alpha() {
        let np = example();
        let mut neg = np.clone();
        neg.alpha = -np.alpha;
        let (m1, d1) = mean_probe(300.0, &np).unwrap();
        let (m2, d2) = mean_probe(300.0, &neg).unwrap();
        assert_eq!(m1, m2);
        assert_relative_eq!(d1.norm(), d2.norm(), max_relative = 1e-15);
        let s1 = steady_state_at(300.0, &np).unwrap();
        let s2 = steady_state_at(300.0, &neg).unwrap();
        assert_relative_eq!(
            nonlinearity_measure(&s1).unwrap(),
            nonlinearity_measure(&s2).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn threshold_rejected() {
        let np = NormalizedParams::new(0.5, 1e-4, 0.01, 0.0, 0.01, 3).unwrap();
        assert!(matches!(mean_probe(0.0, &np), Err(Error::AboveThreshold { .. })));
        // 4α² within 1e-7 of the pole
        let a = ((1.0 + 0.005f64 * 0.005 - 1e-7) / 4.0).sqrt();
        let np = NormalizedParams::new(a, 1e-4, 0.01, 0.005, 0.01, 3).unwrap();
        assert!(matches!(solve_pump(&np), Err(Error::AboveThreshold { .. })));
        // just inside the allowed margin, m grows large but stays finite
        let a = ((1.0 + 0.005f64 * 0.005 - 1e-5) / 4.0).sqrt();
        let np = NormalizedParams::new(a, 1e-4, 0.01, 0.005, 0.0, 3).unwrap();
        let (m, _) = mean_probe(0.0, &np).unwrap();
        assert!(m > 1e4 && m.is_finite());
    }

    #[test]
    fn zero_xi_is_zero_pump() {
        let np = example().with_xi(0.0);
        let ss = solve_pump(&np).unwrap();
        assert_eq!(ss.n_bar, 0.0);
        assert_relative_eq!(ss.m_bar, 2.0 * 0.0025 / (1.0 + 0.005f64.powi(2) - 0.01), max_relative = 1e-12);
    }

    #[test]
    fn example_root() {
        let np = example();
        let ss = solve_pump(&np).unwrap();
        // brute-force scan oracle over [0, 1e5]
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=100_000 {
            let n = i as f64;
            let r = pump_residual(n, &np).abs();
            if r < best.1 {
                best = (n, r);
            }
        }
        assert!((ss.n_bar - best.0).abs() <= 1.0, "{} vs {}", ss.n_bar, best.0);
        assert!((ss.n_bar - 252.0).abs() <= 1.0, "{}", ss.n_bar);
        assert_relative_eq!(ss.n_bar, quadratic_root(&np), max_relative = 1e-10);
        assert!(ss.residual.abs() < 1e-12 * (np.xi * np.xi).max(1.0));
        assert!(!ss.multiple_roots() || ss.roots_found == 2);
        assert!((nonlinearity_measure(&ss).unwrap() - 0.098).abs() < 1e-3);
    }

    #[test]
    fn fixed_point_iteration_agrees() {
        let np = example();
        let mut n: f64 = 0.0;
        for _ in 0..200 {
            let ss = steady_state_at(n, &np).unwrap();
            let r = nonlinearity_measure(&ss).unwrap();
            n = np.xi * np.xi / (np.lambda * np.lambda * r * r);
        }
        assert!((solve_pump(&np).unwrap().n_bar - n).abs() < 1e-6 * n);
    }

    #[test]
    fn back_substitution() {
        let np = example();
        let ss = solve_pump(&np).unwrap();
        let k = 1.0 + np.beta * ss.n_bar;
        let g = np.gamma1();
        let m = 2.0 * np.alpha.powi(2) / (k * k + g * g - 4.0 * np.alpha.powi(2));
        assert!((ss.m_bar - m).abs() < 1e-12);
        let lhs = ss.d_bar * c(g, k);
        assert!((lhs - c(0.0, -np.alpha) * (ss.m_bar + 0.5)).norm() < 1e-12);
        let meas = ss.m_bar / (2.0 * ss.d_bar.norm());
        assert!((np.lambda.powi(2) * ss.n_bar * meas * meas - np.xi.powi(2)).abs() < 1e-12);
        assert_relative_eq!(ss.b_bar.norm_sqr(), 2.0 * ss.d_bar.norm(), max_relative = 1e-14);
    }

    #[test]
    fn monotone_below_fold_and_none_above() {
        let np = example();
        let xis: Vec<f64> = (0..50).map(|i| 0.049 * i as f64 / 49.0).collect();
        let ns: Vec<f64> = sweep(&np, &xis, Exec::Parallel).into_iter().map(|r| r.unwrap().n_bar).collect();
        assert!(ns.windows(2).all(|w| w[1] >= w[0]), "{ns:?}");
        assert!(matches!(solve_pump(&np.with_xi(0.07)), Err(Error::NoSolution(_))));
    }

    #[test]
    fn two_roots_below_fold() {
        let ss = solve_pump(&example().with_xi(0.04)).unwrap();
        assert!(ss.multiple_roots());
        assert_relative_eq!(ss.n_bar, quadratic_root(&example().with_xi(0.04)), max_relative = 1e-10);
    }

    #[test]
    fn measure_vanishes_with_alpha() {
        for a in [1e-2, 1e-4, 1e-6] {
            let np = NormalizedParams::new(a, 1e-4, 0.01, 0.005, 0.0, 3).unwrap();
            let ss = steady_state_at(100.0, &np).unwrap();
            assert!(nonlinearity_measure(&ss).unwrap() < 3.0 * a);
        }
        let np = NormalizedParams::new(0.0, 1e-4, 0.01, 0.005, 0.0, 3).unwrap();
        assert_eq!(nonlinearity_measure(&steady_state_at(1.0, &np).unwrap()), Err(Error::UndefinedMeasure));
    }

    #[test]
    fn ladder_fixed_points() {
        assert_eq!(ladder_recovery(c(0.5, 0.0), 10, 1e-12).unwrap(), c(1.0, 0.0));
        let b = ladder_recovery(c(0.18, 0.0), 1000, 1e-10).unwrap();
        assert!((b - c(0.6, 0.0)).norm() < 1e-9);
        let b = ladder_recovery(C64::default(), 1_000_000, 1e-10).unwrap();
        assert!(b.norm() < 2e-5);
        let d = c(0.3, 0.1);
        let b = ladder_recovery(d, 1000, 1e-12).unwrap();
        assert!((b * b - 2.0 * d).norm() < 3e-12);
        assert!(matches!(ladder_recovery(c(3.0, 0.0), 50, 1e-10), Err(Error::Divergence { .. })));
        assert!(ladder_recovery(d, 0, 1e-10).is_err());
    }
}
