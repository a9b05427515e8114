//! Frequency-domain engine.
//!
//! Fluctuations around the steady state are taken in the basis
//! `{δd, δd†, δm}`, which reverses the `{m, d, d†}` block order used by
//! [`crate::operator_algebra`]: index 0 here is index 1 there, 1 ↔ 2, 2 ↔ 0.
//! The variation drift is
//!
//! ```text
//!     [ −ik−γ    0     −iα ]
//! N = [   0     ik−γ    iα ]      k = 1 + βn
//!     [  2iα   −2iα    −γ  ]
//! ```
//!
//! with scattering `S(w) = I − γ(N − iw)⁻¹` and reflection
//! `Σ(w) = I + γ(N − iw)⁻¹`. Vacuum inputs have `S_YY = ½`.
//!
//! At `γ = 0` the probe is closed, so `S = Σ = I` and no resolvent is formed.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{FrequencyGrid, SpectrumGrid};
use crate::linalg::{c, CMat3, C64};
use crate::params::NormalizedParams;
use crate::steady_state::SteadyState;
use crate::transform::TransformPair;

/// Vacuum input level.
pub const S_YY: f64 = 0.5;

const MIN_RECOVERY_POINTS: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationSystem {
    pub n: CMat3,
    pub b_bar: C64,
    pub gamma: f64,
    pub alpha: f64,
    /// `1 + βn`.
    pub detuning: f64,
    pub eigenvalues: [C64; 3],
    pub stable: bool,
}

impl VariationSystem {
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    fn require_stable(&self) -> Result<()> {
        if self.stable || self.gamma == 0.0 {
            Ok(())
        } else {
            Err(Error::Unstable { max_real: self.max_real_eigenvalue() })
        }
    }

    /// Resonance frequencies `−Im λ` of the drift, ascending.
    pub fn resonances(&self) -> [f64; 3] {
        let mut r = self.eigenvalues.map(|z| -z.im);
        r.sort_by(f64::total_cmp);
        r
    }
}

pub fn build_variation(ss: &SteadyState, np: &NormalizedParams) -> VariationSystem {
    let k = 1.0 + np.beta * ss.n_bar;
    let g = np.gamma1();
    let a = np.alpha;
    let z = C64::default();
    #[rustfmt::skip]
    let n = CMat3::new(
        c(-g, -k), z, c(0.0, -a),
        z, c(-g, k), c(0.0, a),
        c(0.0, 2.0 * a), c(0.0, -2.0 * a), c(-g, 0.0),
    );
    let ev = n.complex_eigenvalues_3();
    let stable = ev.iter().all(|z| z.re < 0.0);
    VariationSystem { n, b_bar: ss.b_bar, gamma: g, alpha: a, detuning: k, eigenvalues: ev, stable }
}

trait Eigen3 {
    fn complex_eigenvalues_3(&self) -> [C64; 3];
}

impl Eigen3 for CMat3 {
    fn complex_eigenvalues_3(&self) -> [C64; 3] {
        let ev = self.schur().eigenvalues().expect("complex Schur form is triangular");
        [ev[0], ev[1], ev[2]]
    }
}

fn inverse3(m: &CMat3, w: f64) -> Result<CMat3> {
    let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    let det = m.determinant();
    if det.norm() <= 1e-14 * scale.powi(3) {
        return Err(Error::ResolventSingular { w });
    }
    m.try_inverse().ok_or(Error::ResolventSingular { w })
}

/// `(N − iw)⁻¹`.
pub fn resolvent(vs: &VariationSystem, w: f64) -> Result<CMat3> {
    inverse3(&(vs.n - CMat3::identity() * c(0.0, w)), w)
}

pub fn scattering_s(vs: &VariationSystem, w: f64) -> Result<CMat3> {
    if vs.gamma == 0.0 {
        return Ok(CMat3::identity());
    }
    vs.require_stable()?;
    Ok(CMat3::identity() - resolvent(vs, w)? * c(vs.gamma, 0.0))
}

pub fn reflection_sigma(vs: &VariationSystem, w: f64) -> Result<CMat3> {
    if vs.gamma == 0.0 {
        return Ok(CMat3::identity());
    }
    vs.require_stable()?;
    Ok(CMat3::identity() + resolvent(vs, w)? * c(vs.gamma, 0.0))
}

fn on_grid<T: Send>(
    grid: &FrequencyGrid,
    exec: Exec,
    f: impl Fn(f64) -> Result<T> + Sync + Send,
) -> Result<SpectrumGrid<T>> {
    let values = exec.try_map(grid.n, |k| f(grid.w(k)))?;
    SpectrumGrid::new(*grid, values)
}

fn sdd_from(b: C64, s: &CMat3) -> f64 {
    let amp = b * (s[(0, 0)] + s[(0, 2)]) + b.conj() * (s[(0, 1)] + s[(0, 2)]);
    amp.norm_sqr() * S_YY
}

/// `S_DD(w) = ½|b̄(S₁₁+S₁₃) + b̄*(S₁₂+S₁₃)|²`.
pub fn sdd(vs: &VariationSystem, grid: &FrequencyGrid, exec: Exec) -> Result<SpectrumGrid<f64>> {
    vs.require_stable()?;
    on_grid(grid, exec, |w| Ok(sdd_from(vs.b_bar, &scattering_s(vs, w)?)))
}

pub const DEFAULT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqrtBranch {
    /// Pointwise principal square root.
    #[default]
    Principal,
    /// Phase unwrapped outward from `t = 0`, then halved.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Level removed from `S_DD` before the inner transform.
    pub subtract: f64,
    pub branch: SqrtBranch,
    /// Inner-transform values below this fraction of the peak are zeroed
    /// before the square root; `sqrt` would lift FFT roundoff to `~1e-8`.
    pub floor: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { subtract: S_YY, branch: SqrtBranch::Principal, floor: DEFAULT_FLOOR }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Real part of the recovered `S_BB`.
    pub sbb: SpectrumGrid<f64>,
    /// Largest imaginary part discarded.
    pub max_imag: f64,
}

/// `S_BB = ½ + F{ sqrt( ½·F⁻¹{S_DD − ½} ) }`.
pub fn recover_sbb(sdd: &SpectrumGrid<f64>) -> Result<Recovery> {
    recover_sbb_with(sdd, &RecoveryOptions::default())
}

pub fn recover_sbb_with(sdd: &SpectrumGrid<f64>, opts: &RecoveryOptions) -> Result<Recovery> {
    let grid = sdd.grid;
    grid.require_symmetric()?;
    if grid.n < MIN_RECOVERY_POINTS {
        return Err(Error::Grid(format!("recovery needs at least {MIN_RECOVERY_POINTS} points, got {}", grid.n)));
    }
    let tp = TransformPair::new(grid);
    let shifted: Vec<f64> = sdd.values.iter().map(|v| v - opts.subtract).collect();
    let mut inner: Vec<C64> = tp.inverse_real(&shifted).into_iter().map(|z| 0.5 * z).collect();
    let cut = opts.floor * inner.iter().map(|z| z.norm()).fold(0.0, f64::max);
    inner.iter_mut().filter(|z| z.norm() <= cut).for_each(|z| *z = C64::default());
    let root = match opts.branch {
        SqrtBranch::Principal => inner.iter().map(|z| z.sqrt()).collect(),
        SqrtBranch::Continuous => continuous_sqrt(&inner),
    };
    let out = tp.forward(&root);
    let max_imag = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let values = out.iter().map(|z| S_YY + z.re).collect();
    Ok(Recovery { sbb: SpectrumGrid::new(grid, values)?, max_imag })
}

fn continuous_sqrt(z: &[C64]) -> Vec<C64> {
    let n = z.len();
    let centre = n / 2;
    let mut phase = vec![0.0; n];
    phase[centre] = z[centre].arg();
    let step = |prev: f64, next: &C64| {
        let raw = next.arg();
        let k = ((prev - raw) / std::f64::consts::TAU).round();
        raw + k * std::f64::consts::TAU
    };
    for i in centre + 1..n {
        phase[i] = step(phase[i - 1], &z[i]);
    }
    for i in (0..centre).rev() {
        phase[i] = step(phase[i + 1], &z[i]);
    }
    z.iter().zip(&phase).map(|(v, &p)| C64::from_polar(v.norm().sqrt(), 0.5 * p)).collect()
}

/// `S̄(w) = ½[S(w) + S(−w)]`.
pub fn symmetrize(s: &SpectrumGrid<f64>) -> Result<SpectrumGrid<f64>> {
    s.grid.require_symmetric()?;
    let n = s.len();
    let values = (0..n).map(|k| 0.5 * (s.values[k] + s.values[n - 1 - k])).collect();
    SpectrumGrid::new(s.grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSolution {
    /// `e^{+2iφ}`.
    pub z: C64,
    /// `e^{−2iφ}`, always `1/z`.
    pub z_inv: C64,
    /// `½·arg z`.
    pub phi: f64,
    /// `½R²` from the first row.
    pub half_r2: C64,
    /// `½R*²` from the second row.
    pub half_r2_conj: C64,
    /// `|½R*² − conj(½R²)|` for the chosen branch.
    pub residual: f64,
    /// Same for the rejected branch.
    pub other_residual: f64,
    /// `||z| − 1|`.
    pub unimodularity: f64,
}

impl PhaseSolution {
    /// `|R²| = |2·(½R²)|`.
    pub fn reflectivity(&self) -> f64 {
        2.0 * self.half_r2.norm()
    }
}

fn phase_candidate(s: &CMat3, z: C64) -> (C64, C64, f64) {
    let zi = 1.0 / z;
    let l1 = 0.5 * (s[(0, 0)] * z + s[(0, 1)] * zi) + s[(0, 2)];
    let l2 = 0.5 * (s[(1, 0)] * z + s[(1, 1)] * zi) + s[(1, 2)];
    (l1, l2, (l2 - l1.conj()).norm())
}

fn phase_candidates(s: &CMat3) -> Result<[C64; 2]> {
    let d = s[(0, 0)] - s[(1, 0)].conj() - s[(0, 1)] + s[(1, 1)].conj();
    let scale = s.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if d.norm() <= 1e-14 * scale {
        return Err(Error::PhaseUndefined { denominator: d.norm() });
    }
    let x = (s[(1, 2)].conj() - s[(0, 2)]) / d;
    let r = (1.0 + x * x).sqrt();
    Ok([x - r, x + r])
}

fn choose_phase(s: &CMat3, cands: [C64; 2], prev: Option<C64>) -> PhaseSolution {
    let a = phase_candidate(s, cands[0]);
    let b = phase_candidate(s, cands[1]);
    let tie = (a.2 - b.2).abs() <= 1e-12 * (1.0 + a.2.max(b.2));
    let target = prev.unwrap_or(c(1.0, 0.0));
    let first = if tie { (cands[0] - target).norm() <= (cands[1] - target).norm() } else { a.2 < b.2 };
    let (z, (l1, l2, res), other) = if first { (cands[0], a, b.2) } else { (cands[1], b, a.2) };
    PhaseSolution {
        z,
        z_inv: 1.0 / z,
        phi: 0.5 * z.arg(),
        half_r2: l1,
        half_r2_conj: l2,
        residual: res,
        other_residual: other,
        unimodularity: (z.norm() - 1.0).abs(),
    }
}

/// Solves the two reflection-phase conditions for `e^{2iφ}`.
///
/// Of the two closed-form candidates, the one whose rows give `½R²` and
/// `½R*²` closest to complex conjugates is kept. Ties go to the candidate
/// nearest `prev` (or to `1` without a neighbour).
pub fn reflection_phase(sigma: &CMat3, prev: Option<C64>) -> Result<PhaseSolution> {
    Ok(choose_phase(sigma, phase_candidates(sigma)?, prev))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reflectivity {
    pub r: SpectrumGrid<f64>,
    pub t: SpectrumGrid<f64>,
    /// Symmetrized `R`, when the grid is symmetric.
    pub r_sym: Option<SpectrumGrid<f64>>,
    pub phase: SpectrumGrid<f64>,
    /// Indices where the phase was undefined; `R` there is interpolated.
    pub flagged: Vec<usize>,
    pub max_residual: f64,
    pub max_unimodularity: f64,
}

pub fn reflectivity(vs: &VariationSystem, grid: &FrequencyGrid, exec: Exec) -> Result<Reflectivity> {
    vs.require_stable()?;
    let per_point = exec.try_map(grid.n, |k| {
        let s = reflection_sigma(vs, grid.w(k))?;
        Ok::<_, Error>((s, phase_candidates(&s).ok()))
    })?;

    let mut r = vec![f64::NAN; grid.n];
    let mut phase = vec![f64::NAN; grid.n];
    let mut flagged = Vec::new();
    let mut prev = None;
    let (mut max_residual, mut max_unimodularity) = (0.0f64, 0.0f64);
    for (k, (s, cands)) in per_point.iter().enumerate() {
        match cands {
            Some(cands) => {
                let sol = choose_phase(s, *cands, prev);
                prev = Some(sol.z);
                r[k] = sol.reflectivity();
                phase[k] = sol.phi;
                max_residual = max_residual.max(sol.residual);
                max_unimodularity = max_unimodularity.max(sol.unimodularity);
            }
            None => flagged.push(k),
        }
    }
    if flagged.len() == grid.n {
        return Err(Error::PhaseUndefined { denominator: 0.0 });
    }
    interpolate_gaps(&mut r, &flagged);
    interpolate_gaps(&mut phase, &flagged);

    let r = SpectrumGrid::new(*grid, r)?;
    let t = r.map(|v| 1.0 - v);
    let r_sym = grid.is_symmetric().then(|| symmetrize(&r)).transpose()?;
    Ok(Reflectivity { r, t, r_sym, phase: SpectrumGrid::new(*grid, phase)?, flagged, max_residual, max_unimodularity })
}

fn interpolate_gaps(v: &mut [f64], gaps: &[usize]) {
    for &k in gaps {
        let left = (0..k).rev().find(|&i| !v[i].is_nan());
        let right = (k + 1..v.len()).find(|&i| !v[i].is_nan());
        v[k] = match (left, right) {
            (Some(l), Some(r)) => {
                let f = (k - l) as f64 / (r - l) as f64;
                v[l] + f * (v[r] - v[l])
            }
            (Some(l), None) => v[l],
            (None, Some(r)) => v[r],
            (None, None) => f64::NAN,
        };
    }
}

/// `b(w)` channel response of the intracavity fluctuation `channel`
/// (`0 = δd`, `1 = δd†`, `2 = δm`) driven by vacuum input.
///
/// `S_j(w) = ½γ(|b̄G_j1 + b̄*G_j3|² + |b̄*G_j2 + b̄G_j3|²)` with `G = (N − iw)⁻¹`.
pub fn intracavity_psd(
    vs: &VariationSystem,
    grid: &FrequencyGrid,
    channel: usize,
    exec: Exec,
) -> Result<SpectrumGrid<f64>> {
    if channel > 2 {
        return Err(Error::InvalidParameter(format!("channel {channel} out of range 0..=2")));
    }
    vs.require_stable()?;
    let b = vs.b_bar;
    on_grid(grid, exec, |w| {
        let g = resolvent(vs, w)?;
        let y = b * g[(channel, 0)] + b.conj() * g[(channel, 2)];
        let yd = b.conj() * g[(channel, 1)] + b * g[(channel, 2)];
        Ok(S_YY * vs.gamma * (y.norm_sqr() + yd.norm_sqr()))
    })
}

/// Two-mode `{δb, δb†}` model with the pump number frozen at `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub w: Matrix2<C64>,
    pub gamma: f64,
    pub b_bar: C64,
    pub eigenvalues: [C64; 2],
    pub stable: bool,
}

pub fn build_linearized(ss: &SteadyState, np: &NormalizedParams) -> LinearizedSystem {
    let g = np.gamma1();
    let k = 2.0 * np.beta * ss.n_bar + 1.0;
    let a = np.alpha;
    let w = Matrix2::new(c(-0.5 * g, -k), c(0.0, -4.0 * a), c(0.0, 4.0 * a), c(-0.5 * g, k)) * c(0.5, 0.0);
    let ev = w.schur().eigenvalues().expect("complex Schur form is triangular");
    let eigenvalues = [ev[0], ev[1]];
    let stable = eigenvalues.iter().all(|z| z.re < 0.0);
    LinearizedSystem { w, gamma: g, b_bar: ss.b_bar, eigenvalues, stable }
}

impl LinearizedSystem {
    fn require_stable(&self) -> Result<()> {
        if self.stable || self.gamma == 0.0 {
            Ok(())
        } else {
            Err(Error::Unstable { max_real: self.eigenvalues[0].re.max(self.eigenvalues[1].re) })
        }
    }

    pub fn resolvent(&self, w: f64) -> Result<Matrix2<C64>> {
        let m = self.w - Matrix2::identity() * c(0.0, w);
        let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm()));
        if m.determinant().norm() <= 1e-14 * scale * scale {
            return Err(Error::ResolventSingular { w });
        }
        m.try_inverse().ok_or(Error::ResolventSingular { w })
    }

    pub fn scattering(&self, w: f64) -> Result<Matrix2<C64>> {
        if self.gamma == 0.0 {
            return Ok(Matrix2::identity());
        }
        self.require_stable()?;
        Ok(Matrix2::identity() - self.resolvent(w)? * c(self.gamma, 0.0))
    }

    pub fn reflection(&self, w: f64) -> Result<Matrix2<C64>> {
        if self.gamma == 0.0 {
            return Ok(Matrix2::identity());
        }
        self.require_stable()?;
        Ok(Matrix2::identity() + self.resolvent(w)? * c(self.gamma, 0.0))
    }

    /// Mean amplitude `(b(w), b*(w)) = γ(W − iw)⁻¹(b̄, b̄*)`.
    pub fn silent_amplitude(&self, w: f64) -> Result<(C64, C64)> {
        self.require_stable()?;
        let v = self.resolvent(w)? * Vector2::new(self.b_bar, self.b_bar.conj()) * c(self.gamma, 0.0);
        Ok((v[0], v[1]))
    }
}

/// `½|S₁₁ + S₁₂|²` of the two-mode model: `b` and `b†` inputs carry the same
/// vacuum transform.
pub fn linearized_spectrum(
    ss: &SteadyState,
    np: &NormalizedParams,
    grid: &FrequencyGrid,
    exec: Exec,
) -> Result<SpectrumGrid<f64>> {
    let ls = build_linearized(ss, np);
    ls.require_stable()?;
    on_grid(grid, exec, |w| {
        let s = ls.scattering(w)?;
        Ok(S_YY * (s[(0, 0)] + s[(0, 1)]).norm_sqr())
    })
}

/// `|Σ₁₁ + Σ₁₂|²` of the two-mode model.
pub fn linearized_reflectivity(
    ss: &SteadyState,
    np: &NormalizedParams,
    grid: &FrequencyGrid,
    exec: Exec,
) -> Result<SpectrumGrid<f64>> {
    let ls = build_linearized(ss, np);
    ls.require_stable()?;
    on_grid(grid, exec, |w| {
        let s = ls.reflection(w)?;
        Ok((s[(0, 0)] + s[(0, 1)]).norm_sqr())
    })
}

/// `S_DD` with `b̄` replaced by the frequency-dependent mean amplitude and the
/// products by convolutions on the grid:
/// `(1/γ²)|b∗(S₁₁+S₁₃) + b*∗(S₁₂+S₁₃)|²·½`.
pub fn sdd_convolved(
    ss: &SteadyState,
    np: &NormalizedParams,
    grid: &FrequencyGrid,
    exec: Exec,
) -> Result<SpectrumGrid<f64>> {
    let vs = build_variation(ss, np);
    vs.require_stable()?;
    if vs.gamma == 0.0 {
        return Err(Error::InvalidParameter("convolved spectrum needs gamma > 0".into()));
    }
    let ls = build_linearized(ss, np);
    let rows = exec.try_map(grid.n, |k| {
        let w = grid.w(k);
        let s = scattering_s(&vs, w)?;
        let (b, bc) = ls.silent_amplitude(w)?;
        Ok::<_, Error>((b, bc, s[(0, 0)] + s[(0, 2)], s[(0, 1)] + s[(0, 2)]))
    })?;
    let col = |f: fn(&(C64, C64, C64, C64)) -> C64| rows.iter().map(f).collect::<Vec<_>>();
    let tp = TransformPair::new(*grid);
    let p = tp.convolve(&col(|r| r.0), &col(|r| r.2));
    let q = tp.convolve(&col(|r| r.1), &col(|r| r.3));
    let g2 = vs.gamma * vs.gamma;
    let values = p.iter().zip(&q).map(|(a, b)| S_YY * (a + b).norm_sqr() / g2).collect();
    SpectrumGrid::new(*grid, values)
}
