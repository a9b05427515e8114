//! Stochastic and deterministic time stepping in normalized time `τ = 2Ωt`.
//!
//! Inputs are complex white noise with `⟨|dy|²⟩ = dτ`, split into two real
//! Gaussian quadratures of variance `½dτ` each. Conjugate streams reuse the
//! same quadratures (`y† = conj y`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{FrequencyGrid, SpectrumGrid};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::operator_algebra::BlockSystem;
use crate::params::NormalizedParams;
use crate::spectra::VariationSystem;
use crate::steady_state::SteadyState;

/// Largest allowed `dt·max|λ(N)|` for the explicit scheme.
pub const STEP_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub dim: usize,
    /// Spacing of the recorded samples.
    pub dt_record: f64,
    /// Integrator step.
    pub dt: f64,
    pub seed: u64,
    /// Row-major `len × dim`.
    pub states: Vec<C64>,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn tau(&self, k: usize) -> f64 {
        k as f64 * self.dt_record
    }

    pub fn state(&self, k: usize) -> &[C64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[C64] {
        self.state(self.len() - 1)
    }

    pub fn channel(&self, j: usize) -> Vec<C64> {
        self.states.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// Wraps a sampled series as a one-channel trace.
    pub fn from_samples(samples: Vec<C64>, dt_record: f64, seed: u64) -> Self {
        Self { dim: 1, dt_record, dt: dt_record, seed, states: samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Steps after the burn-in.
    pub n_steps: usize,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
    /// Steps integrated and discarded before recording starts.
    pub burn_in: usize,
    pub noise: bool,
}

impl StepConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self { dt, n_steps, record_every: 1, burn_in: 0, noise: true }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn burn_in(mut self, steps: usize) -> Self {
        self.burn_in = steps;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = false;
        self
    }

    fn validate(&self, spectral_radius: f64) -> Result<()> {
        if !(self.dt > 0.0) || self.n_steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "dt > 0, n_steps >= 1, record_every >= 1 required (got {}, {}, {})",
                self.dt, self.n_steps, self.record_every
            )));
        }
        let product = self.dt * spectral_radius;
        if product >= STEP_LIMIT {
            return Err(Error::StepTooLarge { product, limit: STEP_LIMIT });
        }
        Ok(())
    }
}

/// Noise loading of the variation system on the quadratures `(ξ₁, ξ₂)` of
/// `y = ξ₁ + iξ₂`: input vector `(b̄y, b̄*y†, b̄y† + b̄*y)` times `−√γ`.
pub fn variation_noise_matrix(vs: &VariationSystem) -> [[C64; 2]; 3] {
    let b = vs.b_bar;
    let bc = b.conj();
    let s = -vs.gamma.sqrt();
    let i = c(0.0, 1.0);
    [[b * s, i * b * s], [bc * s, -i * bc * s], [(b + bc) * s, i * (bc - b) * s]]
}

fn spectral_radius(m: &CMat) -> f64 {
    linalg::eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Euler–Maruyama for `dδA = N δA dτ + K dξ` in the basis `{δd, δd†, δm}`.
pub fn integrate_variations(vs: &VariationSystem, cfg: &StepConfig, initial: [C64; 3], seed: u64) -> Result<TimeTrace> {
    let n = CMat::from_fn(3, 3, |r, k| vs.n[(r, k)]);
    cfg.validate(spectral_radius(&n))?;
    let normal = Normal::new(0.0, (0.5 * cfg.dt).sqrt()).expect("positive variance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = cfg.noise;
    Ok(run_variations(vs, cfg, initial, seed, move || {
        if noise {
            (normal.sample(&mut rng), normal.sample(&mut rng))
        } else {
            (0.0, 0.0)
        }
    }))
}

fn run_variations(
    vs: &VariationSystem,
    cfg: &StepConfig,
    initial: [C64; 3],
    seed: u64,
    mut increments: impl FnMut() -> (f64, f64),
) -> TimeTrace {
    let n = vs.n;
    let k = variation_noise_matrix(vs);
    let dt = c(cfg.dt, 0.0);
    let mut x = initial;
    let mut step = |x: &mut [C64; 3]| {
        let (e1, e2) = increments();
        let mut next = *x;
        for r in 0..3 {
            let drift = n[(r, 0)] * x[0] + n[(r, 1)] * x[1] + n[(r, 2)] * x[2];
            next[r] += drift * dt + k[r][0] * e1 + k[r][1] * e2;
        }
        *x = next;
    };
    for _ in 0..cfg.burn_in {
        step(&mut x);
    }
    let records = cfg.n_steps / cfg.record_every + 1;
    let mut states = Vec::with_capacity(records * 3);
    states.extend_from_slice(&x);
    for s in 1..=cfg.n_steps {
        step(&mut x);
        if s % cfg.record_every == 0 {
            states.extend_from_slice(&x);
        }
    }
    TimeTrace { dim: 3, dt_record: cfg.dt * cfg.record_every as f64, dt: cfg.dt, seed, states }
}

/// `e^{Nτ}v`.
pub fn variation_exact(vs: &VariationSystem, v: [C64; 3], tau: f64) -> [C64; 3] {
    let n = CMat::from_fn(3, 3, |r, k| vs.n[(r, k)] * tau);
    let out = linalg::expm(&n) * CVec::from_column_slice(&v);
    [out[0], out[1], out[2]]
}

/// Integrates one trace per seed.
pub fn ensemble(
    vs: &VariationSystem,
    cfg: &StepConfig,
    initial: [C64; 3],
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<TimeTrace>> {
    exec.try_map(seeds.len(), |i| integrate_variations(vs, cfg, initial, seeds[i]))
}

/// Constant drive `−i(α/2)(0, 1, −1, 0, n, −n)` of the six-dimensional
/// system with the pump number replaced by its mean.
pub fn constant_drive(np: &NormalizedParams, ss: &SteadyState) -> [C64; 6] {
    let h = c(0.0, -0.5 * np.alpha);
    let n = ss.n_bar;
    [c(0.0, 0.0), h, -h, c(0.0, 0.0), h * n, -h * n]
}

/// Noise loading of the six-dimensional system on `(ξ₁, ξ₂, ξ₃, ξ₄)`, the
/// quadratures of the probe noise `y = ξ₁ + iξ₂` and pump noise
/// `x = ξ₃ + iξ₄`. Multiplicative factors are the mean amplitudes.
pub fn six_noise_matrix(np: &NormalizedParams, ss: &SteadyState) -> [[C64; 4]; 6] {
    let i = c(0.0, 1.0);
    let b = ss.b_bar;
    let bc = b.conj();
    let g = np.gamma1().sqrt();
    let p = np.lambda.sqrt() * 2.0 * ss.n_bar.sqrt();
    let n = ss.n_bar;
    let d = ss.d_bar;
    let z = c(0.0, 0.0);
    let m_row = [-(b + bc) * g, -i * (bc - b) * g];
    let d_row = [-b * g, -i * b * g];
    let dc_row = [-bc * g, i * bc * g];
    [
        [m_row[0], m_row[1], z, z],
        [d_row[0], d_row[1], z, z],
        [dc_row[0], dc_row[1], z, z],
        [m_row[0] * n, m_row[1] * n, -c(p * ss.m_bar, 0.0), -i * p * ss.m_bar],
        [d_row[0] * n, d_row[1] * n, -d * p, -i * d * p],
        [dc_row[0] * n, dc_row[1] * n, -d.conj() * p, i * d.conj() * p],
    ]
}

/// Drift `J` (top-left 6×6 of `iM − Γ`) plus drive, stepped by classical RK4
/// with additive Euler–Maruyama noise increments.
#[allow(clippy::too_many_arguments)]
pub fn integrate_truncated_six(
    bs: &BlockSystem,
    ss: &SteadyState,
    np: &NormalizedParams,
    drive: &(dyn Fn(f64) -> [C64; 6] + Sync),
    cfg: &StepConfig,
    initial: [C64; 6],
    seed: u64,
) -> Result<TimeTrace> {
    if bs.order() < 2 {
        return Err(Error::InvalidParameter("six-dimensional system needs order >= 2".into()));
    }
    let j = bs.drift_top(6);
    cfg.validate(spectral_radius(&j))?;
    let k = six_noise_matrix(np, ss);
    let normal = Normal::new(0.0, (0.5 * cfg.dt).sqrt()).expect("positive variance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = |t: f64, x: &[C64; 6]| {
        let c = drive(t);
        let mut out = [C64::default(); 6];
        for r in 0..6 {
            let mut s = c[r];
            for q in 0..6 {
                s += j[(r, q)] * x[q];
            }
            out[r] = s;
        }
        out
    };
    let axpy = |x: &[C64; 6], a: f64, y: &[C64; 6]| {
        let mut o = *x;
        for r in 0..6 {
            o[r] += y[r] * a;
        }
        o
    };
    let h = cfg.dt;
    let mut x = initial;
    let mut t = 0.0;
    let mut step = |x: &mut [C64; 6], t: &mut f64| {
        let k1 = f(*t, x);
        let k2 = f(*t + 0.5 * h, &axpy(x, 0.5 * h, &k1));
        let k3 = f(*t + 0.5 * h, &axpy(x, 0.5 * h, &k2));
        let k4 = f(*t + h, &axpy(x, h, &k3));
        for r in 0..6 {
            x[r] += (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]) * (h / 6.0);
        }
        if cfg.noise {
            let e: [f64; 4] = std::array::from_fn(|_| normal.sample(&mut rng));
            for r in 0..6 {
                x[r] += k[r][0] * e[0] + k[r][1] * e[1] + k[r][2] * e[2] + k[r][3] * e[3];
            }
        }
        *t += h;
    };
    for _ in 0..cfg.burn_in {
        step(&mut x, &mut t);
    }
    let mut states = Vec::with_capacity((cfg.n_steps / cfg.record_every + 1) * 6);
    states.extend_from_slice(&x);
    for s in 1..=cfg.n_steps {
        step(&mut x, &mut t);
        if s % cfg.record_every == 0 {
            states.extend_from_slice(&x);
        }
    }
    Ok(TimeTrace { dim: 6, dt_record: h * cfg.record_every as f64, dt: h, seed, states })
}

/// Closed-form noiseless solution `e^{Jτ}x₀ + ∫₀^τ e^{J(τ−s)} c ds` for a
/// constant drive, from the exponential of the augmented matrix
/// `[[J, c], [0, 0]]`.
pub fn six_exact(bs: &BlockSystem, drive: [C64; 6], initial: [C64; 6], tau: f64) -> [C64; 6] {
    let j = bs.drift_top(6);
    let mut aug = CMat::zeros(7, 7);
    aug.view_mut((0, 0), (6, 6)).copy_from(&j);
    for r in 0..6 {
        aug[(r, 6)] = drive[r];
    }
    let e = linalg::expm(&(aug * c(tau, 0.0)));
    let mut v = CVec::from_column_slice(&initial).push(c(1.0, 0.0));
    v = e * v;
    std::array::from_fn(|r| v[r])
}

/// Fixed point `−J⁻¹c` of the noiseless six-dimensional system.
pub fn six_fixed_point(bs: &BlockSystem, drive: [C64; 6]) -> Result<[C64; 6]> {
    let j = bs.drift_top(6);
    let rhs = CMat::from_column_slice(6, 1, &drive) * c(-1.0, 0.0);
    let x = linalg::solve(&j, &rhs)
        .ok_or_else(|| Error::SingularTransformation("six-dimensional drift is singular".into()))?;
    Ok(std::array::from_fn(|r| x[r]))
}

/// Periodogram `|Δ Σ x_k e^{−iwt_k}|² / (2T)`, `T = NΔ`, on ascending
/// frequencies `w_m = 2πm/T`, `m = −⌊N/2⌋ … ⌈N/2⌉−1`. White noise with
/// `⟨|x|²⟩ = 1/Δ` gives a flat `½`.
pub fn periodogram(samples: &[C64], delta: f64) -> Result<SpectrumGrid<f64>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Statistics("periodogram needs at least 2 samples".into()));
    }
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let scale = delta / (2.0 * n as f64);
    let values = (0..n).map(|i| buf[(i + n - half) % n].norm_sqr() * scale).collect();
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * delta);
    SpectrumGrid::new(FrequencyGrid::uniform(-(half as f64) * dw, dw, n)?, values)
}

/// Averaged periodogram of one channel over an ensemble.
pub fn estimate_psd(traces: &[TimeTrace], channel: usize) -> Result<SpectrumGrid<f64>> {
    if traces.len() < 2 {
        return Err(Error::Statistics(format!("need at least 2 traces, got {}", traces.len())));
    }
    let first = &traces[0];
    if channel >= first.dim {
        return Err(Error::InvalidParameter(format!("channel {channel} out of range for dim {}", first.dim)));
    }
    if traces.iter().any(|t| t.len() != first.len() || t.dt_record != first.dt_record || t.dim != first.dim) {
        return Err(Error::Grid("traces have mismatched grids".into()));
    }
    let mut acc: Option<SpectrumGrid<f64>> = None;
    for t in traces {
        let p = periodogram(&t.channel(channel), t.dt_record)?;
        match acc.as_mut() {
            None => acc = Some(p),
            Some(a) => a.values.iter_mut().zip(&p.values).for_each(|(x, y)| *x += y),
        }
    }
    let mut out = acc.expect("at least two traces");
    let k = traces.len() as f64;
    out.values.iter_mut().for_each(|v| *v /= k);
    Ok(out)
}

/// Integrates one trace per seed and averages the channel periodograms
/// without keeping the traces.
pub fn simulate_psd(
    vs: &VariationSystem,
    cfg: &StepConfig,
    channel: usize,
    seeds: &[u64],
    exec: Exec,
) -> Result<SpectrumGrid<f64>> {
    if seeds.len() < 2 {
        return Err(Error::Statistics(format!("need at least 2 seeds, got {}", seeds.len())));
    }
    if channel > 2 {
        return Err(Error::InvalidParameter(format!("channel {channel} out of range 0..=2")));
    }
    let zero = [C64::default(); 3];
    let parts = exec.try_map(seeds.len(), |i| {
        let t = integrate_variations(vs, cfg, zero, seeds[i])?;
        periodogram(&t.channel(channel), t.dt_record)
    })?;
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        out.values.iter_mut().zip(&p.values).for_each(|(x, y)| *x += y);
    }
    let k = parts.len() as f64;
    out.values.iter_mut().for_each(|v| *v /= k);
    Ok(out)
}
