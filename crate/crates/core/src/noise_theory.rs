//! Higher powers of Gaussian input noise.
//!
//! Input noise is regularized to a Gaussian correlation of bandwidth `ζ`,
//! `⟨a†(τ)a(t)⟩ = (ζ/2)·exp(−πζ²(t−τ)²)`, which tends to `½δ(t−τ)` as
//! `ζ → ∞`. Powers `α^j = κ^{(1−j)/2} a^j` then carry correlations
//! `jζ^j/(2^j κ^{j−1})·exp(−πjζ²(t−τ)²)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoiseModel {
    pub zeta: f64,
    pub kappa: f64,
    pub j: u32,
}

impl GaussianNoiseModel {
    pub fn new(zeta: f64, kappa: f64, j: u32) -> Result<Self> {
        if !(zeta > 0.0 && kappa > 0.0 && zeta.is_finite() && kappa.is_finite()) || j == 0 {
            return Err(Error::InvalidParameter(format!(
                "need zeta > 0, kappa > 0, j >= 1 (got {zeta}, {kappa}, {j})"
            )));
        }
        Ok(Self { zeta, kappa, j })
    }
}

/// Spectrum of the `j`-th power noise,
/// `√j·ζ^{j−1}/(2^j κ^{j−1})·exp(−w²/(4πjζ²))`.
pub fn higher_power_psd(m: &GaussianNoiseModel, w: f64) -> f64 {
    let j = m.j as f64;
    let ratio = (m.zeta / m.kappa).powi(m.j as i32 - 1);
    j.sqrt() * ratio / 2f64.powi(m.j as i32) * (-w * w / (4.0 * PI * j * m.zeta * m.zeta)).exp()
}

/// `√j/2^j`, the `ζ = κ`, `w = 0` value of [`higher_power_psd`].
pub fn quanta_bound(j: u32) -> f64 {
    (j as f64).sqrt() / 2f64.powi(j as i32)
}

pub fn bound_table(max_j: u32) -> Vec<(u32, f64)> {
    (1..=max_j).map(|j| (j, quanta_bound(j))).collect()
}

/// Spectrum of the field whose `j`-th power is the regularized noise,
/// `(√j/j^{1/j})·(κ/ζ)^{(j−1)/j}·exp(−jw²/(4πζ²))`.
pub fn power_noise_field_psd(m: &GaussianNoiseModel, w: f64) -> f64 {
    let j = m.j as f64;
    j.sqrt() / j.powf(1.0 / j)
        * (m.kappa / m.zeta).powf((j - 1.0) / j)
        * (-j * w * w / (4.0 * PI * m.zeta * m.zeta)).exp()
}

/// Regularized input correlation `(ζ/2)·exp(−πζ²Δ²)`.
pub fn input_autocorr(zeta: f64, dt: f64) -> f64 {
    0.5 * zeta * (-PI * zeta * zeta * dt * dt).exp()
}

/// `⟨α†^j(τ) α^j(t)⟩ = jζ^j/(2^j κ^{j−1})·exp(−πjζ²Δ²)`.
pub fn higher_power_autocorr(m: &GaussianNoiseModel, dt: f64) -> f64 {
    let j = m.j as f64;
    j * m.zeta.powi(m.j as i32) / (2f64.powi(m.j as i32) * m.kappa.powi(m.j as i32 - 1))
        * (-PI * j * m.zeta * m.zeta * dt * dt).exp()
}

/// Autocorrelation of `c = a²/√(2κ)` by Wick pairing: one pairing of
/// `⟨a†a†⟩⟨aa⟩` (zero for circular noise) and two of `⟨a†a⟩²`, giving
/// `(1/κ)⟨a†a⟩² = ζ²/(4κ)·exp(−2πζ²Δ²)`.
pub fn squared_noise_autocorr(zeta: f64, kappa: f64, t_minus_tau: f64) -> f64 {
    let g = input_autocorr(zeta, t_minus_tau);
    g * g / kappa
}

/// Circular complex Gaussian noise with correlation `(ζ/2)·exp(−πζ²Δ²)`:
/// unit-intensity white noise convolved with `h(s) = ζ·exp(−2πζ²s²)`.
pub fn correlated_noise(zeta: f64, delta: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let sd = (0.5 / delta).sqrt();
    let width = 1.0 / (2.0 * zeta * PI.sqrt());
    let taps = (8.0 * width / delta).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * taps)
        .map(|i| {
            let s = (i as f64 - taps as f64) * delta;
            zeta * (-2.0 * PI * zeta * zeta * s * s).exp() * delta
        })
        .collect();
    let white: Vec<C64> = (0..n + 2 * taps)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * sd, im * sd)
        })
        .collect();
    (0..n).map(|k| kernel.iter().zip(&white[k..k + 2 * taps + 1]).map(|(h, w)| w * h).sum()).collect()
}

/// Sample autocorrelation `mean(conj(x_k)·x_{k+l})` for `l = 0..=max_lag`.
pub fn sample_autocorr(x: &[C64], max_lag: usize) -> Vec<C64> {
    (0..=max_lag)
        .map(|l| {
            let n = x.len() - l;
            x[..n].iter().zip(&x[l..]).map(|(a, b)| a.conj() * b).sum::<C64>() / n as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrEstimate {
    pub lags: Vec<f64>,
    pub estimate: Vec<f64>,
    pub theory: Vec<f64>,
}

impl AutocorrEstimate {
    /// Largest relative error over lags where the theory exceeds `floor` of its peak.
    pub fn max_relative_error(&self, floor: f64) -> f64 {
        let peak = self.theory[0];
        self.theory
            .iter()
            .zip(&self.estimate)
            .filter(|(t, _)| **t > floor * peak)
            .map(|(t, e)| (e - t).abs() / t)
            .fold(0.0, f64::max)
    }
}

/// Monte-Carlo autocorrelation of `α^j = κ^{(1−j)/2} a^j` against
/// [`higher_power_autocorr`], from `batches` independent sub-streams.
#[allow(clippy::too_many_arguments)]
pub fn mc_power_autocorr(
    m: &GaussianNoiseModel,
    delta: f64,
    n_samples: usize,
    max_lag: usize,
    batches: usize,
    seed: u64,
    exec: Exec,
) -> Result<AutocorrEstimate> {
    if batches == 0 || n_samples / batches <= max_lag {
        return Err(Error::Statistics("too few samples per batch for the requested lags".into()));
    }
    let per = n_samples / batches;
    let scale = m.kappa.powf((1.0 - m.j as f64) / 2.0);
    let parts = exec.map(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let a = correlated_noise(m.zeta, delta, per, &mut rng);
        let p: Vec<C64> = a.iter().map(|z| z.powu(m.j) * scale).collect();
        sample_autocorr(&p, max_lag)
    });
    let estimate = (0..=max_lag).map(|l| parts.iter().map(|p| p[l].re).sum::<f64>() / batches as f64).collect();
    let lags: Vec<f64> = (0..=max_lag).map(|l| l as f64 * delta).collect();
    let theory = lags.iter().map(|&t| higher_power_autocorr(m, t)).collect();
    Ok(AutocorrEstimate { lags, estimate, theory })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcReport {
    pub j: u32,
    pub n_samples: usize,
    /// Share of periodogram power with `|f|` below 1% of Nyquist, for `x^j`.
    pub fraction: f64,
    /// Same for `x` itself.
    pub baseline_fraction: f64,
    pub ratio: f64,
}

const DC_BAND: f64 = 0.01;
const DC_BATCH: usize = 1 << 16;

fn low_band_fraction(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let cut = DC_BAND * (n / 2) as f64;
    let mut low = 0.0;
    let mut total = 0.0;
    for (k, z) in buf.iter().enumerate() {
        let f = k.min(n - k) as f64;
        let p = z.norm_sqr();
        total += p;
        if f < cut {
            low += p;
        }
    }
    (low, total)
}

/// Raises white Gaussian samples to the power `j` and reports how much of the
/// periodogram power falls in the lowest 1% of frequencies, relative to the
/// same samples unraised.
pub fn mc_higher_power_dc_concentration(j: u32, n_samples: usize, seed: u64, exec: Exec) -> Result<DcReport> {
    if j == 0 {
        return Err(Error::InvalidParameter("j must be >= 1".into()));
    }
    if n_samples < 100_000 {
        return Err(Error::Statistics(format!("need at least 1e5 samples, got {n_samples}")));
    }
    let batches = n_samples.div_ceil(DC_BATCH);
    let parts = exec.map(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let len = DC_BATCH.min(n_samples - b * DC_BATCH);
        let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xj: Vec<f64> = x.iter().map(|v| v.powi(j as i32)).collect();
        (low_band_fraction(&xj), low_band_fraction(&x))
    });
    let (mut low, mut total, mut low1, mut total1) = (0.0, 0.0, 0.0, 0.0);
    for ((l, t), (l1, t1)) in parts {
        low += l;
        total += t;
        low1 += l1;
        total1 += t1;
    }
    let fraction = low / total;
    let baseline_fraction = low1 / total1;
    Ok(DcReport { j, n_samples, fraction, baseline_fraction, ratio: fraction / baseline_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(zeta: f64, kappa: f64, j: u32) -> GaussianNoiseModel {
        GaussianNoiseModel::new(zeta, kappa, j).unwrap()
    }

    #[test]
    fn bound_values() {
        assert_eq!(higher_power_psd(&model(3.0, 3.0, 1), 0.0), 0.5);
        assert!((higher_power_psd(&model(2.0, 2.0, 2), 0.0) - 2f64.sqrt() / 4.0).abs() < 1e-16);
        assert!((higher_power_psd(&model(5.0, 5.0, 4), 0.0) - 0.125).abs() < 1e-16);
        let t = bound_table(12);
        assert!(t[1..].windows(2).all(|w| w[1].1 < w[0].1));
        for (j, b) in t {
            assert_eq!(higher_power_psd(&model(7.0, 7.0, j), 0.0), b);
        }
    }

    #[test]
    fn model_validation() {
        assert!(GaussianNoiseModel::new(0.0, 1.0, 1).is_err());
        assert!(GaussianNoiseModel::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn field_psd_limits() {
        assert_eq!(power_noise_field_psd(&model(2.0, 5.0, 1), 0.0), 1.0);
        let w = 0.7;
        let z = 2.0;
        assert!((power_noise_field_psd(&model(z, 5.0, 1), w) - (-w * w / (4.0 * PI * z * z)).exp()).abs() < 1e-15);
        // the j = 2 peak vanishes as ζ/κ grows
        let at = |r: f64| power_noise_field_psd(&model(r, 1.0, 2), 1.0);
        assert!(at(1e6) < 1.000_001e-3);
        assert!(at(1e12) < 1.000_001e-6);
        assert!(at(1e2) > at(1e4) && at(1e4) > at(1e6));
    }

    #[test]
    fn field_psd_width_scaling() {
        let half_width = |j: u32| {
            let m = model(3.0, 1.0, j);
            let peak = power_noise_field_psd(&m, 0.0);
            let (mut lo, mut hi) = (0.0, 100.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if power_noise_field_psd(&m, mid) > 0.5 * peak {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        assert!((half_width(1) / half_width(4) - 2.0).abs() < 0.02);
    }

    #[test]
    fn field_psd_integral_finite() {
        let m = model(10.0, 1.0, 2);
        let dw = 0.01;
        let integral: f64 = (-20_000..=20_000).map(|k| power_noise_field_psd(&m, k as f64 * dw) * dw).sum();
        let closed = power_noise_field_psd(&m, 0.0) * 2.0 * PI * 10.0 / 2f64.sqrt();
        assert!((integral / closed - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wick_consistency() {
        for t in [0.0, 0.1, 0.5] {
            assert!((higher_power_autocorr(&model(2.0, 3.0, 1), t) - input_autocorr(2.0, t)).abs() < 1e-15);
        }
        // α² = a²/√κ: two pairings of ⟨a†a⟩ give 2ζ²/(4κ) at zero lag
        let (z, k) = (2.0, 3.0);
        assert!((higher_power_autocorr(&model(z, k, 2), 0.0) - 2.0 * z * z / (4.0 * k)).abs() < 1e-14);
        let pairings = 2.0 * input_autocorr(z, 0.3).powi(2) / k;
        assert!((higher_power_autocorr(&model(z, k, 2), 0.3) - pairings).abs() < 1e-14);
        // c = a²/√(2κ) carries half of that
        assert!((squared_noise_autocorr(z, k, 0.0) - z * z / (4.0 * k)).abs() < 1e-14);
        assert!(squared_noise_autocorr(z, k, 50.0) == 0.0);
    }

    #[test]
    fn correlated_noise_matches_input_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zeta = 1.0;
        let delta = 0.05;
        let x = correlated_noise(zeta, delta, 400_000, &mut rng);
        let ac = sample_autocorr(&x, 8);
        for (l, v) in ac.iter().enumerate() {
            let t = input_autocorr(zeta, l as f64 * delta);
            assert!((v.re - t).abs() < 0.03 * input_autocorr(zeta, 0.0), "lag {l}: {} vs {t}", v.re);
        }
    }

    #[test]
    fn mc_squared_autocorr() {
        let m = model(1.0, 2.0, 2);
        let est = mc_power_autocorr(&m, 0.05, 400_000, 8, 8, 11, Exec::Parallel).unwrap();
        assert!(est.max_relative_error(0.1) < 0.05, "{:?}", est);
        assert!(mc_power_autocorr(&m, 0.05, 10, 8, 8, 11, Exec::Parallel).is_err());
    }

    #[test]
    fn dc_concentration() {
        let r1 = mc_higher_power_dc_concentration(1, 200_000, 3, Exec::Parallel).unwrap();
        assert!((r1.fraction - 0.01).abs() < 0.003, "{r1:?}");
        assert_eq!(r1.ratio, 1.0);
        let r2 = mc_higher_power_dc_concentration(2, 200_000, 3, Exec::Parallel).unwrap();
        assert!(r2.ratio > 5.0, "{r2:?}");
        assert_eq!(r2, mc_higher_power_dc_concentration(2, 200_000, 3, Exec::Sequential).unwrap());
        assert!(matches!(mc_higher_power_dc_concentration(2, 1000, 3, Exec::Parallel), Err(Error::Statistics(_))));
    }
}
