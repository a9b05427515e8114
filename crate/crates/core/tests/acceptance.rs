use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xkerr_core::exec::Exec;
use xkerr_core::grid::{band_average, FrequencyGrid, SpectrumGrid};
use xkerr_core::linalg::max_abs;
use xkerr_core::noise_theory::{higher_power_psd, mc_higher_power_dc_concentration, GaussianNoiseModel};
use xkerr_core::operator_algebra::{build_blocks, solve_uv_general, solve_v_closed, verify_reduction};
use xkerr_core::params::{normalize, NormalizedParams, SystemParams};
use xkerr_core::spectra::{
    build_variation, intracavity_psd, recover_sbb, reflection_sigma, reflectivity, scattering_s, sdd, symmetrize,
    VariationSystem,
};
use xkerr_core::steady_state::{pump_residual, solve_pump, steady_state_at, sweep};
use xkerr_core::time_domain::{integrate_variations, simulate_psd, variation_exact, StepConfig};
use xkerr_core::transform::TransformPair;

fn report(n: &str, ok: bool, detail: String) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn example_at(n_bar: f64) -> VariationSystem {
    let np = NormalizedParams::example();
    build_variation(&steady_state_at(n_bar, &np).unwrap(), &np)
}

fn resonance_window(s: &SpectrumGrid<f64>, n_bar: f64) -> f64 {
    let wr = 1.0 + NormalizedParams::example().beta * n_bar;
    s.select(|w| (w.abs() - wr).abs() <= 0.05).into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_1_xi_reproduction() {
    let sys = SystemParams::example();
    let np = normalize(&sys, 3).unwrap();
    report("1", (np.xi - 0.0155).abs() <= 0.001, format!("xi = {:.5}", np.xi));
}

#[test]
fn criterion_2_exact_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_dec, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let np = NormalizedParams::new(
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..0.2),
            rng.random_range(0.001..0.1),
            rng.random_range(0.0..0.1),
            0.0,
            3,
        )
        .unwrap();
        assert!(4.0 * np.alpha * np.alpha < 1.0 + np.gamma1().powi(2));
        let bs = build_blocks(&np).unwrap();
        let rm = solve_uv_general(&bs).unwrap();
        worst_dec = worst_dec.max(verify_reduction(&bs, &rm).decoupling_residual);
        worst_v = worst_v.max(max_abs(&(solve_v_closed(&np).unwrap() - rm.v)));
    }
    report(
        "2",
        worst_dec < 1e-10 && worst_v < 1e-10,
        format!("decoupling {worst_dec:.2e}, closed vs linear-solve V {worst_v:.2e}"),
    );
}

#[test]
fn criterion_3_steady_state() {
    let base = NormalizedParams::example();
    let sys = SystemParams::example();
    let powers: Vec<f64> = (1..=400).map(|k| k as f64 * 1e-17).collect();
    let xis: Vec<f64> = powers.iter().map(|&p| sys.with_power(p).xi()).collect();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut max_m = 0.0f64;
    for ratio in [313.0, 500.0, 1000.0] {
        let np = NormalizedParams::new(ratio * base.beta, base.beta, base.lambda, base.gamma1(), 0.0, 3).unwrap();
        let start = std::time::Instant::now();
        let sols = sweep(&np, &xis, Exec::Parallel);
        ok &= start.elapsed().as_secs_f64() < 1.0;
        let mut prev = 0.0;
        for (s, &xi) in sols.iter().zip(&xis) {
            let Ok(s) = s else {
                ok = false;
                continue;
            };
            let npx = np.with_xi(xi);
            let (a, g, k) = (np.alpha, np.gamma1(), 1.0 + np.beta * s.n_bar);
            let m_id = (s.m_bar * (k * k + g * g - 4.0 * a * a) - 2.0 * a * a).abs();
            let d_id = (s.d_bar * C64::new(g, k) - C64::new(0.0, -a) * (s.m_bar + 0.5)).norm();
            let res = pump_residual(s.n_bar, &npx).abs() / (xi * xi).max(1.0);
            worst = worst.max(m_id).max(d_id).max(res);
            ok &= m_id < 1e-12 && d_id < 1e-12 && res < 1e-12;
            ok &= s.n_bar >= prev && s.m_bar < 1.0;
            prev = s.n_bar;
            max_m = max_m.max(s.m_bar);
        }
    }
    report("3", ok, format!("worst identity/residual {worst:.2e}, max m {max_m:.4}"));
}

#[test]
fn criterion_4_scattering_identities() {
    let np = NormalizedParams::example();
    let vs = build_variation(&solve_pump(&np).unwrap(), &np);
    let grid = FrequencyGrid::standard();
    let worst = Exec::Parallel.map(grid.n, |k| {
        let w = grid.w(k);
        let sum = scattering_s(&vs, w).unwrap() + reflection_sigma(&vs, w).unwrap();
        max_abs(&(sum - xkerr_core::linalg::CMat3::identity() * C64::new(2.0, 0.0)))
    });
    let worst = worst.into_iter().fold(0.0, f64::max);
    let far = max_abs(&(scattering_s(&vs, 1e6).unwrap() - xkerr_core::linalg::CMat3::identity()));
    report("4", worst < 1e-12 && far < 1e-5, format!("|S+Sigma-2I| {worst:.2e} on 1e5 points, |S(1e6)-I| {far:.2e}"));
}

#[test]
fn criterion_5_recovery_round_trip() {
    // S_BB − ½ = a·exp(−w²/2s²) pairs with S_DD − ½ = 2a²s√π·exp(−w²/4s²).
    let (a, s) = (0.3, 0.3);
    let grid = FrequencyGrid::standard();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let w = grid.points();
    let sdd_vals: Vec<f64> =
        w.iter().map(|w| 0.5 + 2.0 * a * a * s * sqrt_pi * (-w * w / (4.0 * s * s)).exp()).collect();
    let target: Vec<f64> = w.iter().map(|w| 0.5 + a * (-w * w / (2.0 * s * s)).exp()).collect();
    let start = std::time::Instant::now();
    let rec = recover_sbb(&SpectrumGrid::new(grid, sdd_vals).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = rec.sbb.values.iter().zip(&target).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    // the same pair built numerically through the transform pair
    let tp = TransformPair::new(grid);
    let x = tp.inverse_real(&target.iter().map(|v| v - 0.5).collect::<Vec<_>>());
    let built: Vec<f64> =
        tp.forward(&x.iter().map(|z| 2.0 * z * z).collect::<Vec<_>>()).iter().map(|z| 0.5 + z.re).collect();
    let rec2 = recover_sbb(&SpectrumGrid::new(grid, built).unwrap()).unwrap();
    let err2 = rec2.sbb.values.iter().zip(&target).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    report("5", err < 1e-6 && err2 < 1e-6 && secs < 5.0, format!("max error {err:.2e} / {err2:.2e}, {secs:.2}s"));
}

fn recovered_sbb(n_bar: f64) -> SpectrumGrid<f64> {
    let s = sdd(&example_at(n_bar), &FrequencyGrid::standard(), Exec::Parallel).unwrap();
    symmetrize(&recover_sbb(&s).unwrap().sbb).unwrap()
}

#[test]
fn criterion_6_squeezing() {
    let low = resonance_window(&recovered_sbb(1e2), 1e2);
    let high = resonance_window(&recovered_sbb(1e4), 1e4);
    report("6", low < 0.5 && high >= 0.5, format!("min S_BB near resonance: n=1e2 {low:.4}, n=1e4 {high:.4}"));
}

#[test]
fn criterion_7_reflectivity() {
    let grid = FrequencyGrid::standard();
    let np = NormalizedParams::example().with_gamma1(0.0);
    let vs0 = build_variation(&steady_state_at(100.0, &np).unwrap(), &np);
    let r0 = reflectivity(&vs0, &grid, Exec::Parallel).unwrap();
    let unit = r0.r.values.iter().all(|&r| r == 1.0);
    let dip = |n: f64| resonance_window(&reflectivity(&example_at(n), &grid, Exec::Parallel).unwrap().r, n);
    let (d2, d4) = (dip(1e2), dip(1e4));
    report("7", unit && d2 < d4, format!("gamma=0 R==1: {unit}; dip minimum n=1e2 {d2:.4}, n=1e4 {d4:.4}"));
}

#[test]
fn criterion_8_time_frequency() {
    let np = NormalizedParams::example().with_gamma1(0.5);
    let vs = build_variation(&steady_state_at(100.0, &np).unwrap(), &np);
    let cfg = StepConfig::new(1e-4, 1_000_000).record_every(100).burn_in(200_000);
    let seeds: Vec<u64> = (0..200).collect();
    let est = simulate_psd(&vs, &cfg, 0, &seeds, Exec::Parallel).unwrap();
    let analytic = intracavity_psd(&vs, &est.grid, 0, Exec::Parallel).unwrap();
    let sm = band_average(&est.values, 9);
    let sa = band_average(&analytic.values, 9);
    let peak = analytic.max();
    let spectral = analytic
        .values
        .iter()
        .zip(sm.iter().zip(&sa))
        .filter(|(a, _)| **a > 0.1 * peak)
        .map(|(_, (m, a))| (m / a - 1.0).abs())
        .fold(0.0, f64::max);

    let vs_ex = example_at(100.0);
    let v = [C64::new(0.3, 0.1), C64::new(0.3, -0.1), C64::new(0.2, 0.0)];
    let t =
        integrate_variations(&vs_ex, &StepConfig::new(1e-4, 10_000).noiseless().record_every(10_000), v, 0).unwrap();
    let exact = variation_exact(&vs_ex, v, 1.0);
    let det = t.last().iter().zip(&exact).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    report(
        "8",
        spectral < 0.1 && det < 1e-6,
        format!("max relative PSD deviation {spectral:.3}, noise-off deviation at tau=1 {det:.2e}"),
    );
}

#[test]
fn criterion_9_noise_theory() {
    let exact = (1..=12u32).all(|j| {
        let m = GaussianNoiseModel::new(2.5, 2.5, j).unwrap();
        higher_power_psd(&m, 0.0) == (j as f64).sqrt() / 2f64.powi(j as i32)
    });
    let r = mc_higher_power_dc_concentration(2, 1_000_000, 9, Exec::Parallel).unwrap();
    report("9", exact && r.ratio >= 5.0, format!("bounds exact: {exact}; DC concentration ratio {:.1}", r.ratio));
}
