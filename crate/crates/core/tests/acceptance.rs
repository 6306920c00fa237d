//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use mott_osc::analysis::{
    compute_jitter, extract_model_params, frequency_stats, segment_cycles_auto,
};
use mott_osc::analytic;
use mott_osc::cli::ExperimentConfig;
use mott_osc::stochastic::{
    escape_time_vs_margin, fit_distribution, fit_margin_offset, generate_pink_noise, monte_carlo_falling_escape,
    Family, NoiseConfig,
};
use mott_osc::thermal::{self, GtModel, ThermalGeometry};
use mott_osc::transient::{
    burst_spike_counts, simulate_coupled, simulate_single, simulate_vco, BiasDrive, CircuitConfig, CoupledConfig,
};
use mott_osc::Phase;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use common::{fixture, random_oscillator, reference, rms_diff};

type Check = Result<String, String>;

/// Number, name, wall-clock budget, check.
type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn c1_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (p, i) = random_oscillator(&mut rng);
        let c = CircuitConfig::constant_current(i).without_load();
        let expected = analytic::period(&p, i, c.c_l).map_err(|e| e.to_string())?.period;
        let dt = c.dt_limit(&p, 50.0);
        let run = simulate_single(&p, &c, 25.0 * expected, dt, p.v_hl, Phase::Insulating).map_err(|e| e.to_string())?;
        let got = run.mean_period().ok_or("no period")?;
        worst = worst.max((got / expected - 1.0).abs());
    }
    ensure(worst < 1e-3, format!("50 sets, worst relative period error {worst:.2e} (limit 1e-3)"))
}

fn c2_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = (0.0f64, "");
    for _ in 0..20 {
        let (p, i) = random_oscillator(&mut rng);
        let c = CircuitConfig::constant_current(i).without_load();
        let b = analytic::period(&p, i, c.c_l).map_err(|e| e.to_string())?;
        let dt = c.dt_limit(&p, 50.0).min(b.t_rise.min(b.t_fall) / 100.0);
        let run = simulate_single(&p, &c, 12.0 * b.period, dt, p.v_hl, Phase::Insulating).map_err(|e| e.to_string())?;
        let trigger = 0.5 * (p.v_th + p.v_hl);
        let ex = extract_model_params(&run.waveform, c.c_l, i, trigger).map_err(|e| format!("{p:?}: {e}"))?;
        for ((name, got), (_, want)) in ex.params.named().iter().zip(p.named()) {
            let err = (got / want - 1.0).abs();
            if err > worst.0 {
                worst = (err, name);
            }
        }
    }
    ensure(
        worst.0 < 0.01,
        format!("20 sets, worst relative parameter error {:.2e} ({}) (limit 1e-2)", worst.0, worst.1),
    )
}

fn c3_fig3() -> Check {
    let cfg = load("fig3_calibrated.json");
    let p = cfg.device().unwrap().params_at(25.0).unwrap();
    let c = cfg.circuit().unwrap().clone();
    let BiasDrive::ConstantCurrent { i } = c.drive else {
        return Err("fixture drive is not a constant current".into());
    };
    let run = simulate_single(&p, &c, 500e-6, c.dt_limit(&p, 50.0), p.v_hl, Phase::Insulating)
        .map_err(|e| e.to_string())?;
    let mut seg = segment_cycles_auto(&run.waveform).map_err(|e| e.to_string())?;
    seg.attach_energy(&run.waveform, i);
    let stats = frequency_stats(&seg.cycles, Some(1e3)).map_err(|e| e.to_string())?;
    let f = 1.0 / run.mean_period().ok_or("no period")?;
    let pp = run.waveform.peak_to_peak();
    let energies: Vec<f64> = seg.cycles.iter().filter_map(|c| c.energy).collect();
    let e = mott_osc::stats::median(&energies);
    let peak = stats.histogram.mode().unwrap_or(f64::NAN);
    ensure(
        (f / 410e3 - 1.0).abs() < 0.01 && (pp / 0.3 - 1.0).abs() < 0.1 && (17e-12..=21e-12).contains(&e),
        format!(
            "f = {:.2} kHz (histogram peak {:.1} kHz over {} cycles), pk-pk = {:.1} mV, energy = {:.2} pJ",
            f / 1e3,
            peak / 1e3,
            stats.n,
            pp * 1e3,
            e * 1e12
        ),
    )
}

fn c4_non_monotonic() -> Check {
    let cfg = load("fig4_sweep.json");
    let model = cfg.device().unwrap();
    let temps = cfg.sweep.as_ref().and_then(|s| s.temperatures.as_ref()).unwrap().to_vec();
    let c_l = cfg.circuit().unwrap().c_l;
    let mut lines = Vec::new();
    let mut ok = temps.len() == 3;
    for t in temps {
        let p = model.params_at(t).map_err(|e| e.to_string())?;
        let (lo, hi) = analytic::oscillation_window(&p).ok_or("empty window")?;
        let n = 2000;
        let f: Vec<f64> = (0..=n)
            .map(|k| {
                let x = 0.00125 + (1.0 - 0.0025) * k as f64 / n as f64;
                analytic::period(&p, lo + x * (hi - lo), c_l).map(|b| b.frequency)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let (k_max, f_max) = f.iter().enumerate().fold((0, 0.0), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
        let (left, right) = (f[0] / f_max, f[n] / f_max);
        ok &= k_max > 0 && k_max < n && left < 0.5 && right < 0.5;
        lines.push(format!("T={t}: max {:.0} kHz, edges {left:.2}/{right:.2}", f_max / 1e3));
    }
    ensure(ok, lines.join("; "))
}

fn c5_morphing() -> Check {
    let cfg = load("fig5_margins.json");
    let p = cfg.device().unwrap().params_at(25.0).unwrap();
    let c_l = cfg.circuit().unwrap().c_l;
    let noise = cfg.noise.clone().unwrap();
    let mc = cfg.montecarlo.clone().unwrap();
    let timeout = mc.timeout_taus * c_l * p.r_m;
    let mut families = Vec::new();
    for &m in &mc.margins {
        let i = (noise.v_hl_mu + m - p.v_om) / p.r_m;
        let run = monte_carlo_falling_escape(&p, i, c_l, &noise, 10_000, timeout).map_err(|e| e.to_string())?;
        families.push(fit_distribution(&run.samples).map_err(|e| e.to_string())?.family);
    }
    let grid = mc.curve_margins.as_ref().unwrap().to_vec();
    let sweep = escape_time_vs_margin(&p, c_l, &noise, &grid, 10_000, Some(timeout)).map_err(|e| e.to_string())?;
    let medians: Vec<f64> = sweep.points.iter().map(|q| q.median.unwrap_or(f64::INFINITY)).collect();
    let monotone = medians.windows(2).all(|w| w[1] > w[0]);
    ensure(
        families == [Family::Gaussian, Family::Gamma, Family::Exponential] && monotone && grid.len() == 10,
        format!("families {families:?}, median monotone over {} margins: {monotone}", grid.len()),
    )
}

fn c6_offset() -> Check {
    let p = reference();
    let noise = NoiseConfig::default();
    let margins: Vec<f64> = (-8..=4).map(|k| k as f64 * 5e-3).collect();
    let sweep = escape_time_vs_margin(&p, 70e-12, &noise, &margins, 2000, None).map_err(|e| e.to_string())?;
    let offset = fit_margin_offset(&sweep).ok_or("median curve never diverges")?;
    ensure(
        (offset - 10e-3).abs() <= 5e-3,
        format!("offset {:.2} mV with default setup noise (target 10 +- 5 mV)", offset * 1e3),
    )
}

fn c7_coupling() -> Check {
    let cfg = load("fig7_coupled.json");
    let spec = cfg.coupled.clone().unwrap();
    let pa = cfg.device().unwrap().params_at(25.0).unwrap();
    let pb = cfg.device_b().unwrap().unwrap().params_at(25.0).unwrap();
    let make = |r_c: f64| CoupledConfig {
        v_ss_a: spec.v_ss_a,
        v_ss_b: spec.v_ss_b,
        initial_a: spec.initial_a,
        initial_b: spec.initial_b,
        ..CoupledConfig::new(spec.node_a.clone(), spec.node_b.clone(), r_c)
    };
    let locked = make(spec.r_c);
    let dt = locked.min_time_constant(&pa, &pb) / 100.0;
    let run = simulate_coupled(&pa, &pb, &locked, spec.duration, dt).map_err(|e| e.to_string())?;
    let skip = (spec.discard * run.a.len() as f64) as usize;
    let (wa, wb) = (run.a.slice(skip, run.a.len()), run.b.slice(skip, run.b.len()));
    let fa = frequency_stats(&segment_cycles_auto(&wa).map_err(|e| e.to_string())?.cycles, None).map_err(|e| e.to_string())?;
    let fb = frequency_stats(&segment_cycles_auto(&wb).map_err(|e| e.to_string())?.cycles, None).map_err(|e| e.to_string())?;
    let diff = (fa.mean - fb.mean).abs() / (0.5 * (fa.mean + fb.mean));
    let jitter = compute_jitter(&wa, &wb, 0.5 * (wa.min() + wa.max())).map_err(|e| e.to_string())?;
    let jitter_rel = jitter.delay_std() * fa.mean;

    let free = make(1e12);
    let dt_free = free.min_time_constant(&pa, &pb) / 100.0;
    let run_free = simulate_coupled(&pa, &pb, &free, spec.duration, dt_free).map_err(|e| e.to_string())?;
    let (na, nb) = free.resolved_nodes();
    let sa = simulate_single(&pa, &na, spec.duration, dt_free, spec.initial_a, Phase::Insulating).map_err(|e| e.to_string())?;
    let sb = simulate_single(&pb, &nb, spec.duration, dt_free, spec.initial_b, Phase::Insulating).map_err(|e| e.to_string())?;
    let rms = rms_diff(&run_free.a.samples, &sa.waveform.samples).max(rms_diff(&run_free.b.samples, &sb.waveform.samples));
    ensure(
        diff < 1e-3 && jitter_rel < 0.2 && rms < 1e-6,
        format!(
            "locked at {:.2} kHz, difference {:.4} %, jitter sigma {:.2} % of period; decoupled RMS deviation {rms:.1e} V",
            fa.mean / 1e3,
            diff * 100.0,
            jitter_rel * 100.0
        ),
    )
}

fn c8_vco() -> Check {
    let cfg = load("vco_square.json");
    let p = cfg.device().unwrap().params_at(25.0).unwrap();
    let base = cfg.circuit().unwrap().clone();
    let spec = cfg.vco.clone().unwrap();
    let gates = cfg.sweep.as_ref().and_then(|s| s.gates.clone()).unwrap();
    let mut medians = Vec::new();
    let mut all = Vec::new();
    for g in gates {
        let mut c = base.clone();
        if let BiasDrive::Transistor { gate, .. } = &mut c.drive {
            *gate = g.clone();
        }
        let duration = spec.gate_periods * g.timescale().unwrap();
        let run = simulate_vco(&p, &c, duration, spec.dt.unwrap()).map_err(|e| e.to_string())?;
        let mut counts = burst_spike_counts(&p, &c, &run.events, duration).ok_or("not a square gate")?;
        all.push(counts.clone());
        counts.sort_unstable();
        medians.push(counts[counts.len() / 2] as i64);
    }
    let (slow, fast) = (medians[0], medians[1]);
    ensure(
        (slow - 2 * fast).abs() <= 1,
        format!("bursts {all:?}, median {slow} at 5 kHz vs {fast} at 10 kHz"),
    )
}

fn c9_pink() -> Check {
    let noise = NoiseConfig::default();
    let n = 1 << 16;
    let dt = 50e-9;
    let w = generate_pink_noise(n, dt, &noise).map_err(|e| e.to_string())?;
    let mut buf: Vec<Complex<f64>> = w.samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, c) in buf.iter().enumerate().take(n / 2).skip(1) {
        let f = k as f64 * df;
        if f > noise.f_low && f < noise.f_high {
            xs.push(f.ln());
            ys.push(c.norm_sqr().ln());
        }
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    ensure((slope + 1.0).abs() <= 0.2, format!("in-band periodogram slope {slope:.3} over {} bins", xs.len()))
}

fn c10_thermal() -> Check {
    let geom = ThermalGeometry::default();
    let temps: Vec<f64> = (0..12).map(|k| 5.0 * k as f64).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = temps
        .iter()
        .map(|&t| ((geom.t_th - t).ln(), thermal::threshold_current(&geom, t).unwrap().ln()))
        .unzip();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let p20 = thermal::threshold_power(&geom, 20.0).map_err(|e| e.to_string())?;
    let i20 = thermal::threshold_current(&geom, 20.0).map_err(|e| e.to_string())?;

    let truth = GtModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<(f64, f64)> = (0..41)
        .map(|k| {
            let t = 20.0 + 2.0 * k as f64;
            (t, thermal::conductance(&truth, t) * (1.0 + rng.random_range(-2e-3..2e-3)))
        })
        .collect();
    let fit = thermal::fit_gt(&data).map_err(|e| e.to_string())?;
    let fit_err = [
        fit.g_i / truth.g_i,
        fit.g_m / truth.g_m,
        fit.t_imt / truth.t_imt,
        fit.delta_t / truth.delta_t,
    ]
    .iter()
    .map(|r| (r - 1.0).abs())
    .fold(0.0, f64::max);
    ensure(
        (slope - 2.0 / 3.0).abs() <= 1e-9 && (5e-6..=50e-6).contains(&p20) && i20 < 30e-6 && fit_err < 0.01,
        format!(
            "I_TH exponent {slope:.12}, P_TH(20) = {:.1} uW, I_TH(20) = {:.1} uA, G(T) fit error {fit_err:.1e}",
            p20 * 1e6,
            i20 * 1e6
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "analytic/transient period", Duration::from_secs(10), c1_oracle_equivalence),
        (2, "extraction round trip", Duration::from_secs(30), c2_round_trip),
        (3, "410 kHz calibration", Duration::from_secs(30), c3_fig3),
        (4, "non-monotonic f(I)", Duration::from_secs(5), c4_non_monotonic),
        (5, "escape-time morphing", Duration::from_secs(60), c5_morphing),
        (6, "noise offset", Duration::from_secs(120), c6_offset),
        (7, "coupling lock", Duration::from_secs(60), c7_coupling),
        (8, "spike-rate encoding", Duration::from_secs(30), c8_vco),
        (9, "pink-noise PSD", Duration::from_secs(5), c9_pink),
        (10, "thermal formulas", Duration::from_secs(5), c10_thermal),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (ok, detail) = match result {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {detail} [{:.2} s of {} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
