use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::PinkShaper;
use super::{NoiseConfig, StochasticError};
use crate::analytic;
use crate::device::MemristorParams;
use crate::stats;

/// Default timeout in units of the relaxation time constant.
pub const DEFAULT_TIMEOUT_TAUS: f64 = 100.0;
/// Minimum uncensored iterations behind a reported median.
pub const MIN_SURVIVORS: usize = 100;
/// Starting distance of the trajectory from its asymptote (V).
const START_OFFSET: f64 = 0.05;
const STEPS_PER_TAU: f64 = 20.0;
const MIN_BLOCK: usize = 64;
const MAX_BLOCK: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Metallic relaxation toward `V_af`, escape at the holding voltage.
    Falling,
    /// Insulating relaxation toward `V_ar`, escape at the threshold voltage.
    Rising,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub iteration: usize,
    /// Escape time, or the timeout for censored iterations.
    pub time: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRun {
    pub orientation: Orientation,
    /// Uncensored escape times in iteration order.
    pub samples: Vec<f64>,
    pub records: Vec<EscapeRecord>,
    pub iterations: usize,
    pub censored: usize,
    pub tau: f64,
    /// Noise-free asymptote of the relaxation.
    pub v_asymptote: f64,
    pub timeout: f64,
    pub dt: f64,
    pub config: NoiseConfig,
}

impl EscapeRun {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.iterations as f64
    }

    /// Median over all iterations with censored ones counted as infinitely
    /// late; `None` when half or more are censored.
    pub fn median(&self) -> Option<f64> {
        if 2 * self.censored >= self.iterations {
            return None;
        }
        let mut all: Vec<f64> = self
            .records
            .iter()
            .map(|r| if r.censored { f64::INFINITY } else { r.time })
            .collect();
        all.sort_by(f64::total_cmp);
        Some(stats::quantile_sorted(&all, 0.5))
    }

    /// CSV `iteration,escape_time_seconds,censored`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "escape_time_seconds", "censored"])?;
        for r in &self.records {
            wtr.write_record([r.iteration.to_string(), format!("{:e}", r.time), u8::from(r.censored).to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `V_hl(t) = drawn + (start - drawn) exp(-t / tau_thermal)`, constant at
/// `drawn` when `tau_thermal` is zero.
pub fn holding_voltage_trace(v_hl_drawn: f64, v_hl_start: f64, tau_thermal: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| holding_at(v_hl_drawn, v_hl_start, tau_thermal, t))
        .collect()
}

#[inline]
fn holding_at(drawn: f64, start: f64, tau_thermal: f64, t: f64) -> f64 {
    // beyond 50 time constants the relaxation is below double precision
    if tau_thermal > 0.0 && t < 50.0 * tau_thermal {
        drawn + (start - drawn) * (-t / tau_thermal).exp()
    } else {
        drawn
    }
}

/// One orientation of the problem, expressed in falling coordinates: the
/// trajectory decays from `v_0` toward `v_a` and escapes once it drops to the
/// switching level. The rising case is mapped here by negating voltages.
struct Problem {
    tau: f64,
    v_a: f64,
    v_0: f64,
    mu: f64,
    sigma: f64,
    start: f64,
    tau_thermal: f64,
    timeout: f64,
    dt: f64,
}

impl Problem {
    fn new(
        orientation: Orientation,
        tau: f64,
        v_asymptote: f64,
        switch_mean: f64,
        noise: &NoiseConfig,
        timeout: f64,
    ) -> Self {
        let sign = match orientation {
            Orientation::Falling => 1.0,
            Orientation::Rising => -1.0,
        };
        let v_a = sign * v_asymptote;
        let mu = sign * switch_mean;
        Problem {
            tau,
            v_a,
            v_0: v_a + START_OFFSET,
            mu,
            sigma: noise.v_hl_sigma,
            start: noise.v_hl_start.map_or(mu - 3.0 * noise.v_hl_sigma, |s| sign * s),
            tau_thermal: noise.tau_thermal,
            timeout,
            dt: tau / STEPS_PER_TAU,
        }
    }

    #[inline]
    fn deterministic(&self, t: f64) -> f64 {
        if t >= 50.0 * self.tau {
            return self.v_a;
        }
        self.v_a + (self.v_0 - self.v_a) * (-t / self.tau).exp()
    }

    /// Closed-form escape for a noiseless, constant switching level.
    fn closed_form(&self, level: f64) -> Option<f64> {
        if self.v_0 <= level {
            return Some(0.0);
        }
        analytic::segment_time(self.v_0, level, self.v_a, self.tau)
            .ok()
            .filter(|&t| t <= self.timeout)
    }

    fn run_once(&self, rng: &mut ChaCha8Rng, shaper: &mut PinkShaper, block: &mut Vec<f64>, noisy: bool) -> Option<f64> {
        let z: f64 = rng.sample(StandardNormal);
        let drawn = self.mu + self.sigma * z;
        if !noisy && self.tau_thermal == 0.0 {
            return self.closed_form(drawn);
        }
        let gap = |t: f64, n: f64| self.deterministic(t) + n - holding_at(drawn, self.start, self.tau_thermal, t);
        let n_total = (self.timeout / self.dt).floor() as usize;
        let mut prev: Option<(f64, f64)> = None;
        let mut k = 0usize;
        while k <= n_total {
            if noisy {
                shaper.fill(rng, block);
            } else if block.is_empty() {
                block.resize(shaper.len(), 0.0);
            }
            for &n in block.iter() {
                if k > n_total {
                    break;
                }
                let t = k as f64 * self.dt;
                let d = gap(t, n);
                if d <= 0.0 {
                    return Some(match prev {
                        None => 0.0,
                        Some((n_p, d_p)) => self.refine(t - self.dt, n_p, d_p, n, d, &gap),
                    });
                }
                prev = Some((n, d));
                k += 1;
            }
        }
        None
    }

    /// Root of the gap on `[t_p, t_p + dt]` with the noise linearly
    /// interpolated between samples.
    fn refine(&self, t_p: f64, n_p: f64, d_p: f64, n: f64, d: f64, gap: &impl Fn(f64, f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut g_lo, mut g_hi) = (d_p, d);
        let mut side = 0i8;
        for _ in 0..60 {
            let mut x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let g = gap(t_p + x * self.dt, n_p + (n - n_p) * x);
            if g <= 0.0 {
                hi = x;
                g_hi = g;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = x;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        t_p + hi * self.dt
    }
}

fn block_len(dt: f64, f_low: f64) -> Result<usize, StochasticError> {
    let need = (4.0 / (f_low * dt)).ceil();
    if !(need.is_finite()) || need > MAX_BLOCK as f64 {
        return Err(StochasticError::Config(format!(
            "f_low = {f_low} Hz needs noise blocks longer than {MAX_BLOCK} samples at dt = {dt:e} s"
        )));
    }
    Ok((need as usize).max(MIN_BLOCK).next_power_of_two())
}

fn run(
    orientation: Orientation,
    tau: f64,
    v_asymptote: f64,
    switch_mean: f64,
    noise: &NoiseConfig,
    iterations: usize,
    timeout: f64,
) -> Result<EscapeRun, StochasticError> {
    noise.validate()?;
    if iterations == 0 {
        return Err(StochasticError::InvalidInput("iterations must be at least 1".into()));
    }
    if !(timeout > 0.0) {
        return Err(StochasticError::InvalidInput(format!("timeout must be positive, got {timeout}")));
    }
    if !(tau > 0.0) || !v_asymptote.is_finite() {
        return Err(StochasticError::InvalidInput(format!(
            "bad relaxation: tau = {tau}, asymptote = {v_asymptote}"
        )));
    }
    let problem = Problem::new(orientation, tau, v_asymptote, switch_mean, noise, timeout);
    let shaper = PinkShaper::new(block_len(problem.dt, noise.f_low)?, problem.dt, noise)?;
    let noisy = noise.pink_amplitude > 0.0;

    let times: Vec<Option<f64>> = (0..iterations)
        .into_par_iter()
        .map_init(
            || (shaper.clone(), Vec::new()),
            |(shaper, block), it| {
                let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
                rng.set_stream(it as u64);
                block.clear();
                problem.run_once(&mut rng, shaper, block, noisy)
            },
        )
        .collect();

    let records: Vec<EscapeRecord> = times
        .iter()
        .enumerate()
        .map(|(iteration, t)| EscapeRecord {
            iteration,
            time: t.unwrap_or(timeout),
            censored: t.is_none(),
        })
        .collect();
    let samples: Vec<f64> = times.iter().flatten().copied().collect();
    let censored = iterations - samples.len();
    if samples.is_empty() {
        return Err(StochasticError::AllCensored { iterations });
    }
    Ok(EscapeRun {
        orientation,
        samples,
        records,
        iterations,
        censored,
        tau,
        v_asymptote,
        timeout,
        dt: problem.dt,
        config: noise.clone(),
    })
}

/// Falling-phase escape times at bias `i_bias`.
///
/// Each iteration relaxes from `V_af + 50 mV` toward `V_af = v_om + R_m I`
/// with `tau_f = C_L R_m`, adds a fresh 1/f record and escapes at the first
/// crossing of the (thermally relaxing) holding voltage drawn from
/// `Normal(v_hl_mu, v_hl_sigma)`. Iteration `k` uses stream `k` of the
/// seeded generator, so results do not depend on scheduling.
pub fn monte_carlo_falling_escape(
    params: &MemristorParams,
    i_bias: f64,
    c_l: f64,
    noise: &NoiseConfig,
    iterations: usize,
    timeout: f64,
) -> Result<EscapeRun, StochasticError> {
    let tau = c_l * params.r_m;
    let v_af = params.v_om + params.r_m * i_bias;
    run(Orientation::Falling, tau, v_af, noise.v_hl_mu, noise, iterations, timeout)
}

/// Rising-phase mirror of [`monte_carlo_falling_escape`]: relaxation from
/// `V_ar - 50 mV` toward `V_ar` with `tau_r = C_L R_i`, escaping at a
/// threshold drawn from `Normal(v_th, v_hl_sigma)`. An explicit
/// `v_hl_start` is read as the threshold's starting value.
pub fn monte_carlo_rising_escape(
    params: &MemristorParams,
    i_bias: f64,
    c_l: f64,
    noise: &NoiseConfig,
    iterations: usize,
    timeout: f64,
) -> Result<EscapeRun, StochasticError> {
    let tau = c_l * params.r_i;
    let v_ar = params.v_oi + params.r_i * i_bias;
    run(Orientation::Rising, tau, v_ar, params.v_th, noise, iterations, timeout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    /// `V_af - v_hl_mu` (V).
    pub margin: f64,
    pub i_bias: f64,
    pub median: Option<f64>,
    pub survivors: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSweep {
    pub tau: f64,
    pub timeout: f64,
    pub points: Vec<MarginPoint>,
}

/// Median falling escape time against holding margin.
///
/// Each margin sets the bias `I = (v_hl_mu + margin - v_om) / R_m`. All
/// margins share the same per-iteration random streams. A point's median is
/// `None` when fewer than [`MIN_SURVIVORS`] iterations crossed or at least
/// half were censored.
pub fn escape_time_vs_margin(
    params: &MemristorParams,
    c_l: f64,
    noise: &NoiseConfig,
    margins: &[f64],
    iterations: usize,
    timeout: Option<f64>,
) -> Result<MarginSweep, StochasticError> {
    let tau = c_l * params.r_m;
    let timeout = timeout.unwrap_or(DEFAULT_TIMEOUT_TAUS * tau);
    let mut points = Vec::with_capacity(margins.len());
    for &margin in margins {
        let i_bias = (noise.v_hl_mu + margin - params.v_om) / params.r_m;
        let v_af = noise.v_hl_mu + margin;
        let point = match run(Orientation::Falling, tau, v_af, noise.v_hl_mu, noise, iterations, timeout) {
            Ok(r) => MarginPoint {
                margin,
                i_bias,
                median: r.median().filter(|_| r.samples.len() >= MIN_SURVIVORS),
                survivors: r.samples.len(),
                censored: r.censored,
            },
            Err(StochasticError::AllCensored { .. }) => MarginPoint {
                margin,
                i_bias,
                median: None,
                survivors: 0,
                censored: iterations,
            },
            Err(e) => return Err(e),
        };
        points.push(point);
    }
    if points.iter().all(|p| p.median.is_none()) {
        return Err(StochasticError::InsufficientSurvivors { min: MIN_SURVIVORS });
    }
    Ok(MarginSweep { tau, timeout, points })
}

/// Median escape time, in units of `tau`, that marks the divergence of the
/// margin curve.
pub const DIVERGENCE_TAUS: f64 = 10.0;

/// Effective margin offset of a sweep against the noise-free curve
/// `t(m) = tau ln(0.05 / -m)`.
///
/// The noise-free curve reaches `DIVERGENCE_TAUS * tau` at a margin of a few
/// microvolts below zero. The offset is how far the measured curve has to be
/// shifted for the two to reach that time at the same margin. The crossing is
/// interpolated linearly in margin against `ln(median)`; a point without a
/// median counts as escaping at the timeout. `None` when the sweep never
/// crosses.
pub fn fit_margin_offset(sweep: &MarginSweep) -> Option<f64> {
    let level = (DIVERGENCE_TAUS * sweep.tau).ln();
    let mut pts: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .map(|p| (p.margin, p.median.unwrap_or(sweep.timeout).max(f64::MIN_POSITIVE).ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let crossing = pts.windows(2).find_map(|w| {
        let ((m0, y0), (m1, y1)) = (w[0], w[1]);
        (y0 < level && y1 >= level).then(|| m0 + (m1 - m0) * (level - y0) / (y1 - y0))
    })?;
    let noise_free = -START_OFFSET * (-DIVERGENCE_TAUS).exp();
    Some(crossing - noise_free)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MemristorParams {
        MemristorParams::new(0.95, 0.65, 40e3, 10e3, 0.85, 0.35).unwrap()
    }

    #[test]
    fn trace_examples() {
        let tau = 2e-6;
        assert_eq!(holding_voltage_trace(0.6, 0.7, 0.0, &[0.0, 1e-6]), vec![0.6, 0.6]);
        let one = holding_voltage_trace(0.6, 0.7, tau, &[tau])[0];
        let expected = 0.7 + (0.6 - 0.7) * (1.0 - (-1f64).exp());
        assert!((one - expected).abs() < 1e-15);
        let late = holding_voltage_trace(0.6, 0.7, tau, &[100.0 * tau])[0];
        assert!((late - 0.6).abs() < 1e-9);
    }

    #[test]
    fn noiseless_matches_segment_time_exactly() {
        let p = params();
        let noise = NoiseConfig::default().noiseless();
        let c_l = 70e-12;
        let i = (noise.v_hl_mu - 0.02 - p.v_om) / p.r_m;
        let run = monte_carlo_falling_escape(&p, i, c_l, &noise, 50, 1e-4).unwrap();
        let v_af = p.v_om + p.r_m * i;
        let expected = analytic::segment_time(v_af + 0.05, noise.v_hl_mu, v_af, c_l * p.r_m).unwrap();
        assert_eq!(run.censored, 0);
        assert!(run.samples.iter().all(|&t| t == expected));
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = params();
        let noise = NoiseConfig {
            seed: 11,
            ..NoiseConfig::default()
        };
        let i = (noise.v_hl_mu - 0.01 - p.v_om) / p.r_m;
        let a = monte_carlo_falling_escape(&p, i, 70e-12, &noise, 200, 7e-5).unwrap();
        let b = monte_carlo_falling_escape(&p, i, 70e-12, &noise, 200, 7e-5).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|&t| t >= 0.0));
        assert_eq!(a.samples.len() + a.censored, a.iterations);
    }

    #[test]
    fn positive_margin_censors_without_noise() {
        let p = params();
        let noise = NoiseConfig::default().noiseless();
        let i = (noise.v_hl_mu + 0.01 - p.v_om) / p.r_m;
        assert!(matches!(
            monte_carlo_falling_escape(&p, i, 70e-12, &noise, 10, 7e-5),
            Err(StochasticError::AllCensored { iterations: 10 })
        ));
    }

    #[test]
    fn rising_mirrors_falling() {
        // A device whose rising branch is the falling branch reflected.
        let p = params();
        let noise = NoiseConfig {
            seed: 3,
            tau_thermal: 1e-6,
            ..NoiseConfig::default()
        };
        let c_l = 70e-12;
        let i = (noise.v_hl_mu - 0.01 - p.v_om) / p.r_m;
        let falling = monte_carlo_falling_escape(&p, i, c_l, &noise, 100, 7e-5).unwrap();
        let v_af = p.v_om + p.r_m * i;
        let mirrored = MemristorParams {
            v_th: -noise.v_hl_mu,
            v_hl: -2.0,
            r_i: p.r_m,
            r_m: p.r_m / 2.0,
            v_oi: -v_af - p.r_m * i,
            v_om: -3.0,
        };
        let start = noise.v_hl_mu - 3.0 * noise.v_hl_sigma;
        let rising_noise = NoiseConfig {
            v_hl_start: Some(-start),
            ..noise.clone()
        };
        let rising = monte_carlo_rising_escape(&mirrored, i, c_l, &rising_noise, 100, 7e-5).unwrap();
        assert_eq!(rising.censored, falling.censored);
        for (a, b) in rising.samples.iter().zip(&falling.samples) {
            assert!((a - b).abs() <= 1e-9 * b.max(1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn margin_sweep_noiseless() {
        let p = params();
        let noise = NoiseConfig::default().noiseless();
        let margins = [-0.03, -0.02, -0.01, -1e-5, -1e-6, 0.01];
        let sweep = escape_time_vs_margin(&p, 70e-12, &noise, &margins, 200, None).unwrap();
        for pt in &sweep.points[..5] {
            let expected = sweep.tau * (0.05 / -pt.margin).ln();
            assert!((pt.median.unwrap() - expected).abs() < 1e-8 * expected);
        }
        assert_eq!(sweep.points[5].median, None);
        assert!(fit_margin_offset(&sweep).unwrap().abs() < 1e-5);
    }
}
