use serde::{Deserialize, Serialize};

use super::{CircuitConfig, Direction, SwitchEvent, TransientError};
use crate::device::{MemristorParams, Phase};
use crate::waveform::Waveform;

/// Two nodes joined by a linear coupling resistor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledConfig {
    pub node_a: CircuitConfig,
    pub node_b: CircuitConfig,
    #[serde(default = "default_r_c")]
    pub r_c: f64,
    /// Supply override for node A's transistor drive.
    #[serde(default)]
    pub v_ss_a: Option<f64>,
    #[serde(default)]
    pub v_ss_b: Option<f64>,
    #[serde(default)]
    pub initial_a: f64,
    #[serde(default)]
    pub initial_b: f64,
}

fn default_r_c() -> f64 {
    343e3
}

impl CoupledConfig {
    pub fn new(node_a: CircuitConfig, node_b: CircuitConfig, r_c: f64) -> Self {
        Self {
            node_a,
            node_b,
            r_c,
            v_ss_a: None,
            v_ss_b: None,
            initial_a: 0.0,
            initial_b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), TransientError> {
        if !(self.r_c > 0.0) {
            return Err(TransientError::Config(format!("r_c must be positive, got {}", self.r_c)));
        }
        self.node_a.validate()?;
        self.node_b.validate()
    }

    /// Node circuits with any supply overrides applied.
    pub fn resolved_nodes(&self) -> (CircuitConfig, CircuitConfig) {
        let mut a = self.node_a.clone();
        let mut b = self.node_b.clone();
        a.drive = a.drive.with_supply(self.v_ss_a);
        b.drive = b.drive.with_supply(self.v_ss_b);
        (a, b)
    }

    /// Smallest circuit time constant over both nodes and phases, and the coupling path.
    pub fn min_time_constant(&self, params_a: &MemristorParams, params_b: &MemristorParams) -> f64 {
        let node = |c: &CircuitConfig, p: &MemristorParams| c.c_l * p.r_m.min(p.r_i).min(self.r_c);
        node(&self.node_a, params_a).min(node(&self.node_b, params_b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledRun {
    pub a: Waveform,
    pub b: Waveform,
    pub events_a: Vec<SwitchEvent>,
    pub events_b: Vec<SwitchEvent>,
}

struct Node<'a> {
    params: &'a MemristorParams,
    c_l: f64,
    g_load: f64,
}

impl Node<'_> {
    #[inline]
    fn slope(&self, phase: Phase, v: f64, v_other: f64, i: f64, g_c: f64) -> f64 {
        let (v_o, r) = self.params.branch(phase);
        (i - (v - v_o) / r - v * self.g_load - (v - v_other) * g_c) / self.c_l
    }

    /// Signed distance to the switching threshold of `phase`; crosses zero
    /// from below when a switch is due.
    #[inline]
    fn overshoot(&self, phase: Phase, v: f64) -> f64 {
        match phase {
            Phase::Insulating => v - self.params.v_th,
            Phase::Metallic => self.params.v_hl - v,
        }
    }
}

struct Pair<'a> {
    a: Node<'a>,
    b: Node<'a>,
    g_c: f64,
}

impl Pair<'_> {
    fn rk4(&self, y: [f64; 2], phases: [Phase; 2], i: [f64; 2], h: f64) -> [f64; 2] {
        let f = |y: [f64; 2]| {
            [
                self.a.slope(phases[0], y[0], y[1], i[0], self.g_c),
                self.b.slope(phases[1], y[1], y[0], i[1], self.g_c),
            ]
        };
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    fn node(&self, k: usize) -> &Node<'_> {
        if k == 0 {
            &self.a
        } else {
            &self.b
        }
    }

    /// Fraction of `h` at which node `k` reaches its threshold, by Illinois
    /// regula falsi on re-integrated sub-steps.
    fn locate(&self, k: usize, y: [f64; 2], phases: [Phase; 2], i: [f64; 2], h: f64) -> f64 {
        let node = self.node(k);
        let g = |theta: f64| node.overshoot(phases[k], self.rk4(y, phases, i, theta * h)[k]);
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut g_lo, mut g_hi) = (node.overshoot(phases[k], y[k]), g(1.0));
        if g_lo >= 0.0 {
            return 0.0;
        }
        let mut side = 0i8;
        for _ in 0..100 {
            if hi - lo <= 1e-14 {
                break;
            }
            let mut theta = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(theta > lo && theta < hi) {
                theta = 0.5 * (lo + hi);
            }
            let g_t = g(theta);
            if g_t >= 0.0 {
                hi = theta;
                g_hi = g_t;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = theta;
                g_lo = g_t;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            }
        }
        hi
    }
}

/// Simulates two coupled nodes, both starting insulating at their configured
/// initial voltages.
///
/// Each node's drive current is sampled at the start of every step. The pair
/// is advanced with fixed-step RK4; when a node crosses its threshold inside a
/// step the step is split at the located crossing.
pub fn simulate_coupled(
    params_a: &MemristorParams,
    params_b: &MemristorParams,
    config: &CoupledConfig,
    duration: f64,
    dt: f64,
) -> Result<CoupledRun, TransientError> {
    for p in [params_a, params_b] {
        p.validate().map_err(|e| TransientError::Config(e.to_string()))?;
    }
    config.validate()?;
    if !(duration > 0.0) {
        return Err(TransientError::Config(format!("duration must be positive, got {duration}")));
    }
    let limit = config.min_time_constant(params_a, params_b) / 100.0;
    if !(dt > 0.0) || dt > limit {
        return Err(TransientError::Resolution { dt, limit });
    }
    let (circ_a, circ_b) = config.resolved_nodes();
    let pair = Pair {
        a: Node {
            params: params_a,
            c_l: circ_a.c_l,
            g_load: circ_a.g_load(),
        },
        b: Node {
            params: params_b,
            c_l: circ_b.c_l,
            g_load: circ_b.g_load(),
        },
        g_c: 1.0 / config.r_c,
    };

    let steps = (duration / dt).round() as usize;
    let mut out = [Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1)];
    let mut events: [Vec<SwitchEvent>; 2] = [Vec::new(), Vec::new()];
    let mut y = [config.initial_a, config.initial_b];
    let mut phases = [Phase::Insulating; 2];
    out[0].push(y[0]);
    out[1].push(y[1]);

    for step in 0..steps {
        let t_k = step as f64 * dt;
        let i = [circ_a.drive.current(t_k, y[0]), circ_b.drive.current(t_k, y[1])];
        if let Some(&bad) = i.iter().find(|x| !(**x > 0.0)) {
            return Err(TransientError::NonPositiveDrive(bad));
        }
        let mut remaining = dt;
        let mut elapsed = 0.0;
        for _ in 0..8 {
            let y_end = pair.rk4(y, phases, i, remaining);
            let due: Vec<usize> = (0..2)
                .filter(|&k| pair.node(k).overshoot(phases[k], y_end[k]) >= 0.0)
                .collect();
            if due.is_empty() {
                y = y_end;
                break;
            }
            let (k, theta) = due
                .iter()
                .map(|&k| (k, pair.locate(k, y, phases, i, remaining)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            let h = theta * remaining;
            y = pair.rk4(y, phases, i, h);
            let node = pair.node(k);
            let direction = match phases[k] {
                Phase::Insulating => {
                    y[k] = node.params.v_th;
                    phases[k] = Phase::Metallic;
                    Direction::Up
                }
                Phase::Metallic => {
                    y[k] = node.params.v_hl;
                    phases[k] = Phase::Insulating;
                    Direction::Down
                }
            };
            elapsed += h;
            remaining -= h;
            events[k].push(SwitchEvent {
                time: t_k + elapsed,
                direction,
            });
            if remaining <= 0.0 {
                break;
            }
        }
        out[0].push(y[0]);
        out[1].push(y[1]);
    }

    let [a, b] = out;
    let [events_a, events_b] = events;
    Ok(CoupledRun {
        a: Waveform { dt, t0: 0.0, samples: a },
        b: Waveform { dt, t0: 0.0, samples: b },
        events_a,
        events_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transient::{mean_period, simulate_single};

    fn params() -> MemristorParams {
        MemristorParams::new(0.95, 0.65, 40e3, 10e3, 0.85, 0.35).unwrap()
    }

    fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn decoupled_limit_matches_single_runs() {
        let p = params();
        let ca = CircuitConfig::constant_current(10e-6);
        let cb = CircuitConfig::constant_current(12e-6);
        let cfg = CoupledConfig::new(ca.clone(), cb.clone(), 1e12);
        let dt = cfg.min_time_constant(&p, &p) / 100.0;
        let run = simulate_coupled(&p, &p, &cfg, 2e-5, dt).unwrap();
        let sa = simulate_single(&p, &ca, 2e-5, dt, 0.0, Phase::Insulating).unwrap();
        let sb = simulate_single(&p, &cb, 2e-5, dt, 0.0, Phase::Insulating).unwrap();
        assert!(rms_diff(&run.a.samples, &sa.waveform.samples) < 1e-6);
        assert!(rms_diff(&run.b.samples, &sb.waveform.samples) < 1e-6);
        assert_eq!(run.events_a.len(), sa.events.len());
    }

    #[test]
    fn identical_nodes_lock() {
        let p = params();
        let c = CircuitConfig::constant_current(10e-6);
        let mut cfg = CoupledConfig::new(c.clone(), c, 343e3);
        cfg.initial_a = 0.8;
        cfg.initial_b = 0.2;
        let dt = cfg.min_time_constant(&p, &p) / 100.0;
        let run = simulate_coupled(&p, &p, &cfg, 1e-4, dt).unwrap();
        let late = |ev: &[SwitchEvent]| {
            let tail: Vec<_> = ev.iter().copied().filter(|e| e.time > 5e-5).collect();
            mean_period(&tail).unwrap()
        };
        let (pa, pb) = (late(&run.events_a), late(&run.events_b));
        assert!((pa - pb).abs() < 1e-3 * pa, "{pa} vs {pb}");
    }

    #[test]
    fn resolution_guard_includes_coupling() {
        let p = params();
        let c = CircuitConfig::constant_current(10e-6);
        let cfg = CoupledConfig::new(c.clone(), c, 1e3);
        let dt = 70e-12 * 10e3 / 100.0;
        assert!(matches!(
            simulate_coupled(&p, &p, &cfg, 1e-5, dt),
            Err(TransientError::Resolution { .. })
        ));
    }
}
