use serde::Serialize;

use super::{BiasDrive, CircuitConfig, Direction, GateSignal, SwitchEvent, TransientError};
use crate::analytic;
use crate::device::{MemristorParams, Phase};
use crate::waveform::Waveform;

/// Output of a single-node run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleRun {
    pub waveform: Waveform,
    pub events: Vec<SwitchEvent>,
}

impl SingleRun {
    pub fn mean_period(&self) -> Option<f64> {
        super::mean_period(&self.events)
    }
}

/// Simulates one node from `(initial_v, initial_phase)` at `t = 0`.
///
/// The drive current is sampled at the start of every step and held for the
/// step. Within a step the node follows the exact exponential of the active
/// phase; a threshold crossing splits the step at the analytically solved
/// crossing instant.
pub fn simulate_single(
    params: &MemristorParams,
    circuit: &CircuitConfig,
    duration: f64,
    dt: f64,
    initial_v: f64,
    initial_phase: Phase,
) -> Result<SingleRun, TransientError> {
    params
        .validate()
        .map_err(|e| TransientError::Config(e.to_string()))?;
    circuit.validate()?;
    if !(duration > 0.0) {
        return Err(TransientError::Config(format!("duration must be positive, got {duration}")));
    }
    let limit = circuit.dt_limit(params, 50.0);
    if !(dt > 0.0) || dt > limit {
        return Err(TransientError::Resolution { dt, limit });
    }

    let steps = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let mut v = initial_v;
    let mut phase = initial_phase;
    samples.push(v);

    for k in 0..steps {
        let t_k = k as f64 * dt;
        let i = circuit.drive.current(t_k, v);
        if !(i > 0.0) {
            return Err(TransientError::NonPositiveDrive(i));
        }
        let mut remaining = dt;
        let mut elapsed = 0.0;
        // A step can hold at most a handful of switches at the guarded resolution.
        for _ in 0..8 {
            let (v_a, tau) = circuit.thevenin(params, phase, i);
            let decay = (-remaining / tau).exp();
            let v_end = v_a + (v - v_a) * decay;
            let crossing = match phase {
                Phase::Insulating if v_end >= params.v_th => Some((params.v_th, Direction::Up)),
                Phase::Metallic if v_end <= params.v_hl => Some((params.v_hl, Direction::Down)),
                _ => None,
            };
            match crossing {
                None => {
                    v = v_end;
                    break;
                }
                Some((threshold, direction)) => {
                    let t_c = if (v - threshold) * (v_a - threshold) >= 0.0 {
                        // already at or beyond the threshold at the start of the sub-step
                        0.0
                    } else {
                        (tau * ((v - v_a) / (threshold - v_a)).ln()).clamp(0.0, remaining)
                    };
                    elapsed += t_c;
                    remaining -= t_c;
                    v = threshold;
                    events.push(SwitchEvent {
                        time: t_k + elapsed,
                        direction,
                    });
                    phase = match direction {
                        Direction::Up => Phase::Metallic,
                        Direction::Down => Phase::Insulating,
                    };
                    if remaining <= 0.0 {
                        break;
                    }
                }
            }
        }
        samples.push(v);
    }

    debug_assert!(super::events_alternate(&events));
    Ok(SingleRun {
        waveform: Waveform {
            dt,
            t0: 0.0,
            samples,
        },
        events,
    })
}

/// Rough oscillation period used by the quasi-static drive check: the
/// longest analytic period at the gate extremes, or `C_L (R_i + R_m)` when
/// neither extreme oscillates.
fn oscillation_timescale(params: &MemristorParams, circuit: &CircuitConfig) -> f64 {
    let mut longest: Option<f64> = None;
    if let BiasDrive::Transistor { model, gate, v_ss } = &circuit.drive {
        let (lo, hi) = gate.range();
        for v_g in [lo, hi] {
            let i = super::jlfet_current(model, v_g, v_ss.abs() - params.v_th);
            if let Ok(p) = analytic::period(params, i, circuit.c_l) {
                longest = Some(longest.map_or(p.period, |l: f64| l.max(p.period)));
            }
        }
    }
    longest.unwrap_or(circuit.c_l * (params.r_i + params.r_m))
}

/// Voltage-controlled oscillator run: transistor drive re-evaluated from the
/// instantaneous gate voltage each step, starting insulating at 0 V.
pub fn simulate_vco(
    params: &MemristorParams,
    circuit: &CircuitConfig,
    duration: f64,
    dt: f64,
) -> Result<SingleRun, TransientError> {
    let BiasDrive::Transistor { gate, .. } = &circuit.drive else {
        return Err(TransientError::Config("VCO run needs a transistor drive".into()));
    };
    if let Some(gate_period) = gate.timescale() {
        let osc_period = oscillation_timescale(params, circuit);
        if gate_period < 10.0 * osc_period {
            return Err(TransientError::NotQuasiStatic {
                gate_period,
                osc_period,
            });
        }
    }
    simulate_single(params, circuit, duration, dt, 0.0, Phase::Insulating)
}

/// Insulator-to-metal events in each complete period of a square gate,
/// counted over the half-period whose gate level drives more current.
/// `None` unless the drive is a transistor with a square gate.
pub fn burst_spike_counts(
    params: &MemristorParams,
    circuit: &CircuitConfig,
    events: &[SwitchEvent],
    duration: f64,
) -> Option<Vec<usize>> {
    let BiasDrive::Transistor { model, gate, v_ss } = &circuit.drive else {
        return None;
    };
    let GateSignal::Square { v_low, v_high, f, duty } = *gate else {
        return None;
    };
    let v_ds = v_ss.abs() - params.v_th;
    let high_active = super::jlfet_current(model, v_high, v_ds) >= super::jlfet_current(model, v_low, v_ds);
    let periods = (duration * f + 1e-9).floor() as usize;
    let counts = (0..periods)
        .map(|k| {
            let start = k as f64 / f;
            let (a, b) = if high_active {
                (start, start + duty / f)
            } else {
                (start + duty / f, start + 1.0 / f)
            };
            events
                .iter()
                .filter(|e| e.direction == Direction::Up && e.time >= a && e.time < b)
                .count()
        })
        .collect();
    Some(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transient::{GateSignal, JlfetModel};

    fn params() -> MemristorParams {
        MemristorParams::new(0.95, 0.65, 40e3, 10e3, 0.85, 0.35).unwrap()
    }

    #[test]
    fn matches_analytic_period_without_load() {
        let p = params();
        let i = 10e-6;
        let c = CircuitConfig::constant_current(i).without_load();
        let expected = analytic::period(&p, i, c.c_l).unwrap().period;
        let dt = c.dt_limit(&p, 60.0);
        let run = simulate_single(&p, &c, 20.0 * expected, dt, 0.0, Phase::Insulating).unwrap();
        let measured = run.mean_period().unwrap();
        assert!((measured - expected).abs() < 1e-9 * expected, "{measured} vs {expected}");
        assert!(crate::transient::events_alternate(&run.events));
    }

    #[test]
    fn below_rising_condition_settles_at_asymptote() {
        let p = params();
        let (i_min, _) = analytic::oscillation_window(&p).unwrap();
        let i = 0.8 * i_min;
        let c = CircuitConfig::constant_current(i).without_load();
        let tau = c.c_l * p.r_i;
        let run = simulate_single(&p, &c, 40.0 * tau, c.dt_limit(&p, 50.0), 0.0, Phase::Insulating).unwrap();
        assert!(run.events.is_empty());
        let v_ar = analytic::assess(&p, i).v_ar;
        assert!((run.waveform.samples.last().unwrap() - v_ar).abs() < 1e-12);
    }

    #[test]
    fn amplitude_matches_window() {
        let p = params();
        let c = CircuitConfig::constant_current(10e-6).without_load();
        let dt = c.dt_limit(&p, 50.0);
        let run = simulate_single(&p, &c, 40e-6, dt, p.v_hl, Phase::Insulating).unwrap();
        let w = &run.waveform;
        let max_slope = (analytic::assess(&p, 10e-6).v_ar - p.v_hl) / (c.c_l * p.r_i)
            .min((p.v_th - analytic::assess(&p, 10e-6).v_af) / (c.c_l * p.r_m));
        let pp = w.peak_to_peak();
        let window = p.v_th - p.v_hl;
        assert!(pp <= window + 1e-12);
        assert!(window - pp <= 2.0 * max_slope.abs() * dt + 1e-12);
    }

    #[test]
    fn resolution_guard() {
        let p = params();
        let c = CircuitConfig::constant_current(10e-6);
        let too_big = c.dt_limit(&p, 50.0) * 1.01;
        assert!(matches!(
            simulate_single(&p, &c, 1e-5, too_big, 0.0, Phase::Insulating),
            Err(TransientError::Resolution { .. })
        ));
    }

    #[test]
    fn deterministic_bit_identical() {
        let p = params();
        let c = CircuitConfig::constant_current(10e-6);
        let dt = c.dt_limit(&p, 50.0);
        let a = simulate_single(&p, &c, 2e-5, dt, 0.0, Phase::Insulating).unwrap();
        let b = simulate_single(&p, &c, 2e-5, dt, 0.0, Phase::Insulating).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_gate_reduces_to_constant_current() {
        let p = params();
        let model = JlfetModel::default();
        let v_g = 0.8;
        let v_ss = -10.0;
        let vco = CircuitConfig {
            drive: crate::transient::BiasDrive::Transistor {
                model,
                gate: GateSignal::Constant { v: v_g },
                v_ss,
            },
            ..CircuitConfig::constant_current(1.0)
        };
        let i = crate::transient::jlfet_current(&model, v_g, -v_ss);
        let cc = CircuitConfig::constant_current(i);
        let dt = cc.dt_limit(&p, 50.0);
        let a = simulate_vco(&p, &vco, 3e-5, dt).unwrap();
        let b = simulate_single(&p, &cc, 3e-5, dt, 0.0, Phase::Insulating).unwrap();
        assert_eq!(a.waveform.len(), b.waveform.len());
        for (x, y) in a.waveform.samples.iter().zip(&b.waveform.samples) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_gate_rejected() {
        let p = params();
        let vco = CircuitConfig {
            drive: crate::transient::BiasDrive::Transistor {
                model: JlfetModel::default(),
                gate: GateSignal::Sine { v_mid: 0.8, v_amp: 0.2, f: 1e6 },
                v_ss: -10.0,
            },
            ..CircuitConfig::constant_current(1.0)
        };
        assert!(matches!(
            simulate_vco(&p, &vco, 1e-5, 1e-9),
            Err(TransientError::NotQuasiStatic { .. })
        ));
    }
}
