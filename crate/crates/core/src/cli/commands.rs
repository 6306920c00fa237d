use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, Values};
use super::output::{OutputEntry, PointStatus, Sink};
use super::CliError;
use crate::analysis::{
    compute_jitter, extract_model_params, frequency_stats, segment_cycles, segment_cycles_auto, write_cycles_csv,
};
use crate::analytic;
use crate::device::MemristorParams;
use crate::stats::Histogram;
use crate::stochastic::{
    escape_time_vs_margin, fit_distribution, fit_margin_offset, monte_carlo_falling_escape,
    monte_carlo_rising_escape, Orientation,
};
use crate::thermal::{self, threshold_temperature};
use crate::transient::{
    burst_spike_counts, simulate_coupled, simulate_single, simulate_vco, write_events_csv, BiasDrive,
    CoupledConfig, Direction,
};
use crate::waveform::Waveform;

/// What a command hands back to the coordinator for the manifest.
pub struct Report {
    pub points: Vec<PointStatus>,
    pub outputs: Vec<OutputEntry>,
    pub summary: serde_json::Value,
}

fn fail(e: impl Display) -> String {
    e.to_string()
}

fn config(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Runs `f` for every item on the current pool, keeping sweep order.
fn run_points<P, T, F>(dir: &Path, items: &[P], label: impl Fn(&P) -> String + Sync, f: F) -> Vec<(PointStatus, Vec<OutputEntry>, Option<T>)>
where
    P: Sync,
    T: Send,
    F: Fn(usize, &P, &mut Sink) -> Result<T, String> + Sync,
{
    items
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut sink = Sink::new(dir, Some(k));
            let result = f(k, p, &mut sink);
            let status = PointStatus {
                index: k,
                label: label(p),
                ok: result.is_ok(),
                error: result.as_ref().err().cloned(),
            };
            (status, sink.entries, result.ok())
        })
        .collect()
}

/// Splits point results into manifest parts and per-point data.
fn gather<T>(results: Vec<(PointStatus, Vec<OutputEntry>, Option<T>)>) -> (Vec<PointStatus>, Vec<OutputEntry>, Vec<Option<T>>) {
    let mut points = Vec::with_capacity(results.len());
    let mut outputs = Vec::new();
    let mut data = Vec::with_capacity(results.len());
    for (s, o, d) in results {
        points.push(s);
        outputs.extend(o);
        data.push(d);
    }
    (points, outputs, data)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Table with one row per point; failed points keep their index and status.
fn write_table(
    sink: &mut Sink,
    name: &str,
    header: &[&str],
    points: &[PointStatus],
    rows: &[Option<Vec<String>>],
    lead: impl Fn(usize) -> Vec<String>,
) -> Result<(), CliError> {
    sink.with(name, "summary", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut head = vec!["index"];
        head.extend_from_slice(header);
        head.push("status");
        w.write_record(&head)?;
        for (p, row) in points.iter().zip(rows) {
            let mut rec = vec![p.index.to_string()];
            match row {
                Some(r) => rec.extend(r.iter().cloned()),
                None => {
                    let l = lead(p.index);
                    let pad = header.len() - l.len();
                    rec.extend(l);
                    rec.extend(std::iter::repeat_n(String::new(), pad));
                }
            }
            rec.push(if p.ok { "ok".into() } else { "failed".into() });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok::<(), csv::Error>(())
    })
}

/// Folds a load resistor into the device branches: `r' = r || R_L`,
/// `v_o' = v_o r'/r`. The node then obeys the unloaded equations exactly.
pub(crate) fn loaded_params(p: &MemristorParams, r_l: Option<f64>) -> MemristorParams {
    let Some(r_l) = r_l else { return *p };
    let par = |r: f64| r * r_l / (r + r_l);
    let (r_i, r_m) = (par(p.r_i), par(p.r_m));
    MemristorParams {
        r_i,
        r_m,
        v_oi: p.v_oi * r_i / p.r_i,
        v_om: p.v_om * r_m / p.r_m,
        ..*p
    }
}

fn axis(v: Option<&Values>) -> Option<Vec<f64>> {
    v.map(Values::to_vec)
}

struct SimRow {
    temperature: f64,
    i_bias: Option<f64>,
    f_simulated: Option<f64>,
    f_analytic: Option<f64>,
    spikes: usize,
}

pub fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, CliError> {
    let model = cfg.device()?;
    let circuit = cfg.circuit()?.clone();
    circuit.validate().map_err(|e| CliError::Config(format!("circuit: {e}")))?;
    let sim = cfg.section(&cfg.simulation, "simulation")?;
    if !(sim.duration > 0.0) {
        return Err(CliError::Config(format!("simulation.duration: must be positive, got {}", sim.duration)));
    }
    let sweep = cfg.sweep.as_ref();
    let temps = axis(sweep.and_then(|s| s.temperatures.as_ref())).unwrap_or_else(|| vec![circuit.temperature]);
    let currents: Vec<Option<f64>> = match axis(sweep.and_then(|s| s.currents.as_ref())) {
        Some(c) => c.into_iter().map(Some).collect(),
        None => vec![None],
    };
    if temps.is_empty() || currents.is_empty() {
        return Err(CliError::Config("sweep: empty axis".into()));
    }
    let grid: Vec<(f64, Option<f64>)> = temps.iter().flat_map(|&t| currents.iter().map(move |&i| (t, i))).collect();

    let label = |&(t, i): &(f64, Option<f64>)| match i {
        Some(i) => format!("T={t} I={i:e}"),
        None => format!("T={t}"),
    };
    let results = run_points(dir, &grid, label, |k, &(t, i), sink| {
        let params = model.params_at(t).map_err(fail)?;
        let mut c = circuit.clone();
        c.temperature = t;
        if let Some(i) = i {
            c.drive = BiasDrive::ConstantCurrent { i };
        }
        let dt = sim.dt.unwrap_or_else(|| c.dt_limit(&params, 50.0));
        let run = simulate_single(&params, &c, sim.duration, dt, sim.initial_v, sim.initial_phase).map_err(fail)?;
        sink.with(&format!("waveform_{k}.csv"), "waveform", |w| run.waveform.write_csv(w)).map_err(fail)?;
        if sim.json {
            sink.bytes(&format!("waveform_{k}.json"), "waveform", run.waveform.to_json().as_bytes())
                .map_err(fail)?;
        }
        sink.with(&format!("events_{k}.csv"), "events", |w| write_events_csv(&run.events, w)).map_err(fail)?;
        let i_bias = match c.drive {
            BiasDrive::ConstantCurrent { i } => Some(i),
            _ => None,
        };
        let f_analytic = i_bias.and_then(|i| {
            analytic::period(&loaded_params(&params, c.r_l), i, c.c_l)
                .ok()
                .map(|p| p.frequency)
        });
        Ok(SimRow {
            temperature: t,
            i_bias,
            f_simulated: run.mean_period().map(|p| 1.0 / p),
            f_analytic,
            spikes: run.events.iter().filter(|e| e.direction == Direction::Up).count(),
        })
    });
    let (points, mut outputs, rows) = gather(results);

    let table: Vec<Option<Vec<String>>> = rows
        .iter()
        .map(|r| {
            r.as_ref().map(|r| {
                vec![
                    r.temperature.to_string(),
                    opt(r.i_bias),
                    opt(r.f_simulated),
                    opt(r.f_analytic),
                    r.spikes.to_string(),
                ]
            })
        })
        .collect();
    let mut sink = Sink::new(dir, None);
    write_table(
        &mut sink,
        "summary.csv",
        &["temperature", "i_bias", "f_simulated", "f_analytic", "spikes"],
        &points,
        &table,
        |k| vec![grid[k].0.to_string(), opt(grid[k].1)],
    )?;
    outputs.extend(sink.entries);
    Ok(Report {
        summary: json!({ "points": grid.len(), "table": "summary.csv" }),
        points,
        outputs,
    })
}

#[derive(Serialize)]
struct FitReport<'a> {
    margin: f64,
    i_bias: f64,
    iterations: usize,
    censored: usize,
    median: Option<f64>,
    tau: f64,
    fit: &'a crate::stochastic::DistributionFit,
}

struct McRow {
    i_bias: f64,
    censored: usize,
    median: Option<f64>,
    family: String,
}

pub fn montecarlo(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, CliError> {
    let model = cfg.device()?;
    let circuit = cfg.circuit()?;
    let noise = cfg.section(&cfg.noise, "noise")?;
    noise.validate().map_err(|e| CliError::Config(format!("noise: {e}")))?;
    let mc = cfg.section(&cfg.montecarlo, "montecarlo")?;
    if mc.iterations == 0 || mc.margins.is_empty() {
        return Err(CliError::Config("montecarlo: need iterations > 0 and at least one margin".into()));
    }
    if !(mc.timeout_taus > 0.0) {
        return Err(CliError::Config("montecarlo.timeout_taus: must be positive".into()));
    }
    if mc.curve_margins.is_some() && mc.orientation != Orientation::Falling {
        return Err(CliError::Config("montecarlo.curve_margins: only the falling orientation has a margin curve".into()));
    }
    let params = model.params_at(circuit.temperature).map_err(config)?;
    let c_l = circuit.c_l;
    let tau = match mc.orientation {
        Orientation::Falling => c_l * params.r_m,
        Orientation::Rising => c_l * params.r_i,
    };
    let timeout = mc.timeout_taus * tau;

    // Margins run one after another; each run spreads its iterations over the pool.
    let mut results = Vec::with_capacity(mc.margins.len());
    for (k, &m) in mc.margins.iter().enumerate() {
        let mut sink = Sink::new(dir, Some(k));
        let row = (|| {
            let (i_bias, run) = match mc.orientation {
                Orientation::Falling => {
                    let i = (noise.v_hl_mu + m - params.v_om) / params.r_m;
                    (i, monte_carlo_falling_escape(&params, i, c_l, noise, mc.iterations, timeout))
                }
                Orientation::Rising => {
                    let i = (params.v_th - m - params.v_oi) / params.r_i;
                    (i, monte_carlo_rising_escape(&params, i, c_l, noise, mc.iterations, timeout))
                }
            };
            let run = run.map_err(fail)?;
            sink.with(&format!("escape_{k}.csv"), "escape", |w| run.write_csv(w)).map_err(fail)?;
            let hist = match mc.bin_width {
                Some(w) => Histogram::with_width(&run.samples, w),
                None => Histogram::auto(&run.samples),
            };
            sink.with(&format!("histogram_{k}.csv"), "histogram", |w| hist.write_csv(w)).map_err(fail)?;
            let fit = fit_distribution(&run.samples).map_err(fail)?.with_censored(run.censored);
            let report = FitReport {
                margin: m,
                i_bias,
                iterations: run.iterations,
                censored: run.censored,
                median: run.median(),
                tau: run.tau,
                fit: &fit,
            };
            sink.json(&format!("fit_{k}.json"), "fit", &report).map_err(fail)?;
            Ok::<_, String>(McRow {
                i_bias,
                censored: run.censored,
                median: run.median(),
                family: format!("{:?}", fit.family),
            })
        })();
        let status = PointStatus {
            index: k,
            label: format!("margin={m}"),
            ok: row.is_ok(),
            error: row.as_ref().err().cloned(),
        };
        results.push((status, sink.entries, row.ok()));
    }

    let mut offset = None;
    if let Some(curve) = &mc.curve_margins {
        let k = results.len();
        let margins = curve.to_vec();
        let mut sink = Sink::new(dir, Some(k));
        let outcome = (|| {
            let iterations = mc.curve_iterations.unwrap_or(mc.iterations);
            let sweep = escape_time_vs_margin(&params, c_l, noise, &margins, iterations, Some(timeout)).map_err(fail)?;
            sink.with("margin_curve.csv", "margin_curve", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["margin", "i_bias", "median", "median_over_tau", "survivors", "censored"])?;
                for p in &sweep.points {
                    w.write_record([
                        format!("{:e}", p.margin),
                        format!("{:e}", p.i_bias),
                        opt(p.median),
                        opt(p.median.map(|m| m / sweep.tau)),
                        p.survivors.to_string(),
                        p.censored.to_string(),
                    ])?;
                }
                w.flush()?;
                Ok::<(), csv::Error>(())
            })
            .map_err(fail)?;
            Ok::<_, String>(fit_margin_offset(&sweep))
        })();
        let status = PointStatus {
            index: k,
            label: "margin_curve".into(),
            ok: outcome.is_ok(),
            error: outcome.as_ref().err().cloned(),
        };
        offset = outcome.as_ref().ok().copied().flatten();
        results.push((status, sink.entries, None));
    }

    let (points, mut outputs, rows) = gather(results);
    let table: Vec<Option<Vec<String>>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.as_ref().map(|r| {
                vec![
                    format!("{:e}", mc.margins[k]),
                    format!("{:e}", r.i_bias),
                    r.censored.to_string(),
                    opt(r.median),
                    r.family.clone(),
                ]
            })
        })
        .collect();
    let n_margins = mc.margins.len();
    let mut sink = Sink::new(dir, None);
    write_table(
        &mut sink,
        "summary.csv",
        &["margin", "i_bias", "censored", "median", "family"],
        &points[..n_margins],
        &table[..n_margins],
        |k| vec![format!("{:e}", mc.margins[k])],
    )?;
    outputs.extend(sink.entries);
    Ok(Report {
        summary: json!({
            "orientation": mc.orientation,
            "tau": tau,
            "timeout": timeout,
            "families": rows[..n_margins].iter().map(|r| r.as_ref().map(|r| r.family.clone())).collect::<Vec<_>>(),
            "margin_offset": offset,
        }),
        points,
        outputs,
    })
}

struct CoupleRow {
    f_a: Option<f64>,
    f_b: Option<f64>,
    sigma_a: Option<f64>,
    sigma_b: Option<f64>,
    jitter_mean: Option<f64>,
    jitter_std: Option<f64>,
}

impl CoupleRow {
    fn rel_diff(&self) -> Option<f64> {
        let (a, b) = (self.f_a?, self.f_b?);
        Some((a - b).abs() / (0.5 * (a + b)))
    }
}

pub fn couple(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, CliError> {
    let model_a = cfg.device()?;
    let spec = cfg.section(&cfg.coupled, "coupled")?;
    let model_b = cfg.device_b()?.unwrap_or_else(|| model_a.clone());
    if !(spec.duration > 0.0) || !(0.0..1.0).contains(&spec.discard) {
        return Err(CliError::Config("coupled: need duration > 0 and 0 <= discard < 1".into()));
    }
    let pa = model_a.params_at(spec.node_a.temperature).map_err(|e| CliError::Config(format!("coupled.node_a: {e}")))?;
    let pb = model_b.params_at(spec.node_b.temperature).map_err(|e| CliError::Config(format!("coupled.node_b: {e}")))?;
    let couplings = axis(cfg.sweep.as_ref().and_then(|s| s.couplings.as_ref())).unwrap_or_else(|| vec![spec.r_c]);
    if couplings.is_empty() {
        return Err(CliError::Config("sweep.couplings: empty".into()));
    }

    let results = run_points(dir, &couplings, |r| format!("r_c={r:e}"), |k, &r_c, sink| {
        let cc = CoupledConfig {
            v_ss_a: spec.v_ss_a,
            v_ss_b: spec.v_ss_b,
            initial_a: spec.initial_a,
            initial_b: spec.initial_b,
            ..CoupledConfig::new(spec.node_a.clone(), spec.node_b.clone(), r_c)
        };
        let dt = spec.dt.unwrap_or_else(|| cc.min_time_constant(&pa, &pb) / 100.0);
        let run = simulate_coupled(&pa, &pb, &cc, spec.duration, dt).map_err(fail)?;
        sink.with(&format!("waveform_a_{k}.csv"), "waveform", |w| run.a.write_csv(w)).map_err(fail)?;
        sink.with(&format!("waveform_b_{k}.csv"), "waveform", |w| run.b.write_csv(w)).map_err(fail)?;
        sink.with(&format!("events_a_{k}.csv"), "events", |w| write_events_csv(&run.events_a, w)).map_err(fail)?;
        sink.with(&format!("events_b_{k}.csv"), "events", |w| write_events_csv(&run.events_b, w)).map_err(fail)?;

        let start = (spec.discard * run.a.len() as f64) as usize;
        let (wa, wb) = (run.a.slice(start, run.a.len()), run.b.slice(start, run.b.len()));
        let stats = |w: &Waveform| {
            segment_cycles_auto(w)
                .ok()
                .and_then(|s| frequency_stats(&s.cycles, None).ok())
        };
        let (sa, sb) = (stats(&wa), stats(&wb));
        let jitter = compute_jitter(&wa, &wb, 0.5 * (wa.min() + wa.max())).ok();
        if let Some(j) = &jitter {
            sink.with(&format!("jitter_{k}.csv"), "jitter", |w| j.write_csv(w)).map_err(fail)?;
        }
        Ok(CoupleRow {
            f_a: sa.as_ref().map(|s| s.mean),
            f_b: sb.as_ref().map(|s| s.mean),
            sigma_a: sa.as_ref().map(|s| s.sigma),
            sigma_b: sb.as_ref().map(|s| s.sigma),
            jitter_mean: jitter.as_ref().map(|j| j.mean_delay()),
            jitter_std: jitter.as_ref().map(|j| j.delay_std()),
        })
    });
    let (points, mut outputs, rows) = gather(results);
    let table: Vec<Option<Vec<String>>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.as_ref().map(|r| {
                vec![
                    format!("{:e}", couplings[k]),
                    opt(r.f_a),
                    opt(r.f_b),
                    opt(r.rel_diff()),
                    opt(r.sigma_a),
                    opt(r.sigma_b),
                    opt(r.jitter_mean),
                    opt(r.jitter_std),
                ]
            })
        })
        .collect();
    let mut sink = Sink::new(dir, None);
    write_table(
        &mut sink,
        "summary.csv",
        &["r_c", "f_a", "f_b", "rel_diff", "sigma_a", "sigma_b", "jitter_mean", "jitter_std"],
        &points,
        &table,
        |k| vec![format!("{:e}", couplings[k])],
    )?;
    outputs.extend(sink.entries);
    Ok(Report {
        summary: json!({ "points": couplings.len(), "table": "summary.csv" }),
        points,
        outputs,
    })
}

struct VcoRow {
    spikes: usize,
    bursts: Option<Vec<usize>>,
}

pub fn vco(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, CliError> {
    let model = cfg.device()?;
    let circuit = cfg.circuit()?;
    let BiasDrive::Transistor { gate, .. } = &circuit.drive else {
        return Err(CliError::Config("circuit.drive: vco needs a transistor drive".into()));
    };
    let spec = cfg.vco.clone().unwrap_or(super::config::VcoSpec {
        gate_periods: 4.0,
        dt: None,
        json: false,
    });
    if !(spec.gate_periods > 0.0) {
        return Err(CliError::Config("vco.gate_periods: must be positive".into()));
    }
    let params = model.params_at(circuit.temperature).map_err(config)?;
    let gates = cfg
        .sweep
        .as_ref()
        .and_then(|s| s.gates.clone())
        .unwrap_or_else(|| vec![gate.clone()]);
    if gates.is_empty() {
        return Err(CliError::Config("sweep.gates: empty".into()));
    }

    let label = |g: &crate::transient::GateSignal| serde_json::to_string(g).unwrap_or_default();
    let results = run_points(dir, &gates, label, |k, g, sink| {
        let mut c = circuit.clone();
        if let BiasDrive::Transistor { gate, .. } = &mut c.drive {
            *gate = g.clone();
        }
        let period = g.timescale().ok_or("gate signal has no timescale to size the run")?;
        let duration = spec.gate_periods * period;
        let dt = spec.dt.unwrap_or_else(|| c.dt_limit(&params, 50.0));
        let run = simulate_vco(&params, &c, duration, dt).map_err(fail)?;
        sink.with(&format!("waveform_{k}.csv"), "waveform", |w| run.waveform.write_csv(w)).map_err(fail)?;
        if spec.json {
            sink.bytes(&format!("waveform_{k}.json"), "waveform", run.waveform.to_json().as_bytes())
                .map_err(fail)?;
        }
        sink.with(&format!("events_{k}.csv"), "events", |w| write_events_csv(&run.events, w)).map_err(fail)?;
        let bursts = burst_spike_counts(&params, &c, &run.events, duration);
        if let Some(b) = &bursts {
            sink.with(&format!("bursts_{k}.csv"), "bursts", |buf| {
                writeln!(buf, "burst,spikes")?;
                for (i, n) in b.iter().enumerate() {
                    writeln!(buf, "{i},{n}")?;
                }
                Ok::<(), std::io::Error>(())
            })
            .map_err(fail)?;
        }
        Ok(VcoRow {
            spikes: run.events.iter().filter(|e| e.direction == Direction::Up).count(),
            bursts,
        })
    });
    let (points, mut outputs, rows) = gather(results);
    let median_burst = |b: &Vec<usize>| {
        let mut s = b.clone();
        s.sort_unstable();
        s.get(s.len() / 2).copied()
    };
    let table: Vec<Option<Vec<String>>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.as_ref().map(|r| {
                vec![
                    opt(gates[k].timescale().map(|p| 1.0 / p)),
                    r.spikes.to_string(),
                    r.bursts.as_ref().and_then(median_burst).map(|n| n.to_string()).unwrap_or_default(),
                ]
            })
        })
        .collect();
    let mut sink = Sink::new(dir, None);
    write_table(
        &mut sink,
        "summary.csv",
        &["gate_frequency", "spikes", "median_burst_spikes"],
        &points,
        &table,
        |k| vec![opt(gates[k].timescale().map(|p| 1.0 / p))],
    )?;
    outputs.extend(sink.entries);
    Ok(Report {
        summary: json!({
            "bursts": rows.iter().map(|r| r.as_ref().and_then(|r| r.bursts.clone())).collect::<Vec<_>>(),
        }),
        points,
        outputs,
    })
}

pub fn extract(cfg: &ExperimentConfig, input: &Path, dir: &Path) -> Result<Report, CliError> {
    let spec = cfg.section(&cfg.extract, "extract")?;
    let read_err = |e: &dyn Display| CliError::Config(format!("--input {}: {e}", input.display()));
    let w = if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = fs::read_to_string(input).map_err(|e| read_err(&e))?;
        Waveform::from_json(&text).map_err(|e| read_err(&e))?
    } else {
        let f = fs::File::open(input).map_err(|e| read_err(&e))?;
        Waveform::read_csv(f).map_err(|e| read_err(&e))?
    };
    let trigger = spec.trigger.unwrap_or(0.5 * (w.min() + w.max()));
    let ex = extract_model_params(&w, spec.c_l, spec.i_bias, trigger).map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut sink = Sink::new(dir, Some(0));
    sink.json("params.json", "params", &ex.params)?;
    sink.json("spread.json", "spread", &ex.spread)?;
    sink.with("per_cycle.csv", "per_cycle", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        for c in &ex.per_cycle {
            wtr.serialize(c)?;
        }
        wtr.flush()?;
        Ok::<(), csv::Error>(())
    })?;
    let mut seg = segment_cycles(&w, trigger, 0.1 * w.peak_to_peak()).map_err(|e| CliError::Numerical(e.to_string()))?;
    seg.attach_energy(&w, spec.i_bias);
    sink.with("cycles.csv", "cycles", |buf| write_cycles_csv(&seg.cycles, buf))?;
    let fstats = frequency_stats(&seg.cycles, spec.bin_width).map_err(|e| CliError::Numerical(e.to_string()))?;
    sink.with("frequency_histogram.csv", "histogram", |buf| fstats.histogram.write_csv(buf))?;

    let energies: Vec<f64> = seg.cycles.iter().filter_map(|c| c.energy).collect();
    Ok(Report {
        points: vec![PointStatus {
            index: 0,
            label: input.display().to_string(),
            ok: true,
            error: None,
        }],
        outputs: sink.entries,
        summary: json!({
            "params": ex.params,
            "cycles": ex.spread.cycles,
            "frequency_mean": fstats.mean,
            "frequency_median": fstats.median,
            "frequency_sigma": fstats.sigma,
            "energy_mean": (!energies.is_empty()).then(|| crate::stats::mean(&energies)),
        }),
    })
}

pub fn thermal(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, CliError> {
    let spec = cfg.section(&cfg.thermal, "thermal")?;
    let mut geom = spec.geometry;
    if let Some(scale) = spec.threshold_scale {
        let m = spec
            .gt_model
            .ok_or_else(|| CliError::Config("thermal.threshold_scale: needs thermal.gt_model".into()))?;
        geom.t_th = threshold_temperature(m.t_imt, scale);
    }
    match &spec.gt_model {
        Some(m) => geom.validate_with(m),
        None => geom.validate(),
    }
    .map_err(|e| CliError::Config(format!("thermal: {e}")))?;
    let temps = spec.temperatures.to_vec();

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (k, &t) in temps.iter().enumerate() {
        let row = thermal::threshold_sweep(&geom, &[t]).map(|r| r[0]);
        points.push(PointStatus {
            index: k,
            label: format!("T={t}"),
            ok: row.is_ok(),
            error: row.as_ref().err().map(fail),
        });
        rows.push(row.ok());
    }
    let mut sink = Sink::new(dir, None);
    sink.with("thresholds.csv", "thresholds", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in rows.iter().flatten() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok::<(), csv::Error>(())
    })?;
    if let Some(m) = &spec.gt_model {
        sink.with("conductance.csv", "conductance", |buf| {
            writeln!(buf, "temperature,conductance")?;
            for i in 0..=200 {
                let t = 0.5 * i as f64;
                writeln!(buf, "{t},{:e}", thermal::conductance(m, t))?;
            }
            Ok::<(), std::io::Error>(())
        })?;
    }
    let mut fitted = None;
    if let Some(data) = &spec.gt_data {
        let k = points.len();
        let fit = thermal::fit_gt(data);
        if let Ok(f) = &fit {
            let mut fs = Sink::new(dir, Some(k));
            fs.json("gt_fit.json", "gt_fit", &json!({ "model": f, "on_off_ratio": f.on_off_ratio() }))?;
            sink.entries.extend(fs.entries);
            fitted = Some(*f);
        }
        points.push(PointStatus {
            index: k,
            label: "gt_fit".into(),
            ok: fit.is_ok(),
            error: fit.err().map(fail),
        });
    }
    let at_20 = rows.iter().flatten().find(|r| r.t == 20.0);
    Ok(Report {
        points,
        outputs: sink.entries,
        summary: json!({
            "t_th": geom.t_th,
            "thermal_conductance": geom.thermal_conductance(),
            "i_th_20": at_20.map(|r| r.i_th),
            "p_th_20": at_20.map(|r| r.p_th),
            "gt_fit": fitted,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::Phase;
    use crate::transient::CircuitConfig;

    #[test]
    fn loaded_params_match_transient() {
        let p = MemristorParams::new(0.95, 0.65, 40e3, 10e3, 0.85, 0.35).unwrap();
        let c = CircuitConfig::constant_current(10e-6);
        let eff = loaded_params(&p, c.r_l);
        let f = analytic::period(&eff, 10e-6, c.c_l).unwrap().frequency;
        let dt = c.dt_limit(&p, 50.0);
        let run = simulate_single(&p, &c, 60e-6, dt, p.v_hl, Phase::Insulating).unwrap();
        let f_sim = 1.0 / run.mean_period().unwrap();
        assert!((f_sim / f - 1.0).abs() < 1e-3, "{f_sim} vs {f}");
    }
}
