//! Subcommand tables and pipelines.

use crate::config::{param, Kind, ParamSpec, Params, Value};
use crate::output::{read_columns, Table};
use crate::{row, CliError};
use pairspin::analysis::{fit_gaussian_peaks, fit_stretched_cos, fit_stretched_exp, padded_spectrum, CosGuess};
use pairspin::consts::TWO_PI;
use pairspin::decaymodels::{
    classify_regime, detuned_clock_scale, envelope_fast, envelope_full, envelope_gaussian_static,
    envelope_quasistatic_clock, envelope_slow, fast_frequency_shift, relaxation_factor, t2star_fast, t2star_gaussian,
    t2star_relaxation, Envelope, Ms, PairParams, Regime, RegimeThresholds,
};
use pairspin::geometry::{coupling_table, pair_census, BathCenter, CensusConfig, LatticeConfig};
use pairspin::measurement::{
    calibrate, calibrate_exact, entangle_protocol, entangle_protocol_exact, pair_ab_parity_preparations,
    pair_ab_spin_preparations, pair_c_parity_preparations, pair_c_spin_preparations, ProtocolSpec, ReadoutModel,
};
use pairspin::montecarlo::{ensemble_echo, ensemble_ramsey, McConfig, PulseAxis, PulseSequence};
use pairspin::noisefield::{
    b_distribution, magnet_field, magnet_gradient, wire_current_for_field, wire_field, wire_gradient,
};
use pairspin::spinsys::{effective_x, field_for_larmor, HamiltonianSpec};
use serde_json::{json, Value as Json};

pub struct Outcome {
    pub summary: Json,
    pub tables: Vec<Table>,
}

pub struct Context {
    pub seed: u64,
}

type Runner = fn(&Context, &mut Params) -> Result<Outcome, CliError>;

pub struct Command {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [ParamSpec],
    pub run: Runner,
}

use Kind::*;

const LATTICE: [ParamSpec; 2] = [
    param("cells", Count, Some("15"), "lattice cells per axis"),
    param("abundance", Number, Some("0.011"), "13C abundance"),
];

const PAIR: [ParamSpec; 5] = [
    param("X", Frequency, Some("2080.99"), "intra-pair coupling"),
    param("Z", Frequency, Some("0"), "hyperfine difference"),
    param("b", Frequency, Some("13.9"), "noise strength"),
    param("R", Rate, None, "bath fluctuation rate (exclusive with tau-c)"),
    param("tau-c", Time, None, "bath correlation time (exclusive with R)"),
];

const MS: ParamSpec = param("ms", Choice(&["0", "-1"]), Some("0"), "NV spin projection during free evolution");

macro_rules! concat_specs {
    ($($part:expr),* $(,)?) => {{
        const N: usize = 0 $(+ $part.len())*;
        const OUT: [ParamSpec; N] = {
            let mut out = [param("", Flag, None, ""); N];
            let mut k = 0;
            $(
                let part = $part;
                let mut i = 0;
                while i < part.len() {
                    out[k] = part[i];
                    k += 1;
                    i += 1;
                }
            )*
            out
        };
        &OUT
    }};
}

pub const COMMANDS: &[Command] = &[
    Command {
        name: "bdist",
        about: "Distribution of the bath noise strength b over random baths",
        params: concat_specs!(
            [
                param("center", Choice(&["nn", "pair-c", "single"]), Some("nn"), "central spin geometry"),
                param("baths", Count, Some("10000"), "number of random baths"),
                param("cutoff", Frequency, Some("50"), "drop bath spins coupled more strongly than this"),
                param("bin", Frequency, Some("1"), "histogram bin width"),
            ],
            LATTICE
        ),
        run: bdist,
    },
    Command {
        name: "census",
        about: "Count field-aligned nearest-neighbour pairs per NV",
        params: concat_specs!(
            [
                param("baths", Count, Some("10000"), "number of random baths"),
                param("z-min", Frequency, Some("50"), "lower |Z| bound (exclusive)"),
                param("z-max", Frequency, Some("500"), "upper |Z| bound (inclusive)"),
                param("larmor", Frequency, Some("432.14 kHz"), "13C Larmor frequency"),
            ],
            LATTICE
        ),
        run: census,
    },
    Command {
        name: "ctable",
        about: "Distinct dipolar couplings around a lattice site",
        params: &[
            param("radius", Number, Some("10"), "search radius in units of a0/4"),
            param("rows", Count, Some("10"), "rows to report (0 = all)"),
        ],
        run: ctable,
    },
    Command {
        name: "envelope",
        about: "Closed-form coherence envelope and its T2*",
        params: concat_specs!(
            [
                param(
                    "model",
                    Choice(&["full", "quasistatic", "slow", "fast", "gaussian", "relaxation"]),
                    Some("full"),
                    "envelope model",
                ),
                param("t-max", Time, None, "end of the time grid (default: 3 T2*)"),
                param("points", Count, Some("400"), "number of time points"),
                MS,
            ],
            PAIR
        ),
        run: envelope,
    },
    Command {
        name: "mc",
        about: "Monte Carlo Ramsey or echo decay under Ornstein-Uhlenbeck noise",
        params: concat_specs!([
            param("sequence", Choice(&["ramsey", "echo"]), Some("ramsey"), "pulse sequence"),
            param("echo-axis", Choice(&["transverse", "x", "z"]), Some("transverse"), "axis of the echo pulse"),
            param("t-max", Time, Some("6"), "end of the time grid"),
            param("points", Count, Some("16"), "number of time points"),
            param("traj", Count, Some("1000"), "number of trajectories"),
            param("dt", Time, None, "integration step (default: automatic)"),
            param("relaxation", Flag, Some("false"), "include leakage out of the pseudo-spin subspace"),
            MS,
            param("X", Frequency, Some("300"), "intra-pair coupling"),
            param("Z", Frequency, Some("0"), "hyperfine difference"),
            param("b", Frequency, Some("10"), "noise strength"),
            param("R", Rate, None, "bath fluctuation rate (exclusive with tau-c, default 2 1/s)"),
            param("tau-c", Time, None, "bath correlation time (exclusive with R)"),
        ]),
        run: mc,
    },
    Command {
        name: "effx",
        about: "Electron-mediated coupling versus transverse field",
        params: &[
            param("X", Frequency, Some("2062.37"), "bare dipolar coupling"),
            param("bperp-max", Field, Some("1 G"), "largest transverse field"),
            param("steps", Count, Some("9"), "number of field values from 0 to bperp-max"),
            param("a1-par", Frequency, Some("2 kHz"), "parallel hyperfine of spin 1"),
            param("a1-perp", Frequency, Some("1 kHz"), "perpendicular hyperfine of spin 1"),
            param("a2-par", Frequency, Some("1 kHz"), "parallel hyperfine of spin 2"),
            param("a2-perp", Frequency, Some("0.5 kHz"), "perpendicular hyperfine of spin 2"),
            param("larmor", Frequency, Some("432.14 kHz"), "13C Larmor frequency setting the axial field"),
        ],
        run: effx,
    },
    Command {
        name: "calib",
        about: "Readout threshold calibration F(m)",
        params: &[
            param(
                "target",
                Choice(&["ab-spin", "ab-parity", "c-spin", "c-parity"]),
                Some("ab-spin"),
                "readout to calibrate",
            ),
            param("m-max", Count, Some("60"), "largest number of repetitions"),
            param("trials", Count, Some("0"), "sampled readouts per state (0 = exact)"),
            param("ideal", Flag, Some("false"), "perfect readout"),
            param("contrast", Number, None, "NV contrast override"),
            param("dephasing", Number, None, "per-repetition dephasing probability override"),
            param("leakage", Number, None, "per-repetition leakage probability override"),
        ],
        run: calib,
    },
    Command {
        name: "entangle",
        about: "Parity-measurement entanglement of two pairs",
        params: &[
            param("X", Frequency, Some("2080.99"), "pair coupling for free evolution"),
            param("t", Time, Some("0"), "free evolution before the final parity readout"),
            param("trials", Count, Some("0"), "sampled heralding attempts (0 = exact)"),
            param("ideal", Flag, Some("false"), "perfect readout from the antiparallel subspace"),
            param("sweep-points", Count, Some("240"), "points of the parity oscillation sweep (0 = none)"),
            param("sweep-dt", Time, None, "sweep spacing (default: 1/(40 X))"),
        ],
        run: entangle,
    },
    Command {
        name: "fit",
        about: "Fit a model to two columns of a CSV file",
        params: &[
            param("input", Text, None, "CSV file; a leading header row is skipped"),
            param(
                "model",
                Choice(&["cos1", "cos2", "gauss1", "gauss2", "stretched-exp", "spectrum"]),
                Some("cos1"),
                "model",
            ),
            param("x-col", Count, Some("0"), "column holding times or frequencies"),
            param("y-col", Count, Some("1"), "column holding the signal"),
            param("f-guess", Frequency, None, "initial tone frequency"),
            param("t-guess", Time, None, "initial decay time"),
            param("padding", Count, Some("4"), "zero-padding factor of the spectrum"),
        ],
        run: fit,
    },
    Command {
        name: "extnoise",
        about: "Field differences across a pair from a wire and a magnet",
        params: &[
            param("current", Current, Some("1e-4 A"), "wire current"),
            param("target-field", Field, Some("1e-5 T"), "field the wire should produce at wire-distance"),
            param("wire-distance", Length, Some("10 um"), "distance from the wire"),
            param("spacing", Length, Some("1 nm"), "separation of the two spins"),
            param("magnet-distance", Length, Some("1 cm"), "distance from the magnet face"),
            param("magnet-radius", Length, Some("5 mm"), "magnet radius"),
            param("magnet-length", Length, Some("5 mm"), "magnet length"),
            param("remanence", Field, Some("1.5 T"), "magnet remanence"),
        ],
        run: extnoise,
    },
];

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn lattice(p: &Params) -> LatticeConfig {
    LatticeConfig { cells_per_axis: p.u("cells"), abundance: p.f("abundance"), ..Default::default() }
}

fn bdist(ctx: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let cfg = LatticeConfig { exclusion_cutoff: p.f("cutoff"), ..lattice(p) };
    let center = match p.s("center") {
        "nn" => BathCenter::NEAREST_NEIGHBOUR,
        "pair-c" => BathCenter::PAIR_C,
        _ => BathCenter::Single,
    };
    let width = p.f("bin");
    if !(width > 0.0) {
        return config_err("bin: must be positive");
    }
    let d = b_distribution(&cfg, center, p.u("baths"), ctx.seed)?;
    let mut values = Table::new("bdist", &["bath", "b_hz"]);
    for (i, v) in d.values.iter().enumerate() {
        values.push(row![i, *v]);
    }
    let mut hist = Table::new("bdist_hist", &["bin_lo_hz", "count"]);
    for (lo, c) in d.histogram(width) {
        hist.push(row![lo, c]);
    }
    Ok(Outcome {
        summary: json!({ "n_baths": d.values.len(), "mean_hz": d.mean, "std_hz": d.std }),
        tables: vec![values, hist],
    })
}

fn census(ctx: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let cc = CensusConfig { z_range: (p.f("z-min"), p.f("z-max")), larmor: p.f("larmor"), ..Default::default() };
    let r = pair_census(&lattice(p), p.u("baths"), &cc, ctx.seed)?;
    let top = r.counts.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0usize; top + 1];
    for &c in &r.counts {
        hist[c as usize] += 1;
    }
    let mut t = Table::new("census", &["pairs", "baths"]);
    for (k, n) in hist.into_iter().enumerate() {
        t.push(row![k, n]);
    }
    Ok(Outcome {
        summary: json!({
            "n_baths": r.counts.len(),
            "mean": r.mean,
            "std": r.std,
            "frac_ge1": r.frac_ge1,
            "expected_mean": r.expected_mean,
            "qualifying_bonds": r.qualifying_bonds,
        }),
        tables: vec![t],
    })
}

fn ctable(_: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let table = coupling_table(&LatticeConfig::default(), p.f("radius"))?;
    let n = match p.u("rows") {
        0 => table.len(),
        k => k.min(table.len()),
    };
    let mut t = Table::new("ctable", &["rank", "x_hz", "occurrence", "r_x", "r_y", "r_z"]);
    for (i, e) in table.iter().take(n).enumerate() {
        t.push(row![i + 1, e.x, e.occurrence, e.r[0], e.r[1], e.r[2]]);
    }
    let rows: Vec<Json> = table.iter().take(n).map(|e| json!({ "x_hz": e.x, "occurrence": e.occurrence })).collect();
    Ok(Outcome { summary: json!({ "distinct": table.len(), "rows": rows }), tables: vec![t] })
}

/// Resolves the R / tau-c pair into tau-c, recording it in the parameters.
fn correlation_time(p: &mut Params, default_rate: f64) -> Result<f64, CliError> {
    let tau = match (p.opt_f("R"), p.opt_f("tau-c")) {
        (Some(_), Some(_)) => return config_err("R and tau-c are mutually exclusive"),
        (Some(r), None) if r > 0.0 => 1.0 / r,
        (Some(r), None) => return config_err(format!("R: must be positive, got {r}")),
        (None, Some(t)) => t,
        (None, None) => 1.0 / default_rate,
    };
    p.0.insert("tau-c".into(), Value::Float(tau));
    p.0.insert("R".into(), Value::Float(1.0 / tau));
    Ok(tau)
}

fn pair_params(p: &mut Params, default_rate: f64) -> Result<PairParams, CliError> {
    let tau_c = correlation_time(p, default_rate)?;
    let ms = if p.s("ms") == "-1" { Ms::MinusOne } else { Ms::Zero };
    let pp = PairParams { x: p.f("X"), z: p.f("Z"), b: p.f("b"), tau_c, ms };
    pp.validate()?;
    Ok(pp)
}

/// First time at which |M| drops below 1/e, linearly interpolated.
fn one_over_e(env: &Envelope) -> Option<f64> {
    let m = env.magnitudes();
    let target = (-1.0f64).exp();
    (1..m.len()).find(|&i| m[i] < target).map(|i| {
        let (t0, t1) = (env.times[i - 1], env.times[i]);
        t0 + (m[i - 1] - target) / (m[i - 1] - m[i]) * (t1 - t0)
    })
}

fn envelope(_: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let pp = pair_params(p, 10.0)?;
    let model = p.s("model").to_string();
    let kappa = if pp.x > 0.0 { TWO_PI * pp.b * pp.b / pp.x } else { f64::INFINITY };
    let scale = if pp.ms == Ms::MinusOne { detuned_clock_scale(pp.x, pp.z) } else { 1.0 };
    let quasistatic = (4f64.exp() - 1.0).sqrt() / kappa;
    let slow = 1.0 / (TWO_PI * pp.b * (pp.rate() / (4.0 * TWO_PI * pp.x)).sqrt());
    let regime = classify_regime(&pp, &RegimeThresholds::default());
    let analytic = match model.as_str() {
        "fast" => Some(t2star_fast(&pp)),
        "quasistatic" => Some(quasistatic),
        "slow" => Some(slow),
        "gaussian" => Some(t2star_gaussian(pp.b, scale)),
        "relaxation" => Some(t2star_relaxation(&pp)),
        _ => match regime {
            Regime::Fast if pp.ms == Ms::Zero => Some(t2star_fast(&pp)),
            Regime::QuasiStatic if pp.ms == Ms::Zero => Some(quasistatic),
            Regime::QuasiStatic => Some(t2star_gaussian(pp.b, scale)),
            Regime::Slow if pp.ms == Ms::Zero => Some(slow),
            _ => None,
        },
    }
    .filter(|t| t.is_finite() && *t > 0.0);
    let n = p.u("points");
    if n < 2 {
        return config_err("points: need at least 2");
    }
    let t_max = match p.opt_f("t-max") {
        Some(t) => t,
        None => analytic.map_or(10.0, |t| 3.0 * t),
    };
    if !(t_max > 0.0) {
        return config_err("t-max: must be positive");
    }
    p.0.insert("t-max".into(), Value::Float(t_max));
    let times: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
    let env = match model.as_str() {
        "fast" => envelope_fast(&pp, &times)?,
        "quasistatic" => envelope_quasistatic_clock(&pp, &times)?,
        "slow" => envelope_slow(&pp, &times)?,
        "gaussian" => envelope_gaussian_static(pp.b, scale, &times)?,
        "relaxation" => relaxation_factor(&pp, &times)?,
        _ => envelope_full(&pp, &times)?,
    };
    let mut t = Table::new("envelope", &["t_s", "re", "im", "abs"]);
    for (&time, v) in env.times.iter().zip(&env.values) {
        t.push(row![time, v.re, v.im, v.norm()]);
    }
    Ok(Outcome {
        summary: json!({
            "model": model,
            "regime": regime,
            "t2star_s": analytic,
            "t2star_numeric_s": one_over_e(&env),
            "frequency_shift_hz": if pp.x > 0.0 { Some(fast_frequency_shift(pp.b, pp.x)) } else { None },
        }),
        tables: vec![t],
    })
}

fn mc(ctx: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let pp = pair_params(p, 2.0)?;
    let n = p.u("points");
    let t_max = p.f("t-max");
    let axis = match p.s("echo-axis") {
        "x" => PulseAxis::X,
        "z" => PulseAxis::Z,
        _ => PulseAxis::Transverse,
    };
    let cfg =
        McConfig { dt: p.opt_f("dt"), apply_relaxation: p.flag("relaxation"), ..McConfig::new(p.u("traj"), ctx.seed) };
    let echo = p.s("sequence") == "echo";
    let curve = if echo {
        ensemble_echo(&pp, &PulseSequence::echo(t_max, n).with_echo_axis(axis), &cfg)?
    } else {
        ensemble_ramsey(&pp, &PulseSequence::ramsey(t_max, n), &cfg)?
    };
    let analytic = if !echo && pp.ms == Ms::Zero && pp.x > 0.0 {
        let mut env = envelope_full(&pp, &curve.times)?;
        if cfg.apply_relaxation {
            env = env.times_real(&relaxation_factor(&pp, &curve.times)?);
        }
        Some(env.magnitudes())
    } else {
        None
    };
    let mut header = vec!["t_s", "mean", "stderr", "envelope", "envelope_stderr"];
    if analytic.is_some() {
        header.push("analytic");
    }
    let mut t = Table::new("mc", &header);
    let mut worst: f64 = 0.0;
    for k in 0..curve.times.len() {
        let mut r = row![curve.times[k], curve.mean[k], curve.stderr[k], curve.envelope[k], curve.envelope_stderr[k]];
        if let Some(a) = &analytic {
            r.push(a[k].into());
            worst = worst.max((curve.envelope[k] - a[k]).abs() / curve.envelope_stderr[k].max(1e-12));
        }
        t.push(r);
    }
    Ok(Outcome {
        summary: json!({
            "n_traj": curve.n_traj,
            "dt_s": curve.dt,
            "regime": classify_regime(&pp, &RegimeThresholds::default()),
            "max_deviation_sigma": analytic.as_ref().map(|_| worst),
        }),
        tables: vec![t],
    })
}

fn effx(_: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let steps = p.u("steps");
    if steps < 1 {
        return config_err("steps: need at least 1");
    }
    let spec = HamiltonianSpec {
        x: p.f("X"),
        b_par: field_for_larmor(p.f("larmor")),
        hyperfine: [(p.f("a1-par"), p.f("a1-perp")), (p.f("a2-par"), p.f("a2-perp"))],
        ..Default::default()
    };
    let top = p.f("bperp-max");
    let fields: Vec<f64> =
        (0..steps).map(|i| if steps == 1 { top } else { top * i as f64 / (steps - 1) as f64 }).collect();
    let rows = effective_x(&spec, &fields)?;
    let mut t = Table::new("effx", &["b_perp_t", "x_eff_hz", "shift_hz", "ambiguous"]);
    let mut worst: f64 = 0.0;
    for r in &rows {
        t.push(row![r.b_perp, r.x_eff, r.x_eff - spec.x, r.ambiguous]);
        worst = worst.max((r.x_eff - spec.x).abs());
    }
    Ok(Outcome {
        summary: json!({
            "x_hz": spec.x,
            "max_abs_shift_hz": worst,
            "any_ambiguous": rows.iter().any(|r| r.ambiguous),
        }),
        tables: vec![t],
    })
}

fn calib(ctx: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let adjust = |m: ReadoutModel| -> ReadoutModel {
        let mut m = if p.flag("ideal") { m.ideal() } else { m.realistic() };
        if let Some(c) = p.opt_f("contrast") {
            m.contrast = c;
        }
        if let Some(d) = p.opt_f("dephasing") {
            m.dephasing = d;
        }
        if let Some(l) = p.opt_f("leakage") {
            m.leakage = l;
        }
        m
    };
    let (model, (a, b)) = match p.s("target") {
        "ab-spin" => {
            let spin = adjust(ReadoutModel::pair_ab_spin());
            let preps = pair_ab_spin_preparations(&spin, &adjust(ReadoutModel::pair_ab_parity()));
            (spin, preps)
        }
        "ab-parity" => {
            let parity = adjust(ReadoutModel::pair_ab_parity());
            let preps = pair_ab_parity_preparations(&parity);
            (parity, preps)
        }
        "c-spin" => {
            let spin = adjust(ReadoutModel::pair_c_spin());
            let preps = pair_c_spin_preparations(&spin, &adjust(ReadoutModel::pair_c_parity()));
            (spin, preps)
        }
        _ => {
            let parity = adjust(ReadoutModel::pair_c_parity());
            let preps = pair_c_parity_preparations(&parity);
            (parity, preps)
        }
    };
    model.validate()?;
    let m_max = p.u("m-max");
    if m_max < 1 {
        return config_err("m-max: need at least 1");
    }
    let rows = match p.u("trials") {
        0 => calibrate_exact(&model, &a, &b, m_max)?,
        n => calibrate(&model, &a, &b, m_max, n, ctx.seed)?,
    };
    let mut t = Table::new("calib", &["m", "threshold", "fidelity", "stderr"]);
    for r in &rows {
        t.push(row![r.m, r.threshold, r.fidelity, r.stderr]);
    }
    let best = rows.iter().copied().fold(rows[0], |b, r| if r.fidelity > b.fidelity { r } else { b });
    Ok(Outcome { summary: json!({ "best": best, "last": rows.last() }), tables: vec![t] })
}

fn entangle(ctx: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let mut spec = if p.flag("ideal") {
        ProtocolSpec::ideal()
    } else {
        ProtocolSpec::realistic(ReadoutModel::pair_ab_parity().realistic())
    };
    spec.x = p.f("X");
    if !(spec.x > 0.0) {
        return config_err("X: must be positive");
    }
    let t = p.f("t");
    let result = match p.u("trials") {
        0 => entangle_protocol_exact(&spec, t)?,
        n => entangle_protocol(&spec, t, n, ctx.seed)?,
    };
    let n = p.u("sweep-points");
    let dt = p.opt_f("sweep-dt").unwrap_or(1.0 / (40.0 * spec.x));
    p.0.insert("sweep-dt".into(), Value::Float(dt));
    let mut table = Table::new("entangle", &["t_s", "zz_state", "zz_measured"]);
    let mut frequency = None;
    if n > 0 {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let mut zz = Vec::with_capacity(n);
        for &time in &times {
            let r = entangle_protocol_exact(&spec, time)?;
            table.push(row![time, r.zz_at_t.0, r.zz_at_t.1]);
            zz.push(r.zz_at_t.1);
        }
        if n >= 16 {
            frequency =
                fit_stretched_cos(&times, &zz, 1, &CosGuess::default()).ok().and_then(|f| f.get("f_A")).map(f64::abs);
        }
    }
    Ok(Outcome {
        summary: json!({
            "herald_rate": result.herald_rate,
            "state": result.state,
            "measured": result.measured,
            "zz_at_t": { "t_s": t, "state": result.zz_at_t.0, "measured": result.zz_at_t.1 },
            "parity_frequency_hz": frequency,
            "two_x_hz": 2.0 * spec.x,
        }),
        tables: vec![table],
    })
}

fn fit(_: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    if !p.has("input") {
        return config_err("fit: --input is required");
    }
    let path = p.s("input");
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("input: cannot read {path}: {e}")))?;
    let (x, y) =
        read_columns(&text, p.u("x-col"), p.u("y-col")).map_err(|e| CliError::Config(format!("input: {e}")))?;
    let model = p.s("model").to_string();
    if model == "spectrum" {
        let s = padded_spectrum(&x, &y, p.u("padding").max(1))?;
        let (f, m) = s.positive();
        let mut t = Table::new("spectrum", &["freq_hz", "magnitude"]);
        for (a, b) in f.iter().zip(&m) {
            t.push(row![*a, *b]);
        }
        let peak = (1..m.len()).max_by(|&i, &j| m[i].total_cmp(&m[j])).map(|i| f[i]);
        return Ok(Outcome { summary: json!({ "model": model, "peak_hz": peak }), tables: vec![t] });
    }
    let guess = CosGuess { freqs: p.opt_f("f-guess").into_iter().collect(), t: p.opt_f("t-guess") };
    let r = match model.as_str() {
        "cos1" => fit_stretched_cos(&x, &y, 1, &guess)?,
        "cos2" => fit_stretched_cos(&x, &y, 2, &guess)?,
        "gauss1" => fit_gaussian_peaks(&x, &y, 1)?,
        "gauss2" => fit_gaussian_peaks(&x, &y, 2)?,
        _ => fit_stretched_exp(&x, &y)?,
    };
    let mut t = Table::new("fit", &["parameter", "value", "sigma"]);
    for ((n, v), s) in r.names.iter().zip(&r.values).zip(&r.sigmas) {
        t.push(row![*n, *v, *s]);
    }
    Ok(Outcome { summary: json!({ "model": model, "result": r }), tables: vec![t] })
}

fn extnoise(_: &Context, p: &mut Params) -> Result<Outcome, CliError> {
    let (d, a) = (p.f("wire-distance"), p.f("spacing"));
    let (r, radius, length, br) =
        (p.f("magnet-distance"), p.f("magnet-radius"), p.f("magnet-length"), p.f("remanence"));
    let values = [
        ("wire_current_for_target_a", wire_current_for_field(p.f("target-field"), d)?, "A"),
        ("wire_field_t", wire_field(p.f("current"), d)?, "T"),
        ("wire_gradient_t", wire_gradient(p.f("current"), d, d + a)?, "T"),
        ("magnet_field_t", magnet_field(r, radius, length, br)?, "T"),
        ("magnet_gradient_t", magnet_gradient(r, a, radius, length, br)?, "T"),
    ];
    let mut t = Table::new("extnoise", &["quantity", "value", "unit"]);
    let mut summary = serde_json::Map::new();
    for (name, v, unit) in values {
        t.push(row![name, v, unit]);
        summary.insert(name.into(), json!(v));
    }
    Ok(Outcome { summary: Json::Object(summary), tables: vec![t] })
}

pub fn find(name: &str) -> Option<&'static Command> {
    COMMANDS.iter().find(|c| c.name == name)
}
