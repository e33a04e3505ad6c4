//! Browser bindings for three interactive views: coherence envelopes, the
//! bath noise-strength histogram and the readout calibration curve.
//!
//! Each view has a plain Rust function returning a JSON string (tested
//! natively) and a thin `#[wasm_bindgen]` export around it.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pairspin::decaymodels::{
    classify_regime, envelope_fast, envelope_full, envelope_quasistatic_clock, t2star_fast, PairParams,
    RegimeThresholds,
};
use pairspin::geometry::{BathCenter, LatticeConfig};
use pairspin::measurement::{
    calibrate_exact, pair_ab_parity_preparations, pair_ab_spin_preparations, pair_c_parity_preparations,
    pair_c_spin_preparations, ReadoutModel,
};
use pairspin::noisefield::b_distribution;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call responsive in a browser tab.
pub const MAX_POINTS: usize = 5000;
pub const MAX_BATHS: usize = 20_000;
pub const MAX_REPETITIONS: usize = 120;

#[derive(Debug, Serialize)]
pub struct EnvelopeView {
    pub times: Vec<f64>,
    pub full: Vec<f64>,
    pub fast: Vec<f64>,
    pub quasistatic: Vec<f64>,
    pub regime: String,
    pub t2star_fast: f64,
}

pub fn envelope_view(x: f64, b: f64, rate: f64, t_max: f64, points: usize) -> Result<EnvelopeView, String> {
    if !(rate > 0.0) {
        return Err("rate must be positive".into());
    }
    if !(t_max > 0.0) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("need t_max > 0 and 2..={MAX_POINTS} points"));
    }
    let p = PairParams::clock(x, b, 1.0 / rate);
    let times: Vec<f64> = (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect();
    let mags =
        |e: pairspin::Result<pairspin::decaymodels::Envelope>| e.map(|e| e.magnitudes()).map_err(|e| e.to_string());
    Ok(EnvelopeView {
        full: mags(envelope_full(&p, &times))?,
        fast: mags(envelope_fast(&p, &times))?,
        quasistatic: mags(envelope_quasistatic_clock(&p, &times))?,
        regime: format!("{:?}", classify_regime(&p, &RegimeThresholds::default())),
        t2star_fast: t2star_fast(&p),
        times,
    })
}

#[derive(Debug, Serialize)]
pub struct HistogramView {
    pub mean: f64,
    pub std: f64,
    pub bin_lo: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram_view(center: &str, n_baths: usize, seed: u64, bin: f64) -> Result<HistogramView, String> {
    let center = match center {
        "nn" => BathCenter::NEAREST_NEIGHBOUR,
        "pair-c" => BathCenter::PAIR_C,
        "single" => BathCenter::Single,
        other => return Err(format!("unknown geometry '{other}'")),
    };
    if n_baths > MAX_BATHS {
        return Err(format!("at most {MAX_BATHS} baths"));
    }
    if !(bin > 0.0) {
        return Err("bin width must be positive".into());
    }
    let d = b_distribution(&LatticeConfig::default(), center, n_baths, seed).map_err(|e| e.to_string())?;
    let (bin_lo, counts) = d.histogram(bin).into_iter().unzip();
    Ok(HistogramView { mean: d.mean, std: d.std, bin_lo, counts })
}

#[derive(Debug, Serialize)]
pub struct CalibrationView {
    pub m: Vec<usize>,
    pub threshold: Vec<usize>,
    pub fidelity: Vec<f64>,
    pub best_m: usize,
    pub best_fidelity: f64,
}

pub fn calibration_view(
    target: &str,
    m_max: usize,
    contrast: f64,
    dephasing: f64,
    leakage: f64,
) -> Result<CalibrationView, String> {
    if !(1..=MAX_REPETITIONS).contains(&m_max) {
        return Err(format!("m_max must lie in 1..={MAX_REPETITIONS}"));
    }
    let tune = |m: ReadoutModel| m.with_contrast(contrast).with_noise(dephasing, leakage);
    let (model, (a, b)) = match target {
        "ab-spin" => {
            let spin = tune(ReadoutModel::pair_ab_spin());
            let preps = pair_ab_spin_preparations(&spin, &ReadoutModel::pair_ab_parity().realistic());
            (spin, preps)
        }
        "ab-parity" => {
            let parity = tune(ReadoutModel::pair_ab_parity());
            let preps = pair_ab_parity_preparations(&parity);
            (parity, preps)
        }
        "c-spin" => {
            let spin = tune(ReadoutModel::pair_c_spin());
            let preps = pair_c_spin_preparations(&spin, &ReadoutModel::pair_c_parity().realistic());
            (spin, preps)
        }
        "c-parity" => {
            let parity = tune(ReadoutModel::pair_c_parity());
            let preps = pair_c_parity_preparations(&parity);
            (parity, preps)
        }
        other => return Err(format!("unknown readout '{other}'")),
    };
    model.validate().map_err(|e| e.to_string())?;
    let rows = calibrate_exact(&model, &a, &b, m_max).map_err(|e| e.to_string())?;
    let best = rows.iter().fold(rows[0], |acc, r| if r.fidelity > acc.fidelity { *r } else { acc });
    Ok(CalibrationView {
        m: rows.iter().map(|r| r.m).collect(),
        threshold: rows.iter().map(|r| r.threshold).collect(),
        fidelity: rows.iter().map(|r| r.fidelity).collect(),
        best_m: best.m,
        best_fidelity: best.fidelity,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

/// Clock-transition envelopes |M(t)| for frequencies in Hz and rate in 1/s.
#[wasm_bindgen]
pub fn envelope(x: f64, b: f64, rate: f64, t_max: f64, points: usize) -> Result<String, JsValue> {
    to_js(envelope_view(x, b, rate, t_max, points))
}

/// Histogram of b (Hz) over `n_baths` random baths.
#[wasm_bindgen]
pub fn b_histogram(center: &str, n_baths: usize, seed: u64, bin: f64) -> Result<String, JsValue> {
    to_js(histogram_view(center, n_baths, seed, bin))
}

/// Calibration fidelity F(m) with the given readout imperfections.
#[wasm_bindgen]
pub fn calibration(target: &str, m_max: usize, contrast: f64, dephasing: f64, leakage: f64) -> Result<String, JsValue> {
    to_js(calibration_view(target, m_max, contrast, dephasing, leakage))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_limits_agree_in_the_fast_regime() {
        let v = envelope_view(2080.99, 13.9, 10.0, 300.0, 50).unwrap();
        assert_eq!(v.regime, "Fast");
        assert!((v.t2star_fast - 117.5).abs() < 0.1);
        let v = envelope_view(2080.99, 13.9, 20.0, 1200.0, 60).unwrap();
        for (f, a) in v.full.iter().zip(&v.fast) {
            assert!((f - a).abs() < 0.01 * a.max(1e-3));
        }
        assert!(envelope_view(2080.99, 13.9, 0.0, 1.0, 10).is_err());
        assert!(envelope_view(2080.99, 13.9, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn histogram_counts_every_bath() {
        let v = histogram_view("nn", 200, 3, 2.0).unwrap();
        assert_eq!(v.counts.iter().sum::<usize>(), 200);
        assert_eq!(v.bin_lo.len(), v.counts.len());
        assert!(v.mean > 0.0);
        assert!(histogram_view("ring", 200, 3, 2.0).is_err());
        assert!(histogram_view("nn", 200, 3, 0.0).is_err());
    }

    #[test]
    fn noiseless_pair_c_fidelity_grows_with_repetitions() {
        let v = calibration_view("c-parity", 8, 1.0, 0.0, 0.0).unwrap();
        let ideal = calibration_view("c-spin", 8, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(v.m, (1..=8).collect::<Vec<_>>());
        // detector errors F0, F1 remain, so only longer blocks approach 1
        assert!(v.fidelity.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(ideal.best_fidelity > 0.99);
        assert!(calibration_view("ab-spin", 0, 1.0, 0.0, 0.0).is_err());
        assert!(calibration_view("ab-spin", 5, 2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn exports_return_json() {
        let s = envelope(2080.99, 13.9, 10.0, 10.0, 5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["times"].as_array().unwrap().len(), 5);
        let s = calibration("ab-spin", 3, 0.5, 1e-3, 2e-4).unwrap();
        assert!(s.contains("\"best_m\""));
    }
}
