//! Closed-form pseudo-spin coherence envelopes for the Ornstein-Uhlenbeck bath.
//!
//! Public inputs are in Hz; every formula converts to angular units first.

use crate::consts::TWO_PI;
use crate::linalg::C64;
use crate::{error::domain, Result};
use serde::{Deserialize, Serialize};

/// NV electron projection during free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ms {
    Zero,
    MinusOne,
}

impl Ms {
    pub fn value(self) -> f64 {
        match self {
            Ms::Zero => 0.0,
            Ms::MinusOne => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// Intra-pair coupling, Hz.
    pub x: f64,
    /// Hyperfine difference, Hz.
    pub z: f64,
    /// Noise strength, Hz.
    pub b: f64,
    /// Bath correlation time, s.
    pub tau_c: f64,
    pub ms: Ms,
}

impl PairParams {
    pub fn clock(x: f64, b: f64, tau_c: f64) -> Self {
        PairParams { x, z: 0.0, b, tau_c, ms: Ms::Zero }
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.tau_c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_c > 0.0) {
            return domain("tau_c must be positive");
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return domain("b must be non-negative");
        }
        if !(self.x >= 0.0) || !self.x.is_finite() || !self.z.is_finite() {
            return domain("X must be non-negative and Z finite");
        }
        Ok(())
    }

    /// κ = b²/X in angular units (rad/s).
    fn kappa(&self) -> f64 {
        TWO_PI * self.b * self.b / self.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    QuasiStatic,
    Slow,
    Fast,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    pub regime: Option<Regime>,
}

impl Envelope {
    fn real(times: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Envelope { times: times.to_vec(), values: times.iter().map(|&t| C64::new(f(t), 0.0)).collect(), regime: None }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Ramsey signal ½ Re[M(t) e^{iXt}].
    pub fn signal(&self, x_hz: f64) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&t, m)| 0.5 * (m * C64::from_polar(1.0, TWO_PI * x_hz * t)).re)
            .collect()
    }

    /// Point-wise product with a real envelope on the same grid.
    pub fn times_real(mut self, other: &Envelope) -> Self {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v *= o.re;
        }
        self
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return domain("times must be finite and non-negative");
    }
    Ok(())
}

/// expm1(z)/z for complex z, accurate near zero.
fn expm1_over(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        C64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// General m_s = 0 solution for OU noise of arbitrary correlation time.
///
/// [M]⁻² is evaluated in logarithmic form so that the exponentially growing
/// cosh/sinh terms never overflow, and the complex phase is unwrapped in time
/// from M(0) = 1.
pub fn envelope_full(p: &PairParams, times: &[f64]) -> Result<Envelope> {
    p.validate()?;
    check_times(times)?;
    if p.ms != Ms::Zero {
        return domain("envelope_full describes free evolution in m_s = 0");
    }
    if !(p.x > 0.0) {
        return domain("envelope_full requires X > 0");
    }
    let r = p.rate();
    let kappa = p.kappa();
    let pp = C64::new(r * r, -2.0 * kappa * r).sqrt();
    let q = C64::new(r, -kappa);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut values = vec![C64::new(1.0, 0.0); times.len()];
    let mut prev_arg = 0.0f64;
    for &k in &order {
        let t = times[k];
        let e = (pp * (-2.0 * t)).exp();
        let bracket = (C64::new(1.0, 0.0) + e) * 0.5 + q * t * expm1_over(pp * (-2.0 * t));
        // continuity of arg(bracket), which equals 0 at t = 0
        let mut arg = bracket.arg();
        arg += TWO_PI * ((prev_arg - arg) / TWO_PI).round();
        prev_arg = arg;
        let ln_s = (pp - r) * t + C64::new(bracket.norm().ln(), arg);
        values[k] = (ln_s * -0.5).exp();
    }
    Ok(Envelope { times: times.to_vec(), values, regime: Some(classify_regime(p, &RegimeThresholds::default())) })
}

/// Static-noise limit of the clock transition, (1 + (b²t/X)²)^(−1/4).
pub fn envelope_quasistatic_clock(p: &PairParams, times: &[f64]) -> Result<Envelope> {
    p.validate()?;
    check_times(times)?;
    if !(p.x > 0.0) {
        return domain("quasi-static clock envelope requires X > 0");
    }
    let kappa = p.kappa();
    let mut e = Envelope::real(times, |t| (1.0 + (kappa * t).powi(2)).powf(-0.25));
    e.regime = Some(Regime::QuasiStatic);
    Ok(e)
}

/// Long-time slow-bath decay exp(−bt√(R/4X)).
pub fn envelope_slow(p: &PairParams, times: &[f64]) -> Result<Envelope> {
    p.validate()?;
    check_times(times)?;
    if !(p.x > 0.0) {
        return domain("slow envelope requires X > 0");
    }
    let r = p.rate();
    if r > 0.1 * p.kappa() {
        log::warn!("slow-bath envelope used outside R ≪ b²/X (R = {r}, b²/X = {})", p.kappa());
    }
    let rate = TWO_PI * p.b * (r / (4.0 * TWO_PI * p.x)).sqrt();
    let mut e = Envelope::real(times, |t| (-rate * t).exp());
    e.regime = Some(Regime::Slow);
    Ok(e)
}

/// Motional-narrowing envelope exp(i b²t/2X − b⁴t/4X²R).
pub fn envelope_fast(p: &PairParams, times: &[f64]) -> Result<Envelope> {
    p.validate()?;
    check_times(times)?;
    if !(p.x > 0.0) {
        return domain("fast envelope requires X > 0");
    }
    let r = p.rate();
    let kappa = p.kappa();
    if r < 10.0 * kappa {
        log::warn!("fast-bath envelope used outside R ≫ b²/X (R = {r}, b²/X = {kappa})");
    }
    let values = times.iter().map(|&t| C64::new(-kappa * kappa * t / (4.0 * r), kappa * t / 2.0).exp()).collect();
    Ok(Envelope { times: times.to_vec(), values, regime: Some(Regime::Fast) })
}

/// Static Gaussian dephasing exp(−(2π·scale·b)²t²/2).
pub fn envelope_gaussian_static(b: f64, scale: f64, times: &[f64]) -> Result<Envelope> {
    if !(b >= 0.0) || !scale.is_finite() {
        return domain("b must be non-negative");
    }
    check_times(times)?;
    let w = TWO_PI * b * scale;
    let mut e = Envelope::real(times, |t| (-(w * t).powi(2) / 2.0).exp());
    e.regime = Some(Regime::QuasiStatic);
    Ok(e)
}

/// Sensitivity Z/√(X² + Z²) of the detuned m_s = −1 pseudo-spin to ΔZ.
pub fn detuned_clock_scale(x: f64, z: f64) -> f64 {
    let w = x.hypot(z);
    if w == 0.0 {
        1.0
    } else {
        z.abs() / w
    }
}

/// 1/e time of [`envelope_gaussian_static`], √2/(2π·scale·b).
pub fn t2star_gaussian(b: f64, scale: f64) -> f64 {
    2f64.sqrt() / (TWO_PI * b * scale)
}

/// T₂* = 4X²R/b⁴ of the motional-narrowing envelope.
pub fn t2star_fast(p: &PairParams) -> f64 {
    let k = p.kappa();
    4.0 * p.rate() / (k * k)
}

/// Fluctuation rate implied by a motional-narrowing T₂*.
pub fn rate_from_fast_t2star(b: f64, x: f64, t2star: f64) -> f64 {
    let k = TWO_PI * b * b / x;
    k * k * t2star / 4.0
}

/// Clock frequency shift b²/(2X) in Hz produced by fast noise.
pub fn fast_frequency_shift(b: f64, x: f64) -> f64 {
    b * b / (2.0 * x)
}

/// Leakage out of the pseudo-spin subspace, exp(−b²Rt/2X²).
pub fn relaxation_factor(p: &PairParams, times: &[f64]) -> Result<Envelope> {
    p.validate()?;
    check_times(times)?;
    if !(p.x > 0.0) {
        return domain("relaxation factor requires X > 0");
    }
    let rate = p.b * p.b * p.rate() / (2.0 * p.x * p.x);
    Ok(Envelope::real(times, |t| (-rate * t).exp()))
}

/// 1/e time 2X²/(b²R) of [`relaxation_factor`].
pub fn t2star_relaxation(p: &PairParams) -> f64 {
    2.0 * p.x * p.x / (p.b * p.b * p.rate())
}

/// Fluctuation rate implied by a relaxation-limited T₂*.
pub fn rate_from_relaxation_t2star(b: f64, x: f64, t2star: f64) -> f64 {
    2.0 * x * x / (b * b * t2star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Fast when R exceeds this multiple of the noise scale.
    pub fast: f64,
    /// Slow when R is below this multiple of the noise scale.
    pub slow: f64,
    /// Quasi-static when additionally the static T₂* is below this fraction of τ_c.
    pub static_margin: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds { fast: 10.0, slow: 0.1, static_margin: 0.1 }
    }
}

/// Compares the bath rate R with the pseudo-spin noise scale.
///
/// In m_s = 0 the scale is b²/X and the static decay time is the 1/e time of
/// the quasi-static clock envelope. In m_s = −1 with Z ≠ 0 the noise acts to
/// first order with strength 2π·b·Z/√(X²+Z²).
pub fn classify_regime(p: &PairParams, th: &RegimeThresholds) -> Regime {
    let r = p.rate();
    let (scale, t_static) = if p.ms == Ms::MinusOne && p.z != 0.0 {
        let s = detuned_clock_scale(p.x, p.z);
        (TWO_PI * p.b * s, t2star_gaussian(p.b, s))
    } else if p.x > 0.0 {
        let k = p.kappa();
        // (1 + u²)^(-1/4) = 1/e at u = √(e⁴ − 1)
        (k, (4f64.exp() - 1.0).sqrt() / k)
    } else {
        (TWO_PI * p.b, t2star_gaussian(p.b, 1.0))
    };
    if r > th.fast * scale {
        Regime::Fast
    } else if t_static < th.static_margin * p.tau_c {
        Regime::QuasiStatic
    } else if r < th.slow * scale {
        Regime::Slow
    } else {
        Regime::Intermediate
    }
}
