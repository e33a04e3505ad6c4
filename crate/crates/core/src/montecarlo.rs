//! Stochastic pseudo-spin trajectories under Ornstein-Uhlenbeck noise.
//!
//! The pseudo-spin Hamiltonian is X·Iₓ + (m_s·Z + ΔZ(t))·I_z. Each step holds
//! the noise constant and applies the exact rotation of the Bloch vector.

use crate::consts::TWO_PI;
use crate::decaymodels::{relaxation_factor, PairParams};
use crate::ensemble::{accumulate_members, Moments};
use crate::noisefield::{NoiseTrace, OuParams, OuStream};
use crate::{error::domain, Error, Result};
use serde::{Deserialize, Serialize};

pub type Bloch = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceKind {
    Ramsey,
    Echo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Z,
    /// In-plane axis through the transverse part of the initial state, which
    /// inverts the noiseless precession axis exactly.
    Transverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub kind: SequenceKind,
    pub total_time: f64,
    /// Number of equally spaced sample times in [0, total_time].
    pub n_points: usize,
    pub initial: Bloch,
    pub readout: Bloch,
    /// Axis of the instantaneous echo π pulse.
    pub echo_axis: PulseAxis,
}

impl PulseSequence {
    pub fn ramsey(total_time: f64, n_points: usize) -> Self {
        PulseSequence {
            kind: SequenceKind::Ramsey,
            total_time,
            n_points,
            initial: [0.0, 0.0, 1.0],
            readout: [0.0, 0.0, 1.0],
            echo_axis: PulseAxis::Z,
        }
    }

    pub fn echo(total_time: f64, n_points: usize) -> Self {
        PulseSequence { kind: SequenceKind::Echo, ..Self::ramsey(total_time, n_points) }
    }

    pub fn with_initial(mut self, initial: Bloch) -> Self {
        self.initial = initial;
        self.readout = initial;
        self
    }

    pub fn with_echo_axis(mut self, axis: PulseAxis) -> Self {
        self.echo_axis = axis;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.total_time];
        }
        (0..self.n_points).map(|i| self.total_time * i as f64 / (self.n_points - 1) as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.total_time >= 0.0) || !self.total_time.is_finite() {
            return domain("total_time must be finite and non-negative");
        }
        if self.n_points < 1 {
            return domain("sequence needs at least one sample time");
        }
        if norm(&self.initial) > 1.0 + 1e-12 {
            return domain("initial Bloch vector longer than 1");
        }
        if norm(&self.readout) == 0.0 {
            return domain("readout axis must be non-zero");
        }
        Ok(())
    }
}

fn norm(v: &Bloch) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: &Bloch, b: &Bloch) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Bloch, b: &Bloch) -> Bloch {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Rotates `r` about the angular-velocity vector (wx, 0, wz) for time `dt`.
#[inline]
fn precess(r: &mut Bloch, wx: f64, wz: f64, dt: f64) {
    let w = wx.hypot(wz);
    if w == 0.0 {
        return;
    }
    let (nx, nz) = (wx / w, wz / w);
    let (s, c) = (w * dt).sin_cos();
    // Rodrigues: r c + (n × r) s + n (n·r)(1 − c)
    let nr = nx * r[0] + nz * r[2];
    let cx = -nz * r[1];
    let cy = nz * r[0] - nx * r[2];
    let cz = nx * r[1];
    let k = nr * (1.0 - c);
    *r = [r[0] * c + cx * s + nx * k, r[1] * c + cy * s, r[2] * c + cz * s + nz * k];
}

fn pulse_vector(axis: PulseAxis, transverse: &Bloch) -> Bloch {
    match axis {
        PulseAxis::X => [1.0, 0.0, 0.0],
        PulseAxis::Z => [0.0, 0.0, 1.0],
        PulseAxis::Transverse => *transverse,
    }
}

/// π rotation about the unit vector `a`: r → 2(a·r)a − r.
fn pi_pulse(r: &mut Bloch, a: &Bloch) {
    let k = 2.0 * dot(a, r);
    for i in 0..3 {
        r[i] = k * a[i] - r[i];
    }
}

fn angular(p: &PairParams) -> (f64, f64) {
    (TWO_PI * p.x, TWO_PI * p.ms.value() * p.z)
}

/// Evolves `seq.initial` to `seq.total_time` using one trace sample per step.
pub fn propagate(p: &PairParams, trace: &NoiseTrace, seq: &PulseSequence) -> Result<Bloch> {
    seq.validate()?;
    if !(trace.dt > 0.0) {
        return domain("trace spacing must be positive");
    }
    let steps = (seq.total_time / trace.dt).round() as usize;
    if trace.samples.len() < steps {
        return Err(Error::TraceTooShort { needed: steps, available: trace.samples.len() });
    }
    let (wx, wz0) = angular(p);
    let a = pulse_vector(seq.echo_axis, &quadratures(p, &seq.initial).0);
    let mut r = seq.initial;
    let half = steps / 2;
    for (k, dz) in trace.samples[..steps].iter().enumerate() {
        if seq.kind == SequenceKind::Echo && k == half {
            pi_pulse(&mut r, &a);
        }
        precess(&mut r, wx, wz0 + dz, trace.dt);
    }
    if seq.kind == SequenceKind::Echo && steps == 0 {
        pi_pulse(&mut r, &a);
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_traj: usize,
    pub seed: u64,
    /// Step size; `None` picks the largest step below the caps.
    pub dt: Option<f64>,
    /// Multiply results by the analytic leakage factor.
    pub apply_relaxation: bool,
}

impl McConfig {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        McConfig { n_traj, seed, dt: None, apply_relaxation: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    /// Mean projection on the readout axis.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Magnitude of the mean coherence in the plane transverse to the
    /// noiseless precession axis.
    pub envelope: Vec<f64>,
    pub envelope_stderr: Vec<f64>,
    pub n_traj: usize,
    pub dt: f64,
}

/// Largest step size obeying dt ≤ τ_c/20 and dt ≤ 1/(20X).
pub fn dt_cap(p: &PairParams) -> f64 {
    let f = if p.x > 0.0 { p.x } else { p.z.abs().max(p.b).max(1.0) };
    (p.tau_c / 20.0).min(1.0 / (20.0 * f))
}

/// Transverse unit vectors (u, v = n̂ × u) used to form the complex coherence.
fn quadratures(p: &PairParams, initial: &Bloch) -> (Bloch, Bloch) {
    let (wx, wz) = angular(p);
    let w = wx.hypot(wz);
    let n = if w > 0.0 { [wx / w, 0.0, wz / w] } else { [0.0, 0.0, 1.0] };
    let mut u = *initial;
    let k = dot(&u, &n);
    for i in 0..3 {
        u[i] -= k * n[i];
    }
    let mut un = norm(&u);
    if un < 1e-12 {
        u = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let k = dot(&u, &n);
        for i in 0..3 {
            u[i] -= k * n[i];
        }
        un = norm(&u);
    }
    let u = [u[0] / un, u[1] / un, u[2] / un];
    (u, cross(&n, &u))
}

/// Per-time record layout: [r·u, r·v, r·readout, (r·u)(r·v)].
const CHANNELS: usize = 4;

fn record(out: &mut [f64], r: &Bloch, u: &Bloch, v: &Bloch, ro: &Bloch) {
    let a = dot(r, u);
    let b = dot(r, v);
    out[0] = a;
    out[1] = b;
    out[2] = dot(r, ro);
    out[3] = a * b;
}

fn summarise(p: &PairParams, times: Vec<f64>, m: &Moments, cfg: &McConfig, dt: f64) -> Result<DecayCurve> {
    let mean = m.mean();
    let se = m.stderr();
    let n = m.n as f64;
    let mut curve = DecayCurve {
        mean: Vec::with_capacity(times.len()),
        stderr: Vec::with_capacity(times.len()),
        envelope: Vec::with_capacity(times.len()),
        envelope_stderr: Vec::with_capacity(times.len()),
        times,
        n_traj: m.n,
        dt,
    };
    for k in 0..curve.times.len() {
        let o = k * CHANNELS;
        let (a, b) = (mean[o], mean[o + 1]);
        let mag = a.hypot(b);
        // delta method with the sample covariance of the two quadratures
        let cov = if m.n > 1 { (m.sum[o + 3] - n * a * b) / (n - 1.0) / n } else { 0.0 };
        let var = if mag > 0.0 {
            (a * a * se[o].powi(2) + b * b * se[o + 1].powi(2) + 2.0 * a * b * cov) / (mag * mag)
        } else {
            0.5 * (se[o].powi(2) + se[o + 1].powi(2))
        };
        curve.mean.push(mean[o + 2]);
        curve.stderr.push(se[o + 2]);
        curve.envelope.push(mag);
        curve.envelope_stderr.push(var.max(0.0).sqrt());
    }
    if cfg.apply_relaxation && p.x > 0.0 {
        let f = relaxation_factor(p, &curve.times)?;
        for (k, v) in f.values.iter().enumerate() {
            curve.mean[k] *= v.re;
            curve.stderr[k] *= v.re;
            curve.envelope[k] *= v.re;
            curve.envelope_stderr[k] *= v.re;
        }
    }
    Ok(curve)
}

fn prepare(p: &PairParams, seq: &PulseSequence, cfg: &McConfig) -> Result<(f64, usize)> {
    p.validate()?;
    seq.validate()?;
    if cfg.n_traj < 100 {
        return domain("ensembles need at least 100 trajectories");
    }
    let cap = dt_cap(p);
    let dt_req = cfg.dt.unwrap_or(cap);
    if !(dt_req > 0.0) {
        return domain("dt must be positive");
    }
    if dt_req > cap * (1.0 + 1e-12) {
        log::warn!("dt = {dt_req} exceeds the accuracy cap {cap}");
    }
    let spacing = if seq.n_points > 1 { seq.total_time / (seq.n_points - 1) as f64 } else { seq.total_time };
    if spacing == 0.0 {
        return Ok((dt_req, 0));
    }
    // integer number of steps between sample times
    let per = (spacing / dt_req).ceil().max(1.0) as usize;
    Ok((spacing / per as f64, per))
}

/// Ramsey free evolution sampled at `seq.times()`; every trajectory records
/// all sample times along one noise realisation.
pub fn ensemble_ramsey(p: &PairParams, seq: &PulseSequence, cfg: &McConfig) -> Result<DecayCurve> {
    let (dt, per) = prepare(p, seq, cfg)?;
    let times = seq.times();
    let n_t = times.len();
    let ou = OuParams::new(p.b, p.tau_c)?;
    let (wx, wz0) = angular(p);
    let (u, v) = quadratures(p, &seq.initial);
    let ro = seq.readout;
    let m = accumulate_members(cfg.seed, cfg.n_traj, n_t * CHANNELS, |_, rng| {
        let mut out = vec![0.0; n_t * CHANNELS];
        let mut noise = OuStream::new(&ou, dt, rng);
        let mut r = seq.initial;
        record(&mut out[..CHANNELS], &r, &u, &v, &ro);
        for k in 1..n_t {
            for _ in 0..per {
                precess(&mut r, wx, wz0 + noise.value, dt);
                noise.advance(rng);
            }
            record(&mut out[k * CHANNELS..(k + 1) * CHANNELS], &r, &u, &v, &ro);
        }
        out
    });
    summarise(p, times, &m, cfg, dt)
}

/// Hahn echo with total duration equal to each sample time; the π pulse sits
/// at the midpoint. One noise realisation is shared by all durations of a
/// trajectory.
pub fn ensemble_echo(p: &PairParams, seq: &PulseSequence, cfg: &McConfig) -> Result<DecayCurve> {
    let (dt0, _) = prepare(p, seq, cfg)?;
    let times = seq.times();
    let n_t = times.len();
    // even step counts per duration keep the pulse exactly centred
    let steps: Vec<usize> = times
        .iter()
        .map(|&t| {
            let s = (t / dt0).ceil() as usize;
            s + s % 2
        })
        .collect();
    let max_steps = *steps.iter().max().unwrap_or(&0);
    let dts: Vec<f64> = times.iter().zip(&steps).map(|(&t, &s)| if s > 0 { t / s as f64 } else { dt0 }).collect();
    let ou = OuParams::new(p.b, p.tau_c)?;
    let (wx, wz0) = angular(p);
    let (u, v) = quadratures(p, &seq.initial);
    let a = pulse_vector(seq.echo_axis, &u);
    let ro = seq.readout;
    let m = accumulate_members(cfg.seed, cfg.n_traj, n_t * CHANNELS, |_, rng| {
        let mut out = vec![0.0; n_t * CHANNELS];
        let mut noise = OuStream::new(&ou, dt0, rng);
        let mut trace = Vec::with_capacity(max_steps);
        for _ in 0..max_steps {
            trace.push(noise.value);
            noise.advance(rng);
        }
        for k in 0..n_t {
            let mut r = seq.initial;
            let s = steps[k];
            for (j, dz) in trace[..s].iter().enumerate() {
                if j == s / 2 {
                    pi_pulse(&mut r, &a);
                }
                precess(&mut r, wx, wz0 + dz, dts[k]);
            }
            if s == 0 {
                pi_pulse(&mut r, &a);
            }
            record(&mut out[k * CHANNELS..(k + 1) * CHANNELS], &r, &u, &v, &ro);
        }
        out
    });
    summarise(p, times, &m, cfg, dt0)
}
