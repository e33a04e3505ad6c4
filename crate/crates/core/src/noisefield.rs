//! Classical bath noise: the strength `b`, Ornstein-Uhlenbeck traces and
//! field estimates for external sources.

use crate::consts::{MU0, TWO_PI};
use crate::ensemble::member_rng;
use crate::geometry::{bath_seed, BathCenter, BathTemplate, LatticeConfig, SpinBath};
use crate::{error::domain, Error, Result};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    /// Stationary standard deviation, Hz.
    pub b: f64,
    /// Correlation time, s.
    pub tau_c: f64,
}

impl OuParams {
    pub fn new(b: f64, tau_c: f64) -> Result<Self> {
        let p = OuParams { b, tau_c };
        p.validate()?;
        Ok(p)
    }

    pub fn from_rate(b: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return domain("fluctuation rate must be positive");
        }
        Self::new(b, 1.0 / rate)
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.tau_c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return domain(format!("noise strength b = {} must be non-negative", self.b));
        }
        if !(self.tau_c > 0.0) {
            return domain(format!("correlation time {} must be positive", self.tau_c));
        }
        Ok(())
    }
}

/// Uniformly sampled noise in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

/// Exact one-step OU update coefficients `(decay, kick)`; the next sample is
/// `decay·z + kick·ξ` with ξ standard normal.
pub fn ou_step_coefficients(p: &OuParams, dt: f64) -> (f64, f64) {
    let decay = (-dt / p.tau_c).exp();
    let kick = TWO_PI * p.b * (-(-2.0 * dt / p.tau_c).exp_m1()).sqrt();
    (decay, kick)
}

/// Incremental OU generator used by trajectory code that cannot store a trace.
#[derive(Debug, Clone)]
pub struct OuStream {
    decay: f64,
    kick: f64,
    pub value: f64,
}

impl OuStream {
    pub fn new<R: rand::Rng>(p: &OuParams, dt: f64, rng: &mut R) -> Self {
        let (decay, kick) = ou_step_coefficients(p, dt);
        let z0: f64 = StandardNormal.sample(rng);
        OuStream { decay, kick, value: TWO_PI * p.b * z0 }
    }

    pub fn advance<R: rand::Rng>(&mut self, rng: &mut R) -> f64 {
        let xi: f64 = StandardNormal.sample(rng);
        self.value = self.decay * self.value + self.kick * xi;
        self.value
    }
}

pub fn ou_trace(p: &OuParams, dt: f64, n: usize, seed: u64) -> Result<NoiseTrace> {
    p.validate()?;
    if !(dt > 0.0) {
        return domain("dt must be positive");
    }
    if n < 1 {
        return domain("trace needs at least one sample");
    }
    let mut rng = member_rng(seed, 0);
    let mut s = OuStream::new(p, dt, &mut rng);
    let mut samples = Vec::with_capacity(n);
    samples.push(s.value);
    for _ in 1..n {
        samples.push(s.advance(&mut rng));
    }
    Ok(NoiseTrace { dt, samples, seed })
}

/// b = √(¼ Σ (A⁽¹⁾ − A⁽²⁾)²) in Hz.
pub fn b_of_bath(bath: &SpinBath) -> f64 {
    b_of_couplings(&bath.couplings_1, &bath.couplings_2)
}

pub fn b_of_couplings(a1: &[f64], a2: &[f64]) -> f64 {
    let s: f64 = a1.iter().zip(a2).map(|(x, y)| (x - y) * (x - y)).sum();
    (0.25 * s).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BDistribution {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl BDistribution {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var =
            if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        BDistribution { values, mean, std: var.sqrt() }
    }

    /// Histogram with bins `[k·width, (k+1)·width)` starting at zero.
    pub fn histogram(&self, width: f64) -> Vec<(f64, usize)> {
        let top = self.values.iter().cloned().fold(0.0, f64::max);
        let nb = (top / width).floor() as usize + 1;
        let mut h = vec![0usize; nb];
        for v in &self.values {
            h[((v / width).floor() as usize).min(nb - 1)] += 1;
        }
        h.into_iter().enumerate().map(|(k, c)| (k as f64 * width, c)).collect()
    }
}

/// b for `n_baths` independent baths around `center`.
pub fn b_distribution(
    cfg: &LatticeConfig,
    center: BathCenter,
    n_baths: usize,
    master_seed: u64,
) -> Result<BDistribution> {
    if n_baths < 100 {
        return domain("b_distribution needs at least 100 baths");
    }
    let template = BathTemplate::new(cfg, center)?;
    let values: Vec<f64> =
        (0..n_baths).into_par_iter().map(|i| b_of_bath(&template.sample(bath_seed(master_seed, i)))).collect();
    Ok(BDistribution::from_values(values))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Field of an infinite straight wire, tesla.
pub fn wire_field(current: f64, distance: f64) -> Result<f64> {
    positive("distance", distance)?;
    Ok(MU0 * current / (TWO_PI * distance))
}

/// Current that produces field `b` at `distance` from an infinite wire.
pub fn wire_current_for_field(b: f64, distance: f64) -> Result<f64> {
    positive("distance", distance)?;
    Ok(TWO_PI * distance * b / MU0)
}

/// |B(r_a) − B(r_b)| for an infinite wire.
pub fn wire_gradient(current: f64, r_a: f64, r_b: f64) -> Result<f64> {
    Ok((wire_field(current, r_a)? - wire_field(current, r_b)?).abs())
}

/// On-axis field of a cylindrical magnet of radius `radius` and length
/// `length` at distance `r` from its face.
pub fn magnet_field(r: f64, radius: f64, length: f64, br: f64) -> Result<f64> {
    positive("distance", r)?;
    positive("radius", radius)?;
    positive("length", length)?;
    let lr = length + r;
    Ok(0.5 * br * (lr / (radius * radius + lr * lr).sqrt() - r / (radius * radius + r * r).sqrt()))
}

/// B(r) − B(r + a0) for the same magnet.
pub fn magnet_gradient(r: f64, a0: f64, radius: f64, length: f64, br: f64) -> Result<f64> {
    positive("spacing", a0)?;
    Ok(magnet_field(r, radius, length, br)? - magnet_field(r + a0, radius, length, br)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bath(a1: Vec<f64>, a2: Vec<f64>) -> SpinBath {
        let n = a1.len();
        SpinBath {
            sites: vec![crate::geometry::Vector3::meters(1.0, 0.0, 0.0); n],
            couplings_1: a1,
            couplings_2: a2,
            seed: 0,
            n_drawn: n,
        }
    }

    #[test]
    fn b_examples() {
        assert_eq!(b_of_bath(&bath(vec![], vec![])), 0.0);
        assert_eq!(b_of_bath(&bath(vec![20.0], vec![20.0])), 0.0);
        assert!((b_of_bath(&bath(vec![6.0, 1.0], vec![0.0, 9.0])) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn zero_noise_trace() {
        let t = ou_trace(&OuParams::new(0.0, 0.1).unwrap(), 1e-3, 100, 5).unwrap();
        assert!(t.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trace_rejects_bad_input() {
        let p = OuParams::new(1.0, 0.1).unwrap();
        assert!(ou_trace(&p, 0.0, 10, 1).is_err());
        assert!(ou_trace(&p, 1e-3, 0, 1).is_err());
        assert!(OuParams::new(-1.0, 0.1).is_err());
        assert!(OuParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn stationary_variance_and_autocorrelation() {
        let p = OuParams::new(3.0, 0.01).unwrap();
        let dt = 1e-3;
        let t = ou_trace(&p, dt, 100_000, 17).unwrap();
        let n = t.samples.len() as f64;
        let mean = t.samples.iter().sum::<f64>() / n;
        let var = t.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let target = (TWO_PI * 3.0f64).powi(2);
        assert!((var / target - 1.0).abs() < 0.05, "{}", var / target);
        let lag = 10;
        let ac = t.samples.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum::<f64>() / (n - lag as f64);
        assert!((ac / var - (-1.0f64).exp()).abs() < 0.1 * (-1.0f64).exp(), "{}", ac / var);
    }

    #[test]
    fn step_coefficients_are_exact_formulas() {
        let p = OuParams::new(2.0, 0.5).unwrap();
        let (d, k) = ou_step_coefficients(&p, 1e-3);
        assert_eq!(d, (-1e-3f64 / 0.5).exp());
        let expected = TWO_PI * 2.0 * (1.0 - (-2e-3f64 / 0.5).exp()).sqrt();
        assert!((k - expected).abs() < 1e-12 * expected);
        // stationarity: decay² var + kick² = var
        let var = (TWO_PI * 2.0f64).powi(2);
        assert!((d * d * var + k * k - var).abs() < 1e-12 * var);
    }

    #[test]
    fn wire_examples() {
        let i = wire_current_for_field(1e-5, 10e-6).unwrap();
        assert!((i - 5e-4).abs() < 1e-9);
        let g = wire_gradient(1e-4, 10e-6, 10e-6 + 1e-9).unwrap();
        assert!(g > 1e-11 && g < 1e-9, "{g}");
        assert_eq!(wire_gradient(1e-4, 1e-5, 1e-5).unwrap(), 0.0);
        assert!(wire_field(1.0, 0.0).is_err());
    }

    #[test]
    fn magnet_examples() {
        let b = magnet_field(0.01, 5e-3, 5e-3, 1.5).unwrap();
        assert!((b - 0.04).abs() < 0.004, "{b}");
        let g = magnet_gradient(0.01, 1e-9, 5e-3, 5e-3, 1.5).unwrap();
        assert!(g > 1e-9 && g < 1e-7, "{g}");
        assert!(magnet_field(1e6, 5e-3, 5e-3, 1.5).unwrap() < 1e-15);
        assert!(magnet_field(-1.0, 5e-3, 5e-3, 1.5).is_err());
    }

    #[test]
    fn distribution_needs_enough_baths() {
        assert!(b_distribution(&LatticeConfig::default(), BathCenter::Single, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn b_invariant_under_swap_relabel_and_dfs(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 0..20),
            extra in -50.0f64..50.0,
            rot in 0usize..20,
        ) {
            let a1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let a2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let b = b_of_couplings(&a1, &a2);
            prop_assert!((b - b_of_couplings(&a2, &a1)).abs() <= 1e-12 * b.max(1.0));
            let mut r1 = a1.clone();
            let mut r2 = a2.clone();
            if !r1.is_empty() {
                let k = rot % r1.len();
                r1.rotate_left(k);
                r2.rotate_left(k);
            }
            prop_assert!((b - b_of_couplings(&r1, &r2)).abs() <= 1e-12 * b.max(1.0));
            r1.push(extra);
            r2.push(extra);
            prop_assert!((b - b_of_couplings(&r1, &r2)).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn ou_one_step_conditional_moments(z in -100.0f64..100.0, seed in 0u64..1000) {
            // one step from a fixed value equals decay·z + kick·ξ with the same ξ
            let p = OuParams::new(5.0, 0.2).unwrap();
            let dt = 1e-4;
            let (d, k) = ou_step_coefficients(&p, dt);
            let mut rng = member_rng(seed, 0);
            let mut s = OuStream { decay: d, kick: k, value: z };
            let mut rng2 = rng.clone();
            let next = s.advance(&mut rng);
            let xi: f64 = StandardNormal.sample(&mut rng2);
            prop_assert_eq!(next, d * z + k * xi);
        }
    }
}
