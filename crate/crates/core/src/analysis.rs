//! Spectra and the least-squares fits used to extract frequencies, dephasing
//! times and decay exponents from simulated or measured curves.
//!
//! Every fit separates linear amplitudes from nonlinear shape parameters: for
//! fixed shape the amplitudes follow from linear least squares, and only the
//! shape is searched with a Nelder–Mead simplex from a deterministic grid of
//! starting points.

use crate::linalg::{invert_real, C64};
use crate::montecarlo::DecayCurve;
use crate::{error::domain, Error, Result};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

/// Spectrum on the standard FFT frequency layout (non-negative frequencies
/// first, then negative ones).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<C64>,
    pub dt: f64,
}

impl Spectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Non-negative frequencies and magnitudes, ascending.
    pub fn positive(&self) -> (Vec<f64>, Vec<f64>) {
        self.freqs.iter().zip(&self.values).filter(|(f, _)| **f >= 0.0).map(|(f, v)| (*f, v.norm())).unzip()
    }
}

fn fftfreq(n: usize, dt: f64) -> Vec<f64> {
    let half = n.div_ceil(2);
    (0..n)
        .map(|k| {
            let k = if k < half { k as f64 } else { k as f64 - n as f64 };
            k / (n as f64 * dt)
        })
        .collect()
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return domain("need at least two samples");
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return domain("times must increase");
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return domain("sampling must be uniform");
        }
    }
    Ok(dt)
}

/// Unnormalised forward transform, X_k = Σ x_n exp(−2πi kn/N).
pub fn dft_complex(times: &[f64], values: &[C64]) -> Result<Spectrum> {
    if times.len() != values.len() {
        return domain("times and values differ in length");
    }
    let dt = uniform_step(times)?;
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    Ok(Spectrum { freqs: fftfreq(buf.len(), dt), values: buf, dt })
}

pub fn dft(times: &[f64], values: &[f64]) -> Result<Spectrum> {
    let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
    dft_complex(times, &v)
}

/// Spectrum of the mean readout of a simulated curve.
pub fn dft_curve(curve: &DecayCurve) -> Result<Spectrum> {
    dft(&curve.times, &curve.mean)
}

/// Inverse of [`dft_complex`].
pub fn idft(spectrum: &Spectrum) -> Vec<C64> {
    let mut buf = spectrum.values.clone();
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|v| v / n as f64).collect()
}

/// Spectrum of the mean-subtracted signal after zero padding by `factor`.
pub fn padded_spectrum(times: &[f64], values: &[f64], factor: usize) -> Result<Spectrum> {
    let dt = uniform_step(times)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let n = values.len() * factor.max(1);
    let mut padded: Vec<f64> = values.iter().map(|v| v - mean).collect();
    padded.resize(n, 0.0);
    let t: Vec<f64> = (0..n).map(|i| times[0] + i as f64 * dt).collect();
    dft(&t, &padded)
}

pub const ZERO_PADDING: usize = 4;

/// Frequencies of the `n` largest local maxima of a magnitude curve.
fn top_peaks(freqs: &[f64], mags: &[f64], n: usize) -> Vec<f64> {
    let mut peaks: Vec<(f64, f64)> = (1..mags.len().saturating_sub(1))
        .filter(|&i| mags[i] >= mags[i - 1] && mags[i] >= mags[i + 1] && mags[i] > 0.0)
        .map(|i| (mags[i], freqs[i]))
        .collect();
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    peaks.into_iter().take(n).map(|p| p.1).collect()
}

pub fn t2star_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain("spectral width must be positive");
    }
    Ok(1.0 / (SQRT_2 * PI * sigma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// One-sigma uncertainties; infinite when the curvature is singular.
    pub sigmas: Vec<f64>,
    /// Root of the residual sum of squares.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Amplitudes vanish, so shape parameters are undefined.
    pub degenerate: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.sigmas[i])
    }
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            value: f64,
            sigma: Option<f64>,
        }
        let mut map = s.serialize_map(Some(self.names.len() + 4))?;
        for ((n, v), e) in self.names.iter().zip(&self.values).zip(&self.sigmas) {
            map.serialize_entry(n, &Entry { value: *v, sigma: e.is_finite().then_some(*e) })?;
        }
        map.serialize_entry("residual_norm", &self.residual_norm)?;
        map.serialize_entry("converged", &self.converged)?;
        map.serialize_entry("iterations", &self.iterations)?;
        map.serialize_entry("degenerate", &self.degenerate)?;
        map.end()
    }
}

struct Simplex {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead with standard coefficients and relative step `scale`.
fn nelder_mead(obj: &dyn Fn(&[f64]) -> f64, x0: &[f64], scale: &[f64], max_iter: usize) -> Simplex {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += scale[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| obj(p)).collect();
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        it += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread_f = (vals[n] - vals[0]).abs();
        let spread_x = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).zip(scale).map(|((a, b), s)| (a - b).abs() / s.abs()))
            .fold(0.0, f64::max);
        if spread_f <= 1e-15 * (vals[0].abs() + 1e-300) + 1e-300 || spread_x < 1e-10 {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = obj(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = obj(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let f = obj(&x);
                (x, f)
            } else {
                let x = along(0.5);
                let f = obj(&x);
                (x, f)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    vals[i] = obj(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { x: pts[best].clone(), f: vals[best], iterations: it, converged }
}

/// Linear least squares for `cols` (each a column over samples) against `y`.
fn linear_lsq(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let l = cols.len();
    let mut g = vec![vec![0.0; l]; l];
    let mut r = vec![0.0; l];
    for i in 0..l {
        for j in 0..=i {
            let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            g[i][j] = v;
            g[j][i] = v;
        }
        r[i] = cols[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    // tiny ridge keeps collinear columns solvable
    let tr: f64 = (0..l).map(|i| g[i][i]).sum::<f64>().max(1e-300);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += 1e-14 * tr;
    }
    let inv = invert_real(&g)?;
    Some((0..l).map(|i| (0..l).map(|j| inv[i][j] * r[j]).sum()).collect())
}

fn ssr(cols: &[Vec<f64>], coef: &[f64], y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(k, yk)| {
            let m: f64 = cols.iter().zip(coef).map(|(c, a)| c[k] * a).sum();
            (yk - m).powi(2)
        })
        .sum()
}

/// Basis columns for given nonlinear parameters, `None` when out of range.
type BasisFn<'b> = dyn Fn(&[f64]) -> Option<Vec<Vec<f64>>> + Sync + 'b;

/// Separable problem: nonlinear parameters θ define basis columns.
struct Separable<'a> {
    y: &'a [f64],
    basis: &'a BasisFn<'a>,
}

impl Separable<'_> {
    fn objective(&self, theta: &[f64]) -> f64 {
        match (self.basis)(theta) {
            Some(cols) => match linear_lsq(&cols, self.y) {
                Some(c) => {
                    let v = ssr(&cols, &c, self.y);
                    if v.is_finite() {
                        v
                    } else {
                        f64::INFINITY
                    }
                }
                None => f64::INFINITY,
            },
            None => f64::INFINITY,
        }
    }

    fn coefficients(&self, theta: &[f64]) -> Option<Vec<f64>> {
        linear_lsq(&(self.basis)(theta)?, self.y)
    }

    /// Best of a multi-start search followed by a restart from the winner.
    fn solve(&self, starts: &[Vec<f64>], scale: &[f64]) -> Simplex {
        let obj = |t: &[f64]| self.objective(t);
        let runs: Vec<Simplex> = starts.par_iter().map(|s| nelder_mead(&obj, s, scale, 4000)).collect();
        let total: usize = runs.iter().map(|r| r.iterations).sum();
        let best = runs.into_iter().min_by(|a, b| a.f.total_cmp(&b.f)).unwrap();
        let small: Vec<f64> = scale.iter().map(|s| s * 1e-3).collect();
        let polished = nelder_mead(&obj, &best.x, &small, 4000);
        let winner = if polished.f <= best.f { polished } else { best };
        Simplex { iterations: total + winner.iterations, ..winner }
    }
}

/// Covariance s²(JᵀJ)⁻¹ of a full model with respect to its reported parameters.
fn uncertainties(model: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let k = p.len();
    if n <= k {
        return vec![f64::INFINITY; k];
    }
    let base = model(p);
    let s2 = base.iter().zip(y).map(|(m, v)| (v - m).powi(2)).sum::<f64>() / (n - k) as f64;
    let jac: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let h = 1e-6 * p[i].abs().max(1e-6);
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[i] += h;
            lo[i] -= h;
            let (a, b) = (model(&hi), model(&lo));
            a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        })
        .collect();
    let jtj: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum()).collect()).collect();
    match invert_real(&jtj) {
        Some(inv) => (0..k).map(|i| (s2 * inv[i][i]).max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; k],
    }
}

/// Gradient check on the profiled objective in log-scaled coordinates.
fn gradient_small(obj: &dyn Fn(&[f64]) -> f64, theta: &[f64], scale: &[f64], y: &[f64]) -> bool {
    let f0 = obj(theta);
    let norm_y: f64 = y.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    let g2: f64 = (0..theta.len())
        .map(|i| {
            let h = 1e-5 * scale[i];
            let mut a = theta.to_vec();
            let mut b = theta.to_vec();
            a[i] += h;
            b[i] -= h;
            ((obj(&a) - obj(&b)) / (2.0 * h) * scale[i]).powi(2)
        })
        .sum();
    g2.sqrt() <= 1e-6 * norm_y + 1e-3 * f0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CosGuess {
    /// Initial tone frequencies (Hz); taken from the spectrum when empty.
    pub freqs: Vec<f64>,
    /// Initial decay time (s); a grid over the record length when absent.
    pub t: Option<f64>,
}

fn stretched(t: f64, tt: f64, n: f64) -> f64 {
    (-(t.abs() / tt).powf(n)).exp()
}

/// Fits a + e^{−(t/T)ⁿ} Σ Aᵢ cos(2π fᵢ t + φᵢ) with one or two tones.
pub fn fit_stretched_cos(times: &[f64], y: &[f64], n_tones: usize, guess: &CosGuess) -> Result<FitResult> {
    if !(1..=2).contains(&n_tones) {
        return domain("one or two tones are supported");
    }
    if times.len() != y.len() {
        return domain("times and values differ in length");
    }
    let dt = uniform_step(times)?;
    if times.len() < 3 + 3 * n_tones + 2 {
        return Err(Error::UnderDetermined(format!("{} points for {} parameters", times.len(), 2 + 3 * n_tones + 1)));
    }
    let mut names = vec!["a", "T", "n"];
    let tone_names = [["A", "f_A", "phi_A"], ["B", "f_B", "phi_B"]];
    for tn in tone_names.iter().take(n_tones) {
        names.extend_from_slice(tn);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let span = times[times.len() - 1] - times[0];
    if spread <= 1e-12 * mean.abs().max(1.0) {
        let mut values = vec![mean, guess.t.unwrap_or(span), 1.0];
        for k in 0..n_tones {
            values.extend_from_slice(&[0.0, guess.freqs.get(k).copied().unwrap_or(0.0), 0.0]);
        }
        let mut sigmas = vec![f64::INFINITY; values.len()];
        sigmas[0] = 0.0;
        return Ok(FitResult {
            names,
            values,
            sigmas,
            residual_norm: 0.0,
            converged: true,
            iterations: 0,
            degenerate: true,
        });
    }
    let freqs = if guess.freqs.len() >= n_tones {
        guess.freqs[..n_tones].to_vec()
    } else {
        let spec = padded_spectrum(times, y, ZERO_PADDING)?;
        let (f, m) = spec.positive();
        let mut peaks = top_peaks(&f, &m, n_tones);
        while peaks.len() < n_tones {
            peaks.push(peaks.last().copied().unwrap_or(1.0 / span) * 1.1);
        }
        peaks
    };
    let f_max = freqs.iter().cloned().fold(0.0, f64::max);
    if f_max * dt > 1.0 / 8.0 {
        return domain("fewer than 8 samples per oscillation period");
    }
    let t0 = times[0];
    // θ = [ln T, ln n, f_1, (f_2)]; columns: 1, e cos, e sin per tone
    let basis = move |th: &[f64]| -> Option<Vec<Vec<f64>>> {
        let (tt, n) = (th[0].exp(), th[1].exp());
        if !(tt.is_finite() && n.is_finite() && n < 20.0) {
            return None;
        }
        let env: Vec<f64> = times.iter().map(|t| stretched(t - t0, tt, n)).collect();
        let mut cols = vec![vec![1.0; times.len()]];
        for &f in &th[2..] {
            cols.push(times.iter().zip(&env).map(|(t, e)| e * (2.0 * PI * f * t).cos()).collect());
            cols.push(times.iter().zip(&env).map(|(t, e)| e * (2.0 * PI * f * t).sin()).collect());
        }
        Some(cols)
    };
    let problem = Separable { y, basis: &basis };
    let t_grid: Vec<f64> = match guess.t {
        Some(t) => vec![t, 0.5 * t, 2.0 * t],
        None => vec![0.25 * span, 0.6 * span, 1.5 * span],
    };
    let mut starts = Vec::new();
    for &tt in &t_grid {
        for n in [1.0f64, 2.0] {
            let mut s = vec![tt.ln(), n.ln()];
            s.extend_from_slice(&freqs);
            starts.push(s);
        }
    }
    let df = 0.25 / span;
    let mut scale = vec![0.3, 0.3];
    scale.extend(std::iter::repeat_n(df, n_tones));
    let best = problem.solve(&starts, &scale);
    let coef = problem.coefficients(&best.x).ok_or_else(|| Error::Numerical("singular design".into()))?;
    let mut values = vec![coef[0], best.x[0].exp(), best.x[1].exp()];
    for k in 0..n_tones {
        let (c, s) = (coef[1 + 2 * k], coef[2 + 2 * k]);
        // c cos + s sin = A cos(ωt + φ) with A cos φ = c, A sin φ = −s
        values.extend_from_slice(&[c.hypot(s), best.x[2 + k], (-s).atan2(c)]);
    }
    let model = move |p: &[f64]| -> Vec<f64> {
        times
            .iter()
            .map(|t| {
                let e = stretched(t - t0, p[1], p[2]);
                p[0] + e
                    * (0..n_tones)
                        .map(|k| p[3 + 3 * k] * (2.0 * PI * p[4 + 3 * k] * t + p[5 + 3 * k]).cos())
                        .sum::<f64>()
            })
            .collect()
    };
    let amp_total: f64 = (0..n_tones).map(|k| values[3 + 3 * k]).sum();
    let degenerate = amp_total <= 1e-9 * spread;
    let sigmas = uncertainties(&model, &values, y);
    let obj = |t: &[f64]| problem.objective(t);
    let converged = best.converged && gradient_small(&obj, &best.x, &scale, y);
    Ok(FitResult {
        names,
        values,
        sigmas,
        residual_norm: best.f.sqrt(),
        converged,
        iterations: best.iterations,
        degenerate,
    })
}

/// Fits a + Σ Aᵢ exp(−(f − fᵢ)²/2σᵢ²) to a real spectrum.
pub fn fit_gaussian_peaks(freqs: &[f64], mags: &[f64], n_peaks: usize) -> Result<FitResult> {
    if n_peaks == 0 {
        return domain("need at least one peak");
    }
    if freqs.len() != mags.len() {
        return domain("frequency and magnitude arrays differ in length");
    }
    if freqs.len() < 1 + 3 * n_peaks + 1 {
        return Err(Error::UnderDetermined(format!("{} points for {} peaks", freqs.len(), n_peaks)));
    }
    let df = uniform_step(freqs)?;
    let centers = top_peaks(freqs, mags, n_peaks);
    if centers.len() < n_peaks {
        return Err(Error::Numerical(format!("found {} of {} peaks", centers.len(), n_peaks)));
    }
    let basis = move |th: &[f64]| -> Option<Vec<Vec<f64>>> {
        let mut cols = vec![vec![1.0; freqs.len()]];
        for k in 0..n_peaks {
            let (c, s) = (th[2 * k], th[2 * k + 1].exp());
            if !s.is_finite() || s == 0.0 {
                return None;
            }
            cols.push(freqs.iter().map(|f| (-(f - c).powi(2) / (2.0 * s * s)).exp()).collect());
        }
        Some(cols)
    };
    let problem = Separable { y: mags, basis: &basis };
    let mut starts = Vec::new();
    for width in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut s = Vec::new();
        for &c in &centers {
            s.extend_from_slice(&[c, (width * df).ln()]);
        }
        starts.push(s);
    }
    let scale: Vec<f64> = (0..n_peaks).flat_map(|_| [df, 0.3]).collect();
    let best = problem.solve(&starts, &scale);
    let coef = problem.coefficients(&best.x).ok_or_else(|| Error::Numerical("singular design".into()))?;
    const PEAK_NAMES: [[&str; 3]; 4] =
        [["A_1", "f_1", "sigma_1"], ["A_2", "f_2", "sigma_2"], ["A_3", "f_3", "sigma_3"], ["A_4", "f_4", "sigma_4"]];
    if n_peaks > PEAK_NAMES.len() {
        return domain("at most four peaks are supported");
    }
    let mut names = vec!["a"];
    let mut values = vec![coef[0]];
    for k in 0..n_peaks {
        names.extend_from_slice(&PEAK_NAMES[k]);
        values.extend_from_slice(&[coef[1 + k], best.x[2 * k], best.x[2 * k + 1].exp()]);
    }
    let model = move |p: &[f64]| -> Vec<f64> {
        freqs
            .iter()
            .map(|f| {
                p[0] + (0..n_peaks)
                    .map(|k| p[1 + 3 * k] * (-(f - p[2 + 3 * k]).powi(2) / (2.0 * p[3 + 3 * k].powi(2))).exp())
                    .sum::<f64>()
            })
            .collect()
    };
    let sigmas = uncertainties(&model, &values, mags);
    let obj = |t: &[f64]| problem.objective(t);
    let converged = best.converged && gradient_small(&obj, &best.x, &scale, mags);
    let degenerate = (0..n_peaks).all(|k| values[1 + 3 * k].abs() <= 1e-12);
    Ok(FitResult {
        names,
        values,
        sigmas,
        residual_norm: best.f.sqrt(),
        converged,
        iterations: best.iterations,
        degenerate,
    })
}

/// Fits exp(−(t/T)ⁿ).
pub fn fit_stretched_exp(times: &[f64], y: &[f64]) -> Result<FitResult> {
    if times.len() != y.len() {
        return domain("times and values differ in length");
    }
    if times.len() < 4 {
        return Err(Error::UnderDetermined(format!("{} points, need at least 4", times.len())));
    }
    if times.iter().chain(y).any(|v| !v.is_finite()) || times.iter().any(|&t| t < 0.0) {
        return domain("times must be finite and non-negative");
    }
    let obj = |th: &[f64]| -> f64 {
        let (tt, n) = (th[0].exp(), th[1].exp());
        if !(tt.is_finite() && n.is_finite() && n < 50.0) {
            return f64::INFINITY;
        }
        times.iter().zip(y).map(|(t, v)| (v - stretched(*t, tt, n)).powi(2)).sum()
    };
    let t_max = times.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut starts = Vec::new();
    for tt in [0.1 * t_max, 0.5 * t_max, 2.0 * t_max] {
        for n in [0.3f64, 1.0, 2.0] {
            starts.push(vec![tt.ln(), n.ln()]);
        }
    }
    let scale = [0.5, 0.3];
    let runs: Vec<Simplex> = starts.par_iter().map(|s| nelder_mead(&obj, s, &scale, 4000)).collect();
    let total: usize = runs.iter().map(|r| r.iterations).sum();
    let best = runs.into_iter().min_by(|a, b| a.f.total_cmp(&b.f)).unwrap();
    let polished = nelder_mead(&obj, &best.x, &[5e-4, 3e-4], 4000);
    let best = if polished.f <= best.f { polished } else { best };
    let values = vec![best.x[0].exp(), best.x[1].exp()];
    let model = |p: &[f64]| -> Vec<f64> { times.iter().map(|t| stretched(*t, p[0], p[1])).collect() };
    let sigmas = uncertainties(&model, &values, y);
    let converged = best.converged && gradient_small(&obj, &best.x, &scale, y);
    Ok(FitResult {
        names: vec!["T", "n"],
        values,
        sigmas,
        residual_norm: best.f.sqrt(),
        converged,
        iterations: total + best.iterations,
        degenerate: false,
    })
}
