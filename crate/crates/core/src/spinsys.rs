//! NV (spin-1) plus two ¹³C Hamiltonian and the electron-mediated shift of
//! the pair coupling.
//!
//! Basis index = 4·nv + 2·c₁ + c₂ with nv ∈ {+1, 0, −1} ↦ {0, 1, 2} and carbon
//! states {↑, ↓} ↦ {0, 1}. Energies are ordinary frequencies in Hz; the
//! Hamiltonian is linear in every coupling, so no angular conversion is needed
//! for the spectrum.

use crate::consts::{GAMMA_C, GAMMA_E, LARMOR_HZ, TWO_PI, ZERO_FIELD_SPLITTING};
use crate::linalg::{eigh, CMatrix, EigenDecomposition, C64};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub const DIM: usize = 12;

/// Hyperfine tensor components (A∥, A⊥) in Hz.
pub type Hyperfine = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub d: f64,
    pub b_par: f64,
    pub b_perp: f64,
    pub hyperfine: [Hyperfine; 2],
    pub x: f64,
    pub gamma_e: f64,
    pub gamma_c: f64,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        HamiltonianSpec {
            d: ZERO_FIELD_SPLITTING,
            b_par: field_for_larmor(LARMOR_HZ),
            b_perp: 0.0,
            hyperfine: [(0.0, 0.0); 2],
            x: 2062.37,
            gamma_e: GAMMA_E,
            gamma_c: GAMMA_C,
        }
    }
}

/// Field along the NV axis that gives a ¹³C Larmor frequency `larmor` (Hz).
pub fn field_for_larmor(larmor: f64) -> f64 {
    TWO_PI * larmor / GAMMA_C
}

fn spin1() -> (CMatrix, CMatrix) {
    let r = FRAC_1_SQRT_2;
    let sz = CMatrix::from_real(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, -1.0]]);
    let sx = CMatrix::from_real(&[&[0.0, r, 0.0], &[r, 0.0, r], &[0.0, r, 0.0]]);
    (sz, sx)
}

fn spin_half() -> (CMatrix, CMatrix, CMatrix) {
    let iz = CMatrix::from_real(&[&[0.5, 0.0], &[0.0, -0.5]]);
    let ix = CMatrix::from_real(&[&[0.0, 0.5], &[0.5, 0.0]]);
    let iy = CMatrix::from_rows(&[
        vec![C64::new(0.0, 0.0), C64::new(0.0, -0.5)],
        vec![C64::new(0.0, 0.5), C64::new(0.0, 0.0)],
    ]);
    (iz, ix, iy)
}

fn embed(nv: &CMatrix, c1: &CMatrix, c2: &CMatrix) -> CMatrix {
    nv.kron(c1).kron(c2)
}

pub fn build_hamiltonian(spec: &HamiltonianSpec) -> CMatrix {
    let (sz, sx) = spin1();
    let (iz, ix, iy) = spin_half();
    let e3 = CMatrix::identity(3);
    let e2 = CMatrix::identity(2);
    let re = |v: f64| C64::new(v, 0.0);
    let fe = spec.gamma_e / TWO_PI;
    let fc = spec.gamma_c / TWO_PI;
    let mut h = embed(&(&sz * &sz), &e2, &e2).scale(re(spec.d));
    h = &h + &embed(&sz, &e2, &e2).scale(re(fe * spec.b_par));
    h = &h + &embed(&sx, &e2, &e2).scale(re(fe * spec.b_perp));
    let carbon_ops = [
        (embed(&e3, &iz, &e2), embed(&e3, &ix, &e2), embed(&e3, &iy, &e2)),
        (embed(&e3, &e2, &iz), embed(&e3, &e2, &ix), embed(&e3, &e2, &iy)),
    ];
    let szc = embed(&sz, &e2, &e2);
    for ((cz, cx, _), (a_par, a_perp)) in carbon_ops.iter().zip(spec.hyperfine) {
        h = &h + &(&szc * cz).scale(re(a_par));
        h = &h + &(&szc * cx).scale(re(a_perp));
        h = &h + &cz.scale(re(fc * spec.b_par));
        h = &h + &cx.scale(re(fc * spec.b_perp));
    }
    let (z1, x1, y1) = &carbon_ops[0];
    let (z2, x2, y2) = &carbon_ops[1];
    let zz = z1 * z2;
    let dot = &(&(x1 * x2) + &(y1 * y2)) + &zz;
    h = &h + &(&zz.scale(re(3.0)) - &dot).scale(re(spec.x));
    h
}

pub fn eigendecompose(h: &CMatrix) -> Result<EigenDecomposition> {
    eigh(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveX {
    pub b_perp: f64,
    pub x_eff: f64,
    /// Set when either pseudo-spin eigenstate overlaps its target by < 0.6.
    pub ambiguous: bool,
}

/// Overlap threshold below which level identification is flagged.
pub const OVERLAP_THRESHOLD: f64 = 0.6;

/// m_s = 0 pseudo-spin splitting from the full spectrum.
///
/// The two eigenstates with largest overlap with (|↑↓⟩ ± |↓↑⟩)/√2 in m_s = 0
/// are located and their energy difference E₋ − E₊ is reported. For the bare
/// dipolar term this difference equals X.
pub fn effective_x_at(spec: &HamiltonianSpec) -> Result<EffectiveX> {
    let e = eigendecompose(&build_hamiltonian(spec))?;
    let base = 4; // m_s = 0 block
    let (ud, du) = (base + 1, base + 2);
    let mut best = [(0usize, -1.0f64); 2];
    for (k, v) in e.vectors.iter().enumerate() {
        for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
            let amp = (v[ud] + v[du] * sign) * FRAC_1_SQRT_2;
            let ov = amp.norm_sqr();
            if ov > best[slot].1 {
                best[slot] = (k, ov);
            }
        }
    }
    let x_eff = e.values[best[1].0] - e.values[best[0].0];
    Ok(EffectiveX {
        b_perp: spec.b_perp,
        x_eff,
        ambiguous: best[0].0 == best[1].0 || best.iter().any(|(_, ov)| *ov < OVERLAP_THRESHOLD),
    })
}

/// Sweeps the transverse field (tesla) with all other settings fixed.
pub fn effective_x(spec: &HamiltonianSpec, b_perp: &[f64]) -> Result<Vec<EffectiveX>> {
    b_perp.par_iter().map(|&b| effective_x_at(&HamiltonianSpec { b_perp: b, ..*spec })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS: f64 = 1e-4;

    #[test]
    fn bare_spectrum() {
        let spec = HamiltonianSpec { b_par: 0.0, x: 0.0, ..Default::default() };
        let e = eigendecompose(&build_hamiltonian(&spec)).unwrap();
        for (k, v) in e.values.iter().enumerate() {
            let expected = if k < 4 { 0.0 } else { spec.d };
            assert!((v - expected).abs() < 1e-6, "{k}: {v}");
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_trace_matches() {
        let spec =
            HamiltonianSpec { b_perp: 3.0 * GAUSS, hyperfine: [(30e3, 20e3), (-20e3, 10e3)], ..Default::default() };
        let h = build_hamiltonian(&spec);
        assert_eq!(h.hermiticity_residual(), 0.0);
        let e = eigendecompose(&h).unwrap();
        let sum: f64 = e.values.iter().sum();
        assert!((sum - h.trace().re).abs() < 1e-9 * h.norm());
        assert!((&e.reconstruct() - &h).norm() < 1e-9 * h.norm());
    }

    #[test]
    fn larmor_field() {
        let b = field_for_larmor(432_140.0);
        assert!((b - 0.04035).abs() < 1e-5, "{b}");
    }

    #[test]
    fn bare_x_recovered_without_mediation() {
        let r = effective_x_at(&HamiltonianSpec::default()).unwrap();
        assert!((r.x_eff - 2062.37).abs() < 1e-6, "{}", r.x_eff);
        assert!(!r.ambiguous);
    }

    #[test]
    fn zero_coupling_is_degenerate() {
        let spec = HamiltonianSpec { x: 0.0, ..Default::default() };
        let r = effective_x_at(&spec).unwrap();
        assert!(r.x_eff.abs() < 1e-6);
    }

    #[test]
    fn even_in_transverse_field() {
        // Exact symmetry when A⊥ = 0: a π rotation of the electron about z flips
        // its transverse field, and of the carbons flips theirs.
        let spec = HamiltonianSpec { hyperfine: [(60e3, 0.0), (40e3, 0.0)], ..Default::default() };
        for b in [0.3, 1.0, 5.0, 20.0] {
            let p = effective_x_at(&HamiltonianSpec { b_perp: b * GAUSS, ..spec }).unwrap();
            let m = effective_x_at(&HamiltonianSpec { b_perp: -b * GAUSS, ..spec }).unwrap();
            // eigenvalues carry ~1e-16·‖H‖ ≈ 1e-6 Hz of rounding
            assert!((p.x_eff - m.x_eff).abs() < 1e-4, "{} {}", p.x_eff, m.x_eff);
        }
        // With A⊥ ≠ 0 the carbon transverse Zeeman term and A⊥ interfere, leaving
        // an odd part far below the resolution of interest at sub-gauss fields.
        let spec = HamiltonianSpec { hyperfine: [(60e3, 30e3), (40e3, 15e3)], ..Default::default() };
        let p = effective_x_at(&HamiltonianSpec { b_perp: GAUSS, ..spec }).unwrap();
        let m = effective_x_at(&HamiltonianSpec { b_perp: -GAUSS, ..spec }).unwrap();
        assert!((p.x_eff - m.x_eff).abs() < 1e-4, "{} {}", p.x_eff, m.x_eff);
    }

    #[test]
    fn shift_small_below_one_gauss_and_growing() {
        let spec = HamiltonianSpec { hyperfine: [(60e3, 30e3), (40e3, 15e3)], ..Default::default() };
        let fields: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5 * GAUSS).collect();
        let r = effective_x(&spec, &fields).unwrap();
        assert!(r.iter().all(|e| !e.ambiguous));
        assert!(r.iter().take(3).all(|e| (e.x_eff - spec.x).abs() < 0.5));
        for w in r.windows(2) {
            assert!((w[1].x_eff - spec.x).abs() >= (w[0].x_eff - spec.x).abs() - 1e-5);
        }
    }
}
