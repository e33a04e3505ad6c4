//! Repeated non-destructive readout of one or two spin pairs through the NV.
//!
//! A register keeps one density matrix per "parallel mask": bit i of the mask
//! is set when pair i sits in its parallel subspace, in which case it carries
//! no pseudo-spin. Coherence between different masks is not tracked.
//!
//! Two engines share the same channel code. [`qnd_block`] samples outcomes,
//! while [`block_distribution`] propagates the full distribution over counts
//! and gives exact histograms and heralding probabilities.

use crate::consts::TWO_PI;
use crate::ensemble::{derive_seed, member_rng};
use crate::linalg::{eigh, CMatrix, C64};
use crate::{error::domain, Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutKind {
    /// NV read out along y: click probability (1 + sin φ)/2.
    Spin,
    /// NV read out along x: click probability (1 − cos φ)/2, so even parity
    /// (and the antiparallel subspace of a single pair) produces counts.
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::X => CMatrix::from_rows(&[vec![z, o], vec![o, z]]),
            Pauli::Y => CMatrix::from_rows(&[vec![z, -i], vec![i, z]]),
            Pauli::Z => CMatrix::from_rows(&[vec![o, z], vec![z, -o]]),
        }
    }
}

/// exp(−iθσ/2) for a Pauli axis.
pub fn rotation(axis: Pauli, theta: f64) -> CMatrix {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    &CMatrix::identity(2).scale(c) + &axis.matrix().scale(s)
}

fn hadamard() -> CMatrix {
    CMatrix::from_real(&[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Phase picked up by the NV per repetition for a pair in ⇑, one per pair.
    pub phases: Vec<f64>,
    pub kind: ReadoutKind,
    /// Pseudo-spin basis the interaction is diagonal in.
    pub basis: Basis,
    /// Probability that bright (m_s = 0) is registered as a count.
    pub f0: f64,
    /// Probability that dark (m_s = −1) is registered as no count.
    pub f1: f64,
    /// Per-repetition probability of a Pauli error on each pair.
    pub dephasing: f64,
    pub flip_axis: Pauli,
    /// Per-repetition probability of hopping between antiparallel and parallel.
    pub leakage: f64,
    /// Deterministic x rotation (rad) per repetition, one per pair.
    pub rotation: Vec<f64>,
    /// Remaining NV coherence after the interaction sequence, in [0, 1].
    pub contrast: f64,
}

pub const F0: f64 = 0.905;
pub const F1: f64 = 0.986;

impl ReadoutModel {
    fn base(n_pairs: usize, phase: f64, kind: ReadoutKind, basis: Basis) -> Self {
        ReadoutModel {
            phases: vec![phase; n_pairs],
            kind,
            basis,
            f0: F0,
            f1: F1,
            dephasing: 0.0,
            flip_axis: if basis == Basis::Z { Pauli::X } else { Pauli::Z },
            leakage: 0.0,
            rotation: vec![0.0; n_pairs],
            contrast: 1.0,
        }
    }

    /// Spin readout of pairs A and B.
    pub fn pair_ab_spin() -> Self {
        Self::base(2, FRAC_PI_4, ReadoutKind::Spin, Basis::Z)
    }

    /// Parity readout of pairs A and B.
    pub fn pair_ab_parity() -> Self {
        Self::base(2, FRAC_PI_2, ReadoutKind::Parity, Basis::Z)
    }

    /// Spin readout of pair C in the x basis.
    pub fn pair_c_spin() -> Self {
        Self::base(1, FRAC_PI_2, ReadoutKind::Spin, Basis::X)
    }

    /// Antiparallel/parallel readout of pair C.
    pub fn pair_c_parity() -> Self {
        Self::base(1, PI, ReadoutKind::Parity, Basis::X)
    }

    pub fn ideal(mut self) -> Self {
        self.f0 = 1.0;
        self.f1 = 1.0;
        self.contrast = 1.0;
        self.dephasing = 0.0;
        self.leakage = 0.0;
        self.rotation.iter_mut().for_each(|r| *r = 0.0);
        self
    }

    /// Contrast and per-repetition error rates fitted by hand to the
    /// calibration curves; the parity sequence is longer and loses more.
    pub fn realistic(self) -> Self {
        match self.kind {
            ReadoutKind::Spin => self.with_contrast(0.5).with_noise(1e-3, 2e-4),
            ReadoutKind::Parity => self.with_contrast(0.4).with_noise(2e-3, 5e-4),
        }
    }

    pub fn with_contrast(mut self, contrast: f64) -> Self {
        self.contrast = contrast;
        self
    }

    pub fn with_noise(mut self, dephasing: f64, leakage: f64) -> Self {
        self.dephasing = dephasing;
        self.leakage = leakage;
        self
    }

    pub fn n_pairs(&self) -> usize {
        self.phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.f0, self.f1, self.dephasing, self.leakage, self.contrast];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return domain("fidelities and channel probabilities must lie in [0, 1]");
        }
        if self.phases.is_empty() || self.phases.len() > 2 {
            return domain("one or two pairs are supported");
        }
        if self.rotation.len() != self.phases.len() {
            return domain("one rotation angle per pair is required");
        }
        if self.phases.iter().chain(&self.rotation).any(|v| !v.is_finite()) {
            return domain("phases and rotations must be finite");
        }
        Ok(())
    }

    fn ideal_click(&self, phi: f64) -> f64 {
        match self.kind {
            ReadoutKind::Spin => 0.5 * (1.0 + self.contrast * phi.sin()),
            ReadoutKind::Parity => 0.5 * (1.0 - self.contrast * phi.cos()),
        }
    }
}

/// Smallest waiting time that makes `duration + fixed + padding` a multiple of
/// the pseudo-spin period (1/X for spin readout, 1/(2X) for parity).
pub fn sync_padding(duration: f64, fixed: f64, x: f64, kind: ReadoutKind) -> Result<f64> {
    if !(duration >= 0.0) || !(fixed >= 0.0) {
        return domain("durations must be non-negative");
    }
    if !(x > 0.0) {
        return domain("X must be positive");
    }
    let period = match kind {
        ReadoutKind::Spin => 1.0 / x,
        ReadoutKind::Parity => 1.0 / (2.0 * x),
    };
    let rem = (duration + fixed).rem_euclid(period);
    let pad = period - rem;
    // a remainder within rounding of a full period needs no padding
    if rem <= 1e-12 * period || pad <= 1e-12 * period {
        Ok(0.0)
    } else {
        Ok(pad)
    }
}

/// Pseudo-spin x rotation accumulated during an unsynchronised wait of `t` seconds.
pub fn free_rotation(x: f64, t: f64) -> f64 {
    TWO_PI * x * t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRegister {
    n_pairs: usize,
    /// Indexed by parallel mask.
    sectors: Vec<CMatrix>,
}

fn antiparallel_pairs(n_pairs: usize, mask: usize) -> Vec<usize> {
    (0..n_pairs).filter(|i| mask & (1 << i) == 0).collect()
}

/// Bit of the sector index that belongs to `pos` among `k` antiparallel pairs.
fn bit_of(pos: usize, k: usize) -> usize {
    k - 1 - pos
}

impl PairRegister {
    fn empty(n_pairs: usize) -> Self {
        let sectors =
            (0..1usize << n_pairs).map(|mask| CMatrix::zeros(1 << antiparallel_pairs(n_pairs, mask).len())).collect();
        PairRegister { n_pairs, sectors }
    }

    /// Pure pseudo-spin state with every pair antiparallel. Amplitude index
    /// bits are ordered pair 0 first, 0 = ⇑ and 1 = ⇓.
    pub fn pure(n_pairs: usize, amplitudes: &[C64]) -> Result<Self> {
        if !(1..=2).contains(&n_pairs) || amplitudes.len() != 1 << n_pairs {
            return domain("amplitude vector must have 2^n entries for n = 1 or 2");
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm > 0.0) {
            return domain("zero state vector");
        }
        let mut r = Self::empty(n_pairs);
        let d = amplitudes.len();
        for i in 0..d {
            for j in 0..d {
                r.sectors[0][(i, j)] = amplitudes[i] * amplitudes[j].conj() / norm;
            }
        }
        Ok(r)
    }

    /// Computational basis state, `bits` ordered as in [`PairRegister::pure`].
    pub fn basis(n_pairs: usize, bits: usize) -> Self {
        let mut r = Self::empty(n_pairs);
        r.sectors[0][(bits, bits)] = C64::new(1.0, 0.0);
        r
    }

    /// Maximally mixed state inside the antiparallel subspace.
    pub fn mixed_antiparallel(n_pairs: usize) -> Self {
        let mut r = Self::empty(n_pairs);
        let d = 1 << n_pairs;
        r.sectors[0] = CMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
        r
    }

    /// High-temperature state of the four carbon configurations per pair.
    pub fn thermal(n_pairs: usize) -> Self {
        let mut r = Self::empty(n_pairs);
        for mask in 0..r.sectors.len() {
            let d = r.sectors[mask].dim();
            let weight = 0.5f64.powi(n_pairs as i32) / d as f64;
            r.sectors[mask] = CMatrix::identity(d).scale(C64::new(weight, 0.0));
        }
        r
    }

    /// All pairs parallel.
    pub fn all_parallel(n_pairs: usize) -> Self {
        let mut r = Self::empty(n_pairs);
        let last = r.sectors.len() - 1;
        r.sectors[last][(0, 0)] = C64::new(1.0, 0.0);
        r
    }

    /// Mixture `Σ wᵢ ρᵢ` of registers of equal shape.
    pub fn mixture(parts: &[(f64, PairRegister)]) -> Self {
        let mut out = Self::empty(parts[0].1.n_pairs);
        for (w, r) in parts {
            out.add_scaled(r, *w);
        }
        out
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn sector(&self, mask: usize) -> &CMatrix {
        &self.sectors[mask]
    }

    pub fn trace(&self) -> f64 {
        self.sectors.iter().map(|s| s.trace().re).sum()
    }

    /// Probability of the fully antiparallel sector.
    pub fn antiparallel_weight(&self) -> f64 {
        self.sectors[0].trace().re
    }

    pub fn normalized(&self) -> Self {
        let t = self.trace();
        let mut r = self.clone();
        if t > 0.0 {
            r.sectors.iter_mut().for_each(|s| *s = s.scale(C64::new(1.0 / t, 0.0)));
        }
        r
    }

    fn add_scaled(&mut self, other: &PairRegister, w: f64) {
        for (a, b) in self.sectors.iter_mut().zip(&other.sectors) {
            *a = &*a + &b.scale(C64::new(w, 0.0));
        }
    }

    /// Smallest eigenvalue over all sectors.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for s in &self.sectors {
            let h = &(s + &s.adjoint()).scale(C64::new(0.5, 0.0));
            m = m.min(eigh(h)?.values[0]);
        }
        Ok(m)
    }

    /// Probability of each antiparallel computational basis state.
    pub fn populations(&self) -> Vec<f64> {
        let d = self.sectors[0].dim();
        (0..d).map(|i| self.sectors[0][(i, i)].re).collect()
    }

    /// ⟨ψ|ρ|ψ⟩ for a pure antiparallel state.
    pub fn overlap(&self, psi: &[C64]) -> f64 {
        let rho = &self.sectors[0];
        let v = rho.apply(psi);
        psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>().re
    }

    /// ⟨σ_a ⊗ σ_b⟩ with parallel configurations contributing zero.
    pub fn correlator(&self, a: Pauli, b: Pauli) -> f64 {
        assert_eq!(self.n_pairs, 2, "correlators need two pairs");
        let op = a.matrix().kron(&b.matrix());
        (&op * &self.sectors[0]).trace().re
    }

    /// Applies a single-pair unitary to pair `pair` wherever it is antiparallel.
    pub fn apply_unitary(&mut self, pair: usize, u: &CMatrix) {
        for mask in 0..self.sectors.len() {
            if mask & (1 << pair) != 0 {
                continue;
            }
            let ap = antiparallel_pairs(self.n_pairs, mask);
            let pos = ap.iter().position(|&p| p == pair).unwrap();
            let full = embed_single(u, pos, ap.len());
            self.sectors[mask] = self.sectors[mask].conjugate_by(&full);
        }
    }

    /// Applies the same unitary to every pair.
    pub fn apply_all(&mut self, u: &CMatrix) {
        for p in 0..self.n_pairs {
            self.apply_unitary(p, u);
        }
    }

    fn dephase(&mut self, pair: usize, p: f64, axis: Pauli) {
        if p == 0.0 {
            return;
        }
        let pm = axis.matrix();
        for mask in 0..self.sectors.len() {
            if mask & (1 << pair) != 0 {
                continue;
            }
            let ap = antiparallel_pairs(self.n_pairs, mask);
            let pos = ap.iter().position(|&q| q == pair).unwrap();
            let full = embed_single(&pm, pos, ap.len());
            let flipped = self.sectors[mask].conjugate_by(&full);
            self.sectors[mask] = &self.sectors[mask].scale(C64::new(1.0 - p, 0.0)) + &flipped.scale(C64::new(p, 0.0));
        }
    }

    fn leak(&mut self, pair: usize, k: f64) {
        if k == 0.0 {
            return;
        }
        let bit = 1 << pair;
        let old = self.sectors.clone();
        let keep = C64::new(1.0 - k, 0.0);
        let move_ = C64::new(k, 0.0);
        for s in self.sectors.iter_mut() {
            *s = s.scale(keep);
        }
        for mask in 0..old.len() {
            let ap = antiparallel_pairs(self.n_pairs, mask);
            if mask & bit == 0 {
                let pos = ap.iter().position(|&q| q == pair).unwrap();
                let reduced = partial_trace(&old[mask], pos, ap.len());
                let target = &self.sectors[mask | bit] + &reduced.scale(move_);
                self.sectors[mask | bit] = target;
            } else {
                let target_mask = mask & !bit;
                let ap_t = antiparallel_pairs(self.n_pairs, target_mask);
                let pos = ap_t.iter().position(|&q| q == pair).unwrap();
                let expanded = insert_mixed(&old[mask], pos, ap_t.len());
                let target = &self.sectors[target_mask] + &expanded.scale(move_);
                self.sectors[target_mask] = target;
            }
        }
    }
}

/// I ⊗ … ⊗ U ⊗ … ⊗ I with U at position `pos` of `k` qubits.
fn embed_single(u: &CMatrix, pos: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::identity(1);
    for j in 0..k {
        m = m.kron(if j == pos { u } else { &IDENTITY2 });
    }
    m
}

static IDENTITY2: std::sync::LazyLock<CMatrix> = std::sync::LazyLock::new(|| CMatrix::identity(2));

/// Traces out qubit `pos` of a `k`-qubit density matrix.
fn partial_trace(rho: &CMatrix, pos: usize, k: usize) -> CMatrix {
    let b = bit_of(pos, k);
    let d = 1 << (k - 1);
    let mut out = CMatrix::zeros(d);
    let expand = |i: usize, v: usize| {
        let low = i & ((1 << b) - 1);
        let high = i >> b;
        (high << (b + 1)) | (v << b) | low
    };
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = rho[(expand(i, 0), expand(j, 0))] + rho[(expand(i, 1), expand(j, 1))];
        }
    }
    out
}

/// Inserts a maximally mixed qubit at position `pos` of the resulting `k`-qubit matrix.
fn insert_mixed(rho: &CMatrix, pos: usize, k: usize) -> CMatrix {
    let b = bit_of(pos, k);
    let d = 1 << k;
    let mut out = CMatrix::zeros(d);
    let compress = |i: usize| ((i >> (b + 1)) << b) | (i & ((1 << b) - 1));
    for i in 0..d {
        for j in 0..d {
            if (i >> b) & 1 == (j >> b) & 1 {
                out[(i, j)] = rho[(compress(i), compress(j))] * 0.5;
            }
        }
    }
    out
}

/// Click weights per sector basis state, in the measurement basis.
struct SectorReadout {
    /// Measurement-basis change (Hadamards for the x basis), self-inverse.
    frame: Option<CMatrix>,
    sqrt_p: Vec<f64>,
    sqrt_q: Vec<f64>,
}

struct Instrument {
    f0: f64,
    f1: f64,
    sectors: Vec<SectorReadout>,
}

impl Instrument {
    fn new(model: &ReadoutModel) -> Self {
        let n = model.n_pairs();
        let sectors = (0..1usize << n)
            .map(|mask| {
                let ap = antiparallel_pairs(n, mask);
                let k = ap.len();
                let frame = (model.basis == Basis::X && k > 0)
                    .then(|| (0..k).fold(CMatrix::identity(1), |m, _| m.kron(&hadamard())));
                let mut sqrt_p = Vec::with_capacity(1 << k);
                let mut sqrt_q = Vec::with_capacity(1 << k);
                for s in 0..1usize << k {
                    let phi: f64 = ap
                        .iter()
                        .enumerate()
                        .map(|(pos, &pair)| {
                            let down = (s >> bit_of(pos, k)) & 1 == 1;
                            if down {
                                -model.phases[pair]
                            } else {
                                model.phases[pair]
                            }
                        })
                        .sum();
                    let p = model.ideal_click(phi).clamp(0.0, 1.0);
                    sqrt_p.push(p.sqrt());
                    sqrt_q.push((1.0 - p).sqrt());
                }
                SectorReadout { frame, sqrt_p, sqrt_q }
            })
            .collect();
        Instrument { f0: model.f0, f1: model.f1, sectors }
    }

    /// Unnormalised (click, no-click) branches of one NV readout.
    fn split(&self, reg: &PairRegister) -> (PairRegister, PairRegister) {
        let mut click = reg.clone();
        let mut none = reg.clone();
        for (mask, sr) in self.sectors.iter().enumerate() {
            let rho = match &sr.frame {
                Some(h) => reg.sectors[mask].conjugate_by(h),
                None => reg.sectors[mask].clone(),
            };
            let d = rho.dim();
            let mut c = CMatrix::zeros(d);
            let mut n = CMatrix::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    let bright = sr.sqrt_p[i] * sr.sqrt_p[j];
                    let dark = sr.sqrt_q[i] * sr.sqrt_q[j];
                    c[(i, j)] = rho[(i, j)] * (self.f0 * bright + (1.0 - self.f1) * dark);
                    n[(i, j)] = rho[(i, j)] * ((1.0 - self.f0) * bright + self.f1 * dark);
                }
            }
            if let Some(h) = &sr.frame {
                c = c.conjugate_by(h);
                n = n.conjugate_by(h);
            }
            click.sectors[mask] = c;
            none.sectors[mask] = n;
        }
        (click, none)
    }
}

/// Channels applied after each readout: Pauli errors, leakage, free rotation.
fn after_readout(reg: &mut PairRegister, model: &ReadoutModel, rotations: &[CMatrix]) {
    for pair in 0..reg.n_pairs {
        reg.dephase(pair, model.dephasing, model.flip_axis);
    }
    for pair in 0..reg.n_pairs {
        reg.leak(pair, model.leakage);
    }
    for (pair, (u, angle)) in rotations.iter().zip(&model.rotation).enumerate() {
        if *angle != 0.0 {
            reg.apply_unitary(pair, u);
        }
    }
}

fn check_shapes(reg: &PairRegister, model: &ReadoutModel) -> Result<()> {
    model.validate()?;
    if reg.n_pairs != model.n_pairs() {
        return domain("register and readout model describe different numbers of pairs");
    }
    Ok(())
}

/// Samples `m` repetitions. Returns the count and the normalised posterior.
pub fn qnd_block_with<R: Rng>(
    reg: &PairRegister,
    model: &ReadoutModel,
    m: usize,
    rng: &mut R,
) -> Result<(usize, PairRegister)> {
    check_shapes(reg, model)?;
    let inst = Instrument::new(model);
    let rotations: Vec<CMatrix> = model.rotation.iter().map(|&a| rotation(Pauli::X, a)).collect();
    let mut state = reg.normalized();
    let mut count = 0;
    for _ in 0..m {
        let (click, none) = inst.split(&state);
        let pc = click.trace();
        state = if rng.random::<f64>() < pc {
            count += 1;
            click
        } else {
            none
        }
        .normalized();
        after_readout(&mut state, model, &rotations);
    }
    Ok((count, state))
}

pub fn qnd_block(reg: &PairRegister, model: &ReadoutModel, m: usize, seed: u64) -> Result<(usize, PairRegister)> {
    qnd_block_with(reg, model, m, &mut member_rng(seed, 0))
}

/// Unnormalised registers conditioned on each count 0..=m; their traces form
/// the count histogram. `on_step` sees the distribution after every repetition.
pub fn block_distribution_with(
    reg: &PairRegister,
    model: &ReadoutModel,
    m: usize,
    mut on_step: impl FnMut(usize, &[PairRegister]),
) -> Result<Vec<PairRegister>> {
    check_shapes(reg, model)?;
    let inst = Instrument::new(model);
    let rotations: Vec<CMatrix> = model.rotation.iter().map(|&a| rotation(Pauli::X, a)).collect();
    let mut dist = vec![reg.clone()];
    for step in 1..=m {
        let mut next: Vec<PairRegister> = (0..=dist.len()).map(|_| PairRegister::empty(reg.n_pairs)).collect();
        for (n, r) in dist.iter().enumerate() {
            if r.trace() == 0.0 {
                continue;
            }
            let (click, none) = inst.split(r);
            next[n + 1].add_scaled(&click, 1.0);
            next[n].add_scaled(&none, 1.0);
        }
        for r in next.iter_mut() {
            after_readout(r, model, &rotations);
        }
        dist = next;
        on_step(step, &dist);
    }
    Ok(dist)
}

pub fn block_distribution(reg: &PairRegister, model: &ReadoutModel, m: usize) -> Result<Vec<PairRegister>> {
    block_distribution_with(reg, model, m, |_, _| {})
}

/// Count histogram (probabilities) of a block.
pub fn count_histogram(reg: &PairRegister, model: &ReadoutModel, m: usize) -> Result<Vec<f64>> {
    Ok(block_distribution(reg, model, m)?.iter().map(|r| r.trace()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    AtLeast(usize),
    AtMost(usize),
}

impl Condition {
    pub fn holds(self, n: usize) -> bool {
        match self {
            Condition::AtLeast(t) => n >= t,
            Condition::AtMost(t) => n <= t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub repetitions: usize,
    pub condition: Condition,
}

impl BlockSpec {
    pub fn at_least(threshold: usize, repetitions: usize) -> Self {
        BlockSpec { repetitions, condition: Condition::AtLeast(threshold) }
    }

    pub fn at_most(threshold: usize, repetitions: usize) -> Self {
        BlockSpec { repetitions, condition: Condition::AtMost(threshold) }
    }
}

/// Samples a heralding block; the posterior is normalised.
pub fn herald_with<R: Rng>(
    reg: &PairRegister,
    model: &ReadoutModel,
    block: &BlockSpec,
    rng: &mut R,
) -> Result<(bool, PairRegister)> {
    let (n, post) = qnd_block_with(reg, model, block.repetitions, rng)?;
    Ok((block.condition.holds(n), post))
}

pub fn herald(reg: &PairRegister, model: &ReadoutModel, block: &BlockSpec, seed: u64) -> Result<(bool, PairRegister)> {
    herald_with(reg, model, block, &mut member_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldOutcome {
    pub probability: f64,
    /// Normalised posterior given acceptance (zero register if never accepted).
    pub posterior: PairRegister,
}

/// Exact acceptance probability and posterior of a heralding block.
pub fn herald_exact(reg: &PairRegister, model: &ReadoutModel, block: &BlockSpec) -> Result<HeraldOutcome> {
    let dist = block_distribution(reg, model, block.repetitions)?;
    let mut acc = PairRegister::empty(reg.n_pairs);
    for (n, r) in dist.iter().enumerate() {
        if block.condition.holds(n) {
            acc.add_scaled(r, 1.0);
        }
    }
    let probability = acc.trace() / reg.trace();
    Ok(HeraldOutcome { probability, posterior: acc.normalized() })
}

/// One step of a state-preparation sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrepStep {
    Herald {
        model: ReadoutModel,
        block: BlockSpec,
    },
    /// Ideal rotation applied to every pair.
    Rotate {
        axis: Pauli,
        angle: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub initial: PairRegister,
    pub steps: Vec<PrepStep>,
}

impl Preparation {
    pub fn direct(state: PairRegister) -> Self {
        Preparation { initial: state, steps: Vec::new() }
    }

    /// Exact success probability and normalised prepared state.
    pub fn exact(&self) -> Result<HeraldOutcome> {
        let mut state = self.initial.normalized();
        let mut prob = 1.0;
        for step in &self.steps {
            match step {
                PrepStep::Herald { model, block } => {
                    let h = herald_exact(&state, model, block)?;
                    prob *= h.probability;
                    state = h.posterior;
                }
                PrepStep::Rotate { axis, angle } => state.apply_all(&rotation(*axis, *angle)),
            }
        }
        Ok(HeraldOutcome { probability: prob, posterior: state })
    }

    /// Samples the sequence once; `None` when a herald fails.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Option<PairRegister>> {
        let mut state = self.initial.normalized();
        for step in &self.steps {
            match step {
                PrepStep::Herald { model, block } => {
                    let (ok, post) = herald_with(&state, model, block, rng)?;
                    if !ok {
                        return Ok(None);
                    }
                    state = post;
                }
                PrepStep::Rotate { axis, angle } => state.apply_all(&rotation(*axis, *angle)),
            }
        }
        Ok(Some(state))
    }
}

/// Calibration preparations for the spin readout of pairs A and B: an even
/// parity herald followed by a spin herald of ⇑⇑ (a) or ⇓⇓ (b).
pub fn pair_ab_spin_preparations(spin: &ReadoutModel, parity: &ReadoutModel) -> (Preparation, Preparation) {
    let parity_step = PrepStep::Herald { model: parity.clone(), block: BlockSpec::at_least(13, 20) };
    let make = |block: BlockSpec| Preparation {
        initial: PairRegister::thermal(2),
        steps: vec![parity_step.clone(), PrepStep::Herald { model: spin.clone(), block }],
    };
    (make(BlockSpec::at_least(26, 30)), make(BlockSpec::at_most(2, 30)))
}

/// Calibration preparations for the parity readout of pairs A and B: an even
/// parity herald, a π/2 x rotation to mix the antiparallel subspace, then an
/// even (a) or odd (b) parity herald.
pub fn pair_ab_parity_preparations(parity: &ReadoutModel) -> (Preparation, Preparation) {
    let make = |block: BlockSpec| Preparation {
        initial: PairRegister::thermal(2),
        steps: vec![
            PrepStep::Herald { model: parity.clone(), block: BlockSpec::at_least(15, 20) },
            PrepStep::Rotate { axis: Pauli::X, angle: FRAC_PI_2 },
            PrepStep::Herald { model: parity.clone(), block },
        ],
    };
    (make(BlockSpec::at_least(16, 20)), make(BlockSpec::at_most(1, 20)))
}

/// Calibration preparations for the pair C spin readout: an antiparallel
/// herald followed by an x-basis spin herald of (⇑ + ⇓)/√2 (a) or (⇑ − ⇓)/√2 (b).
pub fn pair_c_spin_preparations(spin: &ReadoutModel, parity: &ReadoutModel) -> (Preparation, Preparation) {
    let subspace = PrepStep::Herald { model: parity.clone(), block: BlockSpec::at_least(10, 10) };
    let make = |block: BlockSpec| Preparation {
        initial: PairRegister::thermal(1),
        steps: vec![subspace.clone(), PrepStep::Herald { model: spin.clone(), block }],
    };
    (make(BlockSpec::at_least(7, 7)), make(BlockSpec::at_most(0, 7)))
}

/// Calibration preparations for the pair C subspace readout: antiparallel (a)
/// or parallel (b).
pub fn pair_c_parity_preparations(parity: &ReadoutModel) -> (Preparation, Preparation) {
    let make = |block: BlockSpec| Preparation {
        initial: PairRegister::thermal(1),
        steps: vec![PrepStep::Herald { model: parity.clone(), block }],
    };
    (make(BlockSpec::at_least(10, 10)), make(BlockSpec::at_most(0, 10)))
}

/// F(T) = ½P(N ≥ T | a) + ½P(N < T | b) for T = 0..=m.
pub fn threshold_sweep(hist_a: &[f64], hist_b: &[f64]) -> Vec<f64> {
    let m = hist_a.len().max(hist_b.len()) - 1;
    let norm = |h: &[f64]| {
        let s: f64 = h.iter().sum();
        h.iter().map(|v| v / s).collect::<Vec<_>>()
    };
    let (a, b) = (norm(hist_a), norm(hist_b));
    (0..=m)
        .map(|t| {
            let pa: f64 = a.iter().skip(t).sum();
            let pb: f64 = b.iter().take(t).sum();
            0.5 * (pa + pb)
        })
        .collect()
}

/// Threshold with the largest fidelity (smallest T on ties).
pub fn best_threshold(hist_a: &[f64], hist_b: &[f64]) -> (usize, f64) {
    threshold_sweep(hist_a, hist_b).into_iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (t, f)| {
        if f > best.1 + 1e-15 {
            (t, f)
        } else {
            best
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub m: usize,
    pub threshold: usize,
    pub fidelity: f64,
    pub stderr: f64,
}

/// Exact calibration table over readout lengths 1..=m_max.
pub fn calibrate_exact(
    model: &ReadoutModel,
    a: &Preparation,
    b: &Preparation,
    m_max: usize,
) -> Result<Vec<CalibrationRow>> {
    let hist = |p: &Preparation| -> Result<Vec<Vec<f64>>> {
        let state = p.exact()?.posterior;
        if state.trace() == 0.0 {
            return Err(Error::Numerical("preparation never succeeds".into()));
        }
        let mut out = Vec::with_capacity(m_max);
        block_distribution_with(&state, model, m_max, |_, d| out.push(d.iter().map(|r| r.trace()).collect()))?;
        Ok(out)
    };
    let (ha, hb) = (hist(a)?, hist(b)?);
    Ok(ha
        .iter()
        .zip(&hb)
        .enumerate()
        .map(|(k, (x, y))| {
            let (threshold, fidelity) = best_threshold(x, y);
            CalibrationRow { m: k + 1, threshold, fidelity, stderr: 0.0 }
        })
        .collect())
}

/// Sampled calibration with `trials` readout blocks per state.
///
/// Heralded preparation is applied exactly: the state conditioned on success
/// is the same whether heralds are sampled by rejection or propagated, and the
/// readout statistics are linear in it, so only the readout is sampled.
pub fn calibrate(
    model: &ReadoutModel,
    a: &Preparation,
    b: &Preparation,
    m_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<CalibrationRow>> {
    if trials < 1000 {
        return domain("calibration needs at least 1000 trials per state");
    }
    let hist = |p: &Preparation, stage: u64| -> Result<Vec<Vec<f64>>> {
        let state = p.exact()?.posterior;
        if state.trace() == 0.0 {
            return Err(Error::Numerical("preparation never succeeds".into()));
        }
        let master = derive_seed(seed, stage);
        let runs: Vec<Vec<usize>> = (0..trials)
            .into_par_iter()
            .map(|i| running_counts(&state, model, m_max, &mut member_rng(master, i as u64)))
            .collect();
        let mut h = vec![vec![0.0; m_max + 1]; m_max];
        for r in runs {
            for (k, n) in r.into_iter().enumerate() {
                h[k][n] += 1.0;
            }
        }
        Ok(h)
    };
    model.validate()?;
    let (ha, hb) = (hist(a, 1)?, hist(b, 2)?);
    let n = trials as f64;
    Ok(ha
        .iter()
        .zip(&hb)
        .enumerate()
        .map(|(k, (x, y))| {
            let (threshold, fidelity) = best_threshold(&x[..=k + 1], &y[..=k + 1]);
            let pa: f64 = x.iter().skip(threshold).sum::<f64>() / n;
            let pb: f64 = y.iter().take(threshold).sum::<f64>() / n;
            let stderr = 0.5 * (pa * (1.0 - pa) / n + pb * (1.0 - pb) / n).sqrt();
            CalibrationRow { m: k + 1, threshold, fidelity, stderr }
        })
        .collect())
}

/// Running count after each of `m_max` sampled readouts.
fn running_counts<R: Rng>(state: &PairRegister, model: &ReadoutModel, m_max: usize, rng: &mut R) -> Vec<usize> {
    let inst = Instrument::new(model);
    let rotations: Vec<CMatrix> = model.rotation.iter().map(|&a| rotation(Pauli::X, a)).collect();
    let mut s = state.clone();
    let mut count = 0;
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        let (click, none) = inst.split(&s);
        s = if rng.random::<f64>() < click.trace() {
            count += 1;
            click
        } else {
            none
        }
        .normalized();
        after_readout(&mut s, model, &rotations);
        out.push(count);
    }
    out
}

/// Parity-measurement entanglement sequence for pairs A and B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    /// State before the first herald.
    pub initial: PairRegister,
    pub parity: ReadoutModel,
    /// σyσy = +1 herald (counts for even parity).
    pub yy_herald: BlockSpec,
    /// σzσz = −1 herald.
    pub zz_herald: BlockSpec,
    /// Final parity readout: even when the count reaches `readout_threshold`.
    pub readout_repetitions: usize,
    pub readout_threshold: usize,
    /// Pair coupling X (Hz) for free-evolution rotations.
    pub x: f64,
}

impl ProtocolSpec {
    pub fn realistic(parity: ReadoutModel) -> Self {
        ProtocolSpec {
            initial: PairRegister::thermal(2),
            parity,
            yy_herald: BlockSpec::at_least(15, 20),
            zz_herald: BlockSpec::at_most(0, 4),
            readout_repetitions: 18,
            readout_threshold: 7,
            x: 2080.99,
        }
    }

    /// Ideal readout starting inside the antiparallel subspace.
    pub fn ideal() -> Self {
        ProtocolSpec {
            initial: PairRegister::mixed_antiparallel(2),
            ..Self::realistic(ReadoutModel::pair_ab_parity().ideal())
        }
    }

    fn preparation(&self) -> Preparation {
        Preparation {
            initial: self.initial.clone(),
            steps: vec![
                PrepStep::Rotate { axis: Pauli::X, angle: FRAC_PI_2 },
                PrepStep::Herald { model: self.parity.clone(), block: self.yy_herald.clone() },
                PrepStep::Rotate { axis: Pauli::X, angle: -FRAC_PI_2 },
                PrepStep::Herald { model: self.parity.clone(), block: self.zz_herald.clone() },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlators {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub fidelity: f64,
}

impl Correlators {
    fn new(xx: f64, yy: f64, zz: f64) -> Self {
        Correlators { xx, yy, zz, fidelity: (1.0 - zz + yy + xx) / 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub herald_rate: f64,
    /// Expectation values of the heralded state.
    pub state: Correlators,
    /// Values inferred from the thresholded parity readout.
    pub measured: Correlators,
    /// σzσz after free evolution for time t, state and measured.
    pub zz_at_t: (f64, f64),
}

/// Heralded state of the protocol and its success probability.
pub fn entangle_prepare(spec: &ProtocolSpec) -> Result<HeraldOutcome> {
    spec.preparation().exact()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correlator {
    XX,
    YY,
    ZZ,
}

/// Basis change that maps the requested correlator onto σzσz.
fn basis_change(state: &PairRegister, which: Correlator) -> PairRegister {
    let mut s = state.clone();
    match which {
        Correlator::ZZ => {}
        Correlator::YY => s.apply_all(&rotation(Pauli::X, FRAC_PI_2)),
        Correlator::XX => {
            s.apply_all(&rotation(Pauli::Z, FRAC_PI_2));
            s.apply_all(&rotation(Pauli::X, FRAC_PI_2));
        }
    }
    s
}

/// P(even) − P(odd) from a thresholded final parity readout.
fn measured_zz(state: &PairRegister, spec: &ProtocolSpec) -> Result<f64> {
    let h = count_histogram(state, &spec.parity, spec.readout_repetitions)?;
    let even: f64 = h.iter().skip(spec.readout_threshold).sum();
    let total: f64 = h.iter().sum();
    Ok(2.0 * even / total - 1.0)
}

/// Exact evaluation of the entanglement protocol, including σzσz after a
/// free evolution of `t` seconds.
pub fn entangle_protocol_exact(spec: &ProtocolSpec, t: f64) -> Result<ProtocolResult> {
    let prepared = entangle_prepare(spec)?;
    let state = prepared.posterior;
    if state.trace() == 0.0 {
        return Err(Error::Numerical("entanglement herald never succeeds".into()));
    }
    let ideal = |c: Correlator| basis_change(&state, c).correlator(Pauli::Z, Pauli::Z);
    let meas = |c: Correlator| measured_zz(&basis_change(&state, c), spec);
    let mut evolved = state.clone();
    evolved.apply_all(&rotation(Pauli::X, free_rotation(spec.x, t)));
    Ok(ProtocolResult {
        herald_rate: prepared.probability,
        state: Correlators::new(ideal(Correlator::XX), ideal(Correlator::YY), ideal(Correlator::ZZ)),
        measured: Correlators::new(meas(Correlator::XX)?, meas(Correlator::YY)?, meas(Correlator::ZZ)?),
        zz_at_t: (evolved.correlator(Pauli::Z, Pauli::Z), measured_zz(&evolved, spec)?),
    })
}

/// Sampled protocol: `trials` heralding attempts, with each successful run
/// assigned round-robin to one final measurement basis.
pub fn entangle_protocol(spec: &ProtocolSpec, t: f64, trials: usize, seed: u64) -> Result<ProtocolResult> {
    if trials < 3 {
        return domain("need at least three trials");
    }
    if spec.initial.n_pairs() != 2 {
        return domain("the protocol acts on two pairs");
    }
    let prep = spec.preparation();
    let outcomes: Vec<Result<Option<(usize, f64, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng: ChaCha8Rng = member_rng(seed, i as u64);
            let Some(state) = prep.sample(&mut rng)? else { return Ok(None) };
            let which = i % 4;
            let target = match which {
                0 => basis_change(&state, Correlator::XX),
                1 => basis_change(&state, Correlator::YY),
                2 => basis_change(&state, Correlator::ZZ),
                _ => {
                    let mut s = state.clone();
                    s.apply_all(&rotation(Pauli::X, free_rotation(spec.x, t)));
                    s
                }
            };
            let (n, _) = qnd_block_with(&target, &spec.parity, spec.readout_repetitions, &mut rng)?;
            let outcome = if n >= spec.readout_threshold { 1.0 } else { -1.0 };
            Ok(Some((which, outcome, target.correlator(Pauli::Z, Pauli::Z))))
        })
        .collect();
    let mut sums = [(0.0, 0.0, 0usize); 4];
    let mut accepted = 0usize;
    for o in outcomes {
        if let Some((w, m, s)) = o? {
            accepted += 1;
            sums[w].0 += m;
            sums[w].1 += s;
            sums[w].2 += 1;
        }
    }
    let avg = |k: usize, state: bool| {
        let (m, s, n) = sums[k];
        if n == 0 {
            f64::NAN
        } else if state {
            s / n as f64
        } else {
            m / n as f64
        }
    };
    Ok(ProtocolResult {
        herald_rate: accepted as f64 / trials as f64,
        state: Correlators::new(avg(0, true), avg(1, true), avg(2, true)),
        measured: Correlators::new(avg(0, false), avg(1, false), avg(2, false)),
        zz_at_t: (avg(3, true), avg(3, false)),
    })
}
