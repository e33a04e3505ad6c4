//! Diamond lattice, ¹³C bath sampling and dipolar/hyperfine couplings.
//!
//! Lattice coordinates are integers in units of a₀/4. The A sublattice is the
//! FCC set (all coordinates even, sum ≡ 0 mod 4) and the B sublattice is that
//! set shifted by (1, 1, 1).

use crate::consts::{C13_ABUNDANCE, DIAMOND_A0, GAMMA_C, GAMMA_E, HBAR, LARMOR_HZ, MU0, TWO_PI};
use crate::ensemble::{derive_seed, map_members, member_rng};
use crate::{error::domain, Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    /// Multiples of a₀/4.
    Lattice,
    Meters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub units: Units,
}

impl Vector3 {
    pub fn meters(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z, units: Units::Meters }
    }

    pub fn lattice(v: [i32; 3]) -> Self {
        Vector3 { x: v[0] as f64, y: v[1] as f64, z: v[2] as f64, units: Units::Lattice }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Vector3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn scale(&self, s: f64) -> Self {
        Vector3 { x: self.x * s, y: self.y * s, z: self.z * s, units: self.units }
    }

    pub fn sub(&self, o: &Vector3) -> Self {
        Vector3 { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z, units: self.units }
    }

    pub fn unit(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return domain("zero-length vector has no direction");
        }
        Ok(self.scale(1.0 / n))
    }

    /// Converts lattice units to meters; meter vectors pass through.
    pub fn to_meters(&self, a0: f64) -> Self {
        match self.units {
            Units::Meters => *self,
            Units::Lattice => {
                let v = self.scale(a0 / 4.0);
                Vector3 { units: Units::Meters, ..v }
            }
        }
    }

    fn cos_to(&self, axis: &Vector3) -> f64 {
        (self.dot(axis) / (self.norm() * axis.norm())).clamp(-1.0, 1.0)
    }
}

/// Field/NV axis along [1,1,1].
pub fn axis_111() -> Vector3 {
    Vector3::meters(1.0, 1.0, 1.0).scale(1.0 / 3f64.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub a0: f64,
    pub cells_per_axis: usize,
    pub abundance: f64,
    pub b_field_axis: Vector3,
    /// Bath spins whose coupling to either central spin exceeds this (Hz) are dropped.
    pub exclusion_cutoff: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            a0: DIAMOND_A0,
            cells_per_axis: 15,
            abundance: C13_ABUNDANCE,
            b_field_axis: axis_111(),
            exclusion_cutoff: 50.0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        // abundance = 0 is accepted as the empty-bath limit.
        if !(0.0..1.0).contains(&self.abundance) {
            return Err(Error::Config(format!("abundance {} outside [0, 1)", self.abundance)));
        }
        if self.cells_per_axis < 1 {
            return Err(Error::Config("cells_per_axis must be at least 1".into()));
        }
        if !(self.exclusion_cutoff > 0.0) {
            return Err(Error::Config("exclusion_cutoff must be positive".into()));
        }
        if !(self.a0 > 0.0) {
            return Err(Error::Config("a0 must be positive".into()));
        }
        let n = self.b_field_axis.norm();
        if !((n - 1.0).abs() < 1e-9) {
            return Err(Error::Config("b_field_axis must be a unit vector".into()));
        }
        Ok(())
    }

    fn axis(&self) -> Vector3 {
        Vector3 { units: Units::Meters, ..self.b_field_axis }
    }
}

/// True when integer coordinates (units a₀/4) are a diamond lattice site.
pub fn is_diamond_site(v: [i32; 3]) -> bool {
    let even = v.iter().all(|c| c.rem_euclid(2) == 0);
    let odd = v.iter().all(|c| c.rem_euclid(2) == 1);
    let s = (v[0] + v[1] + v[2]).rem_euclid(4);
    (even && s == 0) || (odd && s == 3)
}

/// All diamond sites in a cube of `cells` conventional cells centred on the
/// origin, which is itself an A site.
pub fn lattice_sites(cells: usize) -> Vec<[i32; 3]> {
    let half = 2 * cells as i32;
    let mut out = Vec::with_capacity(8 * cells.pow(3));
    for x in -half..half {
        for y in -half..half {
            for z in -half..half {
                if is_diamond_site([x, y, z]) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn require_meters(r: &Vector3) -> Result<()> {
    if r.units != Units::Meters {
        return domain("vector must be expressed in meters");
    }
    if !(r.norm() > 0.0) {
        return domain("zero-length separation");
    }
    Ok(())
}

/// Secular dipolar coupling X/2π (Hz) between two ¹³C spins separated by `r`.
pub fn dipolar_x(r: &Vector3, axis: &Vector3) -> Result<f64> {
    require_meters(r)?;
    let d = r.norm();
    let c = r.cos_to(axis);
    Ok(MU0 * GAMMA_C * GAMMA_C * HBAR / (8.0 * PI * d.powi(3)) * (1.0 - 3.0 * c * c) / TWO_PI)
}

/// Point-dipole NV-¹³C hyperfine components (A∥, A⊥) in Hz.
pub fn hyperfine_dipolar(r_nv_to_c: &Vector3, axis: &Vector3) -> Result<(f64, f64)> {
    require_meters(r_nv_to_c)?;
    let d = r_nv_to_c.norm();
    let c = r_nv_to_c.cos_to(axis);
    let s = (1.0 - c * c).max(0.0).sqrt();
    let p = MU0 * GAMMA_E * GAMMA_C * HBAR / (4.0 * PI * d.powi(3)) / TWO_PI;
    Ok((p * (3.0 * c * c - 1.0), 3.0 * p * (s * c).abs()))
}

/// Hyperfine field difference Z (Hz) of a pair including second-order A⊥ terms.
pub fn pair_z(a1: (f64, f64), a2: (f64, f64), larmor: f64) -> Result<f64> {
    if !(larmor > 0.0) {
        return domain("larmor frequency must be positive");
    }
    Ok(a1.0 - a2.0 + (a1.1 * a1.1 - a2.1 * a2.1) / larmor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Separation in meters.
    pub r12: Vector3,
    pub theta12: f64,
    pub x: f64,
    pub z: Option<f64>,
}

impl PairGeometry {
    pub fn new(r12: Vector3, axis: &Vector3) -> Result<Self> {
        require_meters(&r12)?;
        let x = dipolar_x(&r12, axis)?;
        Ok(PairGeometry { r12, theta12: r12.cos_to(axis).acos(), x, z: None })
    }

    /// Pair with both spins located relative to the NV, so Z is defined.
    pub fn with_nv(r1: Vector3, r2: Vector3, axis: &Vector3, larmor: f64) -> Result<Self> {
        let mut g = Self::new(r2.sub(&r1), axis)?;
        let z = pair_z(hyperfine_dipolar(&r1, axis)?, hyperfine_dipolar(&r2, axis)?, larmor)?;
        g.z = Some(z);
        Ok(g)
    }
}

/// Central spin configuration around which a bath is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BathCenter {
    Single,
    /// Spin 1 at the origin, spin 2 at the given lattice vector.
    Pair([i32; 3]),
}

impl BathCenter {
    /// Nearest-neighbour pair along [1,1,1] (pairs A and B).
    pub const NEAREST_NEIGHBOUR: BathCenter = BathCenter::Pair([1, 1, 1]);
    /// Pair C orientation.
    pub const PAIR_C: BathCenter = BathCenter::Pair([-1, -1, -3]);

    fn validate(&self) -> Result<()> {
        if let BathCenter::Pair(v) = self {
            if *v == [0, 0, 0] {
                return domain("pair spins cannot occupy the same site");
            }
            if !is_diamond_site(*v) {
                return domain(format!("{v:?} is not a diamond lattice vector"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinBath {
    /// Positions relative to spin 1, meters.
    pub sites: Vec<Vector3>,
    /// Ising couplings to spin 1 and spin 2, Hz.
    pub couplings_1: Vec<f64>,
    pub couplings_2: Vec<f64>,
    pub seed: u64,
    /// Number of ¹³C drawn before the exclusion cutoff was applied.
    pub n_drawn: usize,
}

impl SpinBath {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

#[derive(Debug, Clone)]
struct TemplateSite {
    pos: [i32; 3],
    a1: f64,
    a2: f64,
}

/// Precomputed couplings of every candidate site; sampling only draws indices.
#[derive(Debug, Clone)]
pub struct BathTemplate {
    cfg: LatticeConfig,
    sites: Vec<TemplateSite>,
}

impl BathTemplate {
    pub fn new(cfg: &LatticeConfig, center: BathCenter) -> Result<Self> {
        cfg.validate()?;
        center.validate()?;
        let axis = cfg.axis();
        let partner = match center {
            BathCenter::Single => None,
            BathCenter::Pair(v) => Some(v),
        };
        let mut sites = Vec::new();
        for pos in lattice_sites(cfg.cells_per_axis) {
            if pos == [0, 0, 0] || Some(pos) == partner {
                continue;
            }
            let r1 = Vector3::lattice(pos).to_meters(cfg.a0);
            let a1 = 2.0 * dipolar_x(&r1, &axis)?;
            let a2 = match partner {
                None => 0.0,
                Some(q) => {
                    let r2 = Vector3::lattice([pos[0] - q[0], pos[1] - q[1], pos[2] - q[2]]).to_meters(cfg.a0);
                    2.0 * dipolar_x(&r2, &axis)?
                }
            };
            sites.push(TemplateSite { pos, a1, a2 });
        }
        Ok(BathTemplate { cfg: cfg.clone(), sites })
    }

    /// Number of candidate sites (central spins excluded).
    pub fn candidates(&self) -> usize {
        self.sites.len()
    }

    pub fn sample(&self, seed: u64) -> SpinBath {
        let mut rng = member_rng(seed, 0);
        let cut = self.cfg.exclusion_cutoff;
        let mut bath =
            SpinBath { sites: Vec::new(), couplings_1: Vec::new(), couplings_2: Vec::new(), seed, n_drawn: 0 };
        for idx in occupied_indices(self.sites.len(), self.cfg.abundance, &mut rng) {
            let s = &self.sites[idx];
            bath.n_drawn += 1;
            if s.a1.abs() > cut || s.a2.abs() > cut {
                continue;
            }
            bath.sites.push(Vector3::lattice(s.pos).to_meters(self.cfg.a0));
            bath.couplings_1.push(s.a1);
            bath.couplings_2.push(s.a2);
        }
        bath
    }
}

/// Indices of independently occupied sites, drawn by geometric skipping.
fn occupied_indices<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    let geo = Geometric::new(p).expect("probability validated");
    let mut i = 0usize;
    loop {
        let skip = geo.sample(rng);
        i = match usize::try_from(skip).ok().and_then(|s| i.checked_add(s)) {
            Some(v) if v < n => v,
            _ => break,
        };
        out.push(i);
        i += 1;
    }
    out
}

/// Generates one bath around `center`, reproducible from `(cfg, seed)`.
pub fn sample_bath(cfg: &LatticeConfig, center: BathCenter, seed: u64) -> Result<SpinBath> {
    Ok(BathTemplate::new(cfg, center)?.sample(seed))
}

/// Seed of bath `index` in an ensemble generated from `master`.
pub fn bath_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HyperfineModel {
    PointDipole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusConfig {
    /// Accepted |Z| window in Hz, lower bound exclusive, upper inclusive.
    pub z_range: (f64, f64),
    pub larmor: f64,
    pub model: HyperfineModel,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig { z_range: (50.0, 500.0), larmor: LARMOR_HZ, model: HyperfineModel::PointDipole }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub counts: Vec<u32>,
    pub mean: f64,
    pub std: f64,
    pub frac_ge1: f64,
    /// Exact expectation Σ p² over qualifying bonds.
    pub expected_mean: f64,
    /// Number of lattice bonds whose Z lies in the window.
    pub qualifying_bonds: usize,
}

/// Counts nearest-neighbour pairs aligned with the field whose Z lies in the
/// requested window, for `n_baths` random baths around an NV at the origin.
///
/// The vacancy sits on the A site at the origin and the nitrogen on the B site
/// along the axis; neither hosts a ¹³C.
pub fn pair_census(
    cfg: &LatticeConfig,
    n_baths: usize,
    census: &CensusConfig,
    master_seed: u64,
) -> Result<CensusRecord> {
    cfg.validate()?;
    let (lo, hi) = census.z_range;
    if !(lo < hi) || lo < 0.0 {
        return domain(format!("empty Z window ({lo}, {hi})"));
    }
    if n_baths < 1 {
        return domain("n_baths must be at least 1");
    }
    let axis = cfg.axis();
    let bonds: Vec<[i32; 3]> = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
        .into_iter()
        .filter(|b| (Vector3::lattice(*b).cos_to(&axis).abs() - 1.0).abs() < 1e-9)
        .collect();
    let nitrogen = bonds.first().copied();
    let sites = lattice_sites(cfg.cells_per_axis);
    let half = 2 * cfg.cells_per_axis as i32;
    let side = 2 * half;
    let index_of = |p: [i32; 3]| -> Option<usize> {
        if p.iter().any(|c| *c < -half || *c >= half) {
            return None;
        }
        Some((((p[0] + half) * side + (p[1] + half)) * side + (p[2] + half)) as usize)
    };
    let host = |p: [i32; 3]| p != [0, 0, 0] && Some(p) != nitrogen;
    let mut qualifying: Vec<(u32, u32)> = Vec::new();
    let mut dense = vec![u32::MAX; (side as usize).pow(3)];
    for (k, s) in sites.iter().enumerate() {
        dense[index_of(*s).unwrap()] = k as u32;
    }
    for a in sites.iter().filter(|s| s.iter().all(|c| c.rem_euclid(2) == 0)) {
        if !host(*a) {
            continue;
        }
        for b in &bonds {
            let q = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            if !host(q) {
                continue;
            }
            let Some(iq) = index_of(q) else { continue };
            let r1 = Vector3::lattice(*a).to_meters(cfg.a0);
            let r2 = Vector3::lattice(q).to_meters(cfg.a0);
            let z = match census.model {
                HyperfineModel::PointDipole => {
                    pair_z(hyperfine_dipolar(&r1, &axis)?, hyperfine_dipolar(&r2, &axis)?, census.larmor)?
                }
            };
            if z.abs() > lo && z.abs() <= hi {
                qualifying.push((dense[index_of(*a).unwrap()], dense[iq]));
            }
        }
    }
    let p = cfg.abundance;
    let n_sites = sites.len();
    let counts: Vec<u32> = map_members(master_seed, n_baths, |i, _| {
        let mut rng = member_rng(bath_seed(master_seed, i), 0);
        let mut occ = vec![false; n_sites];
        for k in occupied_indices(n_sites, p, &mut rng) {
            occ[k] = true;
        }
        qualifying.iter().filter(|(a, b)| occ[*a as usize] && occ[*b as usize]).count() as u32
    });
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var =
        if counts.len() > 1 { counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(CensusRecord {
        frac_ge1: counts.iter().filter(|&&c| c > 0).count() as f64 / n,
        mean,
        std: var.sqrt(),
        expected_mean: qualifying.len() as f64 * p * p,
        qualifying_bonds: qualifying.len(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    /// |X| in Hz; sites with opposite signs of equal magnitude share an entry.
    pub x: f64,
    pub occurrence: usize,
    /// Representative separation in lattice units.
    pub r: [i32; 3],
}

/// Distinct couplings between a fixed A site and all sites within
/// `max_radius` (lattice units), ordered by decreasing |X|.
pub fn coupling_table(cfg: &LatticeConfig, max_radius: f64) -> Result<Vec<CouplingEntry>> {
    if !(max_radius >= 3f64.sqrt()) {
        return domain("max_radius must be at least √3");
    }
    let axis = cfg.axis();
    let m = max_radius.floor() as i32;
    let mut all: Vec<(f64, [i32; 3])> = Vec::new();
    for x in -m..=m {
        for y in -m..=m {
            for z in -m..=m {
                let v = [x, y, z];
                let d2 = (x * x + y * y + z * z) as f64;
                if v == [0, 0, 0] || d2 > max_radius * max_radius || !is_diamond_site(v) {
                    continue;
                }
                all.push((dipolar_x(&Vector3::lattice(v).to_meters(cfg.a0), &axis)?, v));
            }
        }
    }
    all.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(b.1.cmp(&a.1)));
    let mut out: Vec<CouplingEntry> = Vec::new();
    for (x, v) in all {
        match out.last_mut() {
            Some(e) if (e.x - x.abs()).abs() <= 0.005 => e.occurrence += 1,
            _ => out.push(CouplingEntry { x: x.abs(), occurrence: 1, r: v }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(v: [i32; 3]) -> Vector3 {
        Vector3::lattice(v).to_meters(DIAMOND_A0)
    }

    #[test]
    fn nearest_neighbour_coupling() {
        let x = dipolar_x(&lat([1, 1, 1]), &axis_111()).unwrap();
        assert!((x.abs() - 2062.37).abs() < 0.01, "{x}");
        assert!(x < 0.0);
    }

    #[test]
    fn pair_c_coupling() {
        let x = dipolar_x(&lat([-1, -1, -3]), &axis_111()).unwrap();
        assert!((x.abs() - 187.0).abs() < 0.5, "{x}");
    }

    #[test]
    fn magic_angle_vanishes() {
        let c = 1.0 / 3f64.sqrt();
        let r = Vector3::meters((1.0 - c * c).sqrt(), 0.0, c).scale(7e-10);
        let x = dipolar_x(&r, &Vector3::meters(0.0, 0.0, 1.0)).unwrap();
        assert!(x.abs() < 1e-10);
    }

    #[test]
    fn zero_vector_is_domain_error() {
        let z = Vector3::meters(0.0, 0.0, 0.0);
        assert!(matches!(dipolar_x(&z, &axis_111()), Err(Error::Domain(_))));
        assert!(matches!(hyperfine_dipolar(&z, &axis_111()), Err(Error::Domain(_))));
        assert!(dipolar_x(&Vector3::lattice([1, 1, 1]), &axis_111()).is_err());
    }

    #[test]
    fn hyperfine_limits() {
        let zax = Vector3::meters(0.0, 0.0, 1.0);
        let (par, perp) = hyperfine_dipolar(&Vector3::meters(0.0, 0.0, 1e-9), &zax).unwrap();
        let p = MU0 * GAMMA_E * GAMMA_C * HBAR / (4.0 * PI * 1e-27) / TWO_PI;
        assert!((par - 2.0 * p).abs() < 1e-9 * p);
        assert_eq!(perp, 0.0);
        let c = 1.0 / 3f64.sqrt();
        let r = Vector3::meters((1.0 - c * c).sqrt(), 0.0, c).scale(1e-9);
        assert!(hyperfine_dipolar(&r, &zax).unwrap().0.abs() < 1e-9);
    }

    #[test]
    fn hyperfine_at_two_nanometres_on_axis() {
        // μ0 γe γc ħ / (4π (2 nm)³ 2π), then A∥ = 2p along the axis.
        let p = 1e-7 * 1.760859e11 * 67.2828e6 * 1.054571817e-34 / 8e-27 / (2.0 * PI);
        let (par, perp) = hyperfine_dipolar(&axis_111().scale(2e-9), &axis_111()).unwrap();
        assert!((p - 2485.62).abs() < 0.01, "{p}");
        assert!((par - 2.0 * p).abs() < 1e-9);
        assert!(perp.abs() < 1e-9);
    }

    #[test]
    fn pair_z_examples() {
        assert_eq!(pair_z((10.0, 3.0), (10.0, 3.0), LARMOR_HZ).unwrap(), 0.0);
        assert_eq!(pair_z((130.0, 0.0), (0.0, 0.0), 1.0).unwrap(), 130.0);
        let z = pair_z((100.0, 50.0), (0.0, 30.0), 432140.0).unwrap();
        assert!((z - (100.0 + 1600.0 / 432140.0)).abs() < 1e-12);
        assert!((z - 100.0037).abs() < 1e-4);
        assert!(pair_z((1.0, 1.0), (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn lattice_has_eight_sites_per_cell() {
        assert_eq!(lattice_sites(1).len(), 8);
        assert_eq!(lattice_sites(3).len(), 8 * 27);
        assert!(is_diamond_site([1, 1, 1]));
        assert!(is_diamond_site([-1, -1, -3]));
        assert!(!is_diamond_site([-1, -1, -1]));
        assert!(!is_diamond_site([1, 0, 0]));
    }

    #[test]
    fn same_site_pair_rejected() {
        let cfg = LatticeConfig::default();
        assert!(sample_bath(&cfg, BathCenter::Pair([0, 0, 0]), 1).is_err());
        assert!(sample_bath(&cfg, BathCenter::Pair([1, 0, 0]), 1).is_err());
    }

    #[test]
    fn empty_bath_for_zero_abundance() {
        let cfg = LatticeConfig { abundance: 0.0, ..Default::default() };
        let b = sample_bath(&cfg, BathCenter::Single, 3).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.n_drawn, 0);
    }

    #[test]
    fn invalid_config_rejected() {
        for cfg in [
            LatticeConfig { abundance: 1.0, ..Default::default() },
            LatticeConfig { abundance: -0.1, ..Default::default() },
            LatticeConfig { cells_per_axis: 0, ..Default::default() },
            LatticeConfig { exclusion_cutoff: 0.0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn bath_is_deterministic_and_respects_cutoff() {
        let cfg = LatticeConfig::default();
        let t = BathTemplate::new(&cfg, BathCenter::NEAREST_NEIGHBOUR).unwrap();
        assert_eq!(t.candidates(), 8 * 15usize.pow(3) - 2);
        let a = t.sample(42);
        assert_eq!(a, t.sample(42));
        assert_ne!(a, t.sample(43));
        assert_eq!(a.couplings_1.len(), a.couplings_2.len());
        assert_eq!(a.sites.len(), a.couplings_1.len());
        assert!(a.couplings_1.iter().chain(&a.couplings_2).all(|c| c.abs() <= 50.0));
        assert!(a.n_drawn >= a.len());
    }

    #[test]
    fn drawn_count_matches_binomial_mean() {
        let cfg = LatticeConfig::default();
        let t = BathTemplate::new(&cfg, BathCenter::Single).unwrap();
        let n_seeds = 200;
        let counts: Vec<f64> = (0..n_seeds).map(|i| t.sample(bath_seed(9, i)).n_drawn as f64).collect();
        let mean = counts.iter().sum::<f64>() / n_seeds as f64;
        let p = cfg.abundance;
        let n = t.candidates() as f64;
        let se = (n * p * (1.0 - p) / n_seeds as f64).sqrt();
        assert!((mean - n * p).abs() < 5.0 * se, "mean {mean} vs {}", n * p);
    }

    #[test]
    fn census_zero_abundance() {
        let cfg = LatticeConfig { abundance: 0.0, cells_per_axis: 4, ..Default::default() };
        let r = pair_census(&cfg, 10, &CensusConfig::default(), 1).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.frac_ge1, 0.0);
    }

    #[test]
    fn census_rejects_empty_window() {
        let cfg = LatticeConfig::default();
        let c = CensusConfig { z_range: (500.0, 50.0), ..Default::default() };
        assert!(matches!(pair_census(&cfg, 10, &c, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn coupling_table_leading_entries() {
        let t = coupling_table(&LatticeConfig::default(), 8.0).unwrap();
        assert!((t[0].x - 2062.37).abs() < 0.01);
        assert_eq!(t[0].occurrence, 1);
        assert_eq!(t[0].r, [1, 1, 1]);
        assert_eq!(t[2].occurrence, 12);
        assert_eq!(t[2].x.round(), 237.0);
    }

    proptest! {
        #[test]
        fn cube_law(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.1f64..5.0) {
            let r = Vector3::meters(x, y, z).scale(1e-10);
            let a = dipolar_x(&r, &axis_111()).unwrap();
            let b = dipolar_x(&r.scale(2.0), &axis_111()).unwrap();
            prop_assert!((a / 8.0 - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }

        #[test]
        fn parallel_is_minus_two_perpendicular(d in 1e-10f64..1e-8) {
            let zax = Vector3::meters(0.0, 0.0, 1.0);
            let par = dipolar_x(&Vector3::meters(0.0, 0.0, d), &zax).unwrap();
            let perp = dipolar_x(&Vector3::meters(d, 0.0, 0.0), &zax).unwrap();
            prop_assert!((par + 2.0 * perp).abs() <= 1e-12 * par.abs());
        }

        #[test]
        fn table_invariant_under_component_permutation(perm in 0usize..6) {
            // a permutation of coordinates maps [1,1,1] to itself, so the table is unchanged
            let p = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]][perm];
            let base = coupling_table(&LatticeConfig::default(), 6.0).unwrap();
            for e in base.iter().take(15) {
                let v = [e.r[p[0]], e.r[p[1]], e.r[p[2]]];
                let x = dipolar_x(&Vector3::lattice(v).to_meters(DIAMOND_A0), &axis_111()).unwrap();
                prop_assert!((x.abs() - e.x).abs() < 0.005);
            }
        }
    }
}
