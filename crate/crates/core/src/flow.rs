//! Fluid, rock and well models for black-oil two-phase (oil/water) flow.
//!
//! Units throughout: pressure MPa, time day, length m, permeability mD,
//! viscosity mPa·s, rates in surface m³/day.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Converts `mD · m · MPa / (mPa·s)` to `m³/day`: mD to m², MPa/(mPa·s)
/// to 1/s, seconds to days.
pub const DARCY: f64 = 9.869233e-16 * 1e9 * 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Oil,
    Water,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidProps {
    pub mu_oil: f64,
    pub mu_water: f64,
    /// Oil compressibility, 1/MPa.
    pub c_oil: f64,
    pub c_water: f64,
    /// Formation volume factors at the reference pressure.
    pub b_oil_ref: f64,
    pub b_water_ref: f64,
    pub p_ref: f64,
}

impl Default for FluidProps {
    fn default() -> Self {
        FluidProps {
            mu_oil: 2.0,
            mu_water: 0.6,
            c_oil: 3e-3,
            c_water: 4e-4,
            b_oil_ref: 1.0,
            b_water_ref: 1.0,
            p_ref: 15.0,
        }
    }
}

impl FluidProps {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("oil viscosity", self.mu_oil),
            ("water viscosity", self.mu_water),
            ("oil formation volume factor", self.b_oil_ref),
            ("water formation volume factor", self.b_water_ref),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.c_oil < 0.0 || self.c_water < 0.0 {
            return Err(Error::InvalidInput("compressibilities must be non-negative".into()));
        }
        Ok(())
    }

    pub fn viscosity(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Oil => self.mu_oil,
            Phase::Water => self.mu_water,
        }
    }

    /// Formation volume factor and its pressure derivative.
    pub fn fvf(&self, phase: Phase, p: f64) -> Result<(f64, f64)> {
        let (b0, c) = match phase {
            Phase::Oil => (self.b_oil_ref, self.c_oil),
            Phase::Water => (self.b_water_ref, self.c_water),
        };
        let den = 1.0 + c * (p - self.p_ref);
        if !(den > 0.0) {
            return Err(Error::Unphysical(format!("formation volume factor undefined at p = {p} MPa")));
        }
        let b = b0 / den;
        Ok((b, -b * c / den))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RockProps {
    pub porosity_ref: f64,
    /// Rock compressibility, 1/MPa.
    pub c_rock: f64,
    pub p_ref: f64,
    /// Permeability per real node, mD.
    pub permeability: Vec<f64>,
    pub thickness: f64,
}

impl RockProps {
    pub fn uniform(n: usize, porosity: f64, c_rock: f64, p_ref: f64, perm: f64, thickness: f64) -> Self {
        RockProps {
            porosity_ref: porosity,
            c_rock,
            p_ref,
            permeability: vec![perm; n],
            thickness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.porosity_ref > 0.0 && self.porosity_ref <= 1.0) {
            return Err(Error::InvalidInput(format!("porosity {} outside (0, 1]", self.porosity_ref)));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::InvalidInput("thickness must be positive".into()));
        }
        if let Some(k) = self.permeability.iter().find(|k| !(**k >= 0.0)) {
            return Err(Error::InvalidInput(format!("negative permeability {k}")));
        }
        Ok(())
    }

    /// Porosity and its pressure derivative.
    pub fn porosity(&self, p: f64) -> Result<(f64, f64)> {
        let d = self.porosity_ref * self.c_rock;
        let phi = self.porosity_ref + d * (p - self.p_ref);
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::Unphysical(format!("porosity {phi} at p = {p} MPa")));
        }
        Ok((phi, d))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelPermTable {
    pub sw: Vec<f64>,
    pub krw: Vec<f64>,
    pub kro: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelPerm {
    pub krw: f64,
    pub kro: f64,
    pub dkrw: f64,
    pub dkro: f64,
}

impl RelPermTable {
    pub fn new(sw: Vec<f64>, krw: Vec<f64>, kro: Vec<f64>) -> Result<Self> {
        if sw.len() < 2 || sw.len() != krw.len() || sw.len() != kro.len() {
            return Err(Error::InvalidInput("relative permeability table needs at least two rows of three columns".into()));
        }
        if sw.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("water saturations must be strictly increasing".into()));
        }
        if krw.iter().chain(&kro).any(|k| !(0.0..=1.0).contains(k)) {
            return Err(Error::InvalidInput("relative permeabilities must lie in [0, 1]".into()));
        }
        if krw.windows(2).any(|w| w[1] < w[0]) || kro.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("k_rw must be non-decreasing and k_ro non-increasing".into()));
        }
        Ok(RelPermTable { sw, krw, kro })
    }

    /// Quadratic Corey curves between S_w = 0.2 and 0.8 tabulated every 0.05.
    pub fn standard() -> Self {
        let sw: Vec<f64> = (0..13).map(|k| 0.2 + 0.05 * k as f64).collect();
        let krw = [0.0, 0.0069, 0.0278, 0.0625, 0.1111, 0.1736, 0.25, 0.3403, 0.4444, 0.5625, 0.6944, 0.8403, 1.0];
        let mut kro = krw;
        kro.reverse();
        RelPermTable::new(sw, krw.to_vec(), kro.to_vec()).expect("static table is valid")
    }

    /// Piecewise-linear lookup, held constant outside the table. Slopes at a
    /// breakpoint are taken from the segment to the right.
    pub fn eval(&self, sw: f64) -> RelPerm {
        let n = self.sw.len();
        if sw <= self.sw[0] {
            return RelPerm {
                krw: self.krw[0],
                kro: self.kro[0],
                dkrw: 0.0,
                dkro: 0.0,
            };
        }
        if sw >= self.sw[n - 1] {
            return RelPerm {
                krw: self.krw[n - 1],
                kro: self.kro[n - 1],
                dkrw: 0.0,
                dkro: 0.0,
            };
        }
        let k = self.sw.partition_point(|&s| s <= sw) - 1;
        let ds = self.sw[k + 1] - self.sw[k];
        let t = (sw - self.sw[k]) / ds;
        let dkrw = (self.krw[k + 1] - self.krw[k]) / ds;
        let dkro = (self.kro[k + 1] - self.kro[k]) / ds;
        RelPerm {
            krw: self.krw[k] + t * (self.krw[k + 1] - self.krw[k]),
            kro: self.kro[k] + t * (self.kro[k + 1] - self.kro[k]),
            dkrw,
            dkro,
        }
    }
}

pub fn relperm(table: &RelPermTable, sw: f64) -> (f64, f64) {
    let r = table.eval(sw);
    (r.krw, r.kro)
}

pub fn harmonic_perm(k_i: f64, k_j: f64) -> f64 {
    if k_i <= 0.0 || k_j <= 0.0 {
        0.0
    } else {
        2.0 * k_i * k_j / (k_i + k_j)
    }
}

pub fn iface_arithmetic(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Relative permeability from the higher-pressure side (`j` on ties).
pub fn upwind_relperm(kr_i: f64, kr_j: f64, p_i: f64, p_j: f64) -> f64 {
    if p_j >= p_i {
        kr_j
    } else {
        kr_i
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WellKind {
    Producer,
    WaterInjector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WellControl {
    /// Surface rate, m³/day, positive.
    Rate(f64),
    /// Bottom-hole pressure, MPa.
    Bhp(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellSpec {
    pub name: String,
    pub node: usize,
    pub kind: WellKind,
    pub control: WellControl,
    pub radius: f64,
    pub skin: f64,
}

/// Geometric well index `2 pi k h / (ln(r_e / r_w) + s)` in mD·m, with the
/// equivalent radius `0.14 sqrt(2 V / h)` from the node's in-domain bulk
/// volume `V`. Multiply by [`DARCY`] and a mobility for a rate per MPa.
pub fn well_index(k: f64, h: f64, bulk_volume: f64, r_w: f64, skin: f64) -> Result<f64> {
    if !(bulk_volume > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidInput(format!("well index needs positive volume and thickness, got {bulk_volume}, {h}")));
    }
    let r_e = 0.14 * (2.0 * bulk_volume / h).sqrt();
    well_index_from_radius(k, h, r_e, r_w, skin)
}

pub fn well_index_from_radius(k: f64, h: f64, r_e: f64, r_w: f64, skin: f64) -> Result<f64> {
    if !(r_e > r_w) || !(r_w > 0.0) {
        return Err(Error::WellRadius { r_e, r_w });
    }
    let den = (r_e / r_w).ln() + skin;
    if !(den > 0.0) {
        return Err(Error::InvalidInput(format!("skin {skin} makes the well index denominator non-positive")));
    }
    Ok(2.0 * PI * k * h / den)
}

/// Surface-rate source terms `(q_oil, q_water)` of a well at a node, m³/day,
/// positive into the reservoir.
#[allow(clippy::too_many_arguments)]
pub fn well_source(
    kind: WellKind,
    wi: f64,
    p_wf: f64,
    p: f64,
    sw: f64,
    fluid: &FluidProps,
    table: &RelPermTable,
) -> Result<(f64, f64)> {
    let r = table.eval(sw);
    let (bo, _) = fluid.fvf(Phase::Oil, p)?;
    let (bw, _) = fluid.fvf(Phase::Water, p)?;
    let dp = p_wf - p;
    Ok(match kind {
        WellKind::Producer => (
            DARCY * wi * r.kro / (bo * fluid.mu_oil) * dp,
            DARCY * wi * r.krw / (bw * fluid.mu_water) * dp,
        ),
        WellKind::WaterInjector => (0.0, DARCY * wi * (r.kro / fluid.mu_oil + r.krw / fluid.mu_water) / bw * dp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn darcy_constant() {
        assert!((DARCY - 0.08527017312).abs() < 1e-12);
    }

    #[test]
    fn fvf_at_reference_and_above() {
        let f = FluidProps::default();
        let (b, _) = f.fvf(Phase::Oil, 15.0).unwrap();
        assert_eq!(b, 1.0);
        let (b, db) = f.fvf(Phase::Oil, 16.0).unwrap();
        assert!((b - 1.0 / 1.003).abs() < 1e-15);
        let eps = 1e-6;
        let fd = (f.fvf(Phase::Oil, 16.0 + eps).unwrap().0 - f.fvf(Phase::Oil, 16.0 - eps).unwrap().0) / (2.0 * eps);
        assert!((db - fd).abs() < 1e-9);
    }

    #[test]
    fn porosity_values() {
        let r = RockProps::uniform(1, 0.2, 1e-4, 15.0, 100.0, 3.0);
        assert!((r.porosity(20.0).unwrap().0 - 0.2001).abs() < 1e-15);
        assert_eq!(r.porosity(15.0).unwrap().0, 0.2);
        let r0 = RockProps::uniform(1, 0.2, 0.0, 15.0, 100.0, 3.0);
        assert_eq!(r0.porosity(40.0).unwrap().0, 0.2);
        let wild = RockProps::uniform(1, 0.2, 1.0, 15.0, 100.0, 3.0);
        assert!(wild.porosity(-5.0).is_err());
    }

    #[test]
    fn relperm_midpoint() {
        let (krw, kro) = relperm(&RelPermTable::standard(), 0.275);
        assert!((krw - 0.01735).abs() < 1e-12);
        assert!((kro - 0.76735).abs() < 1e-12);
    }

    #[test]
    fn relperm_lookup() {
        let t = RelPermTable::standard();
        assert_eq!(relperm(&t, 0.2), (0.0, 1.0));
        assert_eq!(relperm(&t, 0.5), (0.25, 0.25));
        let (krw, kro) = relperm(&t, 0.225);
        assert!((krw - 0.00345).abs() < 1e-12);
        assert!((kro - 0.92015).abs() < 1e-12);
        assert_eq!(relperm(&t, 0.1), (0.0, 1.0));
        assert_eq!(relperm(&t, 0.9), (1.0, 0.0));
    }

    #[test]
    fn relperm_rejects_bad_tables() {
        assert!(RelPermTable::new(vec![0.2, 0.2], vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(RelPermTable::new(vec![0.2, 0.8], vec![0.0, 1.1], vec![1.0, 0.0]).is_err());
        assert!(RelPermTable::new(vec![0.2, 0.8], vec![0.5, 0.1], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn interface_averages() {
        assert_eq!(harmonic_perm(100.0, 100.0), 100.0);
        assert_eq!(harmonic_perm(100.0, 0.0), 0.0);
        assert!((harmonic_perm(100.0, 300.0) - 150.0).abs() < 1e-12);
        assert_eq!(iface_arithmetic(1.0, 3.0), 2.0);
        assert_eq!(upwind_relperm(0.1, 0.7, 20.0, 15.0), 0.1);
        assert_eq!(upwind_relperm(0.1, 0.7, 15.0, 15.0), 0.7);
    }

    #[test]
    fn well_index_values() {
        let k = 100.0;
        let h = 3.0;
        let wi = well_index_from_radius(k, h, 0.1 * std::f64::consts::E, 0.1, 0.0).unwrap();
        assert!((wi - 2.0 * PI * k * h).abs() < 1e-9);
        assert!(matches!(well_index_from_radius(k, h, 0.05, 0.1, 0.0), Err(Error::WellRadius { .. })));
        // 10 m square cell: r_e = 0.14 * sqrt(200)
        let wi = well_index(k, h, 100.0 * h, 0.1, 0.0).unwrap();
        assert!((wi - 2.0 * PI * k * h / (0.14 * 200f64.sqrt() / 0.1).ln()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn relperm_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let t = RelPermTable::standard();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (rl, rh) = (t.eval(lo), t.eval(hi));
            prop_assert!(rl.krw <= rh.krw + 1e-15);
            prop_assert!(rl.kro >= rh.kro - 1e-15);
        }

        #[test]
        fn harmonic_below_arithmetic(a in 1e-3f64..1e4, b in 1e-3f64..1e4) {
            prop_assert!(harmonic_perm(a, b) <= iface_arithmetic(a, b) * (1.0 + 1e-14));
        }

        #[test]
        fn upwind_picks_one_side(pi in 0.0f64..30.0, pj in 0.0f64..30.0, ki in 0.0f64..1.0, kj in 0.0f64..1.0) {
            let k = upwind_relperm(ki, kj, pi, pj);
            prop_assert!(k == ki || k == kj);
        }

        #[test]
        fn well_source_signs(p in 5.0f64..30.0, dp in 0.0f64..5.0, sw in 0.0f64..1.0) {
            let f = FluidProps::default();
            let t = RelPermTable::standard();
            let (qo, qw) = well_source(WellKind::Producer, 50.0, p - dp, p, sw, &f, &t).unwrap();
            prop_assert!(qo <= 0.0 && qw <= 0.0);
            let (qo, qw) = well_source(WellKind::WaterInjector, 50.0, p + dp, p, sw, &f, &t).unwrap();
            prop_assert!(qo == 0.0 && qw >= 0.0);
        }
    }

    #[test]
    fn producer_and_injector_sources() {
        let f = FluidProps::default();
        let t = RelPermTable::standard();
        let (qo, qw) = well_source(WellKind::Producer, 1.0, 14.0, 15.0, 0.2, &f, &t).unwrap();
        assert!(qo < 0.0 && qw == 0.0);
        assert!((qo + DARCY / 2.0).abs() < 1e-15);
        let (qo, qw) = well_source(WellKind::WaterInjector, 1.0, 16.0, 15.0, 0.2, &f, &t).unwrap();
        assert_eq!(qo, 0.0);
        assert!((qw - DARCY / 2.0).abs() < 1e-15);
    }
}
