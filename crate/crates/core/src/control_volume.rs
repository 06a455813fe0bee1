//! Node control volumes recovered from stencil coefficients.
//!
//! For every connected pair of real nodes the flux-symmetry condition
//! `V_i a_ij = V_j a_ji` (with `a` the Laplacian coefficient) gives one
//! homogeneous equation. A penalty row ties the angle-weighted volumes to
//! the domain area, and the whole system is solved in the least-squares
//! sense. Volumes here are planar areas; multiply by thickness for bulk
//! volume.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::gfdm::LocalStencil;
use crate::lsq::{solve_least_squares, LsqMethod};
use crate::pointcloud::{CharacteristicAngles, ConnectivityGraph};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CvWeighting {
    /// Unweighted pair rows.
    Plain,
    /// Pair rows scaled by `min(a_ij, a_ji) / max(a_ij, a_ji)`.
    #[default]
    Empirical,
}

impl fmt::Display for CvWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvWeighting::Plain => "plain",
            CvWeighting::Empirical => "empirical",
        })
    }
}

impl FromStr for CvWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plain" => Ok(CvWeighting::Plain),
            "empirical" => Ok(CvWeighting::Empirical),
            other => Err(Error::InvalidInput(format!("unknown control-volume weighting '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvConfig {
    pub weighting: CvWeighting,
    /// Penalty on the total-area row, relative to the pair rows.
    pub penalty: f64,
    pub tolerance: f64,
    /// Systems with fewer unknowns are solved by dense QR.
    pub dense_limit: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            weighting: CvWeighting::Empirical,
            penalty: 1e6,
            tolerance: 1e-12,
            dense_limit: 2000,
        }
    }
}

/// Weight of a pair row; both coefficients must be positive.
pub fn pair_weight(a_ij: f64, a_ji: f64) -> f64 {
    a_ij.min(a_ji) / a_ij.max(a_ji)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvPair {
    pub i: usize,
    pub j: usize,
    pub a_ij: f64,
    pub a_ji: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvSystem {
    pub n: usize,
    pub pairs: Vec<CvPair>,
    /// Pairs left out because a Laplacian coefficient was not positive.
    pub dropped: Vec<(usize, usize)>,
    /// `theta_i / 2 pi` per node.
    pub fractions: Vec<f64>,
    pub penalty: f64,
    pub area: f64,
    /// Common factor applied to every pair row.
    pub row_scale: f64,
}

impl CvSystem {
    pub fn n_rows(&self) -> usize {
        self.pairs.len() + 1
    }

    pub fn matrix(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.n_rows(), self.n);
        for (r, p) in self.pairs.iter().enumerate() {
            let s = p.weight * self.row_scale;
            t.push(r, p.i, s * p.a_ij);
            t.push(r, p.j, -s * p.a_ji);
        }
        let last = self.pairs.len();
        for (i, &f) in self.fractions.iter().enumerate() {
            t.push(last, i, self.penalty * f);
        }
        t.to_csr()
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.n_rows()];
        b[self.pairs.len()] = self.penalty * self.area;
        b
    }
}

/// Builds pair rows for every real-real connection plus the area row.
pub fn assemble_cv_system(
    stencils: &[LocalStencil],
    graph: &ConnectivityGraph,
    angles: &CharacteristicAngles,
    domain_area: f64,
    config: &CvConfig,
) -> Result<CvSystem> {
    let n = stencils.len();
    if angles.theta.len() != n {
        return Err(Error::InvalidInput("angle and stencil counts differ".into()));
    }
    if !(domain_area > 0.0) || !(config.penalty > 0.0) {
        return Err(Error::InvalidInput("domain area and penalty must be positive".into()));
    }
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for (i, j) in graph.real_pairs(n) {
        let a_ij = stencils[i].laplacian_coefficient(j)?;
        let a_ji = stencils[j].laplacian_coefficient(i)?;
        if a_ij <= 0.0 || a_ji <= 0.0 {
            debug!("dropping pair ({i}, {j}): a_ij = {a_ij:.4e}, a_ji = {a_ji:.4e}");
            dropped.push((i, j));
            continue;
        }
        let weight = match config.weighting {
            CvWeighting::Plain => 1.0,
            CvWeighting::Empirical => pair_weight(a_ij, a_ji),
        };
        pairs.push(CvPair { i, j, a_ij, a_ji, weight });
    }
    if pairs.is_empty() {
        return Err(Error::NoPairEquations);
    }
    if !dropped.is_empty() {
        warn!("{} of {} node pairs dropped from the volume system", dropped.len(), dropped.len() + pairs.len());
    }
    let mut mags: Vec<f64> = pairs.iter().flat_map(|p| [p.a_ij, p.a_ji]).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    Ok(CvSystem {
        n,
        pairs,
        dropped,
        fractions: angles.theta.iter().map(|t| t / (2.0 * PI)).collect(),
        penalty: config.penalty,
        area: domain_area,
        row_scale: 1.0 / median,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlVolumeSolution {
    /// Raw volume (area) per real node.
    pub volume: Vec<f64>,
    /// Angle-weighted volume `theta / 2 pi * V`.
    pub effective: Vec<f64>,
    pub theta: Vec<f64>,
    pub residual_norm: f64,
    /// `|sum(V_bar) - area| / area`.
    pub constraint_error: f64,
    pub method: LsqMethod,
    pub iterations: usize,
}

impl ControlVolumeSolution {
    pub fn total_effective(&self) -> f64 {
        self.effective.iter().sum()
    }
}

pub fn solve_cv(system: &CvSystem, config: &CvConfig) -> Result<ControlVolumeSolution> {
    let a = system.matrix();
    let b = system.rhs();
    let sol = solve_least_squares(&a, &b, config.tolerance, config.dense_limit)?;
    let v = sol.x;
    let negative: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| !(x > 0.0)).map(|(i, _)| i).collect();
    if !negative.is_empty() {
        return Err(Error::NegativeVolume { nodes: negative });
    }
    let ax = a.mul_vec(&v);
    let residual_norm = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let effective: Vec<f64> = v.iter().zip(&system.fractions).map(|(x, f)| x * f).collect();
    let total: f64 = effective.iter().sum();
    Ok(ControlVolumeSolution {
        theta: system.fractions.iter().map(|f| f * 2.0 * PI).collect(),
        constraint_error: (total - system.area).abs() / system.area,
        volume: v,
        effective,
        residual_norm,
        method: sol.method,
        iterations: sol.iterations,
    })
}

/// Assembles and solves in one step.
pub fn compute_control_volumes(
    stencils: &[LocalStencil],
    graph: &ConnectivityGraph,
    angles: &CharacteristicAngles,
    domain_area: f64,
    config: &CvConfig,
) -> Result<ControlVolumeSolution> {
    let system = assemble_cv_system(stencils, graph, angles, domain_area, config)?;
    solve_cv(&system, config)
}

/// Spread `(max - min) / mean` of a set of volumes.
pub fn relative_spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (hi - lo) / mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfdm::{build_stencils, WeightKind};
    use crate::pointcloud::{
        add_virtual_nodes_with, build_radius_connectivity, characteristic_angles, PointCloud, VirtualLayout, VirtualSpacing,
    };

    fn solve_lattice(n: usize, spacing: f64, radius: f64, weight: WeightKind, cfg: &CvConfig) -> (PointCloud, ControlVolumeSolution) {
        let c = PointCloud::rectangle([0.0, 0.0], n, n, spacing, spacing, 1.0).unwrap();
        let c = add_virtual_nodes_with(&c, VirtualSpacing::Fixed(spacing), VirtualLayout::CornerFan).unwrap();
        let g = build_radius_connectivity(&c, radius).unwrap();
        let st = build_stencils(&c, &g, weight).unwrap();
        let ang = characteristic_angles(&c).unwrap();
        let sol = compute_control_volumes(&st, &g, &ang, c.domain_area(), cfg).unwrap();
        (c, sol)
    }

    #[test]
    fn three_by_three_square() {
        let (_, sol) = solve_lattice(3, 10.0, 10.0 * 2f64.sqrt() + 0.1, WeightKind::InverseCube, &CvConfig::default());
        for i in [0, 2, 6, 8] {
            assert!((sol.effective[i] - 25.0).abs() < 1e-6, "corner {}", sol.effective[i]);
        }
        for i in [1, 3, 5, 7] {
            assert!((sol.effective[i] - 50.0).abs() < 1e-6);
        }
        assert!((sol.effective[4] - 100.0).abs() < 1e-6);
        assert!(sol.constraint_error < 1e-10);
    }

    #[test]
    fn pair_weight_values() {
        assert_eq!(pair_weight(0.5, 0.5), 1.0);
        assert_eq!(pair_weight(0.25, 1.0), 0.25);
        assert_eq!(pair_weight(1.0, 0.25), 0.25);
    }

    #[test]
    fn lsqr_path_matches_qr() {
        let qr_cfg = CvConfig::default();
        let it_cfg = CvConfig {
            dense_limit: 0,
            penalty: 1e3,
            ..CvConfig::default()
        };
        let qr3 = CvConfig { penalty: 1e3, ..qr_cfg };
        let (_, a) = solve_lattice(7, 1.0, 2.1, WeightKind::InverseCube, &qr3);
        let (_, b) = solve_lattice(7, 1.0, 2.1, WeightKind::InverseCube, &it_cfg);
        assert_eq!(b.method, LsqMethod::Lsqr);
        for (p, q) in a.volume.iter().zip(&b.volume) {
            assert!((p - q).abs() < 1e-8 * p.abs());
        }
    }

    #[test]
    fn no_pairs_is_an_error() {
        let (c, _) = solve_lattice(3, 10.0, 10.0 * 2f64.sqrt() + 0.1, WeightKind::InverseCube, &CvConfig::default());
        let g = build_radius_connectivity(&c, 10.0 * 2f64.sqrt() + 0.1).unwrap();
        let st = build_stencils(&c, &g, WeightKind::InverseCube).unwrap();
        let ang = characteristic_angles(&c).unwrap();
        let mut g2 = g.clone();
        // strip every real-real link; only virtual links remain
        let n = c.n_real();
        for (i, nb) in g2.neighbors.iter_mut().enumerate() {
            nb.retain(|&j| i >= n || j >= n);
        }
        assert!(matches!(
            assemble_cv_system(&st, &g2, &ang, 400.0, &CvConfig::default()),
            Err(Error::NoPairEquations)
        ));
    }

    #[test]
    fn negative_volume_is_reported() {
        let sys = CvSystem {
            n: 2,
            pairs: vec![CvPair {
                i: 0,
                j: 1,
                a_ij: 1.0,
                a_ji: -2.0,
                weight: 1.0,
            }],
            dropped: vec![],
            fractions: vec![1.0, 1.0],
            penalty: 1.0,
            area: 1.0,
            row_scale: 1.0,
        };
        assert!(matches!(solve_cv(&sys, &CvConfig::default()), Err(Error::NegativeVolume { .. })));
    }

    #[test]
    fn weighting_names_round_trip() {
        for w in [CvWeighting::Plain, CvWeighting::Empirical] {
            assert_eq!(w.to_string().parse::<CvWeighting>().unwrap(), w);
        }
    }
}
