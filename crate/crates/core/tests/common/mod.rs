#![allow(dead_code)]

use ncdmm::assembler::{BoundaryCondition, BoundaryConditionSet, FlowModel};
use ncdmm::control_volume::CvConfig;
use ncdmm::flow::{FluidProps, RelPermTable, RockProps, WellControl, WellKind, WellSpec};
use ncdmm::gfdm::WeightKind;
use ncdmm::pointcloud::{add_virtual_nodes_with, build_radius_connectivity, PointCloud, VirtualLayout, VirtualSpacing};
use ncdmm::setup::Meshless;
use ncdmm::tpfa;

pub const THICKNESS: f64 = 3.0;
pub const PERM: f64 = 100.0;

/// Cartesian lattice with corner-fan virtual nodes one spacing outside.
pub fn lattice(nx: usize, ny: usize, spacing: f64, radius_factor: f64, weight: WeightKind, cv: &CvConfig) -> Meshless {
    let cloud = PointCloud::rectangle([0.0, 0.0], nx, ny, spacing, spacing, THICKNESS).unwrap();
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::Fixed(spacing), VirtualLayout::CornerFan).unwrap();
    let graph = build_radius_connectivity(&cloud, radius_factor * spacing).unwrap();
    Meshless::build(cloud, graph, weight, cv).unwrap()
}

pub fn rock(n: usize) -> RockProps {
    RockProps::uniform(n, 0.2, 1e-4, 15.0, PERM, THICKNESS)
}

pub fn meshless_model(mesh: &Meshless, wells: Vec<WellSpec>, bcs: Option<BoundaryConditionSet>) -> FlowModel {
    let n = mesh.cloud.n_real();
    let r = rock(n);
    let disc = mesh.discretization(&r).unwrap();
    FlowModel::new(
        disc,
        FluidProps::default(),
        r,
        RelPermTable::standard(),
        wells,
        bcs.unwrap_or_else(|| BoundaryConditionSet::closed(n)),
    )
    .unwrap()
}

pub fn tpfa_model(nx: usize, ny: usize, spacing: f64, wells: Vec<WellSpec>, bcs: Option<BoundaryConditionSet>) -> FlowModel {
    let n = nx * ny;
    let disc = tpfa::cartesian([0.0, 0.0], nx, ny, spacing, spacing, THICKNESS, &vec![PERM; n]).unwrap();
    FlowModel::new(
        disc,
        FluidProps::default(),
        rock(n),
        RelPermTable::standard(),
        wells,
        bcs.unwrap_or_else(|| BoundaryConditionSet::closed(n)),
    )
    .unwrap()
}

pub fn well(name: &str, node: usize, kind: WellKind, control: WellControl) -> WellSpec {
    WellSpec {
        name: name.into(),
        node,
        kind,
        control,
        radius: 0.1,
        skin: 0.0,
    }
}

/// Dirichlet on the left and right faces of an `nx` by `ny` lattice and
/// `sides` on the top and bottom.
pub fn left_right_dirichlet(nx: usize, ny: usize, p_left: f64, p_right: f64, sw: f64, sides: BoundaryCondition) -> BoundaryConditionSet {
    let mut bcs = BoundaryConditionSet::closed(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let id = j * nx + i;
            if i == 0 {
                bcs.set(id, BoundaryCondition::Dirichlet { pressure: p_left, sw });
            } else if i == nx - 1 {
                bcs.set(id, BoundaryCondition::Dirichlet { pressure: p_right, sw });
            } else if j == 0 || j == ny - 1 {
                bcs.set(id, sides);
            }
        }
    }
    bcs
}

pub fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
