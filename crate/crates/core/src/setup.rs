//! Glue from a point cloud to a ready-to-run [`FlowModel`].

use crate::assembler::{BoundaryConditionSet, Discretization, FlowModel};
use crate::control_volume::{compute_control_volumes, ControlVolumeSolution, CvConfig};
use crate::error::Result;
use crate::flow::{FluidProps, RelPermTable, RockProps, WellSpec};
use crate::gfdm::{build_stencils, LocalStencil, WeightKind};
use crate::pointcloud::{characteristic_angles, CharacteristicAngles, ConnectivityGraph, PointCloud};

/// All intermediate products of the meshless discretization.
#[derive(Clone, Debug)]
pub struct Meshless {
    pub cloud: PointCloud,
    pub graph: ConnectivityGraph,
    pub stencils: Vec<LocalStencil>,
    pub angles: CharacteristicAngles,
    pub cv: ControlVolumeSolution,
}

impl Meshless {
    /// `cloud` should already carry its virtual nodes.
    pub fn build(cloud: PointCloud, graph: ConnectivityGraph, weight: WeightKind, cv: &CvConfig) -> Result<Self> {
        let stencils = build_stencils(&cloud, &graph, weight)?;
        let angles = characteristic_angles(&cloud)?;
        let cv = compute_control_volumes(&stencils, &graph, &angles, cloud.domain_area(), cv)?;
        Ok(Meshless {
            cloud,
            graph,
            stencils,
            angles,
            cv,
        })
    }

    pub fn discretization(&self, rock: &RockProps) -> Result<Discretization> {
        Discretization::ncdmm(&self.cloud, &self.graph, &self.stencils, &self.cv, rock)
    }

    /// Convenience for homogeneous models with closed boundaries.
    pub fn model(&self, rock: RockProps, fluid: FluidProps, relperm: RelPermTable, wells: Vec<WellSpec>) -> Result<FlowModel> {
        let disc = self.discretization(&rock)?;
        let n = disc.n_nodes();
        FlowModel::new(disc, fluid, rock, relperm, wells, BoundaryConditionSet::closed(n))
    }
}
