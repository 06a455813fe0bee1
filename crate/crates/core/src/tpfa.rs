//! Vertex-centred two-point flux discretization of a Cartesian lattice, used
//! as an independent reference for the meshless scheme.

use crate::assembler::{BoundaryGeometry, Connection, Discretization, TransmissibilitySet};
use crate::error::{Error, Result};
use crate::flow::harmonic_perm;

/// Lattice of `nx` by `ny` nodes in the same order as
/// [`PointCloud::rectangle`](crate::pointcloud::PointCloud::rectangle).
/// Edge nodes own half cells and corner nodes quarter cells.
pub fn cartesian(origin: [f64; 2], nx: usize, ny: usize, dx: f64, dy: f64, thickness: f64, perm: &[f64]) -> Result<Discretization> {
    if nx < 2 || ny < 2 || !(dx > 0.0 && dy > 0.0 && thickness > 0.0) {
        return Err(Error::InvalidInput("lattice needs at least 2x2 nodes and positive sizes".into()));
    }
    if perm.len() != nx * ny {
        return Err(Error::InvalidInput(format!("expected {} permeabilities, got {}", nx * ny, perm.len())));
    }
    let id = |i: usize, j: usize| j * nx + i;
    let half = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let mut coords = Vec::with_capacity(nx * ny);
    let mut area = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            coords.push([origin[0] + i as f64 * dx, origin[1] + j as f64 * dy]);
            area.push(dx * dy * half(i, nx) * half(j, ny));
        }
    }
    let mut connections = Vec::new();
    let mut push = |a: usize, b: usize, t_geo: f64| {
        let k = harmonic_perm(perm[a], perm[b]);
        connections.push(Connection {
            i: a.min(b),
            j: a.max(b),
            t_geo,
            perm: k,
            trans: k * t_geo,
            asymmetry: 0.0,
        });
    };
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                push(id(i, j), id(i + 1, j), thickness * dy * half(j, ny) / dx);
            }
            if j + 1 < ny {
                push(id(i, j), id(i, j + 1), thickness * dx * half(i, nx) / dy);
            }
        }
    }
    connections.sort_by_key(|c| (c.i, c.j));
    Ok(Discretization {
        coords,
        effective_area: area,
        thickness,
        trans: TransmissibilitySet {
            connections,
            dropped: Vec::new(),
        },
        boundary: BoundaryGeometry::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_and_transmissibilities() {
        let d = cartesian([0.0, 0.0], 3, 3, 10.0, 10.0, 3.0, &[100.0; 9]).unwrap();
        assert_eq!(d.effective_area, vec![25.0, 50.0, 25.0, 50.0, 100.0, 50.0, 25.0, 50.0, 25.0]);
        assert_eq!(d.trans.find(3, 4).unwrap().trans, 300.0);
        assert_eq!(d.trans.find(0, 1).unwrap().trans, 150.0);
        assert_eq!(d.trans.connections.len(), 12);
        let total: f64 = d.effective_area.iter().sum();
        assert_eq!(total, 400.0);
    }

    #[test]
    fn anisotropic_spacing() {
        let d = cartesian([0.0, 0.0], 3, 3, 10.0, 5.0, 1.0, &[1.0; 9]).unwrap();
        assert_eq!(d.trans.find(3, 4).unwrap().t_geo, 0.5);
        assert_eq!(d.trans.find(1, 4).unwrap().t_geo, 2.0);
    }
}
