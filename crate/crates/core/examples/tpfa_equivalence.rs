//! On a Cartesian lattice with axial (4-neighbor) connectivity the meshless
//! transmissibilities collapse onto the two-point network.

use ncdmm::control_volume::CvConfig;
use ncdmm::flow::RockProps;
use ncdmm::gfdm::WeightKind;
use ncdmm::pointcloud::{add_virtual_nodes_with, build_radius_connectivity, PointCloud, VirtualLayout, VirtualSpacing};
use ncdmm::setup::Meshless;
use ncdmm::tpfa;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (nx, ny, h, k, thickness) = (6, 4, 10.0, 100.0, 3.0);
    let n = nx * ny;
    let rock = RockProps::uniform(n, 0.2, 1e-4, 15.0, k, thickness);

    let cloud = PointCloud::rectangle([0.0, 0.0], nx, ny, h, h, thickness)?;
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::Fixed(h), VirtualLayout::CornerFan)?;
    let graph = build_radius_connectivity(&cloud, 1.1 * h)?;
    let mesh = Meshless::build(cloud, graph, WeightKind::InverseCube, &CvConfig::default())?;
    let meshless = mesh.discretization(&rock)?;
    let reference = tpfa::cartesian([0.0, 0.0], nx, ny, h, h, thickness, &vec![k; n])?;

    println!("{:>4} {:>4} {:>14} {:>14} {:>10}", "i", "j", "meshless", "two-point", "rel diff");
    let mut worst: f64 = 0.0;
    for c in &reference.trans.connections {
        let m = meshless.trans.find(c.i, c.j).ok_or("pair missing from the meshless network")?;
        let rel = (m.trans - c.trans).abs() / c.trans;
        worst = worst.max(rel);
        if c.i % nx == 0 || c.i < nx {
            println!("{:>4} {:>4} {:>14.6} {:>14.6} {:>10.2e}", c.i, c.j, m.trans, c.trans, rel);
        }
    }
    println!("(boundary-adjacent pairs shown)");
    println!("{} pairs, worst relative difference {worst:.2e}", reference.trans.connections.len());

    let area_err = meshless
        .effective_area
        .iter()
        .zip(&reference.effective_area)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    println!("worst relative difference in node areas {area_err:.2e}");
    Ok(())
}
