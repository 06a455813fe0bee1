//! Node control volumes on a small lattice and on a pseudo-Cartesian
//! L-shaped cloud. The in-domain volumes tile the domain exactly.

use ncdmm::control_volume::CvConfig;
use ncdmm::gfdm::WeightKind;
use ncdmm::pointcloud::{
    add_virtual_nodes_with, build_radius_connectivity, generate_pseudo_cartesian_cloud, PointCloud, VirtualLayout,
    VirtualSpacing,
};
use ncdmm::setup::Meshless;

fn report(name: &str, mesh: &Meshless) {
    let cv = &mesh.cv;
    let total: f64 = cv.effective.iter().sum();
    println!("{name}: {} nodes, solver {:?}", cv.volume.len(), cv.method);
    println!("  domain area {:.3}, sum of in-domain volumes {:.3}", mesh.cloud.domain_area(), total);
    println!("  constraint error {:.2e}, residual {:.2e}", cv.constraint_error, cv.residual_norm);
    let (lo, hi) = cv.volume.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("  raw volumes in [{lo:.3}, {hi:.3}]");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 10.0;
    let cfg = CvConfig::default();

    let cloud = PointCloud::rectangle([0.0, 0.0], 3, 3, h, h, 1.0)?;
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::Fixed(h), VirtualLayout::CornerFan)?;
    let graph = build_radius_connectivity(&cloud, 1.42 * h)?;
    let mesh = Meshless::build(cloud, graph, WeightKind::InverseCube, &cfg)?;
    report("3 x 3 lattice", &mesh);
    println!("  {:>4} {:>10} {:>10} {:>8}", "node", "V", "V_bar", "theta");
    for i in 0..mesh.cv.volume.len() {
        println!(
            "  {i:>4} {:>10.4} {:>10.4} {:>8.4}",
            mesh.cv.volume[i], mesh.cv.effective[i], mesh.angles.theta[i]
        );
    }

    let polygon = [[0.0, 0.0], [100.0, 0.0], [100.0, 40.0], [40.0, 40.0], [40.0, 100.0], [0.0, 100.0]];
    let cloud = generate_pseudo_cartesian_cloud(&polygon, h)?;
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::LocalAverage, VirtualLayout::default())?;
    let graph = build_radius_connectivity(&cloud, 1.5 * h)?;
    let mesh = Meshless::build(cloud, graph, WeightKind::InverseCube, &cfg)?;
    report("L-shaped block", &mesh);
    Ok(())
}
