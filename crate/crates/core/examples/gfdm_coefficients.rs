//! Local derivative coefficients on a nine-point neighborhood, then on a
//! lopsided one, and the Laplacian of a quadratic recovered from each.

use ncdmm::gfdm::{build_stencil, Derivative, WeightKind};
use ncdmm::pointcloud::Node;

fn neighborhood(offsets: &[(f64, f64)], h: f64) -> (Node, Vec<Node>) {
    let center = Node::interior(0, 0.0, 0.0);
    let nodes = offsets
        .iter()
        .enumerate()
        .map(|(k, &(dx, dy))| Node::interior(k + 1, h * dx, h * dy))
        .collect();
    (center, nodes)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 10.0;
    let sets: [(&str, Vec<(f64, f64)>); 2] = [
        (
            "symmetric",
            vec![(-1., 0.), (1., 0.), (0., -1.), (0., 1.), (-1., -1.), (1., -1.), (-1., 1.), (1., 1.)],
        ),
        ("lopsided", vec![(1., 0.), (0., 1.), (-1., 0.3), (0.4, -1.), (1., 1.), (-0.7, -0.8)]),
    ];
    for (name, offsets) in sets {
        let (center, nodes) = neighborhood(&offsets, h);
        let refs: Vec<&Node> = nodes.iter().collect();
        let st = build_stencil(&center, &refs, WeightKind::QuarticSpline, 1.8 * h)?;
        println!("{name} neighborhood, spacing {h} m, condition {:.2e}", st.condition);
        println!("{:>4} {:>8} {:>8} {:>12} {:>12} {:>12}", "k", "dx", "dy", "d/dx", "d2/dx2", "d2/dy2");
        for (k, n) in nodes.iter().enumerate() {
            println!(
                "{:>4} {:>8.2} {:>8.2} {:>12.5e} {:>12.5e} {:>12.5e}",
                k + 1,
                n.x,
                n.y,
                st.row(Derivative::Dx)[k],
                st.row(Derivative::Dxx)[k],
                st.row(Derivative::Dyy)[k]
            );
        }
        // u = x^2 + 3y^2 has Laplacian 8 everywhere; values are indexed by node id
        let u: Vec<f64> = std::iter::once(&center)
            .chain(&nodes)
            .map(|n| n.x * n.x + 3.0 * n.y * n.y)
            .collect();
        let lap = st.apply(Derivative::Dxx, &u) + st.apply(Derivative::Dyy, &u);
        println!("Laplacian of x^2 + 3y^2: {lap:.6} (exact 8)\n");
    }
    Ok(())
}
