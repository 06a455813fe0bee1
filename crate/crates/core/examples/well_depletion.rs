//! Primary depletion of an L-shaped block by a single producer. Produced oil
//! is checked against the change in oil in place.

use ncdmm::control_volume::CvConfig;
use ncdmm::flow::{FluidProps, RelPermTable, RockProps, WellControl, WellKind, WellSpec};
use ncdmm::gfdm::WeightKind;
use ncdmm::pointcloud::{add_virtual_nodes_with, build_radius_connectivity, generate_pseudo_cartesian_cloud, VirtualLayout, VirtualSpacing};
use ncdmm::setup::Meshless;
use ncdmm::solver::{advance, NewtonConfig, SimulationSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 10.0;
    let polygon = [[0.0, 0.0], [100.0, 0.0], [100.0, 40.0], [40.0, 40.0], [40.0, 100.0], [0.0, 100.0]];
    let cloud = generate_pseudo_cartesian_cloud(&polygon, h)?.with_thickness(5.0);
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::LocalAverage, VirtualLayout::default())?;
    let graph = build_radius_connectivity(&cloud, 1.5 * h)?;
    let mesh = Meshless::build(cloud, graph, WeightKind::InverseCube, &CvConfig::default())?;
    let n = mesh.cloud.n_real();

    let target = ncdmm::pointcloud::Node::interior(0, 90.0, 10.0);
    let node = mesh
        .cloud
        .real_nodes()
        .iter()
        .min_by(|a, b| a.distance(&target).total_cmp(&b.distance(&target)))
        .map(|nd| nd.id)
        .expect("non-empty cloud");
    let well = WellSpec {
        name: "PROD".into(),
        node,
        kind: WellKind::Producer,
        control: WellControl::Bhp(8.0),
        radius: 0.1,
        skin: 0.0,
    };
    let model = mesh.model(
        RockProps::uniform(n, 0.2, 1e-4, 15.0, 50.0, 5.0),
        FluidProps::default(),
        RelPermTable::standard(),
        vec![well],
    )?;
    let initial = model.initial_state(15.0, 0.2);
    let schedule = SimulationSchedule::new(120.0, vec![10.0, 30.0, 60.0, 120.0]);
    let result = advance(&model, &initial, &schedule, &NewtonConfig::default())?;

    let oil_in_place = |st| -> Result<f64, ncdmm::Error> {
        (0..n).map(|i| model.node_mass(st, i).map(|m| m[0])).sum()
    };
    let start = oil_in_place(&initial)?;
    let mut produced = 0.0;
    let mut steps = result.steps.iter().peekable();
    for snap in &result.snapshots {
        while let Some(s) = steps.next_if(|s| s.time <= snap.time + 1e-9) {
            produced -= s.wells[0].q_oil * s.dt;
        }
        let mean_p = snap.state.p.iter().sum::<f64>() / n as f64;
        println!(
            "t = {:>5} d: mean p {:.3} MPa, produced oil {:.2} m3, change in place {:.2} m3",
            snap.time,
            mean_p,
            produced,
            start - oil_in_place(&snap.state)?
        );
    }
    Ok(())
}
