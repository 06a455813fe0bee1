//! Injector-producer waterflood on an 11 x 7 lattice, run with a wide
//! meshless stencil and with the two-point reference, then compared.

use ncdmm::assembler::{BoundaryConditionSet, FlowModel};
use ncdmm::control_volume::CvConfig;
use ncdmm::flow::{FluidProps, RelPermTable, RockProps, WellControl, WellKind, WellSpec};
use ncdmm::gfdm::WeightKind;
use ncdmm::io::{compare, SnapshotTable, DEFAULT_MATCH_TOLERANCE};
use ncdmm::pointcloud::{add_virtual_nodes_with, build_radius_connectivity, PointCloud, VirtualLayout, VirtualSpacing};
use ncdmm::setup::Meshless;
use ncdmm::solver::{advance, NewtonConfig, SimulationResult, SimulationSchedule};
use ncdmm::tpfa;

const NX: usize = 11;
const NY: usize = 7;
const H: f64 = 10.0;

fn wells() -> Vec<WellSpec> {
    let well = |name: &str, node, kind| WellSpec {
        name: name.into(),
        node,
        kind,
        control: WellControl::Rate(5.0),
        radius: 0.1,
        skin: 0.0,
    };
    vec![
        well("INJ", 3 * NX + 1, WellKind::WaterInjector),
        well("PROD", 3 * NX + 9, WellKind::Producer),
    ]
}

fn simulate(model: &FlowModel) -> Result<SimulationResult, ncdmm::Error> {
    let schedule = SimulationSchedule::new(200.0, vec![100.0, 200.0]);
    advance(model, &model.initial_state(15.0, 0.2), &schedule, &NewtonConfig::default())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = NX * NY;
    let rock = RockProps::uniform(n, 0.2, 1e-4, 15.0, 100.0, 3.0);

    let cloud = PointCloud::rectangle([0.0, 0.0], NX, NY, H, H, 3.0)?;
    let cloud = add_virtual_nodes_with(&cloud, VirtualSpacing::Fixed(H), VirtualLayout::CornerFan)?;
    let graph = build_radius_connectivity(&cloud, 2.1 * H)?;
    let mesh = Meshless::build(cloud, graph, WeightKind::InverseCube, &CvConfig::default())?;
    let meshless = mesh.model(rock.clone(), FluidProps::default(), RelPermTable::standard(), wells())?;

    let disc = tpfa::cartesian([0.0, 0.0], NX, NY, H, H, 3.0, &rock.permeability)?;
    let reference = FlowModel::new(
        disc,
        FluidProps::default(),
        rock,
        RelPermTable::standard(),
        wells(),
        BoundaryConditionSet::closed(n),
    )?;

    let a = simulate(&meshless)?;
    let b = simulate(&reference)?;
    println!("meshless: {} steps, {} Newton iterations", a.steps.len(), a.total_iterations());
    println!("two-point: {} steps, {} Newton iterations", b.steps.len(), b.total_iterations());

    for t in [100.0, 200.0] {
        let table = |m: &FlowModel, r: &SimulationResult| {
            let s = &r.snapshot_at(t).expect("report time").state;
            SnapshotTable::new(&m.disc.coords, &s.p, &s.sw)
        };
        let report = compare(&table(&meshless, &a), &table(&reference, &b), DEFAULT_MATCH_TOLERANCE)?;
        println!("t = {t} d: error_p {:.4} MPa, error_Sw {:.4}", report.error_p, report.error_sw);
    }

    let last = a.steps.last().expect("at least one step");
    for w in &last.wells {
        println!("{} at {} d: p_wf {:.3} MPa, oil {:.3}, water {:.3} m3/d", w.name, last.time, w.p_wf, w.q_oil, w.q_water);
    }
    let balance = a.steps.iter().map(|s| s.mass_balance_error).fold(0.0, f64::max);
    println!("worst step mass-balance error {balance:.2e}");
    Ok(())
}
