//! Conservative discretization of two-phase flow on a node cloud.
//!
//! Pairwise transmissibilities come from control volumes and Laplacian
//! stencil coefficients. The residual has one oil and one water balance per
//! real node, boundary-condition rows, a normal-derivative row per virtual
//! unknown and one constraint row per well.
//!
//! Unknown layout: `(p_0, Sw_0, p_1, Sw_1, ...)` for real nodes, then one
//! pressure per virtual unknown, then one bottom-hole pressure per well.

use std::collections::BTreeMap;

use log::{debug, warn};

use crate::control_volume::ControlVolumeSolution;
use crate::error::{Error, Result};
use crate::flow::{harmonic_perm, well_index, FluidProps, Phase, RelPerm, RelPermTable, RockProps, WellControl, WellKind, WellSpec, DARCY};
use crate::gfdm::{Derivative, LocalStencil};
use crate::pointcloud::{ConnectivityGraph, NodeKind, PointCloud};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Connection {
    pub i: usize,
    pub j: usize,
    /// Geometric factor, m.
    pub t_geo: f64,
    /// Interface permeability, mD.
    pub perm: f64,
    /// `perm * t_geo`, mD·m.
    pub trans: f64,
    /// `|T_i - T_j| / mean` of the one-sided products.
    pub asymmetry: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransmissibilitySet {
    pub connections: Vec<Connection>,
    pub dropped: Vec<(usize, usize)>,
}

impl TransmissibilitySet {
    pub fn max_asymmetry(&self) -> f64 {
        self.connections.iter().map(|c| c.asymmetry).fold(0.0, f64::max)
    }

    pub fn find(&self, i: usize, j: usize) -> Option<&Connection> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.connections.iter().find(|c| c.i == a && c.j == b)
    }
}

/// Share of the interface between `i` and `j` that lies inside the domain.
///
/// Only pairs of boundary nodes can lose part of their interface: when the
/// segment runs along the boundary, the perpendicular bisector straddles it
/// and half of it is outside. Probed on both sides of the segment midpoint.
pub fn interface_fraction(cloud: &PointCloud, i: usize, j: usize) -> f64 {
    let (a, b) = (&cloud.nodes[i], &cloud.nodes[j]);
    if a.kind != NodeKind::Boundary || b.kind != NodeKind::Boundary {
        return 1.0;
    }
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mid = [0.5 * (a.x + b.x), 0.5 * (a.y + b.y)];
    let eps = 1e-6;
    let inside = [1.0, -1.0]
        .iter()
        .filter(|&&s| cloud.contains([mid[0] - s * eps * dy, mid[1] + s * eps * dx]))
        .count();
    inside as f64 / 2.0
}

/// Transmissibilities `T_ij = f_ij k_ij h (V_i a_ij + V_j a_ji) / 2` over
/// real-node pairs, with `f_ij` from [`interface_fraction`].
pub fn build_transmissibilities(
    cloud: &PointCloud,
    graph: &ConnectivityGraph,
    stencils: &[LocalStencil],
    cv: &ControlVolumeSolution,
    rock: &RockProps,
) -> Result<TransmissibilitySet> {
    let n = cloud.n_real();
    if stencils.len() != n || cv.volume.len() != n || rock.permeability.len() != n {
        return Err(Error::InvalidInput("stencil, volume and permeability counts must match the real node count".into()));
    }
    let h = rock.thickness;
    let mut set = TransmissibilitySet::default();
    let mut degree = vec![0usize; n];
    for (i, j) in graph.real_pairs(n) {
        let ti = cv.volume[i] * stencils[i].laplacian_coefficient(j)? * h;
        let tj = cv.volume[j] * stencils[j].laplacian_coefficient(i)? * h;
        if ti <= 0.0 || tj <= 0.0 {
            debug!("dropping connection ({i}, {j}): one-sided products {ti:.4e}, {tj:.4e}");
            set.dropped.push((i, j));
            continue;
        }
        let fraction = interface_fraction(cloud, i, j);
        if fraction == 0.0 {
            debug!("dropping connection ({i}, {j}): interface lies outside the domain");
            set.dropped.push((i, j));
            continue;
        }
        let t_geo = fraction * 0.5 * (ti + tj);
        let perm = harmonic_perm(rock.permeability[i], rock.permeability[j]);
        set.connections.push(Connection {
            i,
            j,
            t_geo,
            perm,
            trans: perm * t_geo,
            asymmetry: (ti - tj).abs() / (0.5 * (ti + tj)),
        });
        degree[i] += 1;
        degree[j] += 1;
    }
    if n > 1 {
        if let Some(i) = degree.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedNode { node: i });
        }
    }
    if !set.dropped.is_empty() {
        warn!("{} connections dropped for non-positive transmissibility", set.dropped.len());
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// No flow.
    Closed,
    Dirichlet { pressure: f64, sw: f64 },
    /// `dp/dn = flux`. The boundary inflow is `k h L lambda dp/dn` with `L`
    /// the node's share of the boundary.
    Neumann { flux: f64 },
    /// `alpha p + beta dp/dn = gamma`.
    Robin { alpha: f64, beta: f64, gamma: f64 },
}

impl BoundaryCondition {
    pub fn is_derivative(&self) -> bool {
        matches!(self, BoundaryCondition::Neumann { .. } | BoundaryCondition::Robin { .. })
    }

    fn robin_form(&self) -> Option<(f64, f64, f64)> {
        match *self {
            BoundaryCondition::Neumann { flux } => Some((0.0, 1.0, flux)),
            BoundaryCondition::Robin { alpha, beta, gamma } => Some((alpha, beta, gamma)),
            _ => None,
        }
    }
}

/// One condition per real node; interior nodes stay `Closed` (unused).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditionSet {
    pub conditions: Vec<BoundaryCondition>,
}

impl BoundaryConditionSet {
    pub fn closed(n_real: usize) -> Self {
        BoundaryConditionSet {
            conditions: vec![BoundaryCondition::Closed; n_real],
        }
    }

    pub fn set(&mut self, node: usize, bc: BoundaryCondition) {
        self.conditions[node] = bc;
    }

    pub fn get(&self, node: usize) -> BoundaryCondition {
        self.conditions[node]
    }
}

/// Geometry needed for derivative boundary conditions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryGeometry {
    /// Stencils of boundary nodes, by real node id.
    pub stencils: BTreeMap<usize, LocalStencil>,
    pub normals: BTreeMap<usize, [f64; 2]>,
    /// Parent boundary node of every virtual node.
    pub virtual_parent: BTreeMap<usize, usize>,
    /// First virtual node created for each boundary node.
    pub partner: BTreeMap<usize, usize>,
    /// Half of each incident boundary segment, m.
    pub face_length: BTreeMap<usize, f64>,
}

/// Everything geometric the residual needs, independent of the scheme that
/// produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub coords: Vec<[f64; 2]>,
    /// In-domain volume per node as an area, m².
    pub effective_area: Vec<f64>,
    pub thickness: f64,
    pub trans: TransmissibilitySet,
    pub boundary: BoundaryGeometry,
}

impl Discretization {
    pub fn ncdmm(
        cloud: &PointCloud,
        graph: &ConnectivityGraph,
        stencils: &[LocalStencil],
        cv: &ControlVolumeSolution,
        rock: &RockProps,
    ) -> Result<Self> {
        let trans = build_transmissibilities(cloud, graph, stencils, cv, rock)?;
        let n = cloud.n_real();
        let mut boundary = BoundaryGeometry::default();
        for node in &cloud.real_nodes()[..n] {
            if node.kind == NodeKind::Boundary {
                boundary.stencils.insert(node.id, stencils[node.id].clone());
                if let Some(nrm) = node.normal {
                    boundary.normals.insert(node.id, nrm);
                }
            }
        }
        for lp in &cloud.boundary {
            for k in 0..lp.len() {
                let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                let half = 0.5 * cloud.nodes[a].distance(&cloud.nodes[b]);
                *boundary.face_length.entry(a).or_insert(0.0) += half;
                *boundary.face_length.entry(b).or_insert(0.0) += half;
            }
        }
        for v in cloud.virtual_nodes() {
            let parent = v.parent.expect("validated cloud");
            boundary.virtual_parent.insert(v.id, parent);
            boundary.partner.entry(parent).or_insert(v.id);
        }
        Ok(Discretization {
            coords: cloud.real_nodes().iter().map(|n| n.pos()).collect(),
            effective_area: cv.effective.clone(),
            thickness: cloud.thickness,
            trans,
            boundary,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn bulk_volume(&self, i: usize) -> f64 {
        self.effective_area[i] * self.thickness
    }

    /// Index of the real node nearest to `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let mut best = (f64::MAX, 0);
        for (i, c) in self.coords.iter().enumerate() {
            let d = (c[0] - x).hypot(c[1] - y);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirState {
    pub p: Vec<f64>,
    pub sw: Vec<f64>,
    pub p_virtual: Vec<f64>,
    pub p_wf: Vec<f64>,
    pub time: f64,
}

/// Where a virtual node's pressure comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
enum VirtualSource {
    Unknown(usize),
    Parent(usize),
}

/// Properties of a flow endpoint (real or virtual) at the current iterate.
#[derive(Clone, Copy, Debug)]
struct Endpoint {
    p_col: usize,
    s_col: usize,
    p: f64,
    b: [f64; 2],
    db: [f64; 2],
    kr: [f64; 2],
    dkr: [f64; 2],
}

const OIL: usize = 0;
const WATER: usize = 1;

/// Residual, optional Jacobian and per-row convergence scales.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residual: Vec<f64>,
    pub jacobian: Option<CsrMatrix>,
    pub scale: Vec<f64>,
}

impl Evaluation {
    pub fn scaled_max(&self) -> (f64, usize) {
        self.residual
            .iter()
            .zip(&self.scale)
            .enumerate()
            .map(|(k, (r, s))| ((r * s).abs(), k))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
    }

    pub fn scaled(&self) -> Vec<f64> {
        self.residual.iter().zip(&self.scale).map(|(r, s)| r * s).collect()
    }
}

struct Rows {
    entries: Vec<Vec<(usize, f64)>>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Rows {
            entries: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.entries[row].push((col, v));
        }
    }

    fn take(&mut self, row: usize) -> Vec<(usize, f64)> {
        std::mem::take(&mut self.entries[row])
    }
}

/// The full two-phase problem: discretization, properties, wells and
/// boundary conditions.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub disc: Discretization,
    pub fluid: FluidProps,
    pub rock: RockProps,
    pub relperm: RelPermTable,
    pub wells: Vec<WellSpec>,
    pub bcs: BoundaryConditionSet,
    well_index: Vec<f64>,
    /// Virtual node ids carrying a pressure unknown, in slot order.
    virtual_slots: Vec<usize>,
    virtual_source: BTreeMap<usize, VirtualSource>,
}

impl FlowModel {
    pub fn new(
        disc: Discretization,
        fluid: FluidProps,
        rock: RockProps,
        relperm: RelPermTable,
        wells: Vec<WellSpec>,
        bcs: BoundaryConditionSet,
    ) -> Result<Self> {
        let n = disc.n_nodes();
        fluid.validate()?;
        rock.validate()?;
        if rock.permeability.len() != n || bcs.conditions.len() != n {
            return Err(Error::InvalidInput("permeability and boundary-condition counts must match the node count".into()));
        }
        let mut well_index_vals = Vec::with_capacity(wells.len());
        for w in &wells {
            if w.node >= n {
                return Err(Error::InvalidInput(format!("well {} at unknown node {}", w.name, w.node)));
            }
            if let WellControl::Rate(q) = w.control {
                if !(q > 0.0) {
                    return Err(Error::InvalidInput(format!("well {} needs a positive rate", w.name)));
                }
            }
            well_index_vals.push(well_index(
                rock.permeability[w.node],
                rock.thickness,
                disc.bulk_volume(w.node),
                w.radius,
                w.skin,
            )?);
        }
        let mut virtual_slots = Vec::new();
        let mut virtual_source = BTreeMap::new();
        for (node, bc) in bcs.conditions.iter().enumerate() {
            if !bc.is_derivative() {
                continue;
            }
            let partner = *disc.boundary.partner.get(&node).ok_or_else(|| {
                Error::InvalidInput(format!("derivative condition at node {node}, which has no virtual node"))
            })?;
            let st = disc
                .boundary
                .stencils
                .get(&node)
                .ok_or_else(|| Error::InvalidInput(format!("no stencil stored for boundary node {node}")))?;
            if st.position(partner).is_none() {
                return Err(Error::NotInStencil {
                    center: node,
                    node: partner,
                });
            }
            if !disc.boundary.normals.contains_key(&node) || !disc.boundary.face_length.contains_key(&node) {
                return Err(Error::InvalidInput(format!("boundary node {node} has no normal or face length")));
            }
            virtual_source.insert(partner, VirtualSource::Unknown(virtual_slots.len()));
            virtual_slots.push(partner);
        }
        for (&v, &parent) in &disc.boundary.virtual_parent {
            virtual_source.entry(v).or_insert(VirtualSource::Parent(parent));
        }
        Ok(FlowModel {
            disc,
            fluid,
            rock,
            relperm,
            wells,
            bcs,
            well_index: well_index_vals,
            virtual_slots,
            virtual_source,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.disc.n_nodes()
    }

    pub fn n_virtual(&self) -> usize {
        self.virtual_slots.len()
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.n_nodes() + self.n_virtual() + self.wells.len()
    }

    pub fn virtual_nodes(&self) -> &[usize] {
        &self.virtual_slots
    }

    pub fn well_indices(&self) -> &[f64] {
        &self.well_index
    }

    fn virtual_col(&self, slot: usize) -> usize {
        2 * self.n_nodes() + slot
    }

    fn well_col(&self, w: usize) -> usize {
        2 * self.n_nodes() + self.n_virtual() + w
    }

    /// Uniform initial state; virtual pressures copy their parents and well
    /// pressures start at their targets or one MPa of drawdown.
    pub fn initial_state(&self, p: f64, sw: f64) -> ReservoirState {
        let n = self.n_nodes();
        let mut st = ReservoirState {
            p: vec![p; n],
            sw: vec![sw; n],
            p_virtual: vec![p; self.n_virtual()],
            p_wf: Vec::new(),
            time: 0.0,
        };
        st.p_wf = self.wells.iter().map(|w| self.initial_bhp(w, p)).collect();
        st
    }

    pub(crate) fn initial_bhp(&self, w: &WellSpec, p: f64) -> f64 {
        match (w.control, w.kind) {
            (WellControl::Bhp(target), _) => target,
            (WellControl::Rate(_), WellKind::Producer) => p - 1.0,
            (WellControl::Rate(_), WellKind::WaterInjector) => p + 1.0,
        }
    }

    pub fn pack(&self, st: &ReservoirState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_unknowns());
        for i in 0..self.n_nodes() {
            x.push(st.p[i]);
            x.push(st.sw[i]);
        }
        x.extend_from_slice(&st.p_virtual);
        x.extend_from_slice(&st.p_wf);
        x
    }

    pub fn unpack(&self, x: &[f64], time: f64) -> ReservoirState {
        let n = self.n_nodes();
        let nv = self.n_virtual();
        ReservoirState {
            p: (0..n).map(|i| x[2 * i]).collect(),
            sw: (0..n).map(|i| x[2 * i + 1]).collect(),
            p_virtual: x[2 * n..2 * n + nv].to_vec(),
            p_wf: x[2 * n + nv..].to_vec(),
            time,
        }
    }

    fn node_endpoint(&self, x: &[f64], i: usize) -> Result<Endpoint> {
        self.endpoint_at(2 * i, 2 * i + 1, x[2 * i], x[2 * i + 1])
    }

    fn endpoint_at(&self, p_col: usize, s_col: usize, p: f64, sw: f64) -> Result<Endpoint> {
        let (bo, dbo) = self.fluid.fvf(Phase::Oil, p)?;
        let (bw, dbw) = self.fluid.fvf(Phase::Water, p)?;
        let RelPerm { krw, kro, dkrw, dkro } = self.relperm.eval(sw);
        Ok(Endpoint {
            p_col,
            s_col,
            p,
            b: [bo, bw],
            db: [dbo, dbw],
            kr: [kro, krw],
            dkr: [dkro, dkrw],
        })
    }

    /// Stencil normal derivative at boundary node `b` and its coefficients
    /// by unknown column.
    fn normal_derivative(&self, x: &[f64], b: usize) -> (f64, Vec<(usize, f64)>) {
        let n = self.n_nodes();
        let st = &self.disc.boundary.stencils[&b];
        let nrm = self.disc.boundary.normals[&b];
        let pb = x[2 * b];
        let mut dn = 0.0;
        let mut diag = 0.0;
        let mut coeffs = Vec::with_capacity(st.neighbors.len() + 1);
        for (k, &l) in st.neighbors.iter().enumerate() {
            let m = nrm[0] * st.row(Derivative::Dx)[k] + nrm[1] * st.row(Derivative::Dy)[k];
            let col = if l < n {
                2 * l
            } else {
                match self.virtual_source[&l] {
                    VirtualSource::Unknown(s) => self.virtual_col(s),
                    VirtualSource::Parent(pp) => 2 * pp,
                }
            };
            dn += m * (x[col] - pb);
            coeffs.push((col, m));
            diag -= m;
        }
        coeffs.push((2 * b, diag));
        (dn, coeffs)
    }

    /// Phase inflow across the boundary face of a derivative-condition node
    /// driven by the stencil normal derivative, with derivatives by column.
    fn face_flux(&self, x: &[f64], e: &Endpoint, b: usize) -> ([f64; 2], [Vec<(usize, f64)>; 2]) {
        let (dn, coeffs) = self.normal_derivative(x, b);
        let c = DARCY * self.rock.permeability[b] * self.rock.thickness * self.disc.boundary.face_length[&b];
        let mut q = [0.0; 2];
        let mut d: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
        for ph in [OIL, WATER] {
            let mu = self.mu(ph);
            let lam = e.kr[ph] / (mu * e.b[ph]);
            q[ph] = c * lam * dn;
            d[ph] = coeffs.iter().map(|&(col, m)| (col, c * lam * m)).collect();
            d[ph].push((e.p_col, -c * e.kr[ph] * e.db[ph] / (mu * e.b[ph] * e.b[ph]) * dn));
            d[ph].push((e.s_col, c * e.dkr[ph] / (mu * e.b[ph]) * dn));
        }
        (q, d)
    }

    fn mu(&self, phase: usize) -> f64 {
        if phase == OIL {
            self.fluid.mu_oil
        } else {
            self.fluid.mu_water
        }
    }

    /// Phase flux from `b` into `a`, surface m³/day, with its derivatives
    /// `(d/dp_a, d/dp_b, d/ds_donor, donor s column)`.
    fn interface_flux(&self, trans: f64, a: &Endpoint, b: &Endpoint, phase: usize) -> (f64, [f64; 3], usize) {
        let donor = if b.p >= a.p { b } else { a };
        let mu = self.mu(phase);
        let bbar = 0.5 * (a.b[phase] + b.b[phase]);
        let kr = donor.kr[phase];
        let lam = kr / (mu * bbar);
        let dlam_db = -kr / (mu * bbar * bbar);
        let dp = b.p - a.p;
        let c = DARCY * trans;
        let f = c * lam * dp;
        let d_pa = c * (dlam_db * 0.5 * a.db[phase] * dp - lam);
        let d_pb = c * (dlam_db * 0.5 * b.db[phase] * dp + lam);
        let d_s = c * donor.dkr[phase] / (mu * bbar) * dp;
        (f, [d_pa, d_pb, d_s], donor.s_col)
    }

    /// Phase fluxes into `i` and into `j` across a stored connection. The two
    /// are exact negatives of each other.
    pub fn connection_fluxes(&self, st: &ReservoirState, conn: &Connection) -> Result<([f64; 2], [f64; 2])> {
        let x = self.pack(st);
        let a = self.node_endpoint(&x, conn.i)?;
        let b = self.node_endpoint(&x, conn.j)?;
        let mut into_i = [0.0; 2];
        let mut into_j = [0.0; 2];
        for ph in [OIL, WATER] {
            into_i[ph] = self.interface_flux(conn.trans, &a, &b, ph).0;
            into_j[ph] = self.interface_flux(conn.trans, &b, &a, ph).0;
        }
        Ok((into_i, into_j))
    }

    /// Surface rates `(q_oil, q_water)` of every well, positive into the
    /// reservoir.
    pub fn well_rates(&self, st: &ReservoirState) -> Result<Vec<[f64; 2]>> {
        let x = self.pack(st);
        let mut out = Vec::with_capacity(self.wells.len());
        for (w, spec) in self.wells.iter().enumerate() {
            let e = self.node_endpoint(&x, spec.node)?;
            let (q, _) = self.well_terms(w, spec, &e, st.p_wf[w]);
            out.push(q);
        }
        Ok(out)
    }

    /// Well rates and derivatives `[phase][d/dp, d/ds, d/dp_wf]`.
    fn well_terms(&self, w: usize, spec: &WellSpec, e: &Endpoint, p_wf: f64) -> ([f64; 2], [[f64; 3]; 2]) {
        let c = DARCY * self.well_index[w];
        let dd = p_wf - e.p;
        let mut q = [0.0; 2];
        let mut d = [[0.0; 3]; 2];
        match spec.kind {
            WellKind::Producer => {
                for ph in [OIL, WATER] {
                    let mu = self.mu(ph);
                    let lam = e.kr[ph] / (mu * e.b[ph]);
                    q[ph] = c * lam * dd;
                    let dlam_dp = -e.kr[ph] * e.db[ph] / (mu * e.b[ph] * e.b[ph]);
                    d[ph] = [c * (dlam_dp * dd - lam), c * e.dkr[ph] / (mu * e.b[ph]) * dd, c * lam];
                }
            }
            WellKind::WaterInjector => {
                let lt = e.kr[OIL] / self.fluid.mu_oil + e.kr[WATER] / self.fluid.mu_water;
                let dlt = e.dkr[OIL] / self.fluid.mu_oil + e.dkr[WATER] / self.fluid.mu_water;
                let bw = e.b[WATER];
                q[WATER] = c * lt / bw * dd;
                d[WATER] = [
                    c * (-lt * e.db[WATER] / (bw * bw) * dd - lt / bw),
                    c * dlt / bw * dd,
                    c * lt / bw,
                ];
            }
        }
        (q, d)
    }

    /// In-place mass `(oil, water)` per node at a state, surface m³.
    pub fn node_mass(&self, st: &ReservoirState, i: usize) -> Result<[f64; 2]> {
        let (phi, _) = self.rock.porosity(st.p[i])?;
        let (bo, _) = self.fluid.fvf(Phase::Oil, st.p[i])?;
        let (bw, _) = self.fluid.fvf(Phase::Water, st.p[i])?;
        let v = self.disc.bulk_volume(i);
        Ok([v * phi * (1.0 - st.sw[i]) / bo, v * phi * st.sw[i] / bw])
    }

    /// Residual (and Jacobian when asked) at the unknown vector `x`.
    pub fn evaluate(&self, x: &[f64], old: &ReservoirState, dt: f64, want_jacobian: bool) -> Result<Evaluation> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let n = self.n_nodes();
        let nu = self.n_unknowns();
        if x.len() != nu {
            return Err(Error::InvalidInput(format!("unknown vector has length {}, expected {nu}", x.len())));
        }
        let mut r = vec![0.0; nu];
        let mut rows = Rows::new(nu);
        let mut scale = vec![1.0; nu];

        let nodes: Vec<Endpoint> = (0..n).map(|i| self.node_endpoint(x, i)).collect::<Result<_>>()?;
        // total flux into each node across connections, for the Dirichlet inflow test
        let mut pair_inflow = vec![0.0; n];

        for conn in &self.disc.trans.connections {
            let (a, b) = (&nodes[conn.i], &nodes[conn.j]);
            for ph in [OIL, WATER] {
                let (f, d, s_col) = self.interface_flux(conn.trans, a, b, ph);
                let (ri, rj) = (2 * conn.i + ph, 2 * conn.j + ph);
                r[ri] += f;
                r[rj] -= f;
                pair_inflow[conn.i] += f;
                pair_inflow[conn.j] -= f;
                rows.add(ri, a.p_col, d[0]);
                rows.add(ri, b.p_col, d[1]);
                rows.add(ri, s_col, d[2]);
                rows.add(rj, a.p_col, -d[0]);
                rows.add(rj, b.p_col, -d[1]);
                rows.add(rj, s_col, -d[2]);
            }
        }

        for &v in &self.virtual_slots {
            let b = self.disc.boundary.virtual_parent[&v];
            let (q, d) = self.face_flux(x, &nodes[b], b);
            for ph in [OIL, WATER] {
                r[2 * b + ph] += q[ph];
                for &(col, val) in &d[ph] {
                    rows.add(2 * b + ph, col, val);
                }
            }
        }

        for (w, spec) in self.wells.iter().enumerate() {
            let e = &nodes[spec.node];
            let wc = self.well_col(w);
            let p_wf = x[wc];
            let (q, d) = self.well_terms(w, spec, e, p_wf);
            for ph in [OIL, WATER] {
                let ri = 2 * spec.node + ph;
                r[ri] += q[ph];
                rows.add(ri, e.p_col, d[ph][0]);
                rows.add(ri, e.s_col, d[ph][1]);
                rows.add(ri, wc, d[ph][2]);
            }
            match (spec.control, spec.kind) {
                (WellControl::Bhp(target), _) => {
                    r[wc] = p_wf - target;
                    rows.add(wc, wc, 1.0);
                }
                (WellControl::Rate(rate), WellKind::Producer) => {
                    let lt = e.kr[OIL] / self.fluid.mu_oil + e.kr[WATER] / self.fluid.mu_water;
                    if lt <= 0.0 {
                        return Err(Error::ZeroMobility { node: spec.node });
                    }
                    r[wc] = -(q[OIL] + q[WATER]) - rate;
                    for k in 0..3 {
                        let col = [e.p_col, e.s_col, wc][k];
                        rows.add(wc, col, -(d[OIL][k] + d[WATER][k]));
                    }
                    scale[wc] = 1.0 / rate;
                }
                (WellControl::Rate(rate), WellKind::WaterInjector) => {
                    r[wc] = q[WATER] - rate;
                    for k in 0..3 {
                        let col = [e.p_col, e.s_col, wc][k];
                        rows.add(wc, col, d[WATER][k]);
                    }
                    scale[wc] = 1.0 / rate;
                }
            }
        }

        for i in 0..n {
            let e = &nodes[i];
            let (phi, dphi) = self.rock.porosity(e.p)?;
            let m_old = self.node_mass(old, i)?;
            let pv = self.disc.bulk_volume(i);
            let f = pv / dt;
            let sw = x[2 * i + 1];
            let so = 1.0 - sw;
            let (bo, bw) = (e.b[OIL], e.b[WATER]);
            let acc_o = f * phi * so / bo - m_old[OIL] / dt;
            let acc_w = f * phi * sw / bw - m_old[WATER] / dt;
            r[2 * i] -= acc_o;
            r[2 * i + 1] -= acc_w;
            rows.add(2 * i, e.p_col, -f * so * (dphi * bo - phi * e.db[OIL]) / (bo * bo));
            rows.add(2 * i, e.s_col, f * phi / bo);
            rows.add(2 * i + 1, e.p_col, -f * sw * (dphi * bw - phi * e.db[WATER]) / (bw * bw));
            rows.add(2 * i + 1, e.s_col, -f * phi / bw);
            let s = dt / (pv * self.rock.porosity_ref);
            scale[2 * i] = s;
            scale[2 * i + 1] = s;
        }

        for i in 0..n {
            if let BoundaryCondition::Dirichlet { pressure, sw } = self.bcs.get(i) {
                let (ro, rw) = (r[2 * i], r[2 * i + 1]);
                let row_o = rows.take(2 * i);
                let row_w = rows.take(2 * i + 1);
                r[2 * i] = x[2 * i] - pressure;
                rows.add(2 * i, 2 * i, 1.0);
                scale[2 * i] = 1.0;
                if pair_inflow[i] <= 0.0 {
                    r[2 * i + 1] = x[2 * i + 1] - sw;
                    rows.add(2 * i + 1, 2 * i + 1, 1.0);
                    scale[2 * i + 1] = 1.0;
                } else {
                    // outflow: the node's own water fraction governs
                    let e = &nodes[i];
                    let lo = e.kr[OIL] / (self.fluid.mu_oil * e.b[OIL]);
                    let lw = e.kr[WATER] / (self.fluid.mu_water * e.b[WATER]);
                    let lt = lo + lw;
                    let (fw, dfw_dp, dfw_ds) = if lt > 0.0 {
                        let dlo_dp = -e.kr[OIL] * e.db[OIL] / (self.fluid.mu_oil * e.b[OIL] * e.b[OIL]);
                        let dlw_dp = -e.kr[WATER] * e.db[WATER] / (self.fluid.mu_water * e.b[WATER] * e.b[WATER]);
                        let dlo_ds = e.dkr[OIL] / (self.fluid.mu_oil * e.b[OIL]);
                        let dlw_ds = e.dkr[WATER] / (self.fluid.mu_water * e.b[WATER]);
                        (
                            lw / lt,
                            (dlw_dp * lo - lw * dlo_dp) / (lt * lt),
                            (dlw_ds * lo - lw * dlo_ds) / (lt * lt),
                        )
                    } else {
                        (0.0, 0.0, 0.0)
                    };
                    r[2 * i + 1] = rw - fw * (ro + rw);
                    for &(c, v) in &row_w {
                        rows.add(2 * i + 1, c, (1.0 - fw) * v);
                    }
                    for &(c, v) in &row_o {
                        rows.add(2 * i + 1, c, -fw * v);
                    }
                    rows.add(2 * i + 1, 2 * i, -(ro + rw) * dfw_dp);
                    rows.add(2 * i + 1, 2 * i + 1, -(ro + rw) * dfw_ds);
                }
            }
        }

        for (slot, &v) in self.virtual_slots.iter().enumerate() {
            let b = self.disc.boundary.virtual_parent[&v];
            let (alpha, beta, gamma) = self.bcs.get(b).robin_form().expect("slot implies derivative condition");
            let st = &self.disc.boundary.stencils[&b];
            let row = self.virtual_col(slot);
            let (dn, coeffs) = self.normal_derivative(x, b);
            for &(col, m) in &coeffs {
                rows.add(row, col, beta * m);
            }
            rows.add(row, 2 * b, alpha);
            r[row] = beta * dn + alpha * x[2 * b] - gamma;
            let h: f64 = st
                .neighbors
                .iter()
                .map(|&l| {
                    let c = if l < n { self.disc.coords[l] } else { [f64::NAN; 2] };
                    (c[0] - self.disc.coords[b][0]).hypot(c[1] - self.disc.coords[b][1])
                })
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max);
            scale[row] = if h > 0.0 { h } else { 1.0 };
        }

        for (k, v) in r.iter().enumerate() {
            if !v.is_finite() {
                let (node, what) = self.describe_row(k);
                return Err(Error::NonFiniteResidual { row: k, node, what });
            }
        }

        let jacobian = if want_jacobian {
            let mut t = Triplets::new(nu, nu);
            for (row, entries) in rows.entries.iter().enumerate() {
                for &(c, v) in entries {
                    t.push(row, c, v);
                }
            }
            Some(t.to_csr())
        } else {
            None
        };
        Ok(Evaluation {
            residual: r,
            jacobian,
            scale,
        })
    }

    /// Steady incompressible single-phase pressure with the oil viscosity,
    /// honoring boundary conditions, bottom-hole-pressure wells and fixed
    /// well rates. Returns real-node and virtual-unknown pressures.
    pub fn steady_pressure(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n_nodes();
        let nv = self.n_virtual();
        let nu = n + nv;
        let mobility = DARCY / self.fluid.mu_oil;
        let mut t = Triplets::new(nu, nu);
        let mut b = vec![0.0; nu];
        let dirichlet = |i: usize| match self.bcs.get(i) {
            BoundaryCondition::Dirichlet { pressure, .. } => Some(pressure),
            _ => None,
        };
        let vcol = |v: usize| match self.virtual_source[&v] {
            VirtualSource::Unknown(s) => n + s,
            VirtualSource::Parent(pp) => pp,
        };
        let add_pair = |t: &mut Triplets, i: usize, j_col: usize, c: f64| {
            if dirichlet(i).is_none() {
                t.push(i, i, -c);
                t.push(i, j_col, c);
            }
        };
        for c in &self.disc.trans.connections {
            let k = mobility * c.trans;
            add_pair(&mut t, c.i, c.j, k);
            add_pair(&mut t, c.j, c.i, k);
        }
        let face = |t: &mut Triplets, row: usize, bn: usize, c: f64| {
            let st = &self.disc.boundary.stencils[&bn];
            let nrm = self.disc.boundary.normals[&bn];
            let mut diag = 0.0;
            for (k, &l) in st.neighbors.iter().enumerate() {
                let m = nrm[0] * st.row(Derivative::Dx)[k] + nrm[1] * st.row(Derivative::Dy)[k];
                t.push(row, if l < n { l } else { vcol(l) }, c * m);
                diag -= c * m;
            }
            t.push(row, bn, diag);
        };
        for &v in &self.virtual_slots {
            let bn = self.disc.boundary.virtual_parent[&v];
            let c = mobility * self.rock.permeability[bn] * self.rock.thickness * self.disc.boundary.face_length[&bn];
            face(&mut t, bn, bn, c);
        }
        for (w, spec) in self.wells.iter().enumerate() {
            if dirichlet(spec.node).is_some() {
                continue;
            }
            let sign = if spec.kind == WellKind::Producer { -1.0 } else { 1.0 };
            match spec.control {
                WellControl::Bhp(pwf) => {
                    let c = mobility * self.well_index[w];
                    t.push(spec.node, spec.node, -c);
                    b[spec.node] -= c * pwf;
                }
                WellControl::Rate(q) => b[spec.node] -= sign * q,
            }
        }
        for i in 0..n {
            if let Some(p) = dirichlet(i) {
                t.push(i, i, 1.0);
                b[i] = p;
            }
        }
        for (slot, &v) in self.virtual_slots.iter().enumerate() {
            let bn = self.disc.boundary.virtual_parent[&v];
            let (alpha, beta, gamma) = self.bcs.get(bn).robin_form().expect("slot implies derivative condition");
            let row = n + slot;
            face(&mut t, row, bn, beta);
            t.push(row, bn, alpha);
            b[row] = gamma;
        }
        let x = crate::sparse::solve(&t.to_csr(), &b)?;
        Ok((x[..n].to_vec(), x[n..].to_vec()))
    }

    /// Node (or virtual/well id) and meaning of a residual row.
    pub fn describe_row(&self, row: usize) -> (usize, &'static str) {
        let n = self.n_nodes();
        if row < 2 * n {
            (row / 2, if row % 2 == 0 { "oil" } else { "water" })
        } else if row < 2 * n + self.n_virtual() {
            (self.virtual_slots[row - 2 * n], "boundary derivative")
        } else {
            (row - 2 * n - self.n_virtual(), "well constraint")
        }
    }

    pub fn residual(&self, new: &ReservoirState, old: &ReservoirState, dt: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(&self.pack(new), old, dt, false)?.residual)
    }

    /// Central-difference Jacobian, for verification.
    pub fn fd_jacobian(&self, x: &[f64], old: &ReservoirState, dt: f64) -> Result<Vec<Vec<f64>>> {
        let nu = x.len();
        let mut jac = vec![vec![0.0; nu]; nu];
        let mut xp = x.to_vec();
        for c in 0..nu {
            let h = 1e-6 * x[c].abs().max(1.0);
            xp[c] = x[c] + h;
            let rp = self.evaluate(&xp, old, dt, false)?.residual;
            xp[c] = x[c] - h;
            let rm = self.evaluate(&xp, old, dt, false)?.residual;
            xp[c] = x[c];
            for row in 0..nu {
                jac[row][c] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Flux into the domain across derivative-condition faces and from
    /// Dirichlet nodes, surface m³/day per phase.
    pub fn boundary_influx(&self, st: &ReservoirState) -> Result<[f64; 2]> {
        let x = self.pack(st);
        let mut q = [0.0; 2];
        for &v in &self.virtual_slots {
            let b = self.disc.boundary.virtual_parent[&v];
            let (f, _) = self.face_flux(&x, &self.node_endpoint(&x, b)?, b);
            q[0] += f[0];
            q[1] += f[1];
        }
        for conn in &self.disc.trans.connections {
            let di = matches!(self.bcs.get(conn.i), BoundaryCondition::Dirichlet { .. });
            let dj = matches!(self.bcs.get(conn.j), BoundaryCondition::Dirichlet { .. });
            if di == dj {
                continue;
            }
            let (into_i, into_j) = self.connection_fluxes(st, conn)?;
            let into_free = if di { into_j } else { into_i };
            q[0] += into_free[0];
            q[1] += into_free[1];
        }
        Ok(q)
    }

    /// Mass-balance ledger between two states one step `dt` apart, over the
    /// nodes not held by Dirichlet conditions.
    pub fn mass_balance(&self, new: &ReservoirState, old: &ReservoirState, dt: f64) -> Result<MassBalance> {
        let mut mb = MassBalance::default();
        for i in 0..self.n_nodes() {
            if matches!(self.bcs.get(i), BoundaryCondition::Dirichlet { .. }) {
                continue;
            }
            let (m1, m0) = (self.node_mass(new, i)?, self.node_mass(old, i)?);
            for ph in 0..2 {
                mb.mass_new[ph] += m1[ph];
                mb.mass_old[ph] += m0[ph];
            }
        }
        for (w, q) in self.well_rates(new)?.iter().enumerate() {
            if matches!(self.bcs.get(self.wells[w].node), BoundaryCondition::Dirichlet { .. }) {
                continue;
            }
            mb.wells[0] += q[0] * dt;
            mb.wells[1] += q[1] * dt;
        }
        let b = self.boundary_influx(new)?;
        mb.boundary = [b[0] * dt, b[1] * dt];
        Ok(mb)
    }
}

/// Surface-volume ledger of one time step, per phase `[oil, water]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MassBalance {
    pub mass_old: [f64; 2],
    pub mass_new: [f64; 2],
    pub wells: [f64; 2],
    pub boundary: [f64; 2],
}

impl MassBalance {
    /// `|dM - (wells + boundary)| / M` summed over phases.
    pub fn relative_error(&self) -> f64 {
        let mut err = 0.0;
        for ph in 0..2 {
            err += self.mass_new[ph] - self.mass_old[ph] - self.wells[ph] - self.boundary[ph];
        }
        err.abs() / (self.mass_old[0] + self.mass_old[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_volume::{compute_control_volumes, CvConfig};
    use crate::gfdm::{build_stencils, WeightKind};
    use crate::pointcloud::{add_virtual_nodes_with, build_radius_connectivity, characteristic_angles, VirtualLayout, VirtualSpacing};

    pub(crate) fn lattice_model(n: usize, radius: f64, wells: Vec<WellSpec>) -> FlowModel {
        let c = PointCloud::rectangle([0.0, 0.0], n, n, 10.0, 10.0, 3.0).unwrap();
        let c = add_virtual_nodes_with(&c, VirtualSpacing::Fixed(10.0), VirtualLayout::CornerFan).unwrap();
        let g = build_radius_connectivity(&c, radius * 10.0).unwrap();
        let st = build_stencils(&c, &g, WeightKind::InverseCube).unwrap();
        let ang = characteristic_angles(&c).unwrap();
        let cv = compute_control_volumes(&st, &g, &ang, c.domain_area(), &CvConfig::default()).unwrap();
        let nr = c.n_real();
        let rock = RockProps::uniform(nr, 0.2, 1e-4, 15.0, 100.0, 3.0);
        let disc = Discretization::ncdmm(&c, &g, &st, &cv, &rock).unwrap();
        FlowModel::new(
            disc,
            FluidProps::default(),
            rock,
            RelPermTable::standard(),
            wells,
            BoundaryConditionSet::closed(nr),
        )
        .unwrap()
    }

    fn producer(node: usize, control: WellControl) -> WellSpec {
        WellSpec {
            name: "P1".into(),
            node,
            kind: WellKind::Producer,
            control,
            radius: 0.1,
            skin: 0.0,
        }
    }

    fn perturbed(model: &FlowModel, seed: u64) -> ReservoirState {
        let mut st = model.initial_state(15.0, 0.3);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for i in 0..st.p.len() {
            st.p[i] = 14.0 + 2.0 * next();
            st.sw[i] = 0.22 + 0.5 * next();
        }
        for v in st.p_virtual.iter_mut() {
            *v = 14.0 + 2.0 * next();
        }
        for w in st.p_wf.iter_mut() {
            *w = 12.0 + next();
        }
        st
    }

    #[test]
    fn equilibrium_residual_is_zero() {
        let m = lattice_model(5, 1.5, vec![]);
        let st = m.initial_state(15.0, 0.2);
        let r = m.residual(&st, &st, 1.0).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn interior_axial_transmissibility_matches_tpfa() {
        let m = lattice_model(9, 1.1, vec![]);
        let kh = 100.0 * 3.0;
        let mut checked = 0;
        for c in &m.disc.trans.connections {
            let (a, b) = (m.disc.coords[c.i], m.disc.coords[c.j]);
            let interior = |p: [f64; 2]| p[0] > 0.0 && p[0] < 80.0 && p[1] > 0.0 && p[1] < 80.0;
            if interior(a) && interior(b) {
                assert!((c.trans - kh).abs() < 0.02 * kh, "{} vs {kh}", c.trans);
                assert!(c.asymmetry < 1e-6);
                checked += 1;
            }
        }
        assert_eq!(checked, 2 * 7 * 6);
    }

    #[test]
    fn axial_lattice_reproduces_two_point_network() {
        let m = lattice_model(5, 1.1, vec![]);
        let t = crate::tpfa::cartesian([0.0, 0.0], 5, 5, 10.0, 10.0, 3.0, &[100.0; 25]).unwrap();
        assert_eq!(m.disc.trans.connections.len(), t.trans.connections.len());
        for c in &t.trans.connections {
            let got = m.disc.trans.find(c.i, c.j).unwrap().trans;
            assert!((got - c.trans).abs() < 1e-6 * c.trans, "({}, {}): {got} vs {}", c.i, c.j, c.trans);
        }
        for (a, b) in m.disc.effective_area.iter().zip(&t.effective_area) {
            assert!((a - b).abs() < 1e-6 * b);
        }
    }

    #[test]
    fn interface_fraction_cases() {
        let c = PointCloud::rectangle([0.0, 0.0], 4, 4, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(interface_fraction(&c, 0, 1), 0.5);
        assert_eq!(interface_fraction(&c, 0, 2), 0.5);
        assert_eq!(interface_fraction(&c, 1, 5), 1.0);
        assert_eq!(interface_fraction(&c, 5, 6), 1.0);
        // Chord between opposite edges crosses the interior.
        assert_eq!(interface_fraction(&c, 1, 13), 1.0);
    }

    #[test]
    fn barrier_pair_has_zero_transmissibility() {
        let c = PointCloud::rectangle([0.0, 0.0], 5, 5, 10.0, 10.0, 3.0).unwrap();
        let c = add_virtual_nodes_with(&c, VirtualSpacing::Fixed(10.0), VirtualLayout::CornerFan).unwrap();
        let g = build_radius_connectivity(&c, 11.0).unwrap();
        let st = build_stencils(&c, &g, WeightKind::InverseCube).unwrap();
        let ang = characteristic_angles(&c).unwrap();
        let cv = compute_control_volumes(&st, &g, &ang, c.domain_area(), &CvConfig::default()).unwrap();
        let mut rock = RockProps::uniform(25, 0.2, 1e-4, 15.0, 100.0, 3.0);
        rock.permeability[12] = 0.0;
        let set = build_transmissibilities(&c, &g, &st, &cv, &rock).unwrap();
        assert_eq!(set.find(12, 13).unwrap().trans, 0.0);
        assert!(set.find(6, 7).unwrap().trans > 0.0);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let wells = vec![producer(12, WellControl::Rate(5.0))];
        let mut m = lattice_model(5, 1.5, wells);
        m.bcs.set(0, BoundaryCondition::Dirichlet { pressure: 15.5, sw: 0.7 });
        m.bcs.set(2, BoundaryCondition::Dirichlet { pressure: 14.2, sw: 0.7 });
        m.bcs.set(10, BoundaryCondition::Neumann { flux: 0.01 });
        m.bcs.set(14, BoundaryCondition::Robin { alpha: 0.1, beta: 1.0, gamma: 1.5 });
        let m = FlowModel::new(m.disc.clone(), m.fluid, m.rock.clone(), m.relperm.clone(), m.wells.clone(), m.bcs.clone()).unwrap();
        for seed in [1u64, 7, 42] {
            let st = perturbed(&m, seed);
            let old = perturbed(&m, seed + 100);
            let x = m.pack(&st);
            let ev = m.evaluate(&x, &old, 0.7, true).unwrap();
            let jac = ev.jacobian.unwrap();
            let fd = m.fd_jacobian(&x, &old, 0.7).unwrap();
            let scale = fd.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            for r in 0..x.len() {
                for c in 0..x.len() {
                    let (a, b) = (jac.get(r, c), fd[r][c]);
                    assert!(
                        (a - b).abs() <= 1e-5 * b.abs().max(1e-3 * scale),
                        "row {r} col {c}: analytic {a} fd {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn connection_fluxes_are_antisymmetric() {
        let m = lattice_model(5, 2.1, vec![]);
        let st = perturbed(&m, 3);
        for c in &m.disc.trans.connections {
            let (a, b) = m.connection_fluxes(&st, c).unwrap();
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
    }

    #[test]
    fn dirichlet_row_is_value_difference() {
        let mut m = lattice_model(5, 1.5, vec![]);
        m.bcs.set(0, BoundaryCondition::Dirichlet { pressure: 20.0, sw: 0.8 });
        let st = m.initial_state(15.0, 0.2);
        let r = m.residual(&st, &st, 1.0).unwrap();
        assert_eq!(r[0], -5.0);
        assert!((r[1] + 0.6).abs() < 1e-15);
        let mut held = st.clone();
        held.p[0] = 20.0;
        held.sw[0] = 0.8;
        let r = m.residual(&held, &st, 1.0).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn neumann_row_of_linear_field() {
        // axial stencils, so the partner is the only virtual node involved
        let mut m = lattice_model(5, 1.1, vec![]);
        // node 10 is (0, 20) on the left edge, outward normal (-1, 0)
        m.bcs.set(10, BoundaryCondition::Neumann { flux: 0.0 });
        let m = FlowModel::new(m.disc.clone(), m.fluid, m.rock.clone(), m.relperm.clone(), vec![], m.bcs.clone()).unwrap();
        let mut st = m.initial_state(15.0, 0.2);
        for i in 0..m.n_nodes() {
            st.p[i] = m.disc.coords[i][0];
        }
        // the partner of a left-edge node sits at x = -10
        st.p_virtual[0] = -10.0;
        let r = m.residual(&st, &st, 1.0).unwrap();
        let row = 2 * m.n_nodes();
        assert!((r[row] + 1.0).abs() < 1e-9, "{}", r[row]);
    }

    #[test]
    fn neumann_face_flux_follows_prescribed_gradient() {
        let mut m = lattice_model(5, 1.1, vec![]);
        m.bcs.set(10, BoundaryCondition::Neumann { flux: -1.0 });
        let m = FlowModel::new(m.disc.clone(), m.fluid, m.rock.clone(), m.relperm.clone(), vec![], m.bcs.clone()).unwrap();
        assert_eq!(m.disc.boundary.face_length[&10], 10.0);
        assert_eq!(m.disc.boundary.face_length[&0], 10.0);
        let mut st = m.initial_state(15.0, 0.2);
        for i in 0..m.n_nodes() {
            st.p[i] = 15.0 + 0.1 * m.disc.coords[i][0];
        }
        st.p_virtual[0] = 14.0;
        let q = m.boundary_influx(&st).unwrap();
        let (bo, _) = m.fluid.fvf(Phase::Oil, st.p[10]).unwrap();
        let kro = m.relperm.eval(0.2).kro;
        let expected = -0.1 * DARCY * m.rock.permeability[10] * m.rock.thickness * 10.0 * kro / (m.fluid.mu_oil * bo);
        assert!((q[0] - expected).abs() < 1e-9 * expected.abs(), "{} vs {expected}", q[0]);
    }

    #[test]
    fn derivative_condition_without_virtual_is_rejected() {
        let m = lattice_model(5, 1.5, vec![]);
        let mut disc = m.disc.clone();
        disc.boundary.partner.remove(&10);
        let mut bcs = m.bcs.clone();
        bcs.set(10, BoundaryCondition::Neumann { flux: 0.0 });
        assert!(FlowModel::new(disc, m.fluid, m.rock.clone(), m.relperm.clone(), vec![], bcs).is_err());
    }
}
