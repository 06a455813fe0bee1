//! Point-cloud geometry: node storage, boundary loops, virtual-node
//! augmentation, characteristic angles and the connectable neighbor graph.
//!
//! Node ids are positions in [`PointCloud::nodes`]. Real nodes (interior and
//! boundary) always precede virtual nodes, so a real node's id doubles as its
//! index in every per-real-node array of the crate.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Boundary,
    Virtual,
}

impl NodeKind {
    pub fn is_real(self) -> bool {
        !matches!(self, NodeKind::Virtual)
    }

    pub fn code(self) -> char {
        match self {
            NodeKind::Interior => 'I',
            NodeKind::Boundary => 'B',
            NodeKind::Virtual => 'V',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "I" => Some(NodeKind::Interior),
            "B" => Some(NodeKind::Boundary),
            "V" => Some(NodeKind::Virtual),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub kind: NodeKind,
    /// Unit outward normal; boundary and virtual nodes only.
    pub normal: Option<[f64; 2]>,
    /// Boundary node a virtual node belongs to.
    pub parent: Option<usize>,
}

impl Node {
    pub fn interior(id: usize, x: f64, y: f64) -> Self {
        Node {
            id,
            x,
            y,
            kind: NodeKind::Interior,
            normal: None,
            parent: None,
        }
    }

    pub fn boundary(id: usize, x: f64, y: f64) -> Self {
        Node {
            kind: NodeKind::Boundary,
            ..Node::interior(id, x, y)
        }
    }

    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// How virtual nodes are laid out around the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum VirtualLayout {
    /// One virtual node per boundary node along the bisector of the incident
    /// edge normals, at the offset distance.
    #[default]
    Bisector,
    /// As `Bisector` on smooth and reflex boundary nodes. At convex corners
    /// three virtual nodes are placed at `p + s n1`, `p + s n2` and
    /// `p + s (n1 + n2)`, which continues a lattice across the corner.
    CornerFan,
}

/// Offset between a boundary node and its virtual node(s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VirtualSpacing {
    Fixed(f64),
    /// Mean length of the two boundary segments incident to the node.
    LocalAverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub nodes: Vec<Node>,
    /// Closed loops of boundary-node ids with the domain on the left
    /// (outer loop counterclockwise, holes clockwise).
    pub boundary: Vec<Vec<usize>>,
    pub thickness: f64,
}

impl PointCloud {
    /// Validates ids, node ordering and loops, and fills in missing boundary
    /// normals from the loop geometry.
    pub fn new(mut nodes: Vec<Node>, boundary: Vec<Vec<usize>>, thickness: f64) -> Result<Self> {
        if !(thickness > 0.0) {
            return Err(Error::InvalidInput(format!("thickness must be positive, got {thickness}")));
        }
        let mut seen_virtual = false;
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(Error::InvalidInput(format!(
                    "node ids must be contiguous from 0; found id {} at position {idx}",
                    node.id
                )));
            }
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(Error::InvalidInput(format!("node {idx} has non-finite coordinates")));
            }
            match node.kind {
                NodeKind::Virtual => {
                    seen_virtual = true;
                    let parent = node.parent.ok_or_else(|| {
                        Error::InvalidInput(format!("virtual node {idx} has no parent"))
                    })?;
                    if nodes.get(parent).map(|p| p.kind) != Some(NodeKind::Boundary) {
                        return Err(Error::InvalidInput(format!(
                            "virtual node {idx} references non-boundary parent {parent}"
                        )));
                    }
                }
                _ if seen_virtual => {
                    return Err(Error::InvalidInput(format!(
                        "real node {idx} follows a virtual node; real nodes must come first"
                    )));
                }
                _ => {}
            }
            if let Some(n) = node.normal {
                if ((n[0].hypot(n[1])) - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("node {idx} has a non-unit normal")));
                }
            }
        }
        for lp in &boundary {
            if lp.len() < 3 {
                return Err(Error::InvalidInput("boundary loop with fewer than 3 nodes".into()));
            }
            for &id in lp {
                match nodes.get(id) {
                    Some(n) if n.kind == NodeKind::Boundary => {}
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "boundary loop references {id}, which is not a boundary node"
                        )))
                    }
                }
            }
        }
        let mut cloud = PointCloud {
            nodes: Vec::new(),
            boundary,
            thickness,
        };
        // normals need the loops, so compute them on a node-less shell first
        let normals = {
            cloud.nodes = std::mem::take(&mut nodes);
            let mut out = Vec::new();
            for lp in &cloud.boundary {
                for k in 0..lp.len() {
                    let id = lp[k];
                    if cloud.nodes[id].normal.is_none() {
                        let (prev, next) = (lp[(k + lp.len() - 1) % lp.len()], lp[(k + 1) % lp.len()]);
                        out.push((id, cloud.bisector_normal(prev, id, next)?));
                    }
                }
            }
            out
        };
        for (id, n) in normals {
            cloud.nodes[id].normal = Some(n);
        }
        Ok(cloud)
    }

    /// Axis-aligned rectangular lattice with `nx` by `ny` nodes covering
    /// `[x0, x0 + (nx-1) dx] x [y0, y0 + (ny-1) dy]`; edge nodes are boundary nodes.
    pub fn rectangle(origin: [f64; 2], nx: usize, ny: usize, dx: f64, dy: f64, thickness: f64) -> Result<Self> {
        if nx < 2 || ny < 2 || !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::InvalidInput("rectangle needs at least 2x2 nodes and positive spacing".into()));
        }
        let mut nodes = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let id = j * nx + i;
                let (x, y) = (origin[0] + i as f64 * dx, origin[1] + j as f64 * dy);
                let on_edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                nodes.push(if on_edge { Node::boundary(id, x, y) } else { Node::interior(id, x, y) });
            }
        }
        let mut lp = Vec::new();
        lp.extend((0..nx).map(|i| i));
        lp.extend((1..ny).map(|j| j * nx + nx - 1));
        lp.extend((0..nx - 1).rev().map(|i| (ny - 1) * nx + i));
        lp.extend((1..ny - 1).rev().map(|j| j * nx));
        PointCloud::new(nodes, vec![lp], thickness)
    }

    pub fn with_thickness(mut self, thickness: f64) -> Self {
        self.thickness = thickness;
        self
    }

    pub fn n_real(&self) -> usize {
        self.nodes.iter().take_while(|n| n.kind.is_real()).count()
    }

    pub fn real_nodes(&self) -> &[Node] {
        &self.nodes[..self.n_real()]
    }

    pub fn virtual_nodes(&self) -> &[Node] {
        &self.nodes[self.n_real()..]
    }

    pub fn boundary_polygons(&self) -> Vec<Vec<[f64; 2]>> {
        self.boundary
            .iter()
            .map(|lp| lp.iter().map(|&id| self.nodes[id].pos()).collect())
            .collect()
    }

    /// Area enclosed by the boundary loops (signed shoelace sum).
    pub fn domain_area(&self) -> f64 {
        self.boundary_polygons().iter().map(|p| signed_area(p)).sum()
    }

    pub fn domain_volume(&self) -> f64 {
        self.domain_area() * self.thickness
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        point_in_polygons(p, &self.boundary_polygons())
    }

    /// First virtual node created for each boundary node, indexed by node id.
    pub fn primary_virtual(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.nodes.len()];
        for v in self.virtual_nodes() {
            if let Some(p) = v.parent {
                if out[p].is_none() {
                    out[p] = Some(v.id);
                }
            }
        }
        out
    }

    /// Previous/next loop neighbors of every boundary node.
    fn loop_links(&self) -> Result<Vec<Option<(usize, usize)>>> {
        let mut links = vec![None; self.nodes.len()];
        let mut count = vec![0usize; self.nodes.len()];
        for lp in &self.boundary {
            for k in 0..lp.len() {
                let id = lp[k];
                count[id] += 2;
                links[id] = Some((lp[(k + lp.len() - 1) % lp.len()], lp[(k + 1) % lp.len()]));
            }
        }
        for node in &self.nodes {
            if node.kind == NodeKind::Boundary && count[node.id] != 2 {
                return Err(Error::BoundaryTopology {
                    node: node.id,
                    segments: count[node.id],
                });
            }
        }
        Ok(links)
    }

    fn edge_normal(&self, a: usize, b: usize) -> Result<[f64; 2]> {
        let (pa, pb) = (self.nodes[a].pos(), self.nodes[b].pos());
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = dx.hypot(dy);
        if len <= TOL {
            return Err(Error::InvalidInput(format!("zero-length boundary segment {a}-{b}")));
        }
        // domain on the left, so outward is to the right of the direction
        Ok([dy / len, -dx / len])
    }

    fn bisector_normal(&self, prev: usize, id: usize, next: usize) -> Result<[f64; 2]> {
        let n1 = self.edge_normal(prev, id)?;
        let n2 = self.edge_normal(id, next)?;
        let (sx, sy) = (n1[0] + n2[0], n1[1] + n2[1]);
        let len = sx.hypot(sy);
        if len <= 1e-9 {
            return Err(Error::InvalidInput(format!("boundary cusp at node {id}")));
        }
        Ok([sx / len, sy / len])
    }
}

pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let scale = len2.sqrt().max(1.0);
    let cross = abx * apy - aby * apx;
    if cross.abs() > 1e-10 * scale * scale {
        return false;
    }
    let t = (abx * apx + aby * apy) / len2;
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

/// Ray-casting point-in-polygon over one or more loops; points on a
/// boundary segment count as inside.
pub fn point_in_polygons(p: [f64; 2], loops: &[Vec<[f64; 2]>]) -> bool {
    let mut inside = false;
    for poly in loops {
        let n = poly.len();
        for k in 0..n {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Adds one virtual node per boundary node along the outward bisector at
/// distance `spacing`.
pub fn add_virtual_nodes(cloud: &PointCloud, spacing: f64) -> Result<PointCloud> {
    add_virtual_nodes_with(cloud, VirtualSpacing::Fixed(spacing), VirtualLayout::Bisector)
}

pub fn add_virtual_nodes_with(cloud: &PointCloud, spacing: VirtualSpacing, layout: VirtualLayout) -> Result<PointCloud> {
    if let VirtualSpacing::Fixed(s) = spacing {
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!("virtual spacing must be positive, got {s}")));
        }
    }
    if cloud.boundary.is_empty() {
        return Err(Error::InvalidInput("cloud has no boundary loops".into()));
    }
    let n_real = cloud.n_real();
    let mut nodes: Vec<Node> = cloud.nodes[..n_real].to_vec();
    let links = cloud.loop_links()?;
    let polys = cloud.boundary_polygons();
    let angles = characteristic_angles(cloud)?;
    for b in 0..n_real {
        if cloud.nodes[b].kind != NodeKind::Boundary {
            continue;
        }
        let (prev, next) = links[b].expect("boundary node on a loop");
        let n1 = cloud.edge_normal(prev, b)?;
        let n2 = cloud.edge_normal(b, next)?;
        let bis = cloud.bisector_normal(prev, b, next)?;
        let s = match spacing {
            VirtualSpacing::Fixed(s) => s,
            VirtualSpacing::LocalAverage => {
                0.5 * (cloud.nodes[prev].distance(&cloud.nodes[b]) + cloud.nodes[b].distance(&cloud.nodes[next]))
            }
        };
        let p = cloud.nodes[b].pos();
        let convex_corner = angles.theta[b] < PI - 1e-6;
        let mut offsets: Vec<([f64; 2], [f64; 2])> = Vec::new();
        match layout {
            VirtualLayout::CornerFan if convex_corner => {
                let diag = [n1[0] + n2[0], n1[1] + n2[1]];
                offsets.push(([s * diag[0], s * diag[1]], bis));
                offsets.push(([s * n1[0], s * n1[1]], n1));
                offsets.push(([s * n2[0], s * n2[1]], n2));
            }
            _ => offsets.push(([s * bis[0], s * bis[1]], bis)),
        }
        for (off, normal) in offsets {
            let q = [p[0] + off[0], p[1] + off[1]];
            if point_in_polygons(q, &polys) {
                return Err(Error::VirtualNodeInside { node: b });
            }
            let id = nodes.len();
            nodes.push(Node {
                id,
                x: q[0],
                y: q[1],
                kind: NodeKind::Virtual,
                normal: Some(normal),
                parent: Some(b),
            });
        }
    }
    // virtual ids were assigned after the real block, which is preserved
    PointCloud::new(nodes, cloud.boundary.clone(), cloud.thickness)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicAngles {
    /// One angle per real node, radians.
    pub theta: Vec<f64>,
}

impl CharacteristicAngles {
    pub fn fraction(&self, i: usize) -> f64 {
        self.theta[i] / (2.0 * PI)
    }
}

/// 2π for interior nodes, the interior corner angle for boundary nodes.
pub fn characteristic_angles(cloud: &PointCloud) -> Result<CharacteristicAngles> {
    let links = cloud.loop_links()?;
    let n_real = cloud.n_real();
    let mut theta = vec![2.0 * PI; n_real];
    for i in 0..n_real {
        if cloud.nodes[i].kind != NodeKind::Boundary {
            continue;
        }
        let (prev, next) = links[i].expect("validated above");
        let b = cloud.nodes[i].pos();
        let (a, c) = (cloud.nodes[prev].pos(), cloud.nodes[next].pos());
        let vn = [c[0] - b[0], c[1] - b[1]];
        let vp = [a[0] - b[0], a[1] - b[1]];
        // sweep counterclockwise from the outgoing to the incoming segment
        let mut ang = (vn[0] * vp[1] - vn[1] * vp[0]).atan2(vn[0] * vp[0] + vn[1] * vp[1]);
        if ang <= 0.0 {
            ang += 2.0 * PI;
        }
        theta[i] = ang;
    }
    Ok(CharacteristicAngles { theta })
}

/// Symmetric neighbor relation over all nodes (virtual ones included).
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityGraph {
    /// Sorted neighbor ids per node, excluding the node itself.
    pub neighbors: Vec<Vec<usize>>,
    /// Influence radius per node used for stencil weighting.
    pub r_m: Vec<f64>,
}

impl ConnectivityGraph {
    /// Unordered pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.neighbors.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// Pairs between two real nodes.
    pub fn real_pairs(&self, n_real: usize) -> Vec<(usize, usize)> {
        self.pairs().into_iter().filter(|&(_, j)| j < n_real).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors
            .iter()
            .enumerate()
            .all(|(i, nb)| nb.iter().all(|&j| self.neighbors[j].binary_search(&i).is_ok()))
    }

    fn from_sets(sets: Vec<BTreeSet<usize>>, r_m: Vec<f64>) -> Self {
        ConnectivityGraph {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            r_m,
        }
    }
}

/// Number of neighbors a stencil needs: five, or four when every neighbor
/// lies on the axes through the center (the cross term is then unobservable
/// and dropped from the fit).
pub fn required_neighbors(center: &Node, nbrs: impl Iterator<Item = [f64; 2]>) -> usize {
    let mut max_r2 = 0.0f64;
    let mut max_cross = 0.0f64;
    for q in nbrs {
        let (dx, dy) = (q[0] - center.x, q[1] - center.y);
        max_r2 = max_r2.max(dx * dx + dy * dy);
        max_cross = max_cross.max((dx * dy).abs());
    }
    if max_r2 > 0.0 && max_cross <= crate::gfdm::CROSS_TERM_TOL * max_r2 {
        4
    } else {
        5
    }
}

fn check_neighbor_counts(cloud: &PointCloud, graph: &ConnectivityGraph) -> Result<()> {
    for node in cloud.real_nodes() {
        let nb = &graph.neighbors[node.id];
        let required = required_neighbors(node, nb.iter().map(|&j| cloud.nodes[j].pos()));
        if nb.len() < required {
            return Err(Error::InsufficientNeighbors {
                node: node.id,
                count: nb.len(),
                required,
            });
        }
    }
    Ok(())
}

/// All node pairs within Euclidean distance `r_m`.
pub fn build_radius_connectivity(cloud: &PointCloud, r_m: f64) -> Result<ConnectivityGraph> {
    if !(r_m > 0.0) {
        return Err(Error::InvalidInput(format!("influence radius must be positive, got {r_m}")));
    }
    if cloud.nodes.len() < 6 {
        return Err(Error::InvalidInput(format!(
            "radius connectivity needs at least 6 nodes, cloud has {}",
            cloud.nodes.len()
        )));
    }
    let n = cloud.nodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cloud.nodes[a].x.total_cmp(&cloud.nodes[b].x));
    let mut sets = vec![BTreeSet::new(); n];
    for (k, &a) in order.iter().enumerate() {
        let na = &cloud.nodes[a];
        for &b in &order[k + 1..] {
            let nb = &cloud.nodes[b];
            if nb.x - na.x > r_m {
                break;
            }
            if na.distance(nb) <= r_m {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
    }
    let graph = ConnectivityGraph::from_sets(sets, vec![r_m; n]);
    check_neighbor_counts(cloud, &graph)?;
    Ok(graph)
}

/// Neighbors from triangle edges, filled up to five per real node with the
/// nearest candidates (real nodes for interior nodes, virtual nodes for
/// boundary nodes). Influence radius is 1.5 times the farthest neighbor.
pub fn build_triangulation_connectivity(cloud: &PointCloud, triangles: &[[usize; 3]]) -> Result<ConnectivityGraph> {
    let n = cloud.nodes.len();
    let n_real = cloud.n_real();
    let mut sets = vec![BTreeSet::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            if v >= n {
                return Err(Error::MalformedTriangle {
                    index: t,
                    reason: format!("unknown node id {v}"),
                });
            }
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::MalformedTriangle {
                index: t,
                reason: "repeated vertex".into(),
            });
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            sets[a].insert(b);
            sets[b].insert(a);
        }
    }
    for i in 0..n_real {
        let have = sets[i].len();
        if have >= 5 {
            continue;
        }
        let node = &cloud.nodes[i];
        let want_virtual = node.kind == NodeKind::Boundary;
        let mut candidates: Vec<(f64, usize)> = cloud
            .nodes
            .iter()
            .filter(|c| c.id != i && !sets[i].contains(&c.id) && (c.kind == NodeKind::Virtual) == want_virtual)
            .map(|c| (node.distance(c), c.id))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in candidates.iter().take(5 - have) {
            sets[i].insert(j);
            sets[j].insert(i);
        }
    }
    let mut r_m = vec![0.0; n];
    for i in 0..n {
        let far = sets[i].iter().map(|&j| cloud.nodes[i].distance(&cloud.nodes[j])).fold(0.0, f64::max);
        r_m[i] = 1.5 * far;
    }
    let graph = ConnectivityGraph::from_sets(sets, r_m);
    check_neighbor_counts(cloud, &graph)?;
    Ok(graph)
}

/// Boundary nodes at roughly `spacing` arc length plus lattice nodes strictly
/// inside the polygon, minus lattice nodes closer than `spacing / 2` to a
/// boundary node.
pub fn generate_pseudo_cartesian_cloud(polygon: &[[f64; 2]], spacing: f64) -> Result<PointCloud> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput(format!("lattice spacing must be positive, got {spacing}")));
    }
    if polygon.len() < 3 {
        return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
    }
    let mut poly = polygon.to_vec();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &poly {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    if spacing > (xmax - xmin).max(ymax - ymin) {
        return Err(Error::EmptyInterior { spacing });
    }

    let mut boundary_pts: Vec<[f64; 2]> = Vec::new();
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let segments = ((len / spacing).round() as usize).max(1);
        for s in 0..segments {
            let t = s as f64 / segments as f64;
            boundary_pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }

    let loops = vec![poly.clone()];
    let half = 0.5 * spacing;
    let nx = ((xmax - xmin) / spacing).floor() as usize;
    let ny = ((ymax - ymin) / spacing).floor() as usize;
    let mut interior_pts = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let q = [xmin + i as f64 * spacing, ymin + j as f64 * spacing];
            let strictly_inside =
                point_in_polygons(q, &loops) && !poly.iter().enumerate().any(|(k, &a)| on_segment(q, a, poly[(k + 1) % poly.len()]));
            if !strictly_inside {
                continue;
            }
            let near = boundary_pts.iter().any(|b| (b[0] - q[0]).hypot(b[1] - q[1]) < half);
            if !near {
                interior_pts.push(q);
            }
        }
    }

    let mut nodes = Vec::with_capacity(boundary_pts.len() + interior_pts.len());
    for (id, p) in boundary_pts.iter().enumerate() {
        nodes.push(Node::boundary(id, p[0], p[1]));
    }
    let nb = nodes.len();
    for (k, p) in interior_pts.iter().enumerate() {
        nodes.push(Node::interior(nb + k, p[0], p[1]));
    }
    PointCloud::new(nodes, vec![(0..nb).collect()], 1.0)
}
