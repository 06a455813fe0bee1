//! Weighted least-squares derivative stencils on scattered nodes.
//!
//! Each stencil expresses the first and second derivatives at a center node
//! as linear combinations of `u_j - u_i` over its neighbors, from a
//! second-order Taylor fit with distance weights.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::pointcloud::{ConnectivityGraph, Node, PointCloud};

/// Relative size below which the `dx*dy` column counts as structurally zero.
pub const CROSS_TERM_TOL: f64 = 1e-10;

/// Stencils whose scaled normal matrix exceeds this condition are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WeightKind {
    /// Quartic spline `1 - 6t^2 + 8t^3 - 3t^4`.
    QuarticSpline,
    /// Inverse cube `t^-3`.
    #[default]
    InverseCube,
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightKind::QuarticSpline => "w1",
            WeightKind::InverseCube => "w2",
        })
    }
}

impl FromStr for WeightKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "w1" => Ok(WeightKind::QuarticSpline),
            "w2" => Ok(WeightKind::InverseCube),
            other => Err(Error::InvalidInput(format!("unknown weight function '{other}' (expected w1 or w2)"))),
        }
    }
}

/// Weight of a neighbor at distance `r` for influence radius `r_m`; zero
/// outside the radius.
pub fn weight(kind: WeightKind, r: f64, r_m: f64) -> Result<f64> {
    if !(r_m > 0.0) || r < 0.0 {
        return Err(Error::InvalidInput(format!("bad weight arguments r = {r}, r_m = {r_m}")));
    }
    let t = r / r_m;
    if t > 1.0 {
        return Ok(0.0);
    }
    Ok(match kind {
        WeightKind::QuarticSpline => {
            let t2 = t * t;
            1.0 - 6.0 * t2 + 8.0 * t2 * t - 3.0 * t2 * t2
        }
        WeightKind::InverseCube => {
            if t == 0.0 {
                return Err(Error::SingularWeight);
            }
            t.powi(-3)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
}

impl Derivative {
    pub const ALL: [Derivative; 5] = [Derivative::Dx, Derivative::Dy, Derivative::Dxx, Derivative::Dyy, Derivative::Dxy];

    fn row(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalStencil {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub r_m: f64,
    pub weight: WeightKind,
    /// `coeffs[d][k]` multiplies `u[neighbors[k]] - u[center]` for derivative `d`.
    pub coeffs: [Vec<f64>; 5],
    /// False when every neighbor lies on the axes through the center and the
    /// mixed derivative was left out of the fit.
    pub cross_term: bool,
    pub condition: f64,
}

impl LocalStencil {
    pub fn row(&self, d: Derivative) -> &[f64] {
        &self.coeffs[d.row()]
    }

    pub fn position(&self, node: usize) -> Option<usize> {
        self.neighbors.iter().position(|&n| n == node)
    }

    pub fn coefficient(&self, d: Derivative, node: usize) -> Result<f64> {
        self.position(node)
            .map(|k| self.coeffs[d.row()][k])
            .ok_or(Error::NotInStencil {
                center: self.center,
                node,
            })
    }

    /// Laplacian coefficient of `node`, `m_xx + m_yy`.
    pub fn laplacian_coefficient(&self, node: usize) -> Result<f64> {
        Ok(self.coefficient(Derivative::Dxx, node)? + self.coefficient(Derivative::Dyy, node)?)
    }

    pub fn laplacian_row(&self) -> Vec<f64> {
        self.coeffs[2].iter().zip(&self.coeffs[3]).map(|(a, b)| a + b).collect()
    }

    /// Derivative estimate from nodal values indexed by node id.
    pub fn apply(&self, d: Derivative, values: &[f64]) -> f64 {
        let ui = values[self.center];
        self.neighbors
            .iter()
            .zip(&self.coeffs[d.row()])
            .map(|(&j, m)| m * (values[j] - ui))
            .sum()
    }
}

pub fn apply_derivative(stencil: &LocalStencil, values: &[f64], which: Derivative) -> f64 {
    stencil.apply(which, values)
}

pub fn laplacian_row(stencil: &LocalStencil) -> Vec<f64> {
    stencil.laplacian_row()
}

/// Fits the stencil of `center` over `neighbors`.
pub fn build_stencil(center: &Node, neighbors: &[&Node], kind: WeightKind, r_m: f64) -> Result<LocalStencil> {
    let n = neighbors.len();
    let offsets: Vec<[f64; 2]> = neighbors.iter().map(|q| [q.x - center.x, q.y - center.y]).collect();
    let h = offsets.iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max);
    if n == 0 || h == 0.0 {
        return Err(Error::InsufficientNeighbors {
            node: center.id,
            count: n,
            required: 5,
        });
    }
    let max_cross = offsets.iter().map(|d| (d[0] * d[1]).abs()).fold(0.0, f64::max);
    let cross_term = max_cross > CROSS_TERM_TOL * h * h;
    let terms = if cross_term { 5 } else { 4 };
    if n < terms {
        return Err(Error::InsufficientNeighbors {
            node: center.id,
            count: n,
            required: terms,
        });
    }

    // columns scaled by powers of h so the normal matrix is O(1)
    let mut l = DMatrix::<f64>::zeros(n, terms);
    let mut w = vec![0.0; n];
    for (k, d) in offsets.iter().enumerate() {
        let (x, y) = (d[0] / h, d[1] / h);
        l[(k, 0)] = x;
        l[(k, 1)] = y;
        l[(k, 2)] = 0.5 * x * x;
        l[(k, 3)] = 0.5 * y * y;
        if cross_term {
            l[(k, 4)] = x * y;
        }
        let om = weight(kind, d[0].hypot(d[1]), r_m)?;
        w[k] = om * om;
    }
    let mut ltw = l.transpose();
    for k in 0..n {
        for r in 0..terms {
            ltw[(r, k)] *= w[k];
        }
    }
    let a = &ltw * &l;
    // weights only matter up to a common factor; normalize before the eigen check
    let amax = a.amax();
    if !(amax > 0.0) {
        return Err(Error::RankDeficientStencil {
            node: center.id,
            condition: f64::INFINITY,
        });
    }
    let eig = SymmetricEigen::new(a.clone() / amax);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::MAX, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::RankDeficientStencil {
            node: center.id,
            condition,
        });
    }
    let m = a
        .cholesky()
        .ok_or(Error::RankDeficientStencil {
            node: center.id,
            condition,
        })?
        .solve(&ltw);

    let scale = [1.0 / h, 1.0 / h, 1.0 / (h * h), 1.0 / (h * h), 1.0 / (h * h)];
    let mut coeffs: [Vec<f64>; 5] = Default::default();
    for (r, row) in coeffs.iter_mut().enumerate() {
        *row = if r < terms {
            (0..n).map(|k| m[(r, k)] * scale[r]).collect()
        } else {
            vec![0.0; n]
        };
    }
    Ok(LocalStencil {
        center: center.id,
        neighbors: neighbors.iter().map(|q| q.id).collect(),
        r_m,
        weight: kind,
        coeffs,
        cross_term,
        condition,
    })
}

/// Stencils for every real node of the cloud, in node order.
pub fn build_stencils(cloud: &PointCloud, graph: &ConnectivityGraph, kind: WeightKind) -> Result<Vec<LocalStencil>> {
    (0..cloud.n_real())
        .map(|i| {
            let nbrs: Vec<&Node> = graph.neighbors[i].iter().map(|&j| &cloud.nodes[j]).collect();
            build_stencil(&cloud.nodes[i], &nbrs, kind, graph.r_m[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NINE: [(f64, f64); 8] = [
        (-1.0, 0.0),
        (1.0, 0.0),
        (0.0, -1.0),
        (0.0, 1.0),
        (-1.0, -1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (1.0, 1.0),
    ];

    fn nodes_at(center: (f64, f64), offsets: &[(f64, f64)], scale: f64) -> (Node, Vec<Node>) {
        let c = Node::interior(0, center.0, center.1);
        let nb = offsets
            .iter()
            .enumerate()
            .map(|(k, o)| Node::interior(k + 1, center.0 + scale * o.0, center.1 + scale * o.1))
            .collect();
        (c, nb)
    }

    fn stencil_for(offsets: &[(f64, f64)], kind: WeightKind, r_m: f64) -> LocalStencil {
        let (c, nb) = nodes_at((0.0, 0.0), offsets, 1.0);
        let refs: Vec<&Node> = nb.iter().collect();
        build_stencil(&c, &refs, kind, r_m).unwrap()
    }

    #[test]
    fn weight_values() {
        assert_eq!(weight(WeightKind::QuarticSpline, 0.0, 2.0).unwrap(), 1.0);
        assert!((weight(WeightKind::QuarticSpline, 1.0, 2.0).unwrap() - 0.3125).abs() < 1e-15);
        assert_eq!(weight(WeightKind::QuarticSpline, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(weight(WeightKind::InverseCube, 0.5, 1.0).unwrap(), 8.0);
        assert_eq!(weight(WeightKind::InverseCube, 3.0, 1.0).unwrap(), 0.0);
        assert!(matches!(weight(WeightKind::InverseCube, 0.0, 1.0), Err(Error::SingularWeight)));
    }

    #[test]
    fn weight_names_round_trip() {
        for k in [WeightKind::QuarticSpline, WeightKind::InverseCube] {
            assert_eq!(k.to_string().parse::<WeightKind>().unwrap(), k);
        }
        assert!("w3".parse::<WeightKind>().is_err());
    }

    #[test]
    fn symmetric_nine_point_quartic() {
        let s = stencil_for(&NINE, WeightKind::QuarticSpline, 1.8);
        let m3 = s.row(Derivative::Dxx);
        let expect = [0.96308, 0.96308, -0.036917, -0.036917, 0.018459, 0.018459, 0.018459, 0.018459];
        for (a, b) in m3.iter().zip(expect) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
        let m1 = s.row(Derivative::Dx);
        let expect = [-0.48083, 0.48083, 0.0, 0.0, -0.0095831, 0.0095831, -0.0095831, 0.0095831];
        for (a, b) in m1.iter().zip(expect) {
            assert!((a - b).abs() < 5e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn asymmetric_seven_point_quartic() {
        let s = stencil_for(&NINE[..7], WeightKind::QuarticSpline, 1.8);
        let expect = [0.96262, 0.98754, -0.037377, -0.012459, 0.024918, 0.012459, 0.012459];
        for (a, b) in s.row(Derivative::Dxx).iter().zip(expect) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
        let expect = [-0.48107, 0.49353, -2.388e-4, 0.012698, -6.2296e-3, 6.4684e-3, -0.012698];
        for (a, b) in s.row(Derivative::Dx).iter().zip(expect) {
            assert!((a - b).abs() < 5e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_cube_nine_point_is_compact_laplacian() {
        let s = stencil_for(&NINE, WeightKind::InverseCube, 1.8);
        let lap = s.laplacian_row();
        for k in 0..4 {
            assert!((lap[k] - 2.0 / 3.0).abs() < 1e-12);
        }
        for k in 4..8 {
            assert!((lap[k] - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn axial_stencil_drops_cross_term() {
        let s = stencil_for(&NINE[..4], WeightKind::InverseCube, 1.1);
        assert!(!s.cross_term);
        assert!(s.row(Derivative::Dxy).iter().all(|&c| c == 0.0));
        let lap = s.laplacian_row();
        assert!(lap.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn collinear_is_rank_deficient() {
        let offs: Vec<(f64, f64)> = (1..=6).map(|k| (k as f64 * 0.3 - 1.0, 0.0)).filter(|o| o.0 != 0.0).collect();
        let (c, nb) = nodes_at((0.0, 0.0), &offs, 1.0);
        let refs: Vec<&Node> = nb.iter().collect();
        assert!(matches!(
            build_stencil(&c, &refs, WeightKind::InverseCube, 3.0),
            Err(Error::RankDeficientStencil { .. })
        ));
    }

    #[test]
    fn too_few_neighbors() {
        let (c, nb) = nodes_at((0.0, 0.0), &NINE[4..7], 1.0);
        let refs: Vec<&Node> = nb.iter().collect();
        assert!(matches!(
            build_stencil(&c, &refs, WeightKind::InverseCube, 3.0),
            Err(Error::InsufficientNeighbors { count: 3, .. })
        ));
    }

    #[test]
    fn coefficient_lookup() {
        let s = stencil_for(&NINE, WeightKind::InverseCube, 1.8);
        assert!(s.coefficient(Derivative::Dx, 2).is_ok());
        assert!(matches!(s.coefficient(Derivative::Dx, 42), Err(Error::NotInStencil { .. })));
    }

    fn eval_quadratic(c: &[f64; 6], x: f64, y: f64) -> f64 {
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * y * y + c[5] * x * y
    }

    proptest! {
        #[test]
        fn reproduces_quadratics(
            cx in -5.0f64..5.0, cy in -5.0f64..5.0,
            jitter in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 8),
            coef in proptest::array::uniform6(-3.0f64..3.0),
            spacing in 0.05f64..20.0,
            quartic in any::<bool>(),
        ) {
            let offs: Vec<(f64, f64)> = NINE.iter().zip(&jitter).map(|(o, j)| (o.0 + j.0, o.1 + j.1)).collect();
            let (c, nb) = nodes_at((cx, cy), &offs, spacing);
            let refs: Vec<&Node> = nb.iter().collect();
            let kind = if quartic { WeightKind::QuarticSpline } else { WeightKind::InverseCube };
            let s = build_stencil(&c, &refs, kind, 2.0 * spacing).unwrap();
            let mut vals = vec![eval_quadratic(&coef, cx, cy)];
            vals.extend(nb.iter().map(|n| eval_quadratic(&coef, n.x, n.y)));
            let exact = [
                coef[1] + 2.0 * coef[3] * cx + coef[5] * cy,
                coef[2] + 2.0 * coef[4] * cy + coef[5] * cx,
                2.0 * coef[3],
                2.0 * coef[4],
                coef[5],
            ];
            let mag = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (d, e) in Derivative::ALL.iter().zip(exact) {
                let order = if matches!(d, Derivative::Dx | Derivative::Dy) { 1 } else { 2 };
                let tol = 1e-9 * mag / spacing.powi(order);
                prop_assert!((s.apply(*d, &vals) - e).abs() < tol, "{:?}: {} vs {}", d, s.apply(*d, &vals), e);
            }
        }

        #[test]
        fn translation_and_scale_invariance(
            shift in (-50.0f64..50.0, -50.0f64..50.0),
            scale in 0.1f64..10.0,
            jitter in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 8),
        ) {
            let offs: Vec<(f64, f64)> = NINE.iter().zip(&jitter).map(|(o, j)| (o.0 + j.0, o.1 + j.1)).collect();
            let base = stencil_for(&offs, WeightKind::InverseCube, 2.0);
            let (c, nb) = nodes_at(shift, &offs, scale);
            let refs: Vec<&Node> = nb.iter().collect();
            let moved = build_stencil(&c, &refs, WeightKind::InverseCube, 2.0 * scale).unwrap();
            for (d, p) in [(0usize, 1), (1, 1), (2, 2), (3, 2), (4, 2)] {
                for (a, b) in base.coeffs[d].iter().zip(&moved.coeffs[d]) {
                    let expect = a / scale.powi(p);
                    prop_assert!((b - expect).abs() <= 1e-9 * expect.abs().max(1.0 / scale.powi(p)));
                }
            }
        }
    }
}
