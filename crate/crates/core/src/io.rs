//! Plain-text readers and writers, and the snapshot comparison metric.
//!
//! Every format is whitespace separated, one record per line; blank lines and
//! lines starting with `#` are skipped on input. Floats are written in
//! shortest round-trip scientific notation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembler::TransmissibilitySet;
use crate::control_volume::ControlVolumeSolution;
use crate::error::{Error, Result};
use crate::flow::RelPermTable;
use crate::gfdm::LocalStencil;
use crate::pointcloud::{Node, NodeKind, PointCloud};
use crate::solver::StepRecord;

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#')).then(|| (i + 1, line.split_whitespace().collect()))
    })
}

fn field<T: std::str::FromStr>(label: &str, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(label, line, format!("invalid {what} '{tok}'")))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::file(path, e))?))
}

/// Parses `id kind x y [nx ny [parent]]` records.
pub fn parse_cloud(text: &str, label: &str) -> Result<Vec<Node>> {
    let mut nodes = Vec::new();
    for (line, tok) in records(text) {
        if !matches!(tok.len(), 4 | 6 | 7) {
            return Err(Error::parse(label, line, format!("expected 4, 6 or 7 fields, found {}", tok.len())));
        }
        let kind = NodeKind::from_code(tok[1])
            .ok_or_else(|| Error::parse(label, line, format!("unknown node kind '{}'", tok[1])))?;
        let normal = if tok.len() >= 6 {
            Some([field(label, line, tok[4], "normal")?, field(label, line, tok[5], "normal")?])
        } else {
            None
        };
        nodes.push(Node {
            id: field(label, line, tok[0], "node id")?,
            x: field(label, line, tok[2], "coordinate")?,
            y: field(label, line, tok[3], "coordinate")?,
            kind,
            normal,
            parent: tok.get(6).map(|t| field(label, line, t, "parent id")).transpose()?,
        });
    }
    Ok(nodes)
}

pub fn write_cloud<W: Write>(out: &mut W, cloud: &PointCloud) -> Result<()> {
    writeln!(out, "# id kind x y [nx ny [parent]]")?;
    for n in &cloud.nodes {
        write!(out, "{} {} {:e} {:e}", n.id, n.kind.code(), n.x, n.y)?;
        if let Some([nx, ny]) = n.normal {
            write!(out, " {nx:e} {ny:e}")?;
            if let Some(p) = n.parent {
                write!(out, " {p}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One loop of node ids per line.
pub fn parse_loops(text: &str, label: &str) -> Result<Vec<Vec<usize>>> {
    records(text)
        .map(|(line, tok)| tok.iter().map(|t| field(label, line, t, "node id")).collect())
        .collect()
}

pub fn write_loops<W: Write>(out: &mut W, cloud: &PointCloud) -> Result<()> {
    for l in &cloud.boundary {
        let ids: Vec<String> = l.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", ids.join(" "))?;
    }
    Ok(())
}

pub fn parse_triangles(text: &str, label: &str) -> Result<Vec<[usize; 3]>> {
    records(text)
        .map(|(line, tok)| {
            if tok.len() != 3 {
                return Err(Error::parse(label, line, format!("expected 3 node ids, found {}", tok.len())));
            }
            Ok([
                field(label, line, tok[0], "node id")?,
                field(label, line, tok[1], "node id")?,
                field(label, line, tok[2], "node id")?,
            ])
        })
        .collect()
}

/// `Sw krw kro` rows, validated on construction.
pub fn parse_relperm(text: &str, label: &str) -> Result<RelPermTable> {
    let (mut sw, mut krw, mut kro) = (Vec::new(), Vec::new(), Vec::new());
    for (line, tok) in records(text) {
        if tok.len() != 3 {
            return Err(Error::parse(label, line, format!("expected 'Sw krw kro', found {} fields", tok.len())));
        }
        sw.push(field(label, line, tok[0], "Sw")?);
        krw.push(field(label, line, tok[1], "krw")?);
        kro.push(field(label, line, tok[2], "kro")?);
    }
    RelPermTable::new(sw, krw, kro)
}

pub fn read_cloud_file(cloud: &Path, loops: &Path, thickness: f64) -> Result<PointCloud> {
    let nodes = parse_cloud(&read_text(cloud)?, &cloud.display().to_string())?;
    let loops = parse_loops(&read_text(loops)?, &loops.display().to_string())?;
    PointCloud::new(nodes, loops, thickness)
}

pub fn read_triangles(path: &Path) -> Result<Vec<[usize; 3]>> {
    parse_triangles(&read_text(path)?, &path.display().to_string())
}

pub fn read_relperm(path: &Path) -> Result<RelPermTable> {
    parse_relperm(&read_text(path)?, &path.display().to_string())
}

/// Writes the cloud and, next to it with a `.loops` extension, its boundary
/// loops. Returns the loop file path.
pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<std::path::PathBuf> {
    let mut w = create(path)?;
    write_cloud(&mut w, cloud)?;
    w.flush()?;
    let loops = path.with_extension("loops");
    let mut w = create(&loops)?;
    write_loops(&mut w, cloud)?;
    w.flush()?;
    Ok(loops)
}

pub fn write_control_volumes<W: Write>(out: &mut W, cv: &ControlVolumeSolution) -> Result<()> {
    writeln!(out, "# node V V_bar theta")?;
    for (i, ((v, vb), t)) in cv.volume.iter().zip(&cv.effective).zip(&cv.theta).enumerate() {
        writeln!(out, "{i} {v:e} {vb:e} {t:e}")?;
    }
    Ok(())
}

/// Per stencil a `center n r_m` line, then `j dx dy m1 m2 m3 m4 m5` per
/// neighbor.
pub fn write_stencils<W: Write>(out: &mut W, stencils: &[LocalStencil], cloud: &PointCloud) -> Result<()> {
    for s in stencils {
        let c = &cloud.nodes[s.center];
        writeln!(out, "{} {} {:e}", s.center, s.neighbors.len(), s.r_m)?;
        for (k, &j) in s.neighbors.iter().enumerate() {
            let n = &cloud.nodes[j];
            write!(out, "{j} {:e} {:e}", n.x - c.x, n.y - c.y)?;
            for d in &s.coeffs {
                write!(out, " {:e}", d[k])?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_transmissibilities<W: Write>(out: &mut W, trans: &TransmissibilitySet) -> Result<()> {
    writeln!(out, "# i j T asymmetry_ratio")?;
    for c in &trans.connections {
        writeln!(out, "{} {} {:e} {:e}", c.i, c.j, c.trans, c.asymmetry)?;
    }
    Ok(())
}

/// Node-wise pressure and saturation at one instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SnapshotTable {
    pub node: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub sw: Vec<f64>,
}

impl SnapshotTable {
    pub fn new(coords: &[[f64; 2]], p: &[f64], sw: &[f64]) -> Self {
        SnapshotTable {
            node: (0..coords.len()).collect(),
            x: coords.iter().map(|c| c[0]).collect(),
            y: coords.iter().map(|c| c[1]).collect(),
            p: p.to_vec(),
            sw: sw.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_empty()
    }
}

pub fn write_snapshot<W: Write>(out: &mut W, snap: &SnapshotTable) -> Result<()> {
    writeln!(out, "# node x y p Sw")?;
    for k in 0..snap.len() {
        writeln!(
            out,
            "{} {:e} {:e} {:e} {:e}",
            snap.node[k], snap.x[k], snap.y[k], snap.p[k], snap.sw[k]
        )?;
    }
    Ok(())
}

pub fn parse_snapshot(text: &str, label: &str) -> Result<SnapshotTable> {
    let mut s = SnapshotTable::default();
    for (line, tok) in records(text) {
        if tok.len() != 5 {
            return Err(Error::parse(label, line, format!("expected 'node x y p Sw', found {} fields", tok.len())));
        }
        s.node.push(field(label, line, tok[0], "node id")?);
        s.x.push(field(label, line, tok[1], "x")?);
        s.y.push(field(label, line, tok[2], "y")?);
        s.p.push(field(label, line, tok[3], "pressure")?);
        s.sw.push(field(label, line, tok[4], "saturation")?);
    }
    Ok(s)
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotTable> {
    parse_snapshot(&read_text(path)?, &path.display().to_string())
}

pub fn save_snapshot(path: &Path, snap: &SnapshotTable) -> Result<()> {
    let mut w = create(path)?;
    write_snapshot(&mut w, snap)?;
    w.flush()?;
    Ok(())
}

/// One line per accepted step and well; `q_o q_w` are surface rates,
/// positive into the reservoir.
pub fn write_well_report<W: Write>(out: &mut W, steps: &[StepRecord]) -> Result<()> {
    writeln!(out, "# time dt newton_iters well_id p_wf q_o q_w")?;
    for s in steps {
        for w in &s.wells {
            writeln!(
                out,
                "{:e} {:e} {} {} {:e} {:e} {:e}",
                s.time, s.dt, s.newton_iterations, w.name, w.p_wf, w.q_oil, w.q_water
            )?;
        }
    }
    Ok(())
}

/// Root-mean-square differences over matched nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonReport {
    pub error_p: f64,
    pub error_sw: f64,
    pub n_p: usize,
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "error_p {:e}", self.error_p)?;
        writeln!(f, "error_sw {:e}", self.error_sw)?;
        write!(f, "n_p {}", self.n_p)
    }
}

pub const DEFAULT_MATCH_TOLERANCE: f64 = 1e-6;

/// Matches every candidate node to its nearest reference node and returns
/// the RMS pressure and saturation differences.
pub fn compare(candidate: &SnapshotTable, reference: &SnapshotTable, tolerance: f64) -> Result<ComparisonReport> {
    if candidate.is_empty() {
        return Err(Error::InvalidInput("candidate snapshot has no nodes".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidInput(format!("matching tolerance must be non-negative, got {tolerance}")));
    }
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.sort_by(|&a, &b| reference.x[a].total_cmp(&reference.x[b]));
    let xs: Vec<f64> = order.iter().map(|&k| reference.x[k]).collect();
    let (mut sp, mut ss) = (0.0, 0.0);
    for c in 0..candidate.len() {
        let (cx, cy) = (candidate.x[c], candidate.y[c]);
        let lo = xs.partition_point(|&x| x < cx - tolerance);
        let mut best: Option<(f64, usize)> = None;
        for &k in order[lo..].iter().take_while(|&&k| reference.x[k] <= cx + tolerance) {
            let d = (reference.x[k] - cx).hypot(reference.y[k] - cy);
            if d <= tolerance && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let Some((_, k)) = best else {
            return Err(Error::UnmatchedNode { x: cx, y: cy });
        };
        sp += (candidate.p[c] - reference.p[k]).powi(2);
        ss += (candidate.sw[c] - reference.sw[k]).powi(2);
    }
    let n = candidate.len();
    Ok(ComparisonReport {
        error_p: (sp / n as f64).sqrt(),
        error_sw: (ss / n as f64).sqrt(),
        n_p: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(p: &[f64]) -> SnapshotTable {
        let coords: Vec<[f64; 2]> = (0..p.len()).map(|i| [i as f64, 0.5 * i as f64]).collect();
        SnapshotTable::new(&coords, p, &vec![0.2; p.len()])
    }

    #[test]
    fn compare_examples() {
        let a = table(&[10.0, 11.0, 12.0]);
        let r = compare(&a, &a, DEFAULT_MATCH_TOLERANCE).unwrap();
        assert_eq!((r.error_p, r.error_sw, r.n_p), (0.0, 0.0, 3));

        let b = table(&[10.1, 11.1, 12.1]);
        let r = compare(&a, &b, DEFAULT_MATCH_TOLERANCE).unwrap();
        assert!((r.error_p - 0.1).abs() < 1e-12 && r.error_sw == 0.0);

        let c = table(&[0.0, 0.0]);
        let d = table(&[0.3, 0.4]);
        let r = compare(&c, &d, DEFAULT_MATCH_TOLERANCE).unwrap();
        assert!((r.error_p - (0.25f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn compare_matches_by_position_not_order() {
        let a = table(&[1.0, 2.0, 3.0]);
        let mut b = a.clone();
        b.node.reverse();
        b.x.reverse();
        b.y.reverse();
        b.p.reverse();
        assert_eq!(compare(&a, &b, 1e-6).unwrap().error_p, 0.0);
    }

    #[test]
    fn unmatched_node_is_reported() {
        let a = table(&[1.0, 2.0]);
        let mut b = a.clone();
        b.x[1] += 0.01;
        let err = compare(&a, &b, 1e-6).unwrap_err();
        assert!(matches!(err, Error::UnmatchedNode { x, .. } if x == 1.0));
        assert!(compare(&a, &b, 0.1).is_ok());
    }

    #[test]
    fn cloud_round_trip() {
        let cloud = PointCloud::rectangle([0.1, -0.3], 4, 3, 1.0 / 3.0, 0.7, 2.0).unwrap();
        let cloud = crate::pointcloud::add_virtual_nodes(&cloud, 0.25).unwrap();
        let mut buf = Vec::new();
        write_cloud(&mut buf, &cloud).unwrap();
        let nodes = parse_cloud(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        let mut lbuf = Vec::new();
        write_loops(&mut lbuf, &cloud).unwrap();
        let loops = parse_loops(std::str::from_utf8(&lbuf).unwrap(), "mem").unwrap();
        let back = PointCloud::new(nodes, loops, 2.0).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_cloud("# header\n0 I 0 0\n1 Q 1 0\n", "c.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_relperm("0.2 0 0.8\n0.3 x 0.5\n", "r.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_triangles("0 1\n", "t").is_err());
    }

    #[test]
    fn relperm_file_matches_standard_table() {
        let t = RelPermTable::standard();
        let text: String = (0..t.sw.len())
            .map(|k| format!("{} {} {}\n", t.sw[k], t.krw[k], t.kro[k]))
            .collect();
        assert_eq!(parse_relperm(&text, "r").unwrap(), t);
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, 0.0f64..50.0, 0.0f64..1.0), 1..20)) {
            let coords: Vec<[f64; 2]> = vals.iter().map(|v| [v.0, v.1]).collect();
            let p: Vec<f64> = vals.iter().map(|v| v.2).collect();
            let sw: Vec<f64> = vals.iter().map(|v| v.3).collect();
            let s = SnapshotTable::new(&coords, &p, &sw);
            let mut buf = Vec::new();
            write_snapshot(&mut buf, &s).unwrap();
            let back = parse_snapshot(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn compare_is_nonnegative_and_offset_exact(off in -5.0f64..5.0, n in 1usize..15) {
            let p: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
            let a = table(&p);
            let b = table(&p.iter().map(|x| x + off).collect::<Vec<_>>());
            let r = compare(&a, &b, 1e-6).unwrap();
            prop_assert!((r.error_p - off.abs()).abs() < 1e-9);
            prop_assert_eq!(r.n_p, n);
        }
    }
}
