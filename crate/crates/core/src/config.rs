//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! [cloud]
//! source = rectangle          # rectangle | generate | file
//! origin = 0 0
//! nx = 11
//! ny = 7
//! dx = 10
//! dy = 10
//! thickness = 3
//! virtual_layout = corner-fan # bisector | corner-fan
//! virtual_spacing = average   # average | <metres>
//!
//! [connectivity]
//! method = radius             # radius | triangulation | tpfa
//! radius = 11
//!
//! [rock]
//! permeability = 100
//!
//! [well.INJ]
//! location = 10 30            # or: node = 17
//! kind = injector
//! control = rate 5
//!
//! [boundary]
//! rule = x<=0 dirichlet 15 0.2
//!
//! [schedule]
//! end_time = 200
//! report_times = 100 200
//! change = 150 INJ bhp 25
//! ```
//!
//! `source = generate` takes `polygon = x,y x,y ...` and `spacing`;
//! `source = file` takes `nodes` and `loops` paths. `method = triangulation`
//! takes `triangles`. `method = tpfa` needs a rectangle source and builds the
//! two-point reference scheme on the same lattice. Relative paths resolve
//! against the config file's directory. Boundary rules apply to boundary
//! nodes in order, later rules winning; selectors are `all`, `x<=v`, `x>=v`,
//! `y<=v` and `y>=v`, and conditions are `closed`, `dirichlet p sw`,
//! `neumann flux` and `robin alpha beta gamma`.
//!
//! Defaults: w2 weights, empirical pair weighting, penalty 1e6, the standard
//! relative permeability table, fluid and rock data of the reference case,
//! initial state 15 MPa and Sw 0.2, well radius 0.1 m and zero skin, and
//! solver settings from [`NewtonConfig::default`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::assembler::{BoundaryCondition, BoundaryConditionSet, Discretization, FlowModel, ReservoirState};
use crate::control_volume::{CvConfig, CvWeighting};
use crate::error::{Error, Result};
use crate::flow::{FluidProps, RelPermTable, RockProps, WellControl, WellKind, WellSpec};
use crate::gfdm::WeightKind;
use crate::io;
use crate::pointcloud::{
    add_virtual_nodes_with, build_radius_connectivity, build_triangulation_connectivity, generate_pseudo_cartesian_cloud,
    PointCloud, VirtualLayout, VirtualSpacing,
};
use crate::setup::Meshless;
use crate::solver::{NewtonConfig, SimulationSchedule, WellChange};
use crate::tpfa;

#[derive(Clone, Debug, PartialEq)]
pub enum CloudSource {
    Rectangle {
        origin: [f64; 2],
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
    },
    Generate {
        polygon: Vec<[f64; 2]>,
        spacing: f64,
    },
    File {
        nodes: PathBuf,
        loops: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloudConfig {
    pub source: CloudSource,
    pub thickness: f64,
    pub virtual_layout: VirtualLayout,
    pub virtual_spacing: VirtualSpacing,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Connectivity {
    Radius(f64),
    Triangulation(PathBuf),
    Tpfa,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WellLocation {
    Node(usize),
    Point([f64; 2]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellConfig {
    pub name: String,
    pub location: WellLocation,
    pub kind: WellKind,
    pub control: WellControl,
    pub radius: f64,
    pub skin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selector {
    All,
    XAtMost(f64),
    XAtLeast(f64),
    YAtMost(f64),
    YAtLeast(f64),
}

impl Selector {
    const TOL: f64 = 1e-9;

    pub fn matches(&self, p: [f64; 2]) -> bool {
        match *self {
            Selector::All => true,
            Selector::XAtMost(v) => p[0] <= v + Self::TOL,
            Selector::XAtLeast(v) => p[0] >= v - Self::TOL,
            Selector::YAtMost(v) => p[1] <= v + Self::TOL,
            Selector::YAtLeast(v) => p[1] >= v - Self::TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryRule {
    pub selector: Selector,
    pub condition: BoundaryCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RockConfig {
    pub porosity: f64,
    pub c_rock: f64,
    pub p_ref: f64,
    pub permeability: f64,
}

/// Well control change keyed by well name.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlChange {
    pub time: f64,
    pub well: String,
    pub control: WellControl,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cloud: CloudConfig,
    pub connectivity: Connectivity,
    pub weight: WeightKind,
    pub cv: CvConfig,
    pub fluid: FluidProps,
    pub rock: RockConfig,
    pub relperm: RelPermTable,
    pub initial_pressure: f64,
    pub initial_sw: f64,
    pub wells: Vec<WellConfig>,
    pub boundary: Vec<BoundaryRule>,
    pub newton: NewtonConfig,
    pub end_time: f64,
    pub report_times: Vec<f64>,
    pub changes: Vec<ControlChange>,
    pub output_dir: Option<PathBuf>,
}

/// A discretized case: the cloud, the meshless intermediates when the
/// meshless scheme is used, and the discretization itself.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub cloud: PointCloud,
    pub meshless: Option<Meshless>,
    pub disc: Discretization,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Vec<Entry>>,
}

struct Reader<'a> {
    label: &'a str,
    base: PathBuf,
    sections: Vec<Section>,
}

fn tokenize(text: &str, label: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(label, line, "unterminated section header"))?
                .trim();
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::parse(label, line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(label, line, format!("expected 'key = value', found '{content}'")))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::parse(label, line, "key outside of any section"))?;
        section.entries.entry(key.trim().to_string()).or_default().push(Entry {
            line,
            value: value.trim().to_string(),
            used: false,
        });
    }
    Ok(sections)
}

impl<'a> Reader<'a> {
    fn section(&mut self, name: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.name == name)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.label, line, msg)
    }

    /// Raw value and line of a single-valued key.
    fn raw(&mut self, sec: Option<usize>, key: &str) -> Result<Option<(String, usize)>> {
        let Some(s) = sec else { return Ok(None) };
        let label = self.label;
        let Some(list) = self.sections[s].entries.get_mut(key) else {
            return Ok(None);
        };
        if list.len() > 1 {
            return Err(Error::parse(label, list[1].line, format!("key '{key}' given more than once")));
        }
        list[0].used = true;
        Ok(Some((list[0].value.clone(), list[0].line)))
    }

    fn all(&mut self, sec: Option<usize>, key: &str) -> Vec<(String, usize)> {
        let Some(s) = sec else { return Vec::new() };
        self.sections[s]
            .entries
            .get_mut(key)
            .map(|list| {
                list.iter_mut()
                    .map(|e| {
                        e.used = true;
                        (e.value.clone(), e.line)
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    fn required(&mut self, sec: Option<usize>, section: &str, key: &str) -> Result<(String, usize)> {
        self.raw(sec, key)?.ok_or_else(|| {
            let line = sec.map_or(0, |s| self.sections[s].line);
            self.err(line, format!("missing required key '{key}' in [{section}]"))
        })
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, value: &str, line: usize) -> Result<T> {
        value
            .parse()
            .map_err(|_| self.err(line, format!("invalid value '{value}' for key '{key}'")))
    }

    fn opt<T: std::str::FromStr>(&mut self, sec: Option<usize>, key: &str) -> Result<Option<T>> {
        match self.raw(sec, key)? {
            Some((v, line)) => Ok(Some(self.parse_value(key, &v, line)?)),
            None => Ok(None),
        }
    }

    fn get<T: std::str::FromStr>(&mut self, sec: Option<usize>, section: &str, key: &str) -> Result<T> {
        let (v, line) = self.required(sec, section, key)?;
        self.parse_value(key, &v, line)
    }

    fn floats(&self, key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
        value.split_whitespace().map(|t| self.parse_value(key, t, line)).collect()
    }

    fn positive(&self, key: &str, v: f64, line: usize) -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(line, format!("key '{key}' must be positive, got {v}")))
        }
    }

    fn path(&self, value: &str, line: usize, key: &str) -> Result<PathBuf> {
        let p = self.base.join(value);
        if !p.exists() {
            return Err(self.err(line, format!("file '{}' for key '{key}' does not exist", p.display())));
        }
        Ok(p)
    }

    fn finish(&self) -> Result<()> {
        for s in &self.sections {
            for (key, list) in &s.entries {
                if let Some(e) = list.iter().find(|e| !e.used) {
                    return Err(self.err(e.line, format!("unknown key '{key}' in [{}]", s.name)));
                }
            }
        }
        Ok(())
    }
}

fn parse_control(r: &Reader, key: &str, value: &str, line: usize) -> Result<WellControl> {
    let tok: Vec<&str> = value.split_whitespace().collect();
    if tok.len() != 2 {
        return Err(r.err(line, format!("key '{key}' expects 'rate <q>' or 'bhp <p>'")));
    }
    let v: f64 = r.parse_value(key, tok[1], line)?;
    match tok[0] {
        "rate" => Ok(WellControl::Rate(r.positive(key, v, line)?)),
        "bhp" => Ok(WellControl::Bhp(r.positive(key, v, line)?)),
        other => Err(r.err(line, format!("invalid well control '{other}' for key '{key}'"))),
    }
}

fn parse_rule(r: &Reader, value: &str, line: usize) -> Result<BoundaryRule> {
    let tok: Vec<&str> = value.split_whitespace().collect();
    if tok.len() < 2 {
        return Err(r.err(line, "key 'rule' expects '<selector> <condition> [values]'"));
    }
    let selector = if tok[0] == "all" {
        Selector::All
    } else {
        let ops: [(&str, fn(f64) -> Selector); 4] = [
            ("x<=", Selector::XAtMost),
            ("x>=", Selector::XAtLeast),
            ("y<=", Selector::YAtMost),
            ("y>=", Selector::YAtLeast),
        ];
        let (op, ctor) = ops
            .iter()
            .find(|(op, _)| tok[0].starts_with(op))
            .ok_or_else(|| r.err(line, format!("invalid selector '{}' for key 'rule'", tok[0])))?;
        ctor(r.parse_value("rule", &tok[0][op.len()..], line)?)
    };
    let vals: Vec<f64> = tok[2..]
        .iter()
        .map(|t| r.parse_value("rule", t, line))
        .collect::<Result<_>>()?;
    let arity = |n: usize| -> Result<()> {
        if vals.len() == n {
            Ok(())
        } else {
            Err(r.err(line, format!("condition '{}' takes {n} values, got {}", tok[1], vals.len())))
        }
    };
    let condition = match tok[1] {
        "closed" => {
            arity(0)?;
            BoundaryCondition::Closed
        }
        "dirichlet" => {
            arity(2)?;
            if !(0.0..=1.0).contains(&vals[1]) {
                return Err(r.err(line, "dirichlet saturation must lie in [0, 1]"));
            }
            BoundaryCondition::Dirichlet {
                pressure: r.positive("rule", vals[0], line)?,
                sw: vals[1],
            }
        }
        "neumann" => {
            arity(1)?;
            BoundaryCondition::Neumann { flux: vals[0] }
        }
        "robin" => {
            arity(3)?;
            BoundaryCondition::Robin {
                alpha: vals[0],
                beta: vals[1],
                gamma: vals[2],
            }
        }
        other => return Err(r.err(line, format!("invalid boundary condition '{other}'"))),
    };
    Ok(BoundaryRule { selector, condition })
}

const KNOWN_SECTIONS: &[&str] = &[
    "cloud",
    "connectivity",
    "gfdm",
    "control_volume",
    "fluid",
    "rock",
    "relperm",
    "initial",
    "boundary",
    "solver",
    "schedule",
    "output",
];

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    /// Parses `text`; `base` resolves relative file references.
    pub fn parse(text: &str, label: &str, base: &Path) -> Result<Self> {
        let sections = tokenize(text, label)?;
        let mut r = Reader {
            label,
            base: base.to_path_buf(),
            sections,
        };
        for s in &r.sections {
            if !KNOWN_SECTIONS.contains(&s.name.as_str()) && !s.name.starts_with("well.") {
                return Err(r.err(s.line, format!("unknown section [{}]", s.name)));
            }
        }

        let sec = r.section("cloud");
        let (src, src_line) = r.required(sec, "cloud", "source")?;
        let source = match src.as_str() {
            "rectangle" => {
                let origin = match r.raw(sec, "origin")? {
                    Some((v, line)) => {
                        let o = r.floats("origin", &v, line)?;
                        if o.len() != 2 {
                            return Err(r.err(line, "key 'origin' expects two numbers"));
                        }
                        [o[0], o[1]]
                    }
                    None => [0.0, 0.0],
                };
                let (dx, dx_line) = r.required(sec, "cloud", "dx")?;
                let dx = r.positive("dx", r.parse_value("dx", &dx, dx_line)?, dx_line)?;
                let dy = match r.raw(sec, "dy")? {
                    Some((v, line)) => r.positive("dy", r.parse_value("dy", &v, line)?, line)?,
                    None => dx,
                };
                CloudSource::Rectangle {
                    origin,
                    nx: r.get(sec, "cloud", "nx")?,
                    ny: r.get(sec, "cloud", "ny")?,
                    dx,
                    dy,
                }
            }
            "generate" => {
                let (v, line) = r.required(sec, "cloud", "polygon")?;
                let polygon = v
                    .split_whitespace()
                    .map(|pt| {
                        let (x, y) = pt
                            .split_once(',')
                            .ok_or_else(|| r.err(line, format!("polygon vertex '{pt}' is not 'x,y'")))?;
                        Ok([r.parse_value("polygon", x, line)?, r.parse_value("polygon", y, line)?])
                    })
                    .collect::<Result<Vec<_>>>()?;
                if polygon.len() < 3 {
                    return Err(r.err(line, "key 'polygon' needs at least three vertices"));
                }
                let (s, sl) = r.required(sec, "cloud", "spacing")?;
                CloudSource::Generate {
                    polygon,
                    spacing: r.positive("spacing", r.parse_value("spacing", &s, sl)?, sl)?,
                }
            }
            "file" => {
                let (n, nl) = r.required(sec, "cloud", "nodes")?;
                let (l, ll) = r.required(sec, "cloud", "loops")?;
                CloudSource::File {
                    nodes: r.path(&n, nl, "nodes")?,
                    loops: r.path(&l, ll, "loops")?,
                }
            }
            other => return Err(r.err(src_line, format!("invalid value '{other}' for key 'source'"))),
        };
        let thickness = match r.raw(sec, "thickness")? {
            Some((v, line)) => r.positive("thickness", r.parse_value("thickness", &v, line)?, line)?,
            None => 3.0,
        };
        let virtual_layout = match r.raw(sec, "virtual_layout")? {
            Some((v, line)) => match v.as_str() {
                "bisector" => VirtualLayout::Bisector,
                "corner-fan" => VirtualLayout::CornerFan,
                _ => return Err(r.err(line, format!("invalid value '{v}' for key 'virtual_layout'"))),
            },
            None => VirtualLayout::default(),
        };
        let virtual_spacing = match r.raw(sec, "virtual_spacing")? {
            Some((v, _)) if v == "average" => VirtualSpacing::LocalAverage,
            Some((v, line)) => {
                VirtualSpacing::Fixed(r.positive("virtual_spacing", r.parse_value("virtual_spacing", &v, line)?, line)?)
            }
            None => VirtualSpacing::LocalAverage,
        };
        let cloud = CloudConfig {
            source,
            thickness,
            virtual_layout,
            virtual_spacing,
        };

        let sec = r.section("connectivity");
        let (method, ml) = r.required(sec, "connectivity", "method")?;
        let connectivity = match method.as_str() {
            "radius" => {
                let (v, line) = r.required(sec, "connectivity", "radius")?;
                Connectivity::Radius(r.positive("radius", r.parse_value("radius", &v, line)?, line)?)
            }
            "triangulation" => {
                let (v, line) = r.required(sec, "connectivity", "triangles")?;
                Connectivity::Triangulation(r.path(&v, line, "triangles")?)
            }
            "tpfa" => {
                if !matches!(cloud.source, CloudSource::Rectangle { .. }) {
                    return Err(r.err(ml, "method 'tpfa' requires 'source = rectangle'"));
                }
                Connectivity::Tpfa
            }
            other => return Err(r.err(ml, format!("invalid value '{other}' for key 'method'"))),
        };

        let sec = r.section("gfdm");
        let weight = r.opt(sec, "weight")?.unwrap_or_default();

        let sec = r.section("control_volume");
        let mut cv = CvConfig::default();
        if let Some(w) = r.opt::<CvWeighting>(sec, "weighting")? {
            cv.weighting = w;
        }
        if let Some((v, line)) = r.raw(sec, "penalty")? {
            cv.penalty = r.positive("penalty", r.parse_value("penalty", &v, line)?, line)?;
        }
        if let Some((v, line)) = r.raw(sec, "tolerance")? {
            cv.tolerance = r.positive("tolerance", r.parse_value("tolerance", &v, line)?, line)?;
        }

        let sec = r.section("fluid");
        let mut fluid = FluidProps::default();
        for (key, slot) in [
            ("mu_oil", &mut fluid.mu_oil),
            ("mu_water", &mut fluid.mu_water),
            ("c_oil", &mut fluid.c_oil),
            ("c_water", &mut fluid.c_water),
            ("b_oil", &mut fluid.b_oil_ref),
            ("b_water", &mut fluid.b_water_ref),
            ("p_ref", &mut fluid.p_ref),
        ] {
            if let Some(v) = r.opt(sec, key)? {
                *slot = v;
            }
        }
        fluid
            .validate()
            .map_err(|e| r.err(sec.map_or(0, |s| r.sections[s].line), e.to_string()))?;

        let sec = r.section("rock");
        let (k, kl) = r.required(sec, "rock", "permeability")?;
        let permeability: f64 = r.parse_value("permeability", &k, kl)?;
        if !(permeability >= 0.0) {
            return Err(r.err(kl, "key 'permeability' must be non-negative"));
        }
        let rock = RockConfig {
            porosity: r.opt(sec, "porosity")?.unwrap_or(0.2),
            c_rock: r.opt(sec, "c_rock")?.unwrap_or(1e-4),
            p_ref: r.opt(sec, "p_ref")?.unwrap_or(fluid.p_ref),
            permeability,
        };
        if !(rock.porosity > 0.0 && rock.porosity < 1.0) {
            return Err(r.err(sec.map_or(0, |s| r.sections[s].line), "porosity must lie in (0, 1)"));
        }

        let sec = r.section("relperm");
        let relperm = match r.raw(sec, "file")? {
            Some((v, line)) => io::read_relperm(&r.path(&v, line, "file")?)?,
            None => RelPermTable::standard(),
        };

        let sec = r.section("initial");
        let initial_pressure = match r.raw(sec, "pressure")? {
            Some((v, line)) => r.positive("pressure", r.parse_value("pressure", &v, line)?, line)?,
            None => 15.0,
        };
        let initial_sw = match r.raw(sec, "sw")? {
            Some((v, line)) => {
                let s: f64 = r.parse_value("sw", &v, line)?;
                if !(0.0..=1.0).contains(&s) {
                    return Err(r.err(line, "key 'sw' must lie in [0, 1]"));
                }
                s
            }
            None => 0.2,
        };

        let well_sections: Vec<(String, usize)> = r
            .sections
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.name.strip_prefix("well.").map(|n| (n.to_string(), i)))
            .collect();
        let mut wells = Vec::new();
        for (name, idx) in well_sections {
            let sec = Some(idx);
            let header = r.sections[idx].line;
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(r.err(header, format!("invalid well name '{name}'")));
            }
            let location = match (r.raw(sec, "node")?, r.raw(sec, "location")?) {
                (Some((v, line)), None) => WellLocation::Node(r.parse_value("node", &v, line)?),
                (None, Some((v, line))) => {
                    let xy = r.floats("location", &v, line)?;
                    if xy.len() != 2 {
                        return Err(r.err(line, "key 'location' expects two numbers"));
                    }
                    WellLocation::Point([xy[0], xy[1]])
                }
                (Some(_), Some((_, line))) => return Err(r.err(line, "give either 'node' or 'location', not both")),
                (None, None) => return Err(r.err(header, format!("missing required key 'location' in [well.{name}]"))),
            };
            let (k, kl) = r.required(sec, &format!("well.{name}"), "kind")?;
            let kind = match k.as_str() {
                "producer" => WellKind::Producer,
                "injector" => WellKind::WaterInjector,
                _ => return Err(r.err(kl, format!("invalid value '{k}' for key 'kind'"))),
            };
            let (c, cl) = r.required(sec, &format!("well.{name}"), "control")?;
            let control = parse_control(&r, "control", &c, cl)?;
            let radius = match r.raw(sec, "radius")? {
                Some((v, line)) => r.positive("radius", r.parse_value("radius", &v, line)?, line)?,
                None => 0.1,
            };
            wells.push(WellConfig {
                name,
                location,
                kind,
                control,
                radius,
                skin: r.opt(sec, "skin")?.unwrap_or(0.0),
            });
        }

        let sec = r.section("boundary");
        let boundary = r
            .all(sec, "rule")
            .iter()
            .map(|(v, line)| parse_rule(&r, v, *line))
            .collect::<Result<Vec<_>>>()?;

        let sec = r.section("solver");
        let mut newton = NewtonConfig::default();
        for (key, slot) in [
            ("dt_max", &mut newton.dt_max),
            ("dt_min", &mut newton.dt_min),
            ("dt_init", &mut newton.dt_init),
            ("tolerance", &mut newton.tolerance),
            ("eta_p", &mut newton.eta_p),
            ("eta_sw", &mut newton.eta_sw),
        ] {
            if let Some((v, line)) = r.raw(sec, key)? {
                *slot = r.positive(key, r.parse_value(key, &v, line)?, line)?;
            }
        }
        if let Some(v) = r.opt(sec, "max_iterations")? {
            newton.max_iterations = v;
        }
        newton
            .validate()
            .map_err(|e| r.err(sec.map_or(0, |s| r.sections[s].line), e.to_string()))?;

        let sec = r.section("schedule");
        let (v, el) = r.required(sec, "schedule", "end_time")?;
        let end_time = r.positive("end_time", r.parse_value("end_time", &v, el)?, el)?;
        let report_times = match r.raw(sec, "report_times")? {
            Some((v, line)) => {
                let t = r.floats("report_times", &v, line)?;
                if t.windows(2).any(|w| w[1] <= w[0]) || t.iter().any(|&x| x < 0.0 || x > end_time) {
                    return Err(r.err(line, "report times must increase and lie within [0, end_time]"));
                }
                t
            }
            None => vec![end_time],
        };
        let mut changes = Vec::new();
        for (v, line) in r.all(sec, "change") {
            let tok: Vec<&str> = v.split_whitespace().collect();
            if tok.len() != 4 {
                return Err(r.err(line, "key 'change' expects '<time> <well> rate|bhp <value>'"));
            }
            let time: f64 = r.parse_value("change", tok[0], line)?;
            if !wells.iter().any(|w| w.name == tok[1]) {
                return Err(r.err(line, format!("change refers to unknown well '{}'", tok[1])));
            }
            changes.push(ControlChange {
                time,
                well: tok[1].to_string(),
                control: parse_control(&r, "change", &tok[2..].join(" "), line)?,
            });
        }

        let sec = r.section("output");
        let output_dir = r.raw(sec, "dir")?.map(|(v, _)| r.base.join(v));

        r.finish()?;
        Ok(RunConfig {
            cloud,
            connectivity,
            weight,
            cv,
            fluid,
            rock,
            relperm,
            initial_pressure,
            initial_sw,
            wells,
            boundary,
            newton,
            end_time,
            report_times,
            changes,
            output_dir,
        })
    }

    /// The real cloud, before virtual nodes are added.
    pub fn base_cloud(&self) -> Result<PointCloud> {
        let h = self.cloud.thickness;
        match &self.cloud.source {
            CloudSource::Rectangle { origin, nx, ny, dx, dy } => PointCloud::rectangle(*origin, *nx, *ny, *dx, *dy, h),
            CloudSource::Generate { polygon, spacing } => {
                Ok(generate_pseudo_cartesian_cloud(polygon, *spacing)?.with_thickness(h))
            }
            CloudSource::File { nodes, loops } => io::read_cloud_file(nodes, loops, h),
        }
    }

    /// The cloud used by the meshless scheme: virtual nodes are added unless
    /// the input already has some.
    pub fn augmented_cloud(&self) -> Result<PointCloud> {
        let base = self.base_cloud()?;
        if !base.virtual_nodes().is_empty() {
            return Ok(base);
        }
        add_virtual_nodes_with(&base, self.cloud.virtual_spacing, self.cloud.virtual_layout)
    }

    pub fn rock_props(&self, n: usize) -> RockProps {
        RockProps::uniform(
            n,
            self.rock.porosity,
            self.rock.c_rock,
            self.rock.p_ref,
            self.rock.permeability,
            self.cloud.thickness,
        )
    }

    pub fn prepare(&self) -> Result<Prepared> {
        if let Connectivity::Tpfa = self.connectivity {
            let CloudSource::Rectangle { origin, nx, ny, dx, dy } = self.cloud.source else {
                return Err(Error::InvalidInput("two-point scheme needs a rectangle cloud".into()));
            };
            let cloud = self.base_cloud()?;
            let perm = vec![self.rock.permeability; nx * ny];
            let disc = tpfa::cartesian(origin, nx, ny, dx, dy, self.cloud.thickness, &perm)?;
            return Ok(Prepared {
                cloud,
                meshless: None,
                disc,
            });
        }
        let cloud = self.augmented_cloud()?;
        let graph = match &self.connectivity {
            Connectivity::Radius(r) => build_radius_connectivity(&cloud, *r)?,
            Connectivity::Triangulation(path) => build_triangulation_connectivity(&cloud, &io::read_triangles(path)?)?,
            Connectivity::Tpfa => unreachable!(),
        };
        let mesh = Meshless::build(cloud, graph, self.weight, &self.cv)?;
        let disc = mesh.discretization(&self.rock_props(mesh.cloud.n_real()))?;
        Ok(Prepared {
            cloud: mesh.cloud.clone(),
            meshless: Some(mesh),
            disc,
        })
    }

    fn well_node(&self, prep: &Prepared, w: &WellConfig) -> Result<usize> {
        match w.location {
            WellLocation::Node(i) if i < prep.disc.n_nodes() => Ok(i),
            WellLocation::Node(i) => Err(Error::InvalidInput(format!("well '{}' refers to missing node {i}", w.name))),
            WellLocation::Point([x, y]) => Ok(prep.disc.nearest_node(x, y)),
        }
    }

    pub fn boundary_conditions(&self, prep: &Prepared) -> BoundaryConditionSet {
        let n = prep.disc.n_nodes();
        let mut set = BoundaryConditionSet::closed(n);
        for node in prep.cloud.real_nodes() {
            if node.kind != crate::pointcloud::NodeKind::Boundary {
                continue;
            }
            for rule in &self.boundary {
                if rule.selector.matches(node.pos()) {
                    set.set(node.id, rule.condition);
                }
            }
        }
        set
    }

    pub fn model(&self, prep: &Prepared) -> Result<FlowModel> {
        let wells = self
            .wells
            .iter()
            .map(|w| {
                Ok(WellSpec {
                    name: w.name.clone(),
                    node: self.well_node(prep, w)?,
                    kind: w.kind,
                    control: w.control,
                    radius: w.radius,
                    skin: w.skin,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FlowModel::new(
            prep.disc.clone(),
            self.fluid,
            self.rock_props(prep.disc.n_nodes()),
            self.relperm.clone(),
            wells,
            self.boundary_conditions(prep),
        )
    }

    /// Uniform initial state with Dirichlet nodes set to their values.
    pub fn initial_state(&self, model: &FlowModel) -> ReservoirState {
        let mut st = model.initial_state(self.initial_pressure, self.initial_sw);
        for (i, bc) in model.bcs.conditions.iter().enumerate() {
            if let BoundaryCondition::Dirichlet { pressure, sw } = *bc {
                st.p[i] = pressure;
                st.sw[i] = sw;
            }
        }
        st
    }

    pub fn schedule(&self) -> SimulationSchedule {
        SimulationSchedule {
            end_time: self.end_time,
            report_times: self.report_times.clone(),
            well_changes: self
                .changes
                .iter()
                .map(|c| WellChange {
                    time: c.time,
                    well: self.wells.iter().position(|w| w.name == c.well).expect("validated"),
                    control: c.control,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[cloud]
source = rectangle
nx = 4
ny = 3
dx = 10

[connectivity]
method = radius
radius = 15

[rock]
permeability = 100

[schedule]
end_time = 10
";

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, "test.cfg", Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.newton, NewtonConfig::default());
        assert_eq!(c.newton.max_iterations, 50);
        assert_eq!(c.weight, WeightKind::InverseCube);
        assert_eq!(c.cv.weighting, CvWeighting::Empirical);
        assert_eq!(c.cv.penalty, 1e6);
        assert_eq!(c.report_times, vec![10.0]);
        assert_eq!(c.relperm, RelPermTable::standard());
        assert_eq!(c.fluid, FluidProps::default());
    }

    #[test]
    fn invalid_weight_is_rejected_with_line() {
        let text = format!("{MINIMAL}\n[gfdm]\nweight = w3\n");
        let err = parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 19, .. }), "{msg}");
        assert!(msg.contains("weight"), "{msg}");
    }

    #[test]
    fn unknown_and_missing_keys() {
        let err = parse(&format!("{MINIMAL}\n[solver]\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = parse(&MINIMAL.replace("permeability = 100", "")).unwrap_err();
        assert!(err.to_string().contains("permeability"), "{err}");
        let err = parse(&format!("{MINIMAL}\n[wells]\n")).unwrap_err();
        assert!(err.to_string().contains("wells"));
    }

    #[test]
    fn two_wells_at_sixty() {
        let text = format!(
            "{MINIMAL}
[well.INJ]
location = 0 0
kind = injector
control = rate 60

[well.PROD]
node = 11
kind = producer
control = rate 60
skin = 0.5

[schedule.extra]
"
        );
        assert!(parse(&text).is_err());
        let text = text.replace("[schedule.extra]\n", "");
        let c = parse(&text).unwrap();
        assert_eq!(c.wells.len(), 2);
        assert!(c.wells.iter().all(|w| w.control == WellControl::Rate(60.0)));
        assert_eq!(c.wells[1].location, WellLocation::Node(11));
        assert_eq!(c.wells[1].skin, 0.5);
        let prep = c.prepare().unwrap();
        let m = c.model(&prep).unwrap();
        assert_eq!(m.wells[0].node, 0);
        assert_eq!(m.wells[0].kind, WellKind::WaterInjector);
    }

    #[test]
    fn boundary_rules_and_changes() {
        let text = format!(
            "{MINIMAL}
[boundary]
rule = all neumann 0
rule = x<=0 dirichlet 20 1
rule = x>=30 robin 1 2 3

[well.P]
node = 5
kind = producer
control = bhp 10
"
        );
        assert!(parse(&format!("{text}\n[schedule]\n")).is_err(), "duplicate section must fail");
        let text = text.replace("end_time = 10", "end_time = 10\nchange = 5 P rate 3");
        let c = parse(&text).unwrap();
        let prep = c.prepare().unwrap();
        let bcs = c.boundary_conditions(&prep);
        assert_eq!(bcs.get(0), BoundaryCondition::Dirichlet { pressure: 20.0, sw: 1.0 });
        assert_eq!(bcs.get(1), BoundaryCondition::Neumann { flux: 0.0 });
        assert_eq!(bcs.get(3), BoundaryCondition::Robin { alpha: 1.0, beta: 2.0, gamma: 3.0 });
        assert_eq!(bcs.get(5), BoundaryCondition::Closed);
        let m = c.model(&prep).unwrap();
        let st = c.initial_state(&m);
        assert_eq!((st.p[4], st.sw[4]), (20.0, 1.0));
        assert_eq!(c.schedule().well_changes[0].control, WellControl::Rate(3.0));
        assert!(parse(&text.replace("change = 5 P", "change = 5 Q")).is_err());
        assert!(parse(&text.replace("robin 1 2 3", "robin 1 2")).is_err());
    }

    #[test]
    fn tpfa_requires_rectangle() {
        let c = parse(&MINIMAL.replace("method = radius\nradius = 15", "method = tpfa")).unwrap();
        let prep = c.prepare().unwrap();
        assert!(prep.meshless.is_none());
        assert_eq!(prep.disc.n_nodes(), 12);
        let text = "[cloud]\nsource = generate\npolygon = 0,0 10,0 10,10 0,10\nspacing = 2\n[connectivity]\nmethod = tpfa\n[rock]\npermeability = 1\n[schedule]\nend_time = 1\n";
        assert!(parse(text).is_err());
    }
}
