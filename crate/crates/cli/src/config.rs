//! Scenario files.
//!
//! INI-style sections with `key = value` lines; `#` starts a comment.
//!
//! ```text
//! [mesh]      generator = segment | rectangle | box | file
//!             lengths, divisions, origin, path
//! [material]  model = linear | nonlinear, density, specific_heat, coupling,
//!             conductivity, reference_temperature, reference_entropy,
//!             stiffness (linear 1D) or lambda + mu,
//!             allow_nonpositive_temperature
//! [initial]   motion, velocity, thermal, temperature, harmonic = omega, amplitude
//! [bc]        mech_dirichlet, motion, thermal_dirichlet, thermal,
//!             traction_facets, traction, entropy_flux_facets, entropy_influx,
//!             body_force, entropy_source, load_end
//! [time]      dt or safety, end
//! [output]    every, snapshot_every, integrator
//! ```
//!
//! Facet selectors are planes such as `x=0`, joined with `|`, or `all`.
//! Dirichlet fields may be the keyword `harmonic`, which uses the travelling
//! wave configured in `[initial]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thermovi_core::diagnostics::HarmonicReference;
use thermovi_core::integrator::stable_dt;
use thermovi_core::mesh::{
    generate_box_tet_mesh, generate_rectangle_tri_mesh, generate_segment_mesh,
};
use thermovi_core::{
    BoundaryConditions, BoundaryLabels, LinearThermoElastic, Material, Mesh,
    NonlinearThermoElastic, Point, Prescribed, Problem, Scheme, State, ThermalParameters,
};

use crate::expr::{Expr, VectorExpr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based line; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn finish(self, name: &str) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            Some((key, e)) => err(e.line, format!("unknown key `{key}` in [{name}]")),
            None => Ok(()),
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        self.take(key)
            .map(|e| match e.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((v, e.line)),
                _ => err(
                    e.line,
                    format!("`{key}` must be a number, got `{}`", e.value),
                ),
            })
            .transpose()
    }

    fn required_number(&mut self, key: &str, section: &str) -> Result<f64, ConfigError> {
        match self.number(key)? {
            Some((v, _)) => Ok(v),
            None => err(self.line, format!("[{section}] requires `{key}`")),
        }
    }

    fn list<T: std::str::FromStr>(
        &mut self,
        key: &str,
    ) -> Result<Option<(Vec<T>, usize)>, ConfigError> {
        self.take(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|s| s.trim().parse::<T>())
                    .collect::<Result<Vec<T>, _>>()
                    .map(|v| (v, e.line))
                    .or_else(|_| {
                        err(
                            e.line,
                            format!("`{key}` must be a comma-separated list, got `{}`", e.value),
                        )
                    })
            })
            .transpose()
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.take(key)
            .map(|e| match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => err(e.line, format!("`{key}` must be true or false")),
            })
            .transpose()
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or(ConfigError {
                    line,
                    message: "unterminated section header".into(),
                })?
                .trim()
                .to_ascii_lowercase();
            if !["mesh", "material", "initial", "bc", "time", "output"].contains(&name.as_str()) {
                return err(line, format!("unknown section [{name}]"));
            }
            if sections.contains_key(&name) {
                return err(line, format!("duplicate section [{name}]"));
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some(name) = &current else {
            return err(line, "key outside of any section");
        };
        let Some((key, value)) = content.split_once('=') else {
            return err(line, format!("expected `key = value`, got `{content}`"));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if value.is_empty() {
            return err(line, format!("empty value for `{key}`"));
        }
        let section = sections.get_mut(name).expect("current section exists");
        if section
            .entries
            .insert(key.clone(), Entry { value, line })
            .is_some()
        {
            return err(line, format!("duplicate key `{key}`"));
        }
    }
    Ok(sections)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshGenerator {
    Segment {
        length: f64,
        divisions: usize,
    },
    Rectangle {
        lengths: [f64; 2],
        divisions: [usize; 2],
    },
    Box {
        lengths: [f64; 3],
        divisions: [usize; 3],
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub generator: MeshGenerator,
    pub origin: Point,
    line: usize,
}

impl MeshSpec {
    pub fn dim(&self) -> Option<usize> {
        match self.generator {
            MeshGenerator::Segment { .. } => Some(1),
            MeshGenerator::Rectangle { .. } => Some(2),
            MeshGenerator::Box { .. } => Some(3),
            MeshGenerator::File(_) => None,
        }
    }

    pub fn build(&self) -> Result<Mesh, ConfigError> {
        let mesh = match &self.generator {
            MeshGenerator::Segment { length, divisions } => {
                generate_segment_mesh(*length, *divisions)
            }
            MeshGenerator::Rectangle { lengths, divisions } => {
                generate_rectangle_tri_mesh(*lengths, *divisions)
            }
            MeshGenerator::Box { lengths, divisions } => {
                generate_box_tet_mesh(*lengths, *divisions)
            }
            MeshGenerator::File(path) => {
                let text = std::fs::read_to_string(path)
                    .or_else(|e| err(self.line, format!("{}: {e}", path.display())))?;
                Mesh::from_text(&text)
            }
        };
        let mut mesh = mesh.or_else(|e| err(self.line, e.to_string()))?;
        if self.origin != Point::zeros() {
            mesh.translate(&self.origin);
        }
        Ok(mesh)
    }

    /// Same generator with every division count multiplied by `factor`.
    fn refined(&self, factor: usize) -> Result<Self, ConfigError> {
        let generator = match &self.generator {
            MeshGenerator::Segment { length, divisions } => MeshGenerator::Segment {
                length: *length,
                divisions: divisions * factor,
            },
            MeshGenerator::Rectangle { lengths, divisions } => MeshGenerator::Rectangle {
                lengths: *lengths,
                divisions: divisions.map(|d| d * factor),
            },
            MeshGenerator::Box { lengths, divisions } => MeshGenerator::Box {
                lengths: *lengths,
                divisions: divisions.map(|d| d * factor),
            },
            MeshGenerator::File(_) => return err(self.line, "file meshes cannot be refined"),
        };
        Ok(Self {
            generator,
            ..self.clone()
        })
    }
}

/// Facet selector: a union of coordinate planes, or every boundary facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    planes: Vec<(usize, f64)>,
    all: bool,
    line: usize,
}

impl Selector {
    fn parse(text: &str, line: usize) -> Result<Self, ConfigError> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(Self {
                planes: vec![],
                all: true,
                line,
            });
        }
        let mut planes = Vec::new();
        for part in text.split('|') {
            let Some((axis, value)) = part.split_once('=') else {
                return err(
                    line,
                    format!("selector `{}` is not of the form `x=value`", part.trim()),
                );
            };
            let axis = match axis.trim() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                other => return err(line, format!("unknown axis `{other}` in selector")),
            };
            let value: f64 = value
                .trim()
                .parse()
                .or_else(|_| err(line, format!("invalid plane position `{}`", value.trim())))?;
            planes.push((axis, value));
        }
        Ok(Self {
            planes,
            all: false,
            line,
        })
    }

    fn apply(&self, mesh: &mut Mesh, labels: BoundaryLabels) -> Result<(), ConfigError> {
        let extent = mesh
            .coords()
            .iter()
            .flat_map(|x| x.iter().map(|c| c.abs()))
            .fold(1.0, f64::max);
        let tol = 1e-9 * extent;
        let count = if self.all {
            mesh.label_facets(labels, |_| true)
        } else {
            self.planes
                .iter()
                .map(|&(axis, value)| mesh.label_facets(labels, |x| (x[axis] - value).abs() <= tol))
                .sum()
        };
        if count == 0 {
            return err(self.line, "selector matches no boundary facet");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field<T> {
    Expr(T),
    Harmonic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub motion: Option<VectorExpr>,
    pub velocity: Option<VectorExpr>,
    pub thermal: Option<Expr>,
    pub temperature: Option<Expr>,
    /// Angular frequency and displacement amplitude of a travelling wave.
    pub harmonic: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcSpec {
    pub motion: Option<(Selector, Field<VectorExpr>)>,
    pub thermal: Option<(Selector, Field<Expr>)>,
    pub traction: Option<(Selector, VectorExpr)>,
    pub entropy_influx: Option<(Selector, Expr)>,
    pub body_force: Point,
    pub entropy_source: f64,
    pub load_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// Fraction of the Courant limit.
    Safety(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mesh: MeshSpec,
    pub material: Material,
    pub initial: InitialSpec,
    pub bc: BcSpec,
    pub time_step: TimeStep,
    pub end_time: f64,
    pub every: usize,
    pub snapshot_every: usize,
    pub scheme: Scheme,
    time_line: usize,
    output_line: usize,
}

pub const DEFAULT_SAFETY: f64 = 0.2;

/// Ready-to-run simulation built from a [`Scenario`].
pub struct Simulation {
    pub problem: Problem<Material>,
    pub initial: State,
    pub reference: Option<HarmonicReference>,
    pub dt: f64,
    pub steps: usize,
    pub every: usize,
    pub snapshot_every: usize,
    pub scheme: Scheme,
}

fn parse_mesh(mut s: Section, base: &Path) -> Result<MeshSpec, ConfigError> {
    let Some(generator) = s.take("generator") else {
        return err(s.line, "[mesh] requires `generator`");
    };
    let gen_line = generator.line;
    let lengths: Option<(Vec<f64>, usize)> = s.list("lengths")?;
    let divisions: Option<(Vec<usize>, usize)> = s.list("divisions")?;
    let path = s.take("path");
    let origin = s.list::<f64>("origin")?;

    let need = |n: usize| -> Result<(Vec<f64>, Vec<usize>), ConfigError> {
        let (l, l_line) = lengths.clone().ok_or(ConfigError {
            line: gen_line,
            message: "generator requires `lengths`".into(),
        })?;
        let (d, d_line) = divisions.clone().ok_or(ConfigError {
            line: gen_line,
            message: "generator requires `divisions`".into(),
        })?;
        if l.len() != n {
            return err(l_line, format!("`lengths` needs {n} values"));
        }
        if d.len() != n {
            return err(d_line, format!("`divisions` needs {n} values"));
        }
        Ok((l, d))
    };
    let generator = match generator.value.to_ascii_lowercase().as_str() {
        "segment" => {
            let (l, d) = need(1)?;
            MeshGenerator::Segment {
                length: l[0],
                divisions: d[0],
            }
        }
        "rectangle" => {
            let (l, d) = need(2)?;
            MeshGenerator::Rectangle {
                lengths: [l[0], l[1]],
                divisions: [d[0], d[1]],
            }
        }
        "box" => {
            let (l, d) = need(3)?;
            MeshGenerator::Box {
                lengths: [l[0], l[1], l[2]],
                divisions: [d[0], d[1], d[2]],
            }
        }
        "file" => {
            let p = path.clone().ok_or(ConfigError {
                line: gen_line,
                message: "file generator requires `path`".into(),
            })?;
            MeshGenerator::File(base.join(p.value))
        }
        other => return err(gen_line, format!("unknown generator `{other}`")),
    };
    if let Some(p) = path.filter(|_| !matches!(generator, MeshGenerator::File(_))) {
        return err(p.line, "`path` is only valid with `generator = file`");
    }
    let mut origin_point = Point::zeros();
    if let Some((o, line)) = origin {
        if o.is_empty() || o.len() > 3 {
            return err(line, "`origin` needs 1 to 3 values");
        }
        for (i, v) in o.into_iter().enumerate() {
            origin_point[i] = v;
        }
    }
    s.finish("mesh")?;
    Ok(MeshSpec {
        generator,
        origin: origin_point,
        line: gen_line,
    })
}

fn parse_material(mut s: Section, dim: usize) -> Result<Material, ConfigError> {
    let model = s.take("model").ok_or(ConfigError {
        line: s.line,
        message: "[material] requires `model`".into(),
    })?;
    let thermal = ThermalParameters {
        density: s.required_number("density", "material")?,
        specific_heat: s.required_number("specific_heat", "material")?,
        coupling: s.required_number("coupling", "material")?,
        conductivity: s.required_number("conductivity", "material")?,
        reference_temperature: s.required_number("reference_temperature", "material")?,
        reference_entropy: s.number("reference_entropy")?.map_or(0.0, |(v, _)| v),
    };
    let material = match model.value.to_ascii_lowercase().as_str() {
        "linear" => {
            let stiffness = s.number("stiffness")?;
            let lambda = s.number("lambda")?;
            let mu = s.number("mu")?;
            let relaxed = s.boolean("allow_nonpositive_temperature")?.unwrap_or(false);
            let m = match (stiffness, lambda, mu) {
                (Some((e, line)), None, None) => {
                    if dim != 1 {
                        return err(
                            line,
                            "`stiffness` only applies to one-dimensional meshes; use lambda and mu",
                        );
                    }
                    LinearThermoElastic::uniaxial(e, thermal)
                }
                (None, Some((l, _)), Some((m, _))) => {
                    LinearThermoElastic::isotropic(dim, l, m, thermal)
                }
                _ => {
                    return err(
                        model.line,
                        "linear model needs either `stiffness` or both `lambda` and `mu`",
                    )
                }
            };
            Material::Linear(
                m.or_else(|e| err(model.line, e.to_string()))?
                    .with_nonpositive_temperatures(relaxed),
            )
        }
        "nonlinear" => {
            let mu = s.required_number("mu", "material")?;
            let lambda = s.required_number("lambda", "material")?;
            Material::Nonlinear(
                NonlinearThermoElastic::new(dim, mu, lambda, thermal)
                    .or_else(|e| err(model.line, e.to_string()))?,
            )
        }
        other => return err(model.line, format!("unknown model `{other}`")),
    };
    s.finish("material")?;
    Ok(material)
}

fn vector_expr(e: Entry, dim: usize) -> Result<VectorExpr, ConfigError> {
    VectorExpr::parse(&e.value, dim).or_else(|x| err(e.line, x.to_string()))
}

fn scalar_expr(e: Entry) -> Result<Expr, ConfigError> {
    Expr::parse(&e.value).or_else(|x| err(e.line, x.to_string()))
}

fn is_harmonic(e: &Entry) -> bool {
    e.value.eq_ignore_ascii_case("harmonic")
}

fn parse_initial(s: Option<Section>, dim: usize) -> Result<InitialSpec, ConfigError> {
    let mut spec = InitialSpec {
        motion: None,
        velocity: None,
        thermal: None,
        temperature: None,
        harmonic: None,
    };
    let Some(mut s) = s else { return Ok(spec) };
    if let Some((v, line)) = s.list::<f64>("harmonic")? {
        if v.len() != 2 {
            return err(line, "`harmonic` needs omega and amplitude");
        }
        spec.harmonic = Some((v[0], v[1]));
    }
    spec.motion = s.take("motion").map(|e| vector_expr(e, dim)).transpose()?;
    spec.velocity = s
        .take("velocity")
        .map(|e| vector_expr(e, dim))
        .transpose()?;
    spec.thermal = s.take("thermal").map(scalar_expr).transpose()?;
    spec.temperature = s.take("temperature").map(scalar_expr).transpose()?;
    if spec.harmonic.is_some()
        && (spec.motion.is_some()
            || spec.velocity.is_some()
            || spec.thermal.is_some()
            || spec.temperature.is_some())
    {
        return err(
            s.line,
            "`harmonic` initial data cannot be combined with explicit fields",
        );
    }
    s.finish("initial")?;
    Ok(spec)
}

fn parse_bc(s: Option<Section>, dim: usize, harmonic: bool) -> Result<BcSpec, ConfigError> {
    let mut spec = BcSpec {
        motion: None,
        thermal: None,
        traction: None,
        entropy_influx: None,
        body_force: Point::zeros(),
        entropy_source: 0.0,
        load_end: None,
    };
    let Some(mut s) = s else { return Ok(spec) };

    let pair = |s: &mut Section,
                select: &str,
                field: &str|
     -> Result<Option<(Selector, Entry)>, ConfigError> {
        match (s.take(select), s.take(field)) {
            (None, None) => Ok(None),
            (Some(sel), Some(f)) => Ok(Some((Selector::parse(&sel.value, sel.line)?, f))),
            (Some(sel), None) => err(sel.line, format!("`{select}` needs a matching `{field}`")),
            (None, Some(f)) => err(f.line, format!("`{field}` needs a matching `{select}`")),
        }
    };
    let harmonic_check = |e: &Entry| -> Result<(), ConfigError> {
        if harmonic {
            Ok(())
        } else {
            err(
                e.line,
                "`harmonic` boundary data require `harmonic` initial data",
            )
        }
    };

    if let Some((sel, e)) = pair(&mut s, "mech_dirichlet", "motion")? {
        let field = if is_harmonic(&e) {
            harmonic_check(&e)?;
            Field::Harmonic
        } else {
            Field::Expr(vector_expr(e, dim)?)
        };
        spec.motion = Some((sel, field));
    }
    if let Some((sel, e)) = pair(&mut s, "thermal_dirichlet", "thermal")? {
        let field = if is_harmonic(&e) {
            harmonic_check(&e)?;
            Field::Harmonic
        } else {
            Field::Expr(scalar_expr(e)?)
        };
        spec.thermal = Some((sel, field));
    }
    if let Some((sel, e)) = pair(&mut s, "traction_facets", "traction")? {
        spec.traction = Some((sel, vector_expr(e, dim)?));
    }
    if let Some((sel, e)) = pair(&mut s, "entropy_flux_facets", "entropy_influx")? {
        spec.entropy_influx = Some((sel, scalar_expr(e)?));
    }
    if let Some((v, line)) = s.list::<f64>("body_force")? {
        if v.len() != dim {
            return err(line, format!("`body_force` needs {dim} values"));
        }
        v.into_iter()
            .enumerate()
            .for_each(|(i, c)| spec.body_force[i] = c);
    }
    spec.entropy_source = s.number("entropy_source")?.map_or(0.0, |(v, _)| v);
    if let Some((v, line)) = s.number("load_end")? {
        if v < 0.0 {
            return err(line, "`load_end` must be non-negative");
        }
        spec.load_end = Some(v);
    }
    s.finish("bc")?;
    Ok(spec)
}

/// Parses a scenario. Relative mesh paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ConfigError> {
    if text
        .lines()
        .all(|l| l.split('#').next().unwrap_or("").trim().is_empty())
    {
        return err(1, "empty scenario");
    }
    let last_line = text.lines().count();
    let mut sections = split_sections(text)?;
    let mut required = |name: &str| {
        sections.remove(name).ok_or(ConfigError {
            line: last_line,
            message: format!("missing section [{name}]"),
        })
    };
    let mesh_section = required("mesh")?;
    let material_section = required("material")?;
    let mut time = required("time")?;
    let initial_section = sections.remove("initial");
    let bc_section = sections.remove("bc");
    let output = sections.remove("output");

    let mesh = parse_mesh(mesh_section, base_dir)?;
    let dim = match mesh.dim() {
        Some(d) => d,
        None => mesh.build()?.dim(),
    };
    let material = parse_material(material_section, dim)?;
    let initial = parse_initial(initial_section, dim)?;
    if let Some((_, _)) = initial.harmonic {
        if dim != 1 || material.as_linear().is_none() {
            return err(
                mesh.line,
                "harmonic data need a one-dimensional mesh and the linear model",
            );
        }
    }
    let bc = parse_bc(bc_section, dim, initial.harmonic.is_some())?;

    let time_line = time.line;
    let dt = time.number("dt")?;
    let safety = time.number("safety")?;
    let time_step = match (dt, safety) {
        (Some(_), Some((_, line))) => return err(line, "give either `dt` or `safety`, not both"),
        (Some((v, line)), None) => {
            if v <= 0.0 {
                return err(line, "`dt` must be positive");
            }
            TimeStep::Fixed(v)
        }
        (None, Some((v, line))) => {
            if !(v > 0.0 && v <= 1.0) {
                return err(line, "`safety` must lie in (0, 1]");
            }
            TimeStep::Safety(v)
        }
        (None, None) => TimeStep::Safety(DEFAULT_SAFETY),
    };
    let end_time = time.required_number("end", "time")?;
    if end_time <= 0.0 {
        return err(time_line, "`end` must be positive");
    }
    time.finish("time")?;

    let (mut every, mut snapshot_every, mut scheme) = (1, 0, Scheme::F10);
    let mut output_line = 0;
    if let Some(mut out) = output {
        output_line = out.line;
        if let Some(e) = out.take("every") {
            every = e.value.parse().ok().filter(|&v| v > 0).ok_or(ConfigError {
                line: e.line,
                message: "`every` must be a positive integer".into(),
            })?;
        }
        if let Some(e) = out.take("snapshot_every") {
            snapshot_every = e
                .value
                .parse()
                .or_else(|_| err(e.line, "`snapshot_every` must be an integer"))?;
        }
        if let Some(e) = out.take("integrator") {
            scheme = e.value.parse().or_else(|m: String| err(e.line, m))?;
        }
        out.finish("output")?;
    }

    Ok(Scenario {
        mesh,
        material,
        initial,
        bc,
        time_step,
        end_time,
        every,
        snapshot_every,
        scheme,
        time_line,
        output_line,
    })
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text =
        std::fs::read_to_string(path).or_else(|e| err(0, format!("{}: {e}", path.display())))?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

impl Scenario {
    /// Copy with the mesh refined by `2^level` and a fixed time step halved
    /// as often.
    pub fn refined(&self, level: u32) -> Result<Self, ConfigError> {
        let factor = 1usize << level;
        let mut out = self.clone();
        out.mesh = self.mesh.refined(factor)?;
        if let TimeStep::Fixed(dt) = self.time_step {
            out.time_step = TimeStep::Fixed(dt / factor as f64);
        }
        out.every = 1;
        out.snapshot_every = 0;
        Ok(out)
    }

    pub fn harmonic_reference(&self) -> Result<Option<HarmonicReference>, ConfigError> {
        let Some((omega, amplitude)) = self.initial.harmonic else {
            return Ok(None);
        };
        let linear = self.material.as_linear().ok_or(ConfigError {
            line: self.mesh.line,
            message: "harmonic data need the linear model".into(),
        })?;
        HarmonicReference::from_omega(linear, omega, amplitude)
            .map(Some)
            .or_else(|e| err(self.mesh.line, e.to_string()))
    }

    /// Builds the mesh, boundary data and initial state.
    pub fn build(&self) -> Result<Simulation, ConfigError> {
        let mut mesh = self.mesh.build()?;
        let reference = self.harmonic_reference()?.map(Arc::new);

        let mut bc = BoundaryConditions {
            body_force: self.bc.body_force,
            entropy_source: self.bc.entropy_source,
            active_until: self.bc.load_end,
            ..Default::default()
        };
        // Labels from a mesh file are honoured only where the scenario
        // supplies matching data.
        let mut owned = BoundaryLabels::empty();
        if let Some((sel, field)) = &self.bc.motion {
            sel.apply(&mut mesh, BoundaryLabels::MECH_DIRICHLET)?;
            owned |= BoundaryLabels::MECH_DIRICHLET;
            bc.motion = Some(match field {
                Field::Expr(e) => {
                    let (v, r) = (e.clone(), e.clone());
                    Prescribed::new(
                        move |x: &Point, t| v.value(x, t),
                        move |x: &Point, t| r.rate(x, t),
                    )
                }
                Field::Harmonic => {
                    let (v, r) = (reference.clone().unwrap(), reference.clone().unwrap());
                    Prescribed::new(
                        move |x: &Point, t| Point::new(x.x + v.displacement(x.x, t), 0.0, 0.0),
                        move |x: &Point, t| Point::new(r.velocity(x.x, t), 0.0, 0.0),
                    )
                }
            });
        }
        if let Some((sel, field)) = &self.bc.thermal {
            sel.apply(&mut mesh, BoundaryLabels::THERMAL_DIRICHLET)?;
            owned |= BoundaryLabels::THERMAL_DIRICHLET;
            bc.thermal = Some(match field {
                Field::Expr(e) => {
                    let (v, r) = (e.clone(), e.clone());
                    Prescribed::new(
                        move |x: &Point, t| v.value(x, t),
                        move |x: &Point, t| r.rate(x, t),
                    )
                }
                Field::Harmonic => {
                    let (v, r) = (reference.clone().unwrap(), reference.clone().unwrap());
                    Prescribed::new(
                        move |x: &Point, t| v.thermal(x.x, t),
                        move |x: &Point, t| r.temperature(x.x, t),
                    )
                }
            });
        }
        if let Some((sel, e)) = &self.bc.traction {
            sel.apply(&mut mesh, BoundaryLabels::TRACTION)?;
            owned |= BoundaryLabels::TRACTION;
            let e = e.clone();
            bc.traction = Some(Arc::new(move |x: &Point, t| e.value(x, t)));
        }
        if let Some((sel, e)) = &self.bc.entropy_influx {
            sel.apply(&mut mesh, BoundaryLabels::ENTROPY_FLUX)?;
            owned |= BoundaryLabels::ENTROPY_FLUX;
            let e = e.clone();
            bc.entropy_influx = Some(Arc::new(move |x: &Point, t| e.value(x, t)));
        }
        mesh.clear_labels(BoundaryLabels::all().difference(owned));

        let (dt, steps) = match self.time_step {
            TimeStep::Fixed(dt) => {
                let steps = (self.end_time / dt).round();
                if steps < 1.0 || (steps * dt - self.end_time).abs() > 1e-9 * self.end_time {
                    return err(self.time_line, "`end` must be a whole number of time steps");
                }
                (dt, steps as usize)
            }
            TimeStep::Safety(safety) => {
                let limit = stable_dt(&mesh, &self.material, safety)
                    .or_else(|e| err(self.time_line, e.to_string()))?;
                let steps = (self.end_time / limit).ceil().max(1.0) as usize;
                (self.end_time / steps as f64, steps)
            }
        };
        if steps % self.every != 0 {
            return err(
                self.output_line,
                format!(
                    "output cadence {} does not divide the step count {steps}",
                    self.every
                ),
            );
        }

        let coords = mesh.coords().to_vec();
        let reference_temperature =
            thermovi_core::ThermoElasticMaterial::reference_temperature(&self.material);
        let (motion, velocity, thermal, temperature): (Vec<Point>, Vec<Point>, Vec<f64>, Vec<f64>) =
            if let Some(r) = &reference {
                (
                    coords
                        .iter()
                        .map(|x| Point::new(x.x + r.displacement(x.x, 0.0), 0.0, 0.0))
                        .collect(),
                    coords
                        .iter()
                        .map(|x| Point::new(r.velocity(x.x, 0.0), 0.0, 0.0))
                        .collect(),
                    coords.iter().map(|x| r.thermal(x.x, 0.0)).collect(),
                    coords.iter().map(|x| r.temperature(x.x, 0.0)).collect(),
                )
            } else {
                let i = &self.initial;
                (
                    coords
                        .iter()
                        .map(|x| i.motion.as_ref().map_or(*x, |e| e.value(x, 0.0)))
                        .collect(),
                    coords
                        .iter()
                        .map(|x| {
                            i.velocity
                                .as_ref()
                                .map_or(Point::zeros(), |e| e.value(x, 0.0))
                        })
                        .collect(),
                    coords
                        .iter()
                        .map(|x| i.thermal.as_ref().map_or(0.0, |e| e.value(x, 0.0)))
                        .collect(),
                    coords
                        .iter()
                        .map(|x| {
                            i.temperature
                                .as_ref()
                                .map_or(reference_temperature, |e| e.value(x, 0.0))
                        })
                        .collect(),
                )
            };

        let problem =
            Problem::new(mesh, self.material.clone(), bc).or_else(|e| err(0, e.to_string()))?;
        let initial = problem
            .initialize(&motion, &velocity, &thermal, &temperature)
            .or_else(|e| err(0, format!("initial state: {e}")))?;
        Ok(Simulation {
            problem,
            initial,
            reference: reference.map(|r| (*r).clone()),
            dt,
            steps,
            every: self.every,
            snapshot_every: self.snapshot_every,
            scheme: self.scheme,
        })
    }
}
